#pragma once

// Digital Butterworth band-pass: analog low-pass prototype -> analog band-pass
// -> bilinear transform with prewarped band edges. Realised as a cascade of
// second-order sections (each with zeros at z = +1 and z = -1).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "csibreath/dsp.hpp"

namespace csibreath {

/// b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
    double b0, b1, b2;
    double a1, a2;
};

class BandpassFilter {
public:
    BandpassFilter(int order, double low_hz, double high_hz, double rate) : rate_(rate), order_(order) {
        if (order < 1) throw std::invalid_argument("filter order must be >= 1");
        if (!(rate > 0.0)) throw std::invalid_argument("sampling rate must be positive");
        if (!(low_hz > 0.0 && low_hz < high_hz)) throw std::invalid_argument("band edges must satisfy 0 < low < high");
        if (!(high_hz < rate / 2.0)) throw std::invalid_argument("band-pass cutoff must lie below Nyquist");
        design(low_hz, high_hz);
    }

    explicit BandpassFilter(const FilterSpec& spec)
        : BandpassFilter(spec.bp_order, spec.bp_low, spec.bp_high, spec.target_rate) {}

    const std::vector<Biquad>& sections() const { return sections_; }
    double rate() const { return rate_; }
    int order() const { return order_; }

    /// H(e^{j 2 pi f / rate}) of the designed cascade.
    std::complex<double> response(double freq_hz) const {
        const std::complex<double> z1 = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / rate_);
        const std::complex<double> z2 = z1 * z1;
        std::complex<double> h = 1.0;
        for (const auto& s : sections_) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
        return h;
    }

    /// Single pass, with the filter state set to the steady state of a step
    /// at x[0] so a constant input produces no start-up transient.
    std::vector<double> filter(std::span<const double> x) const {
        std::vector<double> y(x.begin(), x.end());
        if (y.empty()) return y;
        double level = x.front();
        for (const auto& s : sections_) {
            // Direct form II transposed, steady-state for a constant input `level`.
            const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
            const double out_level = gain * level;
            double z1 = out_level - s.b0 * level;
            double z2 = s.b2 * level - s.a2 * out_level;
            for (auto& v : y) {
                const double in = v;
                const double out = s.b0 * in + z1;
                z1 = s.b1 * in - s.a1 * out + z2;
                z2 = s.b2 * in - s.a2 * out;
                v = out;
            }
            level = out_level;
        }
        return y;
    }

    /// Forward-backward application: zero phase, squared magnitude response.
    /// The input is extended by odd reflection before filtering to shorten edge transients.
    std::vector<double> filtfilt(std::span<const double> x) const {
        const std::size_t n = x.size();
        if (n < 2) return {x.begin(), x.end()};
        const std::size_t pad = std::min(n - 1, padding_length());
        std::vector<double> ext;
        ext.reserve(n + 2 * pad);
        for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
        ext.insert(ext.end(), x.begin(), x.end());
        for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);

        auto fwd = filter(ext);
        std::reverse(fwd.begin(), fwd.end());
        auto bwd = filter(fwd);
        std::reverse(bwd.begin(), bwd.end());
        return {bwd.begin() + static_cast<std::ptrdiff_t>(pad), bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
    }

    std::size_t padding_length() const { return static_cast<std::size_t>(std::ceil(2.0 * rate_ / low_)); }

private:
    void design(double low_hz, double high_hz) {
        using cd = std::complex<double>;
        low_ = low_hz;
        const double fs2 = 2.0 * rate_;
        const double w_lo = fs2 * std::tan(std::numbers::pi * low_hz / rate_);
        const double w_hi = fs2 * std::tan(std::numbers::pi * high_hz / rate_);
        const double bw = w_hi - w_lo;
        const double w0 = std::sqrt(w_lo * w_hi);

        std::vector<cd> analog;
        for (int k = 0; k < order_; ++k) {
            const cd p = std::polar(1.0, std::numbers::pi * (2.0 * k + order_ + 1) / (2.0 * order_));
            const cd half = p * (bw / 2.0);
            const cd root = std::sqrt(half * half - w0 * w0);
            analog.push_back(half + root);
            analog.push_back(half - root);
        }

        // Overall gain: analog numerator bw^N s^N, N zeros at s = 0 map to z = +1,
        // the N zeros at infinity map to z = -1.
        cd denom = 1.0;
        std::vector<cd> digital;
        for (const auto& s : analog) {
            digital.push_back((fs2 + s) / (fs2 - s));
            denom *= (fs2 - s);
        }
        const double gain = (std::pow(bw * fs2, order_) / denom).real();

        // Pair each pole with its conjugate; real poles pair with each other.
        std::vector<cd> upper;
        std::vector<double> reals;
        for (const auto& p : digital) {
            if (std::abs(p.imag()) < 1e-14 * std::max(1.0, std::abs(p))) reals.push_back(p.real());
            else if (p.imag() > 0) upper.push_back(p);
        }
        std::sort(reals.begin(), reals.end());
        const std::size_t n_sections = static_cast<std::size_t>(order_);
        const double section_gain = std::pow(std::abs(gain), 1.0 / static_cast<double>(n_sections));
        for (const auto& p : upper) sections_.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
        for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
            sections_.push_back({1.0, 0.0, -1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
        if (sections_.size() != n_sections) throw std::logic_error("unexpected pole layout in band-pass design");
        for (auto& s : sections_) {
            s.b0 *= section_gain;
            s.b2 *= section_gain;
        }
        if (gain < 0) {
            sections_.front().b0 = -sections_.front().b0;
            sections_.front().b2 = -sections_.front().b2;
        }
    }

    double rate_;
    int order_;
    double low_ = 0.0;
    std::vector<Biquad> sections_;
};

inline UniformSeries butterworth_bandpass(const UniformSeries& x, const FilterSpec& spec) {
    spec.validate();
    if (std::abs(x.rate - spec.target_rate) > 1e-9 * spec.target_rate)
        throw std::invalid_argument("series rate does not match the filter's target rate");
    const BandpassFilter bp(spec);
    auto y = spec.phase_mode == PhaseMode::zero_phase ? bp.filtfilt(x.samples) : bp.filter(x.samples);
    return {std::move(y), x.rate, x.start_time};
}

}  // namespace csibreath
