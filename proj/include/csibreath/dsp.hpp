#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "csibreath/types.hpp"

namespace csibreath {

enum class PhaseMode { zero_phase, causal };

/// Parameters of the per-subcarrier preprocessing chain.
struct FilterSpec {
    double hampel_window = 1.0;     // s
    double hampel_threshold = 1.7;  // multiples of the scaled MAD
    double target_rate = 60.0;      // Hz
    double ma_window = 1.5;         // s
    double bp_low = 0.2;            // Hz
    double bp_high = 0.4;           // Hz
    int bp_order = 4;
    PhaseMode phase_mode = PhaseMode::zero_phase;

    void validate() const {
        if (!(target_rate > 0.0)) throw std::invalid_argument("target rate must be positive");
        if (!(bp_low > 0.0 && bp_low < bp_high)) throw std::invalid_argument("band edges must satisfy 0 < low < high");
        if (!(bp_high < target_rate / 2.0)) throw std::invalid_argument("band-pass cutoff must lie below Nyquist");
        if (!(hampel_window > 0.0)) throw std::invalid_argument("hampel window must be positive");
        if (!(ma_window > 0.0)) throw std::invalid_argument("moving-average window must be positive");
        if (bp_order < 1) throw std::invalid_argument("filter order must be >= 1");
    }
};

/// Conventional start-up transient excluded from steady-state checks.
inline constexpr double kTransientTrimSeconds = 10.0;

inline constexpr double kMadScale = 1.4826;

/// Hampel identifier over raw samples with a centered window of 2*half_width+1,
/// truncated at the edges. The window is kept sorted while it slides, so the
/// median is read off directly and the median absolute deviation is the middle
/// of two ascending deviation runs walking outward from the median.
inline std::vector<double> hampel_samples(std::span<const double> x, std::size_t half_width, double threshold) {
    if (half_width < 1) throw std::invalid_argument("hampel window must span at least 3 samples");
    const std::size_t n = x.size();
    std::vector<double> out(x.begin(), x.end());
    if (n == 0) return out;
    std::vector<double> win;
    win.reserve(2 * half_width + 1);
    auto insert = [&](double v) { win.insert(std::upper_bound(win.begin(), win.end(), v), v); };
    auto erase = [&](double v) { win.erase(std::lower_bound(win.begin(), win.end(), v)); };

    // Ascending |w - m| by merging the two runs either side of `split`; returns
    // the k-th smallest (0-based) and stores the (k+1)-th in `next` when it exists.
    auto kth_deviation = [&](std::size_t split, double m, std::size_t k, double& next) {
        std::size_t left = split, right = split;
        double kth = 0.0;
        for (std::size_t taken = 0; taken <= k + 1 && taken < win.size(); ++taken) {
            const double d = (left > 0 && (right == win.size() || m - win[left - 1] <= win[right] - m))
                                 ? m - win[--left]
                                 : win[right++] - m;
            (taken == k ? kth : next) = d;
        }
        return kth;
    };

    for (std::size_t j = 0; j <= std::min(n - 1, half_width); ++j) insert(x[j]);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            if (i + half_width < n) insert(x[i + half_width]);
            if (i > half_width) erase(x[i - half_width - 1]);
        }
        const std::size_t w = win.size(), mid = w / 2;
        const double m = w % 2 == 1 ? win[mid] : 0.5 * (win[mid - 1] + win[mid]);
        const auto split = static_cast<std::size_t>(std::lower_bound(win.begin(), win.end(), m) - win.begin());
        double upper = 0.0;
        double mad;
        if (w % 2 == 1) {
            mad = kth_deviation(split, m, mid, upper);
        } else {
            const double lower = kth_deviation(split, m, mid - 1, upper);
            mad = 0.5 * (lower + upper);
        }
        if (std::abs(x[i] - m) > threshold * (kMadScale * mad)) out[i] = m;
    }
    return out;
}

inline std::size_t hampel_half_width(double window_seconds, double rate) {
    const double span = window_seconds * rate;
    if (!(span >= 3.0 - 1e-9)) throw std::invalid_argument("hampel window shorter than 3 samples");
    return static_cast<std::size_t>(std::floor(span / 2.0 + 1e-9));
}

inline UniformSeries hampel(const UniformSeries& x, double window, double threshold) {
    return {hampel_samples(x.samples, hampel_half_width(window, x.rate), threshold), x.rate, x.start_time};
}

/// Linear interpolation onto a uniform grid starting at the first timestamp.
/// The grid stops at the last input timestamp; nothing is extrapolated.
inline UniformSeries resample_linear(std::span<const double> t, std::span<const double> v, double target_rate) {
    if (t.size() != v.size()) throw std::invalid_argument("timestamps and values differ in length");
    if (t.size() < 2) throw std::invalid_argument("resampling needs at least 2 points");
    if (!(target_rate > 0.0)) throw std::invalid_argument("target rate must be positive");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("timestamps must be strictly increasing");

    const double t0 = t.front();
    const double span = t.back() - t0;
    const auto n_out = static_cast<std::size_t>(std::floor(span * target_rate + 1e-9)) + 1;
    UniformSeries out{std::vector<double>(n_out), target_rate, t0};
    std::size_t j = 0;
    for (std::size_t k = 0; k < n_out; ++k) {
        const double tk = t0 + static_cast<double>(k) / target_rate;
        while (j + 2 < t.size() && t[j + 1] <= tk) ++j;
        double frac = (tk - t[j]) / (t[j + 1] - t[j]);
        frac = std::clamp(frac, 0.0, 1.0);
        out.samples[k] = frac == 0.0 ? v[j] : (frac == 1.0 ? v[j + 1] : v[j] + frac * (v[j + 1] - v[j]));
    }
    return out;
}

inline std::size_t moving_average_length(double window_seconds, double rate) {
    const auto n = static_cast<long>(std::lround(window_seconds * rate));
    if (n < 1) throw std::invalid_argument("moving-average window shorter than one sample");
    return static_cast<std::size_t>(n);
}

/// Centered boxcar of `length` samples; edge windows shrink and divide by
/// their actual size. For even lengths the extra sample sits on the left.
inline std::vector<double> moving_average_samples(std::span<const double> x, std::size_t length) {
    if (length < 1) throw std::invalid_argument("moving-average window shorter than one sample");
    const std::size_t n = x.size();
    const std::size_t left = length / 2;
    const std::size_t right = length - 1 - left;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= left ? i - left : 0;
        const std::size_t hi = std::min(n - 1, i + right);
        double acc = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) acc += x[j];
        out[i] = acc / static_cast<double>(hi - lo + 1);
    }
    return out;
}

inline UniformSeries moving_average(const UniformSeries& x, double window) {
    return {moving_average_samples(x.samples, moving_average_length(window, x.rate)), x.rate, x.start_time};
}

struct Normalized {
    UniformSeries series;
    bool degenerate = false;
};

inline constexpr double kDegenerateStd = 1e-12;

/// Zero mean, unit population standard deviation. Near-constant input maps
/// to all zeros and is flagged degenerate.
inline std::vector<double> znormalize_samples(std::span<const double> x, bool* degenerate = nullptr) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    std::vector<double> out(x.size(), 0.0);
    const bool degen = !(sd >= kDegenerateStd);
    if (degenerate) *degenerate = degen;
    if (degen) return out;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean) / sd;
    return out;
}

inline Normalized znormalize(const UniformSeries& x) {
    if (x.size() < 2) throw std::invalid_argument("z-normalization needs at least 2 samples");
    Normalized out;
    out.series = {znormalize_samples(x.samples, &out.degenerate), x.rate, x.start_time};
    return out;
}

}  // namespace csibreath
