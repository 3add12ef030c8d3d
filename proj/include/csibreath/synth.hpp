#pragma once

// Synthetic CSI records with planted breathing ground truth.
//
// Model: subcarrier k magnitude = baseline_k + weight_k * b(t) + noise, where
// b(t) = A(t) sin(2 pi phi(t)) and phi advances at the scheduled breathing rate
// with continuous phase across schedule segments. Frame times follow a nominal
// period with Gaussian jitter. Sparse outliers of +-outlier_scale signal
// standard deviations are added on top. The reference is the clean b(t).

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "csibreath/respiration.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

struct BreathSegment {
    double start = 0.0;  // s
    double rate_bpm = 15.0;
    double amplitude = 1.0;
    bool operator==(const BreathSegment&) const = default;
};

/// Breathing rates accepted without `allow_out_of_band` (the 0.2-0.4 Hz pass band).
inline constexpr double kMinInBandBpm = 12.0;
inline constexpr double kMaxInBandBpm = 24.0;

struct SynthSpec {
    double duration = 300.0;  // s
    std::size_t n_subcarriers = CsiRecord::kDefaultSubcarriers;
    double nominal_rate = CsiRecord::kDefaultNominalRate;
    double jitter_std = 0.002;  // s
    std::vector<BreathSegment> breathing{{0.0, 15.0, 1.0}};
    double initial_phase = 0.0;  // cycles
    std::vector<double> weights;    // signed coupling; empty = drawn from the seed
    std::vector<double> baselines;  // empty = drawn from the seed
    double noise_snr_db = std::numeric_limits<double>::infinity();
    // Amplitude the SNR is referenced to; 0 = the largest scheduled amplitude.
    double noise_reference_amplitude = 0.0;
    double outlier_rate = 0.01;
    double outlier_scale = 20.0;
    std::uint64_t seed = 1;
    bool allow_out_of_band = false;
    bool complex_output = false;
    double value_quantum = 0.0;  // round magnitudes to this step; 0 = exact
    double reference_rate = ReferenceTrace::kDefaultRate;
    double truth_rate = 60.0;
    double epoch_length = 30.0;
    RecordMeta meta;

    void validate() const {
        if (!(duration > 0.0)) throw std::invalid_argument("synth: duration must be positive");
        if (n_subcarriers < 1) throw std::invalid_argument("synth: need at least one subcarrier");
        if (!(nominal_rate > 0.0)) throw std::invalid_argument("synth: nominal rate must be positive");
        if (jitter_std < 0.0) throw std::invalid_argument("synth: jitter must be non-negative");
        if (breathing.empty() || breathing.front().start != 0.0)
            throw std::invalid_argument("synth: breathing schedule must start at t = 0");
        for (std::size_t i = 0; i < breathing.size(); ++i) {
            const auto& s = breathing[i];
            if (i > 0 && !(s.start > breathing[i - 1].start))
                throw std::invalid_argument("synth: schedule segments must start in increasing order");
            if (!(s.amplitude > 0.0) || !std::isfinite(s.amplitude))
                throw std::invalid_argument("synth: amplitudes must be positive");
            const bool in_band = s.rate_bpm >= kMinInBandBpm && s.rate_bpm <= kMaxInBandBpm;
            if (!(s.rate_bpm > 0.0) || (!allow_out_of_band && !in_band))
                throw std::invalid_argument("synth: breathing rate " + std::to_string(s.rate_bpm) +
                                            " bpm outside [12, 24] (set allow_out_of_band to override)");
        }
        if (!weights.empty() && weights.size() != n_subcarriers) throw std::invalid_argument("synth: weights size mismatch");
        if (!baselines.empty() && baselines.size() != n_subcarriers)
            throw std::invalid_argument("synth: baselines size mismatch");
        for (double w : weights)
            if (!std::isfinite(w)) throw std::invalid_argument("synth: weights must be finite");
        for (double b : baselines)
            if (!std::isfinite(b)) throw std::invalid_argument("synth: baselines must be finite");
        if (!(outlier_rate >= 0.0 && outlier_rate < 1.0)) throw std::invalid_argument("synth: outlier rate must be in [0, 1)");
        if (!(reference_rate > 0.0) || !(truth_rate > 0.0) || !(epoch_length > 0.0))
            throw std::invalid_argument("synth: rates and epoch length must be positive");
        if (value_quantum < 0.0) throw std::invalid_argument("synth: quantum must be non-negative");
    }

    double reference_amplitude() const {
        if (noise_reference_amplitude > 0.0) return noise_reference_amplitude;
        double a = 0.0;
        for (const auto& s : breathing) a = std::max(a, s.amplitude);
        return a;
    }
};

/// Piecewise-linear breathing phase (in cycles) with continuous value across segments.
class BreathingSchedule {
public:
    BreathingSchedule(std::vector<BreathSegment> segments, double initial_phase)
        : segments_(std::move(segments)) {
        double phase = initial_phase;
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            phase_at_start_.push_back(phase);
            if (i + 1 < segments_.size())
                phase += segments_[i].rate_bpm / 60.0 * (segments_[i + 1].start - segments_[i].start);
        }
    }

    std::size_t segment_at(double t) const {
        std::size_t j = 0;
        while (j + 1 < segments_.size() && segments_[j + 1].start <= t) ++j;
        return j;
    }

    double phase(double t) const {
        const auto j = segment_at(t);
        return phase_at_start_[j] + segments_[j].rate_bpm / 60.0 * (t - segments_[j].start);
    }

    double value(double t) const {
        return segments_[segment_at(t)].amplitude * std::sin(2.0 * std::numbers::pi * phase(t));
    }

    /// Times in [0, end] where the phase crosses k + 1/4 (waveform peaks).
    std::vector<double> peak_times(double end) const {
        std::vector<double> out;
        for (std::size_t j = 0; j < segments_.size(); ++j) {
            const double a = segments_[j].start;
            const double b = j + 1 < segments_.size() ? std::min(end, segments_[j + 1].start) : end;
            if (a > end) break;
            const double f = segments_[j].rate_bpm / 60.0;
            const double pa = phase_at_start_[j];
            const double pb = pa + f * (b - a);
            for (double k = std::ceil(pa - 0.25); k + 0.25 <= pb; k += 1.0) {
                const double t = a + (k + 0.25 - pa) / f;
                if (t >= a && (out.empty() || t > out.back()) && (j + 1 == segments_.size() || t < b)) out.push_back(t);
            }
        }
        return out;
    }

private:
    std::vector<BreathSegment> segments_;
    std::vector<double> phase_at_start_;
};

struct GroundTruth {
    UniformSeries breathing;             // clean b(t) on the truth grid
    std::vector<double> cycle_boundaries;  // peak times, s
    std::vector<double> epoch_cycles;      // fractional per-epoch counts
    std::vector<int> epoch_counts;         // round-half-up of epoch_cycles
    ReferenceTrace reference{{0.0, 0.0}};  // clean b(t) at the reference rate
    std::size_t outlier_count = 0;
    std::size_t value_count = 0;  // frames x subcarriers
};

/// Fractional cycles per epoch from peak-to-peak boundaries over [0, end]: each
/// cycle spreads uniformly over its interval; the partial cycles before the
/// first and after the last boundary are scaled by the adjacent cycle length.
inline std::vector<double> tally_epoch_cycles(const std::vector<double>& boundaries, double end, double epoch_length) {
    const auto epochs = static_cast<std::size_t>(std::floor(end / epoch_length + 1e-9));
    std::vector<double> counts(epochs, 0.0);
    if (boundaries.size() < 2) return counts;
    auto spread = [&](double a, double b, double cycles) {
        for (std::size_t e = 0; e < epochs; ++e) {
            const double lo = std::max(a, e * epoch_length), hi = std::min(b, (e + 1) * epoch_length);
            if (hi > lo) counts[e] += cycles * (hi - lo) / (b - a);
        }
    };
    const auto& p = boundaries;
    if (p.front() > 0.0) spread(0.0, p.front(), std::min(1.0, p.front() / (p[1] - p[0])));
    for (std::size_t i = 0; i + 1 < p.size(); ++i) spread(p[i], p[i + 1], 1.0);
    if (p.back() < end) spread(p.back(), end, std::min(1.0, (end - p.back()) / (p[p.size() - 1] - p[p.size() - 2])));
    return counts;
}

struct SynthOutput {
    CsiRecord record;
    GroundTruth truth;
};

inline SynthOutput generate(const SynthSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t m = spec.n_subcarriers;

    std::vector<double> weights = spec.weights;
    if (weights.empty())
        for (std::size_t k = 0; k < m; ++k) weights.push_back((unit(rng) < 0.5 ? -1.0 : 1.0) * (0.2 + 0.8 * unit(rng)));
    std::vector<double> baselines = spec.baselines;
    if (baselines.empty())
        for (std::size_t k = 0; k < m; ++k) baselines.push_back(20.0 + 20.0 * unit(rng));
    std::vector<double> phases(m, 0.0);
    if (spec.complex_output)
        for (auto& ph : phases) ph = 2.0 * std::numbers::pi * unit(rng);

    const BreathingSchedule schedule(spec.breathing, spec.initial_phase);
    const double a_ref = spec.reference_amplitude();
    const double snr_factor = std::isinf(spec.noise_snr_db) ? 0.0 : std::pow(10.0, -spec.noise_snr_db / 20.0);

    // Frame times: nominal period plus jitter, clamped to stay increasing,
    // continuing until the requested duration is covered.
    const double period = 1.0 / spec.nominal_rate;
    std::vector<double> times{0.0};
    while (times.back() < spec.duration) {
        const double step = std::max(0.1 * period, period + spec.jitter_std * gauss(rng));
        times.push_back(times.back() + step);
    }

    GroundTruth truth;
    std::vector<CsiFrame> frames(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double b = schedule.value(times[i]);
        auto& f = frames[i];
        f.timestamp = times[i];
        std::vector<double> mags(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double signal_sd = std::abs(weights[k]) * a_ref / std::numbers::sqrt2;
            double v = baselines[k] + weights[k] * b;
            if (snr_factor > 0.0) v += signal_sd * snr_factor * gauss(rng);
            if (spec.outlier_rate > 0.0 && unit(rng) < spec.outlier_rate) {
                v += (unit(rng) < 0.5 ? -1.0 : 1.0) * spec.outlier_scale * signal_sd;
                ++truth.outlier_count;
            }
            v = std::max(v, 0.0);
            if (spec.value_quantum > 0.0) v = std::round(v / spec.value_quantum) * spec.value_quantum;
            mags[k] = v;
        }
        if (spec.complex_output) {
            f.complex_values.resize(m);
            for (std::size_t k = 0; k < m; ++k) f.complex_values[k] = std::polar(mags[k], phases[k]);
        } else {
            f.magnitudes = std::move(mags);
        }
    }
    truth.value_count = times.size() * m;

    const double end = times.back();
    const auto n_truth = static_cast<std::size_t>(std::floor(end * spec.truth_rate + 1e-9)) + 1;
    truth.breathing = {std::vector<double>(n_truth), spec.truth_rate, 0.0};
    for (std::size_t i = 0; i < n_truth; ++i) truth.breathing.samples[i] = schedule.value(static_cast<double>(i) / spec.truth_rate);

    const auto n_ref = static_cast<std::size_t>(std::floor(end * spec.reference_rate + 1e-9)) + 1;
    std::vector<double> ref(n_ref);
    for (std::size_t i = 0; i < n_ref; ++i) ref[i] = schedule.value(static_cast<double>(i) / spec.reference_rate);
    truth.reference = ReferenceTrace(std::move(ref), spec.reference_rate, 0.0);

    truth.cycle_boundaries = schedule.peak_times(end);
    truth.epoch_cycles = tally_epoch_cycles(truth.cycle_boundaries, end, spec.epoch_length);
    for (double c : truth.epoch_cycles) truth.epoch_counts.push_back(static_cast<int>(round_half_up(c)));

    return {CsiRecord(spec.complex_output ? SampleKind::complex : SampleKind::magnitude, m, std::move(frames),
                      spec.nominal_rate, spec.meta),
            std::move(truth)};
}

inline nlohmann::json truth_json(const SynthSpec& spec, const GroundTruth& truth) {
    nlohmann::json schedule = nlohmann::json::array();
    for (const auto& s : spec.breathing) schedule.push_back({{"start", s.start}, {"rate_bpm", s.rate_bpm}, {"amplitude", s.amplitude}});
    return {{"truth", "v1"},
            {"seed", spec.seed},
            {"duration", spec.duration},
            {"noise_snr_db", std::isinf(spec.noise_snr_db) ? nlohmann::json(nullptr) : nlohmann::json(spec.noise_snr_db)},
            {"schedule", schedule},
            {"initial_phase", spec.initial_phase},
            {"epoch_length", spec.epoch_length},
            {"cycle_boundaries", truth.cycle_boundaries},
            {"epoch_cycles", truth.epoch_cycles},
            {"epoch_counts", truth.epoch_counts},
            {"outlier_count", truth.outlier_count}};
}

// ---- subject suite ---------------------------------------------------------

struct SubjectProfile {
    std::string subject;
    double amplitude_factor = 1.0;
    std::map<Posture, double> posture_attenuation{{Posture::supine, 1.0}, {Posture::side, 0.8}, {Posture::prone, 0.5}};
    double base_rate_bpm = 15.0;
};

inline std::vector<SubjectProfile> default_profiles() {
    const double factors[] = {1.1, 0.8, 1.0, 0.9, 1.2};
    const double rates[] = {14.5, 16.0, 15.2, 17.3, 13.8};
    std::vector<SubjectProfile> out;
    for (int i = 0; i < 5; ++i) {
        SubjectProfile p;
        p.subject = "s" + std::to_string(i + 1);
        p.amplitude_factor = factors[i];
        p.base_rate_bpm = rates[i];
        out.push_back(p);
    }
    return out;
}

struct SuiteOptions {
    double duration = 300.0;
    double noise_snr_db = 20.0;
    std::uint64_t seed = 7;
    std::vector<Posture> postures{Posture::supine, Posture::side, Posture::prone};
    double segment_length = 40.0;  // s between breathing-rate changes
    double rate_spread_bpm = 2.0;  // +- around the subject's base rate
    bool complex_output = false;
    double value_quantum = 0.0;
};

struct SuiteRecord {
    std::string id;
    SynthSpec spec;
    SynthOutput data;
};

/// One record per subject x posture. Posture attenuation scales the breathing
/// amplitude while the noise stays referenced to the subject's unattenuated
/// amplitude, so attenuated postures have a lower effective SNR.
inline std::vector<SuiteRecord> subject_suite(const std::vector<SubjectProfile>& profiles, const SuiteOptions& opt = {}) {
    if (profiles.empty()) throw std::invalid_argument("subject suite needs at least one profile");
    std::vector<SuiteRecord> out;
    for (std::size_t s = 0; s < profiles.size(); ++s) {
        const auto& prof = profiles[s];
        for (Posture posture : opt.postures) {
            const auto pi = static_cast<std::uint64_t>(posture);
            SynthSpec spec;
            spec.duration = opt.duration;
            spec.noise_snr_db = opt.noise_snr_db;
            spec.seed = opt.seed * 1000003ULL + s * 101ULL + pi * 7ULL + 1;
            spec.complex_output = opt.complex_output;
            spec.value_quantum = opt.value_quantum;
            spec.meta = {prof.subject, posture, {"synthetic"}};
            auto it = prof.posture_attenuation.find(posture);
            const double att = it == prof.posture_attenuation.end() ? 1.0 : it->second;
            const double amp = prof.amplitude_factor * att;
            spec.noise_reference_amplitude = prof.amplitude_factor;

            std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            spec.breathing.clear();
            for (double t = 0.0; t < opt.duration; t += opt.segment_length) {
                double rate = prof.base_rate_bpm + opt.rate_spread_bpm * (2.0 * unit(rng) - 1.0);
                rate = std::clamp(rate, kMinInBandBpm, kMaxInBandBpm);
                spec.breathing.push_back({t, rate, amp * (0.9 + 0.2 * unit(rng))});
            }
            spec.initial_phase = unit(rng);
            std::string id = prof.subject + "_" + to_string(posture);
            auto data = generate(spec);
            out.push_back({std::move(id), std::move(spec), std::move(data)});
        }
    }
    return out;
}

}  // namespace csibreath
