#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "csibreath/dsp.hpp"
#include "csibreath/selection.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

/// Product-moment correlation; nullopt when either side has (near) zero variance.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("pearson: length mismatch");
    if (a.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    const double sda = std::sqrt(saa / n), sdb = std::sqrt(sbb / n);
    if (!(sda >= kDegenerateStd) || !(sdb >= kDegenerateStd)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Minimum overlap between two series at any candidate lag.
inline constexpr double kMinAlignOverlapSeconds = 30.0;

/// Lag (s) maximizing the normalized cross-correlation of a and b, such that
/// b(t) ~ a(t - lag). Integer-lag search over [-max_lag, max_lag], parabolic
/// sub-sample refinement, ties broken toward the smaller |lag|. With
/// `by_magnitude` the search maximizes |r| instead (polarity-agnostic).
inline double align(const UniformSeries& a, const UniformSeries& b, double max_lag, bool by_magnitude = false) {
    if (std::abs(a.rate - b.rate) > 1e-9 * a.rate) throw std::invalid_argument("align: series rates differ");
    if (max_lag < 0) throw std::invalid_argument("align: max_lag must be non-negative");
    const double rate = a.rate;
    const auto max_l = static_cast<long>(std::floor(max_lag * rate + 1e-9));
    const auto na = static_cast<long>(a.size()), nb = static_cast<long>(b.size());
    auto overlap = [&](long lag) { return std::min(na, nb - lag) - std::max(0L, -lag); };
    const auto min_overlap = static_cast<long>(std::ceil(kMinAlignOverlapSeconds * rate - 1e-9));
    if (std::min(overlap(max_l), overlap(-max_l)) < min_overlap || overlap(0) < min_overlap)
        throw std::invalid_argument("align: insufficient overlap");

    auto score = [&](long lag) -> std::optional<double> {
        const long i0 = std::max(0L, -lag);
        const long len = overlap(lag);
        auto r = pearson(std::span<const double>(a.samples.data() + i0, static_cast<std::size_t>(len)),
                         std::span<const double>(b.samples.data() + i0 + lag, static_cast<std::size_t>(len)));
        if (r && by_magnitude) *r = std::abs(*r);
        return r;
    };

    std::map<long, double> scores;
    long best = 0;
    std::optional<double> best_r;
    for (long k = 0; k <= 2 * max_l; ++k) {
        const long lag = (k % 2 == 1) ? (k + 1) / 2 : -(k / 2);
        auto r = score(lag);
        if (!r) continue;
        scores[lag] = *r;
        if (!best_r || *r > *best_r) {
            best_r = r;
            best = lag;
        }
    }
    if (!best_r) throw std::invalid_argument("align: signals are degenerate");
    double delta = 0.0;
    auto lo = scores.find(best - 1), hi = scores.find(best + 1);
    if (lo != scores.end() && hi != scores.end()) {
        const double denom = lo->second - 2.0 * *best_r + hi->second;
        if (denom < 0.0) delta = std::clamp(0.5 * (lo->second - hi->second) / denom, -0.5, 0.5);
    }
    return (static_cast<double>(best) + delta) / rate;
}

struct WindowedCorrelation {
    double mean = 0.0;
    std::vector<std::optional<double>> per_window;  // nullopt = degenerate window, excluded from the mean
};

inline WindowedCorrelation windowed_mean_correlation(const UniformSeries& sig, const UniformSeries& ref, double window = 10.0) {
    if (sig.size() != ref.size() || std::abs(sig.rate - ref.rate) > 1e-9 * sig.rate)
        throw std::invalid_argument("windowed correlation: series are not on the same grid");
    const auto w = static_cast<std::size_t>(std::lround(window * sig.rate));
    if (w < 2) throw std::invalid_argument("windowed correlation: window shorter than 2 samples");
    WindowedCorrelation out;
    double sum = 0.0;
    std::size_t valid = 0;
    for (const auto& span : partition_windows(sig.size(), w)) {
        if (span.length < 2) {
            out.per_window.push_back(std::nullopt);
            continue;
        }
        auto r = pearson(std::span<const double>(sig.samples.data() + span.start, span.length),
                         std::span<const double>(ref.samples.data() + span.start, span.length));
        out.per_window.push_back(r);
        if (r) {
            sum += *r;
            ++valid;
        }
    }
    if (valid == 0) throw std::invalid_argument("windowed correlation: no valid windows");
    out.mean = sum / static_cast<double>(valid);
    return out;
}

/// Mean absolute per-epoch difference of cycle counts.
inline double mad_rr(std::span<const int> counts_ref, std::span<const int> counts_sig) {
    if (counts_ref.size() != counts_sig.size()) throw std::invalid_argument("mad_rr: length mismatch");
    if (counts_ref.empty()) throw std::invalid_argument("mad_rr: no epochs");
    long total = 0;
    for (std::size_t i = 0; i < counts_ref.size(); ++i) total += std::abs(counts_ref[i] - counts_sig[i]);
    return static_cast<double>(total) / static_cast<double>(counts_ref.size());
}

struct EpochErrorStats {
    double pct_ge1 = 0.0;
    double pct_ge2 = 0.0;
    std::map<int, int> histogram;  // signed difference (signal - reference) -> epochs

    bool operator==(const EpochErrorStats&) const = default;
};

inline EpochErrorStats epoch_error_stats(std::span<const int> counts_ref, std::span<const int> counts_sig) {
    if (counts_ref.size() != counts_sig.size()) throw std::invalid_argument("epoch_error_stats: length mismatch");
    EpochErrorStats out;
    if (counts_ref.empty()) return out;
    int ge1 = 0, ge2 = 0;
    for (std::size_t i = 0; i < counts_ref.size(); ++i) {
        const int d = counts_sig[i] - counts_ref[i];
        ++out.histogram[d];
        if (std::abs(d) >= 1) ++ge1;
        if (std::abs(d) >= 2) ++ge2;
    }
    const double n = static_cast<double>(counts_ref.size());
    out.pct_ge1 = 100.0 * ge1 / n;
    out.pct_ge2 = 100.0 * ge2 / n;
    return out;
}

}  // namespace csibreath
