#pragma once

// Respiratory-cycle detection by turning points, and per-epoch cycle counting.
//
// A cycle runs from one peak to the next. Each cycle contributes to an epoch
// in proportion to its temporal overlap with it. The stretch between the
// record start and the first peak (and between the last peak and the record
// end) counts as a partial cycle, scaled by the duration of the adjacent full
// cycle, so a steady rhythm of f Hz yields f * epoch_length cycles per epoch.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "csibreath/text.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

struct DetectionParams {
    double min_separation = 1.2;  // s, between consecutive same-kind points
    double min_prominence = 0.2;  // fraction of (P90 - P10)
    double refine_half_window = 0.25;  // s, quadratic fit around each extremum
};

struct TurningPoints {
    std::vector<std::size_t> peaks;
    std::vector<std::size_t> troughs;
    std::vector<double> peak_times;    // sub-sample refined, s
    std::vector<double> trough_times;  // sub-sample refined, s
    DetectionParams params;
    double span_start = 0.0;  // covered interval of the analysed series
    double span_end = 0.0;
};

struct EpochGrid {
    double start = 0.0;
    double length = 30.0;
    std::size_t count = 0;

    static EpochGrid tiling(const UniformSeries& x, double length) {
        if (!(length > 0.0)) throw std::invalid_argument("epoch length must be positive");
        return {x.start_time, length, static_cast<std::size_t>(std::floor(x.span() / length + 1e-9))};
    }
};

struct EpochSummary {
    std::size_t epoch_index = 0;
    double start = 0.0;
    double length = 30.0;
    double cycle_count = 0.0;
    long integer_count = 0;
    double rr_bpm = 0.0;

    bool operator==(const EpochSummary&) const = default;
};

/// Slack so that a count landing a hair below .5 through sub-sample timing
/// error still rounds up.
inline constexpr double kRoundingSlack = 1e-3;

inline long round_half_up(double cycles) { return static_cast<long>(std::floor(cycles + 0.5 + kRoundingSlack)); }

/// Linearly interpolated empirical quantile at q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
    if (v.empty()) throw std::invalid_argument("quantile of empty series");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

namespace detail {

struct Extremum {
    std::size_t index;
    bool peak;
    double value;
};

// Local extrema by neighbour comparison; a flat top/bottom reports its middle sample.
inline std::vector<Extremum> local_extrema(std::span<const double> x) {
    std::vector<Extremum> out;
    const std::size_t n = x.size();
    std::size_t i = 1;
    while (i + 1 < n) {
        if (x[i] == x[i - 1]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && x[j + 1] == x[i]) ++j;
        if (j + 1 >= n) break;
        const bool up = x[i] > x[i - 1];
        if (up && x[j + 1] < x[i]) out.push_back({(i + j) / 2, true, x[i]});
        if (!up && x[j + 1] > x[i]) out.push_back({(i + j) / 2, false, x[i]});
        i = j + 1;
    }
    return out;
}

// Height of a peak above the higher of its two flanking minima, each taken up
// to the nearest strictly higher sample (or the series edge). Minima mirror this.
inline double prominence(std::span<const double> x, std::size_t i, bool peak) {
    const double s = peak ? 1.0 : -1.0;
    const double v = s * x[i];
    double left = v;
    for (std::size_t k = i; k-- > 0;) {
        const double u = s * x[k];
        if (u > v) break;
        left = std::min(left, u);
    }
    double right = v;
    for (std::size_t k = i + 1; k < x.size(); ++k) {
        const double u = s * x[k];
        if (u > v) break;
        right = std::min(right, u);
    }
    return v - std::max(left, right);
}

inline bool more_extreme(const Extremum& a, const Extremum& b) { return a.peak ? a.value > b.value : a.value < b.value; }

// Vertex of a least-squares parabola over x[i-h .. i+h], in fractional samples.
inline double refine_extremum(std::span<const double> x, std::size_t i, std::size_t h) {
    const std::size_t lo = i >= h ? i - h : 0;
    const std::size_t hi = std::min(x.size() - 1, i + h);
    if (hi - lo < 2) return static_cast<double>(i);
    double s0 = 0, s1 = 0, s2 = 0, s3 = 0, s4 = 0, y0 = 0, y1 = 0, y2 = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const double u = static_cast<double>(k) - static_cast<double>(i);
        const double y = x[k];
        s0 += 1; s1 += u; s2 += u * u; s3 += u * u * u; s4 += u * u * u * u;
        y0 += y; y1 += u * y; y2 += u * u * y;
    }
    // Normal equations for y = c0 + c1 u + c2 u^2 (Cramer's rule).
    const double det = s0 * (s2 * s4 - s3 * s3) - s1 * (s1 * s4 - s2 * s3) + s2 * (s1 * s3 - s2 * s2);
    if (std::abs(det) < 1e-300) return static_cast<double>(i);
    const double c1 = (s0 * (y1 * s4 - s3 * y2) - y0 * (s1 * s4 - s2 * s3) + s2 * (s1 * y2 - y1 * s2)) / det;
    const double c2 = (s0 * (s2 * y2 - y1 * s3) - s1 * (s1 * y2 - y1 * s2) + y0 * (s1 * s3 - s2 * s2)) / det;
    if (c2 == 0.0) return static_cast<double>(i);
    const double u = -c1 / (2.0 * c2);
    if (!std::isfinite(u) || std::abs(u) > static_cast<double>(h)) return static_cast<double>(i);
    return std::clamp(static_cast<double>(i) + u, static_cast<double>(lo), static_cast<double>(hi));
}

}  // namespace detail

inline TurningPoints detect_turning_points(const UniformSeries& x, const DetectionParams& params = {}) {
    if (x.size() < 3) throw std::invalid_argument("turning-point detection needs at least 3 samples");
    TurningPoints out;
    out.params = params;
    out.span_start = x.start_time;
    out.span_end = x.start_time + x.span();

    const std::span<const double> s(x.samples);
    const double amplitude = quantile(x.samples, 0.9) - quantile(x.samples, 0.1);
    if (!(amplitude > 0.0)) return out;
    const double min_prom = params.min_prominence * amplitude;

    std::vector<detail::Extremum> pts;
    for (const auto& e : detail::local_extrema(s))
        if (detail::prominence(s, e.index, e.peak) >= min_prom) pts.push_back(e);

    const double min_gap = params.min_separation * x.rate;
    bool changed = true;
    while (changed) {
        changed = false;
        // Alternation: of two consecutive same-kind points keep the more extreme.
        std::vector<detail::Extremum> alt;
        for (const auto& p : pts) {
            if (!alt.empty() && alt.back().peak == p.peak) {
                if (detail::more_extreme(p, alt.back())) alt.back() = p;
                continue;
            }
            alt.push_back(p);
        }
        changed = alt.size() != pts.size();
        pts = std::move(alt);
        // Separation: drop the less extreme of the first too-close same-kind pair.
        for (std::size_t i = 0; i + 2 < pts.size(); ++i) {
            if (static_cast<double>(pts[i + 2].index - pts[i].index) < min_gap) {
                const bool keep_later = detail::more_extreme(pts[i + 2], pts[i]);
                pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(keep_later ? i : i + 2));
                changed = true;
                break;
            }
        }
    }

    const auto h = static_cast<std::size_t>(std::max(1.0, std::round(params.refine_half_window * x.rate)));
    for (const auto& p : pts) {
        const double pos = detail::refine_extremum(s, p.index, h);
        const double t = x.start_time + pos / x.rate;
        if (p.peak) {
            out.peaks.push_back(p.index);
            out.peak_times.push_back(t);
        } else {
            out.troughs.push_back(p.index);
            out.trough_times.push_back(t);
        }
    }
    return out;
}

/// Upper bound, in adjacent-cycle lengths, on the partial cycle credited before
/// the first or after the last peak. A peak too close to an edge lacks the
/// prominence to be detected, so the true gap can exceed one cycle.
inline constexpr double kMaxEdgeCycles = 1.5;

/// Fractional per-epoch cycle counts from peak times over [span_start, span_end].
/// Stretches before the first and after the last peak count as partial cycles
/// scaled by the adjacent cycle length.
inline std::vector<double> epoch_cycle_fractions(const std::vector<double>& peak_times, double span_start, double span_end,
                                                 const EpochGrid& grid) {
    struct Piece {
        double a, b, weight;
    };
    std::vector<Piece> pieces;
    const auto& p = peak_times;
    if (p.size() >= 2) {
        const double first = p[1] - p[0];
        const double last = p[p.size() - 1] - p[p.size() - 2];
        if (p.front() > span_start) pieces.push_back({span_start, p.front(), std::min(kMaxEdgeCycles, (p.front() - span_start) / first)});
        for (std::size_t j = 0; j + 1 < p.size(); ++j) pieces.push_back({p[j], p[j + 1], 1.0});
        if (p.back() < span_end) pieces.push_back({p.back(), span_end, std::min(kMaxEdgeCycles, (span_end - p.back()) / last)});
    }
    std::vector<double> counts(grid.count, 0.0);
    for (std::size_t e = 0; e < grid.count; ++e) {
        const double a = grid.start + static_cast<double>(e) * grid.length;
        const double b = a + grid.length;
        for (const auto& c : pieces) {
            const double overlap = std::min(b, c.b) - std::max(a, c.a);
            if (overlap > 0.0) counts[e] += c.weight * overlap / (c.b - c.a);
        }
    }
    return counts;
}

inline std::vector<EpochSummary> count_cycles(const TurningPoints& points, const EpochGrid& grid) {
    const auto fractions = epoch_cycle_fractions(points.peak_times, points.span_start, points.span_end, grid);
    std::vector<EpochSummary> out;
    for (std::size_t e = 0; e < grid.count; ++e) {
        EpochSummary s;
        s.epoch_index = e;
        s.start = grid.start + static_cast<double>(e) * grid.length;
        s.length = grid.length;
        s.cycle_count = fractions[e];
        s.integer_count = round_half_up(fractions[e]);
        s.rr_bpm = fractions[e] * 60.0 / grid.length;
        out.push_back(s);
    }
    return out;
}

inline std::vector<int> integer_counts(const std::vector<EpochSummary>& epochs) {
    std::vector<int> out;
    for (const auto& e : epochs) out.push_back(static_cast<int>(e.integer_count));
    return out;
}

/// epoch_index,start,cycle_count,integer_count,rr_bpm
inline std::string to_csv(const std::vector<EpochSummary>& epochs) {
    std::string out = "epoch_index,start,cycle_count,integer_count,rr_bpm\n";
    for (const auto& e : epochs) {
        out += std::to_string(e.epoch_index) + "," + text::format_shortest(e.start) + "," +
               text::format_shortest(e.cycle_count) + "," + std::to_string(e.integer_count) + "," +
               text::format_shortest(e.rr_bpm) + "\n";
    }
    return out;
}

}  // namespace csibreath
