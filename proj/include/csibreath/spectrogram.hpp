#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "csibreath/text.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

struct Spectrogram {
    std::vector<double> times;        // frame centers, s
    std::vector<double> frequencies;  // Hz, 0 .. rate/2
    Matrix magnitude;                 // frames x frequency bins
};

/// Short-time Fourier magnitude with a Hann window.
inline Spectrogram spectrogram(const UniformSeries& x, double window_seconds, double overlap) {
    if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("overlap must be in [0, 1)");
    const auto len = static_cast<std::size_t>(std::lround(window_seconds * x.rate));
    if (len < 8) throw std::invalid_argument("spectrogram window must span at least 8 samples");
    if (x.size() < len) throw std::invalid_argument("series shorter than one spectrogram window");
    const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(static_cast<double>(len) * (1.0 - overlap))));
    const std::size_t frames = 1 + (x.size() - len) / hop;
    const std::size_t bins = len / 2 + 1;

    std::vector<double> hann(len);
    for (std::size_t i = 0; i < len; ++i)
        hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
    std::vector<double> cos_table(len), sin_table(len);
    for (std::size_t i = 0; i < len; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(len);
        cos_table[i] = std::cos(a);
        sin_table[i] = std::sin(a);
    }

    Spectrogram out;
    out.magnitude = Matrix(frames, bins);
    for (std::size_t b = 0; b < bins; ++b) out.frequencies.push_back(static_cast<double>(b) * x.rate / static_cast<double>(len));
    std::vector<double> seg(len);
    for (std::size_t f = 0; f < frames; ++f) {
        const std::size_t off = f * hop;
        out.times.push_back(x.start_time + (static_cast<double>(off) + static_cast<double>(len) / 2.0) / x.rate);
        for (std::size_t i = 0; i < len; ++i) seg[i] = x.samples[off + i] * hann[i];
        for (std::size_t b = 0; b < bins; ++b) {
            double re = 0.0, im = 0.0;
            std::size_t idx = 0;
            for (std::size_t i = 0; i < len; ++i) {
                re += seg[i] * cos_table[idx];
                im -= seg[i] * sin_table[idx];
                idx += b;
                if (idx >= len) idx -= len;
            }
            out.magnitude(f, b) = std::hypot(re, im);
        }
    }
    return out;
}

/// CSV: header row `time,<f0>,<f1>,...`, then one row per frame.
inline std::string to_csv(const Spectrogram& s) {
    std::string out = "time";
    for (double f : s.frequencies) out += "," + text::format_shortest(f);
    out += '\n';
    for (std::size_t r = 0; r < s.times.size(); ++r) {
        out += text::format_shortest(s.times[r]);
        for (double v : s.magnitude.row(r)) out += "," + text::format_shortest(v);
        out += '\n';
    }
    return out;
}

}  // namespace csibreath
