#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace csibreath {

/// Raised for malformed or invariant-violating input data (files, records).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SampleKind { complex, magnitude };
enum class Posture { supine, side, prone, unknown };

inline const char* to_string(SampleKind k) { return k == SampleKind::complex ? "complex" : "magnitude"; }

inline const char* to_string(Posture p) {
    switch (p) {
    case Posture::supine: return "supine";
    case Posture::side: return "side";
    case Posture::prone: return "prone";
    default: return "unknown";
    }
}

inline Posture parse_posture(const std::string& s) {
    if (s == "supine") return Posture::supine;
    if (s == "side") return Posture::side;
    if (s == "prone") return Posture::prone;
    if (s == "unknown" || s.empty()) return Posture::unknown;
    throw std::invalid_argument("unknown posture '" + s + "'");
}

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    const std::vector<double>& data() const { return data_; }
    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Uniformly sampled scalar series. The common currency between stages.
struct UniformSeries {
    std::vector<double> samples;
    double rate = 1.0;
    double start_time = 0.0;

    std::size_t size() const { return samples.size(); }
    double time_at(std::size_t i) const { return start_time + static_cast<double>(i) / rate; }
    /// Covered span, counting each sample as one sampling period.
    double span() const { return static_cast<double>(samples.size()) / rate; }

    void validate() const {
        if (!(rate > 0.0) || !std::isfinite(rate)) throw std::invalid_argument("series rate must be positive");
        for (double v : samples)
            if (!std::isfinite(v)) throw std::invalid_argument("series contains non-finite sample");
    }

    bool operator==(const UniformSeries&) const = default;
};

/// One CSI frame. Exactly one of `complex_values` / `magnitudes` is populated,
/// according to the owning record's kind.
struct CsiFrame {
    double timestamp = 0.0;
    std::vector<std::complex<double>> complex_values;
    std::vector<double> magnitudes;

    bool operator==(const CsiFrame&) const = default;
};

struct RecordMeta {
    std::string subject;
    Posture posture = Posture::unknown;
    std::vector<std::string> tags;

    bool operator==(const RecordMeta&) const = default;
};

class CsiRecord {
public:
    static constexpr std::size_t kDefaultSubcarriers = 50;
    static constexpr double kDefaultNominalRate = 62.5;

    CsiRecord(SampleKind kind, std::size_t subcarriers, std::vector<CsiFrame> frames,
              double nominal_rate = kDefaultNominalRate, RecordMeta meta = {})
        : kind_(kind), subcarriers_(subcarriers), nominal_rate_(nominal_rate),
          frames_(std::move(frames)), meta_(std::move(meta)) {
        validate();
    }

    SampleKind kind() const { return kind_; }
    std::size_t subcarriers() const { return subcarriers_; }
    double nominal_rate() const { return nominal_rate_; }
    const std::vector<CsiFrame>& frames() const { return frames_; }
    const RecordMeta& meta() const { return meta_; }
    std::size_t size() const { return frames_.size(); }
    double duration() const { return frames_.back().timestamp - frames_.front().timestamp; }

    std::vector<double> timestamps() const {
        std::vector<double> t(frames_.size());
        for (std::size_t i = 0; i < frames_.size(); ++i) t[i] = frames_[i].timestamp;
        return t;
    }

    bool operator==(const CsiRecord&) const = default;

private:
    void validate() const {
        if (subcarriers_ == 0) throw DataError("record declares zero subcarriers");
        if (!(nominal_rate_ > 0.0)) throw DataError("nominal rate must be positive");
        if (frames_.size() < 2) throw DataError("record needs at least 2 frames");
        for (std::size_t i = 0; i < frames_.size(); ++i) {
            const auto& f = frames_[i];
            if (!std::isfinite(f.timestamp))
                throw DataError("non-finite timestamp at frame " + std::to_string(i + 1));
            if (i > 0 && !(f.timestamp > frames_[i - 1].timestamp))
                throw DataError("non-increasing timestamp at frame " + std::to_string(i + 1));
            if (kind_ == SampleKind::complex) {
                if (f.complex_values.size() != subcarriers_ || !f.magnitudes.empty())
                    throw DataError("wrong subcarrier count at frame " + std::to_string(i + 1));
                for (auto c : f.complex_values)
                    if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                        throw DataError("non-finite CSI value at frame " + std::to_string(i + 1));
            } else {
                if (f.magnitudes.size() != subcarriers_ || !f.complex_values.empty())
                    throw DataError("wrong subcarrier count at frame " + std::to_string(i + 1));
                for (double m : f.magnitudes)
                    if (!std::isfinite(m) || m < 0.0)
                        throw DataError("invalid magnitude at frame " + std::to_string(i + 1));
            }
        }
    }

    SampleKind kind_;
    std::size_t subcarriers_;
    double nominal_rate_;
    std::vector<CsiFrame> frames_;
    RecordMeta meta_;
};

/// Belt-equivalent respiration reference.
class ReferenceTrace {
public:
    static constexpr double kDefaultRate = 100.0;

    ReferenceTrace(std::vector<double> samples, double rate = kDefaultRate, double start_time = 0.0)
        : series_{std::move(samples), rate, start_time} {
        if (!(series_.rate > 0.0) || !std::isfinite(series_.rate)) throw DataError("reference rate must be positive");
        if (series_.samples.size() < 2) throw DataError("reference needs at least 2 samples");
        for (std::size_t i = 0; i < series_.samples.size(); ++i)
            if (!std::isfinite(series_.samples[i]))
                throw DataError("non-finite reference sample at row " + std::to_string(i + 1));
    }

    const UniformSeries& series() const { return series_; }
    const std::vector<double>& samples() const { return series_.samples; }
    double rate() const { return series_.rate; }
    double start_time() const { return series_.start_time; }
    double duration() const { return static_cast<double>(series_.samples.size() - 1) / series_.rate; }

    std::vector<double> timestamps() const {
        std::vector<double> t(series_.samples.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = series_.time_at(i);
        return t;
    }

    bool operator==(const ReferenceTrace&) const = default;

private:
    UniformSeries series_;
};

/// Subcarrier signals sharing one uniform time grid; channel-major storage.
struct ChannelSet {
    std::vector<std::vector<double>> channels;
    double rate = 1.0;
    double start_time = 0.0;

    std::size_t channel_count() const { return channels.size(); }
    std::size_t samples() const { return channels.empty() ? 0 : channels.front().size(); }

    UniformSeries channel(std::size_t k) const { return {channels.at(k), rate, start_time}; }

    static ChannelSet from_series(std::span<const UniformSeries> series) {
        ChannelSet out;
        if (series.empty()) return out;
        out.rate = series.front().rate;
        out.start_time = series.front().start_time;
        for (const auto& s : series) {
            if (s.rate != out.rate || s.start_time != out.start_time || s.size() != series.front().size())
                throw std::invalid_argument("channels do not share a time grid");
            out.channels.push_back(s.samples);
        }
        return out;
    }

    bool operator==(const ChannelSet&) const = default;
};

}  // namespace csibreath
