#pragma once

// Canonical on-disk formats for CSI records and reference traces.
//
//   CSI CSV:   # csi v1 kind=<complex|magnitude> subcarriers=<N> nominal_rate=<Hz> [subject=..] [posture=..] [tags=a;b]
//              t,<v1>,...,<vN>          (magnitude)
//              t,<re1>,<im1>,...        (complex, interleaved)
//   Ref CSV:   # ref v1 rate=<Hz> start=<s>
//              <value>
//   NDJSON:    optional header object {"csi":"v1","kind":..,"subcarriers":..,"nominal_rate":..}
//              then one {"t":..,"sc":[...]} object per line; complex values as [re,im] pairs.
//
// Timestamps are written with 9 fractional digits, values in shortest round-trip form,
// so save(load(f)) reproduces a canonical file byte for byte.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "csibreath/text.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

enum class CsiFormat { csv, ndjson };

inline CsiFormat format_from_path(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    return (ext == ".ndjson" || ext == ".jsonl") ? CsiFormat::ndjson : CsiFormat::csv;
}

namespace detail {

[[noreturn]] inline void row_error(const std::string& what, std::size_t row) {
    throw DataError(what + " at row " + std::to_string(row));
}

inline std::map<std::string, std::string> parse_header_fields(std::string_view line, std::string_view magic,
                                                              std::string_view& version) {
    // line starts with '#'
    auto body = text::trim(line.substr(1));
    std::map<std::string, std::string> fields;
    std::vector<std::string_view> tokens;
    for (auto tok : text::split(body, ' '))
        if (!text::trim(tok).empty()) tokens.push_back(text::trim(tok));
    if (tokens.size() < 2 || tokens[0] != magic) throw DataError("bad header: expected '# " + std::string(magic) + " v1'");
    version = tokens[1];
    if (version != "v1") throw DataError("unsupported header version '" + std::string(version) + "'");
    for (std::size_t i = 2; i < tokens.size(); ++i) {
        auto eq = tokens[i].find('=');
        if (eq == std::string_view::npos) throw DataError("bad header token '" + std::string(tokens[i]) + "'");
        fields.emplace(std::string(tokens[i].substr(0, eq)), std::string(tokens[i].substr(eq + 1)));
    }
    return fields;
}

inline double header_number(const std::map<std::string, std::string>& f, const std::string& key,
                            std::optional<double> fallback = std::nullopt) {
    auto it = f.find(key);
    if (it == f.end()) {
        if (fallback) return *fallback;
        throw DataError("header missing '" + key + "'");
    }
    auto v = text::parse_double(it->second);
    if (!v) throw DataError("header field '" + key + "' is not numeric");
    return *v;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::vector<std::string_view> lines_of(std::string_view content) {
    auto lines = text::split(content, '\n');
    if (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

}  // namespace detail

inline CsiRecord parse_csi_csv(std::string_view content) {
    auto lines = detail::lines_of(content);
    if (lines.empty()) throw DataError("empty CSI file");
    auto header = text::trim(lines.front());
    if (header.empty() || header.front() != '#') throw DataError("missing '# csi v1' header");
    std::string_view version;
    auto fields = detail::parse_header_fields(header, "csi", version);

    SampleKind kind;
    auto kit = fields.find("kind");
    if (kit == fields.end()) throw DataError("header missing 'kind'");
    if (kit->second == "complex") kind = SampleKind::complex;
    else if (kit->second == "magnitude") kind = SampleKind::magnitude;
    else throw DataError("unknown kind '" + kit->second + "'");
    double sc = detail::header_number(fields, "subcarriers", double(CsiRecord::kDefaultSubcarriers));
    if (sc < 1 || sc != std::floor(sc)) throw DataError("invalid subcarrier count");
    auto n_sc = static_cast<std::size_t>(sc);
    double rate = detail::header_number(fields, "nominal_rate", CsiRecord::kDefaultNominalRate);

    RecordMeta meta;
    if (auto it = fields.find("subject"); it != fields.end()) meta.subject = it->second;
    if (auto it = fields.find("posture"); it != fields.end()) {
        try {
            meta.posture = parse_posture(it->second);
        } catch (const std::invalid_argument& e) {
            throw DataError(e.what());
        }
    }
    if (auto it = fields.find("tags"); it != fields.end())
        for (auto t : text::split(it->second, ';'))
            if (!t.empty()) meta.tags.emplace_back(t);

    const std::size_t expected_cols = 1 + (kind == SampleKind::complex ? 2 * n_sc : n_sc);
    std::vector<CsiFrame> frames;
    frames.reserve(lines.size() - 1);
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const std::size_t row = li;
        auto line = text::trim(lines[li]);
        if (line.empty()) detail::row_error("empty line", row);
        auto cells = text::split(line, ',');
        if (cells.size() != expected_cols)
            detail::row_error("expected " + std::to_string(expected_cols) + " columns, got " +
                                  std::to_string(cells.size()),
                              row);
        CsiFrame f;
        auto t = text::parse_double(cells[0]);
        if (!t || !std::isfinite(*t)) detail::row_error("non-numeric timestamp", row);
        f.timestamp = *t;
        if (!frames.empty() && !(f.timestamp > frames.back().timestamp))
            detail::row_error("non-increasing timestamp", row);
        if (kind == SampleKind::complex) {
            f.complex_values.resize(n_sc);
            for (std::size_t k = 0; k < n_sc; ++k) {
                auto re = text::parse_double(cells[1 + 2 * k]);
                auto im = text::parse_double(cells[2 + 2 * k]);
                if (!re || !im || !std::isfinite(*re) || !std::isfinite(*im)) detail::row_error("non-numeric value", row);
                f.complex_values[k] = {*re, *im};
            }
        } else {
            f.magnitudes.resize(n_sc);
            for (std::size_t k = 0; k < n_sc; ++k) {
                auto v = text::parse_double(cells[1 + k]);
                if (!v || !std::isfinite(*v)) detail::row_error("non-numeric value", row);
                if (*v < 0.0) detail::row_error("negative magnitude", row);
                f.magnitudes[k] = *v;
            }
        }
        frames.push_back(std::move(f));
    }
    if (frames.empty()) throw DataError("CSI file has no data rows");
    return CsiRecord(kind, n_sc, std::move(frames), rate, std::move(meta));
}

inline CsiRecord parse_csi_ndjson(std::string_view content) {
    using nlohmann::json;
    auto lines = detail::lines_of(content);
    if (lines.empty()) throw DataError("empty CSI file");

    std::optional<SampleKind> kind;
    std::optional<std::size_t> n_sc;
    double rate = CsiRecord::kDefaultNominalRate;
    RecordMeta meta;
    std::vector<CsiFrame> frames;

    for (std::size_t li = 0; li < lines.size(); ++li) {
        const std::size_t row = li + 1;
        auto line = text::trim(lines[li]);
        if (line.empty()) detail::row_error("empty line", row);
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error&) {
            detail::row_error("malformed JSON", row);
        }
        if (!obj.is_object()) detail::row_error("expected JSON object", row);
        if (obj.contains("csi")) {
            if (li != 0) detail::row_error("header object must be first", row);
            if (obj["csi"] != "v1") detail::row_error("unsupported version", row);
            if (obj.contains("kind")) {
                auto k = obj["kind"].get<std::string>();
                if (k == "complex") kind = SampleKind::complex;
                else if (k == "magnitude") kind = SampleKind::magnitude;
                else detail::row_error("unknown kind", row);
            }
            if (obj.contains("subcarriers")) n_sc = obj["subcarriers"].get<std::size_t>();
            if (obj.contains("nominal_rate")) rate = obj["nominal_rate"].get<double>();
            if (obj.contains("subject")) meta.subject = obj["subject"].get<std::string>();
            if (obj.contains("posture")) meta.posture = parse_posture(obj["posture"].get<std::string>());
            if (obj.contains("tags")) meta.tags = obj["tags"].get<std::vector<std::string>>();
            continue;
        }
        if (!obj.contains("t") || !obj["t"].is_number()) detail::row_error("missing numeric 't'", row);
        if (!obj.contains("sc") || !obj["sc"].is_array() || obj["sc"].empty()) detail::row_error("missing 'sc' array", row);
        const auto& sc = obj["sc"];
        if (!kind) kind = sc[0].is_array() ? SampleKind::complex : SampleKind::magnitude;
        if (!n_sc) n_sc = sc.size();
        if (sc.size() != *n_sc)
            detail::row_error("expected " + std::to_string(*n_sc) + " subcarriers, got " + std::to_string(sc.size()), row);
        CsiFrame f;
        f.timestamp = obj["t"].get<double>();
        if (!frames.empty() && !(f.timestamp > frames.back().timestamp)) detail::row_error("non-increasing timestamp", row);
        for (const auto& v : sc) {
            if (*kind == SampleKind::complex) {
                if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
                    detail::row_error("expected [re,im] pair", row);
                f.complex_values.emplace_back(v[0].get<double>(), v[1].get<double>());
            } else {
                if (!v.is_number()) detail::row_error("non-numeric value", row);
                double m = v.get<double>();
                if (m < 0.0) detail::row_error("negative magnitude", row);
                f.magnitudes.push_back(m);
            }
        }
        frames.push_back(std::move(f));
    }
    if (frames.empty()) throw DataError("CSI file has no data rows");
    return CsiRecord(*kind, *n_sc, std::move(frames), rate, std::move(meta));
}

inline CsiRecord load_csi(const std::filesystem::path& path, CsiFormat format) {
    auto content = detail::read_file(path);
    try {
        return format == CsiFormat::csv ? parse_csi_csv(content) : parse_csi_ndjson(content);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline CsiRecord load_csi(const std::filesystem::path& path) { return load_csi(path, format_from_path(path)); }

inline std::string to_csv(const CsiRecord& rec) {
    std::string out;
    out += "# csi v1 kind=";
    out += to_string(rec.kind());
    out += " subcarriers=" + std::to_string(rec.subcarriers());
    out += " nominal_rate=" + text::format_shortest(rec.nominal_rate());
    const auto& m = rec.meta();
    if (!m.subject.empty()) out += " subject=" + m.subject;
    if (m.posture != Posture::unknown) out += std::string(" posture=") + to_string(m.posture);
    if (!m.tags.empty()) {
        out += " tags=";
        for (std::size_t i = 0; i < m.tags.size(); ++i) out += (i ? ";" : "") + m.tags[i];
    }
    out += '\n';
    for (const auto& f : rec.frames()) {
        out += text::format_fixed(f.timestamp, 9);
        if (rec.kind() == SampleKind::complex) {
            for (auto c : f.complex_values) {
                out += ',';
                out += text::format_shortest(c.real());
                out += ',';
                out += text::format_shortest(c.imag());
            }
        } else {
            for (double v : f.magnitudes) {
                out += ',';
                out += text::format_shortest(v);
            }
        }
        out += '\n';
    }
    return out;
}

inline std::string to_ndjson(const CsiRecord& rec) {
    using nlohmann::json;
    std::string out;
    json header = {{"csi", "v1"},
                   {"kind", to_string(rec.kind())},
                   {"subcarriers", rec.subcarriers()},
                   {"nominal_rate", rec.nominal_rate()}};
    if (!rec.meta().subject.empty()) header["subject"] = rec.meta().subject;
    if (rec.meta().posture != Posture::unknown) header["posture"] = to_string(rec.meta().posture);
    if (!rec.meta().tags.empty()) header["tags"] = rec.meta().tags;
    out += header.dump() + '\n';
    for (const auto& f : rec.frames()) {
        json sc = json::array();
        if (rec.kind() == SampleKind::complex)
            for (auto c : f.complex_values) sc.push_back({c.real(), c.imag()});
        else
            for (double v : f.magnitudes) sc.push_back(v);
        out += json{{"t", f.timestamp}, {"sc", std::move(sc)}}.dump() + '\n';
    }
    return out;
}

/// Write-temp-then-rename, so readers never observe a partial file.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline void save_csi(const std::filesystem::path& path, const CsiRecord& rec, CsiFormat format = CsiFormat::csv) {
    atomic_write(path, format == CsiFormat::csv ? to_csv(rec) : to_ndjson(rec));
}

inline ReferenceTrace parse_reference_csv(std::string_view content, std::optional<double> rate = std::nullopt) {
    auto lines = detail::lines_of(content);
    if (lines.empty()) throw DataError("empty reference file");
    std::size_t first = 0;
    double start = 0.0;
    double header_rate = 0.0;
    bool have_header = false;
    if (!text::trim(lines.front()).empty() && text::trim(lines.front()).front() == '#') {
        std::string_view version;
        auto fields = detail::parse_header_fields(text::trim(lines.front()), "ref", version);
        header_rate = detail::header_number(fields, "rate", rate);
        start = detail::header_number(fields, "start", 0.0);
        have_header = true;
        first = 1;
    }
    if (!have_header && !rate) throw DataError("reference file has no header and no rate was given");
    double r = have_header ? header_rate : *rate;
    if (have_header && rate && *rate != header_rate)
        throw DataError("reference rate " + text::format_shortest(*rate) + " does not match header rate " +
                        text::format_shortest(header_rate));

    std::vector<double> samples;
    samples.reserve(lines.size());
    for (std::size_t li = first; li < lines.size(); ++li) {
        const std::size_t row = li - first + 1;
        auto v = text::parse_double(lines[li]);
        if (!v || !std::isfinite(*v)) detail::row_error("non-numeric value", row);
        samples.push_back(*v);
    }
    if (samples.empty()) throw DataError("reference file has no data rows");
    return ReferenceTrace(std::move(samples), r, start);
}

inline ReferenceTrace load_reference(const std::filesystem::path& path, std::optional<double> rate = std::nullopt) {
    auto content = detail::read_file(path);
    try {
        return parse_reference_csv(content, rate);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

/// Reference-format CSV for any uniform series (also used for extracted waveforms).
inline std::string to_reference_csv(const UniformSeries& s) {
    std::string out = "# ref v1 rate=" + text::format_shortest(s.rate) + " start=" + text::format_shortest(s.start_time) + "\n";
    for (double v : s.samples) {
        out += text::format_shortest(v);
        out += '\n';
    }
    return out;
}

inline void save_reference(const std::filesystem::path& path, const UniformSeries& s) {
    atomic_write(path, to_reference_csv(s));
}

/// Frames × subcarriers magnitude matrix.
inline Matrix magnitudes(const CsiRecord& rec) {
    Matrix m(rec.size(), rec.subcarriers());
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const auto& f = rec.frames()[i];
        for (std::size_t k = 0; k < rec.subcarriers(); ++k)
            m(i, k) = rec.kind() == SampleKind::complex ? std::abs(f.complex_values[k]) : f.magnitudes[k];
    }
    return m;
}

/// Same record with complex values replaced by their magnitudes.
inline CsiRecord to_magnitude_record(const CsiRecord& rec) {
    if (rec.kind() == SampleKind::magnitude) return rec;
    auto m = magnitudes(rec);
    std::vector<CsiFrame> frames(rec.size());
    for (std::size_t i = 0; i < rec.size(); ++i) {
        frames[i].timestamp = rec.frames()[i].timestamp;
        auto r = m.row(i);
        frames[i].magnitudes.assign(r.begin(), r.end());
    }
    return CsiRecord(SampleKind::magnitude, rec.subcarriers(), std::move(frames), rec.nominal_rate(), rec.meta());
}

}  // namespace csibreath
