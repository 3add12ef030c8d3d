#pragma once

// Per-record evaluation results and their aggregation into subject x posture
// tables (MAD, percent of epochs off by >= 1 and >= 2 cycles, mean correlation).
// Cells pool all epochs (or correlation windows) of the records they cover;
// the "Mean" row averages the subject rows column-wise.

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "csibreath/evaluation.hpp"
#include "csibreath/respiration.hpp"
#include "csibreath/text.hpp"
#include "csibreath/types.hpp"

namespace csibreath {

inline constexpr const char* kReportSchema = "report v1";

/// Reference-dependent metrics of one record.
struct Comparison {
    double lag_applied = 0.0;
    double mean_correlation = 0.0;
    std::vector<std::optional<double>> window_correlations;
    std::vector<int> counts_ref;
    std::vector<int> counts_sig;
    double mad = 0.0;
    EpochErrorStats errors;

    bool operator==(const Comparison&) const = default;
};

struct RecordResult {
    std::string record_id;
    std::string subject;
    Posture posture = Posture::unknown;
    std::string method;
    std::vector<EpochSummary> epochs;  // of the extracted signal
    std::optional<Comparison> comparison;

    bool operator==(const RecordResult&) const = default;
};

struct TableRow {
    std::string label;
    std::vector<std::optional<double>> cells;
    bool operator==(const TableRow&) const = default;
};

struct Table {
    std::string name;
    std::string title;
    int decimals = 2;
    std::vector<std::string> columns;
    std::vector<TableRow> rows;
    TableRow mean;
    bool operator==(const Table&) const = default;
};

struct ReportSet {
    std::string schema = kReportSchema;
    std::vector<RecordResult> records;
    std::vector<Table> tables;
    // Headline figures: the Mean row's "All Postures" cell of each table.
    std::optional<double> mad;
    std::optional<double> pct_ge1;
    std::optional<double> pct_ge2;
    std::optional<double> mean_correlation;
    std::map<int, int> histogram;  // pooled over all records
    bool operator==(const ReportSet&) const = default;

    const Table* table(const std::string& name) const {
        for (const auto& t : tables)
            if (t.name == name) return &t;
        return nullptr;
    }
};

/// Fill in MAD, epoch-error stats and correlation for one record.
inline Comparison compare_counts(std::vector<int> counts_ref, std::vector<int> counts_sig, const WindowedCorrelation& corr,
                                 double lag) {
    Comparison c;
    c.lag_applied = lag;
    c.mean_correlation = corr.mean;
    c.window_correlations = corr.per_window;
    c.counts_ref = std::move(counts_ref);
    c.counts_sig = std::move(counts_sig);
    c.mad = c.counts_ref.empty() ? 0.0 : mad_rr(c.counts_ref, c.counts_sig);
    c.errors = epoch_error_stats(c.counts_ref, c.counts_sig);
    return c;
}

namespace detail {

struct Pool {
    long abs_diff = 0;
    long ge1 = 0;
    long ge2 = 0;
    long epochs = 0;
    double corr_sum = 0.0;
    long corr_windows = 0;

    void add(const Comparison& c) {
        for (std::size_t i = 0; i < c.counts_ref.size(); ++i) {
            const int d = std::abs(c.counts_sig[i] - c.counts_ref[i]);
            abs_diff += d;
            ge1 += d >= 1;
            ge2 += d >= 2;
        }
        epochs += static_cast<long>(c.counts_ref.size());
        for (const auto& r : c.window_correlations)
            if (r) {
                corr_sum += *r;
                ++corr_windows;
            }
    }
    std::optional<double> mad() const { return epochs ? std::optional(double(abs_diff) / double(epochs)) : std::nullopt; }
    std::optional<double> pct1() const { return epochs ? std::optional(100.0 * double(ge1) / double(epochs)) : std::nullopt; }
    std::optional<double> pct2() const { return epochs ? std::optional(100.0 * double(ge2) / double(epochs)) : std::nullopt; }
    std::optional<double> corr() const {
        return corr_windows ? std::optional(corr_sum / double(corr_windows)) : std::nullopt;
    }
};

inline std::string posture_column(Posture p) {
    switch (p) {
    case Posture::supine: return "Supine";
    case Posture::side: return "Side";
    case Posture::prone: return "Prone";
    default: return "Unknown";
    }
}

}  // namespace detail

inline ReportSet build_report(std::vector<RecordResult> records) {
    if (records.empty()) throw std::invalid_argument("build_report: no records");
    ReportSet rep;
    rep.records = std::move(records);

    std::vector<Posture> postures;
    for (Posture p : {Posture::supine, Posture::side, Posture::prone, Posture::unknown})
        if (std::any_of(rep.records.begin(), rep.records.end(), [&](const auto& r) { return r.posture == p && r.comparison; }))
            postures.push_back(p);
    std::vector<std::string> subjects;
    for (const auto& r : rep.records)
        if (r.comparison && std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end())
            subjects.push_back(r.subject);

    // pools[subject][column]; the last column pools all postures
    std::vector<std::vector<detail::Pool>> pools(subjects.size(), std::vector<detail::Pool>(postures.size() + 1));
    for (const auto& r : rep.records) {
        if (!r.comparison) continue;
        const auto si = static_cast<std::size_t>(std::find(subjects.begin(), subjects.end(), r.subject) - subjects.begin());
        const auto pi = static_cast<std::size_t>(std::find(postures.begin(), postures.end(), r.posture) - postures.begin());
        pools[si][pi].add(*r.comparison);
        pools[si].back().add(*r.comparison);
        for (const auto& [d, n] : r.comparison->errors.histogram) rep.histogram[d] += n;
    }

    std::vector<std::string> columns;
    for (Posture p : postures) columns.push_back(detail::posture_column(p));
    columns.push_back("All Postures");

    auto make = [&](std::string name, std::string title, int decimals, auto metric) {
        Table t{std::move(name), std::move(title), decimals, columns, {}, {"Mean", {}}};
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            TableRow row{subjects[s], {}};
            for (const auto& pool : pools[s]) row.cells.push_back(metric(pool));
            t.rows.push_back(std::move(row));
        }
        for (std::size_t c = 0; c < columns.size(); ++c) {
            double sum = 0.0;
            int n = 0;
            for (const auto& row : t.rows)
                if (row.cells[c]) {
                    sum += *row.cells[c];
                    ++n;
                }
            t.mean.cells.push_back(n ? std::optional(sum / n) : std::nullopt);
        }
        return t;
    };
    rep.tables.push_back(make("pct_ge1", "Percent of Epochs with One or More Wrong Detected/Missed Respiratory Cycles", 0,
                              [](const detail::Pool& p) { return p.pct1(); }));
    rep.tables.push_back(make("pct_ge2", "Percent of Epochs with Two or More Wrong Detected/Missed Respiratory Cycles", 0,
                              [](const detail::Pool& p) { return p.pct2(); }));
    rep.tables.push_back(make("mad", "Mean Absolute Difference Between Detected Respiratory Cycles per Epoch", 2,
                              [](const detail::Pool& p) { return p.mad(); }));
    rep.tables.push_back(make("correlation", "Mean Windowed Correlation with the Reference", 2,
                              [](const detail::Pool& p) { return p.corr(); }));
    rep.pct_ge1 = rep.tables[0].mean.cells.back();
    rep.pct_ge2 = rep.tables[1].mean.cells.back();
    rep.mad = rep.tables[2].mean.cells.back();
    rep.mean_correlation = rep.tables[3].mean.cells.back();
    return rep;
}

/// Aligned plain-text table in the Subject | postures... | All Postures layout.
inline std::string render_table(const Table& t) {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{"Subject"};
    head.insert(head.end(), t.columns.begin(), t.columns.end());
    grid.push_back(head);
    auto cell = [&](const std::optional<double>& v) { return v ? text::format_fixed(*v, t.decimals) : std::string("-"); };
    for (const auto* row : [&] {
             std::vector<const TableRow*> rows;
             for (const auto& r : t.rows) rows.push_back(&r);
             rows.push_back(&t.mean);
             return rows;
         }()) {
        std::vector<std::string> line{row->label};
        for (const auto& c : row->cells) line.push_back(cell(c));
        grid.push_back(std::move(line));
    }
    std::vector<std::size_t> width(head.size(), 0);
    for (const auto& line : grid)
        for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    const std::string rule(total > 2 ? total - 2 : 0, '-');
    std::string out = t.title + "\n" + rule + "\n";
    for (std::size_t r = 0; r < grid.size(); ++r) {
        if (r == 1 || r + 1 == grid.size()) out += rule + "\n";
        for (std::size_t c = 0; c < grid[r].size(); ++c) {
            const auto& s = grid[r][c];
            std::string padded = c == 0 ? s + std::string(width[c] - s.size(), ' ') : std::string(width[c] - s.size(), ' ') + s;
            out += padded;
            if (c + 1 < grid[r].size()) out += "  ";
        }
        out += "\n";
    }
    out += rule + "\n";
    return out;
}

inline std::string render_text(const ReportSet& rep) {
    std::string out;
    for (const auto& t : rep.tables) out += render_table(t) + "\n";
    auto fmt = [](const std::optional<double>& v, int d) { return v ? text::format_fixed(*v, d) : std::string("-"); };
    out += "Overall: MAD " + fmt(rep.mad, 2) + " breaths/epoch, >=1 off " + fmt(rep.pct_ge1, 0) + "%, >=2 off " +
           fmt(rep.pct_ge2, 0) + "%, mean r " + fmt(rep.mean_correlation, 2) + "\n";
    return out;
}

/// delta,count rows for a Fig.-5 style error histogram.
inline std::string histogram_csv(const std::map<int, int>& hist) {
    std::string out = "delta,count\n";
    for (const auto& [d, n] : hist) out += std::to_string(d) + "," + std::to_string(n) + "\n";
    return out;
}

// ---- JSON ------------------------------------------------------------------

namespace detail {

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
inline std::optional<double> opt_from(const nlohmann::json& j) {
    return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

inline nlohmann::json histogram_json(const std::map<int, int>& h) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [d, n] : h) j[std::to_string(d)] = n;
    return j;
}
inline std::map<int, int> histogram_from(const nlohmann::json& j) {
    std::map<int, int> h;
    for (const auto& [k, v] : j.items()) h[std::stoi(k)] = v.get<int>();
    return h;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const EpochSummary& e) {
    j = {{"epoch_index", e.epoch_index}, {"start", e.start},           {"length", e.length},
         {"cycle_count", e.cycle_count}, {"integer_count", e.integer_count}, {"rr_bpm", e.rr_bpm}};
}
inline void from_json(const nlohmann::json& j, EpochSummary& e) {
    j.at("epoch_index").get_to(e.epoch_index);
    j.at("start").get_to(e.start);
    j.at("length").get_to(e.length);
    j.at("cycle_count").get_to(e.cycle_count);
    j.at("integer_count").get_to(e.integer_count);
    j.at("rr_bpm").get_to(e.rr_bpm);
}

inline void to_json(nlohmann::json& j, const TableRow& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) cells.push_back(detail::opt_json(c));
    j = {{"label", r.label}, {"cells", cells}};
}
inline void from_json(const nlohmann::json& j, TableRow& r) {
    r.label = j.at("label").get<std::string>();
    r.cells.clear();
    for (const auto& c : j.at("cells")) r.cells.push_back(detail::opt_from(c));
}

inline void to_json(nlohmann::json& j, const Table& t) {
    j = {{"name", t.name}, {"title", t.title}, {"decimals", t.decimals}, {"columns", t.columns}, {"rows", t.rows}, {"mean", t.mean}};
}
inline void from_json(const nlohmann::json& j, Table& t) {
    j.at("name").get_to(t.name);
    j.at("title").get_to(t.title);
    j.at("decimals").get_to(t.decimals);
    j.at("columns").get_to(t.columns);
    j.at("rows").get_to(t.rows);
    j.at("mean").get_to(t.mean);
}

inline void to_json(nlohmann::json& j, const Comparison& c) {
    nlohmann::json wc = nlohmann::json::array();
    for (const auto& r : c.window_correlations) wc.push_back(detail::opt_json(r));
    j = {{"lag_applied", c.lag_applied},
         {"mean_correlation", c.mean_correlation},
         {"window_correlations", wc},
         {"counts_ref", c.counts_ref},
         {"counts_sig", c.counts_sig},
         {"mad", c.mad},
         {"pct_ge1", c.errors.pct_ge1},
         {"pct_ge2", c.errors.pct_ge2},
         {"histogram", detail::histogram_json(c.errors.histogram)}};
}
inline void from_json(const nlohmann::json& j, Comparison& c) {
    j.at("lag_applied").get_to(c.lag_applied);
    j.at("mean_correlation").get_to(c.mean_correlation);
    c.window_correlations.clear();
    for (const auto& r : j.at("window_correlations")) c.window_correlations.push_back(detail::opt_from(r));
    j.at("counts_ref").get_to(c.counts_ref);
    j.at("counts_sig").get_to(c.counts_sig);
    j.at("mad").get_to(c.mad);
    j.at("pct_ge1").get_to(c.errors.pct_ge1);
    j.at("pct_ge2").get_to(c.errors.pct_ge2);
    c.errors.histogram = detail::histogram_from(j.at("histogram"));
}

inline void to_json(nlohmann::json& j, const RecordResult& r) {
    j = {{"record_id", r.record_id},
         {"subject", r.subject},
         {"posture", to_string(r.posture)},
         {"method", r.method},
         {"epochs", r.epochs},
         {"comparison", r.comparison ? nlohmann::json(*r.comparison) : nlohmann::json(nullptr)}};
}
inline void from_json(const nlohmann::json& j, RecordResult& r) {
    j.at("record_id").get_to(r.record_id);
    j.at("subject").get_to(r.subject);
    r.posture = parse_posture(j.at("posture").get<std::string>());
    j.at("method").get_to(r.method);
    j.at("epochs").get_to(r.epochs);
    if (j.at("comparison").is_null()) r.comparison.reset();
    else r.comparison = j.at("comparison").get<Comparison>();
}

inline void to_json(nlohmann::json& j, const ReportSet& rep) {
    j = {{"schema", rep.schema},
         {"overall",
          {{"mad", detail::opt_json(rep.mad)},
           {"pct_ge1", detail::opt_json(rep.pct_ge1)},
           {"pct_ge2", detail::opt_json(rep.pct_ge2)},
           {"mean_correlation", detail::opt_json(rep.mean_correlation)},
           {"histogram", detail::histogram_json(rep.histogram)}}},
         {"tables", rep.tables},
         {"records", rep.records}};
}
inline void from_json(const nlohmann::json& j, ReportSet& rep) {
    rep.schema = j.at("schema").get<std::string>();
    if (rep.schema != kReportSchema) throw DataError("unsupported report schema '" + rep.schema + "'");
    const auto& o = j.at("overall");
    rep.mad = detail::opt_from(o.at("mad"));
    rep.pct_ge1 = detail::opt_from(o.at("pct_ge1"));
    rep.pct_ge2 = detail::opt_from(o.at("pct_ge2"));
    rep.mean_correlation = detail::opt_from(o.at("mean_correlation"));
    rep.histogram = detail::histogram_from(o.at("histogram"));
    j.at("tables").get_to(rep.tables);
    j.at("records").get_to(rep.records);
}

inline std::string to_json_text(const ReportSet& rep) { return nlohmann::json(rep).dump(2) + "\n"; }

inline ReportSet report_from_json_text(const std::string& s) {
    try {
        return nlohmann::json::parse(s).get<ReportSet>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed report JSON: ") + e.what());
    }
}

}  // namespace csibreath
