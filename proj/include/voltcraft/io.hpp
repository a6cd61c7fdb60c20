#pragma once

// Serialization layer: strict CSV readers for quotes, price paths, payoffs
// and P&L samples, JSON input for volatility surfaces, a deterministic JSON
// writer used by every report, and CSV writers for grids and path batches.
// Readers reject malformed input with the offending line number; they never
// guess.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voltcraft/calibration.hpp"
#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/monte_carlo.hpp"
#include "voltcraft/pde.hpp"
#include "voltcraft/risk.hpp"
#include "voltcraft/superrep.hpp"
#include "voltcraft/vol_surface.hpp"

namespace voltcraft {

// ---------------------------------------------------------------------------
// JSON writing
// ---------------------------------------------------------------------------

// 17 significant digits round-trip any double exactly. Non-finite values
// have no JSON representation and become null.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    return out;
}

// Streaming writer producing stable, pretty-printed JSON. Keys are emitted
// in call order, numbers via format_double, so identical inputs give
// byte-identical output.
class JsonWriter {
public:
    explicit JsonWriter(std::ostream& os) : os_(os) {}

    JsonWriter& begin_object() { lead(); os_ << '{'; stack_.push_back({false}); return *this; }
    JsonWriter& end_object() { close('}'); return *this; }
    JsonWriter& begin_array() { lead(); os_ << '['; stack_.push_back({false}); return *this; }
    JsonWriter& end_array() { close(']'); return *this; }

    JsonWriter& key(const std::string& k) {
        next_item();
        os_ << '"' << json_escape(k) << "\": ";
        inline_value_ = true;
        return *this;
    }

    JsonWriter& value(double v) { lead(); os_ << format_double(v); return *this; }
    JsonWriter& value(bool b) { lead(); os_ << (b ? "true" : "false"); return *this; }
    JsonWriter& value(int v) { lead(); os_ << v; return *this; }
    JsonWriter& value(std::size_t v) { lead(); os_ << v; return *this; }
    JsonWriter& value(const std::string& s) {
        lead();
        os_ << '"' << json_escape(s) << '"';
        return *this;
    }
    JsonWriter& value(const char* s) { return value(std::string(s)); }

    template <class T>
    JsonWriter& field(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }

    JsonWriter& field(const std::string& k, const std::vector<double>& v) {
        key(k);
        begin_array();
        for (double x : v) value(x);
        return end_array();
    }

    JsonWriter& field(const std::string& k, const std::vector<std::string>& v) {
        key(k);
        begin_array();
        for (const auto& x : v) value(x);
        return end_array();
    }

    // Root value written; emit the trailing newline.
    void finish() { os_ << '\n'; }

private:
    struct Frame {
        bool has_items;
    };

    void indent() {
        for (std::size_t i = 0; i < stack_.size(); ++i) os_ << "  ";
    }

    void next_item() {
        if (!stack_.empty()) {
            os_ << (stack_.back().has_items ? ",\n" : "\n");
            stack_.back().has_items = true;
            indent();
        }
    }

    // Values directly after a key stay on the key's line; array elements and
    // the root start their own line.
    void lead() {
        if (inline_value_) {
            inline_value_ = false;
            return;
        }
        next_item();
    }

    void close(char closer) {
        const bool had = stack_.back().has_items;
        stack_.pop_back();
        if (had) {
            os_ << '\n';
            indent();
        }
        os_ << closer;
    }

    std::ostream& os_;
    std::vector<Frame> stack_;
    bool inline_value_ = false;
};

// ---------------------------------------------------------------------------
// CSV reading
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            return out;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
}

inline double parse_number(const std::string& field, const std::string& source,
                           std::size_t line_no) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || field.empty()) {
        throw InvalidInput(source + " line " + std::to_string(line_no) + ": bad number '" +
                           field + "'");
    }
    return v;
}

// Pulls rows from a CSV stream, validating the header against the expected
// column names (case-insensitive). Columns beyond `required` may be omitted
// file-wide but not per row. Blank lines are skipped; CRLF is tolerated.
class CsvReader {
public:
    CsvReader(std::istream& in, std::string source, const std::vector<std::string>& columns,
              std::size_t required)
        : in_(in), source_(std::move(source)), n_columns_(columns.size()) {
        std::string header;
        if (!next_line(header)) throw InvalidInput(source_ + ": empty file");
        const auto fields = split_fields(header);
        if (fields.size() < required || fields.size() > columns.size()) {
            throw InvalidInput(source_ + ": expected header '" + join(columns, required) + "'");
        }
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (lower(fields[i]) != columns[i]) {
                throw InvalidInput(source_ + ": expected header '" + join(columns, required) +
                                   "', found column '" + fields[i] + "'");
            }
        }
        present_ = fields.size();
    }

    bool next_row(std::vector<std::string>& fields) {
        std::string line;
        if (!next_line(line)) return false;
        fields = split_fields(line);
        if (fields.size() != present_) {
            throw InvalidInput(source_ + " line " + std::to_string(line_no_) + ": expected " +
                               std::to_string(present_) + " fields, found " +
                               std::to_string(fields.size()));
        }
        return true;
    }

    double number(const std::vector<std::string>& fields, std::size_t i) const {
        return parse_number(fields[i], source_, line_no_);
    }

    std::size_t present_columns() const { return present_; }
    std::size_t line() const { return line_no_; }
    const std::string& source() const { return source_; }

private:
    static std::string join(const std::vector<std::string>& columns, std::size_t required) {
        std::string s;
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (i) s += ',';
            if (i >= required) s += '[';
            s += columns[i];
            if (i >= required) s += ']';
        }
        return s;
    }

    bool next_line(std::string& line) {
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!trim(line).empty()) return true;
        }
        return false;
    }

    std::istream& in_;
    std::string source_;
    std::size_t n_columns_;
    std::size_t present_ = 0;
    std::size_t line_no_ = 0;
};

}  // namespace detail

// maturity,strike,kind,price[,weight]; kind is c/p/call/put in any case.
inline std::vector<OptionQuote> read_quotes_csv(std::istream& in,
                                                const std::string& source = "quotes") {
    detail::CsvReader reader(in, source, {"maturity", "strike", "kind", "price", "weight"}, 4);
    std::vector<OptionQuote> out;
    std::vector<std::string> fields;
    while (reader.next_row(fields)) {
        OptionQuote q;
        q.maturity = reader.number(fields, 0);
        q.strike = reader.number(fields, 1);
        const std::string kind = detail::lower(fields[2]);
        if (kind == "c" || kind == "call") {
            q.kind = QuoteKind::call;
        } else if (kind == "p" || kind == "put") {
            q.kind = QuoteKind::put;
        } else {
            throw InvalidInput(source + " line " + std::to_string(reader.line()) +
                               ": kind must be call or put, found '" + fields[2] + "'");
        }
        q.price = reader.number(fields, 3);
        q.weight = reader.present_columns() > 4 ? reader.number(fields, 4) : 1.0;
        out.push_back(q);
    }
    if (out.empty()) throw InvalidInput(source + ": no quote rows");
    return out;
}

inline PricePath read_path_csv(std::istream& in, const std::string& source = "path") {
    detail::CsvReader reader(in, source, {"time", "price"}, 2);
    PricePath path;
    std::vector<std::string> fields;
    while (reader.next_row(fields)) {
        path.times.push_back(reader.number(fields, 0));
        path.prices.push_back(reader.number(fields, 1));
    }
    if (path.times.empty()) throw InvalidInput(source + ": no rows");
    path.validate();
    return path;
}

// Piecewise-linear payoff as x,value knot rows. Beyond the last knot the
// final segment continues with its own slope; append a flat segment to pin a
// bounded payoff.
inline Payoff read_payoff_csv(std::istream& in, const std::string& source = "payoff") {
    detail::CsvReader reader(in, source, {"x", "value"}, 2);
    std::vector<double> xs;
    std::vector<double> values;
    std::vector<std::string> fields;
    while (reader.next_row(fields)) {
        xs.push_back(reader.number(fields, 0));
        values.push_back(reader.number(fields, 1));
    }
    if (xs.empty()) throw InvalidInput(source + ": no rows");
    const double terminal_slope =
        xs.size() >= 2 ? (values.back() - values[values.size() - 2]) /
                             (xs.back() - xs[xs.size() - 2])
                       : 0.0;
    return Payoff::from_points(xs, values, terminal_slope);
}

inline RiskSample read_pnl_csv(std::istream& in, const std::string& source = "pnl") {
    detail::CsvReader reader(in, source, {"pnl", "probability"}, 1);
    RiskSample sample;
    std::vector<std::string> fields;
    while (reader.next_row(fields)) {
        sample.outcomes.push_back(reader.number(fields, 0));
        if (reader.present_columns() > 1) {
            sample.probabilities.push_back(reader.number(fields, 1));
        }
    }
    sample.validate();
    return sample;
}

// ---------------------------------------------------------------------------
// Volatility surfaces as JSON
// ---------------------------------------------------------------------------

// {"times": [...], "prices": [...], "vols": [[row per time]...]} or a flat
// {"vol": sigma}.
inline LocalVolSurface read_vol_surface_json(std::istream& in,
                                             const std::string& source = "vol surface") {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(source + ": " + e.what());
    }
    try {
        if (j.contains("vol")) return LocalVolSurface::flat(j.at("vol").get<double>());
        std::vector<double> times = j.at("times").get<std::vector<double>>();
        std::vector<double> prices = j.at("prices").get<std::vector<double>>();
        const auto& rows = j.at("vols");
        if (!rows.is_array() || rows.size() != times.size()) {
            throw InvalidInput(source + ": vols must hold one row per time");
        }
        std::vector<double> flat;
        flat.reserve(times.size() * prices.size());
        for (const auto& row : rows) {
            if (!row.is_array() || row.size() != prices.size()) {
                throw InvalidInput(source + ": each vols row must hold one value per price");
            }
            for (const auto& v : row) flat.push_back(v.get<double>());
        }
        return LocalVolSurface(std::move(times), std::move(prices), std::move(flat));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(source + ": " + e.what());
    }
}

inline void write_vol_surface_json(std::ostream& os, const LocalVolSurface& surface) {
    JsonWriter w(os);
    w.begin_object();
    w.field("times", surface.times());
    w.field("prices", surface.prices());
    w.key("vols").begin_array();
    for (std::size_t i = 0; i < surface.times().size(); ++i) {
        w.begin_array();
        for (std::size_t j = 0; j < surface.prices().size(); ++j) w.value(surface.at(i, j));
        w.end_array();
    }
    w.end_array();
    w.end_object();
    w.finish();
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

inline void write_estimate(JsonWriter& w, const McEstimate& e) {
    w.begin_object();
    w.field("mean", e.mean);
    w.field("se", e.se);
    w.field("n", e.n);
    w.field("ci_low", e.ci_low);
    w.field("ci_high", e.ci_high);
    w.end_object();
}

inline void write_lp_result(JsonWriter& w, const MartingaleLpResult& r) {
    w.begin_object();
    w.field("value", r.value);
    w.key("measure").begin_array();
    for (std::size_t i = 0; i < r.support.size(); ++i) {
        if (r.weights[i] <= 1e-12) continue;
        w.begin_object();
        w.field("x", r.support[i]);
        w.field("q", r.weights[i]);
        w.end_object();
    }
    w.end_array();
    w.key("dual_hedge").begin_object();
    w.field("cash", r.cash);
    w.field("forward", r.forward_units);
    w.key("calls").begin_array();
    for (const auto& c : r.call_positions) {
        w.begin_object();
        w.field("strike", c.first);
        w.field("position", c.second);
        w.end_object();
    }
    w.end_array();
    w.end_object();
    w.key("certificates").begin_object();
    w.field("duality_gap", r.duality_gap);
    w.field("primal_residual", r.primal_residual);
    w.field("dual_residual", r.dual_residual);
    w.end_object();
    w.field("iterations", r.iterations);
    w.end_object();
}

inline void write_calibration_report(JsonWriter& w, const CalibrationReport& report) {
    w.begin_object();
    w.field("converged", report.converged);
    w.field("iterations", report.iterations);
    w.field("objective", report.objective_history.empty() ? 0.0
                                                          : report.objective_history.back());
    w.field("data_misfit", report.data_misfit);
    w.field("penalty", report.penalty);
    w.field("objective_history", report.objective_history);
    w.key("residuals").begin_array();
    for (const auto& r : report.residuals) {
        w.begin_object();
        w.field("maturity", r.maturity);
        w.field("strike", r.strike);
        w.field("kind", r.kind == QuoteKind::call ? "call" : "put");
        w.field("market", r.market_price);
        w.field("model", r.model_price);
        w.field("weight", r.weight);
        w.end_object();
    }
    w.end_array();
    w.key("surface").begin_object();
    w.field("times", report.fitted.times());
    w.field("prices", report.fitted.prices());
    w.key("vols").begin_array();
    for (std::size_t i = 0; i < report.fitted.times().size(); ++i) {
        w.begin_array();
        for (std::size_t j = 0; j < report.fitted.prices().size(); ++j) {
            w.value(report.fitted.at(i, j));
        }
        w.end_array();
    }
    w.end_array();
    w.end_object();
    w.end_object();
}

// ---------------------------------------------------------------------------
// CSV writers
// ---------------------------------------------------------------------------

inline void write_solution_csv(std::ostream& os, const PdeSolution& solution) {
    os << "t,x,value\n";
    for (std::size_t i = 0; i < solution.times.size(); ++i) {
        for (std::size_t j = 0; j < solution.prices.size(); ++j) {
            os << format_double(solution.times[i]) << ',' << format_double(solution.prices[j])
               << ',' << format_double(solution.values[i * solution.prices.size() + j]) << '\n';
        }
    }
}

inline void write_batch_csv(std::ostream& os, const PathBatch& batch) {
    const bool with_state = !batch.vol_state.empty();
    os << (with_state ? "path_id,time,price,y\n" : "path_id,time,price\n");
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
        for (std::size_t k = 0; k <= batch.n_steps; ++k) {
            os << i << ',' << format_double(batch.times[k]) << ','
               << format_double(batch.price(i, k));
            if (with_state) os << ',' << format_double(batch.vol_state[i * (batch.n_steps + 1) + k]);
            os << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Payoff specs
// ---------------------------------------------------------------------------

namespace detail {

inline double spec_number(const std::string& s, const std::string& spec) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
        throw InvalidInput("payoff spec '" + spec + "': bad number '" + s + "'");
    }
    return v;
}

}  // namespace detail

// "call:K", "put:K", "butterfly:K1,K2,K3", "forward:K", "constant:c", or
// "pwl:FILE" pointing at an x,value CSV.
inline Payoff parse_payoff_spec(const std::string& spec) {
    const std::size_t colon = spec.find(':');
    if (colon == std::string::npos) {
        throw InvalidInput("payoff spec '" + spec +
                           "': expected kind:args, e.g. call:100 or pwl:payoff.csv");
    }
    const std::string kind = detail::lower(detail::trim(spec.substr(0, colon)));
    const std::string args = spec.substr(colon + 1);
    if (kind == "pwl") {
        const std::string path = detail::trim(args);
        std::ifstream in(path);
        if (!in) throw InvalidInput("payoff spec '" + spec + "': cannot open '" + path + "'");
        return read_payoff_csv(in, path);
    }
    const auto parts = detail::split_fields(args);
    if (kind == "call" && parts.size() == 1) {
        return Payoff::call(detail::spec_number(parts[0], spec));
    }
    if (kind == "put" && parts.size() == 1) {
        return Payoff::put(detail::spec_number(parts[0], spec));
    }
    if (kind == "forward" && parts.size() == 1) {
        return Payoff::forward(detail::spec_number(parts[0], spec));
    }
    if (kind == "constant" && parts.size() == 1) {
        return Payoff::constant(detail::spec_number(parts[0], spec));
    }
    if (kind == "butterfly" && parts.size() == 3) {
        return Payoff::butterfly(detail::spec_number(parts[0], spec),
                                 detail::spec_number(parts[1], spec),
                                 detail::spec_number(parts[2], spec));
    }
    throw InvalidInput("payoff spec '" + spec + "': unknown kind or wrong argument count");
}

}  // namespace voltcraft
