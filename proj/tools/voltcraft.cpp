// voltcraft: batch front end for the pricing, calibration, super-replication
// and risk library. Every subcommand reads plain files, writes one JSON or
// CSV document, and exits 0 on success, 2 on bad input or configuration, 3
// when a solver reports failure (no root, infeasible, ill-posed, divergent).
// Output is deterministic: the same inputs give byte-identical bytes.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "voltcraft/analytic.hpp"
#include "voltcraft/calibration.hpp"
#include "voltcraft/errors.hpp"
#include "voltcraft/io.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/monte_carlo.hpp"
#include "voltcraft/pde.hpp"
#include "voltcraft/risk.hpp"
#include "voltcraft/superrep.hpp"
#include "voltcraft/vol_surface.hpp"

namespace {

using namespace voltcraft;

// --config accepts a JSON object mirroring the command line: top-level keys
// for global options, one nested object per subcommand. Values given on the
// command line win over the file.
class JsonConfig : public CLI::Config {
  public:
    std::string to_config(const CLI::App*, bool, bool, std::string) const override {
        return "{}\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        nlohmann::json j;
        try {
            input >> j;
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(std::string("config: ") + e.what());
        }
        if (!j.is_object()) throw InvalidInput("config: top level must be an object");
        std::vector<CLI::ConfigItem> out;
        walk(j, {}, out);
        return out;
    }

  private:
    static void walk(const nlohmann::json& j, std::vector<std::string> parents,
                     std::vector<CLI::ConfigItem>& out) {
        for (const auto& [key, value] : j.items()) {
            if (value.is_object()) {
                auto deeper = parents;
                deeper.push_back(key);
                walk(value, deeper, out);
                continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_string()) {
                item.inputs = {value.get<std::string>()};
            } else if (value.is_boolean()) {
                item.inputs = {value.get<bool>() ? "true" : "false"};
            } else if (value.is_number()) {
                item.inputs = {value.dump()};
            } else {
                throw InvalidInput("config: key '" + key + "' must be a scalar");
            }
            out.push_back(std::move(item));
        }
    }
};

// ---------------------------------------------------------------------------
// Shared option groups
// ---------------------------------------------------------------------------

struct MarketOpts {
    double spot = 100.0;
    double rate = 0.0;
    double t0 = 0.0;
};

void add_market_options(CLI::App* cmd, MarketOpts& m) {
    cmd->add_option("--spot", m.spot, "Spot price")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--rate", m.rate, "Flat continuously compounded short rate")
        ->capture_default_str();
    cmd->add_option("--t0", m.t0, "Valuation time")->capture_default_str();
}

MarketState build_market(const MarketOpts& m) {
    return MarketState{m.t0, m.spot, RateCurve::flat(m.rate)};
}

struct GridOpts {
    int time_steps = 200;
    int space_nodes = 201;
    double theta = 0.5;
};

void add_grid_options(CLI::App* cmd, GridOpts& g) {
    cmd->add_option("--time-steps", g.time_steps, "Finite-difference time steps")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--space-nodes", g.space_nodes, "Finite-difference space nodes")
        ->check(CLI::Range(3, 100001))->capture_default_str();
    cmd->add_option("--theta", g.theta, "Time-stepping weight: 0 explicit, 0.5 trapezoidal, "
                    "1 implicit")->check(CLI::Range(0.0, 1.0))->capture_default_str();
}

PdeGrid build_grid(const GridOpts& g) {
    PdeGrid grid;
    grid.time_steps = g.time_steps;
    grid.space_nodes = g.space_nodes;
    grid.theta = g.theta;
    return grid;
}

struct VolOpts {
    double sigma = std::numeric_limits<double>::quiet_NaN();
    std::string file;
};

void add_vol_options(CLI::App* cmd, VolOpts& v) {
    auto* flat = cmd->add_option("--vol", v.sigma, "Flat volatility");
    cmd->add_option("--vol-file", v.file, "Volatility surface JSON")->excludes(flat);
}

LocalVolSurface load_vol(const VolOpts& v, const std::string& who) {
    if (!v.file.empty()) {
        std::ifstream in(v.file);
        if (!in) throw InvalidInput(who + ": cannot open '" + v.file + "'");
        return read_vol_surface_json(in, v.file);
    }
    if (!std::isfinite(v.sigma)) throw InvalidInput(who + ": need --vol or --vol-file");
    return LocalVolSurface::flat(v.sigma);
}

struct OutputOpts {
    std::string path = "-";
    std::string format = "json";
};

void add_output_options(CLI::App* cmd, OutputOpts& o, bool fixed_format = false) {
    cmd->add_option("--output", o.path, "Output file, - for stdout")->capture_default_str();
    if (!fixed_format) {
        cmd->add_option("--format", o.format, "Output format")
            ->check(CLI::IsMember({"json", "table"}))->capture_default_str();
    }
}

// Table form: the JSON flattened to aligned key/value rows.
std::string to_table(const std::string& json_text) {
    const nlohmann::json j = nlohmann::json::parse(json_text);
    std::vector<std::pair<std::string, std::string>> rows;
    const std::function<void(const nlohmann::json&, const std::string&)> walk =
        [&](const nlohmann::json& node, const std::string& prefix) {
            if (node.is_object()) {
                for (const auto& [k, v] : node.items()) {
                    walk(v, prefix.empty() ? k : prefix + "." + k);
                }
            } else if (node.is_array()) {
                std::size_t i = 0;
                for (const auto& v : node) walk(v, prefix + "[" + std::to_string(i++) + "]");
            } else {
                rows.emplace_back(prefix, node.is_string() ? node.get<std::string>()
                                                           : node.dump());
            }
        };
    walk(j, "");
    std::size_t width = 0;
    for (const auto& [k, v] : rows) width = std::max(width, k.size());
    std::ostringstream os;
    for (const auto& [k, v] : rows) {
        os << k << std::string(width - k.size() + 2, ' ') << v << '\n';
    }
    return os.str();
}

void emit(const OutputOpts& o, const std::string& payload) {
    const std::string text = o.format == "table" ? to_table(payload) : payload;
    if (o.path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(o.path);
    if (!out) throw InvalidInput("cannot open output file '" + o.path + "'");
    out << text;
}

std::vector<OptionQuote> load_quotes(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open quotes file '" + path + "'");
    return read_quotes_csv(in, path);
}

// ---------------------------------------------------------------------------
// price
// ---------------------------------------------------------------------------

struct PriceCmd {
    MarketOpts market;
    GridOpts grid;
    VolOpts vol;
    OutputOpts out;
    std::string payoff_spec;
    double maturity = 1.0;
    std::string engine = "analytic";
    std::size_t paths = 100000;
    int steps = 100;
    std::uint64_t seed = 1;
    bool antithetic = false;
    bool control_variate = false;
    int threads = 1;
};

void run_price(const PriceCmd& o) {
    const MarketState market = build_market(o.market);
    const Payoff payoff = parse_payoff_spec(o.payoff_spec);
    const LocalVolSurface vol = load_vol(o.vol, "price");
    const bool flat_vol = o.vol.file.empty();
    const double horizon = o.maturity - market.t0;

    std::ostringstream buf;
    JsonWriter w(buf);
    w.begin_object();
    w.field("payoff", o.payoff_spec);
    w.field("spot", market.x0);
    w.field("rate", o.market.rate);
    w.field("maturity", o.maturity);

    if (o.engine == "analytic" || o.engine == "all") {
        if (!flat_vol) {
            if (o.engine == "analytic") {
                throw InvalidInput("price: the analytic engine needs a flat --vol");
            }
        } else {
            w.key("analytic").begin_object();
            w.field("price", bs_pwl_price(market.x0, payoff, horizon, o.vol.sigma, o.market.rate));
            w.field("delta", bs_pwl_delta(market.x0, payoff, horizon, o.vol.sigma, o.market.rate));
            w.end_object();
        }
    }
    if (o.engine == "pde" || o.engine == "all") {
        const PdeSolution sol =
            solve_backward_pricing(market, vol, payoff, o.maturity, build_grid(o.grid));
        w.key("pde").begin_object();
        w.field("price", sol.price());
        w.field("delta", sol.delta());
        w.field("warnings", sol.warnings);
        w.end_object();
    }
    if (o.engine == "mc" || o.engine == "all") {
        SimSpec spec;
        spec.maturity = o.maturity;
        spec.steps = o.steps;
        spec.paths = o.paths;
        spec.seed = o.seed;
        spec.antithetic = o.antithetic;
        spec.threads = o.threads;
        const PathBatch batch = flat_vol
                                    ? simulate_paths(market, GbmModel{o.vol.sigma, {}}, spec)
                                    : simulate_paths(market, LocalVolModel{vol}, spec);
        McPriceOptions popt;
        popt.control_variate = o.control_variate;
        const McEstimate est = mc_price(market, batch, payoff, popt);
        w.key("mc");
        write_estimate(w, est);
    }
    w.end_object();
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// implied-vol
// ---------------------------------------------------------------------------

struct ImpliedCmd {
    MarketOpts market;
    OutputOpts out;
    double maturity = 1.0;
    double strike = 0.0;
    std::string kind = "call";
    double price = 0.0;
};

void run_implied(const ImpliedCmd& o) {
    const MarketState market = build_market(o.market);
    OptionQuote quote;
    quote.maturity = o.maturity;
    quote.strike = o.strike;
    quote.kind = o.kind == "put" ? QuoteKind::put : QuoteKind::call;
    quote.price = o.price;
    const double sigma = implied_volatility(market, quote);
    std::ostringstream buf;
    JsonWriter w(buf);
    w.begin_object();
    w.field("strike", o.strike);
    w.field("maturity", o.maturity);
    w.field("kind", o.kind);
    w.field("price", o.price);
    w.field("implied_vol", sigma);
    w.end_object();
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

struct CalibrateCmd {
    MarketOpts market;
    GridOpts grid;
    OutputOpts out;
    std::string quotes_file;
    std::string mode = "tikhonov";
    double alpha = 1e-4;
    int knots_t = 3;
    int knots_x = 5;
    double initial_vol = 0.2;
    double sigma_lo = 0.01;
    double sigma_hi = 2.0;
    int max_iterations = 500;
    int threads = 1;
};

void run_calibrate_dupire(const CalibrateCmd& o, const MarketState& market,
                          std::vector<OptionQuote> quotes) {
    // The inversion needs a full lattice of call prices. Puts convert
    // through parity; gaps are an input error.
    std::vector<double> mats;
    std::vector<double> strikes;
    for (const auto& q : quotes) {
        mats.push_back(q.maturity);
        strikes.push_back(q.strike);
    }
    const auto dedupe = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    };
    dedupe(mats);
    dedupe(strikes);
    std::map<std::pair<double, double>, double> calls;
    for (const auto& q : quotes) {
        const double call = q.kind == QuoteKind::call
                                ? q.price
                                : q.price + market.x0 -
                                      q.strike * market.rates.discount(market.t0, q.maturity);
        calls[{q.maturity, q.strike}] = call;
    }
    std::vector<double> values;
    values.reserve(mats.size() * strikes.size());
    for (double t : mats) {
        for (double k : strikes) {
            const auto it = calls.find({t, k});
            if (it == calls.end()) {
                throw InvalidInput("calibrate: quotes must cover every maturity/strike pair "
                                   "for the inversion; missing T=" + std::to_string(t) +
                                   " K=" + std::to_string(k));
            }
            values.push_back(it->second);
        }
    }
    const PriceSurface surface(market, mats, strikes, values);
    const DupireInversion inv = dupire_local_vol(surface);

    std::ostringstream buf;
    JsonWriter w(buf);
    w.begin_object();
    w.field("mode", "dupire");
    w.field("invalid_nodes", inv.invalid_nodes);
    w.field("clipped_nodes", inv.clipped_nodes);
    w.field("warnings", inv.warnings);
    w.key("surface").begin_object();
    w.field("times", inv.vol.times());
    w.field("prices", inv.vol.prices());
    w.key("vols").begin_array();
    for (std::size_t i = 0; i < inv.vol.times().size(); ++i) {
        w.begin_array();
        for (std::size_t j = 0; j < inv.vol.prices().size(); ++j) w.value(inv.vol.at(i, j));
        w.end_array();
    }
    w.end_array();
    w.end_object();
    w.end_object();
    w.finish();
    emit(o.out, buf.str());
}

void run_calibrate(const CalibrateCmd& o) {
    const MarketState market = build_market(o.market);
    std::vector<OptionQuote> quotes = load_quotes(o.quotes_file);
    if (o.mode == "dupire") {
        run_calibrate_dupire(o, market, std::move(quotes));
        return;
    }

    CalibrationProblem problem{market, QuoteSurface::build(market, std::move(quotes))};
    problem.alpha = o.alpha;
    problem.sigma_lo = o.sigma_lo;
    problem.sigma_hi = o.sigma_hi;
    problem.max_iterations = o.max_iterations;
    problem.threads = o.threads;
    problem.grid = build_grid(o.grid);
    problem.initial = LocalVolSurface::flat(o.initial_vol);

    // Knots span the quoted region: times to the last maturity, prices a
    // little beyond the quoted strikes, geometrically spaced.
    double t_max = market.t0;
    double k_min = std::numeric_limits<double>::infinity();
    double k_max = 0.0;
    for (const auto& row : problem.quotes.rows) {
        for (const auto& q : row) {
            t_max = std::max(t_max, q.maturity);
            k_min = std::min(k_min, q.strike);
            k_max = std::max(k_max, q.strike);
        }
    }
    if (o.knots_t < 2 || o.knots_x < 2) {
        throw InvalidInput("calibrate: need at least 2 knots per axis");
    }
    for (int i = 0; i < o.knots_t; ++i) {
        problem.knot_times.push_back(market.t0 +
                                     (t_max - market.t0) * i / double(o.knots_t - 1));
    }
    const double lo = std::log(0.8 * k_min);
    const double hi = std::log(1.2 * k_max);
    for (int j = 0; j < o.knots_x; ++j) {
        problem.knot_prices.push_back(std::exp(lo + (hi - lo) * j / double(o.knots_x - 1)));
    }

    const CalibrationReport report = calibrate_tikhonov(problem);
    std::ostringstream buf;
    JsonWriter w(buf);
    write_calibration_report(w, report);
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// superrep
// ---------------------------------------------------------------------------

struct SuperrepCmd {
    MarketOpts market;
    GridOpts grid;
    OutputOpts out;
    std::string payoff_spec;
    std::string method;
    double maturity = 1.0;
    double vol_lo = 0.1;
    double vol_hi = 0.3;
    std::string quotes_file;
    double support_lo = 0.0;
    double support_hi = 0.0;  // 0 means 4 * spot
    std::size_t atoms = 2001;
    double slack = -1.0;
};

void run_superrep(const SuperrepCmd& o) {
    const MarketState market = build_market(o.market);
    const Payoff payoff = parse_payoff_spec(o.payoff_spec);
    std::ostringstream buf;
    JsonWriter w(buf);

    if (o.method == "envelope") {
        const EnvelopeResult res = concave_envelope(market, payoff);
        w.begin_object();
        w.field("method", "envelope");
        w.field("value", res.value);
        w.field("delta", res.delta);
        w.field("cash", res.cash);
        w.key("envelope").begin_array();
        for (std::size_t i = 0; i < res.envelope.xs.size(); ++i) {
            w.begin_object();
            w.field("x", res.envelope.xs[i]);
            w.field("value", res.envelope.values[i]);
            w.end_object();
        }
        w.end_array();
        w.field("terminal_slope", res.envelope.terminal_slope);
        w.end_object();
    } else if (o.method == "band") {
        const VolBand band(o.vol_lo, o.vol_hi);
        const PdeGrid grid = build_grid(o.grid);
        const PdeSolution up = solve_bsb(market, band, payoff, o.maturity, grid, BandSide::upper);
        const PdeSolution dn = solve_bsb(market, band, payoff, o.maturity, grid, BandSide::lower);
        w.begin_object();
        w.field("method", "band");
        w.field("vol_lo", o.vol_lo);
        w.field("vol_hi", o.vol_hi);
        w.key("upper").begin_object();
        w.field("price", up.price());
        w.field("delta", up.delta());
        w.field("nonlinear_iterations", up.nonlinear_iterations);
        w.end_object();
        w.key("lower").begin_object();
        w.field("price", dn.price());
        w.field("delta", dn.delta());
        w.field("nonlinear_iterations", dn.nonlinear_iterations);
        w.end_object();
        w.end_object();
    } else {
        // LP over measures on a finite support, calibrated to call quotes.
        std::vector<CallConstraint> constraints;
        if (!o.quotes_file.empty()) {
            for (const auto& q : load_quotes(o.quotes_file)) {
                // Zero rates are enforced by the solver, so parity is C = P + x0 - K.
                const double call =
                    q.kind == QuoteKind::call ? q.price : q.price + market.x0 - q.strike;
                constraints.push_back({q.strike, call});
            }
        }
        const double hi = o.support_hi > 0.0 ? o.support_hi : 4.0 * market.x0;
        const std::vector<double> support =
            uniform_support(o.support_lo, hi, o.atoms, market.x0);
        const MartingaleLpResult res = superrep_lp(market, payoff, constraints, support, o.slack);
        write_lp_result(w, res);
    }
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// risk
// ---------------------------------------------------------------------------

struct RiskCmd {
    OutputOpts out;
    std::string input_file;
    double level = 0.95;
    double lambda = 1.0;
    int axiom_trials = 200;
};

void run_risk(const RiskCmd& o) {
    std::ifstream in(o.input_file);
    if (!in) throw InvalidInput("cannot open P&L file '" + o.input_file + "'");
    const RiskSample sample = read_pnl_csv(in, o.input_file);

    std::vector<double> base_measure(sample.outcomes.size());
    for (std::size_t i = 0; i < base_measure.size(); ++i) {
        base_measure[i] = sample.probability(i);
    }
    const CoherentResult worst = coherent_risk(sample.outcomes, {base_measure});

    const double level = o.level;
    const AxiomReport es_axioms = check_axioms(
        [level](const std::vector<double>& x) {
            return expected_shortfall(RiskSample{x, {}}, level);
        },
        o.axiom_trials);
    const double lambda = o.lambda;
    const AxiomReport ent_axioms = check_axioms(
        [lambda](const std::vector<double>& x) {
            return entropic_risk(RiskSample{x, {}}, lambda);
        },
        o.axiom_trials);
    const SubadditivityViolation violation = var_subadditivity_violation(o.level);

    std::ostringstream buf;
    JsonWriter w(buf);
    w.begin_object();
    w.field("n", sample.outcomes.size());
    w.field("level", o.level);
    w.field("var", value_at_risk(sample, o.level));
    w.field("expected_shortfall", expected_shortfall(sample, o.level));
    w.key("entropic").begin_object();
    w.field("lambda", o.lambda);
    w.field("value", entropic_risk(sample, o.lambda));
    w.end_object();
    w.key("worst_case").begin_object();
    w.field("value", worst.value);
    w.field("witness_index", worst.witness_index);
    w.end_object();
    w.key("axioms").begin_object();
    w.key("expected_shortfall").begin_object();
    w.field("monotone", es_axioms.monotone);
    w.field("translation_invariant", es_axioms.translation_invariant);
    w.field("positively_homogeneous", es_axioms.positively_homogeneous);
    w.field("subadditive", es_axioms.subadditive);
    w.field("convex", es_axioms.convex);
    w.field("coherent", es_axioms.coherent());
    w.end_object();
    w.field("entropic_convex", ent_axioms.convex);
    w.key("var_subadditivity").begin_object();
    w.field("violation_found", violation.found);
    w.field("var_each", violation.var_x);
    w.field("var_sum", violation.var_sum);
    w.field("loss_probability", violation.loss_probability);
    w.end_object();
    w.end_object();
    w.end_object();
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// hedge
// ---------------------------------------------------------------------------

struct HedgeCmd {
    MarketOpts market;
    OutputOpts out;
    std::string payoff_spec;
    double maturity = 1.0;
    double sigma = 0.2;
    std::size_t rebalances = 12;
    std::size_t paths = 10000;
    int steps = 0;  // 0: hedge at every simulation step
    std::uint64_t seed = 1;
    int threads = 1;
};

void run_hedge(const HedgeCmd& o) {
    const MarketState market = build_market(o.market);
    const Payoff payoff = parse_payoff_spec(o.payoff_spec);
    SimSpec spec;
    spec.maturity = o.maturity;
    spec.steps = o.steps > 0 ? o.steps : static_cast<int>(o.rebalances);
    spec.paths = o.paths;
    spec.seed = o.seed;
    spec.threads = o.threads;
    const PathBatch batch = simulate_paths(market, GbmModel{o.sigma, {}}, spec);
    const HedgeResult res = simulate_delta_hedge(market, o.sigma, payoff, o.rebalances, batch);

    const RiskSample errors{res.errors, {}};
    std::ostringstream buf;
    JsonWriter w(buf);
    w.begin_object();
    w.field("payoff", o.payoff_spec);
    w.field("initial_price", bs_pwl_price(market.x0, payoff, o.maturity - market.t0, o.sigma,
                                          o.market.rate));
    w.field("rebalances", o.rebalances);
    w.field("paths", o.paths);
    w.key("error").begin_object();
    w.field("mean", res.mean);
    w.field("stddev", res.stddev);
    w.field("se", res.se);
    w.field("var95", value_at_risk(errors, 0.95));
    w.end_object();
    w.end_object();
    w.finish();
    emit(o.out, buf.str());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateCmd {
    MarketOpts market;
    VolOpts vol;
    OutputOpts out;
    std::string model = "gbm";
    double maturity = 1.0;
    std::size_t paths = 10;
    int steps = 100;
    std::uint64_t seed = 1;
    bool antithetic = false;
    int threads = 1;
    double sv_kappa = 1.5;
    double sv_mean = 0.04;
    double sv_xi = 0.5;
    double sv_rho = -0.7;
    double sv_y0 = 0.04;
};

void run_simulate(const SimulateCmd& o) {
    const MarketState market = build_market(o.market);
    SimSpec spec;
    spec.maturity = o.maturity;
    spec.steps = o.steps;
    spec.paths = o.paths;
    spec.seed = o.seed;
    spec.antithetic = o.antithetic;
    spec.threads = o.threads;

    PathBatch batch;
    if (o.model == "gbm") {
        if (!std::isfinite(o.vol.sigma)) throw InvalidInput("simulate: gbm needs --vol");
        batch = simulate_paths(market, GbmModel{o.vol.sigma, {}}, spec);
    } else if (o.model == "local-vol") {
        batch = simulate_paths(market, LocalVolModel{load_vol(o.vol, "simulate")}, spec);
    } else {
        // Square-root variance process, full truncation at zero.
        StochVolModel sv;
        sv.sigma = [](double, double, double y) { return std::sqrt(std::max(y, 0.0)); };
        sv.y_drift = [k = o.sv_kappa, m = o.sv_mean](double, double, double y) {
            return k * (m - std::max(y, 0.0));
        };
        sv.y_vol = [xi = o.sv_xi](double, double, double y) {
            return xi * std::sqrt(std::max(y, 0.0));
        };
        sv.rho = o.sv_rho;
        sv.y0 = o.sv_y0;
        batch = simulate_paths(market, sv, spec);
    }
    std::ostringstream buf;
    write_batch_csv(buf, batch);
    emit(o.out, buf.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Derivatives pricing, volatility calibration, model-free bounds and "
                 "risk measurement"};
    app.require_subcommand(1);
    app.set_config("--config")->description("JSON config: {\"subcommand\": {\"option\": value}}");
    app.config_formatter(std::make_shared<JsonConfig>());
    app.allow_config_extras(false);

    PriceCmd price;
    {
        CLI::App* cmd = app.add_subcommand("price", "Price a terminal payoff");
        add_market_options(cmd, price.market);
        add_grid_options(cmd, price.grid);
        add_vol_options(cmd, price.vol);
        add_output_options(cmd, price.out);
        cmd->add_option("--payoff", price.payoff_spec,
                        "call:K, put:K, butterfly:K1,K2,K3, forward:K, constant:c, pwl:FILE")
            ->required();
        cmd->add_option("--maturity", price.maturity, "Expiry time")->required();
        cmd->add_option("--engine", price.engine, "Pricing engine")
            ->check(CLI::IsMember({"analytic", "pde", "mc", "all"}))->capture_default_str();
        cmd->add_option("--paths", price.paths, "Monte-Carlo paths")->capture_default_str();
        cmd->add_option("--steps", price.steps, "Monte-Carlo time steps")->capture_default_str();
        cmd->add_option("--seed", price.seed, "Random seed")->capture_default_str();
        cmd->add_flag("--antithetic", price.antithetic, "Antithetic pairs");
        cmd->add_flag("--control-variate", price.control_variate,
                      "Discounted terminal price as control variate");
        cmd->add_option("--threads", price.threads, "Worker threads")
            ->envname("VOLTCRAFT_THREADS")->capture_default_str();
        cmd->callback([&price] { run_price(price); });
    }

    ImpliedCmd implied;
    {
        CLI::App* cmd = app.add_subcommand("implied-vol", "Invert a quote for volatility");
        add_market_options(cmd, implied.market);
        add_output_options(cmd, implied.out);
        cmd->add_option("--maturity", implied.maturity, "Expiry time")->required();
        cmd->add_option("--strike", implied.strike, "Strike")->required();
        cmd->add_option("--kind", implied.kind, "call or put")
            ->check(CLI::IsMember({"call", "put"}))->capture_default_str();
        cmd->add_option("--price", implied.price, "Observed price")->required();
        cmd->callback([&implied] { run_implied(implied); });
    }

    CalibrateCmd calibrate;
    {
        CLI::App* cmd = app.add_subcommand(
            "calibrate", "Fit a local volatility surface to option quotes");
        add_market_options(cmd, calibrate.market);
        add_grid_options(cmd, calibrate.grid);
        add_output_options(cmd, calibrate.out);
        cmd->add_option("--quotes", calibrate.quotes_file, "Quotes CSV "
                        "(maturity,strike,kind,price[,weight])")->required();
        cmd->add_option("--mode", calibrate.mode,
                        "tikhonov: regularized fit; dupire: direct inversion")
            ->check(CLI::IsMember({"tikhonov", "dupire"}))->capture_default_str();
        cmd->add_option("--alpha", calibrate.alpha, "Smoothness weight")
            ->check(CLI::NonNegativeNumber)->capture_default_str();
        cmd->add_option("--knots-t", calibrate.knots_t, "Surface knots in time")
            ->capture_default_str();
        cmd->add_option("--knots-x", calibrate.knots_x, "Surface knots in price")
            ->capture_default_str();
        cmd->add_option("--initial-vol", calibrate.initial_vol, "Starting flat volatility")
            ->capture_default_str();
        cmd->add_option("--sigma-lo", calibrate.sigma_lo, "Lower volatility bound")
            ->capture_default_str();
        cmd->add_option("--sigma-hi", calibrate.sigma_hi, "Upper volatility bound")
            ->capture_default_str();
        cmd->add_option("--max-iterations", calibrate.max_iterations, "Iteration cap")
            ->capture_default_str();
        cmd->add_option("--threads", calibrate.threads, "Worker threads")
            ->envname("VOLTCRAFT_THREADS")->capture_default_str();
        cmd->callback([&calibrate] { run_calibrate(calibrate); });
    }

    SuperrepCmd superrep;
    {
        CLI::App* cmd = app.add_subcommand(
            "superrep", "Model-free super-replication bounds and hedges");
        add_market_options(cmd, superrep.market);
        add_grid_options(cmd, superrep.grid);
        add_output_options(cmd, superrep.out);
        cmd->add_option("--payoff", superrep.payoff_spec, "Payoff spec")->required();
        cmd->add_option("--method", superrep.method,
                        "envelope: concave majorant; band: uncertain volatility; lp: "
                        "calibration-constrained measure search")
            ->check(CLI::IsMember({"envelope", "band", "lp"}))->required();
        cmd->add_option("--maturity", superrep.maturity, "Expiry (band method)")
            ->capture_default_str();
        cmd->add_option("--vol-lo", superrep.vol_lo, "Band lower volatility")
            ->capture_default_str();
        cmd->add_option("--vol-hi", superrep.vol_hi, "Band upper volatility")
            ->capture_default_str();
        cmd->add_option("--quotes", superrep.quotes_file, "Call quotes CSV (lp method)");
        cmd->add_option("--support-lo", superrep.support_lo, "Measure support lower end")
            ->capture_default_str();
        cmd->add_option("--support-hi", superrep.support_hi,
                        "Measure support upper end, 0 = 4 * spot")->capture_default_str();
        cmd->add_option("--atoms", superrep.atoms, "Support atom count")->capture_default_str();
        cmd->add_option("--slack", superrep.slack,
                        "Calibration tolerance per quote, negative = 1e-6 * spot")
            ->capture_default_str();
        cmd->callback([&superrep] { run_superrep(superrep); });
    }

    RiskCmd risk;
    {
        CLI::App* cmd = app.add_subcommand("risk", "Risk measures on a P&L sample");
        add_output_options(cmd, risk.out);
        cmd->add_option("--input", risk.input_file, "P&L CSV (pnl[,probability])")->required();
        cmd->add_option("--level", risk.level, "Confidence level")
            ->check(CLI::Range(0.0, 1.0))->capture_default_str();
        cmd->add_option("--lambda", risk.lambda, "Entropic risk aversion")
            ->check(CLI::PositiveNumber)->capture_default_str();
        cmd->add_option("--axiom-trials", risk.axiom_trials, "Random axiom probes")
            ->capture_default_str();
        cmd->callback([&risk] { run_risk(risk); });
    }

    HedgeCmd hedge;
    {
        CLI::App* cmd = app.add_subcommand(
            "hedge", "Discrete delta-hedging error along simulated paths");
        add_market_options(cmd, hedge.market);
        add_output_options(cmd, hedge.out);
        cmd->add_option("--payoff", hedge.payoff_spec, "Payoff spec")->required();
        cmd->add_option("--maturity", hedge.maturity, "Expiry time")->required();
        cmd->add_option("--vol", hedge.sigma, "Model and hedge volatility")
            ->capture_default_str();
        cmd->add_option("--rebalances", hedge.rebalances, "Hedge adjustments")
            ->capture_default_str();
        cmd->add_option("--paths", hedge.paths, "Simulated paths")->capture_default_str();
        cmd->add_option("--steps", hedge.steps,
                        "Simulation steps, 0 = one per rebalance")->capture_default_str();
        cmd->add_option("--seed", hedge.seed, "Random seed")->capture_default_str();
        cmd->add_option("--threads", hedge.threads, "Worker threads")
            ->envname("VOLTCRAFT_THREADS")->capture_default_str();
        cmd->callback([&hedge] { run_hedge(hedge); });
    }

    SimulateCmd simulate;
    {
        CLI::App* cmd = app.add_subcommand("simulate", "Write simulated paths as CSV");
        add_market_options(cmd, simulate.market);
        add_vol_options(cmd, simulate.vol);
        add_output_options(cmd, simulate.out, true);
        cmd->add_option("--model", simulate.model, "Price dynamics")
            ->check(CLI::IsMember({"gbm", "local-vol", "stoch-vol"}))->capture_default_str();
        cmd->add_option("--maturity", simulate.maturity, "Horizon")->required();
        cmd->add_option("--paths", simulate.paths, "Path count")->capture_default_str();
        cmd->add_option("--steps", simulate.steps, "Steps per path")->capture_default_str();
        cmd->add_option("--seed", simulate.seed, "Random seed")->capture_default_str();
        cmd->add_flag("--antithetic", simulate.antithetic, "Antithetic pairs");
        cmd->add_option("--threads", simulate.threads, "Worker threads")
            ->envname("VOLTCRAFT_THREADS")->capture_default_str();
        cmd->add_option("--sv-kappa", simulate.sv_kappa, "Variance mean-reversion speed")
            ->capture_default_str();
        cmd->add_option("--sv-mean", simulate.sv_mean, "Long-run variance")
            ->capture_default_str();
        cmd->add_option("--sv-xi", simulate.sv_xi, "Volatility of variance")
            ->capture_default_str();
        cmd->add_option("--sv-rho", simulate.sv_rho, "Price/variance correlation")
            ->capture_default_str();
        cmd->add_option("--sv-y0", simulate.sv_y0, "Initial variance")->capture_default_str();
        cmd->callback([&simulate] { run_simulate(simulate); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const InvalidInput& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const UnsupportedConfig& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
