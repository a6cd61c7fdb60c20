#pragma once

// Monte-Carlo engine: path simulation under lognormal, local-volatility and
// two-factor stochastic-volatility dynamics with per-path splittable random
// streams, price and delta estimators with antithetic and control-variate
// variance reduction, a discrete delta-hedging experiment, and a regression
// solver for backward equations driven by f(t, y, z), including the
// sup-of-drivers form.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "voltcraft/analytic.hpp"
#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/vol_surface.hpp"

namespace voltcraft {

// ---------------------------------------------------------------------------
// Models and batches
// ---------------------------------------------------------------------------

// Lognormal dynamics. Without an explicit trend the drift is the short rate
// (pricing measure); with one, paths follow the statistical measure.
struct GbmModel {
    double sigma = 0.0;
    std::optional<double> trend;
};

// Deterministic level-dependent volatility, short-rate drift.
struct LocalVolModel {
    LocalVolSurface vol;
};

// Two-factor dynamics: the price diffuses at sigma(t, x, y) while y follows
// its own drift/volatility, driven by a Brownian motion correlated with the
// price factor at rho. log_y evolves y in logs (keeps it positive).
struct StochVolModel {
    std::function<double(double, double, double)> sigma;
    std::function<double(double, double, double)> y_drift;
    std::function<double(double, double, double)> y_vol;
    double rho = 0.0;
    double y0 = 0.0;
    bool log_y = false;
    std::optional<double> trend;
};

struct SimSpec {
    double maturity = 0.0;
    int steps = 1;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    bool store_increments = false;
    int threads = 1;
};

enum class SimKind { gbm, local_vol, stoch_vol };

struct PathBatch {
    std::vector<double> times;       // steps + 1 entries, t0 first
    std::vector<double> prices;      // paths x (steps + 1), row-major
    std::vector<double> vol_state;   // stoch-vol only, same layout
    std::vector<double> increments;  // paths x steps, price-factor dW
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    SimKind kind = SimKind::gbm;
    double x0 = 0.0;
    double gbm_sigma = 0.0;
    bool custom_trend = false;
    double trend = 0.0;

    double price(std::size_t i, std::size_t k) const { return prices[i * (n_steps + 1) + k]; }
    double terminal(std::size_t i) const { return price(i, n_steps); }
    double t0() const { return times.front(); }
    double maturity() const { return times.back(); }
    double horizon() const { return times.back() - times.front(); }
    double increment(std::size_t i, std::size_t k) const { return increments[i * n_steps + k]; }
};

namespace detail {

inline void check_sim_spec(const MarketState& market, const SimSpec& spec) {
    if (!(spec.maturity > market.t0)) {
        throw InvalidInput("simulate_paths: maturity must exceed t0");
    }
    if (spec.steps < 1) throw InvalidInput("simulate_paths: steps must be >= 1");
    if (spec.paths < 1) throw InvalidInput("simulate_paths: need at least one path");
    if (spec.antithetic && spec.paths % 2 != 0) {
        throw InvalidInput("simulate_paths: antithetic batches need an even path count");
    }
}

inline PathBatch make_batch(const MarketState& market, const SimSpec& spec, SimKind kind,
                            bool with_vol_state) {
    PathBatch b;
    b.n_paths = spec.paths;
    b.n_steps = static_cast<std::size_t>(spec.steps);
    b.seed = spec.seed;
    b.antithetic = spec.antithetic;
    b.kind = kind;
    b.x0 = market.x0;
    b.times.resize(b.n_steps + 1);
    const double dt = (spec.maturity - market.t0) / static_cast<double>(spec.steps);
    for (std::size_t k = 0; k <= b.n_steps; ++k) {
        b.times[k] = market.t0 + dt * static_cast<double>(k);
    }
    b.times.back() = spec.maturity;
    b.prices.resize(b.n_paths * (b.n_steps + 1));
    if (with_vol_state) b.vol_state.resize(b.n_paths * (b.n_steps + 1));
    if (spec.store_increments) b.increments.resize(b.n_paths * b.n_steps);
    return b;
}

// Per-path stream: antithetic pairs share a stream, the odd member flips
// every Gaussian draw. Path i is unchanged by the total path count.
inline CounterRng path_rng(std::uint64_t seed, std::size_t path, bool antithetic) {
    return CounterRng(seed, antithetic ? path / 2 : path);
}

inline double path_sign(std::size_t path, bool antithetic) {
    return antithetic && (path % 2 == 1) ? -1.0 : 1.0;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

inline PathBatch simulate_paths(const MarketState& market, const GbmModel& model,
                                const SimSpec& spec) {
    detail::check_sim_spec(market, spec);
    if (!(model.sigma >= 0.0) || !std::isfinite(model.sigma)) {
        throw InvalidInput("simulate_paths: sigma must be finite and >= 0");
    }
    PathBatch b = detail::make_batch(market, spec, SimKind::gbm, false);
    b.gbm_sigma = model.sigma;
    b.custom_trend = model.trend.has_value();
    b.trend = model.trend.value_or(0.0);
    const std::size_t stride = b.n_steps + 1;
    // Per-step deterministic drift, exact for the piecewise-constant rate.
    std::vector<double> drift(b.n_steps);
    for (std::size_t k = 0; k < b.n_steps; ++k) {
        const double dt = b.times[k + 1] - b.times[k];
        drift[k] = model.trend ? *model.trend * dt
                               : market.rates.integral(b.times[k], b.times[k + 1]);
        drift[k] -= 0.5 * model.sigma * model.sigma * dt;
    }
    parallel_for(b.n_paths, spec.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CounterRng rng = detail::path_rng(spec.seed, i, spec.antithetic);
            const double sign = detail::path_sign(i, spec.antithetic);
            double ln_x = std::log(market.x0);
            b.prices[i * stride] = market.x0;
            for (std::size_t k = 0; k < b.n_steps; ++k) {
                const double dt = b.times[k + 1] - b.times[k];
                const double dw = sign * rng.gaussian() * std::sqrt(dt);
                ln_x += drift[k] + model.sigma * dw;
                b.prices[i * stride + k + 1] = std::exp(ln_x);
                if (!b.increments.empty()) b.increments[i * b.n_steps + k] = dw;
            }
        }
    });
    return b;
}

inline PathBatch simulate_paths(const MarketState& market, const LocalVolModel& model,
                                const SimSpec& spec) {
    detail::check_sim_spec(market, spec);
    PathBatch b = detail::make_batch(market, spec, SimKind::local_vol, false);
    const std::size_t stride = b.n_steps + 1;
    std::vector<double> rate_int(b.n_steps);
    for (std::size_t k = 0; k < b.n_steps; ++k) {
        rate_int[k] = market.rates.integral(b.times[k], b.times[k + 1]);
    }
    parallel_for(b.n_paths, spec.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CounterRng rng = detail::path_rng(spec.seed, i, spec.antithetic);
            const double sign = detail::path_sign(i, spec.antithetic);
            double x = market.x0;
            double ln_x = std::log(market.x0);
            b.prices[i * stride] = x;
            for (std::size_t k = 0; k < b.n_steps; ++k) {
                const double dt = b.times[k + 1] - b.times[k];
                const double s = model.vol.value(b.times[k], x);
                const double dw = sign * rng.gaussian() * std::sqrt(dt);
                ln_x += rate_int[k] - 0.5 * s * s * dt + s * dw;
                x = std::exp(ln_x);
                b.prices[i * stride + k + 1] = x;
                if (!b.increments.empty()) b.increments[i * b.n_steps + k] = dw;
            }
        }
    });
    return b;
}

inline PathBatch simulate_paths(const MarketState& market, const StochVolModel& model,
                                const SimSpec& spec) {
    detail::check_sim_spec(market, spec);
    if (!(std::abs(model.rho) <= 1.0)) {
        throw InvalidInput("simulate_paths: correlation must lie in [-1, 1]");
    }
    if (!model.sigma || !model.y_drift || !model.y_vol) {
        throw InvalidInput("simulate_paths: stoch-vol model needs sigma, y_drift and y_vol");
    }
    if (model.log_y && !(model.y0 > 0.0)) {
        throw InvalidInput("simulate_paths: log_y requires y0 > 0");
    }
    PathBatch b = detail::make_batch(market, spec, SimKind::stoch_vol, true);
    b.custom_trend = model.trend.has_value();
    b.trend = model.trend.value_or(0.0);
    const std::size_t stride = b.n_steps + 1;
    const double rho_bar = std::sqrt(1.0 - model.rho * model.rho);
    std::vector<double> rate_int(b.n_steps);
    for (std::size_t k = 0; k < b.n_steps; ++k) {
        rate_int[k] = market.rates.integral(b.times[k], b.times[k + 1]);
    }
    parallel_for(b.n_paths, spec.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CounterRng rng = detail::path_rng(spec.seed, i, spec.antithetic);
            const double sign = detail::path_sign(i, spec.antithetic);
            double x = market.x0;
            double ln_x = std::log(market.x0);
            double y = model.y0;
            b.prices[i * stride] = x;
            b.vol_state[i * stride] = y;
            for (std::size_t k = 0; k < b.n_steps; ++k) {
                const double t = b.times[k];
                const double dt = b.times[k + 1] - b.times[k];
                const double sdt = std::sqrt(dt);
                const double z1 = sign * rng.gaussian();
                const double z2 = sign * rng.gaussian();
                const double w1 = z1 * sdt;
                const double w2 = (model.rho * z1 + rho_bar * z2) * sdt;
                const double s = model.sigma(t, x, y);
                const double mu_dt = model.trend ? *model.trend * dt : rate_int[k];
                ln_x += mu_dt - 0.5 * s * s * dt + s * w1;
                const double a = model.y_drift(t, x, y);
                const double g = model.y_vol(t, x, y);
                if (model.log_y) {
                    const double gl = g / y;
                    y = y * std::exp((a / y - 0.5 * gl * gl) * dt + gl * w2);
                } else {
                    y += a * dt + g * w2;
                }
                x = std::exp(ln_x);
                b.prices[i * stride + k + 1] = x;
                b.vol_state[i * stride + k + 1] = y;
                if (!b.increments.empty()) b.increments[i * b.n_steps + k] = w1;
            }
        }
    });
    for (double v : b.prices) {
        if (!std::isfinite(v)) {
            throw NumericError("simulate_paths: non-finite price; step size too large "
                               "for the volatility dynamics");
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

struct McEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

namespace detail {

inline McEstimate finalize_estimate(const std::vector<double>& samples, std::size_t reported_n,
                                    double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidInput("confidence level must lie in (0, 1)");
    }
    const MeanEstimate m = mean_and_se(samples);
    const double z = norm_inv(0.5 + 0.5 * level);
    return {m.mean, m.se, reported_n, m.mean - z * m.se, m.mean + z * m.se};
}

// Collapse a per-path sample to per-pair means when the batch is antithetic.
inline std::vector<double> fold_pairs(const PathBatch& batch, std::vector<double> samples) {
    if (!batch.antithetic) return samples;
    std::vector<double> folded(samples.size() / 2);
    for (std::size_t p = 0; p < folded.size(); ++p) {
        folded[p] = 0.5 * (samples[2 * p] + samples[2 * p + 1]);
    }
    return folded;
}

}  // namespace detail

struct McPriceOptions {
    bool control_variate = false;
    double level = 0.95;
};

// Discounted-payoff estimator. Antithetic batches are folded into pair means
// before the standard error is formed; the control variate is the discounted
// terminal price, whose expectation is known in closed form.
inline McEstimate mc_price(const MarketState& market, const PathBatch& batch,
                           const Payoff& payoff, const McPriceOptions& options = {}) {
    payoff.validate();
    if (batch.n_paths < 2) throw InvalidInput("mc_price: need at least two paths");
    const double disc = market.rates.discount(batch.t0(), batch.maturity());
    std::vector<double> values(batch.n_paths);
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
        values[i] = disc * payoff.evaluate(batch.terminal(i));
    }
    values = detail::fold_pairs(batch, std::move(values));
    if (options.control_variate) {
        double control_mean;
        if (batch.custom_trend) {
            if (batch.kind != SimKind::gbm) {
                throw UnsupportedConfig(
                    "mc_price: control variate needs a known terminal mean; custom trends "
                    "are only handled for the lognormal model");
            }
            control_mean = disc * batch.x0 * std::exp(batch.trend * batch.horizon());
        } else {
            // Short-rate drift makes the discounted price a martingale.
            control_mean = batch.x0;
        }
        std::vector<double> control(batch.n_paths);
        for (std::size_t i = 0; i < batch.n_paths; ++i) {
            control[i] = disc * batch.terminal(i);
        }
        control = detail::fold_pairs(batch, std::move(control));
        double mc = 0.0;
        double mv = 0.0;
        for (double c : control) mc += c;
        mc /= static_cast<double>(control.size());
        double cov = 0.0;
        double mvv = 0.0;
        for (double v : values) mvv += v;
        mvv /= static_cast<double>(values.size());
        for (std::size_t i = 0; i < control.size(); ++i) {
            cov += (values[i] - mvv) * (control[i] - mc);
            mv += (control[i] - mc) * (control[i] - mc);
        }
        const double beta = mv > 1e-300 ? cov / mv : 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            values[i] -= beta * (control[i] - control_mean);
        }
    }
    return detail::finalize_estimate(values, batch.n_paths, options.level);
}

enum class DeltaMethod { pathwise, likelihood_ratio };

// Spot sensitivity from a lognormal batch. Pathwise differentiates the
// payoff along each path; the likelihood-ratio form weights the payoff by
// the score of the terminal density and needs no payoff smoothness.
inline McEstimate mc_delta(const MarketState& market, const PathBatch& batch,
                           const Payoff& payoff, DeltaMethod method, double level = 0.95) {
    payoff.validate();
    if (batch.kind != SimKind::gbm) {
        throw UnsupportedConfig("mc_delta: estimator weights are derived for the lognormal "
                                "model; use mc_delta_fd for other dynamics");
    }
    if (batch.n_paths < 2) throw InvalidInput("mc_delta: need at least two paths");
    const double horizon = batch.horizon();
    const double disc = market.rates.discount(batch.t0(), batch.maturity());
    std::vector<double> samples(batch.n_paths);
    if (method == DeltaMethod::pathwise) {
        if (payoff.max_abs_slope() > 1e6) {
            throw UnsupportedConfig("mc_delta: payoff has near-vertical segments; the "
                                    "pathwise estimator breaks down on digital-like payoffs");
        }
        for (std::size_t i = 0; i < batch.n_paths; ++i) {
            const double xt = batch.terminal(i);
            samples[i] = disc * payoff.slope_at(xt) * xt / batch.x0;
        }
    } else {
        const double sigma = batch.gbm_sigma;
        if (!(sigma > 0.0)) {
            throw InvalidInput("mc_delta: likelihood-ratio weight needs sigma > 0");
        }
        const double total_drift =
            batch.custom_trend ? batch.trend * horizon
                               : market.rates.integral(batch.t0(), batch.maturity());
        for (std::size_t i = 0; i < batch.n_paths; ++i) {
            const double xt = batch.terminal(i);
            const double wt =
                (std::log(xt / batch.x0) - total_drift + 0.5 * sigma * sigma * horizon) / sigma;
            samples[i] = disc * payoff.evaluate(xt) * wt / (batch.x0 * sigma * horizon);
        }
    }
    samples = detail::fold_pairs(batch, std::move(samples));
    return detail::finalize_estimate(samples, batch.n_paths, level);
}

// Central finite difference with common random numbers, for dynamics without
// a closed-form estimator weight. Re-simulates twice from bumped spots.
template <class Model>
McEstimate mc_delta_fd(const MarketState& market, const Model& model, const Payoff& payoff,
                       const SimSpec& spec, double rel_bump = 1e-2, double level = 0.95) {
    payoff.validate();
    if (!(rel_bump > 0.0) || !std::isfinite(rel_bump)) {
        throw InvalidInput("mc_delta_fd: bump must be positive");
    }
    const double h = rel_bump * market.x0;
    const MarketState up(market.t0, market.x0 + h, market.rates);
    const MarketState dn(market.t0, market.x0 - h, market.rates);
    const PathBatch bu = simulate_paths(up, model, spec);
    const PathBatch bd = simulate_paths(dn, model, spec);
    const double disc = market.rates.discount(market.t0, spec.maturity);
    std::vector<double> samples(bu.n_paths);
    for (std::size_t i = 0; i < bu.n_paths; ++i) {
        samples[i] =
            disc * (payoff.evaluate(bu.terminal(i)) - payoff.evaluate(bd.terminal(i))) / (2.0 * h);
    }
    samples = detail::fold_pairs(bu, std::move(samples));
    return detail::finalize_estimate(samples, bu.n_paths, level);
}

// ---------------------------------------------------------------------------
// Discrete delta hedging
// ---------------------------------------------------------------------------

struct HedgeResult {
    std::vector<double> errors;  // replication error per path at maturity
    double mean = 0.0;
    double stddev = 0.0;
    double se = 0.0;
};

// Sells the payoff at its model price and delta-hedges at `rebalances`
// equally spaced dates along each path of a lognormal batch generated with
// the same volatility. The error is portfolio value minus payoff at
// maturity; its spread shrinks like one over the square root of the
// rebalance count.
inline HedgeResult simulate_delta_hedge(const MarketState& market, double sigma,
                                        const Payoff& payoff, std::size_t rebalances,
                                        const PathBatch& batch) {
    payoff.validate();
    if (batch.kind != SimKind::gbm) {
        throw InvalidInput("simulate_delta_hedge: hedging model is lognormal; batch is not");
    }
    if (std::abs(batch.gbm_sigma - sigma) > 1e-12) {
        throw InvalidInput("simulate_delta_hedge: batch volatility differs from hedge model");
    }
    if (rebalances < 1 || batch.n_steps % rebalances != 0) {
        throw InvalidInput("simulate_delta_hedge: rebalances must divide the batch step count");
    }
    const std::size_t stride = batch.n_steps / rebalances;
    const double maturity = batch.maturity();

    // Remaining-horizon pricing inputs at each rebalance date. Only the
    // discount to maturity matters, so a piecewise rate folds into an
    // equivalent flat rate per date.
    std::vector<double> eff_rate(rebalances);
    std::vector<double> accrual(rebalances);
    std::vector<double> horizon(rebalances);
    for (std::size_t k = 0; k < rebalances; ++k) {
        const double t_k = batch.times[k * stride];
        const double t_next = batch.times[(k + 1) * stride];
        horizon[k] = maturity - t_k;
        eff_rate[k] = market.rates.integral(t_k, maturity) / horizon[k];
        accrual[k] = std::exp(market.rates.integral(t_k, t_next));
    }

    HedgeResult out;
    out.errors.resize(batch.n_paths);
    for (std::size_t i = 0; i < batch.n_paths; ++i) {
        double value = bs_pwl_price(batch.x0, payoff, horizon[0], sigma, eff_rate[0]);
        for (std::size_t k = 0; k < rebalances; ++k) {
            const double x_here = batch.price(i, k * stride);
            const double x_next = batch.price(i, (k + 1) * stride);
            const double delta =
                bs_pwl_delta(x_here, payoff, horizon[k], sigma, eff_rate[k]);
            value = delta * x_next + (value - delta * x_here) * accrual[k];
        }
        out.errors[i] = value - payoff.evaluate(batch.terminal(i));
    }
    const MeanEstimate m = mean_and_se(out.errors);
    out.mean = m.mean;
    out.se = m.se;
    out.stddev = m.se * std::sqrt(static_cast<double>(batch.n_paths));
    return out;
}

// ---------------------------------------------------------------------------
// Backward equations by regression
// ---------------------------------------------------------------------------

using BsdeDriver = std::function<double(double t, double y, double z)>;

struct BsdeSolution {
    double y0 = 0.0;
    int degree = 0;
    std::vector<std::string> warnings;
};

// Backward recursion Y_k = E_k[Y_{k+1}] + dt f(t_k, Y_k, Z_k) with
// Z_k = E_k[Y_{k+1} dW_k / dt], both conditional expectations fitted by
// polynomial regression in standardized log price. The implicit Y appears
// through one Picard refinement. At the first step every path shares the
// spot, so the regression degenerates to the cross-path average.
inline BsdeSolution solve_bsde(const MarketState& market, const PathBatch& batch,
                               const Payoff& terminal, const BsdeDriver& driver,
                               int degree = 3) {
    terminal.validate();
    if (degree < 0) throw InvalidInput("solve_bsde: degree must be >= 0");
    if (batch.n_paths < static_cast<std::size_t>(degree) + 2) {
        throw InvalidInput("solve_bsde: need more paths than basis functions");
    }
    if (!driver) throw InvalidInput("solve_bsde: driver must be callable");
    const std::size_t n = batch.n_paths;
    const std::size_t m = batch.n_steps;

    // Brownian increments: stored, or reconstructed exactly for lognormal
    // batches from the log returns.
    auto increment = [&](std::size_t i, std::size_t k) -> double {
        if (!batch.increments.empty()) return batch.increment(i, k);
        if (batch.kind != SimKind::gbm || !(batch.gbm_sigma > 0.0)) {
            throw InvalidInput("solve_bsde: batch lacks stored increments; simulate with "
                               "store_increments");
        }
        const double dt = batch.times[k + 1] - batch.times[k];
        const double drift = (batch.custom_trend
                                  ? batch.trend * dt
                                  : market.rates.integral(batch.times[k], batch.times[k + 1])) -
                             0.5 * batch.gbm_sigma * batch.gbm_sigma * dt;
        return (std::log(batch.price(i, k + 1) / batch.price(i, k)) - drift) / batch.gbm_sigma;
    };

    BsdeSolution out;
    out.degree = degree;
    bool warned_rank = false;

    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = terminal.evaluate(batch.terminal(i));

    std::vector<double> e_fit(n), z_fit(n);
    for (std::size_t k = m; k-- > 0;) {
        const double t_k = batch.times[k];
        const double dt = batch.times[k + 1] - batch.times[k];
        if (k == 0) {
            double ey = 0.0;
            double ez = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                ey += y[i];
                ez += y[i] * increment(i, 0) / dt;
            }
            ey /= static_cast<double>(n);
            ez /= static_cast<double>(n);
            const double y1 = ey + dt * driver(t_k, ey, ez);
            out.y0 = ey + dt * driver(t_k, y1, ez);
            return out;
        }
        // Standardized log-price basis 1, w, w^2, ..., w^degree.
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += std::log(batch.price(i, k));
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = std::log(batch.price(i, k)) - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        const int cols = sd > 1e-12 ? degree + 1 : 1;
        Eigen::MatrixXd basis(n, cols);
        Eigen::MatrixXd rhs(n, 2);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = cols == 1 ? 0.0 : (std::log(batch.price(i, k)) - mean) / sd;
            double p = 1.0;
            for (int c = 0; c < cols; ++c) {
                basis(static_cast<Eigen::Index>(i), c) = p;
                p *= w;
            }
            rhs(static_cast<Eigen::Index>(i), 0) = y[i];
            rhs(static_cast<Eigen::Index>(i), 1) = y[i] * increment(i, k) / dt;
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
        if (qr.rank() < cols && !warned_rank) {
            out.warnings.push_back("regression basis rank-deficient at one or more steps; "
                                   "effective degree reduced");
            warned_rank = true;
        }
        const Eigen::MatrixXd coef = qr.solve(rhs);
        const Eigen::MatrixXd fit = basis * coef;
        for (std::size_t i = 0; i < n; ++i) {
            e_fit[i] = fit(static_cast<Eigen::Index>(i), 0);
            z_fit[i] = fit(static_cast<Eigen::Index>(i), 1);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double y1 = e_fit[i] + dt * driver(t_k, e_fit[i], z_fit[i]);
            y[i] = e_fit[i] + dt * driver(t_k, y1, z_fit[i]);
        }
    }
    // m >= 1 guaranteed; the k == 0 branch returns.
    throw NumericError("solve_bsde: unreachable");
}

// Pointwise maximum of drivers: the value under the worst of several linear
// pricing rules, by the comparison property of the recursion.
inline BsdeDriver sup_driver(std::vector<BsdeDriver> drivers) {
    if (drivers.empty()) throw InvalidInput("sup_driver: need at least one driver");
    return [ds = std::move(drivers)](double t, double y, double z) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& f : ds) best = std::max(best, f(t, y, z));
        return best;
    };
}

inline BsdeSolution solve_bsde_sup(const MarketState& market, const PathBatch& batch,
                                   const Payoff& terminal, std::vector<BsdeDriver> drivers,
                                   int degree = 3) {
    return solve_bsde(market, batch, terminal, sup_driver(std::move(drivers)), degree);
}

}  // namespace voltcraft
