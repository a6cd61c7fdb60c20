#pragma once

// Volatility calibration: inversion of a call-price surface into local
// volatility, a forward-solver least-squares objective, smoothness-penalized
// fitting over a knot lattice, the penalty-functional value of a candidate
// surface, and the short-horizon implied-volatility asymptotic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/pde.hpp"
#include "voltcraft/price_surface.hpp"
#include "voltcraft/vol_surface.hpp"

namespace voltcraft {

// ---------------------------------------------------------------------------
// Local-volatility inversion
// ---------------------------------------------------------------------------

struct DupireInversion {
    LocalVolSurface vol;
    std::size_t invalid_nodes = 0;  // filled from the nearest valid neighbour
    std::size_t clipped_nodes = 0;  // clamped into the admissible vol band
    std::vector<std::string> warnings;
};

// Reads sigma^2(T, K) = 2 (C_T + r K C_K) / (K^2 C_KK) off a price surface,
// using centered differences on the (possibly non-uniform) lattice. Nodes
// where the convexity C_KK falls below convexity_floor, or where the
// quotient turns negative, are marked invalid and filled from the nearest
// valid neighbour. More than half invalid aborts the inversion.
inline DupireInversion dupire_local_vol(const PriceSurface& surface,
                                        double convexity_floor = 1e-10) {
    const std::vector<double>& T = surface.maturities();
    const std::vector<double>& K = surface.strikes();
    // Differentiation drops the boundary rows and columns, and the resulting
    // surface needs at least two interior nodes per axis.
    if (T.size() < 4 || K.size() < 4) {
        throw InvalidInput("dupire_local_vol: need at least a 4 x 4 price lattice");
    }
    const std::size_t nt = T.size() - 2;
    const std::size_t nk = K.size() - 2;
    std::vector<double> vols(nt * nk, 0.0);
    std::vector<std::uint8_t> valid(nt * nk, 0);
    std::size_t invalid = 0;
    std::size_t clipped = 0;
    for (std::size_t i = 1; i + 1 < T.size(); ++i) {
        const double r = surface.market().rates.rate(T[i]);
        for (std::size_t j = 1; j + 1 < K.size(); ++j) {
            const double ht_m = T[i] - T[i - 1];
            const double ht_p = T[i + 1] - T[i];
            const double hk_m = K[j] - K[j - 1];
            const double hk_p = K[j + 1] - K[j];
            const double c_T = fd_first(surface.value(i - 1, j), surface.value(i, j),
                                        surface.value(i + 1, j), ht_m, ht_p);
            const double c_K = fd_first(surface.value(i, j - 1), surface.value(i, j),
                                        surface.value(i, j + 1), hk_m, hk_p);
            const double c_KK = fd_second(surface.value(i, j - 1), surface.value(i, j),
                                          surface.value(i, j + 1), hk_m, hk_p);
            const std::size_t idx = (i - 1) * nk + (j - 1);
            if (!(c_KK > convexity_floor)) {
                ++invalid;
                continue;
            }
            const double sig2 = 2.0 * (c_T + r * K[j] * c_K) / (K[j] * K[j] * c_KK);
            if (!(sig2 > 0.0) || !std::isfinite(sig2)) {
                ++invalid;
                continue;
            }
            double sig = std::sqrt(sig2);
            if (sig < kVolFloor || sig > kVolCap) {
                sig = std::clamp(sig, kVolFloor, kVolCap);
                ++clipped;
            }
            vols[idx] = sig;
            valid[idx] = 1;
        }
    }
    if (2 * invalid > nt * nk) {
        throw IllPosedInput("dupire_local_vol: " + std::to_string(invalid) + " of " +
                            std::to_string(nt * nk) +
                            " nodes lack usable strike convexity; surface is not invertible");
    }
    if (invalid == nt * nk) {
        throw IllPosedInput("dupire_local_vol: no valid nodes");
    }
    // Fill invalid nodes from the nearest valid one (Manhattan distance,
    // lowest row/column index breaking ties).
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j < nk; ++j) {
            if (valid[i * nk + j]) continue;
            std::size_t best = 0;
            std::size_t best_dist = std::numeric_limits<std::size_t>::max();
            for (std::size_t a = 0; a < nt; ++a) {
                for (std::size_t b = 0; b < nk; ++b) {
                    if (!valid[a * nk + b]) continue;
                    const std::size_t dist = (a > i ? a - i : i - a) + (b > j ? b - j : j - b);
                    if (dist < best_dist) {
                        best_dist = dist;
                        best = a * nk + b;
                    }
                }
            }
            vols[i * nk + j] = vols[best];
        }
    }
    DupireInversion out{
        LocalVolSurface(std::vector<double>(T.begin() + 1, T.end() - 1),
                        std::vector<double>(K.begin() + 1, K.end() - 1), std::move(vols)),
        invalid, clipped, {}};
    if (invalid > 0) {
        out.warnings.push_back(std::to_string(invalid) +
                               " nodes filled from neighbours (insufficient convexity)");
    }
    if (clipped > 0) {
        out.warnings.push_back(std::to_string(clipped) + " nodes clamped into the vol band");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calibration objective
// ---------------------------------------------------------------------------

struct QuoteResidual {
    double maturity = 0.0;
    double strike = 0.0;
    QuoteKind kind = QuoteKind::call;
    double market_price = 0.0;
    double model_price = 0.0;
    double weight = 1.0;
};

// Model prices for every quote from a single forward solve across all quoted
// maturities. The strike domain is widened to cover the quotes.
inline std::vector<QuoteResidual> model_quote_prices(const MarketState& market,
                                                     const QuoteSurface& quotes,
                                                     const LocalVolSurface& vol,
                                                     const PdeGrid& grid) {
    if (quotes.maturities.empty()) return {};
    PdeGrid run = grid;
    if (!std::isfinite(run.y_min)) {
        const double y0 = std::log(market.x0);
        const double horizon = quotes.maturities.back() - market.t0;
        const double w = std::max(grid.domain_stddevs * vol.max_value() * std::sqrt(horizon), 1e-3);
        double k_lo = y0 - w;
        double k_hi = y0 + w;
        for (const auto& row : quotes.rows) {
            for (const auto& q : row) {
                k_lo = std::min(k_lo, std::log(q.strike) - 0.05);
                k_hi = std::max(k_hi, std::log(q.strike) + 0.05);
            }
        }
        run.y_min = k_lo;
        run.y_max = k_hi;
    }
    const PriceSurface surf = solve_dupire_forward(market, vol, quotes.maturities, run);
    std::vector<QuoteResidual> out;
    out.reserve(quotes.size());
    for (std::size_t i = 0; i < quotes.rows.size(); ++i) {
        const double disc = market.discount_to(quotes.maturities[i]);
        for (const auto& q : quotes.rows[i]) {
            const double call_model = surf.row_value(i, q.strike);
            const double model = q.kind == QuoteKind::call
                                     ? call_model
                                     : call_model - market.x0 + q.strike * disc;
            out.push_back({q.maturity, q.strike, q.kind, q.price, model, q.weight});
        }
    }
    return out;
}

// Weighted squared pricing error sum_q w_q (model_q - market_q)^2.
inline double objective_g(const MarketState& market, const QuoteSurface& quotes,
                          const LocalVolSurface& vol, const PdeGrid& grid) {
    double acc = 0.0;
    for (const auto& r : model_quote_prices(market, quotes, vol, grid)) {
        const double d = r.model_price - r.market_price;
        acc += r.weight * d * d;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Smoothness-penalized calibration
// ---------------------------------------------------------------------------

struct CalibrationProblem {
    MarketState market;
    QuoteSurface quotes;
    std::vector<double> knot_times;
    std::vector<double> knot_prices;
    double alpha = 1e-4;
    std::optional<LocalVolSurface> initial;  // defaults to flat 0.2
    double sigma_lo = 0.01;
    double sigma_hi = 2.0;
    int max_iterations = 500;
    double rel_decrease_tol = 1e-8;
    double fd_step_rel = 1e-4;
    PdeGrid grid;
    int threads = 1;
};

struct CalibrationReport {
    LocalVolSurface fitted;
    std::vector<double> objective_history;  // J at the start and each accepted step
    double data_misfit = 0.0;               // G at the fitted surface
    double penalty = 0.0;                   // smoothness seminorm at the fitted surface
    std::vector<QuoteResidual> residuals;
    bool converged = false;
    int iterations = 0;
};

namespace detail {

// Squared forward-difference ratios over the knot lattice, in (t, ln x):
// the discrete first-order smoothness seminorm of the candidate surface.
inline double smoothness_seminorm(const std::vector<double>& theta,
                                  const std::vector<double>& kt,
                                  const std::vector<double>& ku) {
    const std::size_t nt = kt.size();
    const std::size_t nx = ku.size();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < nt; ++i) {
        const double dt = kt[i + 1] - kt[i];
        for (std::size_t j = 0; j < nx; ++j) {
            const double d = (theta[(i + 1) * nx + j] - theta[i * nx + j]) / dt;
            acc += d * d;
        }
    }
    for (std::size_t i = 0; i < nt; ++i) {
        for (std::size_t j = 0; j + 1 < nx; ++j) {
            const double du = ku[j + 1] - ku[j];
            const double d = (theta[i * nx + j + 1] - theta[i * nx + j]) / du;
            acc += d * d;
        }
    }
    return acc;
}

}  // namespace detail

// Penalized least-squares fit of a local-vol surface over a knot lattice:
// minimize alpha * smoothness + objective_g by projected BFGS with Armijo
// backtracking. Gradients are centered finite differences per knot.
inline CalibrationReport calibrate_tikhonov(const CalibrationProblem& problem) {
    const std::vector<double>& kt = problem.knot_times;
    const std::vector<double>& kp = problem.knot_prices;
    if (kt.size() < 2 || kp.size() < 2) {
        throw InvalidInput("calibrate_tikhonov: knot lattice must be at least 2 x 2");
    }
    if (!(problem.alpha >= 0.0) || !std::isfinite(problem.alpha)) {
        throw InvalidInput("calibrate_tikhonov: alpha must be finite and >= 0");
    }
    if (!(problem.sigma_lo >= kVolFloor && problem.sigma_lo < problem.sigma_hi &&
          problem.sigma_hi <= kVolCap)) {
        throw InvalidInput("calibrate_tikhonov: invalid sigma box");
    }
    const std::size_t nt = kt.size();
    const std::size_t nx = kp.size();
    const std::size_t dim = nt * nx;
    std::vector<double> ku(nx);
    for (std::size_t j = 0; j < nx; ++j) ku[j] = std::log(kp[j]);

    std::vector<double> theta(dim, 0.2);
    if (problem.initial) {
        for (std::size_t i = 0; i < nt; ++i) {
            for (std::size_t j = 0; j < nx; ++j) {
                theta[i * nx + j] = problem.initial->value(kt[i], kp[j]);
            }
        }
    }
    auto project = [&](std::vector<double>& v) {
        for (double& x : v) x = std::clamp(x, problem.sigma_lo, problem.sigma_hi);
    };
    project(theta);

    auto make_surface = [&](const std::vector<double>& v) {
        return LocalVolSurface(kt, kp, v);
    };
    auto evaluate = [&](const std::vector<double>& v) {
        double value = problem.alpha * detail::smoothness_seminorm(v, kt, ku);
        if (problem.quotes.size() > 0) {
            value += objective_g(problem.market, problem.quotes, make_surface(v), problem.grid);
        }
        return value;
    };

    CalibrationReport report{make_surface(theta), {}, 0.0, 0.0, {}, false, 0};
    double current = evaluate(theta);
    report.objective_history.push_back(current);

    if (problem.quotes.size() == 0) {
        // Nothing to fit: the prior is already optimal for the data term.
        report.converged = true;
        report.penalty = detail::smoothness_seminorm(theta, kt, ku);
        return report;
    }

    auto gradient = [&](const std::vector<double>& v) {
        std::vector<double> g(dim, 0.0);
        parallel_for(dim, problem.threads, [&](std::size_t begin, std::size_t end) {
            std::vector<double> probe = v;
            for (std::size_t k = begin; k < end; ++k) {
                const double h = problem.fd_step_rel * std::max(std::abs(v[k]), 1e-2);
                const double keep = v[k];
                probe = v;
                probe[k] = keep + h;
                const double up = evaluate(probe);
                probe[k] = keep - h;
                const double dn = evaluate(probe);
                g[k] = (up - dn) / (2.0 * h);
            }
        });
        return g;
    };

    // Dense inverse-Hessian BFGS with projection onto the sigma box.
    std::vector<double> hess(dim * dim, 0.0);
    auto reset_hessian = [&] {
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < dim; ++i) hess[i * dim + i] = 1.0;
    };
    reset_hessian();
    std::vector<double> grad = gradient(theta);

    const double c1 = 1e-4;
    for (int it = 0; it < problem.max_iterations; ++it) {
        std::vector<double> dir(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < dim; ++j) acc -= hess[i * dim + j] * grad[j];
            dir[i] = acc;
        }
        double slope = 0.0;
        for (std::size_t i = 0; i < dim; ++i) slope += dir[i] * grad[i];
        if (!(slope < 0.0)) {
            reset_hessian();
            for (std::size_t i = 0; i < dim; ++i) dir[i] = -grad[i];
        }

        double step = 1.0;
        std::vector<double> trial(dim);
        double trial_value = current;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            for (std::size_t i = 0; i < dim; ++i) trial[i] = theta[i] + step * dir[i];
            project(trial);
            double decrease_ref = 0.0;
            for (std::size_t i = 0; i < dim; ++i) decrease_ref += grad[i] * (trial[i] - theta[i]);
            trial_value = evaluate(trial);
            if (trial_value <= current + c1 * decrease_ref && trial_value < current) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            report.converged = true;
            break;
        }

        std::vector<double> grad_next = gradient(trial);
        std::vector<double> s(dim), yv(dim);
        double sy = 0.0, ss = 0.0, yy = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            s[i] = trial[i] - theta[i];
            yv[i] = grad_next[i] - grad[i];
            sy += s[i] * yv[i];
            ss += s[i] * s[i];
            yy += yv[i] * yv[i];
        }
        if (sy > 1e-12 * std::sqrt(ss * yy)) {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            const double rho = 1.0 / sy;
            std::vector<double> hy(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < dim; ++j) acc += hess[i * dim + j] * yv[j];
                hy[i] = acc;
            }
            double yhy = 0.0;
            for (std::size_t i = 0; i < dim; ++i) yhy += yv[i] * hy[i];
            for (std::size_t i = 0; i < dim; ++i) {
                for (std::size_t j = 0; j < dim; ++j) {
                    hess[i * dim + j] += rho * rho * yhy * s[i] * s[j] + rho * s[i] * s[j] -
                                         rho * (s[i] * hy[j] + hy[i] * s[j]);
                }
            }
        } else {
            reset_hessian();
        }

        const double previous = current;
        theta = trial;
        grad = std::move(grad_next);
        current = trial_value;
        report.objective_history.push_back(current);
        report.iterations = it + 1;
        if (previous - current <= problem.rel_decrease_tol * std::max(std::abs(previous), 1e-30)) {
            report.converged = true;
            break;
        }
    }

    report.fitted = make_surface(theta);
    report.penalty = detail::smoothness_seminorm(theta, kt, ku);
    report.residuals =
        model_quote_prices(problem.market, problem.quotes, report.fitted, problem.grid);
    report.data_misfit = 0.0;
    for (const auto& r : report.residuals) {
        const double d = r.model_price - r.market_price;
        report.data_misfit += r.weight * d * d;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Penalty-functional value of a candidate surface
// ---------------------------------------------------------------------------

// Value U(t0, x0) of the linear penalty equation
//   U_t + (sigma^2/2) x^2 U_xx + r x U_x - U + eta = 0,   U(T, .) = 0,
// with eta(t, x) = penalty(sigma(t,x) - sigma0(t,x)), quadratic by default.
// The zero-order term applies a unit discount rate regardless of r. Boundary
// rows follow the no-diffusion ordinary equation u' = u - eta, which is exact
// whenever eta is constant in space.
inline double avellaneda_penalty_value(
    const MarketState& market, const LocalVolSurface& sigma, const LocalVolSurface& sigma0,
    double maturity, const PdeGrid& grid,
    const std::function<double(double)>& penalty = [](double d) { return d * d; }) {
    grid.validate();
    if (!(maturity > market.t0)) {
        throw InvalidInput("avellaneda_penalty_value: maturity must exceed t0");
    }
    const double horizon = maturity - market.t0;
    const double y0 = std::log(market.x0);
    const detail::LogGrid g = detail::build_log_grid(
        y0, grid, grid.domain_stddevs * sigma.max_value() * std::sqrt(horizon));
    const std::size_t nn = g.y.size();
    const std::size_t steps = static_cast<std::size_t>(grid.time_steps);
    const double dt_nominal = horizon / static_cast<double>(steps);

    auto eta = [&](double t, double x) {
        return penalty(sigma.value(t, x) - sigma0.value(t, x));
    };
    auto fill = [&](double t, detail::Coefs& c) {
        c.resize(nn);
        c.src.resize(nn);
        const double r = market.rates.rate(t);
        for (std::size_t j = 0; j < nn; ++j) {
            const double s = sigma.value(t, g.x[j]);
            const double nu = 0.5 * s * s;
            c.nu[j] = nu;
            c.b[j] = r - nu;
            c.c[j] = -1.0;
            c.src[j] = eta(t, g.x[j]);
        }
    };

    std::vector<double> f(nn, 0.0);
    detail::Coefs cold;
    detail::Coefs cnew;
    detail::ThetaWorkspace ws;
    std::vector<double> f_next(nn);
    fill(maturity, cold);
    double bc_lo = 0.0;
    double bc_hi = 0.0;
    for (std::size_t m = steps; m-- > 0;) {
        const double t_hi = market.t0 + dt_nominal * static_cast<double>(m + 1);
        const double t_lo = market.t0 + dt_nominal * static_cast<double>(m);
        const detail::StepPlan plan = detail::plan_step(m + 1 == steps, grid);
        const double dt = (t_hi - t_lo) / static_cast<double>(plan.substeps);
        for (int s = 0; s < plan.substeps; ++s) {
            const double t_old = t_hi - dt * static_cast<double>(s);
            const double t_new = t_old - dt;
            fill(t_new, cnew);
            // Boundary ordinary equation, same theta discretization.
            const double th = plan.theta;
            bc_lo = (bc_lo * (1.0 - (1.0 - th) * dt) +
                     dt * (th * cnew.src.front() + (1.0 - th) * cold.src.front())) /
                    (1.0 + th * dt);
            bc_hi = (bc_hi * (1.0 - (1.0 - th) * dt) +
                     dt * (th * cnew.src.back() + (1.0 - th) * cold.src.back())) /
                    (1.0 + th * dt);
            detail::theta_step(dt, th, g, cold, cnew, f, bc_lo, bc_hi, f_next, ws);
            f.swap(f_next);
            std::swap(cold, cnew);
        }
        detail::check_row_finite(f, "avellaneda_penalty_value");
    }
    return f[g.spot_index];
}

// ---------------------------------------------------------------------------
// Short-horizon implied-volatility asymptotic
// ---------------------------------------------------------------------------

// Leading-order implied volatility as the horizon shrinks to zero: the
// harmonic mean of the local volatility at t0 along log-moneyness,
//   1 / sigma_imp(K) = (1 / ln(K/x0)) * integral_{x0}^{K} dxi / (xi sigma(xi, t0)).
// At K = x0 the limit is sigma(x0, t0).
inline double implied_vol_small_time(const MarketState& market, const LocalVolSurface& vol,
                                     double strike, double rel_tol = 1e-8) {
    if (!(strike > 0.0) || !std::isfinite(strike)) {
        throw InvalidInput("implied_vol_small_time: strike must be positive");
    }
    const double u0 = std::log(market.x0);
    const double uk = std::log(strike);
    if (std::abs(uk - u0) < 1e-12) {
        return vol.value(market.t0, market.x0);
    }
    auto integrand = [&](double u) { return 1.0 / vol.value(market.t0, std::exp(u)); };
    // Split at surface knots: the integrand is smooth between them.
    std::vector<double> cuts{u0};
    const double lo = std::min(u0, uk);
    const double hi = std::max(u0, uk);
    for (double p : vol.prices()) {
        const double u = std::log(p);
        if (u > lo && u < hi) cuts.push_back(u);
    }
    cuts.push_back(uk);
    std::sort(cuts.begin(), cuts.end(),
              [&](double a, double b) { return u0 < uk ? a < b : a > b; });
    double integral = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        integral += adaptive_simpson(integrand, cuts[i], cuts[i + 1], rel_tol);
    }
    return (uk - u0) / integral;
}

}  // namespace voltcraft
