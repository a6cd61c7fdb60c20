#pragma once

// Finite-difference engine on a log-price grid. One theta-scheme step kernel
// serves the backward pricing equation, the forward equation in (maturity,
// strike), the worst-case volatility-band solver and the penalty solver built
// on top of it. Backward solves with constant volatility and rate switch to
// a drift-removed compact scheme that is fourth order in space. The first
// step after a payoff kink is damped by fully-implicit substeps (Rannacher
// startup) to keep trapezoidal stepping from ringing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"
#include "voltcraft/price_surface.hpp"
#include "voltcraft/vol_surface.hpp"

namespace voltcraft {

struct PdeGrid {
    int time_steps = 200;
    int space_nodes = 201;
    double theta = 0.5;  // 0 explicit, 0.5 trapezoidal, 1 fully implicit
    // Optional explicit log-price bounds. When NaN the domain spans
    // domain_stddevs integrated-volatility standard deviations each side of
    // the spot. Bounds are shifted by at most half a cell so the spot log
    // price lands exactly on a node.
    double y_min = std::numeric_limits<double>::quiet_NaN();
    double y_max = std::numeric_limits<double>::quiet_NaN();
    double domain_stddevs = 6.0;
    // Fully-implicit substeps replacing the first theta step when theta < 1.
    int rannacher_substeps = 2;

    void validate() const {
        if (time_steps < 1) throw InvalidInput("PdeGrid: time_steps must be >= 1");
        if (space_nodes < 3) throw InvalidInput("PdeGrid: space_nodes must be >= 3");
        if (!(theta >= 0.0 && theta <= 1.0)) {
            throw InvalidInput("PdeGrid: theta must lie in [0, 1]");
        }
        if (!(domain_stddevs > 0.0)) {
            throw InvalidInput("PdeGrid: domain_stddevs must be positive");
        }
        if (rannacher_substeps < 0) {
            throw InvalidInput("PdeGrid: rannacher_substeps must be >= 0");
        }
        const bool has_min = std::isfinite(y_min);
        const bool has_max = std::isfinite(y_max);
        if (has_min != has_max) {
            throw InvalidInput("PdeGrid: set both y_min and y_max or neither");
        }
        if (has_min && !(y_min < y_max)) {
            throw InvalidInput("PdeGrid: y_min must be below y_max");
        }
    }
};

namespace detail {

struct LogGrid {
    std::vector<double> y;
    std::vector<double> x;
    double dy = 0.0;
    double inv_2dy = 0.0;
    double inv_dy2 = 0.0;
    std::size_t spot_index = 0;
};

inline std::pair<double, double> grid_bounds(double y0, const PdeGrid& grid,
                                             double auto_half_width) {
    if (std::isfinite(grid.y_min)) {
        if (!(grid.y_min < y0 && y0 < grid.y_max)) {
            throw InvalidInput("PdeGrid: explicit bounds must straddle the spot log price");
        }
        return {grid.y_min, grid.y_max};
    }
    const double w = std::max(auto_half_width, 1e-3);
    return {y0 - w, y0 + w};
}

// Uniform log grid with the spot snapped onto a node. The stencil factors
// are grid-wide scalars, which keeps the operator rows identical across
// nodes wherever the coefficients are; spatially constant modes then evolve
// by one scalar recursion with no node-to-node rounding spread.
inline LogGrid build_log_grid(double y0, const PdeGrid& grid, double auto_half_width) {
    auto [lo, hi] = grid_bounds(y0, grid, auto_half_width);
    LogGrid out;
    const std::size_t n = static_cast<std::size_t>(grid.space_nodes);
    const double dy = (hi - lo) / static_cast<double>(n - 1);
    std::size_t j0 = static_cast<std::size_t>(std::llround((y0 - lo) / dy));
    j0 = std::clamp<std::size_t>(j0, 1, n - 2);
    lo += y0 - (lo + static_cast<double>(j0) * dy);
    out.y.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.y[j] = lo + static_cast<double>(j) * dy;
    out.y[j0] = y0;
    out.spot_index = j0;
    out.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.x[j] = std::exp(out.y[j]);
    out.dy = dy;
    out.inv_2dy = 0.5 / dy;
    out.inv_dy2 = 1.0 / (dy * dy);
    return out;
}

// Exact average of a piecewise-linear payoff over a log-price cell
// [y_lo, y_hi]. On any stretch free of breakpoints the payoff is a + b x,
// and the integral in y is a (y_hi - y_lo) + b (x_hi - x_lo), so the cell
// splits at the breakpoints it contains and each piece is closed form.
inline double payoff_cell_average(const Payoff& payoff, double y_lo, double y_hi) {
    const double x_hi = std::exp(y_hi);
    double u = std::exp(y_lo);
    double acc = 0.0;
    while (u < x_hi) {
        const auto it = std::upper_bound(payoff.xs.begin(), payoff.xs.end(), u);
        const double v = it == payoff.xs.end() ? x_hi : std::min(*it, x_hi);
        const double pu = payoff.evaluate(u);
        const double pv = payoff.evaluate(v);
        const double b = (pv - pu) / (v - u);
        acc += (pu - b * u) * std::log(v / u) + b * (v - u);
        u = v;
    }
    return acc / (y_hi - y_lo);
}

// Terminal data for a theta scheme on a log-price grid. Interior nodes take
// cell averages instead of point samples: a kink sampled at an arbitrary
// offset inside its cell leaves an O(dy^2) error whose constant scales with
// that offset, and averaging removes the offset dependence. Boundary nodes
// stay pointwise; they are overwritten by the boundary data anyway.
inline std::vector<double> terminal_values(const Payoff& payoff, const LogGrid& g) {
    const std::size_t nn = g.y.size();
    std::vector<double> f(nn);
    f.front() = payoff.evaluate(g.x.front());
    f.back() = payoff.evaluate(g.x.back());
    for (std::size_t j = 1; j + 1 < nn; ++j) {
        f[j] = payoff_cell_average(payoff, 0.5 * (g.y[j - 1] + g.y[j]),
                                   0.5 * (g.y[j] + g.y[j + 1]));
    }
    return f;
}

// Log positions of the genuine kinks of a piecewise-linear payoff, skipping
// breakpoints where the slope happens to be continuous.
inline std::vector<double> kink_logs(const Payoff& payoff) {
    std::vector<double> out;
    const double slope_tol = 1e-12 * (1.0 + payoff.max_abs_slope());
    for (std::size_t i = 1; i < payoff.xs.size(); ++i) {
        if (std::abs(payoff.segment_slope(i) - payoff.segment_slope(i - 1)) <= slope_tol) {
            continue;
        }
        if (payoff.xs[i] > 0.0) out.push_back(std::log(payoff.xs[i]));
    }
    return out;
}

// Mollifies the transformed terminal data w(y) = e^{-alpha (y - y0)} h(e^y)
// around the payoff kinks with the kernel rho(z) = (105/64)(1-z^2)^2(1-3z^2)
// on [-1, 1], width delta. The kernel's first three moments vanish, so smooth
// content is reproduced to O(delta^4) while a kink becomes a C^1 transition
// the grid can resolve. Point samples of a kink cap any scheme at second
// order no matter the stencil; this projection is what lets the compact
// fourth-order step below keep its rate on option payoffs.
inline void smooth_terminal_kinks(const Payoff& payoff, const LogGrid& g, double alpha,
                                  double y0, std::vector<double>& w) {
    const std::vector<double> kinks = kink_logs(payoff);
    if (kinks.empty()) return;
    const double delta = 3.0 * g.dy;
    const auto w_payoff = [&](double z) {
        return std::exp(-alpha * (z - y0)) * payoff.evaluate(std::exp(z));
    };
    for (std::size_t j = 1; j + 1 < g.y.size(); ++j) {
        double nearest = delta + 1.0;
        for (double yk : kinks) nearest = std::min(nearest, std::abs(g.y[j] - yk));
        if (nearest > delta) continue;
        const double z_lo = g.y[j] - delta;
        const double z_hi = g.y[j] + delta;
        const auto rho = [&](double z) {
            const double u = (g.y[j] - z) / delta;
            const double q = 1.0 - u * u;
            return q > 0.0 ? (105.0 / 64.0) * q * q * (1.0 - 3.0 * u * u) / delta : 0.0;
        };
        // Integrate by Simpson on segments split at the payoff breakpoints,
        // so each segment's integrand is polynomial times exponential.
        std::vector<double> cuts{z_lo};
        for (double xk : payoff.xs) {
            if (xk > 0.0) {
                const double zk = std::log(xk);
                if (zk > z_lo && zk < z_hi) cuts.push_back(zk);
            }
        }
        cuts.push_back(z_hi);
        std::sort(cuts.begin(), cuts.end());
        double acc = 0.0;
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double a = cuts[s];
            const double b = cuts[s + 1];
            if (!(b > a)) continue;
            const int panels = 64;
            const double h = (b - a) / panels;
            double sum = rho(a) * w_payoff(a) + rho(b) * w_payoff(b);
            for (int i = 1; i < panels; ++i) {
                const double z = a + h * static_cast<double>(i);
                sum += (i % 2 ? 4.0 : 2.0) * rho(z) * w_payoff(z);
            }
            acc += sum * h / 3.0;
        }
        w[j] = acc;
    }
}

// Per-node operator data for L f = nu f_yy + b f_y + c f + src.
struct Coefs {
    std::vector<double> nu;
    std::vector<double> b;
    std::vector<double> c;
    std::vector<double> src;  // empty means zero

    void resize(std::size_t n) {
        nu.assign(n, 0.0);
        b.assign(n, 0.0);
        c.assign(n, 0.0);
    }
};

struct ThetaWorkspace {
    std::vector<double> lower, diag, upper, rhs;
};

// One theta step of f_t + L f = 0 between adjacent time levels separated by
// dt > 0, with Dirichlet boundary values for the new level. cold holds the
// operator at the known level, cnew at the level being solved for:
//   (I - theta dt L_new) f_new = (I + (1-theta) dt L_old) f_old + dt src.
inline void theta_step(double dt, double theta, const LogGrid& grid, const Coefs& cold,
                       const Coefs& cnew, const std::vector<double>& f_old, double bc_lo,
                       double bc_hi, std::vector<double>& f_new, ThetaWorkspace& ws) {
    const std::size_t nn = f_old.size();
    const std::size_t n = nn - 2;
    ws.lower.resize(n);
    ws.diag.resize(n);
    ws.upper.resize(n);
    ws.rhs.resize(n);
    const double w_exp = (1.0 - theta) * dt;
    const double w_imp = theta * dt;
    const double i1 = grid.inv_2dy;
    const double i2 = grid.inv_dy2;
    for (std::size_t j = 1; j + 1 < nn; ++j) {
        const std::size_t i = j - 1;
        double g = f_old[j];
        if (w_exp != 0.0) {
            const double a_o = cold.nu[j] * i2 - cold.b[j] * i1;
            const double b_o = -2.0 * cold.nu[j] * i2 + cold.c[j];
            const double c_o = cold.nu[j] * i2 + cold.b[j] * i1;
            g += w_exp * (a_o * f_old[j - 1] + b_o * f_old[j] + c_o * f_old[j + 1]);
        }
        if (!cnew.src.empty()) {
            g += dt * (theta * cnew.src[j] + (1.0 - theta) * cold.src[j]);
        }
        const double a_n = cnew.nu[j] * i2 - cnew.b[j] * i1;
        const double b_n = -2.0 * cnew.nu[j] * i2 + cnew.c[j];
        const double c_n = cnew.nu[j] * i2 + cnew.b[j] * i1;
        ws.lower[i] = -w_imp * a_n;
        ws.diag[i] = 1.0 - w_imp * b_n;
        ws.upper[i] = -w_imp * c_n;
        ws.rhs[i] = g;
        if (j == 1) ws.rhs[i] += w_imp * a_n * bc_lo;
        if (j + 2 == nn) ws.rhs[i] += w_imp * c_n * bc_hi;
    }
    solve_tridiagonal(ws.lower, ws.diag, ws.upper, ws.rhs);
    f_new.resize(nn);
    f_new[0] = bc_lo;
    f_new[nn - 1] = bc_hi;
    for (std::size_t i = 0; i < n; ++i) f_new[i + 1] = ws.rhs[i];
}

// One theta step of w_t + nu w_yy + c w = 0 on a uniform grid under the
// compact Numerov discretization: both sides carry the tridiagonal mass
// [1/12, 10/12, 1/12], which cancels the leading dy^2 truncation of the
// second difference and makes the spatial error O(dy^4) at the same
// tridiagonal cost:
//   (M - theta dt A) w_new = (M + (1-theta) dt A) w_old,  A = nu D2 + c M.
inline void numerov_step(double dt, double theta, double nu, double c, double dy,
                         const std::vector<double>& w_old, double bc_lo, double bc_hi,
                         std::vector<double>& w_new, ThetaWorkspace& ws) {
    const std::size_t nn = w_old.size();
    const std::size_t n = nn - 2;
    ws.lower.resize(n);
    ws.diag.resize(n);
    ws.upper.resize(n);
    ws.rhs.resize(n);
    const double d = nu / (dy * dy);
    const double mm = 1.0 / 12.0;
    const double mc = 10.0 / 12.0;
    const double off_imp = mm - theta * dt * (d + c * mm);
    const double ctr_imp = mc - theta * dt * (-2.0 * d + c * mc);
    const double off_exp = mm + (1.0 - theta) * dt * (d + c * mm);
    const double ctr_exp = mc + (1.0 - theta) * dt * (-2.0 * d + c * mc);
    for (std::size_t j = 1; j + 1 < nn; ++j) {
        const std::size_t i = j - 1;
        ws.lower[i] = off_imp;
        ws.diag[i] = ctr_imp;
        ws.upper[i] = off_imp;
        ws.rhs[i] = off_exp * w_old[j - 1] + ctr_exp * w_old[j] + off_exp * w_old[j + 1];
        if (j == 1) ws.rhs[i] -= off_imp * bc_lo;
        if (j + 2 == nn) ws.rhs[i] -= off_imp * bc_hi;
    }
    solve_tridiagonal(ws.lower, ws.diag, ws.upper, ws.rhs);
    w_new.resize(nn);
    w_new[0] = bc_lo;
    w_new[nn - 1] = bc_hi;
    for (std::size_t i = 0; i < n; ++i) w_new[i + 1] = ws.rhs[i];
}

inline void check_row_finite(const std::vector<double>& f, const char* where) {
    for (double v : f) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + ": non-finite value in the grid; "
                               "refine the grid or tighten the domain");
        }
    }
}

// Substep schedule for one nominal step [t_lo, t_hi]: either a single theta
// step or the damped fully-implicit startup.
struct StepPlan {
    int substeps = 1;
    double theta = 0.5;
};

inline StepPlan plan_step(bool first, const PdeGrid& grid) {
    if (first && grid.theta < 1.0 && grid.rannacher_substeps > 0) {
        return {grid.rannacher_substeps, 1.0};
    }
    return {1, grid.theta};
}

}  // namespace detail

// Dense solution of a backward or worst-case pricing solve: all time levels
// on the log-price grid, earliest time first.
struct PdeSolution {
    std::vector<double> times;
    std::vector<double> log_prices;
    std::vector<double> prices;
    std::vector<double> values;  // times.size() x prices.size(), row-major
    std::size_t spot_index = 0;
    std::vector<std::string> warnings;
    int nonlinear_iterations = 0;

    double value(std::size_t m, std::size_t j) const { return values[m * prices.size() + j]; }

    double price() const { return value(0, spot_index); }

    // Central-difference hedge ratio at the spot node, earliest time level.
    double delta() const {
        const std::size_t j = spot_index;
        return (value(0, j + 1) - value(0, j - 1)) / (prices[j + 1] - prices[j - 1]);
    }

    // Bilinear interpolation in (t, ln x), clamped to the grid.
    double value_at(double t, double x) const {
        if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(t)) {
            throw InvalidInput("PdeSolution::value_at: need finite t and x > 0");
        }
        const double u = std::log(x);
        const auto locate = [](const std::vector<double>& g, double v) {
            if (v <= g.front()) return std::make_pair<std::size_t, double>(0, 0.0);
            if (v >= g.back()) return std::make_pair(g.size() - 2, 1.0);
            const auto it = std::upper_bound(g.begin(), g.end(), v);
            const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
            return std::make_pair(i, (v - g[i]) / (g[i + 1] - g[i]));
        };
        const auto [m, wt] = locate(times, t);
        const auto [j, wu] = locate(log_prices, u);
        const double lo = lerp_at(value(m, j), value(m, j + 1), wu);
        const double hi = lerp_at(value(m + 1, j), value(m + 1, j + 1), wu);
        return lerp_at(lo, hi, wt);
    }
};

// ---------------------------------------------------------------------------
// Backward pricing solve
// ---------------------------------------------------------------------------

namespace detail {

// Backward solve specialized to constant volatility and a constant short
// rate. The substitution w(y) = e^{-alpha (y - y0)} f(y) with
// alpha = -(r - nu)/(2 nu) and nu = sigma^2/2 removes the drift term
// exactly: w solves w_t + nu w_yy + c w = 0 with
// c = nu alpha^2 + (r - nu) alpha - r, constant coefficients throughout, so
// the Numerov step applies and the solve is fourth order in space instead
// of second. Same grid, same time schedule, same boundary treatment as the
// general path; the spot node carries e^0, so no transform error touches
// the price read.
inline PdeSolution numerov_backward(const MarketState& market, double sigma, double rate,
                                    const Payoff& payoff, double maturity, const PdeGrid& grid,
                                    const LogGrid& g) {
    const double y0 = std::log(market.x0);
    const double nu = 0.5 * sigma * sigma;
    const double alpha = -(rate - nu) / (2.0 * nu);
    const double c = nu * alpha * alpha + (rate - nu) * alpha - rate;
    const std::size_t nn = g.y.size();
    const std::size_t steps = static_cast<std::size_t>(grid.time_steps);
    const double dt_nominal = (maturity - market.t0) / static_cast<double>(steps);

    PdeSolution out;
    out.log_prices = g.y;
    out.prices = g.x;
    out.spot_index = g.spot_index;
    out.times.resize(steps + 1);
    for (std::size_t m = 0; m <= steps; ++m) {
        out.times[m] = market.t0 + static_cast<double>(m) * dt_nominal;
    }
    out.times.back() = maturity;
    out.values.assign((steps + 1) * nn, 0.0);

    const double s_lo = payoff.slope_at(g.x.front());
    const double a_lo = payoff.evaluate(g.x.front()) - s_lo * g.x.front();
    const double s_hi = payoff.slope_at(g.x.back());
    const double a_hi = payoff.evaluate(g.x.back()) - s_hi * g.x.back();

    std::vector<double> grow(nn);
    for (std::size_t j = 0; j < nn; ++j) grow[j] = std::exp(alpha * (g.y[j] - y0));

    std::vector<double> w(nn);
    for (std::size_t j = 0; j < nn; ++j) w[j] = payoff.evaluate(g.x[j]) / grow[j];
    detail::smooth_terminal_kinks(payoff, g, alpha, y0, w);
    const auto store = [&](std::size_t m) {
        double* row = out.values.data() + m * nn;
        for (std::size_t j = 0; j < nn; ++j) row[j] = w[j] * grow[j];
    };
    store(steps);

    detail::ThetaWorkspace ws;
    std::vector<double> w_next(nn);
    double max_ratio = 0.0;
    for (std::size_t m = steps; m-- > 0;) {
        const double t_hi = out.times[m + 1];
        const double t_lo = out.times[m];
        const detail::StepPlan plan = detail::plan_step(m + 1 == steps, grid);
        const double dt = (t_hi - t_lo) / static_cast<double>(plan.substeps);
        for (int s = 0; s < plan.substeps; ++s) {
            const double t_new = t_hi - dt * static_cast<double>(s + 1);
            const double disc = market.rates.discount(t_new, maturity);
            detail::numerov_step(dt, plan.theta, nu, c, g.dy, w,
                                 (a_lo * disc + s_lo * g.x.front()) / grow.front(),
                                 (a_hi * disc + s_hi * g.x.back()) / grow.back(), w_next, ws);
            w.swap(w_next);
        }
        detail::check_row_finite(w, "solve_backward_pricing");
        store(m);
        max_ratio = std::max(max_ratio, (1.0 - plan.theta) * dt * 2.0 * nu / (g.dy * g.dy));
    }
    if (max_ratio > 20.0) {
        out.warnings.push_back("time grid coarse relative to the space grid "
                               "(explicit-side ratio " + std::to_string(max_ratio) +
                               "); oscillations possible near payoff kinks");
    }
    return out;
}

}  // namespace detail

// Solves the pricing equation for a terminal payoff h at the given maturity:
// in log price y the equation is f_t + (sigma^2/2) f_yy + (r - sigma^2/2) f_y
// - r f = 0, terminal condition h(e^y). Dirichlet boundaries follow the
// discounted linear extension of the payoff. Constant-coefficient inputs are
// routed to the fourth-order compact scheme above; everything else takes the
// second-order theta scheme.
inline PdeSolution solve_backward_pricing(const MarketState& market, const LocalVolSurface& vol,
                                          const Payoff& payoff, double maturity,
                                          const PdeGrid& grid) {
    grid.validate();
    payoff.validate();
    if (!(maturity > market.t0)) {
        throw InvalidInput("solve_backward_pricing: maturity must exceed t0");
    }
    const double horizon = maturity - market.t0;
    const double y0 = std::log(market.x0);
    const double scale = vol.max_value() * std::sqrt(horizon);
    const detail::LogGrid g =
        detail::build_log_grid(y0, grid, grid.domain_stddevs * scale);

    const std::vector<double>& rs = market.rates.rates();
    if (vol.min_value() == vol.max_value() &&
        std::all_of(rs.begin(), rs.end(), [&](double r) { return r == rs.front(); })) {
        const double sigma = vol.max_value();
        const double nu = 0.5 * sigma * sigma;
        const double alpha = -(rs.front() - nu) / (2.0 * nu);
        const double reach = std::max(y0 - g.y.front(), g.y.back() - y0);
        // The transform scales the working variable by e^{alpha (y - y0)};
        // keep the dynamic range well inside double precision.
        if (std::abs(alpha) * reach < 30.0) {
            return detail::numerov_backward(market, sigma, rs.front(), payoff, maturity, grid, g);
        }
    }
    const std::size_t nn = g.y.size();
    const std::size_t steps = static_cast<std::size_t>(grid.time_steps);
    const double dt_nominal = horizon / static_cast<double>(steps);

    PdeSolution out;
    out.log_prices = g.y;
    out.prices = g.x;
    out.spot_index = g.spot_index;
    out.times.resize(steps + 1);
    for (std::size_t m = 0; m <= steps; ++m) {
        out.times[m] = market.t0 + static_cast<double>(m) * dt_nominal;
    }
    out.times.back() = maturity;
    out.values.assign((steps + 1) * nn, 0.0);

    // Linear payoff extensions used as boundary data: f(t, x_b) =
    // a D(t, T) + s x_b, with (a, s) read off the payoff at each boundary.
    const double s_lo = payoff.slope_at(g.x.front());
    const double a_lo = payoff.evaluate(g.x.front()) - s_lo * g.x.front();
    const double s_hi = payoff.slope_at(g.x.back());
    const double a_hi = payoff.evaluate(g.x.back()) - s_hi * g.x.back();

    std::vector<double> f = detail::terminal_values(payoff, g);
    std::copy(f.begin(), f.end(), out.values.begin() + static_cast<std::ptrdiff_t>(steps * nn));

    auto fill = [&](double t, detail::Coefs& c) {
        c.resize(nn);
        const double r = market.rates.rate(t);
        for (std::size_t j = 0; j < nn; ++j) {
            const double s = vol.value(t, g.x[j]);
            const double nu = 0.5 * s * s;
            c.nu[j] = nu;
            c.b[j] = r - nu;
            c.c[j] = -r;
        }
    };

    detail::Coefs cold;
    detail::Coefs cnew;
    detail::ThetaWorkspace ws;
    std::vector<double> f_next(nn);
    fill(maturity, cold);
    double max_ratio = 0.0;
    for (std::size_t m = steps; m-- > 0;) {
        const double t_hi = out.times[m + 1];
        const double t_lo = out.times[m];
        const detail::StepPlan plan = detail::plan_step(m + 1 == steps, grid);
        const double dt = (t_hi - t_lo) / static_cast<double>(plan.substeps);
        for (int s = 0; s < plan.substeps; ++s) {
            const double t_new = t_hi - dt * static_cast<double>(s + 1);
            fill(t_new, cnew);
            const double disc = market.rates.discount(t_new, maturity);
            detail::theta_step(dt, plan.theta, g, cold, cnew, f,
                               a_lo * disc + s_lo * g.x.front(),
                               a_hi * disc + s_hi * g.x.back(), f_next, ws);
            f.swap(f_next);
            std::swap(cold, cnew);
        }
        detail::check_row_finite(f, "solve_backward_pricing");
        std::copy(f.begin(), f.end(), out.values.begin() + static_cast<std::ptrdiff_t>(m * nn));
        double nu_max = 0.0;
        for (double nu : cold.nu) nu_max = std::max(nu_max, nu);
        max_ratio = std::max(max_ratio, (1.0 - plan.theta) * dt * 2.0 * nu_max / (g.dy * g.dy));
    }
    if (max_ratio > 20.0) {
        out.warnings.push_back("time grid coarse relative to the space grid "
                               "(explicit-side ratio " + std::to_string(max_ratio) +
                               "); oscillations possible near payoff kinks");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Forward solve in (maturity, strike)
// ---------------------------------------------------------------------------

// Grows the call-price surface forward in maturity: in log strike k the
// equation is C_T = (sigma^2/2)(C_kk - C_k) - r C_k with initial condition
// (x0 - K)^+. Returns one row per requested maturity.
inline PriceSurface solve_dupire_forward(const MarketState& market, const LocalVolSurface& vol,
                                         const std::vector<double>& maturities,
                                         const PdeGrid& grid) {
    grid.validate();
    if (maturities.empty()) {
        throw InvalidInput("solve_dupire_forward: need at least one maturity");
    }
    for (std::size_t i = 0; i < maturities.size(); ++i) {
        if (!(maturities[i] > market.t0) || (i > 0 && maturities[i] <= maturities[i - 1])) {
            throw InvalidInput(
                "solve_dupire_forward: maturities must be strictly increasing and > t0");
        }
    }
    const double total = maturities.back() - market.t0;
    const double y0 = std::log(market.x0);
    const detail::LogGrid g = detail::build_log_grid(
        y0, grid, grid.domain_stddevs * vol.max_value() * std::sqrt(total));
    const std::size_t nn = g.y.size();

    std::vector<double> f(nn);
    for (std::size_t j = 0; j < nn; ++j) f[j] = std::max(market.x0 - g.x[j], 0.0);

    auto fill = [&](double T, detail::Coefs& c) {
        c.resize(nn);
        const double r = market.rates.rate(T);
        for (std::size_t j = 0; j < nn; ++j) {
            const double s = vol.value(T, g.x[j]);
            const double nu = 0.5 * s * s;
            c.nu[j] = nu;
            c.b[j] = -(nu + r);
            c.c[j] = 0.0;
        }
    };

    std::vector<double> rows;
    rows.reserve(maturities.size() * nn);
    detail::Coefs cold;
    detail::Coefs cnew;
    detail::ThetaWorkspace ws;
    std::vector<double> f_next(nn);
    fill(market.t0, cold);
    bool first_step = true;
    double t_cur = market.t0;
    for (double target : maturities) {
        const double seg = target - t_cur;
        const int seg_steps = std::max<int>(
            1, static_cast<int>(std::llround(static_cast<double>(grid.time_steps) * seg / total)));
        const double dt_seg = seg / seg_steps;
        for (int m = 0; m < seg_steps; ++m) {
            const double t_hi = (m + 1 == seg_steps) ? target : t_cur + dt_seg * (m + 1);
            const double t_lo = t_cur + dt_seg * m;
            const detail::StepPlan plan = detail::plan_step(first_step, grid);
            first_step = false;
            const double dt = (t_hi - t_lo) / static_cast<double>(plan.substeps);
            for (int s = 0; s < plan.substeps; ++s) {
                const double t_new = t_lo + dt * static_cast<double>(s + 1);
                fill(t_new, cnew);
                const double bc_lo = market.x0 - g.x.front() * market.rates.discount(market.t0, t_new);
                detail::theta_step(dt, plan.theta, g, cold, cnew, f, bc_lo, 0.0, f_next, ws);
                f.swap(f_next);
                std::swap(cold, cnew);
            }
        }
        detail::check_row_finite(f, "solve_dupire_forward");
        rows.insert(rows.end(), f.begin(), f.end());
        t_cur = target;
    }
    return PriceSurface(market, maturities, g.x, std::move(rows));
}

// ---------------------------------------------------------------------------
// State-price density
// ---------------------------------------------------------------------------

// Discrete pricing kernel at one maturity: the strike-convexity density
// q(K) = C_KK read off the forward solve, reported with midpoint-cell
// quadrature weights. Total mass approximates the discount factor.
struct PricingKernel {
    std::vector<double> prices;   // interior strike nodes
    std::vector<double> density;  // q at those nodes
    std::vector<double> weights;  // quadrature cell widths
    double discount = 1.0;
    double mass = 0.0;
    double mean = 0.0;
    std::vector<std::string> warnings;

    // Integral of h against the kernel.
    template <class F>
    double expectation(F&& h) const {
        double acc = 0.0;
        for (std::size_t j = 0; j < prices.size(); ++j) {
            acc += weights[j] * density[j] * h(prices[j]);
        }
        return acc;
    }
};

inline PricingKernel pricing_kernel(const MarketState& market, const LocalVolSurface& vol,
                                    double maturity, const PdeGrid& grid) {
    const PriceSurface surf = solve_dupire_forward(market, vol, {maturity}, grid);
    const std::vector<double>& K = surf.strikes();
    const std::size_t nn = K.size();
    const double dk = std::log(K[1]) - std::log(K[0]);
    PricingKernel out;
    out.discount = market.discount_to(maturity);
    out.prices.reserve(nn - 2);
    out.density.reserve(nn - 2);
    out.weights.reserve(nn - 2);
    double neg = 0.0;
    for (std::size_t j = 1; j + 1 < nn; ++j) {
        const double c_m = surf.value(0, j - 1);
        const double c_0 = surf.value(0, j);
        const double c_p = surf.value(0, j + 1);
        const double c_kk = (c_p - 2.0 * c_0 + c_m) / (dk * dk);
        const double c_k = (c_p - c_m) / (2.0 * dk);
        const double q = (c_kk - c_k) / (K[j] * K[j]);
        const double w = 0.5 * (K[j + 1] - K[j - 1]);
        out.prices.push_back(K[j]);
        out.density.push_back(q);
        out.weights.push_back(w);
        out.mass += w * q;
        out.mean += w * q * K[j];
        if (q < 0.0) neg += w * q;
    }
    out.mean = out.mass != 0.0 ? out.mean / out.mass : 0.0;
    if (neg < -1e-6) {
        out.warnings.push_back("negative density mass " + std::to_string(neg) +
                               " beyond tolerance; surface may be too coarse");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Worst/best-case pricing over a volatility band
// ---------------------------------------------------------------------------

enum class BandSide { upper, lower };

// Solves the band-extremal pricing equation: at each node the volatility is
// the band edge that extremizes the generator, decided by the sign of the
// discrete x^2 f_xx (= f_yy - f_y in log price). Each step freezes the
// choice, solves, re-chooses, and repeats until the choice is stable.
inline PdeSolution solve_bsb(const MarketState& market, const VolBand& band, const Payoff& payoff,
                             double maturity, const PdeGrid& grid,
                             BandSide side = BandSide::upper) {
    grid.validate();
    payoff.validate();
    if (!(maturity > market.t0)) {
        throw InvalidInput("solve_bsb: maturity must exceed t0");
    }
    const double horizon = maturity - market.t0;
    const double y0 = std::log(market.x0);
    const double scale = band.max_hi() * std::sqrt(horizon);
    const detail::LogGrid g =
        detail::build_log_grid(y0, grid, grid.domain_stddevs * scale);
    const std::size_t nn = g.y.size();
    const std::size_t steps = static_cast<std::size_t>(grid.time_steps);
    const double dt_nominal = horizon / static_cast<double>(steps);

    PdeSolution out;
    out.log_prices = g.y;
    out.prices = g.x;
    out.spot_index = g.spot_index;
    out.times.resize(steps + 1);
    for (std::size_t m = 0; m <= steps; ++m) {
        out.times[m] = market.t0 + static_cast<double>(m) * dt_nominal;
    }
    out.times.back() = maturity;
    out.values.assign((steps + 1) * nn, 0.0);

    const double s_lo = payoff.slope_at(g.x.front());
    const double a_lo = payoff.evaluate(g.x.front()) - s_lo * g.x.front();
    const double s_hi = payoff.slope_at(g.x.back());
    const double a_hi = payoff.evaluate(g.x.back()) - s_hi * g.x.back();

    std::vector<double> f = detail::terminal_values(payoff, g);
    std::copy(f.begin(), f.end(), out.values.begin() + static_cast<std::ptrdiff_t>(steps * nn));

    // Band edge per node given the curvature sign of a reference row.
    auto choose = [&](const std::vector<double>& ref, double t, std::vector<double>& sig) {
        sig.resize(nn);
        for (std::size_t j = 0; j < nn; ++j) {
            double curv = 0.0;
            if (j > 0 && j + 1 < nn) {
                curv = (ref[j - 1] - 2.0 * ref[j] + ref[j + 1]) * g.inv_dy2 -
                       (ref[j + 1] - ref[j - 1]) * g.inv_2dy;
            }
            const bool up = side == BandSide::upper ? curv >= 0.0 : curv < 0.0;
            sig[j] = up ? band.hi_at(t, g.x[j]) : band.lo_at(t, g.x[j]);
        }
    };

    auto fill = [&](double t, const std::vector<double>& sig, detail::Coefs& c) {
        c.resize(nn);
        const double r = market.rates.rate(t);
        for (std::size_t j = 0; j < nn; ++j) {
            const double nu = 0.5 * sig[j] * sig[j];
            c.nu[j] = nu;
            c.b[j] = r - nu;
            c.c[j] = -r;
        }
    };

    detail::Coefs cold;
    detail::Coefs cnew;
    detail::ThetaWorkspace ws;
    std::vector<double> f_next(nn);
    std::vector<double> sig(nn);
    std::vector<double> sig_prev(nn);
    choose(f, maturity, sig);
    fill(maturity, sig, cold);
    constexpr int kMaxFreeze = 20;
    for (std::size_t m = steps; m-- > 0;) {
        const double t_hi = out.times[m + 1];
        const double t_lo = out.times[m];
        const detail::StepPlan plan = detail::plan_step(m + 1 == steps, grid);
        const double dt = (t_hi - t_lo) / static_cast<double>(plan.substeps);
        for (int s = 0; s < plan.substeps; ++s) {
            const double t_new = t_hi - dt * static_cast<double>(s + 1);
            const double disc = market.rates.discount(t_new, maturity);
            const double bc_lo = a_lo * disc + s_lo * g.x.front();
            const double bc_hi = a_hi * disc + s_hi * g.x.back();
            choose(f, t_new, sig);
            int it = 0;
            double prev_center = std::numeric_limits<double>::quiet_NaN();
            for (;; ++it) {
                if (it >= kMaxFreeze) {
                    throw NumericError(
                        "solve_bsb: frozen-coefficient iteration did not settle in " +
                        std::to_string(kMaxFreeze) +
                        " rounds; refine the grid or use theta = 1");
                }
                fill(t_new, sig, cnew);
                detail::theta_step(dt, plan.theta, g, cold, cnew, f, bc_lo, bc_hi, f_next, ws);
                sig_prev.swap(sig);
                choose(f_next, t_new, sig);
                if (sig == sig_prev) break;
                // A two-cycle with a numerically identical centre value is
                // accepted as converged rather than flagged.
                const double center = f_next[g.spot_index];
                if (!std::isnan(prev_center) &&
                    std::abs(center - prev_center) < 1e-13 * std::max(1.0, std::abs(center))) {
                    break;
                }
                prev_center = center;
            }
            out.nonlinear_iterations = std::max(out.nonlinear_iterations, it + 1);
            f.swap(f_next);
            std::swap(cold, cnew);
        }
        detail::check_row_finite(f, "solve_bsb");
        std::copy(f.begin(), f.end(), out.values.begin() + static_cast<std::ptrdiff_t>(m * nn));
    }
    return out;
}

}  // namespace voltcraft
