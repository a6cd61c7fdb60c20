#pragma once

// Super-replication bounds without a pinned-down model: the no-trading
// concave-envelope bound with its static hedge, and the sharpest bound over
// all martingale measures on a finite support that reprice quoted calls,
// solved as a linear program with a static-hedge dual.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/simplex.hpp"

namespace voltcraft {

namespace detail {

inline void require_zero_rates(const MarketState& market, const char* who) {
    for (double r : market.rates.rates()) {
        if (r != 0.0) {
            throw UnsupportedConfig(std::string(who) +
                                    ": static bounds assume zero interest rates");
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Concave envelope
// ---------------------------------------------------------------------------

struct EnvelopeResult {
    Payoff envelope;       // smallest concave majorant of the payoff on [0, inf)
    double value = 0.0;    // envelope at the spot
    double delta = 0.0;    // supergradient at the spot; midpoint at a kink
    double cash = 0.0;     // value - delta * spot
};

// Smallest concave function dominating the payoff on [0, inf). Holding
// delta stocks plus cash super-replicates the payoff with no trading at all,
// which is only a valid bound when rates are zero.
inline EnvelopeResult concave_envelope(const MarketState& market, const Payoff& payoff) {
    payoff.validate();
    detail::require_zero_rates(market, "concave_envelope");

    // Graph points including the origin extension.
    std::vector<std::pair<double, double>> pts;
    if (payoff.xs.front() > 0.0) pts.emplace_back(0.0, payoff.evaluate(0.0));
    for (std::size_t i = 0; i < payoff.xs.size(); ++i) {
        pts.emplace_back(payoff.xs[i], payoff.values[i]);
    }

    // Upper hull: slopes must be non-increasing left to right.
    std::vector<std::pair<double, double>> hull;
    auto slope = [](const std::pair<double, double>& a, const std::pair<double, double>& b) {
        return (b.second - a.second) / (b.first - a.first);
    };
    for (const auto& p : pts) {
        // Collinear middle points drop out along with convex kinks.
        while (hull.size() >= 2 &&
               slope(hull[hull.size() - 2], hull.back()) <= slope(hull.back(), p)) {
            hull.pop_back();
        }
        hull.push_back(p);
    }
    // The payoff continues past the last breakpoint with its terminal slope;
    // hull segments flatter than that ray sit below it and drop out.
    const double s_tail = payoff.terminal_slope;
    while (hull.size() >= 2 && slope(hull[hull.size() - 2], hull.back()) <= s_tail) {
        hull.pop_back();
    }

    std::vector<double> xs;
    std::vector<double> vs;
    xs.reserve(hull.size());
    vs.reserve(hull.size());
    for (const auto& p : hull) {
        xs.push_back(p.first);
        vs.push_back(p.second);
    }
    EnvelopeResult out{Payoff::from_points(std::move(xs), std::move(vs), s_tail), 0.0, 0.0, 0.0};
    out.value = out.envelope.evaluate(market.x0);

    // Supergradient at the spot: segment slope inside a segment, midpoint of
    // the adjacent slopes exactly at a kink.
    const Payoff& env = out.envelope;
    double delta = env.slope_at(market.x0);
    for (std::size_t i = 0; i < env.xs.size(); ++i) {
        if (env.xs[i] == market.x0) {
            const double left =
                i == 0 ? env.slope_at(market.x0) : env.segment_slope(i - 1);
            const double right = env.segment_slope(i);
            delta = 0.5 * (left + right);
            break;
        }
    }
    out.delta = delta;
    out.cash = out.value - out.delta * market.x0;
    return out;
}

// ---------------------------------------------------------------------------
// Constrained-measure bound
// ---------------------------------------------------------------------------

// One quoted call the measure must reprice.
struct CallConstraint {
    double strike = 0.0;
    double price = 0.0;
};

struct MartingaleLpResult {
    double value = 0.0;                    // sharpest upper bound
    std::vector<double> support;           // atom locations
    std::vector<double> weights;           // extremal measure, same order
    double cash = 0.0;                     // dual static hedge
    double forward_units = 0.0;
    std::vector<std::pair<double, double>> call_positions;  // (strike, size)
    double duality_gap = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
};

// Maximizes E_Q[target(X)] over probability measures Q on the given support
// with mean x0 (the martingale constraint at one horizon) that reproduce
// each quoted call price to within calibration_slack. The LP dual is the
// cheapest static hedge in cash, forward and the quoted calls that dominates
// the target on every atom.
inline MartingaleLpResult superrep_lp(const MarketState& market, const Payoff& target,
                                      const std::vector<CallConstraint>& constraints,
                                      const std::vector<double>& support,
                                      double calibration_slack = -1.0) {
    target.validate();
    detail::require_zero_rates(market, "superrep_lp");
    if (support.size() < 2) {
        throw InvalidInput("superrep_lp: need at least two support atoms");
    }
    for (std::size_t i = 0; i < support.size(); ++i) {
        if (!(support[i] >= 0.0) || !std::isfinite(support[i]) ||
            (i > 0 && support[i] <= support[i - 1])) {
            throw InvalidInput("superrep_lp: support must be nonnegative, strictly increasing");
        }
    }
    if (!(support.front() <= market.x0 && market.x0 <= support.back())) {
        throw InvalidInput("superrep_lp: support must straddle the spot for the mean constraint");
    }
    for (const auto& c : constraints) {
        if (!(c.strike > 0.0) || !std::isfinite(c.strike) || !std::isfinite(c.price) ||
            c.price < 0.0) {
            throw InvalidInput("superrep_lp: constraints need positive strikes, prices >= 0");
        }
    }
    const double slack =
        calibration_slack < 0.0 ? 1e-6 * market.x0 : calibration_slack;

    const std::size_t n = support.size();
    LpProblem lp;
    lp.objective.resize(n);
    for (std::size_t j = 0; j < n; ++j) lp.objective[j] = target.evaluate(support[j]);

    auto push_row = [&](LpRelation rel, double rhs, auto&& coef) {
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = coef(support[j]);
        lp.rows.push_back(std::move(row));
        lp.relations.push_back(rel);
        lp.rhs.push_back(rhs);
    };
    push_row(LpRelation::eq, 1.0, [](double) { return 1.0; });
    push_row(LpRelation::eq, market.x0, [](double x) { return x; });
    for (const auto& c : constraints) {
        auto payoff = [&](double x) { return std::max(x - c.strike, 0.0); };
        if (slack == 0.0) {
            push_row(LpRelation::eq, c.price, payoff);
        } else {
            push_row(LpRelation::le, c.price + slack, payoff);
            push_row(LpRelation::ge, c.price - slack, payoff);
        }
    }

    const LpSolution sol = solve_lp(lp);
    if (sol.status == LpStatus::infeasible) {
        throw InfeasibleConstraints(
            "superrep_lp: no measure on the support matches the quoted prices; "
            "the quotes embed an arbitrage or the support is too narrow");
    }
    if (sol.status == LpStatus::unbounded) {
        throw UnboundedProblem("superrep_lp: unbounded bound; support grid cannot happen "
                               "for a probability measure, check inputs");
    }

    MartingaleLpResult out;
    out.value = sol.value;
    out.support = support;
    out.weights = sol.x;
    out.cash = sol.dual[0];
    out.forward_units = sol.dual[1];
    std::size_t row = 2;
    for (const auto& c : constraints) {
        double w = 0.0;
        if (slack == 0.0) {
            w = sol.dual[row++];
        } else {
            w = sol.dual[row] + sol.dual[row + 1];
            row += 2;
        }
        out.call_positions.emplace_back(c.strike, w);
    }
    out.duality_gap = sol.duality_gap;
    out.primal_residual = sol.primal_residual;
    out.dual_residual = sol.dual_residual;
    out.iterations = sol.iterations;
    return out;
}

// Uniform support grid helper: count atoms from lo to hi inclusive, with the
// spot inserted if it is not already on the grid.
inline std::vector<double> uniform_support(double lo, double hi, std::size_t count, double x0) {
    if (!(lo >= 0.0) || !(hi > lo) || count < 2) {
        throw InvalidInput("uniform_support: need 0 <= lo < hi and count >= 2");
    }
    std::vector<double> out(count);
    const double h = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + h * static_cast<double>(i);
    if (x0 > lo && x0 < hi) {
        const auto it = std::lower_bound(out.begin(), out.end(), x0);
        if (it == out.end() || *it != x0) out.insert(it, x0);
    }
    return out;
}

}  // namespace voltcraft
