#pragma once

// Closed-form lognormal pricing: calls, puts, piecewise-linear payoffs via
// their call decomposition, greeks, and implied volatility inversion.

#include <algorithm>
#include <cmath>
#include <string>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"

namespace voltcraft {

namespace detail {

inline void check_bs_args(double spot, double strike, double horizon, double sigma) {
    if (!(spot > 0.0) || !std::isfinite(spot)) {
        throw InvalidInput("black-scholes: spot must be positive");
    }
    if (!(strike > 0.0) || !std::isfinite(strike)) {
        throw InvalidInput("black-scholes: strike must be positive");
    }
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
        throw InvalidInput("black-scholes: horizon must be >= 0");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
        throw InvalidInput("black-scholes: volatility must be >= 0");
    }
}

}  // namespace detail

// Call price for constant volatility and rate over a horizon of length
// `horizon`. Degenerate cases (zero vol or zero horizon) return discounted
// intrinsic value.
inline double bs_call_price(double spot, double strike, double horizon, double sigma, double rate) {
    detail::check_bs_args(spot, strike, horizon, sigma);
    const double disc = std::exp(-rate * horizon);
    const double s = sigma * std::sqrt(horizon);
    if (s == 0.0) {
        return std::max(spot - strike * disc, 0.0);
    }
    const double d1 = std::log(spot / (strike * disc)) / s + 0.5 * s;
    const double d0 = d1 - s;
    return spot * norm_cdf(d1) - strike * disc * norm_cdf(d0);
}

// Put price from parity: P = C - x + K e^{-r h}. May round to a value a few
// ulp below zero deep out of the money; the identity with the call is exact.
inline double bs_put_price(double spot, double strike, double horizon, double sigma, double rate) {
    return bs_call_price(spot, strike, horizon, sigma, rate) - spot +
           strike * std::exp(-rate * horizon);
}

// Call delta N(d1). At zero vol or horizon this degenerates to a step at the
// discounted strike.
inline double bs_call_delta(double spot, double strike, double horizon, double sigma, double rate) {
    detail::check_bs_args(spot, strike, horizon, sigma);
    const double disc = std::exp(-rate * horizon);
    const double s = sigma * std::sqrt(horizon);
    if (s == 0.0) {
        return spot >= strike * disc ? 1.0 : 0.0;
    }
    const double d1 = std::log(spot / (strike * disc)) / s + 0.5 * s;
    return norm_cdf(d1);
}

inline double bs_vega(double spot, double strike, double horizon, double sigma, double rate) {
    detail::check_bs_args(spot, strike, horizon, sigma);
    const double s = sigma * std::sqrt(horizon);
    if (s == 0.0) return 0.0;
    const double disc = std::exp(-rate * horizon);
    const double d1 = std::log(spot / (strike * disc)) / s + 0.5 * s;
    return spot * std::sqrt(horizon) * norm_pdf(d1);
}

// Price of a piecewise-linear payoff under the lognormal model, through its
// decomposition into cash, forward and calls.
inline double bs_pwl_price(double spot, const Payoff& payoff, double horizon, double sigma,
                           double rate) {
    const CallDecomposition dec = decompose_into_calls(payoff);
    const double disc = std::exp(-rate * horizon);
    double value = dec.cash * disc + dec.forward_units * spot;
    for (const auto& kink : dec.kinks) {
        value += kink.size * bs_call_price(spot, kink.strike, horizon, sigma, rate);
    }
    return value;
}

inline double bs_pwl_delta(double spot, const Payoff& payoff, double horizon, double sigma,
                           double rate) {
    const CallDecomposition dec = decompose_into_calls(payoff);
    double delta = dec.forward_units;
    for (const auto& kink : dec.kinks) {
        delta += kink.size * bs_call_delta(spot, kink.strike, horizon, sigma, rate);
    }
    return delta;
}

// Implied volatility of a quote against the market state. Put quotes are
// converted to calls by parity first. Safeguarded Newton (vega step inside a
// maintained bracket, bisection otherwise) on sigma in [1e-6, 5]. Runs until
// the bracket collapses to 1e-11 so low-vega wings still resolve sigma, not
// just the price.
inline double implied_volatility(const MarketState& market, const OptionQuote& quote) {
    if (!(quote.maturity > market.t0)) {
        throw InvalidInput("implied_volatility: maturity must exceed t0");
    }
    if (!(quote.strike > 0.0) || !std::isfinite(quote.strike)) {
        throw InvalidInput("implied_volatility: strike must be positive");
    }
    if (!std::isfinite(quote.price)) {
        throw InvalidInput("implied_volatility: non-finite price");
    }
    const double horizon = quote.maturity - market.t0;
    const double disc = market.discount_to(quote.maturity);
    const double rate = -std::log(disc) / horizon;
    const double call_target =
        quote.kind == QuoteKind::call ? quote.price
                                      : quote.price + market.x0 - quote.strike * disc;
    const double lower = std::max(market.x0 - quote.strike * disc, 0.0);
    if (!(call_target > lower) || !(call_target < market.x0)) {
        throw NoSolution(
            "implied_volatility: price " + std::to_string(quote.price) +
            " sits at or beyond its arbitrage bounds; no volatility reproduces it");
    }

    double lo = 1e-6;
    double hi = 5.0;
    auto objective = [&](double sigma) {
        return bs_call_price(market.x0, quote.strike, horizon, sigma, rate) - call_target;
    };
    const double f_lo = objective(lo);
    const double f_hi = objective(hi);
    if (f_lo > 0.0 || f_hi < 0.0) {
        throw NumericError("implied_volatility: no root in the bracket [1e-6, 5]");
    }
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;

    double sigma = std::clamp(std::sqrt(2.0 * kPi / horizon) * call_target / market.x0, lo, hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = objective(sigma);
        if (f == 0.0) return sigma;
        if (f > 0.0) {
            hi = sigma;
        } else {
            lo = sigma;
        }
        if (hi - lo <= 1e-11) return 0.5 * (lo + hi);
        const double vega = bs_vega(market.x0, quote.strike, horizon, sigma, rate);
        double next = sigma - f / vega;
        if (!(vega > 1e-14) || !(next > lo) || !(next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - sigma) <= 1e-12 * (1.0 + sigma)) return next;
        sigma = next;
    }
    throw NumericError("implied_volatility: did not converge; last bracket [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace voltcraft
