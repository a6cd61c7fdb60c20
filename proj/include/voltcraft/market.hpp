#pragma once

// Market primitives: deterministic short-rate curve, spot state, observed
// price paths with realized-volatility estimators, option quote surfaces and
// piecewise-linear payoffs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/math.hpp"

namespace voltcraft {

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

// Piecewise-constant deterministic short rate. rates[i] applies on
// [times[i], times[i+1]); the last rate extends to +infinity and the first
// backwards to -infinity.
class RateCurve {
public:
    RateCurve() : times_{0.0}, rates_{0.0} {}

    RateCurve(std::vector<double> times, std::vector<double> rates)
        : times_(std::move(times)), rates_(std::move(rates)) {
        if (times_.empty() || times_.size() != rates_.size()) {
            throw InvalidInput("RateCurve: need matching non-empty times/rates");
        }
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!std::isfinite(times_[i]) || !std::isfinite(rates_[i])) {
                throw InvalidInput("RateCurve: non-finite entry");
            }
            if (i > 0 && times_[i] <= times_[i - 1]) {
                throw InvalidInput("RateCurve: times must be strictly increasing");
            }
        }
    }

    static RateCurve flat(double r) { return RateCurve({0.0}, {r}); }

    double rate(double t) const {
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        if (it == times_.begin()) return rates_.front();
        return rates_[static_cast<std::size_t>(it - times_.begin()) - 1];
    }

    // Integral of the short rate over [a, b], a <= b.
    double integral(double a, double b) const {
        if (!(a <= b)) {
            throw InvalidInput("RateCurve::integral: interval must satisfy a <= b");
        }
        double acc = 0.0;
        double cur = a;
        while (cur < b) {
            auto it = std::upper_bound(times_.begin(), times_.end(), cur);
            const double r = (it == times_.begin())
                                 ? rates_.front()
                                 : rates_[static_cast<std::size_t>(it - times_.begin()) - 1];
            const double next = (it == times_.end()) ? b : std::min(b, *it);
            acc += r * (next - cur);
            cur = next;
        }
        return acc;
    }

    double discount(double a, double b) const { return std::exp(-integral(a, b)); }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& rates() const { return rates_; }

private:
    std::vector<double> times_;
    std::vector<double> rates_;
};

// Spot market snapshot: valuation date, spot price, rate curve.
struct MarketState {
    double t0 = 0.0;
    double x0 = 0.0;
    RateCurve rates;

    MarketState() = default;
    MarketState(double t0_, double x0_, RateCurve rates_ = RateCurve::flat(0.0))
        : t0(t0_), x0(x0_), rates(std::move(rates_)) {
        if (!std::isfinite(t0) || !std::isfinite(x0) || x0 <= 0.0) {
            throw InvalidInput("MarketState: require finite t0 and x0 > 0");
        }
    }

    double discount_to(double T) const { return rates.discount(t0, T); }
};

// ---------------------------------------------------------------------------
// Observed paths
// ---------------------------------------------------------------------------

struct PricePath {
    std::vector<double> times;
    std::vector<double> prices;

    void validate() const {
        if (times.size() != prices.size() || times.size() < 2) {
            throw InvalidInput("PricePath: need matching times/prices with >= 2 samples");
        }
        for (std::size_t i = 0; i < times.size(); ++i) {
            if (!std::isfinite(times[i]) || !std::isfinite(prices[i]) || prices[i] <= 0.0) {
                throw InvalidInput("PricePath: prices must be finite and positive");
            }
            if (i > 0 && times[i] <= times[i - 1]) {
                throw InvalidInput("PricePath: times must be strictly increasing");
            }
        }
    }
};

// Annualized historical volatility from log returns on a uniformly spaced
// path: sqrt of the unbiased return variance divided by the spacing.
inline double historical_volatility(const PricePath& path) {
    path.validate();
    const std::size_t n = path.times.size();
    if (n < 3) {
        throw InvalidInput("historical_volatility: need at least 2 returns");
    }
    const double h = path.times[1] - path.times[0];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hi = path.times[i + 1] - path.times[i];
        if (std::abs(hi - h) > 1e-9 * std::max(1.0, std::abs(h))) {
            throw InvalidInput("historical_volatility: path spacing must be uniform");
        }
    }
    std::vector<double> returns(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        returns[i] = std::log(path.prices[i + 1] / path.prices[i]);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double ss = 0.0;
    for (double r : returns) {
        const double d = r - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(returns.size() - 1);
    return std::sqrt(var / h);
}

// Sum of squared price increments along the observation partition. Invariant
// under time reparameterization and under shifting every price by a constant.
inline double realized_quadratic_variation(const PricePath& path) {
    path.validate();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < path.prices.size(); ++i) {
        const double d = path.prices[i + 1] - path.prices[i];
        acc += d * d;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Quotes
// ---------------------------------------------------------------------------

enum class QuoteKind { call, put };

struct OptionQuote {
    double maturity = 0.0;
    double strike = 0.0;
    QuoteKind kind = QuoteKind::call;
    double price = 0.0;
    double weight = 1.0;
};

// Quotes grouped by maturity, each row sorted by strike. Construction
// validates hard invariants and records static-arbitrage diagnostics as
// warnings rather than failures: noisy but usable quote sets stay usable.
struct QuoteSurface {
    std::vector<double> maturities;
    std::vector<std::vector<OptionQuote>> rows;
    std::vector<std::string> warnings;

    static QuoteSurface build(const MarketState& market, std::vector<OptionQuote> quotes) {
        QuoteSurface out;
        for (const auto& q : quotes) {
            if (!std::isfinite(q.maturity) || q.maturity <= market.t0) {
                throw InvalidInput("QuoteSurface: quote maturity must exceed t0");
            }
            if (!std::isfinite(q.strike) || q.strike <= 0.0) {
                throw InvalidInput("QuoteSurface: quote strike must be positive");
            }
            if (!std::isfinite(q.price) || q.price < 0.0) {
                throw InvalidInput("QuoteSurface: quote price must be finite and >= 0");
            }
            if (!std::isfinite(q.weight) || q.weight < 0.0) {
                throw InvalidInput("QuoteSurface: quote weight must be finite and >= 0");
            }
        }
        std::sort(quotes.begin(), quotes.end(), [](const OptionQuote& a, const OptionQuote& b) {
            if (a.maturity != b.maturity) return a.maturity < b.maturity;
            if (a.strike != b.strike) return a.strike < b.strike;
            return static_cast<int>(a.kind) < static_cast<int>(b.kind);
        });
        for (std::size_t i = 0; i + 1 < quotes.size(); ++i) {
            const auto& a = quotes[i];
            const auto& b = quotes[i + 1];
            if (a.maturity == b.maturity && a.strike == b.strike && a.kind == b.kind) {
                throw InvalidInput("QuoteSurface: duplicate quote at maturity " +
                                   std::to_string(a.maturity) + ", strike " +
                                   std::to_string(a.strike));
            }
        }
        for (const auto& q : quotes) {
            if (out.maturities.empty() || q.maturity != out.maturities.back()) {
                out.maturities.push_back(q.maturity);
                out.rows.emplace_back();
            }
            out.rows.back().push_back(q);
        }
        // Static-arbitrage screens, reported but not enforced.
        for (std::size_t i = 0; i < out.rows.size(); ++i) {
            const double disc = market.discount_to(out.maturities[i]);
            const OptionQuote* prev_call = nullptr;
            for (const auto& q : out.rows[i]) {
                const double call_price =
                    q.kind == QuoteKind::call ? q.price
                                              : q.price + market.x0 - q.strike * disc;
                const double lo = std::max(market.x0 - q.strike * disc, 0.0);
                const double tol = 1e-12 * std::max(1.0, market.x0);
                if (call_price < lo - tol || call_price > market.x0 + tol) {
                    out.warnings.push_back(
                        "quote outside static bounds: T=" + std::to_string(q.maturity) +
                        " K=" + std::to_string(q.strike));
                }
                if (q.kind == QuoteKind::call) {
                    if (prev_call && call_price > prev_call->price + tol) {
                        out.warnings.push_back(
                            "call prices increase in strike at T=" + std::to_string(q.maturity) +
                            " K=" + std::to_string(q.strike));
                    }
                    prev_call = &q;
                }
            }
        }
        return out;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.size();
        return n;
    }
};

// ---------------------------------------------------------------------------
// Payoffs
// ---------------------------------------------------------------------------

// Continuous piecewise-linear payoff h on [0, inf). Defined by breakpoints
// with values, plus the slope beyond the last breakpoint. To the left of the
// first breakpoint the first segment is extended (or the terminal slope when
// there is a single breakpoint).
struct Payoff {
    std::vector<double> xs;
    std::vector<double> values;
    double terminal_slope = 0.0;

    void validate() const {
        if (xs.empty() || xs.size() != values.size()) {
            throw InvalidInput("Payoff: need matching non-empty breakpoints/values");
        }
        if (xs.front() < 0.0) {
            throw InvalidInput("Payoff: breakpoints must be >= 0");
        }
        if (!std::isfinite(terminal_slope)) {
            throw InvalidInput("Payoff: non-finite terminal slope");
        }
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(xs[i]) || !std::isfinite(values[i])) {
                throw InvalidInput("Payoff: non-finite breakpoint or value");
            }
            if (i > 0 && xs[i] <= xs[i - 1]) {
                throw InvalidInput("Payoff: breakpoints must be strictly increasing");
            }
        }
    }

    // Slope of segment i: between xs[i] and xs[i+1], with the terminal slope
    // past the last breakpoint.
    double segment_slope(std::size_t i) const {
        if (i + 1 < xs.size()) {
            return (values[i + 1] - values[i]) / (xs[i + 1] - xs[i]);
        }
        return terminal_slope;
    }

    double evaluate(double x) const {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw InvalidInput("Payoff::evaluate: price must be finite and >= 0");
        }
        if (x >= xs.back()) {
            return values.back() + terminal_slope * (x - xs.back());
        }
        if (x <= xs.front()) {
            const double s = xs.size() > 1 ? segment_slope(0) : terminal_slope;
            return values.front() + s * (x - xs.front());
        }
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
        const double t = (x - xs[i]) / (xs[i + 1] - xs[i]);
        return lerp_at(values[i], values[i + 1], t);
    }

    // Almost-everywhere derivative; at a breakpoint, the right-hand slope.
    double slope_at(double x) const {
        if (!(x >= 0.0) || !std::isfinite(x)) {
            throw InvalidInput("Payoff::slope_at: price must be finite and >= 0");
        }
        if (x >= xs.back()) return terminal_slope;
        if (x < xs.front()) {
            return xs.size() > 1 ? segment_slope(0) : terminal_slope;
        }
        const auto it = std::upper_bound(xs.begin(), xs.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
        return segment_slope(i);
    }

    double max_abs_slope() const {
        double m = std::abs(terminal_slope);
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            m = std::max(m, std::abs(segment_slope(i)));
        }
        if (xs.size() > 1) m = std::max(m, std::abs(segment_slope(0)));
        return m;
    }

    static Payoff from_points(std::vector<double> xs, std::vector<double> values,
                              double terminal_slope) {
        Payoff p{std::move(xs), std::move(values), terminal_slope};
        p.validate();
        return p;
    }

    static Payoff call(double strike) {
        if (!(strike > 0.0) || !std::isfinite(strike)) {
            throw InvalidInput("Payoff::call: strike must be positive");
        }
        return from_points({0.0, strike}, {0.0, 0.0}, 1.0);
    }

    static Payoff put(double strike) {
        if (!(strike > 0.0) || !std::isfinite(strike)) {
            throw InvalidInput("Payoff::put: strike must be positive");
        }
        return from_points({0.0, strike}, {strike, 0.0}, 0.0);
    }

    // Tent worth k2 - k1 at k2, zero outside (k1, k3).
    static Payoff butterfly(double k1, double k2, double k3) {
        if (!(0.0 < k1 && k1 < k2 && k2 < k3) || !std::isfinite(k3)) {
            throw InvalidInput("Payoff::butterfly: need 0 < k1 < k2 < k3");
        }
        return from_points({0.0, k1, k2, k3}, {0.0, 0.0, k2 - k1, 0.0}, 0.0);
    }

    static Payoff forward(double strike) {
        if (!std::isfinite(strike)) {
            throw InvalidInput("Payoff::forward: non-finite strike");
        }
        return from_points({0.0}, {-strike}, 1.0);
    }

    static Payoff constant(double value) {
        if (!std::isfinite(value)) {
            throw InvalidInput("Payoff::constant: non-finite value");
        }
        return from_points({0.0}, {value}, 0.0);
    }
};

// Decomposition h(x) = cash + forward_units * x + sum_i size_i * (x - K_i)^+
// valid on [0, inf). Strikes are the breakpoints where the slope changes.
struct CallDecomposition {
    struct Kink {
        double strike;
        double size;
    };
    double cash = 0.0;
    double forward_units = 0.0;
    std::vector<Kink> kinks;
};

inline CallDecomposition decompose_into_calls(const Payoff& payoff) {
    payoff.validate();
    CallDecomposition out;
    out.cash = payoff.evaluate(0.0);
    const std::size_t n = payoff.xs.size();
    double left_slope = n > 1 ? payoff.segment_slope(0) : payoff.terminal_slope;
    out.forward_units = left_slope;
    for (std::size_t i = 1; i < n; ++i) {
        const double right_slope = payoff.segment_slope(i);
        const double jump = right_slope - left_slope;
        if (jump != 0.0) {
            if (payoff.xs[i] == 0.0) {
                out.forward_units += jump;
            } else {
                out.kinks.push_back({payoff.xs[i], jump});
            }
        }
        left_slope = right_slope;
    }
    return out;
}

}  // namespace voltcraft
