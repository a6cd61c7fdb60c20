#pragma once

// Call-price surfaces C(T, K) on rectangular maturity/strike lattices:
// interpolation and static-arbitrage screening.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"

namespace voltcraft {

// Undiscounted-strike call prices sampled on maturities x strikes, strikes
// interpolated in log. Rows are maturities.
class PriceSurface {
public:
    PriceSurface(MarketState market, std::vector<double> maturities, std::vector<double> strikes,
                 std::vector<double> values_row_major)
        : market_(std::move(market)),
          maturities_(std::move(maturities)),
          strikes_(std::move(strikes)),
          values_(std::move(values_row_major)) {
        if (maturities_.empty() || strikes_.size() < 2) {
            throw InvalidInput("PriceSurface: need >= 1 maturity and >= 2 strikes");
        }
        if (values_.size() != maturities_.size() * strikes_.size()) {
            throw InvalidInput("PriceSurface: value count does not match lattice");
        }
        for (std::size_t i = 0; i < maturities_.size(); ++i) {
            if (!(maturities_[i] > market_.t0) ||
                (i > 0 && maturities_[i] <= maturities_[i - 1])) {
                throw InvalidInput("PriceSurface: maturities must be > t0, strictly increasing");
            }
        }
        log_strikes_.resize(strikes_.size());
        for (std::size_t j = 0; j < strikes_.size(); ++j) {
            if (!(strikes_[j] > 0.0) || (j > 0 && strikes_[j] <= strikes_[j - 1])) {
                throw InvalidInput("PriceSurface: strikes must be positive, strictly increasing");
            }
            log_strikes_[j] = std::log(strikes_[j]);
        }
        for (double v : values_) {
            if (!std::isfinite(v)) throw InvalidInput("PriceSurface: non-finite value");
        }
    }

    double value(std::size_t i, std::size_t j) const { return values_[i * strikes_.size() + j]; }

    const MarketState& market() const { return market_; }
    const std::vector<double>& maturities() const { return maturities_; }
    const std::vector<double>& strikes() const { return strikes_; }
    const std::vector<double>& values() const { return values_; }

    // Cubic (4-point Lagrange) interpolation along one maturity row, in log
    // strike. The strike must lie inside the lattice.
    double row_value(std::size_t i, double strike) const {
        if (i >= maturities_.size()) {
            throw InvalidInput("PriceSurface::row_value: maturity index out of range");
        }
        if (!(strike >= strikes_.front()) || !(strike <= strikes_.back())) {
            throw InvalidInput("PriceSurface::row_value: strike outside the lattice");
        }
        const double u = std::log(strike);
        const std::size_t n = strikes_.size();
        auto it = std::upper_bound(log_strikes_.begin(), log_strikes_.end(), u);
        std::size_t cell = it == log_strikes_.begin()
                               ? 0
                               : static_cast<std::size_t>(it - log_strikes_.begin()) - 1;
        cell = std::min(cell, n - 2);
        // Four-point window clamped to the lattice; degrades to the available
        // points near the edges.
        const std::size_t lo = cell == 0 ? 0 : std::min(cell - 1, n - 4);
        const std::size_t count = std::min<std::size_t>(4, n - lo);
        double acc = 0.0;
        for (std::size_t a = 0; a < count; ++a) {
            double w = 1.0;
            for (std::size_t b = 0; b < count; ++b) {
                if (a == b) continue;
                w *= (u - log_strikes_[lo + b]) / (log_strikes_[lo + a] - log_strikes_[lo + b]);
            }
            acc += w * value(i, lo + a);
        }
        return acc;
    }

    // Bilinear interpolation in (maturity, log strike), clamped outside.
    double interpolate(double maturity, double strike) const {
        if (!(strike > 0.0) || !std::isfinite(strike) || !std::isfinite(maturity)) {
            throw InvalidInput("PriceSurface::interpolate: need finite maturity and strike > 0");
        }
        const double u = std::log(strike);
        const auto [i, wt] = bracket(maturities_, maturity);
        const auto [j, wu] = bracket(log_strikes_, u);
        const std::size_t i1 = maturities_.size() == 1 ? i : i + 1;
        const double lo = lerp_at(value(i, j), value(i, j + 1), wu);
        const double hi = lerp_at(value(i1, j), value(i1, j + 1), wu);
        return lerp_at(lo, hi, wt);
    }

    // Static-arbitrage screen: strike monotonicity, strike convexity, price
    // bounds, and (when all rates are zero) calendar monotonicity. Returns
    // human-readable violation descriptions.
    std::vector<std::string> arbitrage_report(double tol) const {
        std::vector<std::string> out;
        const std::size_t nk = strikes_.size();
        const bool zero_rates = [&] {
            for (double r : market_.rates.rates()) {
                if (r != 0.0) return false;
            }
            return true;
        }();
        for (std::size_t i = 0; i < maturities_.size(); ++i) {
            const double disc = market_.discount_to(maturities_[i]);
            for (std::size_t j = 0; j < nk; ++j) {
                const double v = value(i, j);
                const double lo = std::max(market_.x0 - strikes_[j] * disc, 0.0);
                if (v < lo - tol || v > market_.x0 + tol) {
                    out.push_back("price bound violated at T=" + std::to_string(maturities_[i]) +
                                  " K=" + std::to_string(strikes_[j]));
                }
                if (j > 0 && value(i, j) > value(i, j - 1) + tol) {
                    out.push_back("strike monotonicity violated at T=" +
                                  std::to_string(maturities_[i]) + " K=" +
                                  std::to_string(strikes_[j]));
                }
                if (j > 0 && j + 1 < nk) {
                    const double d2 = fd_second(value(i, j - 1), value(i, j), value(i, j + 1),
                                                strikes_[j] - strikes_[j - 1],
                                                strikes_[j + 1] - strikes_[j]);
                    if (d2 < -tol) {
                        out.push_back("strike convexity violated at T=" +
                                      std::to_string(maturities_[i]) + " K=" +
                                      std::to_string(strikes_[j]));
                    }
                }
                if (zero_rates && i > 0 && value(i, j) < value(i - 1, j) - tol) {
                    out.push_back("calendar monotonicity violated at T=" +
                                  std::to_string(maturities_[i]) + " K=" +
                                  std::to_string(strikes_[j]));
                }
            }
        }
        return out;
    }

private:
    static std::pair<std::size_t, double> bracket(const std::vector<double>& grid, double v) {
        if (grid.size() == 1) return {0, 0.0};
        if (v <= grid.front()) return {0, 0.0};
        if (v >= grid.back()) return {grid.size() - 2, 1.0};
        const auto it = std::upper_bound(grid.begin(), grid.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
        return {i, (v - grid[i]) / (grid[i + 1] - grid[i])};
    }

    MarketState market_;
    std::vector<double> maturities_;
    std::vector<double> strikes_;
    std::vector<double> log_strikes_;
    std::vector<double> values_;
};

}  // namespace voltcraft
