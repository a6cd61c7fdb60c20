#pragma once

// Local volatility surfaces on rectangular (time, price) lattices with
// bilinear interpolation in (t, ln x), and volatility bands for the
// uncertain-volatility solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/math.hpp"

namespace voltcraft {

// Hard bounds every stored volatility must respect.
inline constexpr double kVolFloor = 1e-4;
inline constexpr double kVolCap = 10.0;

// sigma(t, x) sampled on a lattice of times (rows) and prices (columns),
// interpolated bilinearly in (t, ln x) and extended as a constant outside the
// lattice. Interpolation uses the p + t*(q-p) form, so a lattice holding one
// repeated value reproduces that value bit-exactly everywhere.
class LocalVolSurface {
public:
    LocalVolSurface(std::vector<double> times, std::vector<double> prices,
                    std::vector<double> vols_row_major)
        : times_(std::move(times)), prices_(std::move(prices)), vols_(std::move(vols_row_major)) {
        if (times_.size() < 2 || prices_.size() < 2) {
            throw InvalidInput("LocalVolSurface: lattice must be at least 2 x 2");
        }
        if (vols_.size() != times_.size() * prices_.size()) {
            throw InvalidInput("LocalVolSurface: value count does not match lattice");
        }
        for (std::size_t i = 0; i < times_.size(); ++i) {
            if (!std::isfinite(times_[i]) || (i > 0 && times_[i] <= times_[i - 1])) {
                throw InvalidInput("LocalVolSurface: times must be finite, strictly increasing");
            }
        }
        log_prices_.resize(prices_.size());
        for (std::size_t j = 0; j < prices_.size(); ++j) {
            if (!(prices_[j] > 0.0) || !std::isfinite(prices_[j]) ||
                (j > 0 && prices_[j] <= prices_[j - 1])) {
                throw InvalidInput("LocalVolSurface: prices must be positive, strictly increasing");
            }
            log_prices_[j] = std::log(prices_[j]);
        }
        for (double v : vols_) {
            if (!(v >= kVolFloor) || !(v <= kVolCap)) {
                throw InvalidInput("LocalVolSurface: volatilities must lie in [" +
                                   std::to_string(kVolFloor) + ", " + std::to_string(kVolCap) + "]");
            }
        }
    }

    static LocalVolSurface flat(double sigma) {
        return LocalVolSurface({0.0, 1.0}, {1e-2, 1e6}, {sigma, sigma, sigma, sigma});
    }

    double value(double t, double x) const {
        if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(t)) {
            throw InvalidInput("LocalVolSurface::value: need finite t and x > 0");
        }
        const double u = std::log(x);
        const auto [i, wt] = bracket(times_, t);
        const auto [j, wu] = bracket(log_prices_, u);
        const double lo = lerp_at(at(i, j), at(i, j + 1), wu);
        const double hi = lerp_at(at(i + 1, j), at(i + 1, j + 1), wu);
        return lerp_at(lo, hi, wt);
    }

    double max_value() const { return *std::max_element(vols_.begin(), vols_.end()); }
    double min_value() const { return *std::min_element(vols_.begin(), vols_.end()); }

    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& prices() const { return prices_; }
    const std::vector<double>& values() const { return vols_; }
    double at(std::size_t i, std::size_t j) const { return vols_[i * prices_.size() + j]; }

private:
    // Index of the cell containing v plus the interpolation weight, with
    // clamping outside the lattice (constant extension).
    static std::pair<std::size_t, double> bracket(const std::vector<double>& grid, double v) {
        if (v <= grid.front()) return {0, 0.0};
        if (v >= grid.back()) return {grid.size() - 2, 1.0};
        const auto it = std::upper_bound(grid.begin(), grid.end(), v);
        const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
        return {i, (v - grid[i]) / (grid[i + 1] - grid[i])};
    }

    std::vector<double> times_;
    std::vector<double> prices_;
    std::vector<double> log_prices_;
    std::vector<double> vols_;
};

// Volatility band sigma_lo(t,x) <= sigma <= sigma_hi(t,x) for worst/best-case
// pricing. Constant bands are the common case; full surfaces are allowed on
// either side.
class VolBand {
public:
    VolBand(double lo, double hi) {
        if (!(lo >= kVolFloor) || !(hi <= kVolCap) || !(lo <= hi)) {
            throw InvalidInput("VolBand: need vol-floor <= lo <= hi <= vol-cap");
        }
        lo_const_ = lo;
        hi_const_ = hi;
    }

    VolBand(LocalVolSurface lo, LocalVolSurface hi)
        : lo_surface_(std::move(lo)), hi_surface_(std::move(hi)) {}

    double lo_at(double t, double x) const {
        return lo_surface_ ? lo_surface_->value(t, x) : lo_const_;
    }
    double hi_at(double t, double x) const {
        return hi_surface_ ? hi_surface_->value(t, x) : hi_const_;
    }

    double max_hi() const { return hi_surface_ ? hi_surface_->max_value() : hi_const_; }

private:
    double lo_const_ = kVolFloor;
    double hi_const_ = kVolCap;
    std::optional<LocalVolSurface> lo_surface_;
    std::optional<LocalVolSurface> hi_surface_;
};

}  // namespace voltcraft
