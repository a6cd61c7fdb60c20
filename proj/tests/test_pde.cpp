#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voltcraft/analytic.hpp"
#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/pde.hpp"
#include "voltcraft/vol_surface.hpp"

using namespace voltcraft;

namespace {

PdeGrid fine_grid() {
    PdeGrid grid;
    grid.time_steps = 400;
    grid.space_nodes = 401;
    return grid;
}

// A smooth smile decreasing in price, mild in time.
LocalVolSurface smile_surface() {
    std::vector<double> times = {0.0, 0.5, 1.0, 1.5};
    std::vector<double> prices;
    for (int j = 0; j < 9; ++j) prices.push_back(40.0 * std::pow(1.25, j));
    std::vector<double> vols;
    for (double t : times) {
        for (double x : prices) {
            vols.push_back(0.2 + 0.1 * std::tanh((100.0 - x) / 50.0) + 0.01 * t);
        }
    }
    return LocalVolSurface(times, prices, vols);
}

}  // namespace

TEST(BackwardPde, MatchesClosedFormCall) {
    const MarketState market(0.0, 100.0, RateCurve::flat(0.05));
    const PdeSolution sol = solve_backward_pricing(market, LocalVolSurface::flat(0.2),
                                                   Payoff::call(100.0), 1.0, fine_grid());
    EXPECT_NEAR(sol.price(), 10.450583572185567, 1.5e-3);
    EXPECT_NEAR(sol.delta(), 0.6368306511756191, 1e-3);
    EXPECT_TRUE(sol.warnings.empty());
    // The stored solution interpolates consistently with the spot node.
    EXPECT_DOUBLE_EQ(sol.value_at(0.0, 100.0), sol.price());
}

TEST(BackwardPde, PutThroughParity) {
    const MarketState market(0.0, 100.0, RateCurve::flat(0.03));
    const PdeGrid grid = fine_grid();
    const LocalVolSurface vol = LocalVolSurface::flat(0.25);
    const double call = solve_backward_pricing(market, vol, Payoff::call(95.0), 2.0, grid).price();
    const double put = solve_backward_pricing(market, vol, Payoff::put(95.0), 2.0, grid).price();
    EXPECT_NEAR(call - put, 100.0 - 95.0 * std::exp(-0.06), 5e-3);
    EXPECT_NEAR(put, bs_put_price(100.0, 95.0, 2.0, 0.25, 0.03), 2e-3);
}

TEST(BackwardPde, ConstantPayoffReproducesTheDiscountFactor) {
    // Constant coefficients route to the drift-removed scheme, where a
    // constant payoff turns into an exponential profile of the working
    // variable. The residual is the scheme's spatial truncation on that
    // profile plus the theta-scheme's time error, both far below a basis
    // point of a basis point here.
    const MarketState market(0.0, 100.0, RateCurve::flat(0.04));
    PdeGrid grid;
    grid.time_steps = 200;
    grid.space_nodes = 101;
    grid.rannacher_substeps = 0;
    const PdeSolution sol = solve_backward_pricing(market, LocalVolSurface::flat(0.3),
                                                   Payoff::constant(5.0), 1.0, grid);
    EXPECT_NEAR(sol.price(), 5.0 * std::exp(-0.04), 1e-8);

    const MarketState flat_market(0.0, 100.0);
    const PdeSolution zero_rate = solve_backward_pricing(
        flat_market, LocalVolSurface::flat(0.3), Payoff::constant(5.0), 1.0, grid);
    EXPECT_NEAR(zero_rate.price(), 5.0, 1e-9);
}

TEST(BackwardPde, ForwardPayoffPricesToParityValue) {
    // Linear payoffs are not annihilated exactly by the log-space operator
    // (curvature in x of order dy^2 remains), so the tolerance is a grid
    // constant rather than machine precision.
    const MarketState market(0.0, 100.0, RateCurve::flat(0.05));
    const PdeSolution sol = solve_backward_pricing(market, LocalVolSurface::flat(0.2),
                                                   Payoff::forward(90.0), 1.0, fine_grid());
    EXPECT_NEAR(sol.price(), 100.0 - 90.0 * std::exp(-0.05), 2e-3);
    EXPECT_NEAR(sol.delta(), 1.0, 1e-6);
}

TEST(BackwardPde, FullyImplicitAndExplicitStepsAgreeOnSmoothProblem) {
    const MarketState market(0.0, 100.0);
    const LocalVolSurface vol = LocalVolSurface::flat(0.2);
    PdeGrid implicit;
    implicit.time_steps = 800;
    implicit.space_nodes = 201;
    implicit.theta = 1.0;
    PdeGrid explicit_grid;
    explicit_grid.time_steps = 4000;  // ratio safely inside the stability bound
    explicit_grid.space_nodes = 101;
    explicit_grid.theta = 0.0;
    const double reference = bs_call_price(100.0, 100.0, 1.0, 0.2, 0.0);
    const double imp =
        solve_backward_pricing(market, vol, Payoff::call(100.0), 1.0, implicit).price();
    const double exp_price =
        solve_backward_pricing(market, vol, Payoff::call(100.0), 1.0, explicit_grid).price();
    EXPECT_NEAR(imp, reference, 2e-2);
    EXPECT_NEAR(exp_price, reference, 2e-2);
}

TEST(BackwardPde, WarnsOnUnstableExplicitRatio) {
    const MarketState market(0.0, 100.0);
    PdeGrid grid;
    grid.time_steps = 10;
    grid.space_nodes = 801;
    grid.theta = 0.0;
    grid.rannacher_substeps = 0;
    const PdeSolution sol = solve_backward_pricing(market, LocalVolSurface::flat(0.4),
                                                   Payoff::call(100.0), 1.0, grid);
    EXPECT_FALSE(sol.warnings.empty());
}

TEST(BackwardPde, GridValidation) {
    PdeGrid grid;
    grid.theta = 1.5;
    EXPECT_THROW(grid.validate(), InvalidInput);
    grid = PdeGrid();
    grid.space_nodes = 2;
    EXPECT_THROW(grid.validate(), InvalidInput);
    grid = PdeGrid();
    grid.y_min = 1.0;  // one-sided explicit bound
    EXPECT_THROW(grid.validate(), InvalidInput);
    const MarketState market(0.0, 100.0);
    grid = PdeGrid();
    EXPECT_THROW(solve_backward_pricing(market, LocalVolSurface::flat(0.2),
                                        Payoff::call(100.0), -1.0, grid),
                 InvalidInput);
}

// ---------------------------------------------------------------------------
// Forward (strike-space) equation
// ---------------------------------------------------------------------------

TEST(ForwardPde, ReproducesClosedFormAcrossStrikes) {
    const MarketState market(0.0, 100.0, RateCurve::flat(0.05));
    const PriceSurface surf =
        solve_dupire_forward(market, LocalVolSurface::flat(0.2), {0.5, 1.0}, fine_grid());
    ASSERT_EQ(surf.maturities().size(), 2u);
    std::size_t checked = 0;
    for (double k : {70.0, 85.0, 100.0, 115.0, 140.0}) {
        const double model = surf.row_value(1, k);
        const double exact = bs_call_price(100.0, k, 1.0, 0.2, 0.05);
        EXPECT_NEAR(model, exact, 2e-3 * 100.0) << "k=" << k;
        ++checked;
    }
    EXPECT_EQ(checked, 5u);
}

TEST(ForwardPde, OneForwardSolveMatchesPerStrikeBackwardSolves) {
    // Duality: the strike-space equation prices every strike at once; the
    // price-space equation must agree strike by strike under the same
    // state-dependent volatility.
    const MarketState market(0.0, 100.0);
    const LocalVolSurface vol = smile_surface();
    const PriceSurface forward = solve_dupire_forward(market, vol, {1.0}, fine_grid());
    for (double k : {80.0, 100.0, 125.0}) {
        const double fwd_price = forward.row_value(0, k);
        const double bwd_price =
            solve_backward_pricing(market, vol, Payoff::call(k), 1.0, fine_grid()).price();
        EXPECT_NEAR(fwd_price, bwd_price, 2e-3 * std::max(bwd_price, 1.0)) << "k=" << k;
    }
}

TEST(ForwardPde, ArbitrageReportCleanOnFlatSurface) {
    const MarketState market(0.0, 100.0);
    const PriceSurface surf =
        solve_dupire_forward(market, LocalVolSurface::flat(0.2), {0.5, 1.0}, fine_grid());
    EXPECT_TRUE(surf.arbitrage_report(1e-7).empty());
}

TEST(ForwardPde, RequestedMaturitiesMustIncrease) {
    const MarketState market(0.0, 100.0);
    EXPECT_THROW(
        solve_dupire_forward(market, LocalVolSurface::flat(0.2), {1.0, 0.5}, fine_grid()),
        InvalidInput);
    EXPECT_THROW(solve_dupire_forward(market, LocalVolSurface::flat(0.2), {}, fine_grid()),
                 InvalidInput);
}

// ---------------------------------------------------------------------------
// Pricing kernel
// ---------------------------------------------------------------------------

TEST(PricingKernel, IntegratesToDiscountAndPricesPayoffs) {
    const MarketState market(0.0, 100.0, RateCurve::flat(0.02));
    const PricingKernel kernel =
        pricing_kernel(market, LocalVolSurface::flat(0.2), 1.0, fine_grid());
    EXPECT_NEAR(kernel.mass, std::exp(-0.02), 2e-3);
    // The normalized mean is the undiscounted martingale mean, i.e the forward.
    EXPECT_NEAR(kernel.mean, 100.0 * std::exp(0.02), 0.2);
    const double call = kernel.expectation([](double x) { return std::max(x - 100.0, 0.0); });
    EXPECT_NEAR(call, bs_call_price(100.0, 100.0, 1.0, 0.2, 0.02), 5e-2);
    // Kink-adjacent differencing may undershoot zero by rounding-level noise,
    // bounded by the solver's own negativity warning threshold.
    EXPECT_TRUE(kernel.warnings.empty());
    for (double q : kernel.density) ASSERT_GT(q, -1e-6);
}

// ---------------------------------------------------------------------------
// Band (best/worst volatility) solver
// ---------------------------------------------------------------------------

TEST(BandPde, DegenerateBandCollapsesToLinearPricing) {
    // With a point band the extremiser has nothing to choose: the upper and
    // lower solves run identical coefficient paths and must agree bit for
    // bit after settling in a single policy round. The flat-volatility
    // backward solver is a different discretization of the same problem
    // (fourth order against second), so that comparison gets a scheme
    // tolerance rather than equality.
    const MarketState market(0.0, 100.0, RateCurve::flat(0.02));
    PdeGrid grid;
    grid.time_steps = 100;
    grid.space_nodes = 201;
    const Payoff bfly = Payoff::butterfly(90.0, 100.0, 110.0);
    const PdeSolution upper =
        solve_bsb(market, VolBand(0.2, 0.2), bfly, 1.0, grid, BandSide::upper);
    const PdeSolution lower =
        solve_bsb(market, VolBand(0.2, 0.2), bfly, 1.0, grid, BandSide::lower);
    EXPECT_EQ(upper.nonlinear_iterations, 1);
    EXPECT_EQ(lower.nonlinear_iterations, 1);
    for (std::size_t j = 0; j < upper.prices.size(); ++j) {
        ASSERT_EQ(upper.value(0, j), lower.value(0, j)) << "node " << j;
    }
    const PdeSolution flat =
        solve_backward_pricing(market, LocalVolSurface::flat(0.2), bfly, 1.0, grid);
    EXPECT_NEAR(upper.price(), flat.price(), 2e-3);
}

TEST(BandPde, ConvexPayoffSaturatesUpperVolatility) {
    // A convex payoff keeps positive curvature, so the upper solve rides the
    // high band edge and the lower solve the low edge. The comparison price
    // comes from the constant-coefficient fourth-order path while the band
    // solver is second order, so equality and the one-sided bounds both
    // carry the band solver's own discretization error, a few tenths of a
    // cent at this grid.
    const MarketState market(0.0, 100.0);
    PdeGrid grid;
    grid.time_steps = 200;
    grid.space_nodes = 301;
    const PdeSolution upper =
        solve_bsb(market, VolBand(0.1, 0.3), Payoff::call(100.0), 1.0, grid, BandSide::upper);
    const PdeSolution const_hi = solve_backward_pricing(
        market, LocalVolSurface::flat(0.3), Payoff::call(100.0), 1.0, grid);
    EXPECT_GE(upper.price(), const_hi.price() - 2e-3);
    EXPECT_NEAR(upper.price(), const_hi.price(), 2e-3);

    const PdeSolution lower =
        solve_bsb(market, VolBand(0.1, 0.3), Payoff::call(100.0), 1.0, grid, BandSide::lower);
    const PdeSolution const_lo = solve_backward_pricing(
        market, LocalVolSurface::flat(0.1), Payoff::call(100.0), 1.0, grid);
    EXPECT_LE(lower.price(), const_lo.price() + 2e-3);
    EXPECT_NEAR(lower.price(), const_lo.price(), 0.01);
}

TEST(BandPde, MixedCurvaturePayoffStrictlyDominatesConstantVolatilities) {
    const MarketState market(0.0, 100.0);
    PdeGrid grid;
    grid.time_steps = 200;
    grid.space_nodes = 301;
    const Payoff bfly = Payoff::butterfly(90.0, 100.0, 110.0);
    const VolBand band(0.1, 0.3);
    const double upper = solve_bsb(market, band, bfly, 0.5, grid, BandSide::upper).price();
    const double lower = solve_bsb(market, band, bfly, 0.5, grid, BandSide::lower).price();
    for (double sigma : {0.1, 0.2, 0.3}) {
        const double flat = solve_backward_pricing(market, LocalVolSurface::flat(sigma), bfly,
                                                   0.5, grid)
                                .price();
        EXPECT_GT(upper, flat + 1e-2) << sigma;
        EXPECT_LT(lower, flat - 1e-2) << sigma;
    }
    EXPECT_GT(upper, lower);
}

TEST(BandPde, SubadditiveAcrossPayoffSplit) {
    // The worst-case price is sublinear: splitting a book cannot cheapen it.
    const MarketState market(0.0, 100.0);
    PdeGrid grid;
    grid.time_steps = 100;
    grid.space_nodes = 201;
    const VolBand band(0.15, 0.25);
    const Payoff calls = Payoff::from_points({0.0, 90.0, 110.0}, {0.0, 0.0, 20.0}, 2.0);
    const Payoff short_mid = Payoff::from_points({0.0, 100.0}, {0.0, 0.0}, -2.0);
    const Payoff bfly = Payoff::butterfly(90.0, 100.0, 110.0);
    const double whole = solve_bsb(market, band, bfly, 1.0, grid, BandSide::upper).price();
    const double part_a = solve_bsb(market, band, calls, 1.0, grid, BandSide::upper).price();
    const double part_b = solve_bsb(market, band, short_mid, 1.0, grid, BandSide::upper).price();
    EXPECT_LE(whole, part_a + part_b + 1e-8);
}
