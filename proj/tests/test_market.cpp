#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/market.hpp"
#include "voltcraft/math.hpp"

using namespace voltcraft;

TEST(RateCurve, FlatRateIntegralsAndDiscounts) {
    const RateCurve curve = RateCurve::flat(0.05);
    EXPECT_DOUBLE_EQ(curve.rate(-3.0), 0.05);
    EXPECT_DOUBLE_EQ(curve.rate(7.0), 0.05);
    EXPECT_NEAR(curve.integral(0.0, 2.0), 0.1, 1e-15);
    EXPECT_NEAR(curve.discount(0.0, 2.0), std::exp(-0.1), 1e-15);
    EXPECT_DOUBLE_EQ(curve.integral(1.5, 1.5), 0.0);
}

TEST(RateCurve, PiecewiseSegmentsAndBoundarySpanningIntegral) {
    // 2% until t=1, 4% on [1,2), 3% afterwards.
    const RateCurve curve({0.0, 1.0, 2.0}, {0.02, 0.04, 0.03});
    EXPECT_DOUBLE_EQ(curve.rate(0.5), 0.02);
    EXPECT_DOUBLE_EQ(curve.rate(1.0), 0.04);
    EXPECT_DOUBLE_EQ(curve.rate(2.5), 0.03);
    EXPECT_DOUBLE_EQ(curve.rate(-1.0), 0.02);
    EXPECT_NEAR(curve.integral(0.5, 2.5), 0.5 * 0.02 + 1.0 * 0.04 + 0.5 * 0.03, 1e-15);
    EXPECT_NEAR(curve.integral(-1.0, 0.5), 1.5 * 0.02, 1e-15);
    EXPECT_THROW(curve.integral(2.0, 1.0), InvalidInput);
}

TEST(RateCurve, RejectsMalformedInput) {
    EXPECT_THROW(RateCurve({}, {}), InvalidInput);
    EXPECT_THROW(RateCurve({0.0, 0.0}, {0.01, 0.02}), InvalidInput);
    EXPECT_THROW(RateCurve({0.0}, {0.01, 0.02}), InvalidInput);
    EXPECT_THROW(RateCurve({0.0}, {std::nan("")}), InvalidInput);
}

TEST(MarketState, ValidatesSpot) {
    EXPECT_THROW(MarketState(0.0, 0.0), InvalidInput);
    EXPECT_THROW(MarketState(0.0, -5.0), InvalidInput);
    const MarketState m(0.25, 100.0, RateCurve::flat(0.04));
    EXPECT_NEAR(m.discount_to(1.25), std::exp(-0.04), 1e-15);
}

TEST(PricePath, ValidationAndRealizedQuantities) {
    PricePath path;
    path.times = {0.0, 1.0, 2.0, 3.0, 4.0};
    path.prices = {100.0, 110.0, 99.0, 105.0, 102.0};
    path.validate();
    const double qv = realized_quadratic_variation(path);
    EXPECT_NEAR(qv, 100.0 + 121.0 + 36.0 + 9.0, 1e-12);

    PricePath bad = path;
    bad.prices[2] = -1.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = path;
    bad.times[2] = bad.times[1];
    EXPECT_THROW(bad.validate(), InvalidInput);
}

TEST(HistoricalVolatility, MatchesHandComputedReturns) {
    // Log returns alternate +0.1/-0.1 around zero mean, spacing h = 0.5.
    PricePath path;
    path.times = {0.0, 0.5, 1.0, 1.5, 2.0};
    path.prices.push_back(100.0);
    const double steps[] = {0.1, -0.1, 0.1, -0.1};
    for (double s : steps) path.prices.push_back(path.prices.back() * std::exp(s));
    // Returns have mean 0 and unbiased variance 4 * 0.01 / 3.
    const double expected = std::sqrt((0.04 / 3.0) / 0.5);
    EXPECT_NEAR(historical_volatility(path), expected, 1e-12);
}

TEST(HistoricalVolatility, RecoversSimulatedSigma) {
    CounterRng rng(5, 0);
    PricePath path;
    const double sigma = 0.3;
    const double h = 1.0 / 252.0;
    double x = 100.0;
    for (int i = 0; i < 20000; ++i) {
        path.times.push_back(i * h);
        path.prices.push_back(x);
        x *= std::exp(sigma * std::sqrt(h) * rng.gaussian());
    }
    EXPECT_NEAR(historical_volatility(path), sigma, 0.01);
}

TEST(HistoricalVolatility, RequiresUniformSpacingAndEnoughSamples) {
    PricePath path;
    path.times = {0.0, 1.0, 2.5};
    path.prices = {100.0, 101.0, 102.0};
    EXPECT_THROW(historical_volatility(path), InvalidInput);
    PricePath two;
    two.times = {0.0, 1.0};
    two.prices = {100.0, 101.0};
    EXPECT_THROW(historical_volatility(two), InvalidInput);
}

// ---------------------------------------------------------------------------
// Payoffs
// ---------------------------------------------------------------------------

TEST(Payoff, FactoriesEvaluateCorrectly) {
    const Payoff call = Payoff::call(100.0);
    EXPECT_DOUBLE_EQ(call.evaluate(50.0), 0.0);
    EXPECT_DOUBLE_EQ(call.evaluate(100.0), 0.0);
    EXPECT_DOUBLE_EQ(call.evaluate(150.0), 50.0);
    EXPECT_DOUBLE_EQ(call.evaluate(250.0), 150.0);

    const Payoff put = Payoff::put(100.0);
    EXPECT_DOUBLE_EQ(put.evaluate(0.0), 100.0);
    EXPECT_DOUBLE_EQ(put.evaluate(60.0), 40.0);
    EXPECT_DOUBLE_EQ(put.evaluate(130.0), 0.0);

    const Payoff bfly = Payoff::butterfly(90.0, 100.0, 110.0);
    EXPECT_DOUBLE_EQ(bfly.evaluate(90.0), 0.0);
    EXPECT_DOUBLE_EQ(bfly.evaluate(100.0), 10.0);
    EXPECT_DOUBLE_EQ(bfly.evaluate(95.0), 5.0);
    EXPECT_DOUBLE_EQ(bfly.evaluate(110.0), 0.0);
    EXPECT_DOUBLE_EQ(bfly.evaluate(500.0), 0.0);

    const Payoff fwd = Payoff::forward(100.0);
    EXPECT_DOUBLE_EQ(fwd.evaluate(0.0), -100.0);
    EXPECT_DOUBLE_EQ(fwd.evaluate(137.0), 37.0);

    const Payoff cash = Payoff::constant(7.0);
    EXPECT_DOUBLE_EQ(cash.evaluate(0.0), 7.0);
    EXPECT_DOUBLE_EQ(cash.evaluate(1e5), 7.0);
}

TEST(Payoff, SlopeAtIsRightContinuous) {
    const Payoff call = Payoff::call(100.0);
    EXPECT_DOUBLE_EQ(call.slope_at(99.999), 0.0);
    EXPECT_DOUBLE_EQ(call.slope_at(100.0), 1.0);
    EXPECT_DOUBLE_EQ(call.slope_at(200.0), 1.0);
    EXPECT_DOUBLE_EQ(Payoff::butterfly(90, 100, 110).slope_at(100.0), -1.0);
    EXPECT_DOUBLE_EQ(Payoff::call(100.0).max_abs_slope(), 1.0);
}

TEST(Payoff, ValidationCatchesBadKnots) {
    EXPECT_THROW(Payoff::from_points({10.0, 5.0}, {0.0, 0.0}, 0.0).validate(), InvalidInput);
    EXPECT_THROW(Payoff::from_points({-1.0, 5.0}, {0.0, 0.0}, 0.0).validate(), InvalidInput);
    EXPECT_THROW(Payoff::from_points({0.0, 5.0}, {0.0}, 0.0).validate(), InvalidInput);
    EXPECT_THROW(Payoff::call(100.0).evaluate(-1.0), InvalidInput);
}

TEST(Payoff, DecompositionIntoCallsReproducesValue) {
    const Payoff bfly = Payoff::butterfly(90.0, 100.0, 110.0);
    const CallDecomposition dec = decompose_into_calls(bfly);
    EXPECT_DOUBLE_EQ(dec.cash, 0.0);
    EXPECT_DOUBLE_EQ(dec.forward_units, 0.0);
    ASSERT_EQ(dec.kinks.size(), 3u);
    EXPECT_DOUBLE_EQ(dec.kinks[0].strike, 90.0);
    EXPECT_DOUBLE_EQ(dec.kinks[0].size, 1.0);
    EXPECT_DOUBLE_EQ(dec.kinks[1].size, -2.0);
    EXPECT_DOUBLE_EQ(dec.kinks[2].size, 1.0);

    // Random piecewise-linear payoffs: cash + forward + calls re-evaluates
    // to the original payoff everywhere.
    CounterRng rng(77, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs = {0.0};
        std::vector<double> vs = {20.0 * (rng.uniform() - 0.5)};
        for (int k = 0; k < 6; ++k) {
            xs.push_back(xs.back() + 5.0 + 40.0 * rng.uniform());
            vs.push_back(30.0 * (rng.uniform() - 0.5));
        }
        const double tail = 2.0 * (rng.uniform() - 0.5);
        const Payoff payoff = Payoff::from_points(xs, vs, tail);
        const CallDecomposition d = decompose_into_calls(payoff);
        for (double x = 0.0; x <= 400.0; x += 7.3) {
            double rebuilt = d.cash + d.forward_units * x;
            for (const auto& kink : d.kinks) {
                rebuilt += kink.size * std::max(x - kink.strike, 0.0);
            }
            ASSERT_NEAR(rebuilt, payoff.evaluate(x), 1e-10);
        }
    }
}

// ---------------------------------------------------------------------------
// Quote surfaces
// ---------------------------------------------------------------------------

TEST(QuoteSurface, SortsGroupsAndDetectsDuplicates) {
    const MarketState market(0.0, 100.0);
    std::vector<OptionQuote> quotes = {
        {1.0, 110.0, QuoteKind::call, 5.0, 1.0},
        {0.5, 100.0, QuoteKind::call, 6.0, 1.0},
        {1.0, 90.0, QuoteKind::call, 14.0, 1.0},
    };
    const QuoteSurface surface = QuoteSurface::build(market, quotes);
    ASSERT_EQ(surface.maturities.size(), 2u);
    EXPECT_DOUBLE_EQ(surface.maturities[0], 0.5);
    EXPECT_DOUBLE_EQ(surface.rows[1][0].strike, 90.0);
    EXPECT_DOUBLE_EQ(surface.rows[1][1].strike, 110.0);
    EXPECT_EQ(surface.size(), 3u);

    quotes.push_back({1.0, 110.0, QuoteKind::call, 5.1, 1.0});
    EXPECT_THROW(QuoteSurface::build(market, quotes), InvalidInput);
}

TEST(QuoteSurface, FlagsStaticArbitrageInWarnings) {
    const MarketState market(0.0, 100.0);
    // A call above the spot violates the model-free upper bound.
    const QuoteSurface bad =
        QuoteSurface::build(market, {{1.0, 90.0, QuoteKind::call, 105.0, 1.0}});
    EXPECT_FALSE(bad.warnings.empty());

    // Calls must be non-increasing in strike.
    const QuoteSurface nonmono = QuoteSurface::build(
        market, {{1.0, 90.0, QuoteKind::call, 10.0, 1.0},
                 {1.0, 110.0, QuoteKind::call, 12.0, 1.0}});
    EXPECT_FALSE(nonmono.warnings.empty());

    const QuoteSurface clean = QuoteSurface::build(
        market, {{1.0, 90.0, QuoteKind::call, 14.0, 1.0},
                 {1.0, 110.0, QuoteKind::call, 5.0, 1.0}});
    EXPECT_TRUE(clean.warnings.empty());
}

TEST(QuoteSurface, RejectsNonPositiveInputs) {
    const MarketState market(0.0, 100.0);
    EXPECT_THROW(QuoteSurface::build(market, {{-1.0, 100.0, QuoteKind::call, 5.0, 1.0}}),
                 InvalidInput);
    EXPECT_THROW(QuoteSurface::build(market, {{1.0, -100.0, QuoteKind::call, 5.0, 1.0}}),
                 InvalidInput);
    EXPECT_THROW(QuoteSurface::build(market, {{1.0, 100.0, QuoteKind::call, -5.0, 1.0}}),
                 InvalidInput);
}
