#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/math.hpp"

using namespace voltcraft;

// Reference values computed with 40-digit arithmetic.
TEST(NormCdf, FrozenValues) {
    EXPECT_DOUBLE_EQ(norm_cdf(0.0), 0.5);
    EXPECT_NEAR(norm_cdf(1.0), 0.8413447460685429, 1e-15);
    EXPECT_NEAR(norm_cdf(-1.96), 0.02499789514822043, 1e-16);
    EXPECT_NEAR(norm_cdf(3.0), 0.9986501019683699, 1e-15);
    EXPECT_NEAR(norm_cdf(0.1), 0.5398278372770290, 1e-15);
}

TEST(NormCdf, SymmetryAndTails) {
    for (double z : {0.1, 0.7, 1.3, 2.9, 5.0}) {
        EXPECT_NEAR(norm_cdf(z) + norm_cdf(-z), 1.0, 1e-15);
    }
    EXPECT_GT(norm_cdf(-8.0), 0.0);
    EXPECT_LT(norm_cdf(-8.0), 1e-14);
}

TEST(NormInv, FrozenValues) {
    EXPECT_DOUBLE_EQ(norm_inv(0.5), 0.0);
    EXPECT_NEAR(norm_inv(0.975), 1.959963984540054, 1e-12);
    EXPECT_NEAR(norm_inv(0.95), 1.6448536269514722, 1e-12);
    EXPECT_NEAR(norm_inv(0.025), -1.959963984540054, 1e-12);
}

TEST(NormInv, RoundTripAcrossAllRegions) {
    // Probes the central, intermediate and far-tail branches.
    const std::vector<double> ps = {1e-15, 1e-9, 1e-4, 0.02, 0.2, 0.5,
                                    0.8,   0.98, 1.0 - 1e-4, 1.0 - 1e-9};
    for (double p : ps) {
        const double z = norm_inv(p);
        EXPECT_NEAR(norm_cdf(z), p, 2e-13 * std::max(p, 1e-3)) << "p=" << p;
    }
}

TEST(NormInv, RejectsOutsideOpenUnitInterval) {
    EXPECT_THROW(norm_inv(0.0), InvalidInput);
    EXPECT_THROW(norm_inv(1.0), InvalidInput);
    EXPECT_THROW(norm_inv(-0.1), InvalidInput);
    EXPECT_THROW(norm_inv(std::nan("")), InvalidInput);
}

TEST(Lerp, ReproducesConstantsBitwise) {
    for (double t : {0.0, 0.3, 0.5, 0.77, 1.0}) {
        EXPECT_EQ(lerp_at(0.1, 0.1, t), 0.1);
        EXPECT_EQ(lerp_at(-7.3, -7.3, t), -7.3);
    }
    EXPECT_DOUBLE_EQ(lerp_at(2.0, 4.0, 0.25), 2.5);
}

TEST(Tridiagonal, RecoversKnownSolution) {
    const std::size_t n = 50;
    CounterRng rng(11, 0);
    std::vector<double> lower(n), diag(n), upper(n), x(n);
    for (std::size_t i = 0; i < n; ++i) {
        lower[i] = rng.uniform() - 0.5;
        upper[i] = rng.uniform() - 0.5;
        diag[i] = 3.0 + rng.uniform();  // diagonally dominant
        x[i] = 2.0 * rng.uniform() - 1.0;
    }
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = diag[i] * x[i];
        if (i > 0) rhs[i] += lower[i] * x[i - 1];
        if (i + 1 < n) rhs[i] += upper[i] * x[i + 1];
    }
    solve_tridiagonal(lower, diag, upper, rhs);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(rhs[i], x[i], 1e-12);
}

TEST(Tridiagonal, ReportsSingularMatrix) {
    std::vector<double> lower = {0.0, 1.0};
    std::vector<double> diag = {0.0, 1.0};
    std::vector<double> upper = {1.0, 0.0};
    std::vector<double> rhs = {1.0, 1.0};
    EXPECT_THROW(solve_tridiagonal(lower, diag, upper, rhs), NumericError);
    std::vector<double> bad_size = {1.0};
    EXPECT_THROW(solve_tridiagonal(lower, diag, upper, bad_size), InvalidInput);
}

TEST(AdaptiveSimpson, ExactOnPolynomialsAndFrozenIntegrals) {
    const double cubic = adaptive_simpson([](double x) { return x * x * x; }, 0.0, 1.0, 1e-12);
    EXPECT_NEAR(cubic, 0.25, 1e-15);
    const double expo = adaptive_simpson([](double x) { return std::exp(x); }, 0.0, 1.0, 1e-12);
    EXPECT_NEAR(expo, 1.7182818284590452, 1e-12);
    const double sine = adaptive_simpson([](double x) { return std::sin(x); }, 0.0, kPi, 1e-10);
    EXPECT_NEAR(sine, 2.0, 1e-9);
}

TEST(AdaptiveSimpson, HandlesReversedIntervalAndSharpPeak) {
    const double forward = adaptive_simpson([](double x) { return x * x; }, 0.0, 2.0, 1e-12);
    const double backward = adaptive_simpson([](double x) { return x * x; }, 2.0, 0.0, 1e-12);
    EXPECT_NEAR(forward, -backward, 1e-13);
    // Narrow Gaussian bump, integral almost exactly one.
    const auto peak = [](double x) { return std::exp(-5000.0 * (x - 0.37) * (x - 0.37)); };
    const double v = adaptive_simpson(peak, 0.0, 1.0, 1e-10);
    EXPECT_NEAR(v, std::sqrt(kPi / 5000.0), 1e-10);
}

TEST(DividedDifferences, ExactOnQuadratics) {
    // f(x) = 3x^2 - 2x + 1 on the uneven stencil {0, 0.3, 1.0}.
    const auto f = [](double x) { return 3.0 * x * x - 2.0 * x + 1.0; };
    const double d1 = fd_first(f(0.0), f(0.3), f(1.0), 0.3, 0.7);
    const double d2 = fd_second(f(0.0), f(0.3), f(1.0), 0.3, 0.7);
    EXPECT_NEAR(d1, 6.0 * 0.3 - 2.0, 1e-13);
    EXPECT_NEAR(d2, 6.0, 1e-12);
}

TEST(CounterRng, DeterministicAndStreamIndependent) {
    CounterRng a(42, 0);
    CounterRng b(42, 0);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());

    CounterRng c(42, 1);
    CounterRng d(43, 0);
    EXPECT_NE(a.next_u64(), c.next_u64());
    EXPECT_NE(a.next_u64(), d.next_u64());

    // Drawing from one stream never disturbs another.
    CounterRng s3(7, 3);
    std::vector<double> first;
    for (int i = 0; i < 10; ++i) first.push_back(s3.uniform());
    CounterRng s3_again(7, 3);
    CounterRng other(7, 4);
    for (int i = 0; i < 5; ++i) other.uniform();
    for (int i = 0; i < 10; ++i) EXPECT_EQ(first[i], s3_again.uniform());
}

TEST(CounterRng, UniformInOpenIntervalGaussianMoments) {
    CounterRng rng(1234, 0);
    double sum = 0.0;
    double sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double g = rng.gaussian();
        sum += g;
        sum2 += g * g;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.02);
    EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(ParallelFor, CoversRangeOncePropagatesExceptions) {
    const std::size_t n = 10000;
    std::vector<std::atomic<int>> hits(n);
    parallel_for(n, 4, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) hits[i].fetch_add(1);
    });
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(hits[i].load(), 1);

    EXPECT_THROW(parallel_for(100, 3,
                              [](std::size_t begin, std::size_t end) {
                                  for (std::size_t i = begin; i < end; ++i) {
                                      if (i == 50) throw NumericError("boom");
                                  }
                              }),
                 NumericError);
    // Degenerate cases: empty range, single thread.
    parallel_for(0, 4, [](std::size_t, std::size_t) { FAIL(); });
    std::size_t count = 0;
    parallel_for(7, 1, [&](std::size_t begin, std::size_t end) { count += end - begin; });
    EXPECT_EQ(count, 7u);
}

TEST(MeanAndSe, MatchesHandComputation) {
    const MeanEstimate m = mean_and_se({1.0, 2.0, 3.0, 4.0});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.se, 0.6454972243679028, 1e-15);
    EXPECT_THROW(mean_and_se({1.0}), InvalidInput);
}
