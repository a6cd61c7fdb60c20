#pragma once

// Shared numerical kernels: normal distribution, tridiagonal solves,
// adaptive quadrature, divided differences, a splittable counter RNG and a
// chunked parallel-for. Everything here is deterministic and allocation-light.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "voltcraft/errors.hpp"

namespace voltcraft {

inline constexpr double kPi = 3.14159265358979323846;

inline double norm_pdf(double z) {
    static const double inv_sqrt_2pi = 0.3989422804014326779399461;
    return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

// Standard normal CDF via erfc; accurate in both tails.
inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z * 0.7071067811865475244008444);
}

// Inverse standard normal CDF, Wichura's PPND16 rational approximation.
// Relative error below 1e-15 across (0, 1).
inline double norm_inv(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw InvalidInput("norm_inv: probability must lie strictly in (0, 1)");
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
        return q * num / den;
    }
    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return (q < 0.0) ? -val : val;
}

// Linear interpolation in the p + t*(q - p) form: exact at t = 0 and t = 1,
// and reproduces constants exactly for p == q.
inline double lerp_at(double p, double q, double t) {
    return p + t * (q - p);
}

// ---------------------------------------------------------------------------
// Tridiagonal systems
// ---------------------------------------------------------------------------

// Thomas algorithm. lower[0] and upper[n-1] are ignored. Overwrites rhs with
// the solution. Throws NumericError on a vanishing pivot.
inline void solve_tridiagonal(const std::vector<double>& lower,
                              const std::vector<double>& diag,
                              const std::vector<double>& upper,
                              std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    if (n == 0 || lower.size() != n || upper.size() != n || rhs.size() != n) {
        throw InvalidInput("solve_tridiagonal: inconsistent band sizes");
    }
    static thread_local std::vector<double> scratch;
    scratch.resize(n);
    double pivot = diag[0];
    if (pivot == 0.0 || !std::isfinite(pivot)) {
        throw NumericError("solve_tridiagonal: zero or non-finite pivot at row 0");
    }
    rhs[0] /= pivot;
    for (std::size_t i = 1; i < n; ++i) {
        scratch[i] = upper[i - 1] / pivot;
        pivot = diag[i] - lower[i] * scratch[i];
        if (pivot == 0.0 || !std::isfinite(pivot)) {
            throw NumericError("solve_tridiagonal: zero or non-finite pivot");
        }
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for (std::size_t i = n - 1; i-- > 0;) {
        rhs[i] -= scratch[i + 1] * rhs[i + 1];
    }
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

namespace detail {

template <class F>
double simpson_panel(const F& f, double a, double fa, double b, double fb, double m, double fm) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb,
                            double m, double fm, double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson_panel(f, a, fa, m, fm, lm, flm);
    const double right = simpson_panel(f, m, fm, b, fb, rm, frm);
    const double delta = left + right - whole;
    if (depth <= 0) {
        throw NumericError("adaptive_simpson: recursion depth exhausted");
    }
    if (std::abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Adaptive Simpson quadrature with Richardson correction. The tolerance is
// interpreted relative to the accumulated integral magnitude, with abs_floor
// as an absolute escape hatch near zero.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol,
                        double abs_floor = 1e-300, int max_depth = 48) {
    if (!(std::isfinite(a) && std::isfinite(b))) {
        throw InvalidInput("adaptive_simpson: non-finite interval");
    }
    if (a == b) return 0.0;
    // A fixed 64-panel composite pass runs first. It sets the magnitude scale
    // for the relative tolerance and seeds the refinement, so features much
    // narrower than the interval are neither mis-scaled nor skipped outright.
    constexpr int panels = 64;
    std::array<double, 2 * panels + 1> xs;
    std::array<double, 2 * panels + 1> fs;
    for (int i = 0; i <= 2 * panels; ++i) {
        xs[i] = i == 2 * panels ? b : a + (b - a) * i / (2.0 * panels);
        fs[i] = f(xs[i]);
    }
    std::array<double, panels> part;
    double scan = 0.0;
    for (int i = 0; i < panels; ++i) {
        part[i] = detail::simpson_panel(f, xs[2 * i], fs[2 * i], xs[2 * i + 2], fs[2 * i + 2],
                                        xs[2 * i + 1], fs[2 * i + 1]);
        scan += part[i];
    }
    const double tol = std::max(std::abs(scan) * rel_tol, abs_floor) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        total += detail::adaptive_simpson_rec(f, xs[2 * i], fs[2 * i], xs[2 * i + 2],
                                              fs[2 * i + 2], xs[2 * i + 1], fs[2 * i + 1],
                                              part[i], tol, max_depth);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Divided differences on non-uniform 3-point stencils
// ---------------------------------------------------------------------------

// First derivative at the middle point; hm, hp are the left/right spacings.
inline double fd_first(double fm, double f0, double fp, double hm, double hp) {
    return (hm * hm * fp - hp * hp * fm + (hp * hp - hm * hm) * f0) /
           (hm * hp * (hm + hp));
}

// Second derivative at the middle point.
inline double fd_second(double fm, double f0, double fp, double hm, double hp) {
    return 2.0 * (hm * fp + hp * fm - (hm + hp) * f0) / (hm * hp * (hm + hp));
}

// ---------------------------------------------------------------------------
// Splittable counter-based RNG
// ---------------------------------------------------------------------------

namespace detail {

inline std::uint64_t mix64(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

}  // namespace detail

// Counter-mode generator in the SplittableRandom family: each (seed, stream)
// pair is an independent sequence, and drawing from stream i never touches
// stream j. This keeps path i identical no matter how many paths a batch
// holds, and identical across platforms (pure 64-bit integer arithmetic).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : base_(detail::mix64(seed ^ detail::mix64(stream * 0x9E3779B97F4A7C15ULL + 0x243F6A8885A308D3ULL))) {}

    std::uint64_t next_u64() {
        counter_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(base_ + counter_);
    }

    // Uniform on the open interval (0, 1); never returns an endpoint.
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the inverse-CDF transform. One u64 per draw.
    double gaussian() { return norm_inv(uniform()); }

private:
    std::uint64_t base_;
    std::uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// Chunked parallel-for
// ---------------------------------------------------------------------------

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. threads <= 1 runs inline. Exceptions from workers are rethrown.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(std::max(threads, 1), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// Sample mean and the standard error of the mean (unbiased variance, n >= 2).
struct MeanEstimate {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanEstimate mean_and_se(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    if (n < 2) {
        throw InvalidInput("mean_and_se: need at least two samples");
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : xs) {
        const double d = x - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n - 1);
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

}  // namespace voltcraft
