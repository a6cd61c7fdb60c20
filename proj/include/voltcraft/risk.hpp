#pragma once

// Risk measures on discrete P&L samples: value-at-risk, expected shortfall,
// the entropic measure, and worst-case expectation over a family of
// probability measures. A property checker probes the coherence axioms on
// random positions and reports witnesses, including the classic
// subadditivity failure of value-at-risk.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "voltcraft/errors.hpp"
#include "voltcraft/math.hpp"

namespace voltcraft {

// Outcomes are P&L values (gains positive). Empty probabilities mean the
// uniform distribution.
struct RiskSample {
    std::vector<double> outcomes;
    std::vector<double> probabilities;

    void validate() const {
        if (outcomes.empty()) throw InvalidInput("risk sample: no outcomes");
        for (double v : outcomes) {
            if (!std::isfinite(v)) throw InvalidInput("risk sample: non-finite outcome");
        }
        if (!probabilities.empty()) {
            if (probabilities.size() != outcomes.size()) {
                throw InvalidInput("risk sample: probabilities must match outcomes");
            }
            double total = 0.0;
            for (double p : probabilities) {
                if (!(p >= 0.0) || !std::isfinite(p)) {
                    throw InvalidInput("risk sample: probabilities must be >= 0");
                }
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw InvalidInput("risk sample: probabilities must sum to 1");
            }
        }
    }

    double probability(std::size_t i) const {
        return probabilities.empty() ? 1.0 / static_cast<double>(outcomes.size())
                                     : probabilities[i];
    }
};

namespace detail {

inline void check_level(double level) {
    if (!(level > 0.0 && level < 1.0)) {
        throw InvalidInput("risk level must lie in (0, 1)");
    }
}

// Outcomes sorted ascending with their probabilities carried along.
inline std::vector<std::pair<double, double>> sorted_outcomes(const RiskSample& sample) {
    std::vector<std::pair<double, double>> v(sample.outcomes.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = {sample.outcomes[i], sample.probability(i)};
    }
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace detail

// Smallest loss threshold not exceeded with probability `level`: the
// negative of the lower (1 - level)-quantile of the P&L.
inline double value_at_risk(const RiskSample& sample, double level) {
    sample.validate();
    detail::check_level(level);
    const auto sorted = detail::sorted_outcomes(sample);
    const double tail = 1.0 - level;
    double cum = 0.0;
    for (const auto& [x, p] : sorted) {
        cum += p;
        // The slack absorbs roundoff so that exact atom boundaries (e.g.
        // 5 of 100 uniform outcomes at level 95%) land on the atom itself.
        if (cum >= tail - 1e-12) return -x;
    }
    return -sorted.back().first;
}

// Average loss beyond value-at-risk, in the Rockafellar-Uryasev form
// VaR + E[(loss - VaR)^+] / (1 - level). Coherent, unlike the quantile.
inline double expected_shortfall(const RiskSample& sample, double level) {
    const double var = value_at_risk(sample, level);
    sample.validate();
    double excess = 0.0;
    for (std::size_t i = 0; i < sample.outcomes.size(); ++i) {
        excess += sample.probability(i) * std::max(-sample.outcomes[i] - var, 0.0);
    }
    return var + excess / (1.0 - level);
}

// log E[exp(-lambda X)] / lambda, computed with the max-shift trick so large
// lambda does not overflow. Convex but not positively homogeneous.
inline double entropic_risk(const RiskSample& sample, double lambda) {
    sample.validate();
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw InvalidInput("entropic risk: lambda must be positive and finite");
    }
    double shift = -std::numeric_limits<double>::infinity();
    for (double x : sample.outcomes) shift = std::max(shift, -lambda * x);
    double acc = 0.0;
    for (std::size_t i = 0; i < sample.outcomes.size(); ++i) {
        acc += sample.probability(i) * std::exp(-lambda * sample.outcomes[i] - shift);
    }
    return (shift + std::log(acc)) / lambda;
}

struct CoherentResult {
    double value = 0.0;
    std::size_t witness_index = 0;  // measure attaining the supremum
};

// Worst-case expected loss over a finite family of probability measures:
// max_Q E_Q[-X]. Every member must be a distribution over the outcomes.
inline CoherentResult coherent_risk(const std::vector<double>& outcomes,
                                    const std::vector<std::vector<double>>& measures) {
    if (outcomes.empty()) throw InvalidInput("coherent risk: no outcomes");
    if (measures.empty()) throw InvalidInput("coherent risk: no measures");
    CoherentResult best;
    best.value = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < measures.size(); ++m) {
        const auto& q = measures[m];
        if (q.size() != outcomes.size()) {
            throw InvalidInput("coherent risk: measure size must match outcomes");
        }
        double total = 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            if (!(q[i] >= 0.0)) throw InvalidInput("coherent risk: measures must be >= 0");
            total += q[i];
            acc += q[i] * -outcomes[i];
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw InvalidInput("coherent risk: each measure must sum to 1");
        }
        if (acc > best.value) {
            best.value = acc;
            best.witness_index = m;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Axiom checking
// ---------------------------------------------------------------------------

struct AxiomWitness {
    std::string axiom;
    std::vector<double> x;
    std::vector<double> y;  // empty for single-position axioms
    double lhs = 0.0;
    double rhs = 0.0;
};

struct AxiomReport {
    bool monotone = true;
    bool translation_invariant = true;
    bool positively_homogeneous = true;
    bool subadditive = true;
    bool convex = true;
    std::vector<AxiomWitness> witnesses;

    bool coherent() const {
        return monotone && translation_invariant && positively_homogeneous && subadditive;
    }
};

// Probes a risk functional rho on uniform samples of fixed dimension with
// random positions. Violations are recorded with the offending inputs; a
// clean report is evidence, not proof.
template <class Rho>
AxiomReport check_axioms(Rho&& rho, int trials = 200, std::size_t dim = 16,
                         std::uint64_t seed = 7, double tol = 1e-10) {
    if (trials < 1) throw InvalidInput("check_axioms: trials must be >= 1");
    if (dim < 2) throw InvalidInput("check_axioms: dimension must be >= 2");
    AxiomReport report;
    CounterRng rng(seed, 0);
    auto record = [&](bool& flag, const char* name, const std::vector<double>& x,
                      const std::vector<double>& y, double lhs, double rhs) {
        if (flag) report.witnesses.push_back({name, x, y, lhs, rhs});
        flag = false;
    };
    std::vector<double> x(dim), y(dim), z(dim);
    for (int t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] = 10.0 * rng.gaussian();
            y[i] = 10.0 * rng.gaussian();
        }
        const double rx = rho(x);
        const double ry = rho(y);

        // Monotonicity: shifting every outcome up cannot increase risk.
        const double bump = 1.0 + 4.0 * rng.uniform();
        for (std::size_t i = 0; i < dim; ++i) z[i] = x[i] + bump * rng.uniform();
        if (rho(z) > rx + tol) record(report.monotone, "monotonicity", x, z, rho(z), rx);

        // Translation: adding sure cash c lowers risk by exactly c.
        const double cash = 10.0 * (rng.uniform() - 0.5);
        for (std::size_t i = 0; i < dim; ++i) z[i] = x[i] + cash;
        if (std::abs(rho(z) - (rx - cash)) > tol) {
            record(report.translation_invariant, "translation", x, {}, rho(z), rx - cash);
        }

        // Positive homogeneity: scaling the position scales the risk.
        const double lam = 0.1 + 3.0 * rng.uniform();
        for (std::size_t i = 0; i < dim; ++i) z[i] = lam * x[i];
        if (std::abs(rho(z) - lam * rx) > tol * std::max(1.0, lam)) {
            record(report.positively_homogeneous, "homogeneity", x, {}, rho(z), lam * rx);
        }

        // Subadditivity: diversification cannot hurt.
        for (std::size_t i = 0; i < dim; ++i) z[i] = x[i] + y[i];
        if (rho(z) > rx + ry + tol) record(report.subadditive, "subadditivity", x, y, rho(z), rx + ry);

        // Convexity: blends are no riskier than the blend of risks.
        const double w = rng.uniform();
        for (std::size_t i = 0; i < dim; ++i) z[i] = w * x[i] + (1.0 - w) * y[i];
        if (rho(z) > w * rx + (1.0 - w) * ry + tol) {
            record(report.convex, "convexity", x, y, rho(z), w * rx + (1.0 - w) * ry);
        }
    }
    return report;
}

struct SubadditivityViolation {
    bool found = false;
    double var_x = 0.0;
    double var_y = 0.0;
    double var_sum = 0.0;
    double loss_probability = 0.0;
    double loss = 0.0;
    double gain = 0.0;
};

// Constructs the textbook failure: two independent positions that each gain
// a little with high probability and lose a lot with small probability p.
// When p is below the tail 1 - level, each position alone shows the gain as
// its quantile, but the sum loses whenever either leg does, and for
// moderate p that event does hit the tail. The product distribution over
// the four joint outcomes is enumerated exactly.
inline SubadditivityViolation var_subadditivity_violation(double level,
                                                          double loss_probability = -1.0,
                                                          double loss = 100.0,
                                                          double gain = 1.0) {
    detail::check_level(level);
    if (loss_probability < 0.0) loss_probability = 0.8 * (1.0 - level);
    if (!(loss_probability > 0.0 && loss_probability < 1.0)) {
        throw InvalidInput("var_subadditivity_violation: loss probability must lie in (0, 1)");
    }
    if (!(loss > 0.0) || !(gain > 0.0)) {
        throw InvalidInput("var_subadditivity_violation: loss and gain must be positive");
    }
    const double p = loss_probability;
    const double q = 1.0 - p;

    RiskSample single{{gain, -loss}, {q, p}};
    const double var_single = value_at_risk(single, level);

    RiskSample joint{{2.0 * gain, gain - loss, gain - loss, -2.0 * loss},
                     {q * q, q * p, p * q, p * p}};
    const double var_joint = value_at_risk(joint, level);

    SubadditivityViolation out;
    out.var_x = var_single;
    out.var_y = var_single;
    out.var_sum = var_joint;
    out.loss_probability = p;
    out.loss = loss;
    out.gain = gain;
    out.found = var_joint > var_single + var_single + 1e-12;
    return out;
}

}  // namespace voltcraft
