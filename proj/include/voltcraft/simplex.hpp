#pragma once

// Dense two-phase tableau simplex for small linear programs, with dual
// multipliers read off the final reduced costs. Maximization form with
// nonnegative variables and eq / le / ge rows. Dantzig pricing with a
// permanent switch to Bland's rule after a stall, which guarantees
// termination.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "voltcraft/errors.hpp"

namespace voltcraft {

enum class LpRelation { eq, le, ge };
enum class LpStatus { optimal, infeasible, unbounded };

// maximize objective . x  subject to  rows_i . x (relation_i) rhs_i, x >= 0
struct LpProblem {
    std::vector<double> objective;
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    std::vector<LpRelation> relations;
};

struct LpSolution {
    LpStatus status = LpStatus::optimal;
    double value = 0.0;
    std::vector<double> x;
    std::vector<double> dual;       // one multiplier per row, max-problem sign
    double duality_gap = 0.0;       // |primal value - dual value|
    double primal_residual = 0.0;   // worst constraint violation
    double dual_residual = 0.0;     // worst reduced-cost / sign violation
    int iterations = 0;
};

namespace detail {

struct Tableau {
    std::size_t m = 0;
    std::size_t cols = 0;                // structural + slack + artificial
    std::vector<double> a;               // m x (cols + 1), last column = rhs
    std::vector<std::size_t> basis;      // basic column per row
    std::vector<double> cost1;           // phase-1 reduced costs
    std::vector<double> cost2;           // phase-2 reduced costs
    std::size_t n_struct = 0;
    std::size_t art_begin = 0;           // artificial columns start here

    double& at(std::size_t i, std::size_t j) { return a[i * (cols + 1) + j]; }
    double at(std::size_t i, std::size_t j) const { return a[i * (cols + 1) + j]; }
    double& rhs(std::size_t i) { return a[i * (cols + 1) + cols]; }
    double rhs(std::size_t i) const { return a[i * (cols + 1) + cols]; }

    void pivot(std::size_t p, std::size_t q) {
        const double pv = at(p, q);
        const double inv = 1.0 / pv;
        for (std::size_t j = 0; j <= cols; ++j) at(p, j) *= inv;
        at(p, q) = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == p) continue;
            const double f = at(i, q);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= cols; ++j) at(i, j) -= f * at(p, j);
            at(i, q) = 0.0;
        }
        const double f1 = cost1[q];
        if (f1 != 0.0) {
            for (std::size_t j = 0; j < cols; ++j) cost1[j] -= f1 * at(p, j);
            cost1[q] = 0.0;
        }
        const double f2 = cost2[q];
        if (f2 != 0.0) {
            for (std::size_t j = 0; j < cols; ++j) cost2[j] -= f2 * at(p, j);
            cost2[q] = 0.0;
        }
        basis[p] = q;
    }
};

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& problem) {
    const std::size_t n = problem.objective.size();
    const std::size_t m = problem.rows.size();
    if (n == 0) {
        throw InvalidInput("solve_lp: objective is empty");
    }
    if (problem.rhs.size() != m || problem.relations.size() != m) {
        throw InvalidInput("solve_lp: rows, rhs and relations must have equal length");
    }
    for (const auto& row : problem.rows) {
        if (row.size() != n) {
            throw InvalidInput("solve_lp: every row must match the objective length");
        }
    }
    for (double v : problem.objective) {
        if (!std::isfinite(v)) throw InvalidInput("solve_lp: non-finite objective");
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (!std::isfinite(problem.rhs[i])) throw InvalidInput("solve_lp: non-finite rhs");
        for (double v : problem.rows[i]) {
            if (!std::isfinite(v)) throw InvalidInput("solve_lp: non-finite row entry");
        }
    }

    // Normalize to rhs >= 0, recording the sign flip for dual recovery.
    std::vector<double> row_sign(m, 1.0);
    std::vector<LpRelation> rel(problem.relations);
    for (std::size_t i = 0; i < m; ++i) {
        if (problem.rhs[i] < 0.0) {
            row_sign[i] = -1.0;
            if (rel[i] == LpRelation::le) {
                rel[i] = LpRelation::ge;
            } else if (rel[i] == LpRelation::ge) {
                rel[i] = LpRelation::le;
            }
        }
    }

    std::size_t n_slack = 0;
    for (auto r : rel) {
        if (r != LpRelation::eq) ++n_slack;
    }
    detail::Tableau t;
    t.m = m;
    t.n_struct = n;
    t.art_begin = n + n_slack;
    t.cols = t.art_begin + m;  // one artificial column per row, used as needed
    t.a.assign(m * (t.cols + 1), 0.0);
    t.basis.assign(m, 0);
    t.cost1.assign(t.cols, 0.0);
    t.cost2.assign(t.cols, 0.0);

    // row_anchor[i]: the slack or artificial column whose reduced cost yields
    // the dual of row i; anchor_sign converts it to the min-problem dual.
    std::vector<std::size_t> row_anchor(m, 0);
    std::vector<double> anchor_sign(m, 1.0);
    std::vector<std::uint8_t> has_artificial(m, 0);

    std::size_t slack_next = n;
    double b_scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) t.at(i, j) = row_sign[i] * problem.rows[i][j];
        t.rhs(i) = row_sign[i] * problem.rhs[i];
        b_scale = std::max(b_scale, std::abs(t.rhs(i)));
        if (rel[i] == LpRelation::le) {
            t.at(i, slack_next) = 1.0;
            t.basis[i] = slack_next;
            row_anchor[i] = slack_next;
            anchor_sign[i] = -1.0;  // y_i = -reduced_cost(slack)
            ++slack_next;
        } else {
            if (rel[i] == LpRelation::ge) {
                t.at(i, slack_next) = -1.0;  // surplus
                ++slack_next;
            }
            const std::size_t art = t.art_begin + i;
            t.at(i, art) = 1.0;
            t.basis[i] = art;
            has_artificial[i] = 1;
            row_anchor[i] = art;
            anchor_sign[i] = -1.0;  // y_i = -reduced_cost(artificial)
        }
    }

    // Phase-2 costs: minimize -objective. Phase-1 costs: minimize the sum of
    // artificials; with artificials basic, reduced costs are column sums of
    // the artificial rows, negated.
    for (std::size_t j = 0; j < n; ++j) t.cost2[j] = -problem.objective[j];
    for (std::size_t j = 0; j < t.cols; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (has_artificial[i]) acc += t.at(i, j);
        }
        t.cost1[j] = -acc;
    }
    for (std::size_t i = 0; i < m; ++i) {
        if (has_artificial[i]) t.cost1[t.art_begin + i] = 0.0;
    }

    const double pivot_tol = 1e-11;
    const double cost_tol = 1e-9;
    const double feas_tol = 1e-9 * b_scale;
    const int iter_cap = 10000 + 50 * static_cast<int>(m + n);
    int iterations = 0;

    auto objective_value = [&](const std::vector<double>& costs_basis) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += costs_basis[t.basis[i]] * t.rhs(i);
        return acc;
    };
    std::vector<double> phase1_basis_cost(t.cols, 0.0);
    for (std::size_t i = 0; i < m; ++i) phase1_basis_cost[t.art_begin + i] = 1.0;
    std::vector<double> phase2_basis_cost(t.cols, 0.0);
    for (std::size_t j = 0; j < n; ++j) phase2_basis_cost[j] = -problem.objective[j];

    auto run_phase = [&](int phase) -> LpStatus {
        std::vector<double>& cost = phase == 1 ? t.cost1 : t.cost2;
        const std::vector<double>& basis_cost =
            phase == 1 ? phase1_basis_cost : phase2_basis_cost;
        bool bland = false;
        int stall = 0;
        double last_obj = objective_value(basis_cost);
        while (true) {
            if (++iterations > iter_cap) {
                throw NumericError("solve_lp: iteration cap reached");
            }
            // Entering column.
            std::size_t q = t.cols;
            if (!bland) {
                double best = -cost_tol;
                for (std::size_t j = 0; j < t.cols; ++j) {
                    if (phase == 2 && j >= t.art_begin) continue;
                    if (cost[j] < best) {
                        best = cost[j];
                        q = j;
                    }
                }
            } else {
                for (std::size_t j = 0; j < t.cols; ++j) {
                    if (phase == 2 && j >= t.art_begin) continue;
                    if (cost[j] < -cost_tol) {
                        q = j;
                        break;
                    }
                }
            }
            if (q == t.cols) return LpStatus::optimal;
            // Ratio test; prefer kicking artificials out, then Bland order.
            std::size_t p = m;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                const double aiq = t.at(i, q);
                if (aiq > pivot_tol) {
                    const double ratio = t.rhs(i) / aiq;
                    if (ratio < best_ratio - 1e-12) {
                        best_ratio = ratio;
                        p = i;
                    } else if (ratio < best_ratio + 1e-12 && p < m) {
                        const bool cand_art = t.basis[i] >= t.art_begin;
                        const bool cur_art = t.basis[p] >= t.art_begin;
                        if ((cand_art && !cur_art) ||
                            (cand_art == cur_art && t.basis[i] < t.basis[p])) {
                            p = i;
                        }
                    }
                }
            }
            if (p == m) {
                if (phase == 1) {
                    throw NumericError("solve_lp: phase-1 subproblem unbounded");
                }
                return LpStatus::unbounded;
            }
            t.pivot(p, q);
            const double obj = objective_value(basis_cost);
            if (obj < last_obj - 1e-13 * (1.0 + std::abs(last_obj))) {
                stall = 0;
            } else if (++stall > 50) {
                bland = true;
            }
            last_obj = obj;
        }
    };

    LpSolution out;
    run_phase(1);
    if (objective_value(phase1_basis_cost) > feas_tol) {
        out.status = LpStatus::infeasible;
        out.iterations = iterations;
        return out;
    }
    // Drive basic artificials out where the row has usable structure.
    for (std::size_t i = 0; i < m; ++i) {
        if (t.basis[i] < t.art_begin) continue;
        for (std::size_t j = 0; j < t.art_begin; ++j) {
            if (std::abs(t.at(i, j)) > 1e-7) {
                t.pivot(i, j);
                break;
            }
        }
    }
    out.status = run_phase(2);
    out.iterations = iterations;
    if (out.status == LpStatus::unbounded) return out;

    out.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        if (t.basis[i] < n) out.x[t.basis[i]] = t.rhs(i);
    }
    out.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) out.value += problem.objective[j] * out.x[j];

    // Duals of the max problem: negate the min-problem multipliers and undo
    // any row flips.
    out.dual.assign(m, 0.0);
    double dual_value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double y_min = anchor_sign[i] * t.cost2[row_anchor[i]];
        const double y_max = -y_min * row_sign[i];
        out.dual[i] = y_max;
        dual_value += y_max * problem.rhs[i];
    }
    out.duality_gap = std::abs(out.value - dual_value);

    // Certificate residuals.
    for (std::size_t i = 0; i < m; ++i) {
        double ax = 0.0;
        for (std::size_t j = 0; j < n; ++j) ax += problem.rows[i][j] * out.x[j];
        const double diff = ax - problem.rhs[i];
        double viol = 0.0;
        switch (problem.relations[i]) {
            case LpRelation::eq: viol = std::abs(diff); break;
            case LpRelation::le: viol = std::max(0.0, diff); break;
            case LpRelation::ge: viol = std::max(0.0, -diff); break;
        }
        out.primal_residual = std::max(out.primal_residual, viol);
        if (problem.relations[i] == LpRelation::le) {
            out.dual_residual = std::max(out.dual_residual, -out.dual[i]);
        } else if (problem.relations[i] == LpRelation::ge) {
            out.dual_residual = std::max(out.dual_residual, out.dual[i]);
        }
    }
    for (double xv : out.x) {
        out.primal_residual = std::max(out.primal_residual, -xv);
    }
    for (std::size_t j = 0; j < n; ++j) {
        double aty = 0.0;
        for (std::size_t i = 0; i < m; ++i) aty += problem.rows[i][j] * out.dual[i];
        out.dual_residual = std::max(out.dual_residual, problem.objective[j] - aty);
    }
    return out;
}

}  // namespace voltcraft
