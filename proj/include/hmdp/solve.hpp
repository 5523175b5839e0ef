#pragma once

#include "hmdp/linear.hpp"
#include "hmdp/mdp.hpp"

#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

namespace hmdp {

/// Default residual threshold, in cost/reward units.
inline constexpr double kDefaultEpsilon = 0.01;

struct StopRule {
    double epsilon = kDefaultEpsilon;
    std::size_t max_iterations = 100'000;
};

/**
 * Work and convergence record of an iterative solve. One backup evaluation
 * is one (state, action) expected-value computation.
 */
struct SolveReport {
    std::size_t iterations = 0;
    std::size_t backup_evaluations = 0;
    bool converged = false;
    std::vector<double> residual_trace;
    /// Probe-state value after each iteration; empty when no probe was set.
    std::vector<double> value_trace;
};

struct Solution {
    ValueFunction values;
    Policy policy;
    SolveReport report;
};

/// R(s,a) + beta * sum_t T(s,a,t) v(t). Macro rows get the same single beta.
inline double action_value(const ActionRow& row, const ValueFunction& v, double discount) {
    double expected = 0.0;
    for (const auto& t : row.successors) expected += t.probability * v[t.state];
    return row.reward + discount * expected;
}

/// Optimal value at one state and the arg-opt action (lowest identifier on ties).
inline std::pair<double, ActionId> backup_state(const Mdp& mdp, StateId s, const ValueFunction& v) {
    auto rows = mdp.actions(s);
    double best = action_value(rows.front(), v, mdp.discount());
    ActionId arg = rows.front().action;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const double q = action_value(rows[i], v, mdp.discount());
        if (better(mdp.objective(), q, best)) {
            best = q;
            arg = rows[i].action;
        }
    }
    return {best, arg};
}

struct Backup {
    ValueFunction values;
    Policy policy;
};

/**
 * One synchronous (Jacobi) Bellman backup: every state reads only the
 * previous iterate.
 */
inline Backup bellman_backup(const Mdp& mdp, const ValueFunction& v) {
    check_values(mdp, v);
    Backup out{ValueFunction(mdp.state_count()), Policy(mdp.state_count())};
    for (StateId s = 0; s < mdp.state_count(); ++s) {
        if (mdp.actions(s).empty()) throw ValidationError("state " + std::to_string(s) + " has no feasible action");
        std::tie(out.values[s], out.policy[s]) = backup_state(mdp, s, v);
    }
    return out;
}

inline Policy greedy_policy(const Mdp& mdp, const ValueFunction& v) {
    return bellman_backup(mdp, v).policy;
}

inline double max_norm_distance(const ValueFunction& a, const ValueFunction& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

/**
 * Value iteration from `v0` until the max-norm change of one backup drops
 * below `stop.epsilon` or the iteration cap is hit (report.converged tells
 * which). The returned policy is greedy with respect to the last-but-one
 * iterate, i.e. the policy selected by the final backup.
 */
inline Solution value_iteration(const Mdp& mdp, ValueFunction v0, const StopRule& stop = {},
                                std::optional<StateId> probe = std::nullopt) {
    if (!(stop.epsilon > 0.0)) throw ValidationError("stopping threshold must be positive");
    check_values(mdp, v0);
    if (probe && *probe >= mdp.state_count()) throw ValidationError("probe state out of range");

    Solution sol;
    sol.values = std::move(v0);
    sol.policy.assign(mdp.state_count(), 0);
    const std::size_t per_iteration = mdp.pair_count();
    for (std::size_t it = 0; it < stop.max_iterations; ++it) {
        Backup next = bellman_backup(mdp, sol.values);
        const double residual = max_norm_distance(next.values, sol.values);
        sol.values = std::move(next.values);
        sol.policy = std::move(next.policy);
        ++sol.report.iterations;
        sol.report.backup_evaluations += per_iteration;
        sol.report.residual_trace.push_back(residual);
        if (probe) sol.report.value_trace.push_back(sol.values[*probe]);
        if (residual < stop.epsilon) {
            sol.report.converged = true;
            break;
        }
    }
    return sol;
}

enum class EvaluationMethod { direct, iterative };

/**
 * Value of a fixed policy: solves (I - beta P_pi) V = R_pi either directly
 * or by repeated fixed-policy backups until the change is below `tolerance`.
 */
inline ValueFunction evaluate_policy(const Mdp& mdp, const Policy& policy,
                                     EvaluationMethod method = EvaluationMethod::direct, double tolerance = 1e-10) {
    check_policy(mdp, policy);
    const std::size_t n = mdp.state_count();
    const double beta = mdp.discount();
    linalg::Matrix rhs(n, 1);
    for (StateId s = 0; s < n; ++s) rhs(s, 0) = mdp.find(s, policy[s])->reward;

    ValueFunction v(n);
    if (method == EvaluationMethod::direct) {
        linalg::Matrix a = linalg::Matrix::identity(n);
        for (StateId s = 0; s < n; ++s)
            for (const auto& t : mdp.find(s, policy[s])->successors) a(s, t.state) -= beta * t.probability;
        auto solved = linalg::solve_dense(std::move(a), std::move(rhs));
        for (StateId s = 0; s < n; ++s) v[s] = solved.x(s, 0);
    } else {
        linalg::SparseRows p(n);
        for (StateId s = 0; s < n; ++s)
            for (const auto& t : mdp.find(s, policy[s])->successors) p[s].emplace_back(t.state, beta * t.probability);
        auto solved = linalg::solve_fixed_point(p, rhs, tolerance);
        for (StateId s = 0; s < n; ++s) v[s] = solved.x(s, 0);
    }
    return v;
}

/// Constant value function beta-discounted from the extreme one-step reward.
inline ValueFunction bound_values(const Mdp& mdp, bool upper) {
    auto [lo, hi] = mdp.reward_range();
    const double r = upper ? hi : lo;
    return ValueFunction(mdp.state_count(), r / (1.0 - mdp.discount()));
}

} // namespace hmdp
