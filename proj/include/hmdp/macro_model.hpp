#pragma once

#include "hmdp/decomposition.hpp"
#include "hmdp/linear.hpp"
#include "hmdp/random.hpp"
#include "hmdp/solve.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace hmdp {

/**
 * A macro-action: a stationary local policy over one region, executed until
 * the process leaves the region. `states` lists the region's states in
 * increasing order and `actions` holds the chosen base action for each.
 */
struct Macro {
    std::string name;
    RegionId region = 0;
    std::vector<StateId> states;
    std::vector<ActionId> actions;
    /// Seed values (aligned with the region's exit list) that generated the
    /// macro; empty for hand-written macros.
    std::vector<double> seed;

    std::size_t index_of(StateId s) const {
        auto it = std::lower_bound(states.begin(), states.end(), s);
        return it != states.end() && *it == s ? static_cast<std::size_t>(it - states.begin()) : npos;
    }

    ActionId action_at(StateId s) const {
        const std::size_t i = index_of(s);
        if (i == npos) throw ValidationError("state " + std::to_string(s) + " is outside macro " + name);
        return actions[i];
    }

    bool same_policy(const Macro& other) const {
        return region == other.region && states == other.states && actions == other.actions;
    }
};

/// Local policy covering every state of the region with exact base actions.
inline void check_macro(const Mdp& mdp, const Decomposition& d, const Macro& m) {
    if (m.region >= d.region_count()) throw ValidationError("macro " + m.name + " names an unknown region");
    if (m.states != d.states(m.region))
        throw ValidationError("macro " + m.name + " does not cover exactly the states of region " +
                              std::to_string(m.region));
    if (m.actions.size() != m.states.size()) throw ValidationError("macro " + m.name + " has a ragged policy");
    for (std::size_t i = 0; i < m.states.size(); ++i) {
        const ActionRow* row = mdp.find(m.states[i], m.actions[i]);
        if (row == nullptr)
            throw ValidationError("macro " + m.name + " chooses infeasible action " + std::to_string(m.actions[i]) +
                                  " at state " + std::to_string(m.states[i]));
        if (row->row_class != RowClass::exact)
            throw ValidationError("macro " + m.name + " must choose base actions");
    }
}

/**
 * Discounted transition model T_i (states x exits, entries E[beta^(tau-1)
 * 1{exit}]) and discounted reward model R_i (reward accrued strictly
 * inside the region) of one macro.
 */
struct MacroModel {
    std::vector<StateId> states;
    std::vector<StateId> exits;
    linalg::Matrix transition;
    std::vector<double> reward;
    /// Row operations spent by the linear solver.
    std::size_t work_units = 0;

    std::size_t index_of(StateId s) const {
        auto it = std::lower_bound(states.begin(), states.end(), s);
        return it != states.end() && *it == s ? static_cast<std::size_t>(it - states.begin()) : npos;
    }

    double row_sum(std::size_t i) const {
        double sum = 0.0;
        for (std::size_t j = 0; j < exits.size(); ++j) sum += transition(i, j);
        return sum;
    }
};

struct ModeledMacro {
    Macro macro;
    MacroModel model;
};

/// Every macro of every region, in one flat list; position = macro index.
using MacroLibrary = std::vector<ModeledMacro>;

enum class ModelSolver { automatic, direct, iterative };

struct ModelSolverOptions {
    ModelSolver method = ModelSolver::automatic;
    double tolerance = 1e-10;          ///< iterative sweeps stop below this change
    std::size_t direct_limit = 512;    ///< automatic picks direct up to this region size
};

namespace detail {

/// Solves X = B + beta P_in X on the region, where column j of B is
/// T(s, pi(s), exit_j) for j < |exits| and, if `with_reward`, the last
/// column is R(s, pi(s)).
inline linalg::LinearSolution solve_region_system(const Mdp& mdp, const Periphery& periphery, const Macro& m,
                                                  bool with_exits, bool with_reward,
                                                  const ModelSolverOptions& options) {
    const auto& exits = periphery.exits.at(m.region);
    const std::size_t n = m.states.size();
    const std::size_t k = with_exits ? exits.size() : 0;
    const std::size_t cols = k + (with_reward ? 1 : 0);
    const double beta = mdp.discount();

    linalg::Matrix b(n, cols);
    linalg::SparseRows inside(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ActionRow* row = mdp.find(m.states[i], m.actions[i]);
        if (row == nullptr || row->row_class != RowClass::exact)
            throw ValidationError("macro " + m.name + " needs a feasible base action at state " +
                                  std::to_string(m.states[i]));
        for (const auto& t : row->successors) {
            const std::size_t local = m.index_of(t.state);
            if (local != npos) {
                inside[i].emplace_back(local, beta * t.probability);
                continue;
            }
            const std::size_t j = periphery.exit_index(m.region, t.state);
            if (j == npos && t.probability > 0.0)
                throw ValidationError("macro " + m.name + " reaches state " + std::to_string(t.state) +
                                      " outside the region's exit periphery");
            if (with_exits && j != npos) b(i, j) += t.probability;
        }
        if (with_reward) b(i, cols - 1) = row->reward;
    }

    const bool direct = options.method == ModelSolver::direct ||
                        (options.method == ModelSolver::automatic && n <= options.direct_limit);
    linalg::LinearSolution solved;
    if (direct) {
        linalg::Matrix a = linalg::Matrix::identity(n);
        for (std::size_t i = 0; i < n; ++i)
            for (const auto& [c, coef] : inside[i]) a(i, c) -= coef;
        solved = linalg::solve_dense(std::move(a), b);
    } else {
        solved = linalg::solve_fixed_point(inside, b, options.tolerance);
    }

    // Exits the macro cannot reach from a start state get an exact zero
    // rather than elimination round-off.
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<bool> reaches(n, false);
        for (std::size_t i = 0; i < n; ++i) reaches[i] = b(i, j) > 0.0;
        for (bool changed = true; changed;) {
            changed = false;
            for (std::size_t i = 0; i < n; ++i) {
                if (reaches[i]) continue;
                for (const auto& [c, coef] : inside[i]) {
                    if (coef > 0.0 && reaches[c]) {
                        reaches[i] = true;
                        changed = true;
                        break;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            if (!reaches[i]) solved.x(i, j) = 0.0;
    }
    return solved;
}

} // namespace detail

/// Transition part of the model: one linear system per exit state.
inline MacroModel compute_transition_model(const Mdp& mdp, const Periphery& periphery, const Macro& m,
                                           const ModelSolverOptions& options = {}) {
    auto solved = detail::solve_region_system(mdp, periphery, m, true, false, options);
    MacroModel model;
    model.states = m.states;
    model.exits = periphery.exits.at(m.region);
    model.transition = std::move(solved.x);
    model.work_units = solved.row_operations;
    return model;
}

/// Reward part of the model: a single linear system over the region.
inline MacroModel compute_reward_model(const Mdp& mdp, const Periphery& periphery, const Macro& m,
                                       const ModelSolverOptions& options = {}) {
    auto solved = detail::solve_region_system(mdp, periphery, m, false, true, options);
    MacroModel model;
    model.states = m.states;
    model.exits = periphery.exits.at(m.region);
    model.transition = linalg::Matrix(m.states.size(), model.exits.size());
    model.reward.resize(m.states.size());
    for (std::size_t i = 0; i < m.states.size(); ++i) model.reward[i] = solved.x(i, 0);
    model.work_units = solved.row_operations;
    return model;
}

/**
 * Full model of one macro. Both parts share one factorization, i.e. one
 * solve with |XPer| + 1 right-hand sides.
 */
inline MacroModel build_macro_model(const Mdp& mdp, const Decomposition& d, const Periphery& periphery,
                                    const Macro& m, const ModelSolverOptions& options = {}) {
    check_macro(mdp, d, m);
    auto solved = detail::solve_region_system(mdp, periphery, m, true, true, options);
    MacroModel model;
    model.states = m.states;
    model.exits = periphery.exits.at(m.region);
    const std::size_t n = m.states.size();
    const std::size_t k = model.exits.size();
    model.transition = linalg::Matrix(n, k);
    model.reward.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) model.transition(i, j) = solved.x(i, j);
        model.reward[i] = solved.x(i, k);
    }
    model.work_units = solved.row_operations;
    return model;
}

inline MacroLibrary build_macro_library(const Mdp& mdp, const Decomposition& d, const Periphery& periphery,
                                        std::vector<Macro> macros, const ModelSolverOptions& options = {}) {
    MacroLibrary library;
    library.reserve(macros.size());
    for (auto& m : macros) {
        MacroModel model = build_macro_model(mdp, d, periphery, m, options);
        library.push_back({std::move(m), std::move(model)});
    }
    return library;
}

inline std::size_t library_work(const MacroLibrary& library) {
    std::size_t w = 0;
    for (const auto& mm : library) w += mm.model.work_units;
    return w;
}

/// Smallest H with beta^H < 1e-8.
inline std::size_t monte_carlo_horizon(double beta) {
    std::size_t h = static_cast<std::size_t>(std::ceil(std::log(1e-8) / std::log(beta)));
    while (h > 0 && std::pow(beta, static_cast<double>(h - 1)) < 1e-8) --h;
    while (std::pow(beta, static_cast<double>(h)) >= 1e-8) ++h;
    return h;
}

/// Sample means and standard errors of the model entries for one start state.
struct MacroEstimate {
    StateId start = 0;
    std::vector<StateId> exits;
    std::vector<double> transition_mean;
    std::vector<double> transition_stderr;
    double reward_mean = 0.0;
    double reward_stderr = 0.0;
    std::size_t trajectories = 0;
    std::size_t horizon = 0;
    std::size_t exited = 0;           ///< trajectories that left the region before the horizon
    double mean_termination_time = 0; ///< mean tau over exited trajectories (0 if none)
};

/// Samples one successor of `row` with a uniform draw.
inline StateId sample_successor(const ActionRow& row, Rng& rng) {
    double u = rng.uniform();
    for (const auto& t : row.successors) {
        if (u < t.probability) return t.state;
        u -= t.probability;
    }
    for (auto it = row.successors.rbegin(); it != row.successors.rend(); ++it)
        if (it->probability > 0.0) return it->state;
    throw ValidationError("cannot sample from an empty row");
}

/**
 * Monte Carlo estimate of a macro's model from one start state. Trajectory
 * i draws from its own substream of `seed`, so the result does not depend
 * on evaluation order. Rollouts stop on leaving the region or at the
 * horizon H = min{H : beta^H < 1e-8}.
 */
inline MacroEstimate simulate_macro(const Mdp& mdp, const Periphery& periphery, const Macro& m, StateId start,
                                    std::size_t trajectories, std::uint64_t seed) {
    if (m.index_of(start) == npos)
        throw ValidationError("start state " + std::to_string(start) + " is outside the region of macro " + m.name);
    if (trajectories == 0) throw ValidationError("need at least one trajectory");
    const double beta = mdp.discount();
    const auto& exits = periphery.exits.at(m.region);
    const std::size_t k = exits.size();

    MacroEstimate est;
    est.start = start;
    est.exits = exits;
    est.trajectories = trajectories;
    est.horizon = monte_carlo_horizon(beta);

    std::vector<double> t_sum(k, 0.0), t_sq(k, 0.0);
    double r_sum = 0.0, r_sq = 0.0, tau_sum = 0.0;
    std::vector<const ActionRow*> rows(m.states.size());
    for (std::size_t i = 0; i < m.states.size(); ++i) rows[i] = mdp.find(m.states[i], m.actions[i]);

    for (std::size_t traj = 0; traj < trajectories; ++traj) {
        Rng rng(substream_seed(seed, traj));
        std::size_t local = m.index_of(start);
        double discount = 1.0;
        double ret = 0.0;
        for (std::size_t t = 0; t < est.horizon; ++t) {
            const ActionRow* row = rows[local];
            ret += discount * row->reward;
            const StateId next = sample_successor(*row, rng);
            const std::size_t next_local = m.index_of(next);
            if (next_local == npos) {
                const std::size_t j = periphery.exit_index(m.region, next);
                if (j == npos) throw ValidationError("macro left its region through a non-exit state");
                t_sum[j] += discount;  // beta^(tau-1) with tau = t + 1
                t_sq[j] += discount * discount;
                tau_sum += static_cast<double>(t + 1);
                ++est.exited;
                break;
            }
            local = next_local;
            discount *= beta;
        }
        r_sum += ret;
        r_sq += ret * ret;
    }

    const double n = static_cast<double>(trajectories);
    auto stderr_of = [n](double sum, double sq) {
        if (n < 2) return 0.0;
        const double mean = sum / n;
        const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
        return std::sqrt(var / n);
    };
    est.transition_mean.resize(k);
    est.transition_stderr.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        est.transition_mean[j] = t_sum[j] / n;
        est.transition_stderr[j] = stderr_of(t_sum[j], t_sq[j]);
    }
    est.reward_mean = r_sum / n;
    est.reward_stderr = stderr_of(r_sum, r_sq);
    est.mean_termination_time = est.exited > 0 ? tau_sum / static_cast<double>(est.exited) : 0.0;
    return est;
}

/*
 * Model export format, one block per macro:
 *
 *   macro <name> region <r> exits <e_1> ... <e_k>
 *   start <s> reward <R_i(s)> [<e_j>:<T_i(s, e_j)> ...]   (nonzero entries)
 */
inline std::string write_macro_models(const MacroLibrary& library) {
    std::ostringstream out;
    for (const auto& [m, model] : library) {
        out << "macro " << m.name << " region " << m.region << " exits";
        for (StateId e : model.exits) out << ' ' << e;
        out << '\n';
        for (std::size_t i = 0; i < model.states.size(); ++i) {
            out << "start " << model.states[i] << " reward " << format_double(model.reward[i]);
            for (std::size_t j = 0; j < model.exits.size(); ++j)
                if (model.transition(i, j) != 0.0)
                    out << ' ' << model.exits[j] << ':' << format_double(model.transition(i, j));
            out << '\n';
        }
    }
    return out.str();
}

} // namespace hmdp
