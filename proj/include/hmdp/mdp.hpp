#pragma once

#include "hmdp/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hmdp {

enum class Objective { maximize_reward, minimize_cost };

/**
 * Stochasticity class of a transition row.
 *
 * `exact` rows are probability distributions. `macro` rows hold discounted
 * exit probabilities E[beta^(tau-1) 1{exit = t}] of a macro-action and may
 * sum to less than one; the backup still multiplies them by beta once.
 */
enum class RowClass { exact, macro };

inline constexpr double kRowSumTolerance = 1e-9;

struct Successor {
    StateId state;
    double probability;

    friend bool operator==(const Successor&, const Successor&) = default;
};

/// One feasible action at one state.
struct ActionRow {
    ActionId action = 0;
    double reward = 0.0;
    RowClass row_class = RowClass::exact;
    std::vector<Successor> successors;

    double row_sum() const {
        double sum = 0.0;
        for (const auto& s : successors) sum += s.probability;
        return sum;
    }

    friend bool operator==(const ActionRow&, const ActionRow&) = default;
};

inline const char* to_string(Objective objective) {
    return objective == Objective::minimize_cost ? "min" : "max";
}

inline const char* to_string(RowClass row_class) {
    return row_class == RowClass::exact ? "exact" : "macro";
}

/// True when `a` is strictly preferred over `b` under the objective.
inline bool better(Objective objective, double a, double b) {
    return objective == Objective::minimize_cost ? a < b : a > b;
}

/**
 * Finite discounted MDP with sparse rows and per-state feasible action sets.
 *
 * Rewards are interpreted through `objective`: under minimize_cost the
 * reward field holds a cost. Action identifiers index a shared catalog of
 * display names; the rows of a state are kept sorted by identifier.
 */
class Mdp {
public:
    Mdp() = default;

    Mdp(std::size_t state_count, double discount, Objective objective = Objective::maximize_reward)
        : discount_(discount), objective_(objective), rows_(state_count) {
        if (!(discount > 0.0 && discount < 1.0))
            throw ValidationError("discount must lie in (0, 1), got " + format_double(discount));
    }

    std::size_t state_count() const noexcept { return rows_.size(); }
    double discount() const noexcept { return discount_; }
    Objective objective() const noexcept { return objective_; }

    std::span<const ActionRow> actions(StateId s) const { return rows_.at(s); }

    /// Row for (s, a) or nullptr when a is not feasible at s.
    const ActionRow* find(StateId s, ActionId a) const {
        const auto& rows = rows_.at(s);
        auto it = std::lower_bound(rows.begin(), rows.end(), a,
                                   [](const ActionRow& r, ActionId id) { return r.action < id; });
        return it != rows.end() && it->action == a ? &*it : nullptr;
    }

    /// Adds a row, keeping identifiers sorted; duplicates and bad rows are rejected.
    void add_action(StateId s, ActionRow row) {
        if (s >= rows_.size()) throw ValidationError("state " + std::to_string(s) + " out of range");
        check_row(s, row);
        std::sort(row.successors.begin(), row.successors.end(),
                  [](const Successor& x, const Successor& y) { return x.state < y.state; });
        for (std::size_t i = 1; i < row.successors.size(); ++i)
            if (row.successors[i].state == row.successors[i - 1].state)
                throw ValidationError("duplicate successor " + std::to_string(row.successors[i].state) +
                                      " in row (" + std::to_string(s) + ", " + std::to_string(row.action) + ")");
        auto& rows = rows_[s];
        auto it = std::lower_bound(rows.begin(), rows.end(), row.action,
                                   [](const ActionRow& r, ActionId id) { return r.action < id; });
        if (it != rows.end() && it->action == row.action)
            throw ValidationError("action " + std::to_string(row.action) + " already feasible at state " +
                                  std::to_string(s));
        rows.insert(it, std::move(row));
    }

    void clear_actions(StateId s) { rows_.at(s).clear(); }

    const std::vector<std::string>& action_names() const noexcept { return action_names_; }

    void set_action_name(ActionId a, std::string name) {
        if (action_names_.size() <= a) action_names_.resize(a + 1);
        action_names_[a] = std::move(name);
    }

    /// Catalog name, or the numeric identifier when unnamed.
    std::string action_name(ActionId a) const {
        if (a < action_names_.size() && !action_names_[a].empty()) return action_names_[a];
        return std::to_string(a);
    }

    /// Largest and smallest one-step reward over all feasible pairs.
    std::pair<double, double> reward_range() const {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (const auto& rows : rows_)
            for (const auto& r : rows) {
                lo = std::min(lo, r.reward);
                hi = std::max(hi, r.reward);
            }
        if (lo > hi) return {0.0, 0.0};
        return {lo, hi};
    }

    double max_abs_reward() const {
        auto [lo, hi] = reward_range();
        return std::max(std::abs(lo), std::abs(hi));
    }

    std::size_t pair_count() const {
        std::size_t n = 0;
        for (const auto& rows : rows_) n += rows.size();
        return n;
    }

    /// Full invariant check; throws ValidationError naming the first violation.
    void validate() const {
        for (StateId s = 0; s < rows_.size(); ++s) {
            if (rows_[s].empty()) throw ValidationError("state " + std::to_string(s) + " has no feasible action");
            for (const auto& r : rows_[s]) check_row(s, r);
        }
    }

    friend bool operator==(const Mdp&, const Mdp&) = default;

private:
    void check_row(StateId s, const ActionRow& row) const {
        auto where = [&] { return "row (" + std::to_string(s) + ", " + std::to_string(row.action) + ")"; };
        if (!std::isfinite(row.reward)) throw ValidationError(where() + " has a non-finite reward");
        double sum = 0.0;
        for (const auto& t : row.successors) {
            if (t.state >= rows_.size())
                throw ValidationError(where() + " has successor " + std::to_string(t.state) + " out of range");
            if (!(t.probability >= 0.0) || !std::isfinite(t.probability))
                throw ValidationError(where() + " has an invalid probability");
            sum += t.probability;
        }
        if (row.row_class == RowClass::exact) {
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw ValidationError(where() + " is exact-stochastic but sums to " + format_double(sum));
        } else if (sum > 1.0 + kRowSumTolerance) {
            throw ValidationError(where() + " is a macro row but sums to " + format_double(sum));
        }
    }

    double discount_ = 0.5;
    Objective objective_ = Objective::maximize_reward;
    std::vector<std::vector<ActionRow>> rows_;
    std::vector<std::string> action_names_;
};

/// Checks that every chosen action is feasible at its state.
inline void check_policy(const Mdp& mdp, const Policy& policy) {
    if (policy.size() != mdp.state_count())
        throw ValidationError("policy covers " + std::to_string(policy.size()) + " states, model has " +
                              std::to_string(mdp.state_count()));
    for (StateId s = 0; s < policy.size(); ++s)
        if (mdp.find(s, policy[s]) == nullptr)
            throw ValidationError("policy action " + std::to_string(policy[s]) + " infeasible at state " +
                                  std::to_string(s));
}

inline void check_values(const Mdp& mdp, const ValueFunction& v) {
    if (v.size() != mdp.state_count())
        throw ValidationError("value function has " + std::to_string(v.size()) + " entries, model has " +
                              std::to_string(mdp.state_count()) + " states");
    for (StateId s = 0; s < v.size(); ++s)
        if (!std::isfinite(v[s])) throw ValidationError("value at state " + std::to_string(s) + " is not finite");
}

} // namespace hmdp
