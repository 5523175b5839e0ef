#pragma once

#include "hmdp/decomposition.hpp"
#include "hmdp/macro_generation.hpp"
#include "hmdp/macro_model.hpp"
#include "hmdp/random.hpp"
#include "hmdp/solve.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace hmdp {

namespace detail {

inline void check_library(const Decomposition& d, const Periphery& p, const MacroLibrary& library) {
    for (const auto& [m, model] : library) {
        if (m.region >= d.region_count()) throw ValidationError("macro " + m.name + " names an unknown region");
        if (model.states != d.states(m.region) || model.exits != p.exits[m.region])
            throw ValidationError("model of macro " + m.name + " does not match its region");
        if (model.transition.rows() != model.states.size() || model.transition.cols() != model.exits.size() ||
            model.reward.size() != model.states.size())
            throw ValidationError("model of macro " + m.name + " has inconsistent dimensions");
    }
}

/// Macro row of `mm` at base state `s`, successors in base identifiers.
inline ActionRow macro_row(const ModeledMacro& mm, StateId s, ActionId id) {
    const std::size_t i = mm.model.index_of(s);
    ActionRow row{id, mm.model.reward[i], RowClass::macro, {}};
    for (std::size_t j = 0; j < mm.model.exits.size(); ++j)
        if (mm.model.transition(i, j) != 0.0) row.successors.push_back({mm.model.exits[j], mm.model.transition(i, j)});
    return row;
}

} // namespace detail

/// First identifier free for macro actions when they join base actions.
inline ActionId macro_action_offset(const Mdp& mdp) {
    ActionId next = mdp.action_names().size();
    for (StateId s = 0; s < mdp.state_count(); ++s)
        for (const auto& row : mdp.actions(s)) next = std::max(next, row.action + 1);
    return next;
}

/**
 * Decision process over the peripheral states whose actions are macros.
 * Action identifier k is macro k of `macros`; rows are macro rows (sums
 * below one) targeting only the exit states of the macro's region.
 */
struct AbstractMdp {
    Mdp mdp;
    Decomposition decomposition;
    Periphery periphery;
    MacroLibrary macros;
    std::vector<StateId> base_state;    ///< abstract -> base
    std::vector<std::size_t> abstract_of;  ///< base -> abstract or npos

    std::size_t state_count() const noexcept { return base_state.size(); }
    RegionId region_of(std::size_t abstract_state) const {
        return decomposition.region_of(base_state.at(abstract_state));
    }
};

/**
 * Builds the abstract MDP. Every region with entrance states needs at least
 * one macro. A single-region decomposition gives a legal empty process.
 */
inline AbstractMdp build_abstract_mdp(const Mdp& mdp, const Decomposition& d, const Periphery& p, MacroLibrary library) {
    check_decomposition(mdp, d);
    detail::check_library(d, p, library);
    std::vector<std::size_t> count(d.region_count(), 0);
    for (const auto& mm : library) ++count[mm.macro.region];
    for (RegionId r = 0; r < d.region_count(); ++r)
        if (!p.entrances[r].empty() && count[r] == 0)
            throw ValidationError("region " + std::to_string(r) + " has entrance states but no macros");

    AbstractMdp a;
    a.decomposition = d;
    a.periphery = p;
    a.base_state = p.peripheral;
    a.abstract_of.assign(mdp.state_count(), npos);
    for (std::size_t i = 0; i < a.base_state.size(); ++i) a.abstract_of[a.base_state[i]] = i;

    if (a.base_state.empty()) {
        a.mdp = Mdp();
        a.macros = std::move(library);
        return a;
    }
    a.mdp = Mdp(a.base_state.size(), mdp.discount(), mdp.objective());
    for (std::size_t k = 0; k < library.size(); ++k) {
        const auto& mm = library[k];
        a.mdp.set_action_name(k, mm.macro.name);
        for (StateId s : p.entrances[mm.macro.region]) {
            ActionRow row = detail::macro_row(mm, s, k);
            for (auto& t : row.successors) {
                const std::size_t ai = a.abstract_of[t.state];
                if (ai == npos) throw ValidationError("macro exit " + std::to_string(t.state) + " is not peripheral");
                t.state = ai;
            }
            a.mdp.add_action(a.abstract_of[s], std::move(row));
        }
    }
    a.macros = std::move(library);
    return a;
}

/// Value iteration on the abstract process; empty process gives an empty solution.
inline Solution solve_abstract(const AbstractMdp& a, const StopRule& stop = {}, ValueFunction v0 = {},
                               std::optional<std::size_t> probe = std::nullopt) {
    if (a.state_count() == 0) {
        Solution empty;
        empty.report.converged = true;
        return empty;
    }
    if (v0.empty()) v0.assign(a.state_count(), 0.0);
    return value_iteration(a.mdp, std::move(v0), stop, probe);
}

/// Exact value of a fixed macro-policy in the abstract process.
inline ValueFunction evaluate_macro_policy(const AbstractMdp& a, const Policy& macro_policy) {
    if (a.state_count() == 0) return {};
    return evaluate_policy(a.mdp, macro_policy, EvaluationMethod::direct);
}

/**
 * Greedy macro at a state internal to its region, using the macro models
 * and the abstract values at the region's exits. Lowest index wins ties.
 */
inline std::size_t greedy_macro_at(const Mdp& base, const AbstractMdp& a, const ValueFunction& abstract_values,
                                   StateId s) {
    const RegionId r = a.decomposition.region_of(s);
    std::size_t best = npos;
    double best_q = 0.0;
    for (std::size_t k = 0; k < a.macros.size(); ++k) {
        const auto& mm = a.macros[k];
        if (mm.macro.region != r) continue;
        const std::size_t i = mm.model.index_of(s);
        double expected = 0.0;
        for (std::size_t j = 0; j < mm.model.exits.size(); ++j)
            expected += mm.model.transition(i, j) * abstract_values.at(a.abstract_of[mm.model.exits[j]]);
        const double q = mm.model.reward[i] + base.discount() * expected;
        if (best == npos || better(base.objective(), q, best_q)) {
            best = k;
            best_q = q;
        }
    }
    if (best == npos) throw ValidationError("region " + std::to_string(r) + " has no macros");
    return best;
}

struct MacroSwitch {
    std::size_t time;
    StateId state;
    std::size_t macro;
};

struct Rollout {
    std::vector<StateId> states;
    std::vector<MacroSwitch> switches;
    double discounted_return = 0.0;
};

/**
 * Runs the non-Markovian base policy induced by a macro-policy: on entering
 * a region at entrance s_e follow macro mp(s_e) until the region is left.
 * An internal start state picks its first macro greedily.
 */
inline Rollout execute_macro_policy(const Mdp& base, const AbstractMdp& a, const Policy& macro_policy,
                                    const ValueFunction& abstract_values, StateId start, std::uint64_t seed,
                                    std::size_t horizon) {
    if (start >= base.state_count()) throw ValidationError("start state out of range");
    if (macro_policy.size() != a.state_count()) throw ValidationError("macro-policy size mismatch");
    Rng rng(seed);
    Rollout out;
    const double beta = base.discount();
    double discount = 1.0;
    StateId s = start;
    std::size_t current = npos;
    for (std::size_t t = 0; t < horizon; ++t) {
        if (current == npos) {
            const std::size_t ai = a.abstract_of[s];
            if (ai != npos) {
                current = macro_policy[ai];
            } else if (t == 0) {
                current = greedy_macro_at(base, a, abstract_values, s);
            } else {
                throw SolverError("region entered at non-entrance state " + std::to_string(s));
            }
            if (a.macros.at(current).macro.region != a.decomposition.region_of(s))
                throw SolverError("macro-policy picks a macro of another region at state " + std::to_string(s));
            out.switches.push_back({t, s, current});
        }
        out.states.push_back(s);
        const ActionRow* row = base.find(s, a.macros[current].macro.action_at(s));
        out.discounted_return += discount * row->reward;
        const StateId next = sample_successor(*row, rng);
        if (a.decomposition.region_of(next) != a.decomposition.region_of(s)) current = npos;
        s = next;
        discount *= beta;
    }
    return out;
}

/**
 * Base states with base actions plus every macro, feasible at every state
 * of its region. Macro k has identifier macro_action_offset(mdp) + k.
 */
inline Mdp build_augmented_mdp(const Mdp& mdp, const Decomposition& d, const Periphery& p, const MacroLibrary& library) {
    check_decomposition(mdp, d);
    detail::check_library(d, p, library);
    Mdp out = mdp;
    const ActionId offset = macro_action_offset(mdp);
    for (std::size_t k = 0; k < library.size(); ++k) {
        out.set_action_name(offset + k, library[k].macro.name);
        for (StateId s : library[k].model.states) out.add_action(s, detail::macro_row(library[k], s, offset + k));
    }
    return out;
}

/// Base states with macro actions only; every region needs a macro.
inline Mdp build_reduced_mdp(const Mdp& mdp, const Decomposition& d, const Periphery& p, const MacroLibrary& library) {
    check_decomposition(mdp, d);
    detail::check_library(d, p, library);
    std::vector<std::size_t> count(d.region_count(), 0);
    for (const auto& mm : library) ++count[mm.macro.region];
    for (RegionId r = 0; r < d.region_count(); ++r)
        if (count[r] == 0) throw ValidationError("region " + std::to_string(r) + " has no macro; its states would have no action");
    Mdp out(mdp.state_count(), mdp.discount(), mdp.objective());
    const ActionId offset = macro_action_offset(mdp);
    for (ActionId a = 0; a < mdp.action_names().size(); ++a)
        if (!mdp.action_names()[a].empty()) out.set_action_name(a, mdp.action_names()[a]);
    for (std::size_t k = 0; k < library.size(); ++k) {
        out.set_action_name(offset + k, library[k].macro.name);
        for (StateId s : library[k].model.states) out.add_action(s, detail::macro_row(library[k], s, offset + k));
    }
    return out;
}

/**
 * Replacement rows for every state of the revised regions. All other rows
 * of the model are unchanged.
 */
struct LocalRevision {
    std::vector<RegionId> regions;  ///< sorted, unique
    std::map<StateId, std::vector<ActionRow>> rows;

    /// Takes the rows of `revised` at the states of `regions`.
    static LocalRevision from_mdp(const Mdp& revised, const Decomposition& d, std::vector<RegionId> regions) {
        check_decomposition(revised, d);
        std::sort(regions.begin(), regions.end());
        regions.erase(std::unique(regions.begin(), regions.end()), regions.end());
        LocalRevision rev;
        rev.regions = regions;
        for (RegionId r : regions) {
            if (r >= d.region_count()) throw ValidationError("revision names unknown region " + std::to_string(r));
            for (StateId s : d.states(r)) {
                auto rows = revised.actions(s);
                rev.rows[s] = std::vector<ActionRow>(rows.begin(), rows.end());
            }
        }
        return rev;
    }

    void check(const Decomposition& d) const {
        std::size_t expected = 0;
        for (RegionId r : regions) {
            if (r >= d.region_count()) throw ValidationError("revision names unknown region " + std::to_string(r));
            expected += d.states(r).size();
        }
        if (rows.size() != expected) throw ValidationError("revision must replace the rows of every revised state");
        for (const auto& [s, list] : rows) {
            if (s >= d.state_count() || !std::binary_search(regions.begin(), regions.end(), d.region_of(s)))
                throw ValidationError("revision touches state " + std::to_string(s) + " outside the revised regions");
            if (list.empty()) throw ValidationError("revised state " + std::to_string(s) + " has no action");
            for (const auto& row : list)
                if (row.row_class != RowClass::exact)
                    throw ValidationError("revised rows must be exact-stochastic");
        }
    }
};

/// Regions containing a state whose rows differ between the two models.
inline std::vector<RegionId> changed_regions(const Mdp& before, const Mdp& after, const Decomposition& d) {
    check_decomposition(before, d);
    check_decomposition(after, d);
    std::vector<RegionId> out;
    for (StateId s = 0; s < before.state_count(); ++s) {
        auto a = before.actions(s), b = after.actions(s);
        if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) out.push_back(d.region_of(s));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

/// The revised flat model.
inline Mdp apply_revision(const Mdp& mdp, const Decomposition& d, const LocalRevision& rev) {
    rev.check(d);
    Mdp out = mdp;
    for (const auto& [s, list] : rev.rows) {
        out.clear_actions(s);
        for (const auto& row : list) out.add_action(s, row);
    }
    return out;
}

/**
 * Abstract MDP with the revised regions expanded back to base states:
 * S* = Per u (states of revised regions). Revised states carry their
 * revised base actions; peripheral states of other regions keep their macro
 * rows verbatim. Macro k has identifier `macro_offset + k`.
 */
struct HybridMdp {
    Mdp mdp;
    std::vector<StateId> base_state;    ///< hybrid -> base
    std::vector<std::size_t> hybrid_of;   ///< base -> hybrid or npos
    std::vector<RegionId> expanded;
    ActionId macro_offset = 0;

    std::size_t state_count() const noexcept { return base_state.size(); }
};

inline HybridMdp build_hybrid_mdp(const AbstractMdp& a, const Mdp& base, const LocalRevision& rev) {
    const Decomposition& d = a.decomposition;
    check_decomposition(base, d);
    rev.check(d);
    std::vector<bool> expanded_region(d.region_count(), false);
    for (RegionId r : rev.regions) expanded_region[r] = true;

    HybridMdp h;
    h.expanded = rev.regions;
    h.macro_offset = macro_action_offset(base);
    h.hybrid_of.assign(base.state_count(), npos);
    for (StateId s = 0; s < base.state_count(); ++s)
        if (a.periphery.is_peripheral[s] || expanded_region[d.region_of(s)]) {
            h.hybrid_of[s] = h.base_state.size();
            h.base_state.push_back(s);
        }
    h.mdp = Mdp(h.base_state.size(), base.discount(), base.objective());
    for (ActionId id = 0; id < base.action_names().size(); ++id)
        if (!base.action_names()[id].empty()) h.mdp.set_action_name(id, base.action_names()[id]);
    for (std::size_t k = 0; k < a.macros.size(); ++k) h.mdp.set_action_name(h.macro_offset + k, a.macros[k].macro.name);

    for (std::size_t hi = 0; hi < h.base_state.size(); ++hi) {
        const StateId s = h.base_state[hi];
        if (expanded_region[d.region_of(s)]) {
            for (ActionRow row : rev.rows.at(s)) {
                for (auto& t : row.successors) {
                    if (h.hybrid_of[t.state] == npos)
                        throw ValidationError("revised row (" + std::to_string(s) + ", " + std::to_string(row.action) +
                                              ") reaches state " + std::to_string(t.state) +
                                              " outside the hybrid state space; the revision changes the periphery");
                    t.state = h.hybrid_of[t.state];
                }
                h.mdp.add_action(hi, std::move(row));
            }
        } else {
            for (const auto& row : a.mdp.actions(a.abstract_of[s])) {
                ActionRow copy = row;
                copy.action = h.macro_offset + row.action;
                for (auto& t : copy.successors) t.state = h.hybrid_of[a.base_state[t.state]];
                h.mdp.add_action(hi, std::move(copy));
            }
        }
    }
    return h;
}

struct WarmStartFill {
    enum class Kind { one_backup, constant };
    Kind kind = Kind::one_backup;
    /// Fill for expanded non-peripheral states; NaN selects the mean prior
    /// value over the region's entrance states.
    double constant = std::numeric_limits<double>::quiet_NaN();
};

struct WarmStart {
    ValueFunction values;
    std::size_t backup_evaluations = 0;
};

/**
 * Initial values over S*: prior abstract values on peripheral states, and
 * on newly expanded internal states a constant fill optionally improved by
 * one synchronous backup.
 */
inline WarmStart hybrid_warm_start(const HybridMdp& h, const AbstractMdp& a, const ValueFunction& prior,
                                   const WarmStartFill& fill = {}) {
    if (prior.size() != a.state_count()) throw ValidationError("prior abstract values have the wrong size");
    const Decomposition& d = a.decomposition;
    WarmStart ws;
    ws.values.assign(h.state_count(), 0.0);
    std::vector<double> region_fill(d.region_count(), 0.0);
    double global = 0.0;
    if (!prior.empty()) global = std::accumulate(prior.begin(), prior.end(), 0.0) / static_cast<double>(prior.size());
    for (RegionId r = 0; r < d.region_count(); ++r) {
        const auto& ent = a.periphery.entrances[r];
        if (!std::isnan(fill.constant)) {
            region_fill[r] = fill.constant;
        } else if (!ent.empty()) {
            double sum = 0.0;
            for (StateId s : ent) sum += prior[a.abstract_of[s]];
            region_fill[r] = sum / static_cast<double>(ent.size());
        } else {
            region_fill[r] = global;
        }
    }
    std::vector<std::size_t> internal;
    for (std::size_t i = 0; i < h.state_count(); ++i) {
        const StateId s = h.base_state[i];
        if (a.abstract_of[s] != npos) {
            ws.values[i] = prior[a.abstract_of[s]];
        } else {
            ws.values[i] = region_fill[d.region_of(s)];
            internal.push_back(i);
        }
    }
    if (fill.kind == WarmStartFill::Kind::one_backup) {
        ValueFunction next = ws.values;
        for (std::size_t i : internal) {
            next[i] = backup_state(h.mdp, i, ws.values).first;
            ws.backup_evaluations += h.mdp.actions(i).size();
        }
        ws.values = std::move(next);
    }
    return ws;
}

/// Value iteration on the hybrid process from a full warm start over S*.
inline Solution solve_hybrid(const HybridMdp& h, ValueFunction warm_start, const StopRule& stop = {}) {
    return value_iteration(h.mdp, std::move(warm_start), stop);
}

/// Sidecar for a serialized abstract MDP: state and action back-references.
inline std::string write_abstract_sidecar(const AbstractMdp& a) {
    std::ostringstream out;
    for (std::size_t i = 0; i < a.state_count(); ++i)
        out << "state " << i << " base " << a.base_state[i] << " region " << a.region_of(i) << '\n';
    for (std::size_t k = 0; k < a.macros.size(); ++k)
        out << "action " << k << " macro " << a.macros[k].macro.name << " region " << a.macros[k].macro.region << '\n';
    return out.str();
}

inline std::string write_hybrid_sidecar(const HybridMdp& h, const Mdp& base) {
    std::ostringstream out;
    std::vector<bool> expanded(base.state_count(), false);
    for (std::size_t i = 0; i < h.state_count(); ++i) {
        out << "state " << i << " base " << h.base_state[i] << '\n';
    }
    for (ActionId id = 0; id < h.mdp.action_names().size(); ++id) {
        if (h.mdp.action_names()[id].empty()) continue;
        out << "action " << id << (id >= h.macro_offset ? " macro " : " base ") << h.mdp.action_names()[id] << '\n';
    }
    return out.str();
}

/// Mixed policy listing: base state, then "macro <name>" or "base <name>".
inline std::string write_mixed_policy(const HybridMdp& h, const Policy& policy) {
    std::ostringstream out;
    for (std::size_t i = 0; i < policy.size(); ++i)
        out << h.base_state[i] << (policy[i] >= h.macro_offset ? " macro " : " base ") << h.mdp.action_name(policy[i])
            << '\n';
    return out.str();
}

struct RefinementRound {
    std::vector<SeedFunction> seeds;  ///< seeds used this round, per region
    std::vector<Macro> macros;        ///< one per region
    ValueFunction abstract_values;    ///< over the peripheral states
    SolveReport report;
};

/**
 * Iterative refinement: generate one macro per region from the current
 * seeds, solve the induced abstract MDP, and reseed each region's exits
 * with the abstract values.
 */
inline std::vector<RefinementRound> refine_macros(const Mdp& mdp, const Decomposition& d, const Periphery& p,
                                                  std::vector<SeedFunction> seeds, std::size_t rounds,
                                                  const StopRule& stop = {1e-8, 1'000'000}) {
    if (rounds == 0) throw ValidationError("refinement needs at least one round");
    if (seeds.size() != d.region_count()) throw ValidationError("need one seed function per region");
    std::vector<RefinementRound> history;
    for (std::size_t round = 0; round < rounds; ++round) {
        RefinementRound rr;
        rr.seeds = seeds;
        std::vector<Macro> macros;
        for (RegionId r = 0; r < d.region_count(); ++r)
            macros.push_back(generate_macro_from_seed(mdp, d, p, r, seeds[r],
                                                      "r" + std::to_string(r) + "-round" + std::to_string(round))
                                 .macro);
        rr.macros = macros;
        AbstractMdp a = build_abstract_mdp(mdp, d, p, build_macro_library(mdp, d, p, std::move(macros)));
        Solution sol = solve_abstract(a, stop);
        rr.abstract_values = sol.values;
        rr.report = sol.report;
        for (RegionId r = 0; r < d.region_count(); ++r)
            for (std::size_t j = 0; j < p.exits[r].size(); ++j)
                seeds[r][j] = sol.values[a.abstract_of[p.exits[r][j]]];
        history.push_back(std::move(rr));
    }
    return history;
}

} // namespace hmdp
