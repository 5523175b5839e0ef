#include "hmdp/hmdp.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hmdp;

namespace {

struct Parts {
    Mdp mdp;
    Decomposition d;
    Periphery p;
};

Parts parts_of(const oracle::Instance& in) {
    Decomposition d(in.labels, in.regions);
    return {in.mdp, d, compute_peripheries(in.mdp, d)};
}

/// One macro per region generated from the optimal values at the exits.
MacroLibrary exact_seed_library(const Parts& s, const std::vector<double>& vstar) {
    std::vector<Macro> macros;
    for (RegionId r = 0; r < s.d.region_count(); ++r) {
        SeedFunction seed;
        for (StateId e : s.p.exits[r]) seed.push_back(vstar[e]);
        macros.push_back(generate_macro_from_seed(s.mdp, s.d, s.p, r, seed).macro);
    }
    return build_macro_library(s.mdp, s.d, s.p, std::move(macros));
}

AbstractMdp heuristic_abstract(const MazeInstance& in) {
    auto set = heuristic_macros_all(in.mdp(), in.decomposition(), in.periphery, default_heuristic_seeds(in.mdp()));
    return build_abstract_mdp(in.mdp(), in.decomposition(), in.periphery,
                              build_macro_library(in.mdp(), in.decomposition(), in.periphery, set.macros));
}

} // namespace

TEST(Abstract, TwoRegionChainByHand) {
    // 0 -> 1 -> 2 -> 3 (absorbing), regions {0,1} and {2,3}, cost 1 per step outside 3.
    Mdp m(4, 0.5, Objective::minimize_cost);
    for (StateId s = 0; s < 3; ++s) m.add_action(s, {0, 1.0, RowClass::exact, {{s + 1, 1.0}}});
    m.add_action(3, {0, 0.0, RowClass::exact, {{3, 1.0}}});
    m.add_action(2, {1, 0.0, RowClass::exact, {{0, 1.0}}});
    Decomposition d({0, 0, 1, 1}, 2);
    Periphery p = compute_peripheries(m, d);
    ASSERT_EQ(p.peripheral, (std::vector<StateId>{0, 2}));
    std::vector<Macro> macros{{"fwd0", 0, {0, 1}, {0, 0}, {}}, {"fwd1", 1, {2, 3}, {0, 0}, {}}};
    AbstractMdp a = build_abstract_mdp(m, d, p, build_macro_library(m, d, p, macros));
    ASSERT_EQ(a.state_count(), 2u);
    // Macro fwd0 from 0: cost 1 + 0.5, reaches 2 after two steps, factor 0.5.
    const ActionRow* row = a.mdp.find(0, 0);
    ASSERT_NE(row, nullptr);
    EXPECT_DOUBLE_EQ(row->reward, 1.5);
    ASSERT_EQ(row->successors.size(), 1u);
    EXPECT_EQ(row->successors[0].state, 1u);
    EXPECT_DOUBLE_EQ(row->successors[0].probability, 0.5);
    // fwd1 from 2 never leaves: pure reward row with no successors.
    const ActionRow* stay = a.mdp.find(1, 1);
    ASSERT_NE(stay, nullptr);
    EXPECT_TRUE(stay->successors.empty());
    EXPECT_DOUBLE_EQ(stay->reward, 1.0);
    auto sol = solve_abstract(a, {1e-12, 10000});
    EXPECT_NEAR(sol.values[1], 1.0, 1e-10);
    EXPECT_NEAR(sol.values[0], 1.5 + 0.5 * 0.5 * 1.0, 1e-10);
    EXPECT_EQ(a.mdp.action_name(1), "fwd1");
}

TEST(Abstract, SingleRegionIsEmpty) {
    std::mt19937_64 rng(3);
    auto in = oracle::random_instance(rng, 8, 1, 0.9);
    Decomposition d = Decomposition::single(8);
    Periphery p = compute_peripheries(in.mdp, d);
    auto lib = build_macro_library(in.mdp, d, p, {Macro{"all", 0, d.states(0), std::vector<ActionId>(8, 0), {}}});
    AbstractMdp a = build_abstract_mdp(in.mdp, d, p, lib);
    EXPECT_EQ(a.state_count(), 0u);
    auto sol = solve_abstract(a);
    EXPECT_TRUE(sol.report.converged);
    EXPECT_TRUE(sol.values.empty());
    EXPECT_TRUE(evaluate_macro_policy(a, {}).empty());
}

TEST(Abstract, RejectsRegionWithoutMacros) {
    MazeInstance in = MazeInstance::builtin("four_room");
    auto set = heuristic_macro_set(in.mdp(), in.decomposition(), in.periphery, 0, default_heuristic_seeds(in.mdp()));
    auto lib = build_macro_library(in.mdp(), in.decomposition(), in.periphery, set.macros);
    EXPECT_THROW(build_abstract_mdp(in.mdp(), in.decomposition(), in.periphery, lib), ValidationError);
    EXPECT_THROW(build_reduced_mdp(in.mdp(), in.decomposition(), in.periphery, lib), ValidationError);
}

TEST(Abstract, ExactSeedMacrosRecoverOptimalValues) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 15; ++trial) {
        const Objective obj = trial % 2 ? Objective::minimize_cost : Objective::maximize_reward;
        auto in = oracle::random_instance(rng, 15 + rng() % 20, 2 + rng() % 3, 0.9, obj);
        Parts s = parts_of(in);
        const auto vstar = oracle::optimal_values(s.mdp);
        AbstractMdp a = build_abstract_mdp(s.mdp, s.d, s.p, exact_seed_library(s, vstar));
        auto sol = solve_abstract(a, {1e-10, 100000});
        for (std::size_t i = 0; i < a.state_count(); ++i) EXPECT_NEAR(sol.values[i], vstar[a.base_state[i]], 1e-4);
        auto exact = evaluate_macro_policy(a, sol.policy);
        for (std::size_t i = 0; i < a.state_count(); ++i) EXPECT_NEAR(exact[i], sol.values[i], 1e-6);
    }
}

TEST(Abstract, NeverBetterThanFlatOptimum) {
    for (const char* name : {"four_room", "maze36"}) {
        MazeInstance in = MazeInstance::builtin(name);
        AbstractMdp a = heuristic_abstract(in);
        auto flat = value_iteration(in.mdp(), ValueFunction(in.mdp().state_count(), 0.0), {1e-9, 1000000});
        auto abs = solve_abstract(a, {1e-9, 1000000});
        for (std::size_t i = 0; i < a.state_count(); ++i)
            EXPECT_GE(abs.values[i], flat.values[a.base_state[i]] - 1e-6) << name;
    }
}

TEST(Rollout, DeterministicChainSwitchesAtEntrances) {
    Mdp m(4, 0.5, Objective::minimize_cost);
    for (StateId s = 0; s < 3; ++s) m.add_action(s, {0, 1.0, RowClass::exact, {{s + 1, 1.0}}});
    m.add_action(3, {0, 0.0, RowClass::exact, {{3, 1.0}}});
    Decomposition d({0, 0, 1, 1}, 2);
    Periphery p = compute_peripheries(m, d);
    std::vector<Macro> macros{{"a", 0, {0, 1}, {0, 0}, {}}, {"b", 1, {2, 3}, {0, 0}, {}}};
    AbstractMdp a = build_abstract_mdp(m, d, p, build_macro_library(m, d, p, macros));
    auto sol = solve_abstract(a, {1e-12, 1000});
    auto r = execute_macro_policy(m, a, sol.policy, sol.values, 0, 1, 6);
    EXPECT_EQ(r.states, (std::vector<StateId>{0, 1, 2, 3, 3, 3}));
    ASSERT_EQ(r.switches.size(), 2u);
    EXPECT_EQ(r.switches[0].state, 0u);
    EXPECT_EQ(r.switches[1].time, 2u);
    EXPECT_EQ(r.switches[1].macro, 1u);
    EXPECT_DOUBLE_EQ(r.discounted_return, 1.0 + 0.5 + 0.25);
    // Starting inside a region picks a macro greedily.
    auto inner = execute_macro_policy(m, a, sol.policy, sol.values, 1, 1, 3);
    EXPECT_EQ(inner.switches[0].macro, 0u);
}

TEST(Rollout, MeanReturnMatchesMacroPolicyValue) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    auto sol = solve_abstract(a, {1e-9, 1000000});
    auto exact = evaluate_macro_policy(a, sol.policy);
    const std::size_t start = 0;
    const std::size_t n = 3000;
    double sum = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto r = execute_macro_policy(in.mdp(), a, sol.policy, sol.values, a.base_state[start], substream_seed(99, i), 500);
        sum += r.discounted_return;
        sq += r.discounted_return * r.discounted_return;
    }
    const double mean = sum / n;
    const double se = std::sqrt(std::max(0.0, (sq - n * mean * mean) / (n - 1)) / n);
    EXPECT_NEAR(mean, exact[start], 3 * se + 1e-6);
}

TEST(Rollout, RejectsBadArguments) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    auto sol = solve_abstract(a);
    EXPECT_THROW(execute_macro_policy(in.mdp(), a, {}, sol.values, 0, 1, 10), ValidationError);
    EXPECT_THROW(execute_macro_policy(in.mdp(), a, sol.policy, sol.values, 9999, 1, 10), ValidationError);
}

TEST(Augmented, SameOptimalValuesAsOriginal) {
    for (const char* name : {"four_room", "maze36"}) {
        MazeInstance in = MazeInstance::builtin(name);
        auto set = heuristic_macros_all(in.mdp(), in.decomposition(), in.periphery, default_heuristic_seeds(in.mdp()));
        auto lib = build_macro_library(in.mdp(), in.decomposition(), in.periphery, set.macros);
        Mdp aug = build_augmented_mdp(in.mdp(), in.decomposition(), in.periphery, lib);
        Mdp red = build_reduced_mdp(in.mdp(), in.decomposition(), in.periphery, lib);
        const std::size_t n = in.mdp().state_count();
        std::size_t macro_pairs = 0;
        for (const auto& mm : lib) macro_pairs += mm.macro.states.size();
        EXPECT_EQ(aug.pair_count(), in.mdp().pair_count() + macro_pairs);
        auto vo = value_iteration(in.mdp(), ValueFunction(n, 0.0), {1e-10, 1000000});
        auto va = value_iteration(aug, ValueFunction(n, 0.0), {1e-10, 1000000});
        auto vr = value_iteration(red, ValueFunction(n, 0.0), {1e-10, 1000000});
        for (StateId s = 0; s < n; ++s) {
            EXPECT_NEAR(va.values[s], vo.values[s], 1e-6) << name;
            EXPECT_GE(vr.values[s], vo.values[s] - 1e-6) << name;
        }
        EXPECT_EQ(macro_action_offset(in.mdp()), 5u);
        EXPECT_EQ(aug.action_name(5), lib[0].macro.name);
    }
}

TEST(Revision, ChangedRegionsAfterGoalMove) {
    MazeInstance in = MazeInstance::builtin("four_room");
    const auto& c = in.compiled;
    const Cell old_goal = in.spec.goals().at(0);
    const RegionId goal_room = c.decomposition.region_of(c.state_of[old_goal.row][old_goal.col]);
    // Another interior cell in the same room, and one in a different room.
    Cell same{0, 0}, other{0, 0};
    bool found_same = false, found_other = false;
    for (StateId s = 0; s < in.mdp().state_count(); ++s) {
        const Cell x = c.cell_of[s];
        if (in.periphery.is_peripheral[s] || in.spec.terminal(x) != Terminal::none) continue;
        if (c.decomposition.region_of(s) == goal_room && !found_same) same = x, found_same = true;
        if (c.decomposition.region_of(s) != goal_room && !found_other) other = x, found_other = true;
    }
    ASSERT_TRUE(found_same && found_other);
    auto moved = compile_maze(relocate_goal(in.spec, same));
    EXPECT_EQ(changed_regions(in.mdp(), moved.mdp, in.decomposition()), std::vector<RegionId>{goal_room});
    auto far = compile_maze(relocate_goal(in.spec, other));
    auto regions = changed_regions(in.mdp(), far.mdp, in.decomposition());
    EXPECT_EQ(regions.size(), 2u);
    EXPECT_TRUE(changed_regions(in.mdp(), in.mdp(), in.decomposition()).empty());
}

TEST(Hybrid, IdentityRevisionMatchesAbstractWithExactSeeds) {
    std::mt19937_64 rng(55);
    auto in = oracle::random_instance(rng, 24, 3, 0.9, Objective::minimize_cost);
    Parts s = parts_of(in);
    const auto vstar = oracle::optimal_values(s.mdp);
    AbstractMdp a = build_abstract_mdp(s.mdp, s.d, s.p, exact_seed_library(s, vstar));
    auto abs = solve_abstract(a, {1e-10, 100000});
    for (RegionId r = 0; r < 3; ++r) {
        auto rev = LocalRevision::from_mdp(s.mdp, s.d, {r});
        HybridMdp h = build_hybrid_mdp(a, s.mdp, rev);
        std::size_t overlap = 0;
        for (StateId x : s.d.states(r)) overlap += s.p.is_peripheral[x];
        EXPECT_EQ(h.state_count(), s.p.peripheral.size() + s.d.states(r).size() - overlap);
        auto ws = hybrid_warm_start(h, a, abs.values);
        auto sol = solve_hybrid(h, ws.values, {1e-10, 100000});
        for (std::size_t i = 0; i < h.state_count(); ++i) EXPECT_NEAR(sol.values[i], vstar[h.base_state[i]], 1e-4);
    }
}

TEST(Hybrid, BetweenFlatOptimumAndAbstract) {
    MazeInstance in = MazeInstance::builtin("maze36");
    AbstractMdp a = heuristic_abstract(in);
    auto abs = solve_abstract(a, {1e-10, 1000000});
    auto flat = value_iteration(in.mdp(), ValueFunction(in.mdp().state_count(), 0.0), {1e-10, 1000000});
    auto rev = LocalRevision::from_mdp(in.mdp(), in.decomposition(), {0, 2});
    HybridMdp h = build_hybrid_mdp(a, in.mdp(), rev);
    auto sol = solve_hybrid(h, hybrid_warm_start(h, a, abs.values).values, {1e-10, 1000000});
    for (std::size_t i = 0; i < h.state_count(); ++i) {
        const StateId s = h.base_state[i];
        EXPECT_GE(sol.values[i], flat.values[s] - 1e-6);
        if (a.abstract_of[s] != npos) {
            EXPECT_LE(sol.values[i], abs.values[a.abstract_of[s]] + 1e-6);
        }
    }
}

TEST(Hybrid, WarmStartKeepsPriorOnPeriphery) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    auto abs = solve_abstract(a);
    auto rev = LocalRevision::from_mdp(in.mdp(), in.decomposition(), {1});
    HybridMdp h = build_hybrid_mdp(a, in.mdp(), rev);
    auto ws = hybrid_warm_start(h, a, abs.values);
    std::size_t expected_work = 0;
    for (std::size_t i = 0; i < h.state_count(); ++i) {
        const StateId s = h.base_state[i];
        if (a.abstract_of[s] != npos) {
            EXPECT_EQ(ws.values[i], abs.values[a.abstract_of[s]]);
        } else {
            expected_work += h.mdp.actions(i).size();
        }
    }
    EXPECT_EQ(ws.backup_evaluations, expected_work);
    auto flat = hybrid_warm_start(h, a, abs.values, {WarmStartFill::Kind::constant, 7.0});
    EXPECT_EQ(flat.backup_evaluations, 0u);
    for (std::size_t i = 0; i < h.state_count(); ++i)
        if (a.abstract_of[h.base_state[i]] == npos) {
            EXPECT_EQ(flat.values[i], 7.0);
        }
    EXPECT_THROW(hybrid_warm_start(h, a, {1.0}), ValidationError);
}

TEST(Hybrid, RejectsRevisionLeavingTheHybridSpace) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    const auto& d = in.decomposition();
    auto rev = LocalRevision::from_mdp(in.mdp(), d, {0});
    // Teleport from region 0 into an internal state of region 3.
    StateId target = npos;
    for (StateId s : d.states(3))
        if (!in.periphery.is_peripheral[s]) target = s;
    ASSERT_NE(target, npos);
    auto& row = rev.rows.begin()->second.front();
    row.successors = {{target, 1.0}};
    EXPECT_THROW(build_hybrid_mdp(a, in.mdp(), rev), ValidationError);
    LocalRevision partial = LocalRevision::from_mdp(in.mdp(), d, {0});
    partial.rows.erase(partial.rows.begin());
    EXPECT_THROW(build_hybrid_mdp(a, in.mdp(), partial), ValidationError);
}

TEST(Hybrid, RelocatedGoalIsSolvedInsideTheExpandedRoom) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    auto abs = solve_abstract(a, {1e-9, 1000000});
    const auto& c = in.compiled;
    const Cell old_goal = in.spec.goals().at(0);
    const RegionId room = c.decomposition.region_of(c.state_of[old_goal.row][old_goal.col]);
    Cell target{0, 0};
    for (StateId s : c.decomposition.states(room)) {
        const Cell x = c.cell_of[s];
        if (!in.periphery.is_peripheral[s] && in.spec.terminal(x) == Terminal::none) target = x;
    }
    MazeSpec moved = relocate_goal(in.spec, target);
    CompiledMaze mc = compile_maze(moved);
    auto regions = changed_regions(in.mdp(), mc.mdp, in.decomposition());
    HybridMdp h = build_hybrid_mdp(a, in.mdp(), LocalRevision::from_mdp(mc.mdp, in.decomposition(), regions));
    auto sol = solve_hybrid(h, hybrid_warm_start(h, a, abs.values).values, {1e-9, 1000000});
    auto flat = value_iteration(mc.mdp, ValueFunction(mc.mdp.state_count(), 0.0), {1e-9, 1000000});
    const std::size_t goal = h.hybrid_of[c.state_of[target.row][target.col]];
    ASSERT_NE(goal, npos);
    EXPECT_NEAR(sol.values[goal], 0.0, 1e-6);
    for (std::size_t i = 0; i < h.state_count(); ++i) EXPECT_GE(sol.values[i], flat.values[h.base_state[i]] - 1e-6);
    // The old goal is an ordinary cell now and costs something.
    EXPECT_GT(sol.values[h.hybrid_of[c.state_of[old_goal.row][old_goal.col]]], 0.5);
}

TEST(Sidecars, ListBackReferences) {
    MazeInstance in = MazeInstance::builtin("four_room");
    AbstractMdp a = heuristic_abstract(in);
    const std::string abs = write_abstract_sidecar(a);
    EXPECT_NE(abs.find("state 0 base " + std::to_string(a.base_state[0]) + " region"), std::string::npos);
    EXPECT_NE(abs.find("action 0 macro " + a.macros[0].macro.name), std::string::npos);
    HybridMdp h = build_hybrid_mdp(a, in.mdp(), LocalRevision::from_mdp(in.mdp(), in.decomposition(), {2}));
    const std::string hs = write_hybrid_sidecar(h, in.mdp());
    EXPECT_NE(hs.find("action 0 base N"), std::string::npos);
    EXPECT_NE(hs.find("action 5 macro " + a.macros[0].macro.name), std::string::npos);
    auto sol = solve_hybrid(h, ValueFunction(h.state_count(), 0.0));
    const std::string mixed = write_mixed_policy(h, sol.policy);
    EXPECT_NE(mixed.find(" macro "), std::string::npos);
    EXPECT_NE(mixed.find(" base "), std::string::npos);
}
