#include "hmdp/hmdp.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hmdp;

namespace {

// State 0 is the region; state 1 is the only exit.
struct OneState {
    Mdp mdp;
    Decomposition d;
    Periphery p;
    Macro m;
};

OneState one_state(double self_loop, double reward, double beta) {
    OneState o{Mdp(2, beta, Objective::maximize_reward), Decomposition({0, 1}, 2), {}, {}};
    if (self_loop > 0.0)
        o.mdp.add_action(0, {0, reward, RowClass::exact, {{0, self_loop}, {1, 1.0 - self_loop}}});
    else
        o.mdp.add_action(0, {0, reward, RowClass::exact, {{1, 1.0}}});
    o.mdp.add_action(1, {0, 0.0, RowClass::exact, {{1, 1.0}}});
    o.p = compute_peripheries(o.mdp, o.d);
    o.m = Macro{"m", 0, {0}, {0}, {}};
    return o;
}

/// Deterministic corridor 0 -> 1 -> 2 -> 3 with region {0, 1, 2} and exit 3.
struct Corridor {
    Mdp mdp;
    Decomposition d;
    Periphery p;
    Macro right;
};

Corridor corridor(Objective obj, double step_reward) {
    Corridor c{Mdp(4, 0.9, obj), Decomposition({0, 0, 0, 1}, 2), {}, {}};
    for (StateId s = 0; s < 3; ++s) c.mdp.add_action(s, {0, step_reward, RowClass::exact, {{s + 1, 1.0}}});
    c.mdp.add_action(3, {0, 0.0, RowClass::exact, {{3, 1.0}}});
    c.p = compute_peripheries(c.mdp, c.d);
    c.right = Macro{"right", 0, {0, 1, 2}, {0, 0, 0}, {}};
    return c;
}

} // namespace

TEST(MacroModel, ImmediateExit) {
    auto o = one_state(0.0, 3.0, 0.9);
    auto model = build_macro_model(o.mdp, o.d, o.p, o.m);
    EXPECT_DOUBLE_EQ(model.transition(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(model.reward[0], 3.0);
}

TEST(MacroModel, SelfLoopGeometricSeries) {
    auto o = one_state(0.5, 1.0, 0.9);
    for (auto method : {ModelSolver::direct, ModelSolver::iterative}) {
        auto model = build_macro_model(o.mdp, o.d, o.p, o.m, {method, 1e-12, 512});
        EXPECT_NEAR(model.transition(0, 0), 0.5 / 0.55, 1e-10);
        EXPECT_NEAR(model.reward[0], 1.0 / 0.55, 1e-10);
    }
    auto t = compute_transition_model(o.mdp, o.p, o.m);
    auto r = compute_reward_model(o.mdp, o.p, o.m);
    EXPECT_NEAR(t.transition(0, 0), 0.5 / 0.55, 1e-12);
    EXPECT_NEAR(r.reward[0], 1.0 / 0.55, 1e-12);
}

TEST(MacroModel, CorridorHandComputed) {
    auto c = corridor(Objective::minimize_cost, 1.0);
    auto model = build_macro_model(c.mdp, c.d, c.p, c.right);
    EXPECT_NEAR(model.transition(0, 0), 0.81, 1e-12);
    EXPECT_NEAR(model.reward[0], 2.71, 1e-12);
    EXPECT_GT(model.work_units, 0u);
}

TEST(MacroModel, UnreachableExitIsExactlyZero) {
    // Region {0, 1}; exits 2 and 3. The macro loops at 0 and leaves from 1 to 3 only.
    Mdp m(4, 0.95, Objective::maximize_reward);
    m.add_action(0, {0, 1.0, RowClass::exact, {{0, 1.0}}});
    m.add_action(0, {1, 1.0, RowClass::exact, {{2, 1.0}}});
    m.add_action(1, {0, 1.0, RowClass::exact, {{0, 0.3}, {3, 0.7}}});
    m.add_action(2, {0, 0.0, RowClass::exact, {{2, 1.0}}});
    m.add_action(3, {0, 0.0, RowClass::exact, {{3, 1.0}}});
    Decomposition d({0, 0, 1, 2}, 3);
    Periphery p = compute_peripheries(m, d);
    ASSERT_EQ(p.exits[0], (std::vector<StateId>{2, 3}));
    Macro loop{"loop", 0, {0, 1}, {0, 0}, {}};
    auto model = build_macro_model(m, d, p, loop);
    EXPECT_EQ(model.transition(0, 0), 0.0);
    EXPECT_EQ(model.transition(0, 1), 0.0);
    EXPECT_EQ(model.transition(1, 0), 0.0);
    EXPECT_GT(model.transition(1, 1), 0.0);
    EXPECT_NEAR(model.reward[0], 1.0 / 0.05, 1e-9);
}

TEST(MacroModel, EmptyExitPeriphery) {
    Mdp m(2, 0.9, Objective::maximize_reward);
    m.add_action(0, {0, 1.0, RowClass::exact, {{1, 1.0}}});
    m.add_action(1, {0, 0.0, RowClass::exact, {{1, 1.0}}});
    Decomposition d = Decomposition::single(2);
    Periphery p = compute_peripheries(m, d);
    auto model = build_macro_model(m, d, p, Macro{"all", 0, {0, 1}, {0, 0}, {}});
    EXPECT_EQ(model.exits.size(), 0u);
    EXPECT_NEAR(model.reward[0], 1.0, 1e-12);
    EXPECT_NEAR(model.reward[1], 0.0, 1e-12);
}

TEST(MacroModel, RejectsBadMacros) {
    auto c = corridor(Objective::maximize_reward, 1.0);
    EXPECT_THROW(build_macro_model(c.mdp, c.d, c.p, Macro{"x", 0, {0, 1}, {0, 0}, {}}), ValidationError);
    EXPECT_THROW(build_macro_model(c.mdp, c.d, c.p, Macro{"x", 0, {0, 1, 2}, {0, 7, 0}, {}}), ValidationError);
    EXPECT_THROW(build_macro_model(c.mdp, c.d, c.p, Macro{"x", 5, {0, 1, 2}, {0, 0, 0}, {}}), ValidationError);
}

TEST(MacroModel, MatchesSeriesOracleAndSolversAgree) {
    std::mt19937_64 rng(314);
    for (int trial = 0; trial < 40; ++trial) {
        const double beta = std::array<double, 3>{0.8, 0.9, 0.95}[trial % 3];
        auto in = oracle::random_instance(rng, 10 + rng() % 20, 2 + rng() % 3, beta);
        Decomposition d(in.labels, in.regions);
        Periphery p = compute_peripheries(in.mdp, d);
        for (RegionId r = 0; r < in.regions; ++r) {
            Macro m{"m", r, d.states(r), {}, {}};
            for (StateId s : m.states) m.actions.push_back(rng() % in.mdp.actions(s).size());
            auto direct = build_macro_model(in.mdp, d, p, m, {ModelSolver::direct, 1e-12, 512});
            auto iterative = build_macro_model(in.mdp, d, p, m, {ModelSolver::iterative, 1e-12, 512});
            auto ref = oracle::series_model(in.mdp, m.states, p.exits[r], m.actions);
            for (std::size_t i = 0; i < m.states.size(); ++i) {
                EXPECT_NEAR(direct.reward[i], ref.reward[i], 1e-8);
                EXPECT_NEAR(iterative.reward[i], direct.reward[i], 1e-9);
                EXPECT_LE(direct.row_sum(i), 1.0 + 1e-12);
                for (std::size_t j = 0; j < p.exits[r].size(); ++j) {
                    EXPECT_NEAR(direct.transition(i, j), ref.transition[i][j], 1e-9);
                    EXPECT_NEAR(iterative.transition(i, j), direct.transition(i, j), 1e-9);
                    EXPECT_GE(direct.transition(i, j), 0.0);
                }
            }
        }
    }
}

TEST(MacroModel, RewardScalingDoublesRewardOnly) {
    std::mt19937_64 rng(8);
    auto in = oracle::random_instance(rng, 20, 3, 0.9);
    Mdp doubled(20, 0.9, Objective::maximize_reward);
    for (StateId s = 0; s < 20; ++s)
        for (auto row : in.mdp.actions(s)) {
            row.reward *= 2.0;
            doubled.add_action(s, row);
        }
    Decomposition d(in.labels, 3);
    Periphery p = compute_peripheries(in.mdp, d);
    Macro m{"m", 1, d.states(1), std::vector<ActionId>(d.states(1).size(), 0), {}};
    auto a = build_macro_model(in.mdp, d, p, m);
    auto b = build_macro_model(doubled, d, p, m);
    EXPECT_EQ(a.transition, b.transition);
    for (std::size_t i = 0; i < a.reward.size(); ++i) EXPECT_NEAR(b.reward[i], 2.0 * a.reward[i], 1e-12);
}

TEST(SimulateMacro, DeterministicExitHasNoVariance) {
    auto o = one_state(0.0, 3.0, 0.9);
    auto est = simulate_macro(o.mdp, o.p, o.m, 0, 100, 1);
    EXPECT_EQ(est.transition_mean[0], 1.0);
    EXPECT_EQ(est.transition_stderr[0], 0.0);
    EXPECT_EQ(est.reward_mean, 3.0);
    EXPECT_EQ(est.exited, 100u);
}

TEST(SimulateMacro, SelfLoopWithinThreeStandardErrors) {
    auto o = one_state(0.5, 1.0, 0.9);
    auto est = simulate_macro(o.mdp, o.p, o.m, 0, 100000, 2024);
    EXPECT_NEAR(est.transition_mean[0], 0.5 / 0.55, 3 * est.transition_stderr[0]);
    EXPECT_NEAR(est.reward_mean, 1.0 / 0.55, 3 * est.reward_stderr);
    EXPECT_NEAR(est.mean_termination_time, 2.0, 0.05);
}

TEST(SimulateMacro, NeverExitingMacro) {
    Mdp m(2, 0.9, Objective::maximize_reward);
    m.add_action(0, {0, 1.0, RowClass::exact, {{0, 1.0}}});
    m.add_action(0, {1, 0.0, RowClass::exact, {{1, 1.0}}});
    m.add_action(1, {0, 0.0, RowClass::exact, {{1, 1.0}}});
    Decomposition d({0, 1}, 2);
    Periphery p = compute_peripheries(m, d);
    Macro stay{"stay", 0, {0}, {0}, {}};
    auto est = simulate_macro(m, p, stay, 0, 10, 3);
    EXPECT_EQ(est.transition_mean[0], 0.0);
    EXPECT_EQ(est.exited, 0u);
    const double truncated = (1.0 - std::pow(0.9, static_cast<double>(est.horizon))) / 0.1;
    EXPECT_NEAR(est.reward_mean, truncated, 1e-9);
    EXPECT_LT(std::pow(0.9, static_cast<double>(est.horizon)), 1e-8);
    EXPECT_GE(std::pow(0.9, static_cast<double>(est.horizon - 1)), 1e-8);
}

TEST(SimulateMacro, DeterministicPerSeedAndRejectsOutsideStart) {
    auto o = one_state(0.5, 1.0, 0.9);
    auto a = simulate_macro(o.mdp, o.p, o.m, 0, 1000, 5);
    auto b = simulate_macro(o.mdp, o.p, o.m, 0, 1000, 5);
    EXPECT_EQ(a.transition_mean, b.transition_mean);
    EXPECT_EQ(a.reward_mean, b.reward_mean);
    EXPECT_THROW(simulate_macro(o.mdp, o.p, o.m, 1, 10, 5), ValidationError);
}

TEST(MacroModelText, ListsNonzeroEntries) {
    auto c = corridor(Objective::minimize_cost, 1.0);
    MacroLibrary lib = build_macro_library(c.mdp, c.d, c.p, {c.right});
    const std::string text = write_macro_models(lib);
    EXPECT_NE(text.find("macro right region 0 exits 3"), std::string::npos);
    EXPECT_NE(text.find("start 0 reward 2.71"), std::string::npos);
}
