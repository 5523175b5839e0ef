#include "hmdp/hmdp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace hmdp;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST(Aec, MeanOverStatesAndTasks) {
    EXPECT_DOUBLE_EQ(aec({{1.0, 2.0}, {3.0, 4.0}}), 2.5);
    EXPECT_DOUBLE_EQ(aec({{7.0}}), 7.0);
    EXPECT_THROW(aec({}), ValidationError);
    EXPECT_THROW(aec({{}}), ValidationError);
    EXPECT_EQ(restrict_values({5.0, 6.0, 7.0}, {2, 0}), (ValueFunction{7.0, 5.0}));
}

TEST(Amortization, SmallestProfitableTaskCount) {
    EXPECT_EQ(amortization_threshold(100.0, 10.0, 5.0), 21u);
    EXPECT_EQ(amortization_threshold(100.0, 10.0, 6.0), 26u);
    EXPECT_EQ(amortization_threshold(0.0, 10.0, 6.0), 1u);
    EXPECT_FALSE(amortization_threshold(100.0, 10.0, 10.0).has_value());
    EXPECT_FALSE(amortization_threshold(100.0, 10.0, 12.0).has_value());
    // Brute force: first n where delay + n h < n f.
    for (double delay : {0.0, 3.0, 50.0, 999.0})
        for (double f : {4.0, 9.5, 20.0})
            for (double h : {1.0, 3.25, 8.0}) {
                if (h >= f) {
                    EXPECT_FALSE(amortization_threshold(delay, f, h).has_value());
                    continue;
                }
                std::size_t n = 1;
                while (!(delay + n * h < n * f)) ++n;
                EXPECT_EQ(amortization_threshold(delay, f, h), n) << delay << ' ' << f << ' ' << h;
            }
}

TEST(ConvergenceTrace, SettlingPoint) {
    ConvergenceTrace t;
    t.backups = {10, 20, 30, 40, 50};
    t.probe_values = {9.0, 5.0, 5.02, 5.005, 5.0};
    t.iterations = 5;
    EXPECT_EQ(t.backups_to_settle(), 40u);
    EXPECT_EQ(t.backups_to_settle(0.05), 20u);
    EXPECT_EQ(t.backups_to_settle(10.0), 10u);
}

TEST(Convergence, ModelsAgreeOnTheProbe) {
    MazeInstance in = MazeInstance::builtin("four_room");
    const StateId probe = in.periphery.peripheral.front();
    for (auto init : {BoundInit::favorable, BoundInit::unfavorable}) {
        auto r = convergence_experiment(in, probe, init);
        const double expected_start = init == BoundInit::favorable ? in.mdp().reward_range().second / 0.05 : 0.0;
        EXPECT_NEAR(r.initial_value, expected_start, 1e-9);
        const double slack = 2 * 0.01 * 0.95 / 0.05;
        EXPECT_TRUE(r.original.converged && r.augmented.converged && r.abstract.converged);
        EXPECT_NEAR(r.augmented.final_value(), r.original.final_value(), slack);
        EXPECT_GE(r.abstract.final_value(), r.original.final_value() - slack);
        EXPECT_EQ(r.original.backups.back(), r.original.iterations * in.mdp().pair_count());
        const std::string csv = convergence_csv(r.abstract);
        EXPECT_EQ(csv.rfind("model,iteration,backups,probe_value\n", 0), 0u);
        EXPECT_EQ(count_lines(csv), r.abstract.iterations + 1);
    }
    StateId inner = npos;
    for (StateId s = 0; s < in.mdp().state_count(); ++s)
        if (!in.periphery.is_peripheral[s]) inner = s;
    EXPECT_THROW(convergence_experiment(in, inner, BoundInit::favorable), ValidationError);
}

TEST(Reuse, GoalCandidatesAvoidPeripheryAndTerminals) {
    MazeInstance in = MazeInstance::builtin("four_room");
    auto c = goal_candidates(in);
    EXPECT_EQ(c.size(), 59u);
    for (Cell x : c) {
        EXPECT_FALSE(in.periphery.is_peripheral[in.compiled.state_of[x.row][x.col]]);
        EXPECT_EQ(in.spec.terminal(x), Terminal::none);
    }
}

TEST(Reuse, TaskRecordsAreConsistent) {
    MazeInstance in = MazeInstance::builtin("four_room");
    auto r = reuse_experiment(in, 6, 3);
    ASSERT_EQ(r.tasks.size(), 6u);
    EXPECT_EQ(r.macro_count, 12u);
    EXPECT_EQ(r.delay, r.generation_work + r.model_work + r.abstract_work);
    std::vector<Cell> seen;
    const double slack = 2 * 0.01 * 0.95 / 0.05;
    for (const auto& t : r.tasks) {
        EXPECT_EQ(std::count(seen.begin(), seen.end(), t.goal), 0);
        seen.push_back(t.goal);
        EXPECT_FALSE(in.periphery.is_peripheral[t.goal_state]);
        // Only the old goal room and the new goal room change.
        auto task = compile_maze(relocate_goal(in.spec, t.goal));
        EXPECT_EQ(changed_regions(in.mdp(), task.mdp, in.decomposition()), t.revised);
        EXPECT_GT(t.flat_work, 0u);
        EXPECT_GT(t.hybrid_work, 0u);
        EXPECT_GE(t.hybrid_aec, t.optimal_aec - 1e-6);
        EXPECT_GE(t.flat_aec, t.optimal_aec - 1e-6);
        EXPECT_LE(t.flat_aec, t.hybrid_aec + slack);
    }
    for (Cell c : r.resampled) EXPECT_TRUE(in.periphery.is_peripheral[in.compiled.state_of[c.row][c.col]]);
    const auto threshold = amortization_threshold(r);
    if (r.flat_average_work() > r.hybrid_average_work()) {
        ASSERT_TRUE(threshold.has_value());
        const double gain = r.flat_average_work() - r.hybrid_average_work();
        EXPECT_LT(static_cast<double>(r.delay) + *threshold * r.hybrid_average_work(), *threshold * r.flat_average_work());
        EXPECT_GE(static_cast<double>(r.delay), (*threshold - 1) * gain);
    }
}

TEST(Reuse, DeterministicPerSeed) {
    MazeInstance in = MazeInstance::builtin("maze36");
    auto a = reuse_experiment(in, 4, 11);
    auto b = reuse_experiment(in, 4, 11);
    EXPECT_EQ(reuse_csv(a), reuse_csv(b));
    EXPECT_EQ(reuse_summary(a), reuse_summary(b));
    auto c = reuse_experiment(in, 4, 12);
    bool differs = false;
    for (std::size_t i = 0; i < 4; ++i) differs |= !(a.tasks[i].goal == c.tasks[i].goal);
    EXPECT_TRUE(differs);
}

TEST(Reuse, ZeroTasksStillReportsDelay) {
    MazeInstance in = MazeInstance::builtin("maze36");
    auto r = reuse_experiment(in, 0, 1);
    EXPECT_TRUE(r.tasks.empty());
    EXPECT_GT(r.delay, 0u);
    EXPECT_FALSE(amortization_threshold(r).has_value());
    const std::string s = reuse_summary(r);
    EXPECT_NE(s.find("amortization_threshold none\n"), std::string::npos);
    EXPECT_NE(s.find("delay " + std::to_string(r.delay) + "\n"), std::string::npos);
    EXPECT_EQ(reuse_csv(r), "task,method,work,aec\n");
}

TEST(Reuse, RejectsTooManyTasks) {
    MazeInstance in = MazeInstance::builtin("maze36");
    EXPECT_THROW(reuse_experiment(in, 27, 1), ValidationError);
}

TEST(Reuse, CsvHasTwoRowsPerTask) {
    MazeInstance in = MazeInstance::builtin("four_room");
    auto r = reuse_experiment(in, 3, 5);
    const std::string csv = reuse_csv(r);
    EXPECT_EQ(count_lines(csv), 7u);
    EXPECT_NE(csv.find("0,flat,"), std::string::npos);
    EXPECT_NE(csv.find("2,hybrid,"), std::string::npos);
    const std::string s = reuse_summary(r);
    for (const char* key : {"instance four_room", "seed 5", "tasks 3", "flat_average_work", "hybrid_average_work",
                            "flat_aec", "hybrid_aec", "amortization_threshold", "resampled"})
        EXPECT_NE(s.find(key), std::string::npos) << key;
}
