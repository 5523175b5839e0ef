#pragma once

#include "hmdp/hierarchy.hpp"
#include "hmdp/macro_generation.hpp"
#include "hmdp/macro_model.hpp"
#include "hmdp/maze.hpp"
#include "hmdp/random.hpp"
#include "hmdp/solve.hpp"

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace hmdp {

/// Mean expected cost over every (peripheral state, task) pair.
inline double aec(const std::vector<ValueFunction>& per_task) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& v : per_task) {
        if (v.empty()) throw ValidationError("AEC needs a nonempty peripheral set");
        for (double x : v) sum += x;
        count += v.size();
    }
    if (count == 0) throw ValidationError("AEC needs at least one task");
    return sum / static_cast<double>(count);
}

/// Values of `v` at the listed states.
inline ValueFunction restrict_values(const ValueFunction& v, const std::vector<StateId>& states) {
    ValueFunction out;
    out.reserve(states.size());
    for (StateId s : states) out.push_back(v.at(s));
    return out;
}

/// Everything the experiments need about one maze.
struct MazeInstance {
    std::string name;
    MazeSpec spec;
    CompiledMaze compiled;
    Periphery periphery;

    static MazeInstance make(std::string name, MazeSpec spec) {
        MazeInstance in{std::move(name), std::move(spec), {}, {}};
        in.compiled = compile_maze(in.spec);
        in.periphery = compute_peripheries(in.compiled.mdp, in.compiled.decomposition);
        return in;
    }
    static MazeInstance builtin(const std::string& name) { return make(name, builtin_instance(name)); }

    const Mdp& mdp() const noexcept { return compiled.mdp; }
    const Decomposition& decomposition() const noexcept { return compiled.decomposition; }
};

/// Heuristic macros for every region with their models; work is local solves plus model row operations.
struct PreparedMacros {
    MacroLibrary library;
    std::size_t generation_work = 0;
    std::size_t model_work = 0;
};

inline PreparedMacros prepare_heuristic_macros(const MazeInstance& in) {
    PreparedMacros out;
    MacroSet set = heuristic_macros_all(in.mdp(), in.decomposition(), in.periphery, default_heuristic_seeds(in.mdp()));
    out.generation_work = set.work_units;
    out.library = build_macro_library(in.mdp(), in.decomposition(), in.periphery, std::move(set.macros));
    out.model_work = library_work(out.library);
    return out;
}

// ---------------------------------------------------------------------------
// Convergence comparison

enum class BoundInit { favorable, unfavorable };

inline const char* to_string(BoundInit b) { return b == BoundInit::favorable ? "favorable" : "unfavorable"; }

struct ConvergenceTrace {
    std::string model;
    std::vector<std::size_t> backups;  ///< cumulative, one entry per iteration
    std::vector<double> probe_values;
    std::size_t iterations = 0;
    bool converged = false;

    double final_value() const { return probe_values.empty() ? std::nan("") : probe_values.back(); }

    /// Cumulative backups after which the probe value stays within `band` of its final value.
    std::size_t backups_to_settle(double band = 0.01) const {
        std::size_t i = probe_values.size();
        while (i > 0 && std::abs(probe_values[i - 1] - final_value()) <= band) --i;
        return i < backups.size() ? backups[i] : 0;
    }
};

struct ConvergenceResult {
    StateId probe = 0;
    BoundInit init = BoundInit::favorable;
    double initial_value = 0.0;
    ConvergenceTrace original, augmented, abstract;
};

/**
 * Value iteration from a constant bound on the original, augmented and
 * abstract models with heuristic macros, recording the probe state's value
 * against cumulative backup evaluations. The favorable bound is the one
 * iteration moves away from: the upper bound under cost minimization.
 */
inline ConvergenceResult convergence_experiment(const MazeInstance& in, StateId probe, BoundInit init,
                                                const StopRule& stop = {}) {
    if (probe >= in.mdp().state_count() || !in.periphery.is_peripheral[probe])
        throw ValidationError("probe state must be peripheral so every model contains it");
    PreparedMacros prepared = prepare_heuristic_macros(in);
    const bool cost = in.mdp().objective() == Objective::minimize_cost;
    const bool upper = (init == BoundInit::favorable) == cost;
    ConvergenceResult out;
    out.probe = probe;
    out.init = init;
    out.initial_value = bound_values(in.mdp(), upper).at(0);

    auto run = [&](const std::string& name, const Mdp& mdp, StateId p) {
        Solution sol = value_iteration(mdp, ValueFunction(mdp.state_count(), out.initial_value), stop, p);
        ConvergenceTrace t;
        t.model = name;
        t.iterations = sol.report.iterations;
        t.converged = sol.report.converged;
        t.probe_values = sol.report.value_trace;
        const std::size_t per = mdp.pair_count();
        for (std::size_t i = 1; i <= t.iterations; ++i) t.backups.push_back(i * per);
        return t;
    };
    out.original = run("original", in.mdp(), probe);
    Mdp augmented = build_augmented_mdp(in.mdp(), in.decomposition(), in.periphery, prepared.library);
    out.augmented = run("augmented", augmented, probe);
    AbstractMdp a = build_abstract_mdp(in.mdp(), in.decomposition(), in.periphery, prepared.library);
    out.abstract = run("abstract", a.mdp, a.abstract_of[probe]);
    return out;
}

inline std::string convergence_csv(const ConvergenceTrace& t) {
    std::ostringstream out;
    out << "model,iteration,backups,probe_value\n";
    for (std::size_t i = 0; i < t.iterations; ++i)
        out << t.model << ',' << i + 1 << ',' << t.backups[i] << ',' << format_double(t.probe_values[i]) << '\n';
    return out.str();
}

// ---------------------------------------------------------------------------
// Multi-task reuse

struct TaskRecord {
    std::size_t task = 0;
    Cell goal{};
    StateId goal_state = 0;
    std::vector<RegionId> revised;
    std::size_t flat_work = 0;
    std::size_t hybrid_work = 0;
    std::size_t flat_iterations = 0;
    std::size_t hybrid_iterations = 0;
    double flat_aec = 0.0;     ///< exact value of the flat method's policy
    double hybrid_aec = 0.0;   ///< exact value of the hybrid method's policy
    double optimal_aec = 0.0;  ///< tightly solved optimum, as reference
};

struct ReuseReport {
    std::string instance;
    std::uint64_t seed = 0;
    std::size_t macro_count = 0;
    std::size_t generation_work = 0;
    std::size_t model_work = 0;
    std::size_t abstract_work = 0;
    std::size_t delay = 0;  ///< generation + model + abstract solve of the unrevised task
    std::size_t base_flat_work = 0;
    std::vector<TaskRecord> tasks;
    std::vector<Cell> resampled;  ///< draws rejected for lying on a region periphery

    double flat_average_work() const {
        double s = 0.0;
        for (const auto& t : tasks) s += static_cast<double>(t.flat_work);
        return tasks.empty() ? 0.0 : s / static_cast<double>(tasks.size());
    }
    double hybrid_average_work() const {
        double s = 0.0;
        for (const auto& t : tasks) s += static_cast<double>(t.hybrid_work);
        return tasks.empty() ? 0.0 : s / static_cast<double>(tasks.size());
    }
    double flat_aec() const {
        double s = 0.0;
        for (const auto& t : tasks) s += t.flat_aec;
        return tasks.empty() ? 0.0 : s / static_cast<double>(tasks.size());
    }
    double hybrid_aec() const {
        double s = 0.0;
        for (const auto& t : tasks) s += t.hybrid_aec;
        return tasks.empty() ? 0.0 : s / static_cast<double>(tasks.size());
    }
};

/**
 * Smallest task count n with delay + n * hybrid < n * flat, or nothing
 * when hybrid solving is not cheaper per task.
 */
inline std::optional<std::size_t> amortization_threshold(double delay, double flat_average, double hybrid_average) {
    const double gain = flat_average - hybrid_average;
    if (!(gain > 0.0)) return std::nullopt;
    return static_cast<std::size_t>(std::floor(delay / gain)) + 1;
}

inline std::optional<std::size_t> amortization_threshold(const ReuseReport& r) {
    if (r.tasks.empty()) return std::nullopt;
    return amortization_threshold(static_cast<double>(r.delay), r.flat_average_work(), r.hybrid_average_work());
}

/// Cells eligible as a relocated goal: passable, not absorbing, off every periphery.
inline std::vector<Cell> goal_candidates(const MazeInstance& in) {
    std::vector<Cell> out;
    for (StateId s = 0; s < in.mdp().state_count(); ++s) {
        const Cell c = in.compiled.cell_of[s];
        if (in.spec.terminal(c) == Terminal::none && !in.periphery.is_peripheral[s]) out.push_back(c);
    }
    return out;
}

/**
 * Moves the goal to `n_tasks` distinct random cells. Each task is solved
 * flat (value iteration warm-started from the unrevised solution) and with
 * the hybrid model (revised rooms expanded, other rooms on their heuristic
 * macros, warm-started from the unrevised abstract solution).
 */
inline ReuseReport reuse_experiment(const MazeInstance& in, std::size_t n_tasks, std::uint64_t seed,
                                    const StopRule& stop = {}) {
    const Mdp& base = in.mdp();
    const Decomposition& d = in.decomposition();
    const auto goals = in.spec.goals();
    if (goals.empty()) throw ValidationError("instance has no goal cell to relocate");
    const std::size_t eligible = goal_candidates(in).size();
    if (eligible < n_tasks)
        throw ValidationError("instance has " + std::to_string(eligible) + " candidate goal cells, " +
                              std::to_string(n_tasks) + " tasks requested");

    ReuseReport report;
    report.instance = in.name;
    report.seed = seed;
    PreparedMacros prepared = prepare_heuristic_macros(in);
    report.macro_count = prepared.library.size();
    report.generation_work = prepared.generation_work;
    report.model_work = prepared.model_work;
    AbstractMdp abstract = build_abstract_mdp(base, d, in.periphery, prepared.library);
    Solution abstract0 = solve_abstract(abstract, stop);
    report.abstract_work = abstract0.report.backup_evaluations;
    report.delay = report.generation_work + report.model_work + report.abstract_work;

    Solution flat0 = value_iteration(base, ValueFunction(base.state_count(), 0.0), stop);
    report.base_flat_work = flat0.report.backup_evaluations;

    std::vector<RegionId> goal_regions;
    for (Cell g : goals) goal_regions.push_back(d.region_of(in.compiled.state_of[g.row][g.col]));

    // Draw without replacement from the cells that may hold the new goal.
    std::vector<Cell> pool;
    for (StateId s = 0; s < base.state_count(); ++s)
        if (in.spec.terminal(in.compiled.cell_of[s]) == Terminal::none) pool.push_back(in.compiled.cell_of[s]);
    Rng rng(stream_seed(seed, "reuse-goals"));

    const StopRule tight{1e-9, 1'000'000};
    while (report.tasks.size() < n_tasks) {
        const std::size_t pick = static_cast<std::size_t>(rng.below(pool.size()));
        const Cell goal = pool[pick];
        pool[pick] = pool.back();
        pool.pop_back();
        const StateId gs = in.compiled.state_of[goal.row][goal.col];
        if (in.periphery.is_peripheral[gs]) {
            report.resampled.push_back(goal);
            continue;
        }
        TaskRecord rec;
        rec.task = report.tasks.size();
        rec.goal = goal;
        rec.goal_state = gs;
        rec.revised = goal_regions;
        rec.revised.push_back(d.region_of(gs));

        const CompiledMaze task = compile_maze(relocate_goal(in.spec, goal));
        if (!(task.decomposition == d)) throw SolverError("goal relocation changed the decomposition");
        LocalRevision revision = LocalRevision::from_mdp(task.mdp, d, rec.revised);
        rec.revised = revision.regions;

        Solution flat = value_iteration(task.mdp, flat0.values, stop);
        rec.flat_work = flat.report.backup_evaluations;
        rec.flat_iterations = flat.report.iterations;
        rec.flat_aec = aec({restrict_values(evaluate_policy(task.mdp, flat.policy), in.periphery.peripheral)});
        Solution optimal = value_iteration(task.mdp, flat.values, tight);
        rec.optimal_aec = aec({restrict_values(optimal.values, in.periphery.peripheral)});

        HybridMdp hybrid = build_hybrid_mdp(abstract, base, revision);
        WarmStart warm = hybrid_warm_start(hybrid, abstract, abstract0.values);
        Solution hs = solve_hybrid(hybrid, std::move(warm.values), stop);
        rec.hybrid_work = warm.backup_evaluations + hs.report.backup_evaluations;
        rec.hybrid_iterations = hs.report.iterations;
        const ValueFunction hv = evaluate_policy(hybrid.mdp, hs.policy);
        ValueFunction at_per;
        for (StateId s : in.periphery.peripheral) at_per.push_back(hv[hybrid.hybrid_of[s]]);
        rec.hybrid_aec = aec({at_per});
        report.tasks.push_back(std::move(rec));
    }
    return report;
}

inline std::string reuse_csv(const ReuseReport& r) {
    std::ostringstream out;
    out << "task,method,work,aec\n";
    for (const auto& t : r.tasks) {
        out << t.task << ",flat," << t.flat_work << ',' << format_double(t.flat_aec) << '\n';
        out << t.task << ",hybrid," << t.hybrid_work << ',' << format_double(t.hybrid_aec) << '\n';
    }
    return out.str();
}

inline std::string reuse_summary(const ReuseReport& r) {
    std::ostringstream out;
    const auto threshold = amortization_threshold(r);
    out << "instance " << r.instance << '\n'
        << "seed " << r.seed << '\n'
        << "tasks " << r.tasks.size() << '\n'
        << "macros " << r.macro_count << '\n'
        << "delay " << r.delay << '\n'
        << "delay_generation " << r.generation_work << '\n'
        << "delay_models " << r.model_work << '\n'
        << "delay_abstract " << r.abstract_work << '\n'
        << "flat_average_work " << format_double(r.flat_average_work()) << '\n'
        << "hybrid_average_work " << format_double(r.hybrid_average_work()) << '\n'
        << "flat_aec " << (r.tasks.empty() ? std::string("none") : format_double(r.flat_aec())) << '\n'
        << "hybrid_aec " << (r.tasks.empty() ? std::string("none") : format_double(r.hybrid_aec())) << '\n'
        << "amortization_threshold " << (threshold ? std::to_string(*threshold) : std::string("none")) << '\n'
        << "resampled";
    for (Cell c : r.resampled) out << ' ' << c.row << ',' << c.col;
    out << '\n';
    return out.str();
}

} // namespace hmdp
