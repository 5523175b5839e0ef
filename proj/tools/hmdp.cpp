// Command-line front end: solve, decompose, macros, abstract, hybrid, experiment.

#include "hmdp/hmdp.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hmdp;

namespace {

enum Exit { ok = 0, parse_failure = 2, validation_failure = 3, iteration_cap = 4, other_failure = 5 };

struct IterationCap : Error {
    using Error::Error;
};

struct Options {
    std::string input, maze, builtin, decomposition, macros, strategy = "heuristic", seeds, revised, out = "hmdp-out";
    std::string init = "favorable", kind;
    std::optional<double> beta, epsilon, delta, eta_normal, eta_noisy, attract, repel, v_min, v_max;
    std::optional<std::size_t> probe, max_iterations, goal_row, goal_col;
    std::size_t tasks = 25;
    std::size_t max_macros = 4096;
    std::uint64_t seed = 1;
};

/// Banner lines "name value (source)", printed before any work.
class Banner {
public:
    explicit Banner(std::string command) : command_(std::move(command)) {}
    template <class T>
    void add(const std::string& name, const T& value, const char* source) {
        std::ostringstream s;
        s << value;
        lines_.push_back(name + ' ' + s.str() + " (" + source + ')');
    }
    void print() const {
        std::cout << "hmdp " << command_ << '\n';
        for (const auto& l : lines_) std::cout << "  " << l << '\n';
    }

private:
    std::string command_;
    std::vector<std::string> lines_;
};

void write_atomic(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << text;
        if (!out.flush()) throw Error("cannot write '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

std::string report_text(const SolveReport& r) {
    std::ostringstream out;
    out << "iterations " << r.iterations << '\n'
        << "backup_evaluations " << r.backup_evaluations << '\n'
        << "converged " << (r.converged ? "yes" : "no") << '\n'
        << "final_residual " << (r.residual_trace.empty() ? std::string("none") : format_double(r.residual_trace.back()))
        << '\n';
    return out.str();
}

void check_ranges(const Options& o) {
    if (o.beta && !(*o.beta > 0.0 && *o.beta < 1.0)) throw ValidationError("--beta must lie in (0, 1)");
    if (o.epsilon && !(*o.epsilon > 0.0)) throw ValidationError("--epsilon must be positive");
    if (o.delta && !(*o.delta > 0.0)) throw ValidationError("--delta must be positive");
    for (const auto& eta : {o.eta_normal, o.eta_noisy})
        if (eta && !(*eta >= 0.0 && *eta < 1.0)) throw ValidationError("slip probabilities must lie in [0, 1)");
    if (o.max_iterations && *o.max_iterations == 0) throw ValidationError("--max-iterations must be positive");
    if (o.v_min && o.v_max && !(*o.v_min <= *o.v_max)) throw ValidationError("--v-min must not exceed --v-max");
    const int sources = !o.input.empty() + !o.maze.empty() + !o.builtin.empty();
    if (sources > 1) throw ValidationError("give only one of --input, --maze, --builtin");
    if (!o.input.empty() && (o.eta_normal || o.eta_noisy))
        throw ValidationError("--eta-normal and --eta-noisy apply to maze inputs only");
    for (const auto* path : {&o.input, &o.maze, &o.decomposition, &o.macros, &o.seeds, &o.revised})
        if (!path->empty() && !fs::exists(*path)) throw ValidationError("file '" + *path + "' does not exist");
}

StopRule stop_rule(const Options& o, Banner& b) {
    StopRule stop;
    if (o.epsilon) stop.epsilon = *o.epsilon;
    if (o.max_iterations) stop.max_iterations = *o.max_iterations;
    b.add("epsilon", format_double(stop.epsilon), o.epsilon ? "flag" : "default");
    b.add("max_iterations", stop.max_iterations, o.max_iterations ? "flag" : "default");
    return stop;
}

/// The model, its decomposition and (for mazes) the maze itself.
struct Loaded {
    Mdp mdp;
    std::optional<Decomposition> decomposition;
    std::optional<MazeSpec> maze;
    std::optional<CompiledMaze> compiled;
};

Mdp with_discount(const Mdp& m, double beta) {
    Mdp out(m.state_count(), beta, m.objective());
    for (ActionId a = 0; a < m.action_names().size(); ++a)
        if (!m.action_names()[a].empty()) out.set_action_name(a, m.action_names()[a]);
    for (StateId s = 0; s < m.state_count(); ++s)
        for (const auto& row : m.actions(s)) out.add_action(s, row);
    return out;
}

MazeSpec apply_maze_overrides(MazeSpec spec, const Options& o, Banner* b) {
    const std::pair<const char*, const std::optional<double>*> overrides[] = {
        {"beta", &o.beta}, {"eta_normal", &o.eta_normal}, {"eta_noisy", &o.eta_noisy}};
    for (auto [key, flag] : overrides)
        if (flag->has_value()) *maze_param(spec.params, key) = **flag;
    if (b) {
        for (const char* key : kMazeKeys) {
            const bool from_flag = (std::string(key) == "beta" && o.beta) ||
                                   (std::string(key) == "eta_normal" && o.eta_normal) ||
                                   (std::string(key) == "eta_noisy" && o.eta_noisy);
            const char* source = from_flag ? "flag" : spec.explicit_keys.count(key) ? "file" : "default";
            b->add(key, format_double(*maze_param(spec.params, key)), source);
        }
    }
    check_maze(spec);
    return spec;
}

Loaded load(const Options& o, Banner& b, bool need_decomposition) {
    Loaded l;
    if (!o.maze.empty() || !o.builtin.empty()) {
        MazeSpec spec = o.maze.empty() ? builtin_instance(o.builtin) : parse_maze(read_file(o.maze));
        b.add("maze", o.maze.empty() ? "builtin:" + o.builtin : o.maze, "flag");
        spec = apply_maze_overrides(std::move(spec), o, &b);
        l.compiled = compile_maze(spec);
        l.mdp = l.compiled->mdp;
        l.decomposition = l.compiled->decomposition;
        if (!o.decomposition.empty()) l.decomposition = read_decomposition(read_file(o.decomposition));
        l.maze = std::move(spec);
    } else if (!o.input.empty()) {
        b.add("input", o.input, "flag");
        l.mdp = read_mdp(read_file(o.input));
        b.add("beta", format_double(o.beta.value_or(l.mdp.discount())), o.beta ? "flag" : "file");
        if (o.beta) l.mdp = with_discount(l.mdp, *o.beta);
        if (!o.decomposition.empty()) l.decomposition = read_decomposition(read_file(o.decomposition));
    } else {
        throw ValidationError("an input is required: --input, --maze or --builtin");
    }
    if (l.decomposition) {
        if (!o.decomposition.empty()) b.add("decomposition", o.decomposition, "flag");
        check_decomposition(l.mdp, *l.decomposition);
    } else if (need_decomposition) {
        throw ValidationError("--decomposition is required for --input models");
    }
    return l;
}

std::vector<Macro> make_macros(const Options& o, const Loaded& l, const Periphery& p, Banner& b, std::size_t& work,
                               std::size_t& candidates) {
    const Decomposition& d = *l.decomposition;
    work = 0;
    candidates = 0;
    if (!o.macros.empty()) {
        b.add("macros", o.macros, "flag");
        auto macros = read_macro_manifest(read_file(o.macros));
        for (const auto& m : macros) check_macro(l.mdp, d, m);
        candidates = macros.size();
        return macros;
    }
    b.add("strategy", o.strategy, o.strategy == "heuristic" ? "default" : "flag");
    if (o.strategy == "heuristic") {
        HeuristicSeeds seeds = default_heuristic_seeds(l.mdp);
        if (o.attract) seeds.attract = *o.attract;
        if (o.repel) seeds.repel = *o.repel;
        b.add("attract", format_double(seeds.attract), o.attract ? "flag" : "default");
        b.add("repel", format_double(seeds.repel), o.repel ? "flag" : "default");
        MacroSet set = heuristic_macros_all(l.mdp, d, p, seeds);
        work = set.work_units;
        candidates = set.candidates;
        return std::move(set.macros);
    }
    if (o.strategy == "coverage") {
        auto [lo, hi] = default_value_range(l.mdp);
        CoverageOptions c;
        c.v_min = o.v_min.value_or(lo);
        c.v_max = o.v_max.value_or(hi);
        c.delta = o.delta.value_or((c.v_max - c.v_min) / 4.0);
        c.max_macros = o.max_macros;
        if (!(c.delta > 0.0)) throw ValidationError("mesh spacing must be positive; set --delta");
        b.add("v_min", format_double(c.v_min), o.v_min ? "flag" : "default");
        b.add("v_max", format_double(c.v_max), o.v_max ? "flag" : "default");
        b.add("delta", format_double(c.delta), o.delta ? "flag" : "default");
        b.add("max_macros", c.max_macros, "flag");
        // Refuse before generating anything if any region is over the cap.
        const std::size_t per_axis = coverage_points_per_axis(c.v_min, c.v_max, c.delta);
        for (RegionId r = 0; r < d.region_count(); ++r) {
            const std::size_t size = coverage_mesh_size(p.exits[r].size(), per_axis);
            if (size > c.max_macros)
                throw ValidationError("coverage mesh for region " + std::to_string(r) + " has " +
                                      (size == npos ? std::string("more than 2^64") : std::to_string(size)) +
                                      " points, above the cap of " + std::to_string(c.max_macros));
        }
        std::vector<Macro> all;
        for (RegionId r = 0; r < d.region_count(); ++r) {
            MacroSet set = coverage_macro_set(l.mdp, d, p, r, c);
            work += set.work_units;
            candidates += set.candidates;
            for (auto& m : set.macros) all.push_back(std::move(m));
        }
        return all;
    }
    if (o.strategy == "seed-file") {
        if (o.seeds.empty()) throw ValidationError("--strategy seed-file needs --seeds");
        b.add("seeds", o.seeds, "flag");
        auto seeds = read_seed_file(read_file(o.seeds), p);
        std::vector<Macro> all;
        for (RegionId r = 0; r < d.region_count(); ++r) {
            auto g = generate_macro_from_seed(l.mdp, d, p, r, seeds[r], "r" + std::to_string(r) + "-seeded");
            work += g.work_units;
            all.push_back(std::move(g.macro));
        }
        candidates = all.size();
        return all;
    }
    throw ValidationError("unknown strategy '" + o.strategy + "' (seed-file, coverage, heuristic)");
}

int cmd_solve(const Options& o) {
    Banner b("solve");
    Loaded l = load(o, b, false);
    StopRule stop = stop_rule(o, b);
    b.add("out", o.out, "flag");
    b.print();
    Solution sol = value_iteration(l.mdp, ValueFunction(l.mdp.state_count(), 0.0), stop);
    const fs::path out(o.out);
    write_atomic(out / "values.txt", write_values(sol.values));
    write_atomic(out / "policy.txt", write_policy(l.mdp, sol.policy));
    write_atomic(out / "report.txt", report_text(sol.report));
    if (!sol.report.converged) throw IterationCap("value iteration hit the iteration cap");
    return ok;
}

int cmd_decompose(const Options& o) {
    Banner b("decompose");
    Loaded l = load(o, b, true);
    b.add("out", o.out, "flag");
    b.print();
    const Decomposition& d = *l.decomposition;
    const fs::path out(o.out);
    auto findings = validate_decomposition(l.mdp, d);
    Periphery p = compute_peripheries(l.mdp, d);
    std::ostringstream per;
    for (RegionId r = 0; r < d.region_count(); ++r) {
        per << "region " << r << " states " << d.states(r).size() << " exits";
        for (StateId s : p.exits[r]) per << ' ' << s;
        per << " entrances";
        for (StateId s : p.entrances[r]) per << ' ' << s;
        per << '\n';
    }
    per << "peripheral";
    for (StateId s : p.peripheral) per << ' ' << s;
    per << '\n';
    std::ostringstream fnd;
    for (const auto& f : findings) fnd << f.message << '\n';
    if (l.compiled) write_atomic(out / "model.mdp", write_mdp(l.mdp));
    write_atomic(out / "decomposition.txt", write_decomposition(d));
    write_atomic(out / "periphery.txt", per.str());
    write_atomic(out / "findings.txt", fnd.str());
    std::cout << "regions " << d.region_count() << " peripheral " << p.peripheral.size() << " findings "
              << findings.size() << '\n';
    return ok;
}

int cmd_macros(const Options& o) {
    Banner b("macros");
    Loaded l = load(o, b, true);
    b.add("out", o.out, "flag");
    const Decomposition& d = *l.decomposition;
    Periphery p = compute_peripheries(l.mdp, d);
    std::size_t work = 0, candidates = 0;
    auto macros = make_macros(o, l, p, b, work, candidates);
    b.print();
    MacroLibrary library = build_macro_library(l.mdp, d, p, macros);
    const fs::path out(o.out);
    write_atomic(out / "manifest.txt", write_macro_manifest(macros));
    write_atomic(out / "models.txt", write_macro_models(library));
    std::ostringstream w;
    w << "macros " << macros.size() << '\n'
      << "candidates " << candidates << '\n'
      << "generation_work " << work << '\n'
      << "model_work " << library_work(library) << '\n';
    write_atomic(out / "work.txt", w.str());
    std::cout << w.str();
    return ok;
}

std::string macro_policy_text(const AbstractMdp& a, const Policy& policy) {
    std::ostringstream out;
    for (std::size_t i = 0; i < policy.size(); ++i)
        out << a.base_state[i] << " macro " << a.macros[policy[i]].macro.name << '\n';
    return out.str();
}

int cmd_abstract(const Options& o) {
    Banner b("abstract");
    Loaded l = load(o, b, true);
    StopRule stop = stop_rule(o, b);
    b.add("out", o.out, "flag");
    const Decomposition& d = *l.decomposition;
    Periphery p = compute_peripheries(l.mdp, d);
    std::size_t work = 0, candidates = 0;
    auto macros = make_macros(o, l, p, b, work, candidates);
    b.print();
    AbstractMdp a = build_abstract_mdp(l.mdp, d, p, build_macro_library(l.mdp, d, p, std::move(macros)));
    Solution sol = solve_abstract(a, stop);
    const fs::path out(o.out);
    if (a.state_count() > 0) write_atomic(out / "abstract.mdp", write_mdp(a.mdp));
    write_atomic(out / "abstract.map", write_abstract_sidecar(a));
    std::ostringstream values;
    for (std::size_t i = 0; i < sol.values.size(); ++i) values << a.base_state[i] << ' ' << format_double(sol.values[i]) << '\n';
    write_atomic(out / "values.txt", values.str());
    write_atomic(out / "policy.txt", macro_policy_text(a, sol.policy));
    write_atomic(out / "report.txt", report_text(sol.report));
    if (!sol.report.converged) throw IterationCap("abstract value iteration hit the iteration cap");
    return ok;
}

int cmd_hybrid(const Options& o) {
    Banner b("hybrid");
    Loaded l = load(o, b, true);
    StopRule stop = stop_rule(o, b);
    b.add("out", o.out, "flag");
    const Decomposition& d = *l.decomposition;
    Periphery p = compute_peripheries(l.mdp, d);

    Mdp revised;
    if (o.goal_row || o.goal_col) {
        if (!l.maze) throw ValidationError("--goal-row/--goal-col need a maze input");
        if (!o.goal_row || !o.goal_col) throw ValidationError("give both --goal-row and --goal-col");
        b.add("goal", std::to_string(*o.goal_row) + "," + std::to_string(*o.goal_col), "flag");
        revised = compile_maze(relocate_goal(*l.maze, {*o.goal_row, *o.goal_col})).mdp;
    } else if (!o.revised.empty()) {
        b.add("revised", o.revised, "flag");
        if (l.maze) {
            revised = compile_maze(apply_maze_overrides(parse_maze(read_file(o.revised)), o, nullptr)).mdp;
        } else {
            revised = read_mdp(read_file(o.revised));
            if (o.beta) revised = with_discount(revised, *o.beta);
        }
    } else {
        throw ValidationError("hybrid needs --revised or --goal-row/--goal-col");
    }
    if (revised.state_count() != l.mdp.state_count())
        throw ValidationError("revised model has a different state space");
    std::size_t work = 0, candidates = 0;
    auto macros = make_macros(o, l, p, b, work, candidates);
    auto regions = changed_regions(l.mdp, revised, d);
    std::ostringstream rs;
    for (std::size_t i = 0; i < regions.size(); ++i) rs << (i ? "," : "") << regions[i];
    b.add("revised_regions", regions.empty() ? std::string("none") : rs.str(), "derived");
    b.print();

    AbstractMdp a = build_abstract_mdp(l.mdp, d, p, build_macro_library(l.mdp, d, p, std::move(macros)));
    Solution prior = solve_abstract(a, stop);
    LocalRevision rev = LocalRevision::from_mdp(revised, d, regions);
    HybridMdp h = build_hybrid_mdp(a, l.mdp, rev);
    WarmStart warm = hybrid_warm_start(h, a, prior.values);
    Solution sol = solve_hybrid(h, warm.values, stop);
    const fs::path out(o.out);
    if (h.state_count() > 0) write_atomic(out / "hybrid.mdp", write_mdp(h.mdp));
    write_atomic(out / "hybrid.map", write_hybrid_sidecar(h, l.mdp));
    std::ostringstream values;
    for (std::size_t i = 0; i < sol.values.size(); ++i) values << h.base_state[i] << ' ' << format_double(sol.values[i]) << '\n';
    write_atomic(out / "values.txt", values.str());
    write_atomic(out / "policy.txt", write_mixed_policy(h, sol.policy));
    write_atomic(out / "report.txt", report_text(sol.report) + "warm_start_backups " +
                                         std::to_string(warm.backup_evaluations) + '\n');
    if (!sol.report.converged) throw IterationCap("hybrid value iteration hit the iteration cap");
    return ok;
}

int cmd_experiment(const Options& o) {
    Banner b("experiment");
    if (o.kind != "convergence" && o.kind != "reuse")
        throw ValidationError("experiment kind must be convergence or reuse");
    b.add("kind", o.kind, "flag");
    if (o.maze.empty() && o.builtin.empty()) throw ValidationError("experiments need --maze or --builtin");
    MazeSpec spec = o.maze.empty() ? builtin_instance(o.builtin) : parse_maze(read_file(o.maze));
    b.add("maze", o.maze.empty() ? "builtin:" + o.builtin : o.maze, "flag");
    spec = apply_maze_overrides(std::move(spec), o, &b);
    StopRule stop = stop_rule(o, b);
    MazeInstance in = MazeInstance::make(o.maze.empty() ? o.builtin : fs::path(o.maze).stem().string(), std::move(spec));
    const fs::path out(o.out);

    if (o.kind == "convergence") {
        if (in.periphery.peripheral.empty()) throw ValidationError("instance has no peripheral state to probe");
        const StateId probe = o.probe.value_or(in.periphery.peripheral.front());
        BoundInit init;
        if (o.init == "favorable") init = BoundInit::favorable;
        else if (o.init == "unfavorable") init = BoundInit::unfavorable;
        else throw ValidationError("--init must be favorable or unfavorable");
        b.add("probe", probe, o.probe ? "flag" : "default");
        b.add("init", o.init, "flag");
        b.add("out", o.out, "flag");
        b.print();
        ConvergenceResult r = convergence_experiment(in, probe, init, stop);
        std::ostringstream summary;
        for (const auto* t : {&r.original, &r.augmented, &r.abstract}) {
            write_atomic(out / ("convergence_" + t->model + ".csv"), convergence_csv(*t));
            summary << t->model << " iterations " << t->iterations << " backups "
                    << (t->backups.empty() ? 0 : t->backups.back()) << " settle_backups " << t->backups_to_settle()
                    << " final " << format_double(t->final_value()) << '\n';
        }
        write_atomic(out / "convergence_summary.txt", summary.str());
        std::cout << summary.str();
        return ok;
    }
    b.add("tasks", o.tasks, "flag");
    b.add("seed", o.seed, "flag");
    b.add("out", o.out, "flag");
    b.print();
    ReuseReport r = reuse_experiment(in, o.tasks, o.seed, stop);
    write_atomic(out / "reuse.csv", reuse_csv(r));
    write_atomic(out / "reuse_summary.txt", reuse_summary(r));
    std::cout << reuse_summary(r);
    return ok;
}

void add_inputs(CLI::App* c, Options& o) {
    c->add_option("--input", o.input, "MDP text file");
    c->add_option("--maze", o.maze, "maze text file");
    c->add_option("--builtin", o.builtin, "builtin maze: four_room, maze36, maze66, maze121");
    c->add_option("--decomposition", o.decomposition, "decomposition file");
    c->add_option("--beta", o.beta, "discount factor");
    c->add_option("--eta-normal", o.eta_normal, "slip probability on normal cells");
    c->add_option("--eta-noisy", o.eta_noisy, "slip probability on noisy cells");
    c->add_option("--out", o.out, "output directory");
}

void add_stop(CLI::App* c, Options& o) {
    c->add_option("--epsilon", o.epsilon, "stopping threshold on the max-norm residual");
    c->add_option("--max-iterations", o.max_iterations, "iteration cap");
}

void add_macro_source(CLI::App* c, Options& o) {
    c->add_option("--macros", o.macros, "macro manifest (overrides --strategy)");
    c->add_option("--strategy", o.strategy, "seed-file, coverage or heuristic");
    c->add_option("--seeds", o.seeds, "seed file for --strategy seed-file");
    c->add_option("--delta", o.delta, "coverage mesh spacing");
    c->add_option("--v-min", o.v_min, "coverage range lower end");
    c->add_option("--v-max", o.v_max, "coverage range upper end");
    c->add_option("--max-macros", o.max_macros, "coverage mesh cap per region");
    c->add_option("--attract", o.attract, "heuristic attract seed");
    c->add_option("--repel", o.repel, "heuristic repel seed");
}

void diagnose(const char* kind, const std::string& message) {
    std::string one_line = message;
    for (char& c : one_line)
        if (c == '\n') c = ' ';
    std::cerr << "hmdp-error " << kind << ": " << one_line << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical MDP solver with macro-actions"};
    app.require_subcommand(1);
    Options o;

    auto* solve = app.add_subcommand("solve", "value iteration on a flat model");
    add_inputs(solve, o);
    add_stop(solve, o);

    auto* decompose = app.add_subcommand("decompose", "peripheries and decomposition diagnostics");
    add_inputs(decompose, o);

    auto* macros = app.add_subcommand("macros", "generate macros and their models");
    add_inputs(macros, o);
    add_macro_source(macros, o);

    auto* abstract = app.add_subcommand("abstract", "build and solve the abstract MDP");
    add_inputs(abstract, o);
    add_stop(abstract, o);
    add_macro_source(abstract, o);

    auto* hybrid = app.add_subcommand("hybrid", "solve a locally revised model with the hybrid MDP");
    add_inputs(hybrid, o);
    add_stop(hybrid, o);
    add_macro_source(hybrid, o);
    hybrid->add_option("--revised", o.revised, "revised model (maze or MDP, matching the input kind)");
    hybrid->add_option("--goal-row", o.goal_row, "relocate the maze goal to this row");
    hybrid->add_option("--goal-col", o.goal_col, "relocate the maze goal to this column");

    auto* experiment = app.add_subcommand("experiment", "convergence or reuse experiment");
    experiment->add_option("kind", o.kind, "convergence or reuse")->required();
    add_inputs(experiment, o);
    add_stop(experiment, o);
    experiment->add_option("--probe", o.probe, "probe state (peripheral)");
    experiment->add_option("--init", o.init, "favorable or unfavorable");
    experiment->add_option("--tasks", o.tasks, "number of goal tasks");
    experiment->add_option("--seed", o.seed, "master random seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        diagnose("usage", e.what());
        return validation_failure;
    }

    try {
        check_ranges(o);
        if (*solve) return cmd_solve(o);
        if (*decompose) return cmd_decompose(o);
        if (*macros) return cmd_macros(o);
        if (*abstract) return cmd_abstract(o);
        if (*hybrid) return cmd_hybrid(o);
        if (*experiment) return cmd_experiment(o);
    } catch (const ParseError& e) {
        diagnose("parse", e.what());
        return parse_failure;
    } catch (const ValidationError& e) {
        diagnose("validation", e.what());
        return validation_failure;
    } catch (const IterationCap& e) {
        diagnose("iteration-cap", e.what());
        return iteration_cap;
    } catch (const std::exception& e) {
        diagnose("error", e.what());
        return other_failure;
    }
    return other_failure;
}
