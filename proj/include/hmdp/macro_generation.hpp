#pragma once

#include "hmdp/decomposition.hpp"
#include "hmdp/macro_model.hpp"
#include "hmdp/solve.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace hmdp {

/// Assumed value of each exit state of one region, aligned with Periphery::exits[region].
using SeedFunction = std::vector<double>;

/// Stopping threshold for solving local MDPs.
inline constexpr double kLocalSolveEpsilon = 1e-6;

/**
 * Region plus its exit states plus an absorbing sink. Local state order:
 * region states, then exits, then the sink. Each exit has one action that
 * pays its seed and moves to the sink with certainty.
 */
struct LocalMdp {
    Mdp mdp;
    RegionId region = 0;
    std::vector<StateId> region_states;
    std::vector<StateId> exits;
    StateId sink = 0;
};

inline LocalMdp build_local_mdp(const Mdp& mdp, const Decomposition& d, const Periphery& periphery, RegionId region,
                                const SeedFunction& seed) {
    check_decomposition(mdp, d);
    if (region >= d.region_count()) throw ValidationError("unknown region " + std::to_string(region));
    const auto& states = d.states(region);
    const auto& exits = periphery.exits.at(region);
    if (seed.size() != exits.size())
        throw ValidationError("seed for region " + std::to_string(region) + " has " + std::to_string(seed.size()) +
                              " values but the region has " + std::to_string(exits.size()) + " exit states");
    for (double v : seed)
        if (!std::isfinite(v)) throw ValidationError("seed values must be finite");

    const std::size_t n = states.size();
    const std::size_t k = exits.size();
    LocalMdp local{Mdp(n + k + 1, mdp.discount(), mdp.objective()), region, states, exits, n + k};
    for (ActionId a = 0; a < mdp.action_names().size(); ++a)
        if (!mdp.action_names()[a].empty()) local.mdp.set_action_name(a, mdp.action_names()[a]);

    auto local_index = [&](StateId t) -> StateId {
        auto it = std::lower_bound(states.begin(), states.end(), t);
        if (it != states.end() && *it == t) return static_cast<StateId>(it - states.begin());
        const std::size_t j = periphery.exit_index(region, t);
        if (j == npos) throw ValidationError("region " + std::to_string(region) + " reaches non-exit state " + std::to_string(t));
        return n + j;
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& row : mdp.actions(states[i])) {
            ActionRow copy = row;
            for (auto& t : copy.successors) t.state = local_index(t.state);
            local.mdp.add_action(i, std::move(copy));
        }
    }
    for (std::size_t j = 0; j < k; ++j)
        local.mdp.add_action(n + j, ActionRow{0, seed[j], RowClass::exact, {{local.sink, 1.0}}});
    local.mdp.add_action(local.sink, ActionRow{0, 0.0, RowClass::exact, {{local.sink, 1.0}}});
    return local;
}

struct GeneratedMacro {
    Macro macro;
    std::size_t work_units = 0;  ///< backup evaluations of the local solve
};

/// Solves the local MDP and keeps the greedy policy on the region's states.
inline GeneratedMacro generate_macro_from_seed(const Mdp& mdp, const Decomposition& d, const Periphery& periphery,
                                               RegionId region, const SeedFunction& seed, std::string name = {}) {
    LocalMdp local = build_local_mdp(mdp, d, periphery, region, seed);
    Solution sol = value_iteration(local.mdp, ValueFunction(local.mdp.state_count(), 0.0),
                                   StopRule{kLocalSolveEpsilon, 1'000'000});
    if (!sol.report.converged) throw SolverError("local MDP of region " + std::to_string(region) + " did not converge");
    GeneratedMacro out;
    out.macro.name = name.empty() ? "r" + std::to_string(region) + "-seeded" : std::move(name);
    out.macro.region = region;
    out.macro.states = local.region_states;
    out.macro.actions.assign(sol.policy.begin(), sol.policy.begin() + static_cast<std::ptrdiff_t>(local.region_states.size()));
    out.macro.seed = seed;
    out.work_units = sol.report.backup_evaluations;
    return out;
}

/// Macros of one region plus generation statistics.
struct MacroSet {
    std::vector<Macro> macros;
    std::size_t candidates = 0;   ///< seeds tried, before deduplication
    std::size_t work_units = 0;   ///< backup evaluations spent in local solves
};

/// Keeps the first macro of every distinct local policy.
inline std::vector<Macro> deduplicate(std::vector<Macro> macros) {
    std::vector<Macro> kept;
    for (auto& m : macros) {
        bool dup = std::any_of(kept.begin(), kept.end(), [&](const Macro& k) { return k.same_policy(m); });
        if (!dup) kept.push_back(std::move(m));
    }
    return kept;
}

/// [R_min/(1-beta), R_max/(1-beta)].
inline std::pair<double, double> default_value_range(const Mdp& mdp) {
    auto [lo, hi] = mdp.reward_range();
    return {lo / (1.0 - mdp.discount()), hi / (1.0 - mdp.discount())};
}

struct CoverageOptions {
    double v_min = 0.0;
    double v_max = 1.0;
    double delta = 0.5;
    std::size_t max_macros = 4096;  ///< refuse meshes with more points than this
    bool deduplicate = true;
};

/// Mesh points per axis: ceil((v_max - v_min) / delta), at least one.
inline std::size_t coverage_points_per_axis(double v_min, double v_max, double delta) {
    if (!(delta > 0.0)) throw ValidationError("mesh spacing must be positive");
    if (!(v_min <= v_max)) throw ValidationError("v_min must not exceed v_max");
    const double m = std::ceil((v_max - v_min) / delta);
    return std::max<std::size_t>(1, static_cast<std::size_t>(m));
}

/// Number of product-mesh points, or npos when it would overflow.
inline std::size_t coverage_mesh_size(std::size_t dimension, std::size_t per_axis) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < dimension; ++i) {
        if (total > std::numeric_limits<std::size_t>::max() / per_axis) return npos;
        total *= per_axis;
    }
    return total;
}

/// Axis values v_min + delta/2 + k delta: every point of [v_min, v_max] lies within delta/2 of one.
inline std::vector<double> coverage_axis(double v_min, double v_max, double delta) {
    const std::size_t m = coverage_points_per_axis(v_min, v_max, delta);
    std::vector<double> axis(m);
    for (std::size_t k = 0; k < m; ++k) axis[k] = v_min + delta / 2.0 + static_cast<double>(k) * delta;
    return axis;
}

/// Full product mesh in lexicographic order (last coordinate fastest).
inline std::vector<SeedFunction> coverage_mesh(std::size_t dimension, double v_min, double v_max, double delta,
                                               std::size_t max_points) {
    const auto axis = coverage_axis(v_min, v_max, delta);
    const std::size_t total = coverage_mesh_size(dimension, axis.size());
    if (total == npos || total > max_points)
        throw ValidationError("coverage mesh needs " + (total == npos ? std::string("too many") : std::to_string(total)) +
                              " macros, above the cap of " + std::to_string(max_points));
    std::vector<SeedFunction> mesh;
    mesh.reserve(total);
    std::vector<std::size_t> digits(dimension, 0);
    for (std::size_t p = 0; p < total; ++p) {
        SeedFunction point(dimension);
        for (std::size_t i = 0; i < dimension; ++i) point[i] = axis[digits[i]];
        mesh.push_back(std::move(point));
        for (std::size_t i = dimension; i-- > 0;) {
            if (++digits[i] < axis.size()) break;
            digits[i] = 0;
        }
    }
    return mesh;
}

/// One macro per mesh point over [v_min, v_max]^|XPer|, deduplicated by policy.
inline MacroSet coverage_macro_set(const Mdp& mdp, const Decomposition& d, const Periphery& periphery, RegionId region,
                                   const CoverageOptions& options) {
    const std::size_t dim = periphery.exits.at(region).size();
    auto mesh = coverage_mesh(dim, options.v_min, options.v_max, options.delta, options.max_macros);
    MacroSet set;
    set.candidates = mesh.size();
    std::vector<Macro> macros;
    for (std::size_t p = 0; p < mesh.size(); ++p) {
        auto g = generate_macro_from_seed(mdp, d, periphery, region, mesh[p],
                                          "r" + std::to_string(region) + "-cov" + std::to_string(p));
        set.work_units += g.work_units;
        macros.push_back(std::move(g.macro));
    }
    set.macros = options.deduplicate ? deduplicate(std::move(macros)) : std::move(macros);
    return set;
}

struct HeuristicSeeds {
    double attract;
    double repel;
};

/**
 * Extremal seeds: under cost minimization attract = 0 and repel =
 * R_max/(1-beta); under reward maximization attract = R_max/(1-beta) and
 * repel = R_min/(1-beta). If the two coincide, repel is moved one unit
 * in the unfavorable direction.
 */
inline HeuristicSeeds default_heuristic_seeds(const Mdp& mdp) {
    auto [lo, hi] = mdp.reward_range();
    const double scale = 1.0 / (1.0 - mdp.discount());
    HeuristicSeeds s{};
    if (mdp.objective() == Objective::minimize_cost) {
        s.attract = 0.0;
        s.repel = hi * scale;
        if (!(s.attract < s.repel)) s.repel = s.attract + 1.0;
    } else {
        s.attract = hi * scale;
        s.repel = lo * scale;
        if (!(s.attract > s.repel)) s.repel = s.attract - 1.0;
    }
    return s;
}

/**
 * One exit-seeking macro per exit state (that exit seeded `attract`, the
 * others `repel`) followed by one stay-in-region macro (all exits
 * `repel`): |XPer| + 1 macros. No deduplication unless asked.
 */
inline MacroSet heuristic_macro_set(const Mdp& mdp, const Decomposition& d, const Periphery& periphery, RegionId region,
                                    HeuristicSeeds seeds, bool dedup = false) {
    if (!better(mdp.objective(), seeds.attract, seeds.repel))
        throw ValidationError("attract seed " + format_double(seeds.attract) + " must be strictly better than repel seed " +
                              format_double(seeds.repel) + " under the model's objective");
    const auto& exits = periphery.exits.at(region);
    MacroSet set;
    std::vector<Macro> macros;
    for (std::size_t j = 0; j <= exits.size(); ++j) {
        SeedFunction sigma(exits.size(), seeds.repel);
        std::string name = "r" + std::to_string(region) + "-stay";
        if (j < exits.size()) {
            sigma[j] = seeds.attract;
            name = "r" + std::to_string(region) + "-exit" + std::to_string(exits[j]);
        }
        auto g = generate_macro_from_seed(mdp, d, periphery, region, sigma, std::move(name));
        set.work_units += g.work_units;
        macros.push_back(std::move(g.macro));
    }
    set.candidates = macros.size();
    set.macros = dedup ? deduplicate(std::move(macros)) : std::move(macros);
    return set;
}

/// Heuristic sets for every region, concatenated in region order.
inline MacroSet heuristic_macros_all(const Mdp& mdp, const Decomposition& d, const Periphery& periphery,
                                     HeuristicSeeds seeds) {
    MacroSet all;
    for (RegionId r = 0; r < d.region_count(); ++r) {
        MacroSet one = heuristic_macro_set(mdp, d, periphery, r, seeds);
        all.candidates += one.candidates;
        all.work_units += one.work_units;
        for (auto& m : one.macros) all.macros.push_back(std::move(m));
    }
    return all;
}

/*
 * Macro manifest format, one line per macro:
 *
 *   macro <name> region <r> seed [<v> ...] policy [<state>:<action> ...]
 *
 * and a seed file for the seed-file strategy, one line per region:
 *
 *   seed <region> [<exit_state>:<value> ...]
 */
inline std::string write_macro_manifest(const std::vector<Macro>& macros) {
    std::ostringstream out;
    for (const auto& m : macros) {
        out << "macro " << m.name << " region " << m.region << " seed";
        for (double v : m.seed) out << ' ' << format_double(v);
        out << " policy";
        for (std::size_t i = 0; i < m.states.size(); ++i) out << ' ' << m.states[i] << ':' << m.actions[i];
        out << '\n';
    }
    return out.str();
}

inline std::vector<Macro> read_macro_manifest(std::string_view text) {
    std::vector<Macro> macros;
    std::size_t line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        auto tok = tokenize(raw.substr(0, raw.find('#')));
        if (tok.empty()) continue;
        auto fail = [&](const std::string& msg, std::size_t col) { throw ParseError(msg, line_no, col); };
        if (tok[0].text != "macro" || tok.size() < 6 || tok[2].text != "region" || tok[4].text != "seed")
            fail("expected 'macro <name> region <r> seed ... policy ...'", tok[0].column);
        Macro m;
        m.name = std::string(tok[1].text);
        if (!parse_size(tok[3].text, m.region)) fail("bad region", tok[3].column);
        std::size_t i = 5;
        for (; i < tok.size() && tok[i].text != "policy"; ++i) {
            double v;
            if (!parse_double(tok[i].text, v)) fail("bad seed value", tok[i].column);
            m.seed.push_back(v);
        }
        if (i == tok.size()) fail("missing policy", tok.back().column);
        for (++i; i < tok.size(); ++i) {
            auto colon = tok[i].text.find(':');
            StateId s;
            ActionId a;
            if (colon == std::string_view::npos || !parse_size(tok[i].text.substr(0, colon), s) ||
                !parse_size(tok[i].text.substr(colon + 1), a))
                fail("expected state:action", tok[i].column);
            if (!m.states.empty() && s <= m.states.back()) fail("policy states must be increasing", tok[i].column);
            m.states.push_back(s);
            m.actions.push_back(a);
        }
        macros.push_back(std::move(m));
    }
    return macros;
}

/// Seeds per region from a seed file; each region's exits must all be named.
inline std::vector<SeedFunction> read_seed_file(std::string_view text, const Periphery& periphery) {
    const std::size_t k = periphery.exits.size();
    std::vector<SeedFunction> seeds(k);
    std::vector<std::vector<bool>> given(k);
    for (RegionId r = 0; r < k; ++r) {
        seeds[r].assign(periphery.exits[r].size(), 0.0);
        given[r].assign(periphery.exits[r].size(), false);
    }
    std::size_t line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        auto tok = tokenize(raw.substr(0, raw.find('#')));
        if (tok.empty()) continue;
        auto fail = [&](const std::string& msg, std::size_t col) { throw ParseError(msg, line_no, col); };
        RegionId r;
        if (tok[0].text != "seed" || tok.size() < 2 || !parse_size(tok[1].text, r) || r >= k)
            fail("expected 'seed <region> <exit>:<value> ...'", tok[0].column);
        for (std::size_t i = 2; i < tok.size(); ++i) {
            auto colon = tok[i].text.find(':');
            StateId e;
            double v;
            if (colon == std::string_view::npos || !parse_size(tok[i].text.substr(0, colon), e) ||
                !parse_double(tok[i].text.substr(colon + 1), v))
                fail("expected exit:value", tok[i].column);
            const std::size_t j = periphery.exit_index(r, e);
            if (j == npos) fail("state " + std::to_string(e) + " is not an exit of region " + std::to_string(r), tok[i].column);
            seeds[r][j] = v;
            given[r][j] = true;
        }
    }
    for (RegionId r = 0; r < k; ++r)
        for (std::size_t j = 0; j < given[r].size(); ++j)
            if (!given[r][j])
                throw ValidationError("seed file is missing exit state " + std::to_string(periphery.exits[r][j]) +
                                      " of region " + std::to_string(r));
    return seeds;
}

} // namespace hmdp
