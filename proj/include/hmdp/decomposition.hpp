#pragma once

#include "hmdp/mdp.hpp"

#include <algorithm>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hmdp {

/**
 * Partition of the state space into regions. Every region identifier in
 * [0, region_count) must own at least one state.
 */
class Decomposition {
public:
    Decomposition() = default;

    Decomposition(std::vector<RegionId> region_of, std::size_t region_count)
        : region_of_(std::move(region_of)), members_(region_count) {
        if (region_count == 0) throw ValidationError("decomposition needs at least one region");
        for (StateId s = 0; s < region_of_.size(); ++s) {
            if (region_of_[s] >= region_count)
                throw ValidationError("state " + std::to_string(s) + " assigned to region " +
                                      std::to_string(region_of_[s]) + " outside [0, " +
                                      std::to_string(region_count) + ")");
            members_[region_of_[s]].push_back(s);
        }
        for (RegionId r = 0; r < region_count; ++r)
            if (members_[r].empty()) throw ValidationError("region " + std::to_string(r) + " is empty");
    }

    /// Single region holding every state.
    static Decomposition single(std::size_t state_count) {
        return Decomposition(std::vector<RegionId>(state_count, 0), 1);
    }

    std::size_t state_count() const noexcept { return region_of_.size(); }
    std::size_t region_count() const noexcept { return members_.size(); }
    RegionId region_of(StateId s) const { return region_of_.at(s); }
    const std::vector<RegionId>& labels() const noexcept { return region_of_; }

    /// States of a region in increasing order.
    const std::vector<StateId>& states(RegionId r) const { return members_.at(r); }

    friend bool operator==(const Decomposition&, const Decomposition&) = default;

private:
    std::vector<RegionId> region_of_;
    std::vector<std::vector<StateId>> members_;
};

/**
 * Exit and entrance peripheries of every region plus the global peripheral
 * set. All lists are sorted.
 */
struct Periphery {
    std::vector<std::vector<StateId>> exits;      ///< XPer per region
    std::vector<std::vector<StateId>> entrances;  ///< EPer per region
    std::vector<StateId> peripheral;              ///< union of entrances
    std::vector<bool> is_peripheral;              ///< indexed by state

    /// Position of `s` in the exit list of `r`, or npos.
    std::size_t exit_index(RegionId r, StateId s) const {
        const auto& xs = exits.at(r);
        auto it = std::lower_bound(xs.begin(), xs.end(), s);
        return it != xs.end() && *it == s ? static_cast<std::size_t>(it - xs.begin()) : npos;
    }

    /// Union of the exit sets, for checking against `peripheral`.
    std::vector<StateId> exit_union() const {
        std::vector<StateId> all;
        for (const auto& xs : exits) all.insert(all.end(), xs.begin(), xs.end());
        std::sort(all.begin(), all.end());
        all.erase(std::unique(all.begin(), all.end()), all.end());
        return all;
    }
};

inline void check_decomposition(const Mdp& mdp, const Decomposition& d) {
    if (d.state_count() != mdp.state_count())
        throw ValidationError("decomposition covers " + std::to_string(d.state_count()) + " states, model has " +
                              std::to_string(mdp.state_count()));
}

/**
 * Peripheries from the positive-probability edges of all exact-stochastic
 * rows (macro rows are ignored). Exit sets are gathered by scanning forward
 * from each region's states; entrance sets by scanning each state's
 * predecessors, so the two unions come from separate passes.
 */
inline Periphery compute_peripheries(const Mdp& mdp, const Decomposition& d) {
    check_decomposition(mdp, d);
    const std::size_t n = mdp.state_count();
    const std::size_t k = d.region_count();
    Periphery p;
    p.exits.resize(k);
    p.entrances.resize(k);

    std::vector<std::vector<StateId>> predecessors(n);
    for (RegionId r = 0; r < k; ++r) {
        std::vector<bool> seen(n, false);
        for (StateId s : d.states(r)) {
            for (const auto& row : mdp.actions(s)) {
                if (row.row_class != RowClass::exact) continue;
                for (const auto& t : row.successors) {
                    if (!(t.probability > 0.0)) continue;
                    predecessors[t.state].push_back(s);
                    if (d.region_of(t.state) != r && !seen[t.state]) {
                        seen[t.state] = true;
                        p.exits[r].push_back(t.state);
                    }
                }
            }
        }
        std::sort(p.exits[r].begin(), p.exits[r].end());
    }

    p.is_peripheral.assign(n, false);
    for (RegionId r = 0; r < k; ++r) {
        for (StateId t : d.states(r)) {
            const bool entered = std::any_of(predecessors[t].begin(), predecessors[t].end(),
                                             [&](StateId s) { return d.region_of(s) != r; });
            if (entered) {
                p.entrances[r].push_back(t);
                p.is_peripheral[t] = true;
            }
        }
    }
    for (StateId s = 0; s < n; ++s)
        if (p.is_peripheral[s]) p.peripheral.push_back(s);
    return p;
}

struct DecompositionFinding {
    enum class Kind { empty_region, unreachable_region, empty_exit_periphery };
    Kind kind;
    RegionId region;
    std::string message;
};

/**
 * Diagnostics for a decomposition: empty regions, regions never entered
 * from outside (when there is more than one region), and regions whose
 * exit periphery is empty (their macros never terminate). Never throws
 * for a partition-shaped input; out-of-range labels are reported as well.
 */
inline std::vector<DecompositionFinding> validate_decomposition(const Mdp& mdp, const std::vector<RegionId>& labels,
                                                                std::size_t region_count) {
    using Kind = DecompositionFinding::Kind;
    std::vector<DecompositionFinding> findings;
    if (labels.size() != mdp.state_count()) {
        findings.push_back({Kind::empty_region, npos, "label count does not match state count"});
        return findings;
    }
    std::vector<std::size_t> sizes(region_count, 0);
    for (StateId s = 0; s < labels.size(); ++s) {
        if (labels[s] >= region_count) {
            findings.push_back({Kind::empty_region, labels[s],
                                "state " + std::to_string(s) + " has out-of-range region " + std::to_string(labels[s])});
            return findings;
        }
        ++sizes[labels[s]];
    }
    bool any_empty = false;
    for (RegionId r = 0; r < region_count; ++r) {
        if (sizes[r] == 0) {
            findings.push_back({Kind::empty_region, r, "region " + std::to_string(r) + " is empty"});
            any_empty = true;
        }
    }
    if (any_empty || region_count == 0) return findings;

    Decomposition d(labels, region_count);
    Periphery p = compute_peripheries(mdp, d);
    for (RegionId r = 0; r < region_count; ++r) {
        if (region_count > 1 && p.entrances[r].empty())
            findings.push_back({Kind::unreachable_region, r,
                                "region " + std::to_string(r) + " cannot be entered from another region"});
        if (p.exits[r].empty())
            findings.push_back({Kind::empty_exit_periphery, r, "region " + std::to_string(r) + " has an empty exit periphery"});
    }
    return findings;
}

inline std::vector<DecompositionFinding> validate_decomposition(const Mdp& mdp, const Decomposition& d) {
    return validate_decomposition(mdp, d.labels(), d.region_count());
}

/*
 * Decomposition text format:
 *
 *   decomposition <state_count> <region_count>
 *   <state> <region>        (one line per state, any order)
 */

inline std::string write_decomposition(const Decomposition& d) {
    std::ostringstream out;
    out << "decomposition " << d.state_count() << ' ' << d.region_count() << '\n';
    for (StateId s = 0; s < d.state_count(); ++s) out << s << ' ' << d.region_of(s) << '\n';
    return out.str();
}

inline Decomposition read_decomposition(std::string_view text) {
    std::size_t line_no = 0;
    bool header = false;
    std::size_t n = 0, k = 0;
    std::vector<RegionId> labels;
    std::vector<bool> assigned;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        auto tok = tokenize(raw.substr(0, raw.find('#')));
        if (tok.empty()) continue;
        auto fail = [&](const std::string& msg, std::size_t col) { throw ParseError(msg, line_no, col); };
        if (!header) {
            if (tok[0].text != "decomposition" || tok.size() != 3) fail("expected 'decomposition <states> <regions>'", 1);
            if (!parse_size(tok[1].text, n) || n == 0) fail("bad state count", tok[1].column);
            if (!parse_size(tok[2].text, k) || k == 0) fail("bad region count", tok[2].column);
            labels.assign(n, 0);
            assigned.assign(n, false);
            header = true;
            continue;
        }
        if (tok.size() != 2) fail("expected '<state> <region>'", tok[0].column);
        std::size_t s, r;
        if (!parse_size(tok[0].text, s) || s >= n) fail("bad state", tok[0].column);
        if (!parse_size(tok[1].text, r)) fail("bad region", tok[1].column);
        if (assigned[s]) fail("state assigned twice", tok[0].column);
        labels[s] = r;
        assigned[s] = true;
    }
    if (!header) throw ParseError("missing decomposition header");
    for (StateId s = 0; s < n; ++s)
        if (!assigned[s]) throw ParseError("state " + std::to_string(s) + " has no region");
    return Decomposition(std::move(labels), k);
}

} // namespace hmdp
