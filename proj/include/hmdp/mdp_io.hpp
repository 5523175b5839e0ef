#pragma once

#include "hmdp/mdp.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace hmdp {

/*
 * MDP text format (one record per line, '#' starts a comment):
 *
 *   mdp <state_count> <discount> <min|max>
 *   action <id> <name>
 *   row <state> <action> <reward> <exact|macro> [<successor>:<probability> ...]
 *
 * The `mdp` header comes first. `action` lines are optional display names.
 * Each `row` makes one action feasible at one state. Numbers are written in
 * shortest round-trip form, so write/read is lossless.
 */

inline std::string write_mdp(const Mdp& mdp) {
    std::ostringstream out;
    out << "mdp " << mdp.state_count() << ' ' << format_double(mdp.discount()) << ' '
        << to_string(mdp.objective()) << '\n';
    const auto& names = mdp.action_names();
    for (ActionId a = 0; a < names.size(); ++a)
        if (!names[a].empty()) out << "action " << a << ' ' << names[a] << '\n';
    for (StateId s = 0; s < mdp.state_count(); ++s) {
        for (const auto& row : mdp.actions(s)) {
            out << "row " << s << ' ' << row.action << ' ' << format_double(row.reward) << ' '
                << to_string(row.row_class);
            for (const auto& t : row.successors) out << ' ' << t.state << ':' << format_double(t.probability);
            out << '\n';
        }
    }
    return out.str();
}

inline Mdp read_mdp(std::string_view text) {
    Mdp mdp;
    bool have_header = false;
    std::size_t line_no = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        std::string_view line = raw.substr(0, raw.find('#'));
        auto tok = tokenize(line);
        if (tok.empty()) continue;
        auto fail = [&](const std::string& msg, std::size_t col) { throw ParseError(msg, line_no, col); };
        auto need = [&](std::size_t count) {
            if (tok.size() < count) fail("expected " + std::to_string(count) + " fields", tok.back().column);
        };
        auto size_at = [&](std::size_t i) {
            std::size_t v;
            if (!parse_size(tok[i].text, v)) fail("expected a non-negative integer", tok[i].column);
            return v;
        };
        auto real_at = [&](std::size_t i) {
            double v;
            if (!parse_double(tok[i].text, v)) fail("expected a number", tok[i].column);
            return v;
        };

        if (tok[0].text == "mdp") {
            if (have_header) fail("duplicate mdp header", tok[0].column);
            need(4);
            if (tok.size() > 4) fail("unexpected field", tok[4].column);
            const std::size_t n = size_at(1);
            const double beta = real_at(2);
            Objective obj;
            if (tok[3].text == "min") obj = Objective::minimize_cost;
            else if (tok[3].text == "max") obj = Objective::maximize_reward;
            else fail("objective must be min or max", tok[3].column);
            if (n == 0) fail("state count must be positive", tok[1].column);
            try {
                mdp = Mdp(n, beta, obj);
            } catch (const ValidationError& e) {
                fail(e.what(), tok[2].column);
            }
            have_header = true;
        } else if (!have_header) {
            fail("expected mdp header first", tok[0].column);
        } else if (tok[0].text == "action") {
            need(3);
            if (tok.size() > 3) fail("action names may not contain spaces", tok[3].column);
            mdp.set_action_name(size_at(1), std::string(tok[2].text));
        } else if (tok[0].text == "row") {
            need(5);
            ActionRow row;
            const StateId s = size_at(1);
            row.action = size_at(2);
            row.reward = real_at(3);
            if (tok[4].text == "exact") row.row_class = RowClass::exact;
            else if (tok[4].text == "macro") row.row_class = RowClass::macro;
            else fail("row class must be exact or macro", tok[4].column);
            for (std::size_t i = 5; i < tok.size(); ++i) {
                auto colon = tok[i].text.find(':');
                Successor succ{};
                if (colon == std::string_view::npos || !parse_size(tok[i].text.substr(0, colon), succ.state) ||
                    !parse_double(tok[i].text.substr(colon + 1), succ.probability))
                    fail("expected successor:probability", tok[i].column);
                row.successors.push_back(succ);
            }
            try {
                mdp.add_action(s, std::move(row));
            } catch (const ValidationError& e) {
                fail(e.what(), tok[1].column);
            }
        } else {
            fail("unknown record '" + std::string(tok[0].text) + "'", tok[0].column);
        }
    }
    if (!have_header) throw ParseError("missing mdp header");
    return mdp;
}

/// Whole-file read; throws Error when the file cannot be opened.
inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// "state value" per line.
inline std::string write_values(const ValueFunction& v) {
    std::ostringstream out;
    for (StateId s = 0; s < v.size(); ++s) out << s << ' ' << format_double(v[s]) << '\n';
    return out.str();
}

/// "state action_id action_name" per line.
inline std::string write_policy(const Mdp& mdp, const Policy& policy) {
    std::ostringstream out;
    for (StateId s = 0; s < policy.size(); ++s)
        out << s << ' ' << policy[s] << ' ' << mdp.action_name(policy[s]) << '\n';
    return out.str();
}

} // namespace hmdp
