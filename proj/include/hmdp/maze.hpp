#pragma once

#include "hmdp/decomposition.hpp"
#include "hmdp/mdp.hpp"

#include <array>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace hmdp {

/*
 * Maze text format. Lines starting with ';' are comments.
 *
 *   <key> <value>      optional header lines (see MazeParams)
 *   grid
 *   <row>...           one glyph per cell
 *   rooms
 *   <row>...           same shape; '#' on walls, a room label elsewhere
 *   end
 *
 * Glyphs: '#' wall, '.' floor, 's' shaded (higher cost), '~' noisy,
 * '%' shaded and noisy, 'G' goal (zero-cost absorbing), 'P' penalty
 * (absorbing, cost_penalty per step). Room labels are letters or digits;
 * region identifiers follow first appearance in row-major order.
 */

struct MazeParams {
    double beta = 0.95;
    double eta_normal = 0.1;
    double eta_noisy = 0.3;
    double cost_normal = 1.0;
    double cost_shaded = 2.0;
    double cost_penalty = 10.0;

    friend bool operator==(const MazeParams&, const MazeParams&) = default;
};

enum class Terminal { none, goal, penalty };

struct Cell {
    std::size_t row;
    std::size_t col;
    friend bool operator==(const Cell&, const Cell&) = default;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct MazeSpec {
    MazeParams params;
    std::vector<std::string> grid;
    std::vector<std::string> rooms;
    /// Header keys present in the source text; serialization writes all keys.
    std::set<std::string> explicit_keys;

    std::size_t rows() const noexcept { return grid.size(); }
    std::size_t cols() const noexcept { return grid.empty() ? 0 : grid[0].size(); }
    char glyph(Cell c) const { return grid.at(c.row).at(c.col); }
    bool passable(Cell c) const { return glyph(c) != '#'; }
    bool noisy(Cell c) const { return glyph(c) == '~' || glyph(c) == '%'; }
    bool shaded(Cell c) const { return glyph(c) == 's' || glyph(c) == '%'; }
    Terminal terminal(Cell c) const {
        if (glyph(c) == 'G') return Terminal::goal;
        if (glyph(c) == 'P') return Terminal::penalty;
        return Terminal::none;
    }
    double cost(Cell c) const {
        switch (terminal(c)) {
        case Terminal::goal: return 0.0;
        case Terminal::penalty: return params.cost_penalty;
        case Terminal::none: break;
        }
        return shaded(c) ? params.cost_shaded : params.cost_normal;
    }
    double eta(Cell c) const { return noisy(c) ? params.eta_noisy : params.eta_normal; }

    std::vector<Cell> goals() const {
        std::vector<Cell> out;
        for (std::size_t r = 0; r < rows(); ++r)
            for (std::size_t c = 0; c < cols(); ++c)
                if (grid[r][c] == 'G') out.push_back({r, c});
        return out;
    }

    /// Equality of layout and parameters; header provenance is ignored.
    friend bool operator==(const MazeSpec& a, const MazeSpec& b) {
        return a.params == b.params && a.grid == b.grid && a.rooms == b.rooms;
    }
};

namespace detail {

inline bool maze_glyph(char c) {
    return c == '#' || c == '.' || c == 's' || c == '~' || c == '%' || c == 'G' || c == 'P';
}

inline bool room_label(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

inline constexpr std::array<std::pair<int, int>, 4> kMoves{{{-1, 0}, {1, 0}, {0, 1}, {0, -1}}};

inline void check_params(const MazeParams& p) {
    if (!(p.beta > 0.0 && p.beta < 1.0)) throw ValidationError("beta must lie in (0, 1)");
    for (double eta : {p.eta_normal, p.eta_noisy})
        if (!(eta >= 0.0 && eta < 1.0)) throw ValidationError("slip probabilities must lie in [0, 1)");
    for (double c : {p.cost_normal, p.cost_shaded, p.cost_penalty})
        if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("cell costs must be finite and non-negative");
}

} // namespace detail

/// Parameter lookup by header key, for parsing and command-line overrides.
inline double* maze_param(MazeParams& p, std::string_view key) {
    if (key == "beta") return &p.beta;
    if (key == "eta_normal") return &p.eta_normal;
    if (key == "eta_noisy") return &p.eta_noisy;
    if (key == "cost_normal") return &p.cost_normal;
    if (key == "cost_shaded") return &p.cost_shaded;
    if (key == "cost_penalty") return &p.cost_penalty;
    return nullptr;
}

inline constexpr std::array<const char*, 6> kMazeKeys{"beta", "eta_normal", "eta_noisy",
                                                      "cost_normal", "cost_shaded", "cost_penalty"};

/**
 * Checks a layout: rectangular, known glyphs, labels exactly on passable
 * cells, one connected passable component, each room connected. Errors name
 * the offending cell as (line, column) relative to `first_grid_line` and
 * `first_rooms_line`; pass 0 for both when there is no source text.
 */
inline void check_maze(const MazeSpec& m, std::size_t first_grid_line = 0, std::size_t first_rooms_line = 0) {
    auto fail = [&](const std::string& msg, std::size_t line, std::size_t col) {
        if (first_grid_line == 0) throw ValidationError(msg + " at row " + std::to_string(line) + ", column " +
                                                        std::to_string(col));
        throw ParseError(msg, line, col);
    };
    const auto grid_line = [&](std::size_t r) { return first_grid_line ? first_grid_line + r : r; };
    const auto rooms_line = [&](std::size_t r) { return first_rooms_line ? first_rooms_line + r : r; };
    const std::size_t base_col = first_grid_line ? 1 : 0;

    detail::check_params(m.params);
    if (m.grid.empty() || m.grid[0].empty()) throw ValidationError("maze has no cells");
    const std::size_t w = m.grid[0].size();
    for (std::size_t r = 0; r < m.grid.size(); ++r) {
        if (m.grid[r].size() != w) fail("ragged row: expected " + std::to_string(w) + " cells", grid_line(r), base_col + std::min(w, m.grid[r].size()));
        for (std::size_t c = 0; c < w; ++c)
            if (!detail::maze_glyph(m.grid[r][c]))
                fail(std::string("unknown glyph '") + m.grid[r][c] + "'", grid_line(r), base_col + c);
    }
    if (m.rooms.size() != m.grid.size())
        fail("rooms layer has " + std::to_string(m.rooms.size()) + " rows, grid has " + std::to_string(m.grid.size()),
             rooms_line(std::min(m.rooms.size(), m.grid.size())), base_col);
    for (std::size_t r = 0; r < m.rooms.size(); ++r) {
        if (m.rooms[r].size() != w) fail("ragged row: expected " + std::to_string(w) + " cells", rooms_line(r), base_col + std::min(w, m.rooms[r].size()));
        for (std::size_t c = 0; c < w; ++c) {
            const char g = m.grid[r][c], l = m.rooms[r][c];
            if (g == '#' && l != '#') fail("room label on a wall cell", rooms_line(r), base_col + c);
            if (g != '#' && !detail::room_label(l)) fail(std::string("bad room label '") + l + "'", rooms_line(r), base_col + c);
        }
    }

    std::vector<Cell> cells;
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < w; ++c)
            if (m.grid[r][c] != '#') cells.push_back({r, c});
    if (cells.empty()) throw ValidationError("maze has no passable cells");

    // Flood fill, once over all passable cells and once within each room.
    auto flood = [&](Cell start, bool same_room) {
        std::vector<std::vector<bool>> seen(m.rows(), std::vector<bool>(w, false));
        std::deque<Cell> queue{start};
        seen[start.row][start.col] = true;
        while (!queue.empty()) {
            Cell x = queue.front();
            queue.pop_front();
            for (auto [dr, dc] : detail::kMoves) {
                const auto nr = static_cast<std::ptrdiff_t>(x.row) + dr, nc = static_cast<std::ptrdiff_t>(x.col) + dc;
                if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(m.rows()) || nc >= static_cast<std::ptrdiff_t>(w)) continue;
                Cell y{static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)};
                if (!m.passable(y) || seen[y.row][y.col]) continue;
                if (same_room && m.rooms[y.row][y.col] != m.rooms[start.row][start.col]) continue;
                seen[y.row][y.col] = true;
                queue.push_back(y);
            }
        }
        return seen;
    };
    auto all = flood(cells.front(), false);
    for (Cell x : cells)
        if (!all[x.row][x.col]) fail("passable cell not connected to the rest of the maze", grid_line(x.row), base_col + x.col);
    std::set<char> checked;
    for (Cell x : cells) {
        const char l = m.rooms[x.row][x.col];
        if (!checked.insert(l).second) continue;
        auto room = flood(x, true);
        for (Cell y : cells)
            if (m.rooms[y.row][y.col] == l && !room[y.row][y.col])
                fail(std::string("room '") + l + "' is not connected", rooms_line(y.row), base_col + y.col);
    }
}

inline MazeSpec parse_maze(std::string_view text) {
    MazeSpec m;
    enum class Section { header, grid, rooms, done } section = Section::header;
    std::size_t line_no = 0, grid_start = 0, rooms_start = 0;
    for (std::string_view raw : split_lines(text)) {
        ++line_no;
        if (!raw.empty() && raw[0] == ';') continue;
        auto tok = tokenize(raw);
        auto fail = [&](const std::string& msg, std::size_t col) { throw ParseError(msg, line_no, col); };
        if (tok.empty()) {
            if (section == Section::grid || section == Section::rooms) fail("blank line inside a layer", 1);
            continue;
        }
        if (section == Section::done) fail("text after 'end'", tok[0].column);
        if (tok.size() == 1 && tok[0].text == "grid") {
            if (section != Section::header) fail("unexpected 'grid'", tok[0].column);
            section = Section::grid;
            grid_start = line_no + 1;
            continue;
        }
        if (tok.size() == 1 && tok[0].text == "rooms") {
            if (section != Section::grid) fail("unexpected 'rooms'", tok[0].column);
            section = Section::rooms;
            rooms_start = line_no + 1;
            continue;
        }
        if (tok.size() == 1 && tok[0].text == "end") {
            if (section != Section::rooms) fail("unexpected 'end'", tok[0].column);
            section = Section::done;
            continue;
        }
        switch (section) {
        case Section::header: {
            double* slot = maze_param(m.params, tok[0].text);
            if (!slot) fail("unknown header key '" + std::string(tok[0].text) + "'", tok[0].column);
            if (tok.size() != 2) fail("expected '<key> <value>'", tok[0].column);
            if (!parse_double(tok[1].text, *slot)) fail("expected a number", tok[1].column);
            m.explicit_keys.insert(std::string(tok[0].text));
            break;
        }
        case Section::grid:
            if (tok.size() != 1 || tok[0].column != 1) fail("layer rows may not contain spaces", 1);
            for (std::size_t c = 0; c < tok[0].text.size(); ++c)
                if (!detail::maze_glyph(tok[0].text[c])) fail(std::string("unknown glyph '") + tok[0].text[c] + "'", c + 1);
            if (!m.grid.empty() && tok[0].text.size() != m.grid[0].size())
                fail("ragged row: expected " + std::to_string(m.grid[0].size()) + " cells",
                     std::min(tok[0].text.size(), m.grid[0].size()) + 1);
            m.grid.emplace_back(tok[0].text);
            break;
        case Section::rooms:
            if (tok.size() != 1 || tok[0].column != 1) fail("layer rows may not contain spaces", 1);
            m.rooms.emplace_back(tok[0].text);
            break;
        case Section::done: break;
        }
    }
    if (section != Section::done) throw ParseError("missing 'grid', 'rooms' or 'end' section", line_no, 1);
    try {
        check_maze(m, grid_start, rooms_start);
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), 1, 1);
    }
    return m;
}

inline std::string serialize_maze(const MazeSpec& m) {
    std::ostringstream out;
    MazeParams p = m.params;
    for (const char* key : kMazeKeys) out << key << ' ' << format_double(*maze_param(p, key)) << '\n';
    out << "grid\n";
    for (const auto& row : m.grid) out << row << '\n';
    out << "rooms\n";
    for (const auto& row : m.rooms) out << row << '\n';
    out << "end\n";
    return out.str();
}

inline const std::array<const char*, 5> kMazeActionNames{"N", "S", "E", "W", "stay"};

struct CompiledMaze {
    Mdp mdp;
    Decomposition decomposition;
    std::vector<Cell> cell_of;              ///< state -> cell
    std::vector<std::vector<StateId>> state_of;  ///< [row][col] -> state or npos
    std::vector<char> room_label;           ///< region -> label
};

/**
 * Minimize-cost MDP of a maze. States are passable cells in row-major
 * order. A move goes in the intended direction with probability 1 - eta
 * and in each perpendicular direction with eta / 2; mass that would enter
 * a wall stays put. 'stay' is deterministic. Goal and penalty cells are
 * absorbing under every action.
 */
inline CompiledMaze compile_maze(const MazeSpec& m) {
    check_maze(m);
    CompiledMaze out;
    out.state_of.assign(m.rows(), std::vector<StateId>(m.cols(), npos));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m.passable({r, c})) {
                out.state_of[r][c] = out.cell_of.size();
                out.cell_of.push_back({r, c});
            }
    const std::size_t n = out.cell_of.size();

    std::map<char, RegionId> region;
    std::vector<RegionId> labels(n);
    for (StateId s = 0; s < n; ++s) {
        const char l = m.rooms[out.cell_of[s].row][out.cell_of[s].col];
        auto [it, inserted] = region.try_emplace(l, out.room_label.size());
        if (inserted) out.room_label.push_back(l);
        labels[s] = it->second;
    }
    out.decomposition = Decomposition(std::move(labels), out.room_label.size());

    out.mdp = Mdp(n, m.params.beta, Objective::minimize_cost);
    for (ActionId a = 0; a < kMazeActionNames.size(); ++a) out.mdp.set_action_name(a, kMazeActionNames[a]);

    auto target = [&](Cell x, std::size_t move) -> StateId {
        const auto [dr, dc] = detail::kMoves[move];
        const auto nr = static_cast<std::ptrdiff_t>(x.row) + dr, nc = static_cast<std::ptrdiff_t>(x.col) + dc;
        if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(m.rows()) || nc >= static_cast<std::ptrdiff_t>(m.cols()))
            return out.state_of[x.row][x.col];
        const StateId t = out.state_of[static_cast<std::size_t>(nr)][static_cast<std::size_t>(nc)];
        return t == npos ? out.state_of[x.row][x.col] : t;
    };
    // N, S are perpendicular to E, W.
    constexpr std::array<std::array<std::size_t, 2>, 4> perpendicular{{{2, 3}, {2, 3}, {0, 1}, {0, 1}}};

    for (StateId s = 0; s < n; ++s) {
        const Cell x = out.cell_of[s];
        const double cost = m.cost(x);
        if (m.terminal(x) != Terminal::none) {
            for (ActionId a = 0; a < kMazeActionNames.size(); ++a)
                out.mdp.add_action(s, {a, cost, RowClass::exact, {{s, 1.0}}});
            continue;
        }
        const double eta = m.eta(x);
        for (std::size_t move = 0; move < 4; ++move) {
            std::map<StateId, double> mass;
            mass[target(x, move)] += 1.0 - eta;
            for (std::size_t side : perpendicular[move])
                if (eta > 0.0) mass[target(x, side)] += eta / 2.0;
            ActionRow row{move, cost, RowClass::exact, {}};
            for (auto [t, p] : mass) row.successors.push_back({t, p});
            out.mdp.add_action(s, std::move(row));
        }
        out.mdp.add_action(s, {4, cost, RowClass::exact, {{s, 1.0}}});
    }
    return out;
}

/// Copy of `m` whose goal cells revert to plain floor and whose goal is `cell`.
inline MazeSpec relocate_goal(const MazeSpec& m, Cell cell) {
    if (cell.row >= m.rows() || cell.col >= m.cols() || !m.passable(cell))
        throw ValidationError("goal cell must be passable");
    MazeSpec out = m;
    for (auto& row : out.grid)
        for (char& g : row)
            if (g == 'G') g = '.';
    out.grid[cell.row][cell.col] = 'G';
    return out;
}

namespace builtin_text {

inline constexpr std::string_view four_room = R"(; four rooms joined by one doorway per shared wall; goal in the south-east room
beta 0.95
eta_normal 0.1
eta_noisy 0.3
cost_normal 1
cost_shaded 2
cost_penalty 10
grid
###########
#....#....#
#.........#
#....#....#
#....#....#
##.####.###
#....#....#
#....#....#
#.......G.#
#....#....#
###########
rooms
###########
#aaaa#bbbb#
#aaaaabbbb#
#aaaa#bbbb#
#aaaa#bbbb#
##c####b###
#cccc#dddd#
#cccc#dddd#
#ccccddddd#
#cccc#dddd#
###########
end
)";

inline constexpr std::string_view maze36 = R"(; 36 states in 4 rooms
beta 0.95
eta_normal 0.1
eta_noisy 0.3
cost_normal 1
cost_shaded 2
cost_penalty 10
grid
P..#.ss
.#.....
...##..
#.###.#
~~.#...
.#.....
...#%#G
rooms
aaa#bbb
a#aabbb
aaa##bb
#c###b#
ccc#ddd
c#cdddd
ccc#d#d
end
)";

inline constexpr std::string_view maze66 = R"(; 66 states in 7 rooms
beta 0.95
eta_normal 0.1
eta_noisy 0.3
cost_normal 1
cost_shaded 2
cost_penalty 10
grid
ss.#P..#...#...
.#.......#..%#.
s..#...#..P#...
#.####.######.#
.......#~.#....
....#..~~.....G
rooms
aaa#bbb#ccc#ddd
a#aabbbbc#ccd#d
aaa#bbb#ccc#ddd
#e####f######g#
eeeeeff#ff#gggg
eeee#ffffffgggg
end
)";

inline constexpr std::string_view maze121 = R"(; 121 states in 11 rooms
beta 0.95
eta_normal 0.1
eta_noisy 0.3
cost_normal 1
cost_shaded 2
cost_penalty 10
grid
ss.#...#P..#...
s....#.......#.
...#...#...#...
#.###.###.###.#
...#...#.ss#~..
.....#...#..~..
P..#...#...#...
#.####.######.#
....#.~~~.#....
.......#....%%.
....#P....#...G
rooms
aaa#bbb#ccc#ddd
aaaab#bbccccd#d
aaa#bbb#ccc#ddd
#e###b###g###d#
eee#fff#ggg#hhh
eeeef#ffg#gghhh
eee#fff#ggg#hhh
#i####j######k#
iiii#jjjjj#kkkk
iiiiijj#jjjkkkk
iiii#jjjjj#kkkk
end
)";

} // namespace builtin_text

inline const std::array<const char*, 4> kBuiltinMazes{"four_room", "maze36", "maze66", "maze121"};

inline std::string_view builtin_maze_text(std::string_view name) {
    if (name == "four_room") return builtin_text::four_room;
    if (name == "maze36") return builtin_text::maze36;
    if (name == "maze66") return builtin_text::maze66;
    if (name == "maze121") return builtin_text::maze121;
    throw ValidationError("unknown builtin instance '" + std::string(name) + "'");
}

inline MazeSpec builtin_instance(std::string_view name) { return parse_maze(builtin_maze_text(name)); }

} // namespace hmdp
