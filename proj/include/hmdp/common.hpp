#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace hmdp {

using StateId = std::size_t;
using ActionId = std::size_t;
using RegionId = std::size_t;

/// Value per state.
using ValueFunction = std::vector<double>;

/// Chosen action identifier per state.
using Policy = std::vector<ActionId>;

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries a 1-based location when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t line = 0, std::size_t column = 0)
        : Error(locate(message, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string locate(const std::string& message, std::size_t line, std::size_t column) {
        if (line == 0) return message;
        return "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

/// Well-formed input that violates a model invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside a solver (indicates a bug or an invalid model).
class SolverError : public Error {
public:
    using Error::Error;
};

/// Shortest decimal representation that parses back to the same double.
inline std::string format_double(double value) {
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (ec != std::errc{}) throw Error("cannot format floating point value");
    return std::string(buffer, end);
}

inline std::string format_doubles(const std::vector<double>& values, char separator = ' ') {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out.push_back(separator);
        out += format_double(values[i]);
    }
    return out;
}

/// Parses a whole token as a double; returns false on trailing garbage.
inline bool parse_double(std::string_view token, double& out) {
    if (token.empty()) return false;
    if (token.front() == '+') token.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size();
}

inline bool parse_size(std::string_view token, std::size_t& out) {
    if (token.empty()) return false;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size();
}

/// Splits on runs of spaces/tabs; keeps the starting column of each token.
struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        if (i >= line.size()) break;
        std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        tokens.push_back({line.substr(start, i - start), start + 1});
    }
    return tokens;
}

/// Splits text into lines without the terminating newline characters.
inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string_view line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

} // namespace hmdp
