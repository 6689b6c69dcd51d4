#pragma once

#include "riskconv/rational.hpp"
#include "riskconv/space.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace riskconv {

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

/// Strict numeric cell parser; the whole cell must be consumed.
template <class S> S parse_cell(const std::string& text);

template <> inline double parse_cell<double>(const std::string& text) {
    // route fractions through the exact parser so "1/3" means the same cell
    // in both modes
    if (text.find('/') != std::string::npos) return to_double(parse_rational(text));
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::invalid_argument("cannot parse '" + text + "' as a number");
    return v;
}

template <> inline Rational parse_cell<Rational>(const std::string& text) {
    try {
        return parse_rational(text);
    } catch (const std::invalid_argument&) {
        throw std::invalid_argument("cannot parse '" + text + "' as a number");
    }
}

inline bool is_prob_header(const std::string& name) {
    const std::string n = lower(name);
    return n == "prob" || n == "probability" || n == "p" || n == "weight";
}

} // namespace detail

/**
 * @brief Scenario table: one row per atom, one named column per variable,
 * with an optional probability column.
 *
 * The probability column is recognized by header name (prob, probability, p
 * or weight, case-insensitive); without one the atoms are uniform.  Weights
 * are normalized to sum to one, exactly in rational mode and with the last
 * atom absorbing the rounding in float mode.
 */
template <class S> struct ScenarioTable {
    std::vector<std::string> names;
    std::vector<std::vector<S>> columns; ///< one per name, length = atom count
    std::vector<S> probs;                ///< normalized
    bool had_probs = false;

    std::size_t rows() const { return probs.size(); }

    SpacePtr<S> space() const { return make_space<S>(probs); }

    std::optional<std::size_t> column_index(const std::string& name) const {
        for (std::size_t j = 0; j < names.size(); ++j)
            if (detail::lower(names[j]) == detail::lower(name)) return j;
        return std::nullopt;
    }

    RandomVariable<S> variable(std::size_t j) const {
        if (j >= columns.size())
            throw std::invalid_argument("ScenarioTable: no such column");
        return RandomVariable<S>(space(), columns[j]);
    }
};

/**
 * @brief Parses a comma-separated scenario table with a header row.
 *
 * Malformed input throws std::invalid_argument carrying the origin label,
 * the 1-based file row and the 1-based column of the offending cell.
 */
template <class S>
ScenarioTable<S> parse_scenarios(std::istream& in, const std::string& origin = "scenarios") {
    auto fail = [&](std::size_t row, std::size_t col, const std::string& what) -> void {
        std::ostringstream msg;
        msg << origin << ": row " << row;
        if (col != 0) msg << ", column " << col;
        msg << ": " << what;
        throw std::invalid_argument(msg.str());
    };

    auto split = [](const std::string& line) {
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(detail::trim(cell));
        if (!line.empty() && line.back() == ',') cells.push_back("");
        return cells;
    };

    std::string line;
    std::size_t row = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        header = split(line);
        break;
    }
    if (header.empty()) fail(row == 0 ? 1 : row, 0, "missing header row");

    std::optional<std::size_t> prob_col;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j].empty()) fail(row, j + 1, "empty header name");
        if (detail::is_prob_header(header[j])) {
            if (prob_col) fail(row, j + 1, "duplicate probability column");
            prob_col = j;
        }
    }
    if (header.size() == (prob_col ? 1u : 0u)) fail(row, 0, "no variable columns");

    ScenarioTable<S> table;
    table.had_probs = prob_col.has_value();
    for (std::size_t j = 0; j < header.size(); ++j)
        if (!prob_col || j != *prob_col) table.names.push_back(header[j]);
    table.columns.resize(table.names.size());

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size()) {
            std::ostringstream what;
            what << "has " << cells.size() << " cells, expected " << header.size();
            fail(row, 0, what.str());
        }
        std::size_t out_j = 0;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            S value;
            try {
                value = detail::parse_cell<S>(cells[j]);
            } catch (const std::invalid_argument& e) {
                fail(row, j + 1, e.what());
                throw; // unreachable, fail always throws
            }
            if (prob_col && j == *prob_col) {
                if (!(value > S(0))) fail(row, j + 1, "probability must be > 0");
                table.probs.push_back(value);
            } else {
                table.columns[out_j++].push_back(value);
            }
        }
        if (!prob_col) table.probs.push_back(S(1));
    }
    if (table.probs.empty()) fail(row + 1, 0, "no data rows");

    S total(0);
    for (const S& p : table.probs) total += p;
    S running(0);
    for (std::size_t i = 0; i + 1 < table.probs.size(); ++i) {
        table.probs[i] = S(table.probs[i] / total);
        running += table.probs[i];
    }
    table.probs.back() = S(S(1) - running); // absorb float rounding exactly
    if (!(table.probs.back() > S(0)))
        fail(row, 0, "probabilities are too uneven to normalize");
    return table;
}

template <class S> ScenarioTable<S> load_scenarios(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument(path + ": cannot open");
    return parse_scenarios<S>(in, path);
}

} // namespace riskconv
