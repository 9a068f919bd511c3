#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dral/config.hpp"
#include "dral/errors.hpp"
#include "dral/kernel.hpp"
#include "dral/random.hpp"

namespace dral {

/// Normalized rows of a regression table; the rows are the candidate grid.
struct Dataset {
    Points inputs;
    Vector targets;
    std::vector<std::string> feature_names;
    std::vector<std::size_t> source_rows;  // 1-based data-row numbers in the file
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split(std::string_view line, char delimiter) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(delimiter, start);
        cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

/// z-scores a column in place (population std; zero std divides by 1).
inline void standardize(Eigen::Ref<Vector> column) {
    const double n = static_cast<double>(column.size());
    const double mean = column.mean();
    column.array() -= mean;
    const double sd = std::sqrt(column.squaredNorm() / n);
    if (sd > 0.0) column /= sd;
}

} // namespace detail

/**
 * Loads a delimited table with a header row. Only the target and the selected feature columns
 * must be numeric. Rows are optionally subsampled without replacement (seeded), then every
 * feature column and the target are standardized over the kept rows.
 */
inline Dataset load_dataset(const DatasetSpec& spec) {
    std::ifstream in(spec.path);
    if (!in) throw std::runtime_error("cannot open dataset '" + spec.path + "'");

    std::string header_line;
    if (!std::getline(in, header_line)) throw ParseError("dataset has no header row", 1, 1);
    const auto header_cells = detail::split(header_line, spec.delimiter);
    std::vector<std::string> header(header_cells.begin(), header_cells.end());

    auto column_of = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument("dataset column '" + name + "' not found in header");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t target_col = column_of(spec.target);
    std::vector<std::size_t> feature_cols;
    std::vector<std::string> feature_names;
    if (spec.features.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (c != target_col) {
                feature_cols.push_back(c);
                feature_names.push_back(header[c]);
            }
    } else {
        for (const auto& name : spec.features) {
            feature_cols.push_back(column_of(name));
            feature_names.push_back(name);
        }
    }
    if (feature_cols.empty()) throw std::invalid_argument("dataset has no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> line_numbers;
    std::string line;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split(line, spec.delimiter);
        std::vector<double> row;
        row.reserve(feature_cols.size() + 1);
        auto take = [&](std::size_t col) {
            if (col >= cells.size()) throw ParseError("missing cell", line_no, col + 1);
            double v = 0.0;
            if (!detail::parse_double(cells[col], v))
                throw ParseError("non-numeric cell '" + std::string(cells[col]) + "'", line_no, col + 1);
            row.push_back(v);
        };
        for (std::size_t col : feature_cols) take(col);
        take(target_col);
        rows.push_back(std::move(row));
        line_numbers.push_back(line_no);
    }
    if (rows.empty()) throw std::invalid_argument("dataset '" + spec.path + "' has no data rows");

    std::vector<std::size_t> keep(rows.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (spec.subsample > 0) {
        if (static_cast<std::size_t>(spec.subsample) > rows.size())
            throw std::invalid_argument("subsample of " + std::to_string(spec.subsample) + " exceeds " +
                                        std::to_string(rows.size()) + " rows");
        Rng rng = make_rng(spec.seed);
        std::shuffle(keep.begin(), keep.end(), rng);
        keep.resize(static_cast<std::size_t>(spec.subsample));
        std::sort(keep.begin(), keep.end());
    }

    const auto n = static_cast<Eigen::Index>(keep.size());
    const auto d = static_cast<Eigen::Index>(feature_cols.size());
    Dataset out;
    out.inputs.resize(n, d);
    out.targets.resize(n);
    out.feature_names = std::move(feature_names);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = rows[keep[static_cast<std::size_t>(r)]];
        for (Eigen::Index c = 0; c < d; ++c) out.inputs(r, c) = row[static_cast<std::size_t>(c)];
        out.targets(r) = row.back();
        out.source_rows.push_back(line_numbers[keep[static_cast<std::size_t>(r)]]);
    }
    for (Eigen::Index c = 0; c < d; ++c) detail::standardize(out.inputs.col(c));
    detail::standardize(out.targets);
    return out;
}

/// Regular lattice {min, ..., max}^dim, last coordinate varying fastest.
inline Points make_lattice(const LatticeSpec& spec) {
    if (spec.dim < 1 || spec.levels < 1) throw std::invalid_argument("lattice: dim and levels must be >= 1");
    std::vector<double> axis(static_cast<std::size_t>(spec.levels));
    for (int k = 0; k < spec.levels; ++k)
        axis[static_cast<std::size_t>(k)] =
            spec.levels == 1 ? spec.min : spec.min + (spec.max - spec.min) * k / (spec.levels - 1);
    Eigen::Index n = 1;
    for (int k = 0; k < spec.dim; ++k) n *= spec.levels;
    Points pts(n, spec.dim);
    for (Eigen::Index r = 0; r < n; ++r) {
        Eigen::Index rem = r;
        for (int c = spec.dim - 1; c >= 0; --c) {
            pts(r, c) = axis[static_cast<std::size_t>(rem % spec.levels)];
            rem /= spec.levels;
        }
    }
    return pts;
}

} // namespace dral
