#include "geoalign/table_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "geoalign/errors.hpp"

namespace geoalign {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || c == ' ' || c == '\t' || c == '\r') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    if (ec == std::errc() && p == e) return true;
    // from_chars rejects a leading '+'; accept it and the non-finite spellings strtod knows
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && !s.empty();
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    return out;
}

} // namespace

std::string format_double(double x) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) throw IoError("format_double: conversion failed");
    return std::string(buf, p);
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    bool first_data_line = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto fields = split_fields(line);
        if (fields.empty()) continue;
        std::vector<double> row;
        bool numeric = true;
        for (const auto& f : fields) {
            double v = 0.0;
            if (!parse_double(f, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first_data_line) {
                first_data_line = false;
                continue;
            }
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": non-numeric field");
        }
        first_data_line = false;
        if (!rows.empty() && row.size() != rows.front().size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return m;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::string& header) {
    auto out = open_out(path);
    if (!header.empty()) out << "# " << header << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_double(m(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<Edge> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_fields(line);
        if (f.empty()) continue;
        double a = 0.0, b = 0.0, w = 0.0;
        if (f.size() != 3 || !parse_double(f[0], a) || !parse_double(f[1], b) ||
            !parse_double(f[2], w))
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected 'i, j, weight'");
        if (a < 0 || b < 0 || a != std::floor(a) || b != std::floor(b))
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": node indices must be non-negative integers");
        edges.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), w});
    }
    return edges;
}

void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges) {
    auto out = open_out(path);
    for (const auto& e : edges) out << e.i << ',' << e.j << ',' << format_double(e.weight) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<int> labels;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_fields(line);
        if (f.empty()) continue;
        int v = 0;
        auto [p, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), v);
        if (f.size() != 1 || ec != std::errc() || p != f[0].data() + f[0].size())
            throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected one integer label");
        labels.push_back(v);
    }
    return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
    auto out = open_out(path);
    for (int l : labels) out << l << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

AttributedGraph load_graph(const std::filesystem::path& edges,
                           const std::filesystem::path& attributes,
                           const std::filesystem::path& labels) {
    Eigen::MatrixXd x = read_matrix_csv(attributes);
    std::optional<std::vector<int>> lab;
    if (!labels.empty()) lab = read_labels(labels);
    const auto n = static_cast<std::size_t>(x.rows());
    return AttributedGraph(n, read_edge_list(edges), std::move(x), std::move(lab));
}

} // namespace geoalign
