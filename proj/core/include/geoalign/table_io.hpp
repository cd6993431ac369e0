#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/graph.hpp"

namespace geoalign {

// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

// Comma-separated numeric table. Lines starting with '#' are comments; a first line
// containing a non-numeric field is treated as a column header and skipped.
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

// Writes `# <header>` (when non-empty) followed by one comma-separated row per line.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::string& header = {});

// Three columns i, j, weight (0-based, each undirected edge once); commas or whitespace.
std::vector<Edge> read_edge_list(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, const std::vector<Edge>& edges);

std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// Node count is taken from the attribute table.
AttributedGraph load_graph(const std::filesystem::path& edges,
                           const std::filesystem::path& attributes,
                           const std::filesystem::path& labels = {});

} // namespace geoalign
