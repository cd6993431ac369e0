#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace geoalign {

struct Edge {
    std::size_t i = 0;
    std::size_t j = 0;
    double weight = 1.0;
};

// Undirected, loop-free, nonnegatively weighted graph with an N x D attribute matrix.
class AttributedGraph {
public:
    AttributedGraph() = default;
    AttributedGraph(std::size_t n, std::vector<Edge> edges, Eigen::MatrixXd attributes,
                    std::optional<std::vector<int>> labels = std::nullopt);

    std::size_t node_count() const { return n_; }
    std::size_t edge_count() const { return edges_.size(); }

    // Each undirected edge once, with i < j, sorted.
    const std::vector<Edge>& edges() const { return edges_; }
    const Eigen::SparseMatrix<double>& adjacency() const { return adjacency_; }
    double weight(std::size_t i, std::size_t j) const;
    Eigen::VectorXd degrees() const;

    const Eigen::MatrixXd& attributes() const { return attributes_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }

private:
    std::size_t n_ = 0;
    std::vector<Edge> edges_;
    Eigen::SparseMatrix<double> adjacency_;
    Eigen::MatrixXd attributes_;
    std::optional<std::vector<int>> labels_;
};

} // namespace geoalign
