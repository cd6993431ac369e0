#include "geoalign/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "geoalign/errors.hpp"

namespace geoalign {

AttributedGraph::AttributedGraph(std::size_t n, std::vector<Edge> edges,
                                 Eigen::MatrixXd attributes,
                                 std::optional<std::vector<int>> labels)
    : n_(n), edges_(std::move(edges)), attributes_(std::move(attributes)),
      labels_(std::move(labels)) {
    if (static_cast<std::size_t>(attributes_.rows()) != n_) {
        std::ostringstream os;
        os << "attribute rows (" << attributes_.rows() << ") must equal node count (" << n_
           << ")";
        throw ValidationError(os.str());
    }
    if (!attributes_.allFinite()) throw ValidationError("attributes must be finite");
    if (labels_ && labels_->size() != n_)
        throw ValidationError("label count must equal node count");

    for (auto& e : edges_) {
        if (e.i >= n_ || e.j >= n_) throw ValidationError("edge endpoint out of range");
        if (e.i == e.j) throw ValidationError("self-loops are not allowed");
        if (!std::isfinite(e.weight) || e.weight < 0.0)
            throw ValidationError("edge weights must be finite and >= 0");
        if (e.i > e.j) std::swap(e.i, e.j);
    }
    std::sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return a.i != b.i ? a.i < b.i : a.j < b.j;
    });
    for (std::size_t k = 1; k < edges_.size(); ++k)
        if (edges_[k].i == edges_[k - 1].i && edges_[k].j == edges_[k - 1].j) {
            std::ostringstream os;
            os << "duplicate edge (" << edges_[k].i << ", " << edges_[k].j << ")";
            throw ValidationError(os.str());
        }

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(edges_.size() * 2);
    for (const auto& e : edges_) {
        trips.emplace_back(static_cast<int>(e.i), static_cast<int>(e.j), e.weight);
        trips.emplace_back(static_cast<int>(e.j), static_cast<int>(e.i), e.weight);
    }
    adjacency_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    adjacency_.setFromTriplets(trips.begin(), trips.end());
    adjacency_.makeCompressed();
}

double AttributedGraph::weight(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw ValidationError("node index out of range");
    return adjacency_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

Eigen::VectorXd AttributedGraph::degrees() const {
    Eigen::VectorXd deg = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
    for (const auto& e : edges_) {
        deg[static_cast<Eigen::Index>(e.i)] += e.weight;
        deg[static_cast<Eigen::Index>(e.j)] += e.weight;
    }
    return deg;
}

} // namespace geoalign
