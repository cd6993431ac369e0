#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/graph.hpp"

namespace geoalign {

enum class Nonlinearity { Sin, Cos, Tanh, GaussBump, Rational };

std::string_view to_string(Nonlinearity f);
Nonlinearity nonlinearity_from_string(std::string_view s);
double apply(Nonlinearity f, double x);

// One ambient coordinate beyond the base immersion: f(a u + b v).
struct ExtraDimension {
    double a = 0.0;
    double b = 0.0;
    Nonlinearity f = Nonlinearity::Sin;
};

struct ManifoldSpec {
    int n = 500;
    int ambient_dim = 20;
    double r0 = 1.0;
    double spread = 1.0;
    double twist = 1.0;
    std::uint64_t seed = 0;
    // Empty: drawn from the seed (a, b standard normal, f uniform over the five tags).
    std::vector<ExtraDimension> recipe;

    void validate() const;
};

// (r cos theta, r sin theta, v) with r = r0 + softplus(spread u), theta = twist v.
Eigen::Vector3d base_immersion(const ManifoldSpec& spec, double u, double v);
Eigen::VectorXd embed(const ManifoldSpec& spec, const std::vector<ExtraDimension>& recipe,
                      double u, double v);

struct ManifoldSample {
    Eigen::MatrixXd intrinsic;  // N x 2, (u, v) uniform on [0, 2 pi]^2
    Eigen::MatrixXd attributes; // N x D
    std::vector<ExtraDimension> recipe;
};

ManifoldSample sample_manifold(const ManifoldSpec& spec);

inline constexpr double kSimilarityThreshold = 0.2;

// exp(-2 |z_a - z_b|^2 / median_{a<b} |z_a - z_b|^2), entries below threshold zeroed,
// zero diagonal.
Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& intrinsic,
                                  double threshold = kSimilarityThreshold);

// center plus its size-1 nearest neighbours in intrinsic coordinates, sorted.
std::vector<std::size_t> nearest_group(const Eigen::MatrixXd& intrinsic, std::size_t center,
                                       std::size_t size);

// Writes the upper-triangle intra-group values back in the order given by permutation
// (value k moves to slot permutation[k]); symmetric. Slots enumerate (g_a, g_b), a < b.
Eigen::MatrixXd permute_group_scores(const Eigen::MatrixXd& s,
                                     const std::vector<std::size_t>& group,
                                     const std::vector<std::size_t>& permutation);

struct Perturbation {
    Eigen::MatrixXd similarity;
    std::vector<std::size_t> group;
};

Perturbation perturb(const Eigen::MatrixXd& s, const Eigen::MatrixXd& intrinsic,
                     std::size_t group_size, std::uint64_t seed);

struct SampledGraph {
    AttributedGraph graph;
    std::vector<std::size_t> kept; // kept[new index] = original index
};

// Bernoulli(S_ab) per unordered pair, edges weighted by S_ab. Isolated nodes are dropped.
// Throws ValidationError when no edge is drawn.
SampledGraph sample_graph(const Eigen::MatrixXd& s, const Eigen::MatrixXd& attributes,
                          const std::vector<int>& labels, std::uint64_t seed);

struct SynthConfig {
    ManifoldSpec manifold;
    std::size_t group_size = 70;
    double threshold = kSimilarityThreshold;
};

struct SynthDataset {
    ManifoldSample manifold;
    Eigen::MatrixXd similarity_clean;
    Eigen::MatrixXd similarity;        // perturbed
    std::vector<std::size_t> group;    // original indices
    SampledGraph sampled;
    Eigen::MatrixXd intrinsic_kept;    // rows follow the graph's node order
};

// Fully determined by config (including manifold.seed).
SynthDataset generate_dataset(const SynthConfig& config);

} // namespace geoalign
