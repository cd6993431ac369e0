#pragma once

#include <cstddef>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/nn.hpp"

namespace geoalign {

// A Riemannian metric on a d-dimensional latent chart.
class MetricSource {
public:
    virtual ~MetricSource() = default;

    virtual int dim() const = 0;
    virtual Eigen::MatrixXd metric(const Eigen::VectorXd& z) const = 0;

    // One tensor per column of z (d x B).
    virtual std::vector<Eigen::MatrixXd> metric_batch(const Eigen::MatrixXd& z) const;

    // v_k^T g(z_k) v_k for each column k.
    virtual Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& z,
                                            const Eigen::MatrixXd& v) const;
};

class FunctionMetric final : public MetricSource {
public:
    using Fn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

    FunctionMetric(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}

    int dim() const override { return dim_; }
    Eigen::MatrixXd metric(const Eigen::VectorXd& z) const override { return fn_(z); }

private:
    int dim_;
    Fn fn_;
};

// Per-sample (z, v, c) triples whose weighted quadratic forms sum_k c_k v_k^T g(z_k) v_k
// are to be differentiated with respect to decoder parameters.
struct QuadformBatch {
    std::vector<Eigen::VectorXd> points;
    std::vector<Eigen::VectorXd> directions;
    std::vector<double> coefficients;

    void add(const Eigen::VectorXd& z, const Eigen::VectorXd& v, double c);
    std::size_t size() const { return coefficients.size(); }
    bool empty() const { return coefficients.empty(); }
};

// Expected pullback metric of a two-headed Gaussian decoder:
//   g(z) = Jmu^T Jmu + Jsigma^T Jsigma,  sigma = exp(logvar / 2).
// Holds references; the networks must outlive this object.
class DecoderMetric final : public MetricSource {
public:
    DecoderMetric(const Mlp& mean_head, const Mlp& logvar_head);

    int dim() const override { return static_cast<int>(mu_.input_dim()); }
    Eigen::MatrixXd metric(const Eigen::VectorXd& z) const override;
    std::vector<Eigen::MatrixXd> metric_batch(const Eigen::MatrixXd& z) const override;
    Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& z,
                                    const Eigen::MatrixXd& v) const override;

    // Jacobians of the mean head and of the standard-deviation head at z.
    std::pair<Eigen::MatrixXd, Eigen::MatrixXd> jacobians(const Eigen::VectorXd& z) const;

    // Adds sum_k c_k d(v_k^T g(z_k) v_k)/dtheta into the two gradient buffers.
    void accumulate_gradient(const QuadformBatch& batch, MlpGradient& grad_mu,
                             MlpGradient& grad_logvar) const;

    const Mlp& mean_head() const { return mu_; }
    const Mlp& logvar_head() const { return lv_; }

private:
    const Mlp& mu_;
    const Mlp& lv_;
};

Eigen::MatrixXd pullback_metric(const Mlp& mean_head, const Mlp& logvar_head,
                                const Eigen::VectorXd& z);

// ---------------------------------------------------------------------------

enum class Connectivity { Axis, AxisDiagonal };

std::string_view to_string(Connectivity c);
Connectivity connectivity_from_string(std::string_view s);

struct GridBounds {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;

    // Bounding box of the rows of codes, widened by `expand` of the range per side.
    static GridBounds around(const Eigen::MatrixXd& codes, double expand = 0.1);
};

// Uniform Cartesian grid with a cached metric tensor per node. Node index is the
// mixed-radix number of its per-axis indices, axis 0 fastest.
class MetricField {
public:
    static constexpr int kMaxGridDim = 3;
    // Eigenvalues are clamped below at this fraction of the tensor trace.
    static constexpr double kPsdFloor = 1e-12;

    static MetricField build(const MetricSource& metric, const GridBounds& bounds,
                             int resolution, Connectivity connectivity);

    int dim() const { return dim_; }
    int resolution() const { return resolution_; }
    int nodes_per_axis() const { return resolution_ + 1; }
    std::size_t node_count() const { return node_count_; }
    Connectivity connectivity() const { return connectivity_; }
    const GridBounds& bounds() const { return bounds_; }
    double spacing(int axis) const { return spacing_[axis]; }

    std::vector<int> multi_index(std::size_t node) const;
    std::size_t node_index(const std::vector<int>& multi) const;
    Eigen::VectorXd position(std::size_t node) const;
    Eigen::Map<const Eigen::MatrixXd> tensor(std::size_t node) const;
    bool is_interior(std::size_t node) const;

    // Nearest grid node; rejects points outside the bounds.
    std::size_t snap(const Eigen::VectorXd& p) const;

    bool are_neighbors(std::size_t i, std::size_t j) const;
    double edge_weight(std::size_t i, std::size_t j) const;
    std::size_t edge_count() const;

    // Neighbour offsets in node-index space and their cached edge weights (negative when
    // the neighbour falls outside the grid).
    const std::vector<std::ptrdiff_t>& offsets() const { return offset_index_; }
    double cached_weight(std::size_t node, std::size_t k) const {
        return weights_[node * offset_index_.size() + k];
    }

    // Smallest eigenvalue seen over all tensors before the PSD floor was applied.
    double min_eigenvalue_before_floor() const { return min_eig_before_; }

private:
    double compute_edge_weight(std::size_t i, std::size_t j) const;

    int dim_ = 0;
    int resolution_ = 0;
    std::size_t node_count_ = 0;
    Connectivity connectivity_ = Connectivity::AxisDiagonal;
    GridBounds bounds_;
    std::vector<double> spacing_;
    std::vector<double> tensors_;
    std::vector<std::vector<int>> offsets_;
    std::vector<std::ptrdiff_t> offset_index_;
    std::vector<double> weights_;
    double min_eig_before_ = 0.0;
};

struct GeodesicResult {
    double distance = 0.0;
    std::vector<std::size_t> path; // grid nodes (grid estimator)
    Eigen::MatrixXd points;        // d x T sample points (linear estimator)
    bool differentiable = true;
};

// Snaps u and v to grid nodes, runs Dijkstra, and returns the path with its length as the
// sum of edge weights along it. The sum is formed from the lower-indexed endpoint so that
// d(u, v) == d(v, u) bit for bit.
GeodesicResult geodesic_grid(const MetricField& field, const Eigen::VectorXd& u,
                             const Eigen::VectorXd& v);

// Shortest-path lengths from one node to every node (same summation order as above).
std::vector<double> grid_distances_from(const MetricField& field, std::size_t source);

// Full Dijkstra tree from source. Paths read off it coincide with geodesic_grid's when
// source is the lower-indexed endpoint.
struct ShortestPathTree {
    std::size_t source = 0;
    std::vector<double> dist;
    std::vector<std::size_t> pred;

    // source -> target node sequence
    std::vector<std::size_t> path_to(std::size_t target) const;
};

ShortestPathTree grid_shortest_paths(const MetricField& field, std::size_t source);

// Adds the path-length gradient (scaled by coef) as per-node d x d moment matrices M so
// that d(length)/dtheta = sum_nodes <dg_node/dtheta, M_node>.
void accumulate_path_moments(const MetricField& field, const std::vector<std::size_t>& path,
                             double coef, std::vector<Eigen::MatrixXd>& moments);

// Turns node moments into quadratic-form samples (eigen-decomposing each moment).
void moments_to_quadforms(const MetricField& field, const std::vector<Eigen::MatrixXd>& moments,
                          QuadformBatch& batch);

// Trapezoid rule over T points of the straight segment from u to v.
GeodesicResult geodesic_linear(const MetricSource& metric, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v, int T);

// Adds coef * d(geodesic_linear)/dtheta samples into batch.
void accumulate_linear_quadforms(const MetricSource& metric, const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& v, int T, double coef,
                                 QuadformBatch& batch);

// Brioschi formula with central differences of the cached metric (d = 2, interior nodes).
double gaussian_curvature(const MetricField& field, std::size_t node);

// Curvature at every interior node, (P-1) x (P-1), row index along axis 1.
Eigen::MatrixXd curvature_grid(const MetricField& field);

enum class Estimator { Grid, Linear };

std::string_view to_string(Estimator e);
Estimator estimator_from_string(std::string_view s);

struct DistanceOptions {
    Estimator estimator = Estimator::Grid;
    int linear_steps = 32;
    const MetricField* field = nullptr; // required for the grid estimator
};

// Symmetric N x N matrix of estimated distances between the rows of points.
Eigen::MatrixXd pairwise_distances(const MetricSource& metric, const Eigen::MatrixXd& points,
                                   const DistanceOptions& options);

} // namespace geoalign
