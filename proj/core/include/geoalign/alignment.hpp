#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/graph.hpp"
#include "geoalign/riemann.hpp"
#include "geoalign/spectral.hpp"
#include "geoalign/vae.hpp"

namespace geoalign {

// sum_t (4 pi t)^(-d/2) exp(-dist^2 / (4 t))
double heat_kernel_value(double dist, int latent_dim, const HeatTimeSchedule& schedule);
// derivative of heat_kernel_value with respect to dist
double heat_kernel_slope(double dist, int latent_dim, const HeatTimeSchedule& schedule);

enum class KernelScaleMode { Learned, Fixed };

std::string_view to_string(KernelScaleMode m);
KernelScaleMode kernel_scale_mode_from_string(std::string_view s);

// Optional distance scale s inside the kernel, H(s * dist). "calibrated" fits s (with the
// amplitude) to the first sample before training so the decoder does not have to rescale
// the whole metric to bring the kernel's width in line with the graph.
enum class DistanceScaleMode { Off, Calibrated };

std::string_view to_string(DistanceScaleMode m);
DistanceScaleMode distance_scale_mode_from_string(std::string_view s);

struct GeodesicSettings {
    Estimator estimator = Estimator::Grid;
    int grid_resolution = 64;
    Connectivity connectivity = Connectivity::AxisDiagonal;
    double grid_expand = 0.1;
    int linear_steps = 32;
};

struct AlignmentConfig {
    GeodesicSettings geodesic;
    int pairs_per_step = 256;
    int epochs = 150;
    double learning_rate = 1e-3;
    KernelScaleMode scale_mode = KernelScaleMode::Learned;
    DistanceScaleMode distance_scale_mode = DistanceScaleMode::Off;
    HeatTimeSchedule schedule;
    std::uint64_t seed = 0;
};

struct NodePair {
    std::size_t i = 0;
    std::size_t j = 0;
};

struct KernelEvaluation {
    std::vector<NodePair> pairs;
    std::vector<double> distances;
    std::vector<double> kernel; // H(s * d_ij), without alpha
    double alpha = 1.0;
    double distance_scale = 1.0;
};

// Distances and kernel values for the given pairs of latent codes (rows of z).
KernelEvaluation evaluate_kernel(const MetricSource& metric, const Eigen::MatrixXd& z,
                                 const std::vector<NodePair>& pairs,
                                 const HeatTimeSchedule& schedule, double alpha,
                                 const GeodesicSettings& settings, const MetricField* field,
                                 double distance_scale = 1.0);

// sum over pairs of (A_ij - alpha H_ij)^2; diagonal pairs are not allowed.
double alignment_loss(const AttributedGraph& graph, const KernelEvaluation& eval);

struct Phase2Loss {
    KernelEvaluation eval;
    double loss = 0.0;
    VaeGradient grad;          // encoder parts stay zero
    double grad_log_alpha = 0.0;
    double grad_log_distance_scale = 0.0;
};

// Loss and its gradient through kernel -> distances -> metric tensors -> decoder.
// For the grid estimator `field` must have been built from the model's current decoder.
Phase2Loss phase2_loss(const VaeModel& model, const Eigen::MatrixXd& z,
                       const AttributedGraph& graph, const std::vector<NodePair>& pairs,
                       const HeatTimeSchedule& schedule, double alpha,
                       const GeodesicSettings& settings, const MetricField* field,
                       double distance_scale = 1.0);

// Half of the pairs uniformly from edges, half uniformly from non-adjacent pairs.
std::vector<NodePair> sample_pairs(const AttributedGraph& graph, int count,
                                   std::mt19937_64& rng);

// ||A||_F / ||H||_F over the given sample.
double initial_kernel_scale(const AttributedGraph& graph, const KernelEvaluation& eval);

struct KernelCalibration {
    double alpha = 1.0;
    double distance_scale = 1.0;
    double loss = 0.0;
};

// Least-squares (alpha, s) for sum (A_ij - alpha H(s d_ij))^2: alpha in closed form,
// log s scanned on a uniform grid over [-12, 12].
KernelCalibration calibrate_kernel(const AttributedGraph& graph, const std::vector<NodePair>& pairs,
                                   const std::vector<double>& distances, int latent_dim,
                                   const HeatTimeSchedule& schedule);

// Full distance matrix over all nodes with the given decoder state.
Eigen::MatrixXd distance_snapshot(const VaeModel& model, const Eigen::MatrixXd& z,
                                  const GeodesicSettings& settings, const GridBounds& bounds);

struct Phase2TraceEntry {
    std::int64_t step = 0;
    double loss = 0.0;
    double alpha = 0.0;
    double distance_scale = 1.0;
    bool encoder_grad_zero = true;
};

struct Phase2Result {
    VaeModel model;
    std::vector<Phase2TraceEntry> trace;
    Eigen::MatrixXd distances_before;
    Eigen::MatrixXd distances_after;
    GridBounds bounds;
    double alpha = 1.0;
    double distance_scale = 1.0;
    std::string encoder_digest_before;
    std::string encoder_digest_after;
};

// Decoder-only descent on the alignment objective with frozen latent codes
// latent.z_fixed. Throws NumericalError if the encoder parameters change.
Phase2Result train_phase2(VaeModel model, const LatentState& latent,
                          const AttributedGraph& graph, const AlignmentConfig& config);

} // namespace geoalign
