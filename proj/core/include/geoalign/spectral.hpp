#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/graph.hpp"

namespace geoalign {

enum class LaplacianKind { Unnormalized, Normalized };

std::string_view to_string(LaplacianKind k);
LaplacianKind laplacian_kind_from_string(std::string_view s);

// Unnormalized: Deg - A. Normalized: I - Deg^-1/2 A Deg^-1/2 (isolated rows stay zero).
Eigen::MatrixXd laplacian(const AttributedGraph& graph,
                          LaplacianKind kind = LaplacianKind::Unnormalized);

struct SpectralBounds {
    double lambda2 = 0.0;    // smallest eigenvalue > 1e-9 * lambda_max
    double lambda_max = 0.0;
    Eigen::VectorXd vector2;
    Eigen::VectorXd vector_max;
};

// Dense symmetric eigendecomposition. Throws when no eigenvalue is nonzero.
SpectralBounds spectral_bounds(const Eigen::MatrixXd& laplacian);

struct HeatTimeSchedule {
    std::vector<double> times;
    double lambda2 = 0.0;
    double lambda_max = 0.0;
};

// k log-spaced diffusion times from 1/lambda_max to 4/lambda2, endpoints exact.
HeatTimeSchedule heat_times(double lambda2, double lambda_max, int k = 15);

} // namespace geoalign
