#include "geoalign/spectral.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "geoalign/errors.hpp"

namespace geoalign {

std::string_view to_string(LaplacianKind k) {
    return k == LaplacianKind::Unnormalized ? "unnormalized" : "normalized";
}

LaplacianKind laplacian_kind_from_string(std::string_view s) {
    if (s == "unnormalized") return LaplacianKind::Unnormalized;
    if (s == "normalized") return LaplacianKind::Normalized;
    throw ValidationError("unknown laplacian kind '" + std::string(s) + "'");
}

Eigen::MatrixXd laplacian(const AttributedGraph& graph, LaplacianKind kind) {
    const auto n = static_cast<Eigen::Index>(graph.node_count());
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
    const Eigen::VectorXd deg = graph.degrees();
    if (kind == LaplacianKind::Unnormalized) {
        for (const auto& e : graph.edges()) {
            const auto i = static_cast<Eigen::Index>(e.i);
            const auto j = static_cast<Eigen::Index>(e.j);
            L(i, j) -= e.weight;
            L(j, i) -= e.weight;
        }
        L.diagonal() = deg;
        return L;
    }
    Eigen::VectorXd inv_sqrt(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
    for (const auto& e : graph.edges()) {
        const auto i = static_cast<Eigen::Index>(e.i);
        const auto j = static_cast<Eigen::Index>(e.j);
        const double v = -e.weight * inv_sqrt[i] * inv_sqrt[j];
        L(i, j) = v;
        L(j, i) = v;
    }
    for (Eigen::Index i = 0; i < n; ++i) L(i, i) = deg[i] > 0.0 ? 1.0 : 0.0;
    return L;
}

SpectralBounds spectral_bounds(const Eigen::MatrixXd& L) {
    if (L.rows() != L.cols() || L.rows() == 0)
        throw ValidationError("spectral_bounds: Laplacian must be square and non-empty");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    if (es.info() != Eigen::Success)
        throw NumericalError("spectral_bounds: eigendecomposition failed");
    const Eigen::VectorXd& lam = es.eigenvalues(); // ascending
    const Eigen::Index top = lam.size() - 1;
    const double lmax = lam[top];
    if (!(lmax > 0.0))
        throw ValidationError("graph has no edges: Laplacian has no nonzero eigenvalue");
    const double tol = 1e-9 * lmax;
    Eigen::Index k = 0;
    while (k < lam.size() && !(lam[k] > tol)) ++k;
    SpectralBounds b;
    b.lambda2 = lam[k];
    b.lambda_max = lmax;
    b.vector2 = es.eigenvectors().col(k);
    b.vector_max = es.eigenvectors().col(top);
    return b;
}

HeatTimeSchedule heat_times(double lambda2, double lambda_max, int k) {
    if (!(lambda2 > 0.0) || !(lambda_max > 0.0))
        throw ValidationError("heat_times: eigenvalues must be positive");
    if (lambda2 > lambda_max) throw ValidationError("heat_times: lambda2 exceeds lambda_max");
    if (k < 2) throw ValidationError("heat_times: need at least 2 scales");
    HeatTimeSchedule s;
    s.lambda2 = lambda2;
    s.lambda_max = lambda_max;
    const double t_min = 1.0 / lambda_max;
    const double t_max = 4.0 / lambda2;
    const double lo = std::log(t_min);
    const double hi = std::log(t_max);
    s.times.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        s.times[i] = std::exp(lo + (hi - lo) * static_cast<double>(i) / (k - 1));
    s.times.front() = t_min;
    s.times.back() = t_max;
    return s;
}

} // namespace geoalign
