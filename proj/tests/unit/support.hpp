#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/nn.hpp"

namespace testsupport {

inline geoalign::Mlp random_mlp(std::vector<int> sizes, geoalign::Activation hidden,
                                geoalign::Activation out, std::mt19937_64& rng) {
    std::vector<geoalign::Activation> acts(sizes.size() - 1, hidden);
    acts.back() = out;
    auto net = geoalign::Mlp::glorot(sizes, acts, rng);
    // glorot leaves biases at zero; give them some spread so kinks are not all at the origin
    std::normal_distribution<double> nd(0.0, 0.3);
    for (std::size_t k = 0; k < net.depth(); ++k)
        for (Eigen::Index i = 0; i < net.layer(k).bias.size(); ++i) net.layer(k).bias(i) = nd(rng);
    return net;
}

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng,
                                     double sd = 1.0) {
    std::normal_distribution<double> nd(0.0, sd);
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
    return m;
}

// max |a - b| / max(max |b|, floor)
inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-8) {
    const double scale = std::max(b.cwiseAbs().maxCoeff(), floor);
    return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max(std::abs(b), floor);
}

// Central differences of f over every entry of a flat parameter span.
inline std::vector<double> central_diff(std::span<double> params, const std::function<double()>& f,
                                        double h = 1e-5) {
    std::vector<double> g(params.size());
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double x0 = params[k];
        params[k] = x0 + h;
        const double fp = f();
        params[k] = x0 - h;
        const double fm = f();
        params[k] = x0;
        g[k] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_err(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
    double num = 0.0, scale = floor;
    for (std::size_t k = 0; k < a.size(); ++k) {
        num = std::max(num, std::abs(a[k] - b[k]));
        scale = std::max(scale, std::abs(b[k]));
    }
    return num / scale;
}

} // namespace testsupport
