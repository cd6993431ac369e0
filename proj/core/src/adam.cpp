#include "geoalign/adam.hpp"

#include <cmath>

#include "geoalign/errors.hpp"

namespace geoalign {

Adam::Adam(AdamConfig config) : config_(config) {
    if (!(config_.learning_rate > 0.0)) throw ValidationError("adam: learning_rate must be > 0");
    if (!(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
        !(config_.beta2 >= 0.0 && config_.beta2 < 1.0))
        throw ValidationError("adam: betas must lie in [0, 1)");
    if (!(config_.epsilon > 0.0)) throw ValidationError("adam: epsilon must be > 0");
}

void Adam::set_learning_rate(double lr) {
    if (!(lr > 0.0)) throw ValidationError("adam: learning_rate must be > 0");
    config_.learning_rate = lr;
}

void Adam::step(std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads) {
    if (params.size() != grads.size())
        throw ValidationError("adam: parameter and gradient block counts differ");
    for (std::size_t b = 0; b < params.size(); ++b) {
        if (params[b].values.size() != grads[b].values.size())
            throw ValidationError("adam: shape mismatch for '" + params[b].name + "'");
        for (double g : grads[b].values)
            if (!std::isfinite(g))
                throw NumericalError("adam: non-finite gradient in '" + grads[b].name + "'",
                                     t_);
    }
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.values.size(), 0.0);
            v_.emplace_back(p.values.size(), 0.0);
        }
    } else {
        if (m_.size() != params.size())
            throw ValidationError("adam: block count changed between steps");
        for (std::size_t b = 0; b < params.size(); ++b)
            if (m_[b].size() != params[b].values.size())
                throw ValidationError("adam: block '" + params[b].name +
                                      "' changed shape between steps");
    }

    ++t_;
    const double b1 = config_.beta1;
    const double b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t b = 0; b < params.size(); ++b) {
        auto& m = m_[b];
        auto& v = v_[b];
        auto p = params[b].values;
        auto g = grads[b].values;
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            p[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
        }
    }
}

} // namespace geoalign
