#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "geoalign/nn.hpp"

namespace geoalign {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter blocks. The moment buffers are
// shaped on the first step and every later step must present the same block shapes.
class Adam {
public:
    explicit Adam(AdamConfig config = {});

    // Rejects the whole step (no parameter touched) if any gradient is non-finite;
    // the NumericalError message names the offending block.
    void step(std::span<const ParamBlock> params, std::span<const ConstParamBlock> grads);

    std::int64_t steps_taken() const { return t_; }
    const AdamConfig& config() const { return config_; }
    void set_learning_rate(double lr);

    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

private:
    AdamConfig config_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace geoalign
