#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace geoalign {

enum class Activation { Identity, ReLU, ELU, Softplus, Tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// Elementwise activation value and its first two derivatives. ELU uses alpha = 1.
Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& pre);
Eigen::ArrayXXd activate_d1(Activation a, const Eigen::ArrayXXd& pre);
Eigen::ArrayXXd activate_d2(Activation a, const Eigen::ArrayXXd& pre);

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
    Activation activation = Activation::Identity;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

// A named, mutable view over one contiguous parameter array.
struct ParamBlock {
    std::string name;
    std::span<double> values;
};

struct ConstParamBlock {
    std::string name;
    std::span<const double> values;
};

// Gradient buffers shaped like an Mlp's parameters.
struct MlpGradient {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;

    void set_zero();
    bool is_zero() const;
    bool all_finite() const;
    MlpGradient& operator+=(const MlpGradient& other);
    MlpGradient& operator*=(double s);
    std::vector<ConstParamBlock> blocks(const std::string& prefix) const;
};

// Forward intermediates for one batch. Columns are samples.
struct Tape {
    std::vector<Eigen::MatrixXd> inputs; // layer inputs (post-dropout), size L
    std::vector<Eigen::MatrixXd> pre;    // pre-activations, size L
    std::vector<Eigen::ArrayXXd> masks;  // scaled dropout masks, empty when dropout is off
    Eigen::MatrixXd output;
};

// Forward pass carrying a tangent direction per column: output and J(x) * dir.
struct TangentTape {
    std::vector<Eigen::MatrixXd> inputs;
    std::vector<Eigen::MatrixXd> input_tangents;
    std::vector<Eigen::MatrixXd> pre;
    std::vector<Eigen::MatrixXd> pre_tangents;
    Eigen::MatrixXd output;
    Eigen::MatrixXd output_tangent;
};

struct Dropout {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;

    bool active() const { return rate > 0.0 && rng != nullptr; }
};

struct BackwardResult {
    MlpGradient params;
    Eigen::MatrixXd input; // d(upstream . y)/dx, one column per sample
};

class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<DenseLayer> layers);

    // Uniform init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
    static Mlp glorot(std::span<const int> sizes, std::span<const Activation> activations,
                      std::mt19937_64& rng);

    Eigen::Index input_dim() const;
    Eigen::Index output_dim() const;
    std::size_t depth() const { return layers_.size(); }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    DenseLayer& layer(std::size_t k) { return layers_.at(k); }
    const DenseLayer& layer(std::size_t k) const { return layers_.at(k); }

    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const;

    Tape forward(const Eigen::MatrixXd& x, const Dropout& dropout = {}) const;

    // Gradient of sum_columns(upstream . y) with respect to parameters and input.
    BackwardResult backward(const Tape& tape, const Eigen::MatrixXd& upstream) const;

    Eigen::MatrixXd input_jacobian(const Eigen::VectorXd& x) const;

    TangentTape tangent_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dir) const;

    // Accumulates into grad the parameter gradient of
    //   sum_columns(ybar . y + ydotbar . ydot)
    // where ydot = J(x) dir is the tangent carried by tape.
    void tangent_backward(const TangentTape& tape, const Eigen::MatrixXd& ybar,
                          const Eigen::MatrixXd& ydotbar, MlpGradient& grad) const;

    MlpGradient zero_gradient() const;

    std::vector<ParamBlock> parameter_blocks(const std::string& prefix);
    std::vector<ConstParamBlock> parameter_blocks(const std::string& prefix) const;

    bool all_finite() const;

private:
    void check_input(Eigen::Index rows) const;

    std::vector<DenseLayer> layers_;
};

} // namespace geoalign
