#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/checkpoint.hpp"
#include "geoalign/nn.hpp"

namespace geoalign {

struct Architecture {
    std::string name = "synthetic-table2";
    std::vector<int> encoder_hidden{16, 16};
    Activation encoder_activation = Activation::ELU;
    std::vector<int> decoder_hidden{16};
    Activation decoder_activation = Activation::ELU;
    int latent_dim = 2;
    double encoder_dropout = 0.2;

    // "synthetic-table2" or "empirical-table3".
    static Architecture preset(std::string_view name);
};

// Gaussian-posterior VAE. The decoder has a mean head and a log-variance head, kept as
// two networks so that each has its own Jacobian.
struct VaeModel {
    Mlp enc_trunk;
    Mlp enc_mu;
    Mlp enc_logvar;
    Mlp dec_mu;
    Mlp dec_logvar;
    double encoder_dropout = 0.0;

    static VaeModel create(const Architecture& arch, int data_dim, std::mt19937_64& rng);

    int latent_dim() const { return static_cast<int>(enc_mu.output_dim()); }
    int data_dim() const { return static_cast<int>(enc_trunk.input_dim()); }

    std::vector<ParamBlock> encoder_blocks();
    std::vector<ConstParamBlock> encoder_blocks() const;
    std::vector<ParamBlock> decoder_blocks();
    std::vector<ConstParamBlock> decoder_blocks() const;

    Checkpoint to_checkpoint(std::uint64_t seed, std::int64_t step) const;
    static VaeModel from_checkpoint(const Checkpoint& ckpt);
};

struct VaeGradient {
    MlpGradient enc_trunk;
    MlpGradient enc_mu;
    MlpGradient enc_logvar;
    MlpGradient dec_mu;
    MlpGradient dec_logvar;

    static VaeGradient zeros_like(const VaeModel& m);
    std::vector<ConstParamBlock> encoder_blocks() const;
    std::vector<ConstParamBlock> decoder_blocks() const;
};

// Posterior parameters; one column per sample.
struct Encoding {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd logvar;
};

// x: D x B. Dropout is never applied here.
Encoding encode(const VaeModel& model, const Eigen::MatrixXd& x);

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& noise);

// sum_j 0.5 log(2 pi s2_j) + (x_j - mu_j)^2 / (2 s2_j); throws on non-positive variance.
double gaussian_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& sigma2);

// KL( N(mu, diag(exp(logvar))) || N(0, I) ).
double kl_divergence(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar);

struct AnnealSchedule {
    enum class Kind { Linear, Sigmoid };
    Kind kind = Kind::Linear;
    double start_weight = 0.0;
    double end_weight = 1.0;
    std::int64_t total_steps = 1200;

    // Sigmoid steepness: logistic(k (s/T - 1/2)), rescaled to hit both endpoints.
    static constexpr double kSigmoidSteepness = 12.0;

    double weight(std::int64_t step) const;

    static AnnealSchedule linear_preset();  // 0 -> 1 over 1200 steps
    static AnnealSchedule sigmoid_preset(); // 0 -> 2 over 1500 steps
};

std::string_view to_string(AnnealSchedule::Kind k);

struct Phase1Weights {
    double kl_weight = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
};

struct Phase1Loss {
    double total = 0.0;
    double nll = 0.0;
    double mean_variance_penalty = 0.0;
    double residual_variance_penalty = 0.0;
    double kl = 0.0;
    VaeGradient grad;
};

// Batch phase-1 objective summed over samples, with exact gradients for encoder and
// decoder. batch: D x B, noise: d x B standard-normal draws. Variances are taken across
// the D attribute dimensions of each sample.
Phase1Loss phase1_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                       const Phase1Weights& weights, const Eigen::MatrixXd& noise,
                       const Dropout& dropout = {});

// Per-node latent parameters, rows are nodes.
struct LatentState {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd logvar;
    Eigen::MatrixXd z_fixed;
};

LatentState encode_nodes(const VaeModel& model, const Eigen::MatrixXd& attributes);

struct Phase1Config {
    int epochs = 1500;
    double learning_rate = 5e-3;
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    AnnealSchedule anneal = AnnealSchedule::sigmoid_preset();
    std::uint64_t seed = 0;
};

struct Phase1TraceEntry {
    std::int64_t step = 0;
    double kl_weight = 0.0;
    double total = 0.0;
    double nll = 0.0;
    double kl = 0.0;
};

struct Phase1Result {
    VaeModel model;
    LatentState latent;
    std::vector<Phase1TraceEntry> trace;
};

// Full-batch Adam on attributes (N x D). Throws NumericalError carrying the step index
// if the loss or a gradient goes non-finite.
Phase1Result train_phase1(VaeModel model, const Eigen::MatrixXd& attributes,
                          const Phase1Config& config);

} // namespace geoalign
