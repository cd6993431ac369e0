#include "geoalign/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "geoalign/adam.hpp"
#include "geoalign/errors.hpp"

namespace geoalign {

namespace {

constexpr double kLog2Pi = 1.8378770664093453; // log(2 pi)

std::vector<int> chain(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

template <class Block, class Model>
void append_blocks(std::vector<Block>& out, Model& net, const std::string& name) {
    auto b = net.parameter_blocks(name);
    out.insert(out.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
}

void append_grad_blocks(std::vector<ConstParamBlock>& out, const MlpGradient& g,
                        const std::string& name) {
    auto b = g.blocks(name);
    out.insert(out.end(), std::make_move_iterator(b.begin()), std::make_move_iterator(b.end()));
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

} // namespace

Architecture Architecture::preset(std::string_view name) {
    Architecture a;
    if (name == "synthetic-table2") {
        return a;
    }
    if (name == "empirical-table3") {
        a.name = "empirical-table3";
        a.encoder_hidden = {96, 64};
        a.encoder_activation = Activation::ReLU;
        a.decoder_hidden = {128};
        a.decoder_activation = Activation::ReLU;
        return a;
    }
    throw ValidationError("unknown architecture preset '" + std::string(name) + "'");
}

VaeModel VaeModel::create(const Architecture& arch, int data_dim, std::mt19937_64& rng) {
    if (data_dim <= 0) throw ValidationError("data_dim must be positive");
    if (arch.latent_dim <= 0) throw ValidationError("latent_dim must be positive");
    if (arch.encoder_hidden.empty()) throw ValidationError("encoder needs a hidden layer");
    if (!(arch.encoder_dropout >= 0.0 && arch.encoder_dropout < 1.0))
        throw ValidationError("encoder_dropout must lie in [0, 1)");

    VaeModel m;
    m.encoder_dropout = arch.encoder_dropout;
    {
        std::vector<int> sizes{data_dim};
        sizes.insert(sizes.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
        std::vector<Activation> acts(arch.encoder_hidden.size(), arch.encoder_activation);
        m.enc_trunk = Mlp::glorot(sizes, acts, rng);
    }
    const int trunk_out = arch.encoder_hidden.back();
    const std::vector<int> head{trunk_out, arch.latent_dim};
    const std::vector<Activation> lin{Activation::Identity};
    m.enc_mu = Mlp::glorot(head, lin, rng);
    m.enc_logvar = Mlp::glorot(head, lin, rng);

    const auto dec_sizes = chain(arch.latent_dim, arch.decoder_hidden, data_dim);
    std::vector<Activation> dec_acts(arch.decoder_hidden.size(), arch.decoder_activation);
    dec_acts.push_back(Activation::Identity);
    m.dec_mu = Mlp::glorot(dec_sizes, dec_acts, rng);
    m.dec_logvar = Mlp::glorot(dec_sizes, dec_acts, rng);
    return m;
}

std::vector<ParamBlock> VaeModel::encoder_blocks() {
    std::vector<ParamBlock> out;
    append_blocks(out, enc_trunk, "encoder.trunk");
    append_blocks(out, enc_mu, "encoder.mu");
    append_blocks(out, enc_logvar, "encoder.logvar");
    return out;
}

std::vector<ConstParamBlock> VaeModel::encoder_blocks() const {
    std::vector<ConstParamBlock> out;
    append_blocks(out, enc_trunk, "encoder.trunk");
    append_blocks(out, enc_mu, "encoder.mu");
    append_blocks(out, enc_logvar, "encoder.logvar");
    return out;
}

std::vector<ParamBlock> VaeModel::decoder_blocks() {
    std::vector<ParamBlock> out;
    append_blocks(out, dec_mu, "decoder.mu");
    append_blocks(out, dec_logvar, "decoder.logvar");
    return out;
}

std::vector<ConstParamBlock> VaeModel::decoder_blocks() const {
    std::vector<ConstParamBlock> out;
    append_blocks(out, dec_mu, "decoder.mu");
    append_blocks(out, dec_logvar, "decoder.logvar");
    return out;
}

Checkpoint VaeModel::to_checkpoint(std::uint64_t seed, std::int64_t step) const {
    Checkpoint c;
    c.seed = seed;
    c.step = step;
    c.networks = {{"encoder.trunk", enc_trunk},
                  {"encoder.mu", enc_mu},
                  {"encoder.logvar", enc_logvar},
                  {"decoder.mu", dec_mu},
                  {"decoder.logvar", dec_logvar}};
    c.scalars["encoder_dropout"] = encoder_dropout;
    return c;
}

VaeModel VaeModel::from_checkpoint(const Checkpoint& ckpt) {
    VaeModel m;
    m.enc_trunk = ckpt.network("encoder.trunk");
    m.enc_mu = ckpt.network("encoder.mu");
    m.enc_logvar = ckpt.network("encoder.logvar");
    m.dec_mu = ckpt.network("decoder.mu");
    m.dec_logvar = ckpt.network("decoder.logvar");
    if (auto it = ckpt.scalars.find("encoder_dropout"); it != ckpt.scalars.end())
        m.encoder_dropout = it->second;
    if (m.enc_mu.input_dim() != m.enc_trunk.output_dim() ||
        m.enc_logvar.input_dim() != m.enc_trunk.output_dim() ||
        m.dec_mu.input_dim() != m.enc_mu.output_dim() ||
        m.dec_logvar.input_dim() != m.enc_mu.output_dim() ||
        m.dec_mu.output_dim() != m.enc_trunk.input_dim() ||
        m.dec_logvar.output_dim() != m.enc_trunk.input_dim())
        throw ValidationError("checkpoint networks do not form a consistent VAE");
    return m;
}

VaeGradient VaeGradient::zeros_like(const VaeModel& m) {
    return {m.enc_trunk.zero_gradient(), m.enc_mu.zero_gradient(), m.enc_logvar.zero_gradient(),
            m.dec_mu.zero_gradient(), m.dec_logvar.zero_gradient()};
}

std::vector<ConstParamBlock> VaeGradient::encoder_blocks() const {
    std::vector<ConstParamBlock> out;
    append_grad_blocks(out, enc_trunk, "encoder.trunk");
    append_grad_blocks(out, enc_mu, "encoder.mu");
    append_grad_blocks(out, enc_logvar, "encoder.logvar");
    return out;
}

std::vector<ConstParamBlock> VaeGradient::decoder_blocks() const {
    std::vector<ConstParamBlock> out;
    append_grad_blocks(out, dec_mu, "decoder.mu");
    append_grad_blocks(out, dec_logvar, "decoder.logvar");
    return out;
}

// ---------------------------------------------------------------------------

Encoding encode(const VaeModel& model, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd h = model.enc_trunk.evaluate(x);
    return {model.enc_mu.evaluate(h), model.enc_logvar.evaluate(h)};
}

Eigen::VectorXd reparameterize(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar,
                               const Eigen::VectorXd& noise) {
    if (mu.size() != logvar.size() || mu.size() != noise.size())
        throw ValidationError("reparameterize: size mismatch");
    return mu.array() + (0.5 * logvar.array()).exp() * noise.array();
}

double gaussian_nll(const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                    const Eigen::VectorXd& sigma2) {
    if (x.size() != mu.size() || x.size() != sigma2.size())
        throw ValidationError("gaussian_nll: size mismatch");
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        if (!(sigma2[j] > 0.0)) throw ValidationError("gaussian_nll: variance must be positive");
        const double r = x[j] - mu[j];
        total += 0.5 * (kLog2Pi + std::log(sigma2[j])) + r * r / (2.0 * sigma2[j]);
    }
    return total;
}

double kl_divergence(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar) {
    if (mu.size() != logvar.size()) throw ValidationError("kl_divergence: size mismatch");
    return 0.5 * (logvar.array().exp() + mu.array().square() - 1.0 - logvar.array()).sum();
}

std::string_view to_string(AnnealSchedule::Kind k) {
    return k == AnnealSchedule::Kind::Linear ? "linear" : "sigmoid";
}

double AnnealSchedule::weight(std::int64_t step) const {
    if (step < 0) throw ValidationError("anneal: step must be >= 0");
    if (total_steps <= 0 || step >= total_steps) return end_weight;
    const double s = static_cast<double>(step) / static_cast<double>(total_steps);
    double frac = s;
    if (kind == Kind::Sigmoid) {
        const double lo = logistic(-0.5 * kSigmoidSteepness);
        const double hi = logistic(0.5 * kSigmoidSteepness);
        frac = (logistic(kSigmoidSteepness * (s - 0.5)) - lo) / (hi - lo);
    }
    return start_weight + (end_weight - start_weight) * frac;
}

AnnealSchedule AnnealSchedule::linear_preset() { return {Kind::Linear, 0.0, 1.0, 1200}; }
AnnealSchedule AnnealSchedule::sigmoid_preset() { return {Kind::Sigmoid, 0.0, 2.0, 1500}; }

// ---------------------------------------------------------------------------

Phase1Loss phase1_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                       const Phase1Weights& w, const Eigen::MatrixXd& noise,
                       const Dropout& dropout) {
    if (batch.cols() == 0) throw ValidationError("phase1_loss: empty batch");
    if (batch.rows() != model.data_dim())
        throw ValidationError("phase1_loss: batch rows must equal data dimension");
    if (noise.rows() != model.latent_dim() || noise.cols() != batch.cols())
        throw ValidationError("phase1_loss: noise must be latent_dim x batch");
    if (w.lambda1 < 0.0 || w.lambda2 < 0.0)
        throw ValidationError("phase1_loss: lambda weights must be >= 0");

    const double D = static_cast<double>(batch.rows());

    const Tape trunk = model.enc_trunk.forward(batch, dropout);
    const Tape mu_t = model.enc_mu.forward(trunk.output);
    const Tape lv_t = model.enc_logvar.forward(trunk.output);
    const Eigen::ArrayXXd mu = mu_t.output.array();
    const Eigen::ArrayXXd lv = lv_t.output.array();
    const Eigen::ArrayXXd half_std = (0.5 * lv).exp();
    const Eigen::MatrixXd z = (mu + half_std * noise.array()).matrix();

    const Tape dm_t = model.dec_mu.forward(z);
    const Tape dl_t = model.dec_logvar.forward(z);
    const Eigen::ArrayXXd m = dm_t.output.array();
    const Eigen::ArrayXXd l = dl_t.output.array();
    const Eigen::ArrayXXd s2 = l.exp();
    const Eigen::ArrayXXd x = batch.array();
    const Eigen::ArrayXXd r = x - m;

    Phase1Loss out;
    Eigen::ArrayXXd g_m(m.rows(), m.cols());
    Eigen::ArrayXXd g_l(l.rows(), l.cols());
    for (Eigen::Index i = 0; i < batch.cols(); ++i) {
        const auto ri = r.col(i);
        const auto s2i = s2.col(i);
        out.nll += (0.5 * (kLog2Pi + l.col(i)) + ri.square() / (2.0 * s2i)).sum();

        const double mean_m = m.col(i).mean();
        const double mean_x = x.col(i).mean();
        const Eigen::ArrayXd cm = m.col(i) - mean_m;
        const double var_m = cm.square().sum() / D;
        const double var_x = (x.col(i) - mean_x).square().sum() / D;
        const double e_s2 = s2i.mean();
        const double a = var_m - var_x;
        const double b = e_s2 - (var_x - var_m);
        out.mean_variance_penalty += a * a;
        out.residual_variance_penalty += b * b;

        const Eigen::ArrayXd dvar = (2.0 / D) * cm;
        g_m.col(i) = -ri / s2i + (2.0 * w.lambda1 * a + 2.0 * w.lambda2 * b) * dvar;
        g_l.col(i) = 0.5 - ri.square() / (2.0 * s2i) + 2.0 * w.lambda2 * b * s2i / D;
    }
    out.kl = 0.5 * (lv.exp() + mu.square() - 1.0 - lv).sum();
    out.total = out.nll + w.lambda1 * out.mean_variance_penalty +
                w.lambda2 * out.residual_variance_penalty + w.kl_weight * out.kl;

    BackwardResult bm = model.dec_mu.backward(dm_t, g_m.matrix());
    BackwardResult bl = model.dec_logvar.backward(dl_t, g_l.matrix());
    const Eigen::ArrayXXd g_z = (bm.input + bl.input).array();
    const Eigen::MatrixXd g_mu = (g_z + w.kl_weight * mu).matrix();
    const Eigen::MatrixXd g_lv =
        (g_z * 0.5 * half_std * noise.array() + w.kl_weight * 0.5 * (lv.exp() - 1.0)).matrix();

    BackwardResult bmu = model.enc_mu.backward(mu_t, g_mu);
    BackwardResult blv = model.enc_logvar.backward(lv_t, g_lv);
    BackwardResult btr = model.enc_trunk.backward(trunk, bmu.input + blv.input);

    out.grad.enc_trunk = std::move(btr.params);
    out.grad.enc_mu = std::move(bmu.params);
    out.grad.enc_logvar = std::move(blv.params);
    out.grad.dec_mu = std::move(bm.params);
    out.grad.dec_logvar = std::move(bl.params);
    return out;
}

LatentState encode_nodes(const VaeModel& model, const Eigen::MatrixXd& attributes) {
    const Encoding e = encode(model, attributes.transpose());
    LatentState s;
    s.mu = e.mu.transpose();
    s.logvar = e.logvar.transpose();
    s.z_fixed = s.mu;
    return s;
}

Phase1Result train_phase1(VaeModel model, const Eigen::MatrixXd& attributes,
                          const Phase1Config& config) {
    if (attributes.rows() == 0) throw ValidationError("train_phase1: no attributes");
    if (attributes.cols() != model.data_dim())
        throw ValidationError("train_phase1: attribute width does not match the model");
    if (!attributes.allFinite()) throw ValidationError("train_phase1: attributes must be finite");
    if (config.epochs < 0) throw ValidationError("train_phase1: epochs must be >= 0");

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Adam adam({config.learning_rate});

    const Eigen::MatrixXd batch = attributes.transpose();
    const Eigen::Index d = model.latent_dim();
    Phase1Result result;
    result.trace.reserve(static_cast<std::size_t>(config.epochs));

    for (int step = 0; step < config.epochs; ++step) {
        Eigen::MatrixXd noise(d, batch.cols());
        for (Eigen::Index c = 0; c < noise.cols(); ++c)
            for (Eigen::Index r = 0; r < d; ++r) noise(r, c) = normal(rng);
        Phase1Weights w{config.anneal.weight(step), config.lambda1, config.lambda2};
        Phase1Loss loss = phase1_loss(model, batch, w, noise,
                                      Dropout{model.encoder_dropout, &rng});
        if (!std::isfinite(loss.total)) {
            std::ostringstream os;
            os << "phase 1 diverged: non-finite loss at step " << step;
            throw NumericalError(os.str(), step);
        }
        result.trace.push_back({step, w.kl_weight, loss.total, loss.nll, loss.kl});

        auto params = model.encoder_blocks();
        auto dec = model.decoder_blocks();
        params.insert(params.end(), dec.begin(), dec.end());
        auto grads = loss.grad.encoder_blocks();
        auto dgrads = loss.grad.decoder_blocks();
        grads.insert(grads.end(), dgrads.begin(), dgrads.end());
        try {
            adam.step(params, grads);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (phase 1 step " +
                                     std::to_string(step) + ")",
                                 step);
        }
    }
    result.latent = encode_nodes(model, attributes);
    result.model = std::move(model);
    return result;
}

} // namespace geoalign
