#include "geoalign/nn.hpp"

#include <cmath>
#include <sstream>

#include "geoalign/errors.hpp"

namespace geoalign {

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::ELU: return "elu";
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::ReLU;
    if (name == "elu") return Activation::ELU;
    if (name == "softplus") return Activation::Softplus;
    if (name == "tanh") return Activation::Tanh;
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

namespace {

double softplus(double x) {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

} // namespace

Eigen::ArrayXXd activate(Activation a, const Eigen::ArrayXXd& pre) {
    switch (a) {
    case Activation::Identity: return pre;
    case Activation::ReLU: return pre.max(0.0);
    case Activation::ELU:
        return pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
    case Activation::Softplus: return pre.unaryExpr([](double x) { return softplus(x); });
    case Activation::Tanh: return pre.tanh();
    }
    return pre;
}

Eigen::ArrayXXd activate_d1(Activation a, const Eigen::ArrayXXd& pre) {
    switch (a) {
    case Activation::Identity: return Eigen::ArrayXXd::Ones(pre.rows(), pre.cols());
    case Activation::ReLU:
        return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; });
    case Activation::ELU:
        return pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); });
    case Activation::Softplus: return pre.unaryExpr([](double x) { return sigmoid(x); });
    case Activation::Tanh: return 1.0 - pre.tanh().square();
    }
    return Eigen::ArrayXXd::Ones(pre.rows(), pre.cols());
}

Eigen::ArrayXXd activate_d2(Activation a, const Eigen::ArrayXXd& pre) {
    switch (a) {
    case Activation::Identity:
    case Activation::ReLU: return Eigen::ArrayXXd::Zero(pre.rows(), pre.cols());
    case Activation::ELU:
        return pre.unaryExpr([](double x) { return x > 0.0 ? 0.0 : std::exp(x); });
    case Activation::Softplus:
        return pre.unaryExpr([](double x) {
            const double s = sigmoid(x);
            return s * (1.0 - s);
        });
    case Activation::Tanh: {
        const Eigen::ArrayXXd t = pre.tanh();
        return -2.0 * t * (1.0 - t.square());
    }
    }
    return Eigen::ArrayXXd::Zero(pre.rows(), pre.cols());
}

// ---------------------------------------------------------------------------

void MlpGradient::set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
}

bool MlpGradient::is_zero() const {
    for (const auto& w : weight)
        if ((w.array() != 0.0).any()) return false;
    for (const auto& b : bias)
        if ((b.array() != 0.0).any()) return false;
    return true;
}

bool MlpGradient::all_finite() const {
    for (const auto& w : weight)
        if (!w.allFinite()) return false;
    for (const auto& b : bias)
        if (!b.allFinite()) return false;
    return true;
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
    if (other.weight.size() != weight.size())
        throw ValidationError("gradient accumulation: layer count mismatch");
    for (std::size_t k = 0; k < weight.size(); ++k) {
        weight[k] += other.weight[k];
        bias[k] += other.bias[k];
    }
    return *this;
}

MlpGradient& MlpGradient::operator*=(double s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
    return *this;
}

std::vector<ConstParamBlock> MlpGradient::blocks(const std::string& prefix) const {
    std::vector<ConstParamBlock> out;
    for (std::size_t k = 0; k < weight.size(); ++k) {
        out.push_back({prefix + "." + std::to_string(k) + ".weight",
                       {weight[k].data(), static_cast<std::size_t>(weight[k].size())}});
        out.push_back({prefix + "." + std::to_string(k) + ".bias",
                       {bias[k].data(), static_cast<std::size_t>(bias[k].size())}});
    }
    return out;
}

// ---------------------------------------------------------------------------

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("Mlp requires at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& l = layers_[k];
        if (l.bias.size() != l.weight.rows()) {
            std::ostringstream os;
            os << "layer " << k << ": bias size " << l.bias.size() << " != weight rows "
               << l.weight.rows();
            throw ValidationError(os.str());
        }
        if (k > 0 && layers_[k - 1].out_dim() != l.in_dim()) {
            std::ostringstream os;
            os << "layer " << k << ": input size " << l.in_dim()
               << " does not chain with previous output " << layers_[k - 1].out_dim();
            throw ValidationError(os.str());
        }
    }
    if (!all_finite()) throw ValidationError("Mlp parameters must be finite");
}

Mlp Mlp::glorot(std::span<const int> sizes, std::span<const Activation> activations,
                std::mt19937_64& rng) {
    if (sizes.size() < 2 || activations.size() != sizes.size() - 1)
        throw ValidationError("glorot: need n+1 sizes for n activations");
    std::vector<DenseLayer> layers;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
        const int fan_in = sizes[k];
        const int fan_out = sizes[k + 1];
        if (fan_in <= 0 || fan_out <= 0) throw ValidationError("glorot: sizes must be positive");
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer layer;
        layer.weight.resize(fan_out, fan_in);
        // row-major fill order so the draw sequence matches the checkpoint layout
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(fan_out);
        layer.activation = activations[k];
        layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
}

Eigen::Index Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
Eigen::Index Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void Mlp::check_input(Eigen::Index rows) const {
    if (layers_.empty()) throw ValidationError("Mlp has no layers");
    if (rows != input_dim()) {
        std::ostringstream os;
        os << "input dimension " << rows << " != network input size " << input_dim();
        throw ValidationError(os.str());
    }
}

Eigen::MatrixXd Mlp::evaluate(const Eigen::MatrixXd& x) const {
    check_input(x.rows());
    Eigen::MatrixXd h = x;
    for (const auto& l : layers_) {
        Eigen::MatrixXd pre = (l.weight * h).colwise() + l.bias;
        h = activate(l.activation, pre.array()).matrix();
    }
    return h;
}

Eigen::VectorXd Mlp::evaluate(const Eigen::VectorXd& x) const {
    return evaluate(Eigen::MatrixXd(x)).col(0);
}

Tape Mlp::forward(const Eigen::MatrixXd& x, const Dropout& dropout) const {
    check_input(x.rows());
    Tape tape;
    tape.inputs.reserve(layers_.size());
    tape.pre.reserve(layers_.size());
    Eigen::MatrixXd h = x;
    for (const auto& l : layers_) {
        tape.inputs.push_back(h);
        Eigen::MatrixXd pre = (l.weight * h).colwise() + l.bias;
        h = activate(l.activation, pre.array()).matrix();
        tape.pre.push_back(std::move(pre));
        if (dropout.active()) {
            std::bernoulli_distribution keep(1.0 - dropout.rate);
            const double scale = 1.0 / (1.0 - dropout.rate);
            Eigen::ArrayXXd mask(h.rows(), h.cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    mask(r, c) = keep(*dropout.rng) ? scale : 0.0;
            h.array() *= mask;
            tape.masks.push_back(std::move(mask));
        }
    }
    tape.output = std::move(h);
    return tape;
}

BackwardResult Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream) const {
    if (tape.pre.size() != layers_.size() || tape.inputs.size() != layers_.size())
        throw ValidationError("backward: tape does not belong to this network");
    if (upstream.rows() != output_dim() || upstream.cols() != tape.output.cols())
        throw ValidationError("backward: upstream shape does not match network output");
    const bool has_masks = !tape.masks.empty();

    BackwardResult result;
    result.params = zero_gradient();
    Eigen::MatrixXd g = upstream;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& l = layers_[k];
        if (has_masks) g.array() *= tape.masks[k];
        Eigen::MatrixXd ga = (g.array() * activate_d1(l.activation, tape.pre[k].array())).matrix();
        result.params.weight[k].noalias() = ga * tape.inputs[k].transpose();
        result.params.bias[k] = ga.rowwise().sum();
        g.noalias() = l.weight.transpose() * ga;
    }
    result.input = std::move(g);
    return result;
}

Eigen::MatrixXd Mlp::input_jacobian(const Eigen::VectorXd& x) const {
    check_input(x.size());
    const Eigen::Index d = x.size();
    Eigen::MatrixXd xs = x.replicate(1, d);
    TangentTape t = tangent_forward(xs, Eigen::MatrixXd::Identity(d, d));
    return t.output_tangent;
}

TangentTape Mlp::tangent_forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& dir) const {
    check_input(x.rows());
    if (dir.rows() != x.rows() || dir.cols() != x.cols())
        throw ValidationError("tangent_forward: direction shape must match input");
    TangentTape t;
    Eigen::MatrixXd h = x;
    Eigen::MatrixXd hd = dir;
    for (const auto& l : layers_) {
        t.inputs.push_back(h);
        t.input_tangents.push_back(hd);
        Eigen::MatrixXd pre = (l.weight * h).colwise() + l.bias;
        Eigen::MatrixXd pre_d = l.weight * hd;
        h = activate(l.activation, pre.array()).matrix();
        hd = (activate_d1(l.activation, pre.array()) * pre_d.array()).matrix();
        t.pre.push_back(std::move(pre));
        t.pre_tangents.push_back(std::move(pre_d));
    }
    t.output = std::move(h);
    t.output_tangent = std::move(hd);
    return t;
}

void Mlp::tangent_backward(const TangentTape& tape, const Eigen::MatrixXd& ybar,
                           const Eigen::MatrixXd& ydotbar, MlpGradient& grad) const {
    if (tape.pre.size() != layers_.size())
        throw ValidationError("tangent_backward: tape does not belong to this network");
    if (ybar.rows() != output_dim() || ydotbar.rows() != output_dim() ||
        ybar.cols() != tape.output.cols() || ydotbar.cols() != tape.output.cols())
        throw ValidationError("tangent_backward: adjoint shape mismatch");
    if (grad.weight.size() != layers_.size())
        throw ValidationError("tangent_backward: gradient buffer shape mismatch");

    Eigen::MatrixXd gy = ybar;
    Eigen::MatrixXd gyd = ydotbar;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& l = layers_[k];
        const Eigen::ArrayXXd d1 = activate_d1(l.activation, tape.pre[k].array());
        const Eigen::ArrayXXd d2 = activate_d2(l.activation, tape.pre[k].array());
        // o = f(a), odot = f'(a) * adot
        Eigen::MatrixXd ga =
            (gy.array() * d1 + gyd.array() * d2 * tape.pre_tangents[k].array()).matrix();
        Eigen::MatrixXd gad = (gyd.array() * d1).matrix();
        grad.weight[k].noalias() += ga * tape.inputs[k].transpose();
        grad.weight[k].noalias() += gad * tape.input_tangents[k].transpose();
        grad.bias[k] += ga.rowwise().sum();
        gy.noalias() = l.weight.transpose() * ga;
        gyd.noalias() = l.weight.transpose() * gad;
    }
}

MlpGradient Mlp::zero_gradient() const {
    MlpGradient g;
    for (const auto& l : layers_) {
        g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
}

std::vector<ParamBlock> Mlp::parameter_blocks(const std::string& prefix) {
    std::vector<ParamBlock> out;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        auto& l = layers_[k];
        out.push_back({prefix + "." + std::to_string(k) + ".weight",
                       {l.weight.data(), static_cast<std::size_t>(l.weight.size())}});
        out.push_back({prefix + "." + std::to_string(k) + ".bias",
                       {l.bias.data(), static_cast<std::size_t>(l.bias.size())}});
    }
    return out;
}

std::vector<ConstParamBlock> Mlp::parameter_blocks(const std::string& prefix) const {
    std::vector<ConstParamBlock> out;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        const auto& l = layers_[k];
        out.push_back({prefix + "." + std::to_string(k) + ".weight",
                       {l.weight.data(), static_cast<std::size_t>(l.weight.size())}});
        out.push_back({prefix + "." + std::to_string(k) + ".bias",
                       {l.bias.data(), static_cast<std::size_t>(l.bias.size())}});
    }
    return out;
}

bool Mlp::all_finite() const {
    for (const auto& l : layers_)
        if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
}

} // namespace geoalign
