#include "geoalign/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "geoalign/errors.hpp"

namespace geoalign {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "geoalign-checkpoint";
constexpr int kVersion = 1;

json layer_to_json(const DenseLayer& l) {
    json j;
    j["in"] = l.in_dim();
    j["out"] = l.out_dim();
    j["activation"] = std::string(to_string(l.activation));
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    j["weight"] = std::move(w);
    j["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
    return j;
}

DenseLayer layer_from_json(const json& j) {
    DenseLayer l;
    const auto in = j.at("in").get<Eigen::Index>();
    const auto out = j.at("out").get<Eigen::Index>();
    if (in <= 0 || out <= 0) throw ValidationError("checkpoint: layer sizes must be positive");
    l.activation = activation_from_string(j.at("activation").get<std::string>());
    const auto w = j.at("weight").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != in * out ||
        static_cast<Eigen::Index>(b.size()) != out)
        throw ValidationError("checkpoint: array length does not match declared layer shape");
    l.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
        for (Eigen::Index c = 0; c < in; ++c)
            l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
    l.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
    return l;
}

} // namespace

const Mlp& Checkpoint::network(std::string_view name) const {
    for (const auto& [n, net] : networks)
        if (n == name) return net;
    throw ValidationError("checkpoint has no network named '" + std::string(name) + "'");
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    json j;
    j["format"] = kFormat;
    j["version"] = kVersion;
    j["seed"] = ckpt.seed;
    j["step"] = ckpt.step;
    json nets = json::array();
    for (const auto& [name, net] : ckpt.networks) {
        json n;
        n["name"] = name;
        json layers = json::array();
        for (const auto& l : net.layers()) layers.push_back(layer_to_json(l));
        n["layers"] = std::move(layers);
        nets.push_back(std::move(n));
    }
    j["networks"] = std::move(nets);
    j["scalars"] = ckpt.scalars;
    return j.dump(1);
}

Checkpoint parse_checkpoint(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint: malformed document: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat)
            throw ValidationError("checkpoint: unrecognised format tag");
        if (j.at("version").get<int>() != kVersion)
            throw ValidationError("checkpoint: unsupported version");
        Checkpoint c;
        c.seed = j.at("seed").get<std::uint64_t>();
        c.step = j.at("step").get<std::int64_t>();
        for (const auto& n : j.at("networks")) {
            std::vector<DenseLayer> layers;
            for (const auto& l : n.at("layers")) layers.push_back(layer_from_json(l));
            c.networks.emplace_back(n.at("name").get<std::string>(), Mlp(std::move(layers)));
        }
        c.scalars = j.at("scalars").get<std::map<std::string, double>>();
        return c;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << serialize_checkpoint(ckpt);
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_checkpoint(ss.str());
}

} // namespace geoalign
