#include "geoalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "geoalign/errors.hpp"

namespace geoalign {

namespace {

// independent streams per generation stage
constexpr std::uint64_t kStreamManifold = 0x6d616e69666f6c64ULL;
constexpr std::uint64_t kStreamPerturb = 0x7065727475726221ULL;
constexpr std::uint64_t kStreamGraph = 0x6772617068212121ULL;

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
    return std::mt19937_64(seq);
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

} // namespace

std::string_view to_string(Nonlinearity f) {
    switch (f) {
    case Nonlinearity::Sin: return "sin";
    case Nonlinearity::Cos: return "cos";
    case Nonlinearity::Tanh: return "tanh";
    case Nonlinearity::GaussBump: return "gauss_bump";
    case Nonlinearity::Rational: return "rational";
    }
    return "?";
}

Nonlinearity nonlinearity_from_string(std::string_view s) {
    for (auto f : {Nonlinearity::Sin, Nonlinearity::Cos, Nonlinearity::Tanh,
                   Nonlinearity::GaussBump, Nonlinearity::Rational})
        if (to_string(f) == s) return f;
    throw ValidationError("unknown nonlinearity '" + std::string(s) + "'");
}

double apply(Nonlinearity f, double x) {
    switch (f) {
    case Nonlinearity::Sin: return std::sin(x);
    case Nonlinearity::Cos: return std::cos(x);
    case Nonlinearity::Tanh: return std::tanh(x);
    case Nonlinearity::GaussBump: return std::exp(-0.1 * x * x);
    case Nonlinearity::Rational: return x / (1.0 + x * x);
    }
    return 0.0;
}

void ManifoldSpec::validate() const {
    if (n < 2) throw ValidationError("manifold.n must be >= 2");
    if (ambient_dim < 3) throw ValidationError("manifold.ambient_dim must be >= 3");
    if (!(r0 > 0.0)) throw ValidationError("manifold.r0 must be > 0");
    if (!(spread > 0.0)) throw ValidationError("manifold.spread must be > 0");
    if (!(twist > 0.0)) throw ValidationError("manifold.twist must be > 0");
    if (!recipe.empty() && recipe.size() != static_cast<std::size_t>(ambient_dim - 3))
        throw ValidationError("manifold.recipe must cover ambient_dim - 3 dimensions");
}

Eigen::Vector3d base_immersion(const ManifoldSpec& spec, double u, double v) {
    const double r = spec.r0 + softplus(spec.spread * u);
    const double th = spec.twist * v;
    return {r * std::cos(th), r * std::sin(th), v};
}

Eigen::VectorXd embed(const ManifoldSpec& spec, const std::vector<ExtraDimension>& recipe,
                      double u, double v) {
    Eigen::VectorXd x(3 + static_cast<Eigen::Index>(recipe.size()));
    x.head<3>() = base_immersion(spec, u, v);
    for (std::size_t k = 0; k < recipe.size(); ++k)
        x(3 + static_cast<Eigen::Index>(k)) = apply(recipe[k].f, recipe[k].a * u + recipe[k].b * v);
    return x;
}

ManifoldSample sample_manifold(const ManifoldSpec& spec) {
    spec.validate();
    auto rng = stream(spec.seed, kStreamManifold);
    ManifoldSample out;
    out.recipe = spec.recipe;
    if (out.recipe.empty()) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::uniform_int_distribution<int> tag(0, 4);
        for (int k = 3; k < spec.ambient_dim; ++k) {
            ExtraDimension e;
            e.a = gauss(rng);
            e.b = gauss(rng);
            e.f = static_cast<Nonlinearity>(tag(rng));
            out.recipe.push_back(e);
        }
    }
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    out.intrinsic.resize(spec.n, 2);
    out.attributes.resize(spec.n, spec.ambient_dim);
    for (int i = 0; i < spec.n; ++i) {
        const double u = angle(rng);
        const double v = angle(rng);
        out.intrinsic(i, 0) = u;
        out.intrinsic(i, 1) = v;
        out.attributes.row(i) = embed(spec, out.recipe, u, v).transpose();
    }
    return out;
}

Eigen::MatrixXd similarity_matrix(const Eigen::MatrixXd& z, double threshold) {
    const Eigen::Index n = z.rows();
    if (n < 2) throw ValidationError("similarity_matrix: need at least two points");
    Eigen::MatrixXd d2(n, n);
    std::vector<double> upper;
    upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index a = 0; a < n; ++a) {
        d2(a, a) = 0.0;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            d2(a, b) = d2(b, a) = (z.row(a) - z.row(b)).squaredNorm();
            upper.push_back(d2(a, b));
        }
    }
    const std::size_t mid = upper.size() / 2;
    std::nth_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid), upper.end());
    double med = upper[mid];
    if (upper.size() % 2 == 0)
        med = 0.5 * (med + *std::max_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid)));
    if (!(med > 0.0)) throw ValidationError("similarity_matrix: median squared distance is zero");

    Eigen::MatrixXd s(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        s(a, a) = 0.0;
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double v = std::exp(-2.0 * d2(a, b) / med);
            s(a, b) = s(b, a) = v < threshold ? 0.0 : v;
        }
    }
    return s;
}

std::vector<std::size_t> nearest_group(const Eigen::MatrixXd& z, std::size_t center,
                                       std::size_t size) {
    const auto n = static_cast<std::size_t>(z.rows());
    if (center >= n) throw ValidationError("nearest_group: center out of range");
    if (size < 1 || size > n) throw ValidationError("group_size must be in [1, N]");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const Eigen::RowVectorXd c = z.row(static_cast<Eigen::Index>(center));
    auto dist = [&](std::size_t k) { return (z.row(static_cast<Eigen::Index>(k)) - c).squaredNorm(); };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (a == center || b == center) return a == center && b != center;
        return dist(a) < dist(b);
    });
    idx.resize(size);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Eigen::MatrixXd permute_group_scores(const Eigen::MatrixXd& s,
                                     const std::vector<std::size_t>& group,
                                     const std::vector<std::size_t>& permutation) {
    std::vector<std::pair<Eigen::Index, Eigen::Index>> slots;
    for (std::size_t a = 0; a < group.size(); ++a)
        for (std::size_t b = a + 1; b < group.size(); ++b)
            slots.emplace_back(static_cast<Eigen::Index>(group[a]), static_cast<Eigen::Index>(group[b]));
    if (permutation.size() != slots.size())
        throw ValidationError("permute_group_scores: permutation size mismatch");
    Eigen::MatrixXd out = s;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        if (permutation[k] >= slots.size()) throw ValidationError("permutation index out of range");
        const auto [i, j] = slots[permutation[k]];
        const double v = s(slots[k].first, slots[k].second);
        out(i, j) = out(j, i) = v;
    }
    return out;
}

Perturbation perturb(const Eigen::MatrixXd& s, const Eigen::MatrixXd& intrinsic,
                     std::size_t group_size, std::uint64_t seed) {
    if (s.rows() != s.cols() || s.rows() != intrinsic.rows())
        throw ValidationError("perturb: similarity and coordinates disagree in size");
    const auto n = static_cast<std::size_t>(s.rows());
    if (group_size < 1 || group_size > n) throw ValidationError("group_size must be in [1, N]");
    auto rng = stream(seed, kStreamPerturb);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Perturbation out;
    out.group = nearest_group(intrinsic, pick(rng), group_size);
    std::vector<std::size_t> perm(group_size * (group_size - 1) / 2);
    std::iota(perm.begin(), perm.end(), 0);
    // Fisher-Yates with our own index draws so the order does not depend on std::shuffle
    for (std::size_t k = perm.size(); k > 1; --k) {
        std::uniform_int_distribution<std::size_t> d(0, k - 1);
        std::swap(perm[k - 1], perm[d(rng)]);
    }
    out.similarity = permute_group_scores(s, out.group, perm);
    return out;
}

SampledGraph sample_graph(const Eigen::MatrixXd& s, const Eigen::MatrixXd& attributes,
                          const std::vector<int>& labels, std::uint64_t seed) {
    const Eigen::Index n = s.rows();
    if (s.cols() != n) throw ValidationError("sample_graph: similarity must be square");
    if (attributes.rows() != n) throw ValidationError("sample_graph: one attribute row per node");
    if (!labels.empty() && labels.size() != static_cast<std::size_t>(n))
        throw ValidationError("sample_graph: one label per node");
    auto rng = stream(seed, kStreamGraph);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<Edge> drawn;
    std::vector<char> touched(static_cast<std::size_t>(n), 0);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = a + 1; b < n; ++b) {
            const double p = s(a, b);
            if (p < 0.0 || p > 1.0 || !std::isfinite(p))
                throw ValidationError("sample_graph: similarity values must lie in [0, 1]");
            if (coin(rng) < p) {
                drawn.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b), p});
                touched[static_cast<std::size_t>(a)] = touched[static_cast<std::size_t>(b)] = 1;
            }
        }
    if (drawn.empty()) throw ValidationError("sample_graph: no edge was drawn (empty graph)");

    SampledGraph out;
    std::vector<std::size_t> remap(static_cast<std::size_t>(n), 0);
    for (std::size_t k = 0; k < touched.size(); ++k)
        if (touched[k]) {
            remap[k] = out.kept.size();
            out.kept.push_back(k);
        }
    for (auto& e : drawn) {
        e.i = remap[e.i];
        e.j = remap[e.j];
    }
    Eigen::MatrixXd x(static_cast<Eigen::Index>(out.kept.size()), attributes.cols());
    std::vector<int> lab;
    for (std::size_t k = 0; k < out.kept.size(); ++k) {
        x.row(static_cast<Eigen::Index>(k)) = attributes.row(static_cast<Eigen::Index>(out.kept[k]));
        if (!labels.empty()) lab.push_back(labels[out.kept[k]]);
    }
    std::optional<std::vector<int>> opt_lab;
    if (!labels.empty()) opt_lab = std::move(lab);
    out.graph = AttributedGraph(out.kept.size(), std::move(drawn), std::move(x), std::move(opt_lab));
    return out;
}

SynthDataset generate_dataset(const SynthConfig& config) {
    config.manifold.validate();
    if (config.group_size < 1 || config.group_size > static_cast<std::size_t>(config.manifold.n))
        throw ValidationError("synth.group_size must be in [1, n]");
    SynthDataset ds;
    ds.manifold = sample_manifold(config.manifold);
    ds.similarity_clean = similarity_matrix(ds.manifold.intrinsic, config.threshold);
    auto p = perturb(ds.similarity_clean, ds.manifold.intrinsic, config.group_size,
                     config.manifold.seed);
    ds.similarity = std::move(p.similarity);
    ds.group = std::move(p.group);
    std::vector<int> labels(static_cast<std::size_t>(config.manifold.n), 0);
    for (auto g : ds.group) labels[g] = 1;
    ds.sampled = sample_graph(ds.similarity, ds.manifold.attributes, labels, config.manifold.seed);
    ds.intrinsic_kept.resize(static_cast<Eigen::Index>(ds.sampled.kept.size()), 2);
    for (std::size_t k = 0; k < ds.sampled.kept.size(); ++k)
        ds.intrinsic_kept.row(static_cast<Eigen::Index>(k)) =
            ds.manifold.intrinsic.row(static_cast<Eigen::Index>(ds.sampled.kept[k]));
    return ds;
}

} // namespace geoalign
