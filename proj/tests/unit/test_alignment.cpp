#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "geoalign/alignment.hpp"
#include "geoalign/digest.hpp"
#include "geoalign/errors.hpp"
#include "geoalign/pipeline.hpp"
#include "support.hpp"

using namespace geoalign;
using testsupport::random_matrix;
using testsupport::rel_err;

namespace {

HeatTimeSchedule single_time(double t) { return {{t}, 0.0, 0.0}; }

VaeModel small_model(std::uint64_t seed, int data_dim = 4) {
    Architecture arch;
    arch.encoder_hidden = {6};
    arch.decoder_hidden = {6};
    std::mt19937_64 rng(seed);
    VaeModel m = VaeModel::create(arch, data_dim, rng);
    std::normal_distribution<double> nd(0.0, 0.2);
    for (Mlp* net : {&m.dec_mu, &m.dec_logvar})
        for (std::size_t k = 0; k < net->depth(); ++k)
            for (Eigen::Index i = 0; i < net->layer(k).bias.size(); ++i) net->layer(k).bias(i) = nd(rng);
    return m;
}

// decoder mean = first two coordinates, constant variance: pullback metric is the identity
VaeModel identity_decoder_model(int data_dim = 4) {
    VaeModel m = small_model(1, data_dim);
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(data_dim, 2);
    e(0, 0) = e(1, 1) = 1.0;
    m.dec_mu = Mlp({DenseLayer{e, Eigen::VectorXd::Zero(data_dim), Activation::Identity}});
    m.dec_logvar = Mlp({DenseLayer{Eigen::MatrixXd::Zero(data_dim, 2), Eigen::VectorXd::Zero(data_dim),
                                   Activation::Identity}});
    return m;
}

AttributedGraph triangle(double w01, double w12, int data_dim = 4) {
    std::vector<Edge> edges{{0, 1, w01}, {1, 2, w12}};
    return AttributedGraph(3, edges, Eigen::MatrixXd::Zero(3, data_dim));
}

} // namespace

TEST_SUITE("alignment") {

TEST_CASE("heat kernel: closed values") {
    for (double t : {0.1, 1.0, 7.5})
        CHECK(std::abs(heat_kernel_value(0.0, 2, single_time(t)) - 1.0 / (4 * std::numbers::pi * t)) <= 1e-12);
    CHECK(heat_kernel_value(2.0, 2, single_time(1.0)) ==
          doctest::Approx(std::exp(-1.0) / (4 * std::numbers::pi)).epsilon(1e-14));
    CHECK(std::abs(heat_kernel_value(2.0, 2, single_time(1.0)) - 0.02928) < 1e-5);
    CHECK_THROWS_AS(heat_kernel_value(-0.1, 2, single_time(1.0)), ValidationError);
}

TEST_CASE("heat kernel: sum over times, decreasing to zero, slope by differences") {
    const HeatTimeSchedule s = heat_times(0.5, 20.0);
    double ref = 0.0;
    for (double t : s.times) ref += std::pow(4 * std::numbers::pi * t, -1.0) * std::exp(-0.49 / (4 * t));
    CHECK(heat_kernel_value(0.7, 2, s) == doctest::Approx(ref).epsilon(1e-13));
    double prev = heat_kernel_value(0.0, 2, s);
    for (double d = 0.05; d < 40; d *= 1.3) {
        const double h = heat_kernel_value(d, 2, s);
        CHECK(h < prev);
        CHECK(h > 0.0);
        prev = h;
        const double fd = (heat_kernel_value(d + 1e-6, 2, s) - heat_kernel_value(d - 1e-6, 2, s)) / 2e-6;
        CHECK(rel_err(heat_kernel_slope(d, 2, s), fd, 1e-12) < 1e-6);
    }
    CHECK(heat_kernel_value(1e3, 2, s) == 0.0);
}

TEST_CASE("alignment loss: closed cases") {
    const AttributedGraph g = triangle(1.0, 0.5);
    KernelEvaluation e;
    e.pairs = {{0, 1}};
    e.distances = {0.3};
    e.kernel = {0.25};
    e.alpha = 2.0;
    CHECK(alignment_loss(g, e) == 0.25);
    e.pairs = {{0, 1}, {1, 2}, {0, 2}};
    e.kernel = {0.5, 0.25, 0.0};
    e.distances = {0.1, 0.2, 0.3};
    CHECK(alignment_loss(g, e) == 0.0);
    e.pairs = {{1, 1}};
    e.kernel = {1.0};
    e.distances = {0.0};
    CHECK_THROWS_AS(alignment_loss(g, e), ValidationError);
}

TEST_CASE("alignment loss: zero at the optimum with an identity decoder") {
    const VaeModel m = identity_decoder_model();
    Eigen::MatrixXd z(4, 2);
    z << 0.0, 0.0, 0.3, 0.1, -0.2, 0.5, 0.6, -0.4;
    const HeatTimeSchedule s = heat_times(0.8, 5.0, 6);
    const double alpha = 3.7;
    std::vector<Edge> edges;
    std::vector<NodePair> pairs;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i + 1; j < 4; ++j) {
            edges.push_back({i, j, alpha * heat_kernel_value((z.row(i) - z.row(j)).norm(), 2, s)});
            pairs.push_back({i, j});
        }
    const AttributedGraph g(4, edges, Eigen::MatrixXd::Zero(4, 4));
    GeodesicSettings gs;
    gs.estimator = Estimator::Linear;
    gs.linear_steps = 8;
    const Phase2Loss l = phase2_loss(m, z, g, pairs, s, alpha, gs, nullptr);
    CHECK(l.loss <= 1e-10);
}

TEST_CASE("kernel evaluation: symmetric, positive, monotone") {
    const VaeModel m = small_model(2);
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd z = random_matrix(10, 2, rng, 0.5);
    const HeatTimeSchedule s = heat_times(0.5, 8.0);
    std::vector<NodePair> fwd, bwd;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = i + 1; j < 10; ++j) {
            fwd.push_back({i, j});
            bwd.push_back({j, i});
        }
    const DecoderMetric metric(m.dec_mu, m.dec_logvar);
    GeodesicSettings gs;
    gs.grid_resolution = 20;
    const MetricField f = MetricField::build(metric, GridBounds::around(z), 20, gs.connectivity);
    for (auto est : {Estimator::Grid, Estimator::Linear}) {
        gs.estimator = est;
        const auto a = evaluate_kernel(metric, z, fwd, s, 1.5, gs, &f);
        const auto b = evaluate_kernel(metric, z, bwd, s, 1.5, gs, &f);
        std::vector<std::pair<double, double>> dh;
        for (std::size_t k = 0; k < fwd.size(); ++k) {
            CHECK(a.kernel[k] == b.kernel[k]);
            CHECK(a.kernel[k] > 0.0);
            CHECK(a.kernel[k] <= heat_kernel_value(0.0, 2, s));
            dh.emplace_back(a.distances[k], a.kernel[k]);
        }
        std::sort(dh.begin(), dh.end());
        for (std::size_t k = 1; k < dh.size(); ++k)
            if (dh[k].first > dh[k - 1].first) CHECK(dh[k].second < dh[k - 1].second);
    }
}

TEST_CASE("phase2 loss: gradient matches central differences on a 3-node toy") {
    const AttributedGraph g = triangle(0.8, 0.3);
    const std::vector<NodePair> pairs{{0, 1}, {1, 2}, {0, 2}};
    const HeatTimeSchedule s = heat_times(0.5, 6.0, 5);
    double worst_linear = 0.0, worst_grid = 0.0, worst_alpha = 0.0, worst_scale = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        VaeModel m = small_model(50 + seed);
        std::mt19937_64 rng(seed);
        const Eigen::MatrixXd z = random_matrix(3, 2, rng, 0.6);
        for (auto est : {Estimator::Linear, Estimator::Grid}) {
            GeodesicSettings gs;
            gs.estimator = est;
            gs.linear_steps = 10;
            gs.grid_resolution = 12;
            const GridBounds b = GridBounds::around(z);
            const double alpha = 1.3, scale = 0.9;
            auto eval = [&](double a, double sc) {
                const DecoderMetric metric(m.dec_mu, m.dec_logvar);
                std::optional<MetricField> f;
                if (est == Estimator::Grid) f = MetricField::build(metric, b, gs.grid_resolution, gs.connectivity);
                return phase2_loss(m, z, g, pairs, s, a, gs, f ? &*f : nullptr, sc);
            };
            const Phase2Loss l = eval(alpha, scale);
            CHECK(l.grad.enc_trunk.is_zero());
            CHECK(l.grad.enc_mu.is_zero());
            CHECK(l.grad.enc_logvar.is_zero());
            auto f = [&] { return eval(alpha, scale).loss; };
            double worst = 0.0;
            auto params = m.decoder_blocks();
            const auto grads = l.grad.decoder_blocks();
            for (std::size_t k = 0; k < params.size(); ++k)
                worst = std::max(worst, rel_err(grads[k].values, testsupport::central_diff(params[k].values, f, 1e-6)));
            (est == Estimator::Linear ? worst_linear : worst_grid) =
                std::max(est == Estimator::Linear ? worst_linear : worst_grid, worst);
            const double h = 1e-6;
            const double ga = (eval(alpha * std::exp(h), scale).loss - eval(alpha * std::exp(-h), scale).loss) / (2 * h);
            const double gsc = (eval(alpha, scale * std::exp(h)).loss - eval(alpha, scale * std::exp(-h)).loss) / (2 * h);
            worst_alpha = std::max(worst_alpha, rel_err(l.grad_log_alpha, ga));
            worst_scale = std::max(worst_scale, rel_err(l.grad_log_distance_scale, gsc));
        }
    }
    CHECK(worst_linear <= 1e-4);
    CHECK(worst_grid <= 1e-3);
    CHECK(worst_alpha <= 1e-6);
    CHECK(worst_scale <= 1e-6);
}

TEST_CASE("sample_pairs: half edges, the rest non-edges, all valid") {
    std::mt19937_64 rng(4);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i + 1 < 30; ++i) edges.push_back({i, i + 1, 1.0});
    const AttributedGraph g(30, edges, Eigen::MatrixXd::Zero(30, 1));
    const auto pairs = sample_pairs(g, 101, rng);
    REQUIRE(pairs.size() == 101);
    int on_edges = 0;
    for (const auto& p : pairs) {
        CHECK(p.i < p.j);
        CHECK(p.j < 30);
        on_edges += g.weight(p.i, p.j) > 0.0;
    }
    CHECK(on_edges == 51);

    std::vector<Edge> full;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = i + 1; j < 5; ++j) full.push_back({i, j, 0.5});
    const AttributedGraph k5(5, full, Eigen::MatrixXd::Zero(5, 1));
    for (const auto& p : sample_pairs(k5, 20, rng)) CHECK(k5.weight(p.i, p.j) == 0.5);
    CHECK_THROWS_AS(sample_pairs(k5, 0, rng), ValidationError);
}

TEST_CASE("calibrate_kernel: recovers a planted amplitude and distance scale") {
    const HeatTimeSchedule s = heat_times(1.0, 10.0);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    const double alpha = 4.0, scale = std::exp(0.85); // on the scan grid
    std::vector<Edge> edges;
    std::vector<NodePair> pairs;
    std::vector<double> dist;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = i + 1; j < 20; ++j) {
            const double d = u(rng);
            pairs.push_back({i, j});
            dist.push_back(d);
            edges.push_back({i, j, alpha * heat_kernel_value(scale * d, 2, s)});
        }
    const AttributedGraph g(20, edges, Eigen::MatrixXd::Zero(20, 1));
    const KernelCalibration c = calibrate_kernel(g, pairs, dist, 2, s);
    CHECK(c.distance_scale == doctest::Approx(scale).epsilon(1e-9));
    CHECK(c.alpha == doctest::Approx(alpha).epsilon(1e-9));
    CHECK(c.loss <= 1e-12);
}

TEST_CASE("train_phase2: zero epochs keeps snapshots and encoder") {
    SynthConfig sc;
    sc.manifold.n = 60;
    sc.manifold.ambient_dim = 6;
    sc.group_size = 8;
    const SynthDataset ds = generate_dataset(sc);
    const auto& g = ds.sampled.graph;
    const VaeModel m = small_model(6, 6);
    const LatentState lat = encode_nodes(m, g.attributes());
    AlignmentConfig cfg;
    cfg.epochs = 0;
    cfg.geodesic.grid_resolution = 16;
    cfg.schedule = graph_heat_schedule(g, {});
    const Phase2Result r = train_phase2(m, lat, g, cfg);
    CHECK((r.distances_before.array() == r.distances_after.array()).all());
    CHECK(r.encoder_digest_before == r.encoder_digest_after);
    CHECK(r.trace.empty());
}

TEST_CASE("train_phase2: loss decreases, encoder frozen on every step") {
    SynthConfig sc;
    sc.manifold.n = 120;
    sc.manifold.ambient_dim = 8;
    sc.group_size = 12;
    sc.manifold.seed = 3;
    const SynthDataset ds = generate_dataset(sc);
    const auto& g = ds.sampled.graph;
    RunConfig rc;
    rc.synth = sc;
    rc.phase1.epochs = 300;
    rc.phase1.anneal.total_steps = 300;
    const Eigen::MatrixXd x = prepare_attributes(g.attributes(), rc.preprocess);
    const Phase1Result p1 = run_phase1(x, rc);
    AlignmentConfig cfg;
    cfg.epochs = 60;
    cfg.learning_rate = 5e-3;
    cfg.geodesic.grid_resolution = 20;
    cfg.schedule = graph_heat_schedule(g, {});
    const std::string enc = parameter_digest(p1.model.encoder_blocks());
    const Phase2Result r = train_phase2(p1.model, p1.latent, g, cfg);
    REQUIRE(r.trace.size() == 60);
    double first = 0.0, last = 0.0;
    for (int k = 0; k < 6; ++k) {
        first += r.trace[k].loss;
        last += r.trace[54 + k].loss;
    }
    CHECK(last < first);
    for (const auto& t : r.trace) CHECK(t.encoder_grad_zero);
    CHECK(r.encoder_digest_before == enc);
    CHECK(r.encoder_digest_after == enc);
    CHECK(parameter_digest(r.model.encoder_blocks()) == enc);
    CHECK((r.distances_before - r.distances_before.transpose()).norm() == 0.0);
}

TEST_CASE("train_phase2: configuration is validated") {
    const AttributedGraph g = triangle(1.0, 1.0);
    const VaeModel m = small_model(7);
    LatentState lat;
    lat.z_fixed = Eigen::MatrixXd::Zero(3, 2);
    AlignmentConfig cfg;
    CHECK_THROWS_AS(train_phase2(m, lat, g, cfg), ValidationError); // no schedule
    cfg.schedule = heat_times(1.0, 3.0);
    cfg.pairs_per_step = 0;
    CHECK_THROWS_AS(train_phase2(m, lat, g, cfg), ValidationError);
    cfg.pairs_per_step = 4;
    lat.z_fixed = Eigen::MatrixXd::Zero(2, 2);
    CHECK_THROWS_AS(train_phase2(m, lat, g, cfg), ValidationError);
}

}
