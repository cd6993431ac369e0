#include <random>

#include <benchmark/benchmark.h>

#include "geoalign/alignment.hpp"
#include "geoalign/riemann.hpp"
#include "geoalign/spectral.hpp"
#include "geoalign/vae.hpp"

using namespace geoalign;

namespace {

Eigen::MatrixXd normal(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(rng);
    return m;
}

// default synthetic architecture on D = 20 attributes
VaeModel default_model() {
    std::mt19937_64 rng(0);
    return VaeModel::create(Architecture::preset("synthetic-table2"), 20, rng);
}

GridBounds unit_box() { return {Eigen::Vector2d(-2, -2), Eigen::Vector2d(2, 2)}; }

void BM_MetricFieldBuild(benchmark::State& state) {
    const VaeModel m = default_model();
    const DecoderMetric metric(m.dec_mu, m.dec_logvar);
    const int res = static_cast<int>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(MetricField::build(metric, unit_box(), res, Connectivity::AxisDiagonal));
    state.SetItemsProcessed(state.iterations() * (res + 1) * (res + 1));
}
BENCHMARK(BM_MetricFieldBuild)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GridDijkstra(benchmark::State& state) {
    const VaeModel m = default_model();
    const DecoderMetric metric(m.dec_mu, m.dec_logvar);
    const MetricField f =
        MetricField::build(metric, unit_box(), static_cast<int>(state.range(0)), Connectivity::AxisDiagonal);
    std::size_t src = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(grid_distances_from(f, src));
        src = (src + 97) % f.node_count();
    }
}
BENCHMARK(BM_GridDijkstra)->Arg(32)->Arg(64)->Unit(benchmark::kMicrosecond);

void BM_LinearEstimator(benchmark::State& state) {
    const VaeModel m = default_model();
    const DecoderMetric metric(m.dec_mu, m.dec_logvar);
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd pts = normal(2, 64, rng);
    const int steps = static_cast<int>(state.range(0));
    int k = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(geodesic_linear(metric, pts.col(k % 64), pts.col((k + 1) % 64), steps));
        ++k;
    }
}
BENCHMARK(BM_LinearEstimator)->Arg(16)->Arg(32)->Unit(benchmark::kMicrosecond);

void BM_Phase1Step(benchmark::State& state) {
    const VaeModel m = default_model();
    std::mt19937_64 rng(2);
    const Eigen::Index batch = state.range(0);
    const Eigen::MatrixXd x = normal(20, batch, rng);
    const Eigen::MatrixXd noise = normal(m.latent_dim(), batch, rng);
    const Phase1Weights w{.kl_weight = 1.0, .lambda1 = 1.0, .lambda2 = 1.0};
    for (auto _ : state) benchmark::DoNotOptimize(phase1_loss(m, x, w, noise));
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Phase1Step)->Arg(64)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_Phase2Loss(benchmark::State& state) {
    const VaeModel m = default_model();
    std::mt19937_64 rng(3);
    const int n = 200;
    const Eigen::MatrixXd z = normal(n, 2, rng);
    std::vector<Edge> edges;
    for (int i = 0; i + 1 < n; ++i) edges.push_back({std::size_t(i), std::size_t(i + 1), 1.0});
    const AttributedGraph g(n, edges, Eigen::MatrixXd::Zero(n, 20));
    const std::vector<NodePair> pairs = sample_pairs(g, 256, rng);
    const HeatTimeSchedule sched = heat_times(0.01, 4.0);
    GeodesicSettings gs;
    gs.estimator = state.range(0) ? Estimator::Grid : Estimator::Linear;
    const DecoderMetric metric(m.dec_mu, m.dec_logvar);
    std::optional<MetricField> field;
    if (gs.estimator == Estimator::Grid)
        field = MetricField::build(metric, GridBounds::around(z), gs.grid_resolution, gs.connectivity);
    for (auto _ : state)
        benchmark::DoNotOptimize(phase2_loss(m, z, g, pairs, sched, 1.0, gs, field ? &*field : nullptr));
}
BENCHMARK(BM_Phase2Loss)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
