#include "geoalign/pipeline.hpp"

#include <cmath>

#include "geoalign/errors.hpp"

namespace geoalign {

Eigen::MatrixXd ColumnScaling::apply(const Eigen::MatrixXd& x) const {
    if (x.cols() != mean.size()) throw ValidationError("standardization: column count mismatch");
    return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
}

ColumnScaling fit_standardization(const Eigen::MatrixXd& x) {
    if (x.rows() == 0) throw ValidationError("standardization: no rows");
    ColumnScaling s;
    s.mean = x.colwise().mean();
    s.scale = ((x.rowwise() - s.mean).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index c = 0; c < s.scale.size(); ++c)
        if (!(s.scale[c] > 0.0)) s.scale[c] = 1.0;
    return s;
}

Eigen::MatrixXd prepare_attributes(const Eigen::MatrixXd& raw, const PreprocessSettings& settings) {
    if (!raw.allFinite()) throw ValidationError("attributes contain non-finite values");
    if (!settings.standardize) return raw;
    return fit_standardization(raw).apply(raw);
}

AttributedGraph with_adjacency(const AttributedGraph& graph, AdjacencyMode mode) {
    if (mode == AdjacencyMode::Weighted) return graph;
    std::vector<Edge> edges = graph.edges();
    for (auto& e : edges) e.weight = 1.0;
    return AttributedGraph(graph.node_count(), std::move(edges), graph.attributes(), graph.labels());
}

HeatTimeSchedule graph_heat_schedule(const AttributedGraph& graph, const GraphSettings& settings) {
    const SpectralBounds b = spectral_bounds(laplacian(graph, settings.laplacian));
    return heat_times(b.lambda2, b.lambda_max, settings.heat_time_count);
}

Phase1Result run_phase1(const Eigen::MatrixXd& attributes, const RunConfig& config) {
    std::mt19937_64 rng(config.seed);
    VaeModel model =
        VaeModel::create(config.architecture, static_cast<int>(attributes.cols()), rng);
    return train_phase1(std::move(model), attributes, config.phase1);
}

PipelineResult run_pipeline(const AttributedGraph& input, const RunConfig& config,
                            bool with_phase2) {
    config.validate();
    const AttributedGraph graph = with_adjacency(input, config.graph.adjacency);
    PipelineResult r;
    r.attributes = prepare_attributes(graph.attributes(), config.preprocess);
    r.phase1 = run_phase1(r.attributes, config);
    r.recon_scores = recon_error_scores(r.phase1.model, r.attributes);
    r.recon_classification = classify(r.recon_scores, graph.labels());
    r.schedule = graph_heat_schedule(graph, config.graph);
    if (!with_phase2) return r;

    AlignmentConfig ac = config.phase2;
    ac.schedule = r.schedule;
    r.phase2 = train_phase2(r.phase1.model, r.phase1.latent, graph, ac);
    r.report = distortion_report(r.phase2->distances_before, r.phase2->distances_after,
                                 graph.labels(), config.scoring_scope, &graph);
    return r;
}

} // namespace geoalign
