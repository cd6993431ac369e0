#pragma once

#include <optional>

#include <Eigen/Dense>

#include "geoalign/config.hpp"

namespace geoalign {

struct ColumnScaling {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale; // population std; 1 for constant columns
    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

ColumnScaling fit_standardization(const Eigen::MatrixXd& x);

// The attributes the VAE sees under the given settings.
Eigen::MatrixXd prepare_attributes(const Eigen::MatrixXd& raw, const PreprocessSettings& settings);

// Copy of the graph with every edge weight replaced by 1 in binary mode.
AttributedGraph with_adjacency(const AttributedGraph& graph, AdjacencyMode mode);

HeatTimeSchedule graph_heat_schedule(const AttributedGraph& graph, const GraphSettings& settings);

struct PipelineResult {
    Eigen::MatrixXd attributes; // preprocessed
    Phase1Result phase1;
    HeatTimeSchedule schedule;
    std::optional<Phase2Result> phase2;
    std::optional<DistortionReport> report;
    Eigen::VectorXd recon_scores;
    Classification recon_classification;
};

Phase1Result run_phase1(const Eigen::MatrixXd& attributes, const RunConfig& config);

// Phase 1, Phase 2 and scoring on one graph.
PipelineResult run_pipeline(const AttributedGraph& graph, const RunConfig& config,
                            bool with_phase2 = true);

} // namespace geoalign
