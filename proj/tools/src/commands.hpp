#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "geoalign/config.hpp"

namespace geoalign::cli {

// Where outputs go when --out is not given.
std::filesystem::path output_root();

// Config file + preset + common flag overrides.
struct ConfigOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::uint64_t> seed;

    RunConfig resolve() const;
};

struct SynthOptions {
    ConfigOptions config;
    std::optional<int> n;
    std::optional<int> ambient_dim;
    std::optional<int> group_size;
    std::string out;
};

struct TrainOptions {
    ConfigOptions config;
    std::string bundle;
    std::string out;
    std::string phase = "both"; // 1 | 2 | both
    std::string resume;         // directory holding a phase-1 run, for --phase 2
    std::optional<std::string> estimator;
    std::optional<int> latent_dim;
    std::optional<int> phase1_epochs;
    std::optional<int> phase2_epochs;
    std::optional<int> grid_resolution;
};

struct ScoreOptions {
    std::string before;
    std::string after;
    std::string labels;
    std::string edges;        // required for --pairs edges
    std::string pairs = "all";
    std::string recon;        // optional per-node baseline scores to compare against
    std::string out;
};

struct CurvatureOptions {
    std::string train_dir;
    int phase = 1;
    std::optional<int> resolution;
    std::string out;
};

struct ReportOptions {
    ConfigOptions config;
    std::vector<std::uint64_t> seeds{0};
    std::string out;
};

int run_synth(const SynthOptions& o);
int run_train(const TrainOptions& o);
int run_score(const ScoreOptions& o);
int run_curvature(const CurvatureOptions& o);
int run_report(const ReportOptions& o);

} // namespace geoalign::cli
