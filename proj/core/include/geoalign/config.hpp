#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "geoalign/alignment.hpp"
#include "geoalign/scoring.hpp"
#include "geoalign/spectral.hpp"
#include "geoalign/synth.hpp"
#include "geoalign/vae.hpp"

namespace geoalign {

enum class AdjacencyMode { Weighted, Binary };

std::string_view to_string(AdjacencyMode m);
AdjacencyMode adjacency_mode_from_string(std::string_view s);

struct GraphSettings {
    LaplacianKind laplacian = LaplacianKind::Unnormalized;
    AdjacencyMode adjacency = AdjacencyMode::Weighted;
    int heat_time_count = 15;
};

struct PreprocessSettings {
    bool standardize = true; // per-column z-scores of the attributes
};

// Everything a run needs. Stage seeds are all taken from `seed`.
struct RunConfig {
    std::string preset = "synthetic-table2";
    std::uint64_t seed = 0;
    SynthConfig synth;
    Architecture architecture;
    PreprocessSettings preprocess;
    Phase1Config phase1;
    GraphSettings graph;
    AlignmentConfig phase2; // schedule is filled from the graph at run time
    PairScope scoring_scope = PairScope::AllPairs;

    static RunConfig preset_config(std::string_view name);
    // Propagates `seed` into the per-stage configs.
    void sync_seeds();
    // Throws ValidationError naming the offending field.
    void validate() const;
};

// Overlays a JSON document on `base`. A top-level "preset" key (if present) first resets
// the base to that preset; unknown keys are rejected.
RunConfig parse_run_config(std::string_view json_text, RunConfig base = {});
RunConfig load_run_config(const std::string& path, RunConfig base = {});
std::string dump_run_config(const RunConfig& config);

} // namespace geoalign
