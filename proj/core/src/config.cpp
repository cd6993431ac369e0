#include "geoalign/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "geoalign/errors.hpp"

namespace geoalign {

using nlohmann::json;

std::string_view to_string(AdjacencyMode m) {
    return m == AdjacencyMode::Weighted ? "weighted" : "binary";
}

AdjacencyMode adjacency_mode_from_string(std::string_view s) {
    if (s == "weighted") return AdjacencyMode::Weighted;
    if (s == "binary") return AdjacencyMode::Binary;
    throw ValidationError("unknown adjacency mode '" + std::string(s) + "'");
}

RunConfig RunConfig::preset_config(std::string_view name) {
    RunConfig c;
    c.preset = std::string(name);
    c.architecture = Architecture::preset(name);
    if (name == "synthetic-table2") {
        c.phase1.epochs = 1500;
        c.phase1.anneal = AnnealSchedule::sigmoid_preset();
    } else if (name == "empirical-table3") {
        c.phase1.epochs = 1200;
        c.phase1.anneal = AnnealSchedule::linear_preset();
    }
    c.phase1.learning_rate = 5e-3;
    c.sync_seeds();
    return c;
}

void RunConfig::sync_seeds() {
    synth.manifold.seed = seed;
    phase1.seed = seed;
    phase2.seed = seed;
}

namespace {

[[noreturn]] void bad(const std::string& field, const std::string& why) {
    throw ValidationError(field + ": " + why);
}

void check_positive(const std::string& field, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) bad(field, "must be a finite value > 0");
}

void check_nonnegative(const std::string& field, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) bad(field, "must be a finite value >= 0");
}

} // namespace

void RunConfig::validate() const {
    const auto& m = synth.manifold;
    if (m.n < 2) bad("synth.n", "must be >= 2");
    if (m.ambient_dim < 3) bad("synth.ambient_dim", "must be >= 3");
    check_positive("synth.r0", m.r0);
    check_positive("synth.spread", m.spread);
    check_positive("synth.twist", m.twist);
    if (synth.group_size < 1 || synth.group_size > static_cast<std::size_t>(std::max(m.n, 0)))
        bad("synth.group_size", "must be in [1, synth.n]");
    if (!(synth.threshold >= 0.0 && synth.threshold <= 1.0)) bad("synth.threshold", "must be in [0, 1]");

    const auto& a = architecture;
    if (a.latent_dim < 1) bad("architecture.latent_dim", "must be >= 1");
    for (int h : a.encoder_hidden)
        if (h < 1) bad("architecture.encoder_hidden", "layer widths must be >= 1");
    for (int h : a.decoder_hidden)
        if (h < 1) bad("architecture.decoder_hidden", "layer widths must be >= 1");
    if (!(a.encoder_dropout >= 0.0 && a.encoder_dropout < 1.0))
        bad("architecture.encoder_dropout", "must be in [0, 1)");

    if (phase1.epochs < 0) bad("phase1.epochs", "must be >= 0");
    check_positive("phase1.learning_rate", phase1.learning_rate);
    check_nonnegative("phase1.lambda1", phase1.lambda1);
    check_nonnegative("phase1.lambda2", phase1.lambda2);
    check_nonnegative("phase1.anneal.start", phase1.anneal.start_weight);
    check_nonnegative("phase1.anneal.end", phase1.anneal.end_weight);
    if (phase1.anneal.total_steps < 0) bad("phase1.anneal.steps", "must be >= 0");

    if (graph.heat_time_count < 1) bad("graph.heat_times", "must be >= 1");

    const auto& p = phase2;
    if (p.epochs < 0) bad("phase2.epochs", "must be >= 0");
    if (p.pairs_per_step < 1) bad("phase2.pairs_per_step", "must be >= 1");
    check_positive("phase2.learning_rate", p.learning_rate);
    if (p.geodesic.grid_resolution < 2) bad("phase2.grid_resolution", "must be >= 2");
    if (p.geodesic.linear_steps < 2) bad("phase2.linear_steps", "must be >= 2");
    check_nonnegative("phase2.grid_expand", p.geodesic.grid_expand);
    if (p.geodesic.estimator == Estimator::Grid && a.latent_dim > MetricField::kMaxGridDim)
        bad("phase2.estimator", "grid estimator needs latent_dim <= 3; use \"linear\"");
}

namespace {

// Reads known keys from an object, rejecting anything else.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) bad(path_.empty() ? "config" : path_, "must be an object");
    }
    ~Section() = default;

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key);
    }
    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    const json& at(const char* key) const { return j_.at(key); }

    template <class T>
    void get(const char* key, T& out) {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            bad(field(key), "has the wrong type");
        }
    }
    void get_enum(const char* key, auto& out, auto parse) {
        std::string s;
        if (!has(key)) return;
        get(key, s);
        try {
            out = parse(s);
        } catch (const ValidationError& e) {
            bad(field(key), e.what());
        }
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) bad(field(it.key().c_str()), "unknown key");
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_int(Section& s, const char* key, int& out) {
    if (!s.has(key)) return;
    const json& v = s.at(key);
    if (!v.is_number_integer()) bad(s.field(key), "must be an integer");
    const auto x = v.get<long long>();
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        bad(s.field(key), "out of range");
    out = static_cast<int>(x);
}

void read_double(Section& s, const char* key, double& out) {
    if (!s.has(key)) return;
    const json& v = s.at(key);
    if (!v.is_number()) bad(s.field(key), "must be a number");
    out = v.get<double>();
}

void read_layers(Section& s, const char* key, std::vector<int>& out) {
    if (!s.has(key)) return;
    const json& v = s.at(key);
    if (!v.is_array()) bad(s.field(key), "must be an array of integers");
    std::vector<int> r;
    for (const auto& x : v) {
        if (!x.is_number_integer()) bad(s.field(key), "must be an array of integers");
        r.push_back(x.get<int>());
    }
    out = std::move(r);
}

} // namespace

RunConfig parse_run_config(std::string_view text, RunConfig c) {
    json j;
    try {
        j = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: invalid JSON: ") + e.what());
    }
    Section top(j, "");
    if (top.has("preset")) {
        std::string name;
        top.get("preset", name);
        if (name != "synthetic-table2" && name != "empirical-table3")
            bad("preset", "must be \"synthetic-table2\" or \"empirical-table3\"");
        const auto seed = c.seed;
        c = RunConfig::preset_config(name);
        c.seed = seed;
    }
    if (top.has("seed")) {
        const json& v = top.at("seed");
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
            bad("seed", "must be a non-negative integer");
        c.seed = v.get<std::uint64_t>();
    }
    if (top.has("synth")) {
        Section s(top.at("synth"), "synth");
        auto& m = c.synth.manifold;
        read_int(s, "n", m.n);
        read_int(s, "ambient_dim", m.ambient_dim);
        read_double(s, "r0", m.r0);
        read_double(s, "spread", m.spread);
        read_double(s, "twist", m.twist);
        int g = static_cast<int>(c.synth.group_size);
        read_int(s, "group_size", g);
        if (g < 1) bad("synth.group_size", "must be in [1, synth.n]");
        c.synth.group_size = static_cast<std::size_t>(g);
        read_double(s, "threshold", c.synth.threshold);
        s.finish();
    }
    if (top.has("architecture")) {
        Section s(top.at("architecture"), "architecture");
        auto& a = c.architecture;
        read_layers(s, "encoder_hidden", a.encoder_hidden);
        s.get_enum("encoder_activation", a.encoder_activation, activation_from_string);
        read_layers(s, "decoder_hidden", a.decoder_hidden);
        s.get_enum("decoder_activation", a.decoder_activation, activation_from_string);
        read_int(s, "latent_dim", a.latent_dim);
        read_double(s, "encoder_dropout", a.encoder_dropout);
        s.finish();
    }
    if (top.has("preprocess")) {
        Section s(top.at("preprocess"), "preprocess");
        s.get("standardize", c.preprocess.standardize);
        s.finish();
    }
    if (top.has("phase1")) {
        Section s(top.at("phase1"), "phase1");
        auto& p = c.phase1;
        read_int(s, "epochs", p.epochs);
        read_double(s, "learning_rate", p.learning_rate);
        read_double(s, "lambda1", p.lambda1);
        read_double(s, "lambda2", p.lambda2);
        if (s.has("anneal")) {
            Section a(s.at("anneal"), "phase1.anneal");
            a.get_enum("kind", p.anneal.kind, [](const std::string& k) {
                if (k == "linear") return AnnealSchedule::Kind::Linear;
                if (k == "sigmoid") return AnnealSchedule::Kind::Sigmoid;
                throw ValidationError("must be \"linear\" or \"sigmoid\"");
            });
            read_double(a, "start", p.anneal.start_weight);
            read_double(a, "end", p.anneal.end_weight);
            int steps = static_cast<int>(p.anneal.total_steps);
            read_int(a, "steps", steps);
            p.anneal.total_steps = steps;
            a.finish();
        }
        s.finish();
    }
    if (top.has("graph")) {
        Section s(top.at("graph"), "graph");
        s.get_enum("laplacian", c.graph.laplacian, laplacian_kind_from_string);
        s.get_enum("adjacency", c.graph.adjacency, adjacency_mode_from_string);
        read_int(s, "heat_times", c.graph.heat_time_count);
        s.finish();
    }
    if (top.has("phase2")) {
        Section s(top.at("phase2"), "phase2");
        auto& p = c.phase2;
        s.get_enum("estimator", p.geodesic.estimator, estimator_from_string);
        read_int(s, "grid_resolution", p.geodesic.grid_resolution);
        s.get_enum("connectivity", p.geodesic.connectivity, connectivity_from_string);
        read_double(s, "grid_expand", p.geodesic.grid_expand);
        read_int(s, "linear_steps", p.geodesic.linear_steps);
        read_int(s, "pairs_per_step", p.pairs_per_step);
        read_int(s, "epochs", p.epochs);
        read_double(s, "learning_rate", p.learning_rate);
        s.get_enum("kernel_scale", p.scale_mode, kernel_scale_mode_from_string);
        s.get_enum("distance_scale", p.distance_scale_mode, distance_scale_mode_from_string);
        s.finish();
    }
    if (top.has("scoring")) {
        Section s(top.at("scoring"), "scoring");
        s.get_enum("pairs", c.scoring_scope, pair_scope_from_string);
        s.finish();
    }
    top.finish();
    c.sync_seeds();
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), std::move(base));
}

std::string dump_run_config(const RunConfig& c) {
    json j;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    const auto& m = c.synth.manifold;
    j["synth"] = {{"n", m.n},           {"ambient_dim", m.ambient_dim},
                  {"r0", m.r0},         {"spread", m.spread},
                  {"twist", m.twist},   {"group_size", c.synth.group_size},
                  {"threshold", c.synth.threshold}};
    const auto& a = c.architecture;
    j["architecture"] = {{"encoder_hidden", a.encoder_hidden},
                         {"encoder_activation", std::string(to_string(a.encoder_activation))},
                         {"decoder_hidden", a.decoder_hidden},
                         {"decoder_activation", std::string(to_string(a.decoder_activation))},
                         {"latent_dim", a.latent_dim},
                         {"encoder_dropout", a.encoder_dropout}};
    j["preprocess"] = {{"standardize", c.preprocess.standardize}};
    const auto& p1 = c.phase1;
    j["phase1"] = {{"epochs", p1.epochs},
                   {"learning_rate", p1.learning_rate},
                   {"lambda1", p1.lambda1},
                   {"lambda2", p1.lambda2},
                   {"anneal",
                    {{"kind", std::string(to_string(p1.anneal.kind))},
                     {"start", p1.anneal.start_weight},
                     {"end", p1.anneal.end_weight},
                     {"steps", p1.anneal.total_steps}}}};
    j["graph"] = {{"laplacian", std::string(to_string(c.graph.laplacian))},
                  {"adjacency", std::string(to_string(c.graph.adjacency))},
                  {"heat_times", c.graph.heat_time_count}};
    const auto& p2 = c.phase2;
    j["phase2"] = {{"estimator", std::string(to_string(p2.geodesic.estimator))},
                   {"grid_resolution", p2.geodesic.grid_resolution},
                   {"connectivity", std::string(to_string(p2.geodesic.connectivity))},
                   {"grid_expand", p2.geodesic.grid_expand},
                   {"linear_steps", p2.geodesic.linear_steps},
                   {"pairs_per_step", p2.pairs_per_step},
                   {"epochs", p2.epochs},
                   {"learning_rate", p2.learning_rate},
                   {"kernel_scale", std::string(to_string(p2.scale_mode))},
                   {"distance_scale", std::string(to_string(p2.distance_scale_mode))}};
    j["scoring"] = {{"pairs", std::string(to_string(c.scoring_scope))}};
    return j.dump(2);
}

} // namespace geoalign
