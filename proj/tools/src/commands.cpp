#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "geoalign/checkpoint.hpp"
#include "geoalign/errors.hpp"
#include "geoalign/pipeline.hpp"
#include "geoalign/table_io.hpp"
#include "manifest.hpp"

namespace geoalign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path prepare_dir(const std::string& requested, const std::string& fallback) {
    fs::path dir = requested.empty() ? output_root() / fallback : fs::path(requested);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_vector(const fs::path& path, const Eigen::VectorXd& v, const std::string& header) {
    write_matrix_csv(path, Eigen::MatrixXd(v), header);
}

json config_echo(const RunConfig& c) { return json::parse(dump_run_config(c)); }

fs::path require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw IoError("missing input file '" + p.string() + "'");
    return p;
}

struct Bundle {
    AttributedGraph graph;
    std::vector<fs::path> files;
};

Bundle load_bundle(const fs::path& dir) {
    Bundle b;
    const auto edges = require_file(dir / "edges.csv");
    const auto attrs = require_file(dir / "attributes.csv");
    const fs::path labels = dir / "labels.txt";
    const bool has_labels = fs::is_regular_file(labels);
    b.graph = load_graph(edges, attrs, has_labels ? labels : fs::path{});
    b.files = {edges, attrs};
    if (has_labels) b.files.push_back(labels);
    return b;
}

json classification_json(const Classification& c) {
    json j;
    j["threshold"] = c.threshold;
    j["threshold_rule"] = c.f1 ? "score >= threshold; threshold maximizes F1 over observed "
                                 "scores (upper envelope)"
                               : "score >= threshold; modified Z of the scores above 3.5 "
                                 "(no labels)";
    j["predicted_positive"] = std::count(c.predicted.begin(), c.predicted.end(), 1);
    j["roc_auc"] = c.auc ? json(*c.auc) : json(nullptr);
    j["f1"] = c.f1 ? json(*c.f1) : json(nullptr);
    j["ari"] = c.ari ? json(*c.ari) : json(nullptr);
    return j;
}

void write_phase1(const fs::path& dir, const Phase1Result& r, const Eigen::VectorXd& recon,
                  std::uint64_t seed, Manifest& m) {
    const auto ckpt = dir / "phase1.checkpoint.json";
    save_checkpoint(r.model.to_checkpoint(seed, static_cast<std::int64_t>(r.trace.size())), ckpt);
    write_matrix_csv(dir / "latent.csv", r.latent.z_fixed, "posterior means, one row per node");
    Eigen::MatrixXd trace(static_cast<Eigen::Index>(r.trace.size()), 5);
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const auto& t = r.trace[k];
        trace.row(static_cast<Eigen::Index>(k)) << static_cast<double>(t.step), t.kl_weight,
            t.total, t.nll, t.kl;
    }
    write_matrix_csv(dir / "phase1_trace.csv", trace, "step,kl_weight,total,nll,kl");
    write_vector(dir / "recon_scores.csv", recon, "per-node Gaussian NLL at the posterior mean");
    for (const char* f : {"phase1.checkpoint.json", "latent.csv", "phase1_trace.csv",
                          "recon_scores.csv"})
        m.add_output(dir / f);
}

void write_phase2(const fs::path& dir, const Phase2Result& r, const HeatTimeSchedule& sched,
                  std::uint64_t seed, Manifest& m) {
    auto ck = r.model.to_checkpoint(seed, static_cast<std::int64_t>(r.trace.size()));
    ck.scalars["kernel.alpha"] = r.alpha;
    ck.scalars["kernel.distance_scale"] = r.distance_scale;
    save_checkpoint(ck, dir / "phase2.checkpoint.json");
    write_matrix_csv(dir / "heat_schedule.csv",
                     Eigen::Map<const Eigen::VectorXd>(sched.times.data(),
                                                       static_cast<Eigen::Index>(sched.times.size())),
                     "diffusion times; lambda2=" + format_double(sched.lambda2) +
                         " lambda_max=" + format_double(sched.lambda_max));
    Eigen::MatrixXd trace(static_cast<Eigen::Index>(r.trace.size()), 5);
    for (std::size_t k = 0; k < r.trace.size(); ++k) {
        const auto& t = r.trace[k];
        trace.row(static_cast<Eigen::Index>(k)) << static_cast<double>(t.step), t.loss, t.alpha,
            t.distance_scale, t.encoder_grad_zero ? 1.0 : 0.0;
    }
    write_matrix_csv(dir / "phase2_trace.csv", trace,
                     "step,loss,alpha,distance_scale,encoder_grad_zero");
    write_matrix_csv(dir / "distances_phase1.csv", r.distances_before,
                     "geodesic distances before phase 2");
    write_matrix_csv(dir / "distances_phase2.csv", r.distances_after,
                     "geodesic distances after phase 2");
    for (const char* f : {"phase2.checkpoint.json", "heat_schedule.csv", "phase2_trace.csv",
                          "distances_phase1.csv", "distances_phase2.csv"})
        m.add_output(dir / f);
    m.set("phase2", {{"alpha", r.alpha},
                     {"distance_scale", r.distance_scale},
                     {"encoder_digest_before", r.encoder_digest_before},
                     {"encoder_digest_after", r.encoder_digest_after},
                     {"final_loss", r.trace.empty() ? json(nullptr) : json(r.trace.back().loss)}});
}

void write_report_files(const fs::path& dir, const DistortionReport& rep,
                        const std::optional<Eigen::VectorXd>& baseline,
                        const std::optional<std::vector<int>>& labels, PairScope scope,
                        Manifest& m, json& summary) {
    write_matrix_csv(dir / "delta.csv", rep.delta, "log(max(|D1 - D2|, 1e-12))");
    write_matrix_csv(dir / "z.csv", rep.z, "modified Z-scores");
    write_vector(dir / "scores.csv", rep.scores, "node distortion scores S_i");
    std::vector<int> pred = rep.classification.predicted;
    write_labels(dir / "predictions.txt", pred);
    for (const char* f : {"delta.csv", "z.csv", "scores.csv", "predictions.txt"})
        m.add_output(dir / f);

    summary["pairs"] = std::string(to_string(scope));
    summary["median_delta"] = rep.stats.median;
    summary["mad_delta"] = rep.stats.mad;
    summary["pair_count"] = rep.stats.sample_size;
    summary["classification"] = classification_json(rep.classification);
    summary["scores"] = std::vector<double>(rep.scores.data(), rep.scores.data() + rep.scores.size());
    summary["files"] = {{"delta", "delta.csv"}, {"z", "z.csv"}, {"scores", "scores.csv"}};
    if (baseline) {
        const Classification c = classify(*baseline, labels);
        summary["recon_error_baseline"] = classification_json(c);
    }
}

} // namespace

fs::path output_root() {
    if (const char* env = std::getenv("GEOALIGN_OUTPUT_ROOT"); env && *env) return env;
    return "geoalign-out";
}

RunConfig ConfigOptions::resolve() const {
    // a "preset" key inside the file resets the base again before the overlay
    RunConfig c = RunConfig::preset_config(preset.empty() ? "synthetic-table2" : preset);
    if (!config_path.empty()) c = load_run_config(config_path, c);
    if (seed) c.seed = *seed;
    c.sync_seeds();
    c.validate();
    return c;
}

int run_synth(const SynthOptions& o) {
    RunConfig c = o.config.resolve();
    if (o.n) c.synth.manifold.n = *o.n;
    if (o.ambient_dim) c.synth.manifold.ambient_dim = *o.ambient_dim;
    if (o.group_size) {
        if (*o.group_size < 1) throw ValidationError("synth.group_size: must be in [1, synth.n]");
        c.synth.group_size = static_cast<std::size_t>(*o.group_size);
    }
    c.validate();
    const fs::path dir = prepare_dir(o.out, "synth-seed" + std::to_string(c.seed));

    Manifest m("synth");
    StageTimer t;
    const SynthDataset ds = generate_dataset(c.synth);
    m.stage("generate", t.seconds());

    const auto& g = ds.sampled.graph;
    write_matrix_csv(dir / "attributes.csv", g.attributes(), "node attributes, one row per node");
    write_edge_list(dir / "edges.csv", g.edges());
    write_labels(dir / "labels.txt", *g.labels());
    write_matrix_csv(dir / "intrinsic.csv", ds.intrinsic_kept, "intrinsic (u, v) per node");
    {
        std::vector<int> kept(ds.sampled.kept.begin(), ds.sampled.kept.end());
        write_labels(dir / "kept_nodes.txt", kept);
    }
    write_text(dir / "config.json", dump_run_config(c) + "\n");
    for (const char* f : {"attributes.csv", "edges.csv", "labels.txt", "intrinsic.csv",
                          "kept_nodes.txt", "config.json"})
        m.add_output(dir / f);

    json recipe = json::array();
    for (const auto& e : ds.manifold.recipe)
        recipe.push_back({{"a", e.a}, {"b", e.b}, {"f", std::string(to_string(e.f))}});
    m.set("config", config_echo(c));
    m.set("seeds", {{"synth", c.seed}});
    m.set("generator", "bernoulli-similarity (independent Bernoulli(S_ab) per pair, weight S_ab)");
    m.set("dataset", {{"nodes", g.node_count()},
                      {"edges", g.edge_count()},
                      {"dropped_isolated", c.synth.manifold.n - static_cast<int>(g.node_count())},
                      {"group", ds.group},
                      {"recipe", recipe}});
    m.write(dir);
    std::cout << "synth: " << g.node_count() << " nodes, " << g.edge_count() << " edges -> "
              << dir.string() << '\n';
    return 0;
}

int run_train(const TrainOptions& o) {
    RunConfig c = o.config.resolve();
    if (o.estimator) c.phase2.geodesic.estimator = estimator_from_string(*o.estimator);
    if (o.latent_dim) c.architecture.latent_dim = *o.latent_dim;
    if (o.phase1_epochs) c.phase1.epochs = *o.phase1_epochs;
    if (o.phase2_epochs) c.phase2.epochs = *o.phase2_epochs;
    if (o.grid_resolution) c.phase2.geodesic.grid_resolution = *o.grid_resolution;
    if (o.phase != "1" && o.phase != "2" && o.phase != "both")
        throw ValidationError("--phase: must be 1, 2 or both");
    c.validate();
    if (o.bundle.empty()) throw ValidationError("--bundle is required");

    const fs::path dir = prepare_dir(o.out, "train-seed" + std::to_string(c.seed));
    Manifest m("train");
    m.set("config", config_echo(c));
    m.set("seeds", {{"init", c.seed}, {"phase1", c.phase1.seed}, {"phase2", c.phase2.seed}});

    Bundle b = load_bundle(o.bundle);
    for (const auto& f : b.files) m.add_input(f);
    const AttributedGraph graph = with_adjacency(b.graph, c.graph.adjacency);
    const Eigen::MatrixXd x = prepare_attributes(graph.attributes(), c.preprocess);
    write_text(dir / "config.json", dump_run_config(c) + "\n");
    m.add_output(dir / "config.json");

    VaeModel model;
    LatentState latent;
    if (o.phase == "2") {
        const fs::path from = o.resume.empty() ? dir : fs::path(o.resume);
        const auto ckpt_path = require_file(from / "phase1.checkpoint.json");
        m.add_input(ckpt_path);
        model = VaeModel::from_checkpoint(load_checkpoint(ckpt_path));
        if (model.data_dim() != x.cols())
            throw ValidationError("phase-1 checkpoint does not match the bundle's attribute width");
        latent = encode_nodes(model, x);
    } else {
        StageTimer t;
        Phase1Result r1 = run_phase1(x, c);
        m.stage("phase1", t.seconds());
        const Eigen::VectorXd recon = recon_error_scores(r1.model, x);
        write_phase1(dir, r1, recon, c.seed, m);
        model = std::move(r1.model);
        latent = std::move(r1.latent);
    }

    if (o.phase != "1") {
        StageTimer t;
        AlignmentConfig ac = c.phase2;
        ac.schedule = graph_heat_schedule(graph, c.graph);
        const Phase2Result r2 = train_phase2(std::move(model), latent, graph, ac);
        m.stage("phase2", t.seconds());
        write_phase2(dir, r2, ac.schedule, c.seed, m);
    }
    m.write(dir);
    std::cout << "train: phase " << o.phase << " -> " << dir.string() << '\n';
    return 0;
}

int run_score(const ScoreOptions& o) {
    if (o.before.empty() || o.after.empty())
        throw ValidationError("--before and --after distance snapshots are required");
    const PairScope scope = pair_scope_from_string(o.pairs);
    const fs::path dir = prepare_dir(o.out, "score");
    Manifest m("score");

    StageTimer t;
    const Eigen::MatrixXd d1 = read_matrix_csv(require_file(o.before));
    const Eigen::MatrixXd d2 = read_matrix_csv(require_file(o.after));
    m.add_input(o.before);
    m.add_input(o.after);
    std::optional<std::vector<int>> labels;
    if (!o.labels.empty()) {
        labels = read_labels(require_file(o.labels));
        m.add_input(o.labels);
    }
    std::optional<AttributedGraph> graph;
    if (scope == PairScope::Edges) {
        if (o.edges.empty()) throw ValidationError("--pairs edges needs --edges");
        graph = AttributedGraph(static_cast<std::size_t>(d1.rows()), read_edge_list(require_file(o.edges)),
                                Eigen::MatrixXd(d1.rows(), 0));
        m.add_input(o.edges);
    }
    std::optional<Eigen::VectorXd> baseline;
    if (!o.recon.empty()) {
        const Eigen::MatrixXd r = read_matrix_csv(require_file(o.recon));
        if (r.cols() != 1 || r.rows() != d1.rows())
            throw ValidationError("--recon must hold one score per node");
        baseline = r.col(0);
        m.add_input(o.recon);
    }
    const DistortionReport rep = distortion_report(d1, d2, labels, scope, graph ? &*graph : nullptr);
    m.stage("score", t.seconds());

    json summary;
    write_report_files(dir, rep, baseline, labels, scope, m, summary);
    write_text(dir / "report.json", summary.dump(2) + "\n");
    m.add_output(dir / "report.json");
    m.write(dir);
    std::cout << "score:";
    if (rep.classification.auc) std::cout << " auc=" << *rep.classification.auc;
    if (rep.classification.f1) std::cout << " f1=" << *rep.classification.f1;
    std::cout << " -> " << dir.string() << '\n';
    return 0;
}

int run_curvature(const CurvatureOptions& o) {
    if (o.phase != 1 && o.phase != 2) throw ValidationError("--phase: must be 1 or 2");
    if (o.train_dir.empty()) throw ValidationError("--train-dir is required");
    const fs::path src(o.train_dir);
    const RunConfig c = load_run_config(require_file(src / "config.json").string(),
                                        RunConfig::preset_config("synthetic-table2"));
    const auto ckpt_path =
        require_file(src / (o.phase == 1 ? "phase1.checkpoint.json" : "phase2.checkpoint.json"));
    const VaeModel model = VaeModel::from_checkpoint(load_checkpoint(ckpt_path));
    if (model.latent_dim() != 2)
        throw ValidationError("curvature needs a 2-dimensional latent space (got " +
                              std::to_string(model.latent_dim()) + ")");
    const Eigen::MatrixXd z = read_matrix_csv(require_file(src / "latent.csv"));
    const int p = o.resolution.value_or(c.phase2.geodesic.grid_resolution);
    if (p < 3) throw ValidationError("--resolution: must be >= 3");

    Manifest m("curvature");
    m.add_input(ckpt_path);
    m.add_input(src / "latent.csv");
    StageTimer t;
    const DecoderMetric metric(model.dec_mu, model.dec_logvar);
    // same bounds as phase 2 so that phase-1 and phase-2 grids line up node for node
    const GridBounds bounds = GridBounds::around(z, c.phase2.geodesic.grid_expand);
    const MetricField field = MetricField::build(metric, bounds, p, c.phase2.geodesic.connectivity);
    const Eigen::MatrixXd k = curvature_grid(field);
    m.stage("curvature", t.seconds());

    const fs::path dir = prepare_dir(o.out, src.filename().string() + "-curvature");
    const std::string name = "curvature_phase" + std::to_string(o.phase) + ".csv";
    write_matrix_csv(dir / name, k,
                     "Gaussian curvature at interior nodes; rows along axis 1; lower=" +
                         format_double(bounds.lower[0]) + "," + format_double(bounds.lower[1]) +
                         " upper=" + format_double(bounds.upper[0]) + "," +
                         format_double(bounds.upper[1]) + " resolution=" + std::to_string(p));
    m.add_output(dir / name);
    m.set("grid", {{"resolution", p},
                   {"lower", {bounds.lower[0], bounds.lower[1]}},
                   {"upper", {bounds.upper[0], bounds.upper[1]}},
                   {"min_eigenvalue_before_floor", field.min_eigenvalue_before_floor()}});
    m.write(dir);
    std::cout << "curvature: " << k.rows() << "x" << k.cols() << " -> " << (dir / name).string()
              << '\n';
    return 0;
}

int run_report(const ReportOptions& o) {
    if (o.seeds.empty()) throw ValidationError("--seeds: need at least one seed");
    const RunConfig base = o.config.resolve();
    const fs::path dir = prepare_dir(o.out, "report");
    Manifest m("report");
    m.set("config", config_echo(base));
    m.set("seeds", o.seeds);

    json runs = json::array();
    std::vector<double> aucs, f1s, aris, recon_aucs;
    for (const auto seed : o.seeds) {
        RunConfig c = base;
        c.seed = seed;
        c.sync_seeds();
        StageTimer t;
        const SynthDataset ds = generate_dataset(c.synth);
        const PipelineResult r = run_pipeline(ds.sampled.graph, c);
        m.stage("seed " + std::to_string(seed), t.seconds());

        const fs::path sub = dir / ("seed" + std::to_string(seed));
        fs::create_directories(sub);
        json summary;
        write_report_files(sub, *r.report, r.recon_scores, ds.sampled.graph.labels(),
                           c.scoring_scope, m, summary);
        write_text(sub / "report.json", summary.dump(2) + "\n");
        m.add_output(sub / "report.json");

        const auto& cl = r.report->classification;
        json run = {{"seed", seed},
                    {"roc_auc", *cl.auc},
                    {"f1", *cl.f1},
                    {"ari", *cl.ari},
                    {"recon_roc_auc", *r.recon_classification.auc},
                    {"alpha", r.phase2->alpha},
                    {"distance_scale", r.phase2->distance_scale}};
        runs.push_back(run);
        aucs.push_back(*cl.auc);
        f1s.push_back(*cl.f1);
        aris.push_back(*cl.ari);
        recon_aucs.push_back(*r.recon_classification.auc);
        std::cout << "report: seed " << seed << " auc=" << *cl.auc << " f1=" << *cl.f1
                  << " recon_auc=" << *r.recon_classification.auc << '\n';
    }
    json summary = {{"generator", "bernoulli-similarity"},
                    {"runs", runs},
                    {"median",
                     {{"roc_auc", median(aucs)},
                      {"f1", median(f1s)},
                      {"ari", median(aris)},
                      {"recon_roc_auc", median(recon_aucs)}}}};
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    m.add_output(dir / "summary.json");
    m.write(dir);
    return 0;
}

} // namespace geoalign::cli
