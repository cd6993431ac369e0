#include <iostream>

#include <CLI11.hpp>

#ifdef GEOALIGN_HAVE_OPENMP
#include <omp.h>
#endif

#include "commands.hpp"
#include "geoalign/errors.hpp"

using namespace geoalign::cli;

namespace {

void add_config_options(CLI::App* app, ConfigOptions& c) {
    app->add_option("--config", c.config_path, "JSON run config overlaid on the preset");
    app->add_option("--preset", c.preset, "synthetic-table2 | empirical-table3");
    app->add_option("--seed", c.seed, "master seed for every stage");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"geoalign: graph-aligned latent geometry for anomaly detection"};
    app.set_version_flag("--version", std::string(GEOALIGN_VERSION));
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "OpenMP threads (0 = runtime default)")
        ->check(CLI::NonNegativeNumber);

    SynthOptions synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic attributed graph bundle");
    add_config_options(s, synth.config);
    s->add_option("--n", synth.n, "number of nodes before isolated-node removal");
    s->add_option("--ambient-dim", synth.ambient_dim, "attribute dimension D");
    s->add_option("--group-size", synth.group_size, "anomalous group size");
    s->add_option("--out", synth.out, "output directory");

    TrainOptions train;
    auto* t = app.add_subcommand("train", "phase 1 (VAE) and/or phase 2 (decoder alignment)");
    add_config_options(t, train.config);
    t->add_option("--bundle", train.bundle, "directory with edges.csv, attributes.csv[, labels.txt]")
        ->required();
    t->add_option("--out", train.out, "output directory");
    t->add_option("--phase", train.phase, "1 | 2 | both")->check(CLI::IsMember({"1", "2", "both"}));
    t->add_option("--resume", train.resume, "directory of a phase-1 run (for --phase 2)");
    t->add_option("--estimator", train.estimator, "grid | linear");
    t->add_option("--latent-dim", train.latent_dim);
    t->add_option("--phase1-epochs", train.phase1_epochs);
    t->add_option("--phase2-epochs", train.phase2_epochs);
    t->add_option("--grid-resolution", train.grid_resolution);

    ScoreOptions score;
    auto* sc = app.add_subcommand("score", "distortion scores from two distance snapshots");
    sc->add_option("--before", score.before, "distance matrix before alignment")->required();
    sc->add_option("--after", score.after, "distance matrix after alignment")->required();
    sc->add_option("--labels", score.labels, "0/1 ground truth per node");
    sc->add_option("--edges", score.edges, "edge list (for --pairs edges)");
    sc->add_option("--pairs", score.pairs, "all | edges")->check(CLI::IsMember({"all", "edges"}));
    sc->add_option("--recon", score.recon, "per-node reconstruction-error scores to compare");
    sc->add_option("--out", score.out, "output directory");

    CurvatureOptions curv;
    auto* c = app.add_subcommand("curvature", "Gaussian curvature on the latent grid (d = 2)");
    c->add_option("--train-dir", curv.train_dir, "output directory of `train`")->required();
    c->add_option("--phase", curv.phase, "1 | 2")->check(CLI::IsMember({1, 2}));
    c->add_option("--resolution", curv.resolution, "grid points per axis");
    c->add_option("--out", curv.out, "output directory");

    ReportOptions report;
    auto* r = app.add_subcommand("report", "synthetic end-to-end runs over several seeds");
    add_config_options(r, report.config);
    r->add_option("--seeds", report.seeds, "seeds to run")->expected(1, -1);
    r->add_option("--out", report.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

#ifdef GEOALIGN_HAVE_OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    try {
        if (s->parsed()) return run_synth(synth);
        if (t->parsed()) return run_train(train);
        if (sc->parsed()) return run_score(score);
        if (c->parsed()) return run_curvature(curv);
        if (r->parsed()) return run_report(report);
    } catch (const geoalign::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const geoalign::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const geoalign::IoError& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
