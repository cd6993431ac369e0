#include "geoalign/alignment.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <utility>
#include <sstream>

#include "geoalign/adam.hpp"
#include "geoalign/digest.hpp"
#include "geoalign/errors.hpp"

namespace geoalign {

double heat_kernel_value(double dist, int latent_dim, const HeatTimeSchedule& schedule) {
    if (dist < 0.0) throw ValidationError("heat kernel: distance must be >= 0");
    const double d2 = dist * dist;
    double h = 0.0;
    for (double t : schedule.times)
        h += std::pow(4.0 * std::numbers::pi * t, -0.5 * latent_dim) * std::exp(-d2 / (4.0 * t));
    return h;
}

double heat_kernel_slope(double dist, int latent_dim, const HeatTimeSchedule& schedule) {
    const double d2 = dist * dist;
    double s = 0.0;
    for (double t : schedule.times)
        s += std::pow(4.0 * std::numbers::pi * t, -0.5 * latent_dim) * std::exp(-d2 / (4.0 * t)) *
             (-dist / (2.0 * t));
    return s;
}

std::string_view to_string(DistanceScaleMode m) {
    return m == DistanceScaleMode::Off ? "off" : "calibrated";
}

DistanceScaleMode distance_scale_mode_from_string(std::string_view s) {
    if (s == "off") return DistanceScaleMode::Off;
    if (s == "calibrated") return DistanceScaleMode::Calibrated;
    throw ValidationError("unknown distance scale mode '" + std::string(s) + "'");
}

std::string_view to_string(KernelScaleMode m) {
    return m == KernelScaleMode::Learned ? "learned" : "fixed";
}

KernelScaleMode kernel_scale_mode_from_string(std::string_view s) {
    if (s == "learned") return KernelScaleMode::Learned;
    if (s == "fixed") return KernelScaleMode::Fixed;
    throw ValidationError("unknown kernel scale mode '" + std::string(s) + "'");
}

namespace {

void check_pairs(const std::vector<NodePair>& pairs, Eigen::Index n) {
    for (const auto& p : pairs) {
        if (p.i >= static_cast<std::size_t>(n) || p.j >= static_cast<std::size_t>(n))
            throw ValidationError("pair index out of range");
        if (p.i == p.j) throw ValidationError("diagonal pairs are excluded from the alignment");
    }
}

std::vector<GeodesicResult> pair_geodesics(const MetricSource& metric, const Eigen::MatrixXd& z,
                                           const std::vector<NodePair>& pairs,
                                           const GeodesicSettings& settings,
                                           const MetricField* field) {
    std::vector<GeodesicResult> out(pairs.size());
    auto row = [&](std::size_t i) -> Eigen::VectorXd {
        return z.row(static_cast<Eigen::Index>(i)).transpose();
    };
    if (settings.estimator == Estimator::Linear) {
#ifdef GEOALIGN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
        for (std::size_t k = 0; k < pairs.size(); ++k)
            out[k] = geodesic_linear(metric, row(pairs[k].i), row(pairs[k].j), settings.linear_steps);
        return out;
    }
    if (field == nullptr) throw ValidationError("grid estimator requires a metric field");

    // one Dijkstra tree per canonical (lower) source node, shared by all its pairs
    std::map<std::size_t, std::vector<std::size_t>> by_source;
    std::vector<std::size_t> target(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const std::size_t a = field->snap(row(pairs[k].i));
        const std::size_t b = field->snap(row(pairs[k].j));
        target[k] = std::max(a, b);
        if (a == b) {
            out[k].path = {a};
            continue;
        }
        by_source[std::min(a, b)].push_back(k);
    }
    std::vector<const std::pair<const std::size_t, std::vector<std::size_t>>*> groups;
    for (const auto& g : by_source) groups.push_back(&g);
#ifdef GEOALIGN_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const ShortestPathTree tree = grid_shortest_paths(*field, groups[gi]->first);
        for (std::size_t k : groups[gi]->second) {
            out[k].path = tree.path_to(target[k]);
            out[k].distance = tree.dist[target[k]];
        }
    }
    return out;
}

} // namespace

KernelEvaluation evaluate_kernel(const MetricSource& metric, const Eigen::MatrixXd& z,
                                 const std::vector<NodePair>& pairs,
                                 const HeatTimeSchedule& schedule, double alpha,
                                 const GeodesicSettings& settings, const MetricField* field,
                                 double distance_scale) {
    check_pairs(pairs, z.rows());
    if (!(distance_scale > 0.0)) throw ValidationError("distance scale must be > 0");
    const auto geo = pair_geodesics(metric, z, pairs, settings, field);
    KernelEvaluation e;
    e.pairs = pairs;
    e.alpha = alpha;
    e.distance_scale = distance_scale;
    for (const auto& g : geo) {
        e.distances.push_back(g.distance);
        e.kernel.push_back(
            heat_kernel_value(distance_scale * g.distance, static_cast<int>(z.cols()), schedule));
    }
    return e;
}

double alignment_loss(const AttributedGraph& graph, const KernelEvaluation& eval) {
    double loss = 0.0;
    for (std::size_t k = 0; k < eval.pairs.size(); ++k) {
        const auto& p = eval.pairs[k];
        if (p.i == p.j) throw ValidationError("diagonal pairs are excluded from the alignment");
        const double r = graph.weight(p.i, p.j) - eval.alpha * eval.kernel[k];
        loss += r * r;
    }
    return loss;
}

Phase2Loss phase2_loss(const VaeModel& model, const Eigen::MatrixXd& z,
                       const AttributedGraph& graph, const std::vector<NodePair>& pairs,
                       const HeatTimeSchedule& schedule, double alpha,
                       const GeodesicSettings& settings, const MetricField* field,
                       double distance_scale) {
    if (!(distance_scale > 0.0)) throw ValidationError("distance scale must be > 0");
    if (z.cols() != model.latent_dim()) throw ValidationError("latent codes have the wrong width");
    if (static_cast<std::size_t>(z.rows()) != graph.node_count())
        throw ValidationError("one latent code per graph node is required");
    check_pairs(pairs, z.rows());

    const DecoderMetric metric(model.dec_mu, model.dec_logvar);
    const auto geo = pair_geodesics(metric, z, pairs, settings, field);
    const int d = model.latent_dim();

    Phase2Loss out;
    out.grad = VaeGradient::zeros_like(model);
    out.eval.pairs = pairs;
    out.eval.alpha = alpha;
    out.eval.distance_scale = distance_scale;

    std::vector<double> dloss_ddist(pairs.size());
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double dist = geo[k].distance;
        const double sd = distance_scale * dist;
        const double h = heat_kernel_value(sd, d, schedule);
        const double r = graph.weight(pairs[k].i, pairs[k].j) - alpha * h;
        out.eval.distances.push_back(dist);
        out.eval.kernel.push_back(h);
        out.loss += r * r;
        // log-parameterized: d/d(log a) = a d/da
        const double dl_dsd = -2.0 * r * alpha * heat_kernel_slope(sd, d, schedule);
        out.grad_log_alpha += -2.0 * r * alpha * h;
        out.grad_log_distance_scale += dl_dsd * sd;
        dloss_ddist[k] = dl_dsd * distance_scale;
    }

    QuadformBatch batch;
    if (settings.estimator == Estimator::Grid) {
        std::vector<Eigen::MatrixXd> moments(field->node_count());
        for (std::size_t k = 0; k < pairs.size(); ++k)
            if (dloss_ddist[k] != 0.0) accumulate_path_moments(*field, geo[k].path, dloss_ddist[k], moments);
        moments_to_quadforms(*field, moments, batch);
    } else {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (dloss_ddist[k] == 0.0) continue;
            accumulate_linear_quadforms(metric, z.row(static_cast<Eigen::Index>(pairs[k].i)).transpose(),
                                        z.row(static_cast<Eigen::Index>(pairs[k].j)).transpose(),
                                        settings.linear_steps, dloss_ddist[k], batch);
        }
    }
    metric.accumulate_gradient(batch, out.grad.dec_mu, out.grad.dec_logvar);
    return out;
}

std::vector<NodePair> sample_pairs(const AttributedGraph& graph, int count, std::mt19937_64& rng) {
    if (count < 1) throw ValidationError("pairs_per_step must be >= 1");
    const std::size_t n = graph.node_count();
    if (n < 2) throw ValidationError("need at least two nodes to sample pairs");
    const auto& edges = graph.edges();
    const std::size_t total_pairs = n * (n - 1) / 2;
    const bool has_non_edges = edges.size() < total_pairs;

    std::vector<NodePair> out;
    out.reserve(static_cast<std::size_t>(count));
    const int from_edges = edges.empty() ? 0 : (has_non_edges ? (count + 1) / 2 : count);
    if (!edges.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
        for (int k = 0; k < from_edges; ++k) {
            const auto& e = edges[pick(rng)];
            out.push_back({e.i, e.j});
        }
    }
    std::uniform_int_distribution<std::size_t> node(0, n - 1);
    while (static_cast<int>(out.size()) < count) {
        const std::size_t i = node(rng);
        const std::size_t j = node(rng);
        if (i == j || graph.weight(i, j) != 0.0) continue;
        out.push_back({std::min(i, j), std::max(i, j)});
    }
    return out;
}

double initial_kernel_scale(const AttributedGraph& graph, const KernelEvaluation& eval) {
    double a2 = 0.0, h2 = 0.0;
    for (std::size_t k = 0; k < eval.pairs.size(); ++k) {
        const double a = graph.weight(eval.pairs[k].i, eval.pairs[k].j);
        a2 += a * a;
        h2 += eval.kernel[k] * eval.kernel[k];
    }
    if (!(h2 > 0.0) || !std::isfinite(h2))
        throw NumericalError("kernel scale: heat kernel vanishes on every sampled pair");
    if (!(a2 > 0.0)) return 1.0;
    return std::sqrt(a2) / std::sqrt(h2);
}

KernelCalibration calibrate_kernel(const AttributedGraph& graph, const std::vector<NodePair>& pairs,
                                   const std::vector<double>& distances, int latent_dim,
                                   const HeatTimeSchedule& schedule) {
    if (pairs.size() != distances.size()) throw ValidationError("calibrate_kernel: size mismatch");
    std::vector<double> a(pairs.size());
    double a2 = 0.0;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        a[k] = graph.weight(pairs[k].i, pairs[k].j);
        a2 += a[k] * a[k];
    }
    KernelCalibration best;
    best.loss = std::numeric_limits<double>::infinity();
    constexpr int kSteps = 480; // log s in [-12, 12], step 0.05
    for (int k = 0; k <= kSteps; ++k) {
        const double scale = std::exp(-12.0 + 24.0 * k / kSteps);
        double ah = 0.0, h2 = 0.0;
        for (std::size_t m = 0; m < a.size(); ++m) {
            const double h = heat_kernel_value(scale * distances[m], latent_dim, schedule);
            ah += a[m] * h;
            h2 += h * h;
        }
        if (!(ah > 0.0) || !(h2 > 0.0)) continue;
        const double loss = a2 - ah * ah / h2;
        if (loss < best.loss) best = {ah / h2, scale, loss};
    }
    if (!std::isfinite(best.loss))
        throw NumericalError("kernel calibration: kernel and adjacency never overlap");
    return best;
}

Eigen::MatrixXd distance_snapshot(const VaeModel& model, const Eigen::MatrixXd& z,
                                  const GeodesicSettings& settings, const GridBounds& bounds) {
    const DecoderMetric metric(model.dec_mu, model.dec_logvar);
    DistanceOptions opt;
    opt.estimator = settings.estimator;
    opt.linear_steps = settings.linear_steps;
    if (settings.estimator == Estimator::Grid) {
        const MetricField field =
            MetricField::build(metric, bounds, settings.grid_resolution, settings.connectivity);
        opt.field = &field;
        return pairwise_distances(metric, z, opt);
    }
    return pairwise_distances(metric, z, opt);
}

Phase2Result train_phase2(VaeModel model, const LatentState& latent,
                          const AttributedGraph& graph, const AlignmentConfig& config) {
    const Eigen::MatrixXd& z = latent.z_fixed;
    if (z.rows() == 0 || static_cast<std::size_t>(z.rows()) != graph.node_count())
        throw ValidationError("phase 2 needs one frozen latent code per node");
    if (z.cols() != model.latent_dim()) throw ValidationError("latent codes have the wrong width");
    if (config.epochs < 0) throw ValidationError("phase 2 epochs must be >= 0");
    if (config.pairs_per_step < 1) throw ValidationError("pairs_per_step must be >= 1");
    if (!(config.learning_rate > 0.0)) throw ValidationError("phase 2 learning_rate must be > 0");
    if (config.schedule.times.empty()) throw ValidationError("phase 2 needs a heat-time schedule");
    if (config.geodesic.estimator == Estimator::Grid && model.latent_dim() > MetricField::kMaxGridDim)
        throw ValidationError("grid estimator needs latent_dim <= 3; use the linear estimator");

    Phase2Result res;
    res.bounds = GridBounds::around(z, config.geodesic.grid_expand);
    res.encoder_digest_before = parameter_digest(std::as_const(model).encoder_blocks());
    res.distances_before = distance_snapshot(model, z, config.geodesic, res.bounds);

    std::mt19937_64 rng(config.seed);
    Adam adam({config.learning_rate});
    double log_alpha = 0.0;
    double log_scale = 0.0;
    bool alpha_initialised = false;

    for (int step = 0; step < config.epochs; ++step) {
        const DecoderMetric metric(model.dec_mu, model.dec_logvar);
        std::optional<MetricField> field;
        if (config.geodesic.estimator == Estimator::Grid)
            field = MetricField::build(metric, res.bounds, config.geodesic.grid_resolution,
                                       config.geodesic.connectivity);
        const MetricField* fp = field ? &*field : nullptr;
        const auto pairs = sample_pairs(graph, config.pairs_per_step, rng);

        if (!alpha_initialised) {
            const KernelEvaluation e0 =
                evaluate_kernel(metric, z, pairs, config.schedule, 1.0, config.geodesic, fp);
            if (config.distance_scale_mode == DistanceScaleMode::Calibrated) {
                const auto cal = calibrate_kernel(graph, pairs, e0.distances, model.latent_dim(),
                                                  config.schedule);
                log_alpha = std::log(cal.alpha);
                log_scale = std::log(cal.distance_scale);
            } else {
                log_alpha = std::log(initial_kernel_scale(graph, e0));
            }
            alpha_initialised = true;
        }

        Phase2Loss loss = phase2_loss(model, z, graph, pairs, config.schedule,
                                      std::exp(log_alpha), config.geodesic, fp,
                                      std::exp(log_scale));
        if (!std::isfinite(loss.loss)) {
            std::ostringstream os;
            os << "phase 2 diverged: non-finite loss at step " << step;
            throw NumericalError(os.str(), step);
        }
        bool enc_zero = loss.grad.enc_trunk.is_zero() && loss.grad.enc_mu.is_zero() &&
                        loss.grad.enc_logvar.is_zero();
        res.trace.push_back({step, loss.loss, std::exp(log_alpha), std::exp(log_scale), enc_zero});
        if (!enc_zero) throw NumericalError("phase 2: encoder received a gradient", step);

        auto params = model.decoder_blocks();
        auto grads = loss.grad.decoder_blocks();
        const bool learned = config.scale_mode == KernelScaleMode::Learned;
        const double g_alpha = learned ? loss.grad_log_alpha : 0.0;
        const double g_scale =
            learned && config.distance_scale_mode == DistanceScaleMode::Calibrated
                ? loss.grad_log_distance_scale
                : 0.0;
        params.push_back({"kernel.log_alpha", {&log_alpha, 1}});
        grads.push_back({"kernel.log_alpha", {&g_alpha, 1}});
        params.push_back({"kernel.log_distance_scale", {&log_scale, 1}});
        grads.push_back({"kernel.log_distance_scale", {&g_scale, 1}});
        try {
            adam.step(params, grads);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (phase 2 step " +
                                     std::to_string(step) + ")",
                                 step);
        }
        if (parameter_digest(std::as_const(model).encoder_blocks()) != res.encoder_digest_before)
            throw NumericalError("phase 2: encoder parameters drifted", step);
    }

    res.alpha = alpha_initialised ? std::exp(log_alpha) : 1.0;
    res.distance_scale = std::exp(log_scale);
    res.distances_after = distance_snapshot(model, z, config.geodesic, res.bounds);
    res.encoder_digest_after = parameter_digest(std::as_const(model).encoder_blocks());
    if (res.encoder_digest_after != res.encoder_digest_before)
        throw NumericalError("phase 2: encoder parameters drifted");
    res.model = std::move(model);
    return res;
}

} // namespace geoalign
