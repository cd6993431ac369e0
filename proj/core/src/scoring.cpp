#include "geoalign/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "geoalign/errors.hpp"

namespace geoalign {

namespace {

void check_binary(const std::vector<int>& labels, std::size_t n) {
    if (labels.size() != n)
        throw ValidationError("labels: expected " + std::to_string(n) + " entries, got " +
                              std::to_string(labels.size()));
    for (int l : labels)
        if (l != 0 && l != 1) throw ValidationError("labels must be 0 or 1");
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

} // namespace

Eigen::MatrixXd delta_matrix(const Eigen::MatrixXd& d1, const Eigen::MatrixXd& d2, double eps) {
    if (d1.rows() != d2.rows() || d1.cols() != d2.cols())
        throw ValidationError("delta_matrix: snapshot shapes differ");
    if (d1.rows() != d1.cols()) throw ValidationError("delta_matrix: snapshots must be square");
    if (!(eps > 0.0)) throw ValidationError("delta_matrix: eps must be > 0");
    return (d1 - d2).cwiseAbs().cwiseMax(eps).array().log().matrix();
}

double median(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of an empty sample");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1) return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

Eigen::MatrixXd modified_z(const Eigen::MatrixXd& delta, ZStatistics* stats,
                           const Eigen::MatrixXd* mask) {
    const Eigen::Index n = delta.rows();
    if (delta.cols() != n) throw ValidationError("modified_z: matrix must be square");
    if (mask && (mask->rows() != n || mask->cols() != n))
        throw ValidationError("modified_z: mask shape differs");

    std::vector<double> sample;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (!mask || (*mask)(i, j) != 0.0) sample.push_back(delta(i, j));
    if (sample.size() < 2) throw ValidationError("modified_z: need at least two off-diagonal pairs");

    const double med = median(sample);
    std::vector<double> dev(sample.size());
    std::transform(sample.begin(), sample.end(), dev.begin(),
                   [med](double x) { return std::abs(x - med); });
    const double mad = median(std::move(dev));
    if (stats) *stats = {med, mad, sample.size()};

    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(n, n);
    if (mad == 0.0) return z;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (mask && (*mask)(i, j) == 0.0) continue;
            z(i, j) = z(j, i) = kModifiedZConstant * (delta(i, j) - med) / mad;
        }
    return z;
}

Eigen::VectorXd node_scores(const Eigen::MatrixXd& z) {
    if (z.rows() != z.cols()) throw ValidationError("node_scores: matrix must be square");
    Eigen::VectorXd s(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            if (j != i) acc += z(i, j);
        s(i) = acc;
    }
    return s;
}

std::optional<double> roc_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels) {
    const auto n = static_cast<std::size_t>(scores.size());
    check_binary(labels, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores(a) < scores(b); });
    double rank_sum = 0.0;
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n;) {
        std::size_t e = k;
        while (e < n && scores(order[e]) == scores(order[k])) ++e;
        const double avg = 0.5 * static_cast<double>(k + 1 + e); // mean of ranks k+1..e
        for (std::size_t m = k; m < e; ++m)
            if (labels[order[m]] == 1) rank_sum += avg;
        k = e;
    }
    for (int l : labels) pos += l == 1;
    const std::size_t neg = n - pos;
    if (pos == 0 || neg == 0) return std::nullopt;
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double f1_score(const std::vector<int>& predicted, const std::vector<int>& labels) {
    if (predicted.size() != labels.size()) throw ValidationError("f1: size mismatch");
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (predicted[k] == 1 && labels[k] == 1) ++tp;
        else if (predicted[k] == 1) ++fp;
        else if (labels[k] == 1) ++fn;
    }
    if (tp == 0) return 0.0;
    return 2.0 * tp / (2.0 * tp + fp + fn);
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) throw ValidationError("ari: size mismatch");
    std::vector<int> ua(a), ub(b);
    std::sort(ua.begin(), ua.end());
    ua.erase(std::unique(ua.begin(), ua.end()), ua.end());
    std::sort(ub.begin(), ub.end());
    ub.erase(std::unique(ub.begin(), ub.end()), ub.end());
    Eigen::MatrixXd table = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ua.size()),
                                                  static_cast<Eigen::Index>(ub.size()));
    for (std::size_t k = 0; k < a.size(); ++k) {
        const auto r = std::lower_bound(ua.begin(), ua.end(), a[k]) - ua.begin();
        const auto c = std::lower_bound(ub.begin(), ub.end(), b[k]) - ub.begin();
        table(r, c) += 1.0;
    }
    double index = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (Eigen::Index r = 0; r < table.rows(); ++r)
        for (Eigen::Index c = 0; c < table.cols(); ++c) index += choose2(table(r, c));
    for (Eigen::Index r = 0; r < table.rows(); ++r) sum_a += choose2(table.row(r).sum());
    for (Eigen::Index c = 0; c < table.cols(); ++c) sum_b += choose2(table.col(c).sum());
    const double expected = sum_a * sum_b / choose2(static_cast<double>(a.size()));
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0; // both partitions trivial and identical in kind
    return (index - expected) / (max_index - expected);
}

Classification classify(const Eigen::VectorXd& scores,
                        const std::optional<std::vector<int>>& labels) {
    const auto n = static_cast<std::size_t>(scores.size());
    if (n == 0) throw ValidationError("classify: empty score vector");
    if (!scores.allFinite()) throw ValidationError("classify: non-finite scores");
    Classification out;
    auto predict = [&](double thr) {
        std::vector<int> p(n);
        for (std::size_t k = 0; k < n; ++k) p[k] = scores(static_cast<Eigen::Index>(k)) >= thr;
        return p;
    };
    if (!labels) {
        // no ground truth: flag modified-Z outliers of S itself (cut 3.5); with MAD = 0 nothing
        std::vector<double> v(scores.data(), scores.data() + n);
        const double med = median(v);
        for (auto& x : v) x = std::abs(x - med);
        const double mad = median(v);
        out.threshold = mad > 0.0 ? med + kUnlabeledZCut * mad / kModifiedZConstant
                                  : std::numeric_limits<double>::infinity();
        out.predicted = predict(out.threshold);
        return out;
    }
    check_binary(*labels, n);
    out.auc = roc_auc(scores, *labels);

    // sweep candidate thresholds from the top, groups of tied scores at a time
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores(a) > scores(b); });
    double total_pos = 0.0;
    for (int l : *labels) total_pos += l;
    double tp = 0.0, fp = 0.0, best = -1.0, best_thr = scores(order[0]);
    for (std::size_t k = 0; k < n;) {
        const double s = scores(order[k]);
        while (k < n && scores(order[k]) == s) {
            ((*labels)[order[k]] == 1 ? tp : fp) += 1.0;
            ++k;
        }
        const double f1 = tp > 0.0 ? 2.0 * tp / (tp + fp + total_pos) : 0.0;
        if (f1 > best) {
            best = f1;
            best_thr = s;
        }
    }
    out.threshold = best_thr;
    out.predicted = predict(best_thr);
    out.f1 = f1_score(out.predicted, *labels);
    out.ari = adjusted_rand_index(out.predicted, *labels);
    return out;
}

Eigen::VectorXd recon_error_scores(const VaeModel& model, const Eigen::MatrixXd& attributes) {
    if (attributes.cols() != model.data_dim())
        throw ValidationError("recon_error_scores: attribute width does not match the model");
    const Encoding enc = encode(model, attributes.transpose());
    const Eigen::MatrixXd mean = model.dec_mu.evaluate(enc.mu);
    const Eigen::MatrixXd var = model.dec_logvar.evaluate(enc.mu).array().exp().matrix();
    Eigen::VectorXd out(attributes.rows());
    for (Eigen::Index i = 0; i < attributes.rows(); ++i)
        out(i) = gaussian_nll(attributes.row(i).transpose(), mean.col(i), var.col(i));
    return out;
}

DistortionReport distortion_report(const Eigen::MatrixXd& d_phase1, const Eigen::MatrixXd& d_phase2,
                                   const std::optional<std::vector<int>>& labels, PairScope scope,
                                   const AttributedGraph* graph) {
    DistortionReport r;
    r.delta = delta_matrix(d_phase1, d_phase2);
    if (scope == PairScope::Edges) {
        if (!graph) throw ValidationError("edge-restricted scoring needs the graph");
        if (static_cast<Eigen::Index>(graph->node_count()) != r.delta.rows())
            throw ValidationError("graph size does not match the distance snapshots");
        Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(r.delta.rows(), r.delta.cols());
        for (const auto& e : graph->edges()) {
            mask(static_cast<Eigen::Index>(e.i), static_cast<Eigen::Index>(e.j)) = 1.0;
            mask(static_cast<Eigen::Index>(e.j), static_cast<Eigen::Index>(e.i)) = 1.0;
        }
        r.z = modified_z(r.delta, &r.stats, &mask);
    } else {
        r.z = modified_z(r.delta, &r.stats);
    }
    r.scores = node_scores(r.z);
    r.classification = classify(r.scores, labels);
    return r;
}

std::string_view to_string(PairScope s) { return s == PairScope::AllPairs ? "all" : "edges"; }

PairScope pair_scope_from_string(std::string_view s) {
    if (s == "all") return PairScope::AllPairs;
    if (s == "edges") return PairScope::Edges;
    throw ValidationError("unknown pair scope '" + std::string(s) + "' (expected all|edges)");
}

} // namespace geoalign
