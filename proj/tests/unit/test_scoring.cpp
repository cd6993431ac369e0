#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geoalign/errors.hpp"
#include "geoalign/scoring.hpp"
#include "support.hpp"

using namespace geoalign;
using testsupport::random_matrix;
using testsupport::rel_err;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double num = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j)
            if (y[i] == 1 && y[j] == 0) {
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                cnt += 1.0;
            }
    return num / cnt;
}

double brute_f1(const std::vector<int>& p, const std::vector<int>& y) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        tp += p[i] && y[i];
        fp += p[i] && !y[i];
        fn += !p[i] && y[i];
    }
    return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

// pair-counting form of the adjusted Rand index
double brute_ari(const std::vector<int>& a, const std::vector<int>& b) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            n11 += sa && sb;
            n10 += sa && !sb;
            n01 += !sa && sb;
            n00 += !sa && !sb;
        }
    const double den = (n00 + n01) * (n01 + n11) + (n00 + n10) * (n10 + n11);
    return den == 0.0 ? 1.0 : 2.0 * (n00 * n11 - n01 * n10) / den;
}

Eigen::MatrixXd symmetric_random(int n, std::mt19937_64& rng) {
    Eigen::MatrixXd m = random_matrix(n, n, rng);
    m = (m + m.transpose()).eval();
    m.diagonal().setZero();
    return m;
}

} // namespace

TEST_SUITE("scoring") {

TEST_CASE("delta: equal matrices floor, e gives 1, elementwise oracle") {
    std::mt19937_64 rng(1);
    const Eigen::MatrixXd d = symmetric_random(5, rng).cwiseAbs();
    const Eigen::MatrixXd eq = delta_matrix(d, d);
    CHECK((eq.array() == std::log(kDeltaFloor)).all());
    Eigen::MatrixXd d2 = d;
    d2(1, 3) += std::numbers::e;
    d2(3, 1) += std::numbers::e;
    CHECK(delta_matrix(d, d2)(1, 3) == doctest::Approx(1.0).epsilon(1e-14));
    const Eigen::MatrixXd r = symmetric_random(5, rng).cwiseAbs();
    const Eigen::MatrixXd dl = delta_matrix(d, r);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(dl(i, j) == doctest::Approx(std::log(std::max(std::abs(d(i, j) - r(i, j)), kDeltaFloor))).epsilon(1e-14));
    CHECK_THROWS_AS(delta_matrix(d, Eigen::MatrixXd::Zero(4, 4)), ValidationError);
}

TEST_CASE("median: odd, even") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
    CHECK_THROWS(median({}));
}

TEST_CASE("modified z: the {1,2,3,4,100} hand case") {
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(4, 4);
    Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(4, 4);
    const double vals[] = {1, 2, 3, 4, 100};
    int k = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            if (k == 5) {
                mask(i, j) = mask(j, i) = 0.0;
                continue;
            }
            delta(i, j) = delta(j, i) = vals[k++];
        }
    ZStatistics st;
    const Eigen::MatrixXd z = modified_z(delta, &st, &mask);
    CHECK(st.median == 3.0);
    CHECK(st.mad == 1.0);
    CHECK(st.sample_size == 5);
    CHECK(std::abs(z(1, 3) - 65.4265) <= 1e-6); // the 100 entry
    CHECK(z(3, 1) == z(1, 3));
    CHECK(z(2, 3) == 0.0);                     // masked out
}

TEST_CASE("modified z: constant delta is the MAD-floor degeneracy") {
    const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(5, 5, -2.0);
    CHECK(modified_z(c).isZero(0.0));
    CHECK(node_scores(modified_z(c)).isZero(0.0));
    CHECK_THROWS_AS(modified_z(Eigen::MatrixXd::Zero(2, 2)), ValidationError);
}

TEST_CASE("modified z: location invariance and scale equivariance") {
    std::mt19937_64 rng(2);
    for (int n = 3; n <= 8; ++n) {
        const Eigen::MatrixXd d = symmetric_random(n, rng);
        ZStatistics st;
        const Eigen::MatrixXd z = modified_z(d, &st);
        const Eigen::MatrixXd shifted = (d.array() + 7.25).matrix();
        CHECK(rel_err(modified_z(shifted), z) <= 1e-12);
        const Eigen::MatrixXd scaled = (st.median + 3.0 * (d.array() - st.median)).matrix();
        CHECK(rel_err(modified_z(scaled), z) <= 1e-12);
        CHECK((z - z.transpose()).norm() == 0.0);
        CHECK(z.diagonal().isZero(0.0));
    }
}

TEST_CASE("node scores: row sums") {
    Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(4, 4);
    ones.diagonal().setZero();
    CHECK((node_scores(ones).array() == 3.0).all());
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd z = symmetric_random(7, rng);
    const Eigen::VectorXd s = node_scores(z);
    for (int i = 0; i < 7; ++i) {
        double ref = 0.0;
        for (int j = 0; j < 7; ++j)
            if (j != i) ref += z(i, j);
        CHECK(s(i) == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("ranking by S is invariant to positive affine maps of Z") {
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd z = symmetric_random(9, rng);
    Eigen::MatrixXd z2 = (2.5 * z.array() + 1.0).matrix();
    z2.diagonal().setZero();
    const Eigen::VectorXd a = node_scores(z), b = node_scores(z2);
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) CHECK((a(i) < a(j)) == (b(i) < b(j)));
}

TEST_CASE("classify: perfect, reversed, random") {
    const std::vector<int> y{0, 0, 0, 1, 1};
    const Eigen::VectorXd up = Eigen::VectorXd::LinSpaced(5, 0, 4);
    const Classification c = classify(up, y);
    CHECK(*c.auc == 1.0);
    CHECK(*c.f1 == 1.0);
    CHECK(*c.ari == 1.0);
    CHECK(c.predicted == y);
    CHECK(*roc_auc(-up, y) == 0.0);
    CHECK_FALSE(roc_auc(up, {1, 1, 1, 1, 1}).has_value());

    std::mt19937_64 rng(5);
    const int n = 20000;
    std::vector<int> lab(n);
    std::bernoulli_distribution b(0.14);
    for (auto& l : lab) l = b(rng);
    const Eigen::VectorXd s = random_matrix(n, 1, rng).col(0);
    const double pos = std::count(lab.begin(), lab.end(), 1), neg = n - pos;
    const double se = std::sqrt((pos + neg + 1) / (12 * pos * neg));
    CHECK(std::abs(*roc_auc(s, lab) - 0.5) <= 4 * se);
}

TEST_CASE("metrics: exhaustive brute-force agreement up to N = 6") {
    long checked = 0;
    for (int n = 2; n <= 6; ++n) {
        int pow3 = 1;
        for (int k = 0; k < n; ++k) pow3 *= 3;
        for (int lm = 0; lm < (1 << n); ++lm) {
            std::vector<int> y(n);
            for (int k = 0; k < n; ++k) y[k] = (lm >> k) & 1;
            const bool both = lm != 0 && lm != (1 << n) - 1;
            for (int sm = 0; sm < pow3; ++sm) {
                std::vector<double> s(n);
                for (int k = 0, r = sm; k < n; ++k, r /= 3) s[k] = r % 3;
                const Eigen::VectorXd sv = Eigen::Map<Eigen::VectorXd>(s.data(), n);
                const Classification c = classify(sv, y);
                if (both) {
                    REQUIRE(c.auc.has_value());
                    CHECK(std::abs(*c.auc - brute_auc(s, y)) <= 1e-12);
                } else {
                    CHECK_FALSE(c.auc.has_value());
                }
                // best F1 over distinct cut-points, highest cut-point on ties
                std::vector<double> cuts = s;
                std::sort(cuts.rbegin(), cuts.rend());
                double best = -1.0;
                std::vector<int> best_pred;
                for (double t : cuts) {
                    std::vector<int> p(n);
                    for (int k = 0; k < n; ++k) p[k] = s[k] >= t;
                    const double f = brute_f1(p, y);
                    if (f > best) {
                        best = f;
                        best_pred = p;
                    }
                }
                CHECK(std::abs(*c.f1 - best) <= 1e-12);
                CHECK(c.predicted == best_pred);
                CHECK(std::abs(*c.ari - brute_ari(best_pred, y)) <= 1e-12);
                CHECK(std::abs(adjusted_rand_index(y, best_pred) - brute_ari(y, best_pred)) <= 1e-12);
                ++checked;
            }
        }
    }
    CHECK(checked > 40000);
}

TEST_CASE("classify: without labels flags robust outliers only") {
    Eigen::VectorXd s(8);
    s << 1.0, 1.1, 0.9, 1.05, 0.95, 1.0, 9.0, 1.02;
    const Classification c = classify(s, std::nullopt);
    CHECK(c.predicted == std::vector<int>{0, 0, 0, 0, 0, 0, 1, 0});
    CHECK_FALSE(c.f1.has_value());
    const Classification flat = classify(Eigen::VectorXd::Zero(5), std::nullopt);
    CHECK(std::count(flat.predicted.begin(), flat.predicted.end(), 1) == 0);
    CHECK_THROWS_AS(classify(s, std::vector<int>{0, 1}), ValidationError);
    CHECK_THROWS_AS(classify(s, std::vector<int>{0, 2, 0, 0, 0, 0, 0, 0}), ValidationError);
}

TEST_CASE("recon error scores: per-node NLL, zero case, permutation equivariance") {
    Architecture arch;
    arch.encoder_hidden = {5};
    arch.decoder_hidden = {5};
    std::mt19937_64 rng(6);
    VaeModel m = VaeModel::create(arch, 3, rng);
    const Eigen::MatrixXd x = random_matrix(7, 3, rng);
    const Eigen::VectorXd s = recon_error_scores(m, x);
    const Encoding e = encode(m, x.transpose());
    for (int i = 0; i < 7; ++i) {
        const Eigen::VectorXd mu = m.dec_mu.evaluate(Eigen::VectorXd(e.mu.col(i)));
        const Eigen::VectorXd s2 = m.dec_logvar.evaluate(Eigen::VectorXd(e.mu.col(i))).array().exp();
        CHECK(s(i) == doctest::Approx(gaussian_nll(x.row(i).transpose(), mu, s2)).epsilon(1e-13));
    }
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + 7, rng);
    const Eigen::VectorXd sp = recon_error_scores(m, perm * x);
    CHECK(rel_err(sp, Eigen::VectorXd(perm * s)) <= 1e-14);

    // decoder reproducing x exactly with variance 1/(2 pi)
    const Eigen::Vector3d row(0.2, -0.5, 1.5);
    auto& mo = m.dec_mu.layer(m.dec_mu.depth() - 1);
    mo.weight.setZero();
    mo.bias = row;
    auto& lo = m.dec_logvar.layer(m.dec_logvar.depth() - 1);
    lo.weight.setZero();
    lo.bias.setConstant(-std::log(2 * std::numbers::pi));
    CHECK(std::abs(recon_error_scores(m, Eigen::MatrixXd(row.transpose()))(0)) <= 1e-14);
}

TEST_CASE("distortion report: identical snapshots give zero Z; edge scope masks") {
    std::mt19937_64 rng(7);
    const Eigen::MatrixXd d = symmetric_random(6, rng).cwiseAbs();
    const DistortionReport same = distortion_report(d, d, std::vector<int>{0, 0, 1, 0, 1, 0});
    CHECK(same.z.isZero(0.0));
    CHECK(same.scores.isZero(0.0));

    const Eigen::MatrixXd d2 = d + symmetric_random(6, rng).cwiseAbs();
    const AttributedGraph g(6, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {4, 5, 1.0}}, Eigen::MatrixXd::Zero(6, 1));
    const DistortionReport r = distortion_report(d, d2, std::nullopt, PairScope::Edges, &g);
    CHECK(r.stats.sample_size == 4);
    CHECK(r.z(0, 2) == 0.0);
    CHECK_THROWS_AS(distortion_report(d, d2, std::nullopt, PairScope::Edges, nullptr), ValidationError);
}

}
