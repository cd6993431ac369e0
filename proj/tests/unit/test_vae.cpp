#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geoalign/errors.hpp"
#include "geoalign/vae.hpp"
#include "support.hpp"

using namespace geoalign;
using testsupport::random_matrix;
using testsupport::rel_err;

namespace {

VaeModel toy_model(std::uint64_t seed, int data_dim = 4, int latent = 2) {
    Architecture arch;
    arch.encoder_hidden = {6};
    arch.decoder_hidden = {5};
    arch.latent_dim = latent;
    std::mt19937_64 rng(seed);
    VaeModel m = VaeModel::create(arch, data_dim, rng);
    // nonzero biases so no unit sits at a kink by construction
    std::normal_distribution<double> nd(0.0, 0.2);
    for (Mlp* net : {&m.enc_trunk, &m.enc_mu, &m.enc_logvar, &m.dec_mu, &m.dec_logvar})
        for (std::size_t k = 0; k < net->depth(); ++k)
            for (Eigen::Index i = 0; i < net->layer(k).bias.size(); ++i) net->layer(k).bias(i) = nd(rng);
    return m;
}

} // namespace

TEST_SUITE("vae") {

TEST_CASE("encode: zero heads give zero posterior parameters") {
    VaeModel m = toy_model(1);
    for (Mlp* h : {&m.enc_mu, &m.enc_logvar}) {
        auto& last = h->layer(h->depth() - 1);
        last.weight.setZero();
        last.bias.setZero();
    }
    std::mt19937_64 rng(2);
    const Encoding e = encode(m, random_matrix(4, 6, rng));
    CHECK(e.mu.isZero(0.0));
    CHECK(e.logvar.isZero(0.0));
}

TEST_CASE("encode: matches a forward oracle and is repeatable") {
    const VaeModel m = toy_model(3);
    std::mt19937_64 rng(4);
    const Eigen::MatrixXd x = random_matrix(4, 5, rng);
    const Encoding e = encode(m, x);
    const Eigen::MatrixXd h = m.enc_trunk.evaluate(x);
    CHECK(rel_err(e.mu, m.enc_mu.evaluate(h)) < 1e-14);
    CHECK(rel_err(e.logvar, m.enc_logvar.evaluate(h)) < 1e-14);
    const Encoding again = encode(m, x);
    CHECK((again.mu.array() == e.mu.array()).all());
}

TEST_CASE("reparameterize: closed cases") {
    const Eigen::Vector2d mu(0.5, -1.0), lv(0.3, -0.7), n(1.2, -0.4);
    CHECK((reparameterize(mu, lv, Eigen::Vector2d::Zero()) - mu).norm() == 0.0);
    CHECK((reparameterize(mu, Eigen::Vector2d::Zero(), n) - (mu + n)).norm() == 0.0);
}

TEST_CASE("reparameterize: Monte-Carlo mean within 3 sigma / sqrt(n)") {
    const Eigen::Vector2d mu(0.5, -1.0), lv(0.3, -0.7);
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    const int n = 100000;
    Eigen::Vector2d acc = Eigen::Vector2d::Zero();
    for (int k = 0; k < n; ++k) acc += reparameterize(mu, lv, Eigen::Vector2d(nd(rng), nd(rng)));
    acc /= n;
    for (int j = 0; j < 2; ++j)
        CHECK(std::abs(acc(j) - mu(j)) <= 3.0 * std::exp(0.5 * lv(j)) / std::sqrt(double(n)));
}

TEST_CASE("reparameterize: pathwise derivatives") {
    const Eigen::Vector2d mu(0.5, -1.0), lv(0.3, -0.7), n(1.2, -0.4);
    const double h = 1e-6;
    for (int j = 0; j < 2; ++j) {
        Eigen::Vector2d mp = mu, mm = mu, lp = lv, lm = lv;
        mp(j) += h;
        mm(j) -= h;
        lp(j) += h;
        lm(j) -= h;
        const Eigen::VectorXd dmu = (reparameterize(mp, lv, n) - reparameterize(mm, lv, n)) / (2 * h);
        const Eigen::VectorXd dlv = (reparameterize(mu, lp, n) - reparameterize(mu, lm, n)) / (2 * h);
        for (int k = 0; k < 2; ++k) {
            CHECK(dmu(k) == doctest::Approx(j == k ? 1.0 : 0.0).epsilon(1e-8));
            const double expect = j == k ? 0.5 * std::exp(0.5 * lv(j)) * n(j) : 0.0;
            CHECK(std::abs(dlv(k) - expect) < 1e-8);
        }
    }
}

TEST_CASE("gaussian_nll: closed cases and validation") {
    const Eigen::VectorXd x = Eigen::Vector3d(0.1, 2.0, -3.0);
    const Eigen::VectorXd s2 = Eigen::VectorXd::Constant(3, 1.0 / (2.0 * std::numbers::pi));
    CHECK(std::abs(gaussian_nll(x, x, s2)) < 1e-15);
    CHECK(gaussian_nll(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)) ==
          doctest::Approx(0.5 * std::log(2 * std::numbers::pi) + 0.5).epsilon(1e-15));
    CHECK(gaussian_nll(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)) ==
          doctest::Approx(1.4189).epsilon(1e-4));
    CHECK_THROWS_AS(gaussian_nll(x, x, Eigen::Vector3d(1.0, 0.0, 1.0)), ValidationError);
    CHECK_THROWS_AS(gaussian_nll(x, x, Eigen::Vector3d(1.0, -1.0, 1.0)), ValidationError);
}

TEST_CASE("gaussian_nll: matches naive summation") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    for (int t = 0; t < 20; ++t) {
        const Eigen::VectorXd x = random_matrix(7, 1, rng), m = random_matrix(7, 1, rng);
        Eigen::VectorXd s2(7);
        for (int j = 0; j < 7; ++j) s2(j) = u(rng);
        double ref = 0.0;
        for (int j = 0; j < 7; ++j)
            ref += 0.5 * std::log(2 * std::numbers::pi * s2(j)) + (x(j) - m(j)) * (x(j) - m(j)) / (2 * s2(j));
        CHECK(gaussian_nll(x, m, s2) == doctest::Approx(ref).epsilon(1e-13));
    }
}

TEST_CASE("kl_divergence: closed cases and naive formula") {
    CHECK(kl_divergence(Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()) == 0.0);
    CHECK(kl_divergence(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)) == 0.5);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        const Eigen::VectorXd m = random_matrix(3, 1, rng), l = random_matrix(3, 1, rng);
        double ref = 0.0;
        for (int k = 0; k < 3; ++k) ref += 0.5 * (std::exp(l(k)) + m(k) * m(k) - 1.0 - l(k));
        CHECK(kl_divergence(m, l) == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("anneal: presets hit their endpoints") {
    const auto lin = AnnealSchedule::linear_preset();
    CHECK(lin.weight(0) == 0.0);
    CHECK(lin.weight(600) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(lin.weight(1200) == 1.0);
    CHECK(lin.weight(5000) == 1.0);
    const auto sig = AnnealSchedule::sigmoid_preset();
    CHECK(std::abs(sig.weight(0) - 0.0) <= 1e-3);
    CHECK(std::abs(sig.weight(1500) - 2.0) <= 1e-3);
    CHECK(sig.weight(750) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(sig.weight(-1), ValidationError);
}

TEST_CASE("anneal: monotone non-decreasing") {
    for (const auto& s : {AnnealSchedule::linear_preset(), AnnealSchedule::sigmoid_preset(),
                          AnnealSchedule{AnnealSchedule::Kind::Sigmoid, 0.3, 0.7, 17}}) {
        double prev = s.weight(0);
        for (std::int64_t k = 1; k <= s.total_steps + 5; ++k) {
            const double w = s.weight(k);
            CHECK(w >= prev);
            prev = w;
        }
    }
}

TEST_CASE("phase1_loss: auxiliary terms off reduces to the summed NLL") {
    const VaeModel m = toy_model(8);
    std::mt19937_64 rng(9);
    const Eigen::MatrixXd x = random_matrix(4, 5, rng);
    const Eigen::MatrixXd noise = random_matrix(2, 5, rng);
    const Phase1Loss l = phase1_loss(m, x, {.kl_weight = 0.0, .lambda1 = 0.0, .lambda2 = 0.0}, noise);
    const Encoding e = encode(m, x);
    double ref = 0.0;
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const Eigen::VectorXd z = reparameterize(e.mu.col(i), e.logvar.col(i), noise.col(i));
        ref += gaussian_nll(x.col(i), m.dec_mu.evaluate(z), m.dec_logvar.evaluate(z).array().exp().matrix());
    }
    CHECK(l.total == doctest::Approx(ref).epsilon(1e-13));
    CHECK(l.nll == doctest::Approx(ref).epsilon(1e-13));
}

TEST_CASE("phase1_loss: penalties vanish for an exact, near-deterministic decoder") {
    VaeModel m = toy_model(10, 3);
    Eigen::Vector3d x(0.4, -1.1, 2.0);
    auto& mu_out = m.dec_mu.layer(m.dec_mu.depth() - 1);
    mu_out.weight.setZero();
    mu_out.bias = x;
    auto& lv_out = m.dec_logvar.layer(m.dec_logvar.depth() - 1);
    lv_out.weight.setZero();
    lv_out.bias.setConstant(-60.0);
    const Phase1Loss l = phase1_loss(m, Eigen::MatrixXd(x), {}, Eigen::MatrixXd::Zero(2, 1));
    CHECK(l.mean_variance_penalty == 0.0);
    CHECK(l.residual_variance_penalty < 1e-50);
}

TEST_CASE("phase1_loss: full gradient matches central differences") {
    double worst = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        VaeModel m = toy_model(100 + seed, 4);
        std::mt19937_64 rng(200 + seed);
        const Eigen::MatrixXd x = random_matrix(4, 5, rng);
        const Eigen::MatrixXd noise = random_matrix(2, 5, rng);
        const Phase1Weights w{.kl_weight = 0.7, .lambda1 = 1.3, .lambda2 = 0.8};
        const Phase1Loss l = phase1_loss(m, x, w, noise);
        auto f = [&] { return phase1_loss(m, x, w, noise).total; };
        auto enc = m.encoder_blocks();
        auto dec = m.decoder_blocks();
        const auto genc = l.grad.encoder_blocks();
        const auto gdec = l.grad.decoder_blocks();
        for (std::size_t b = 0; b < enc.size(); ++b)
            worst = std::max(worst, rel_err(genc[b].values, testsupport::central_diff(enc[b].values, f)));
        for (std::size_t b = 0; b < dec.size(); ++b)
            worst = std::max(worst, rel_err(gdec[b].values, testsupport::central_diff(dec[b].values, f)));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("phase1_loss: empty batch and negative lambdas are rejected") {
    const VaeModel m = toy_model(11);
    CHECK_THROWS_AS(phase1_loss(m, Eigen::MatrixXd(4, 0), {}, Eigen::MatrixXd(2, 0)), ValidationError);
    CHECK_THROWS_AS(phase1_loss(m, Eigen::MatrixXd::Zero(4, 1), {.lambda1 = -1.0}, Eigen::MatrixXd::Zero(2, 1)),
                    ValidationError);
}

TEST_CASE("train_phase1: zero epochs leaves the model and returns initial encodings") {
    const VaeModel m = toy_model(12);
    std::mt19937_64 rng(13);
    const Eigen::MatrixXd x = random_matrix(30, 4, rng);
    Phase1Config cfg;
    cfg.epochs = 0;
    const Phase1Result r = train_phase1(m, x, cfg);
    CHECK(r.trace.empty());
    CHECK(r.model.to_checkpoint(0, 0).networks.size() == m.to_checkpoint(0, 0).networks.size());
    for (std::size_t k = 0; k < m.dec_mu.depth(); ++k)
        CHECK((r.model.dec_mu.layer(k).weight.array() == m.dec_mu.layer(k).weight.array()).all());
    const LatentState init = encode_nodes(m, x);
    CHECK((r.latent.z_fixed.array() == init.mu.array()).all());
    CHECK((r.latent.mu.array() == init.mu.array()).all());
}

TEST_CASE("train_phase1: finite trace, NLL decreases, deterministic") {
    std::mt19937_64 rng(14);
    const Eigen::MatrixXd x = random_matrix(60, 4, rng);
    Phase1Config cfg;
    cfg.epochs = 200;
    cfg.anneal.total_steps = 200;
    cfg.seed = 5;
    const Phase1Result a = train_phase1(toy_model(15), x, cfg);
    const Phase1Result b = train_phase1(toy_model(15), x, cfg);
    REQUIRE(a.trace.size() == 200);
    for (const auto& t : a.trace) CHECK(std::isfinite(t.total));
    CHECK(a.trace.back().nll < a.trace.front().nll);
    for (std::size_t k = 0; k < a.trace.size(); ++k) CHECK(a.trace[k].total == b.trace[k].total);
    CHECK((a.latent.z_fixed.array() == a.latent.mu.array()).all());
}

TEST_CASE("train_phase1: non-finite attributes abort") {
    Eigen::MatrixXd x = Eigen::MatrixXd::Ones(10, 4);
    x(3, 2) = std::nan("");
    Phase1Config cfg;
    cfg.epochs = 3;
    CHECK_THROWS(train_phase1(toy_model(16), x, cfg));
}

}
