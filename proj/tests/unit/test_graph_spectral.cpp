#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "geoalign/errors.hpp"
#include "geoalign/spectral.hpp"
#include "geoalign/table_io.hpp"
#include "support.hpp"

using namespace geoalign;

namespace {

AttributedGraph path3() {
    return AttributedGraph(3, {{0, 1, 1.0}, {1, 2, 1.0}}, Eigen::MatrixXd::Zero(3, 1));
}

AttributedGraph random_graph(int n, double p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (u(rng) < p) edges.push_back({std::size_t(i), std::size_t(j), 0.1 + u(rng)});
    return AttributedGraph(std::size_t(n), edges, Eigen::MatrixXd::Zero(n, 2));
}

Eigen::VectorXd dense_eigenvalues(const Eigen::MatrixXd& l) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(l, Eigen::EigenvaluesOnly).eigenvalues();
}

} // namespace

TEST_SUITE("graph_spectral") {

TEST_CASE("graph: invariants are enforced") {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 1);
    CHECK_THROWS_AS(AttributedGraph(3, {{0, 0, 1.0}}, x), ValidationError);
    CHECK_THROWS_AS(AttributedGraph(3, {{0, 3, 1.0}}, x), ValidationError);
    CHECK_THROWS_AS(AttributedGraph(3, {{0, 1, -1.0}}, x), ValidationError);
    CHECK_THROWS_AS(AttributedGraph(3, {{0, 1, 1.0}, {1, 0, 1.0}}, x), ValidationError);
    CHECK_THROWS_AS(AttributedGraph(4, {}, x), ValidationError);
    CHECK_THROWS_AS(AttributedGraph(3, {}, x, std::vector<int>{1, 0}), ValidationError);

    const AttributedGraph g(3, {{2, 0, 0.5}}, x);
    CHECK(g.weight(0, 2) == 0.5);
    CHECK(g.weight(2, 0) == 0.5);
    CHECK(g.weight(1, 2) == 0.0);
    const Eigen::MatrixXd a = Eigen::MatrixXd(g.adjacency());
    CHECK((a - a.transpose()).norm() == 0.0);
    CHECK(a.diagonal().isZero(0.0));
}

TEST_CASE("laplacian: path-3 spectrum is {0, 1, 3}") {
    const Eigen::VectorXd ev = dense_eigenvalues(laplacian(path3()));
    CHECK(std::abs(ev(0) - 0.0) <= 1e-10);
    CHECK(std::abs(ev(1) - 1.0) <= 1e-10);
    CHECK(std::abs(ev(2) - 3.0) <= 1e-10);
    const SpectralBounds b = spectral_bounds(laplacian(path3()));
    CHECK(std::abs(b.lambda2 - 1.0) <= 1e-10);
    CHECK(std::abs(b.lambda_max - 3.0) <= 1e-10);
}

TEST_CASE("laplacian: empty graph is zero and has no spectral bounds") {
    const AttributedGraph g(4, {}, Eigen::MatrixXd::Zero(4, 1));
    CHECK(laplacian(g).isZero(0.0));
    CHECK_THROWS_AS(spectral_bounds(laplacian(g)), ValidationError);
}

TEST_CASE("laplacian: rows sum to zero, PSD on random vectors") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 5; ++t) {
        const AttributedGraph g = random_graph(25, 0.2, rng);
        const Eigen::MatrixXd l = laplacian(g);
        CHECK((l * Eigen::VectorXd::Ones(25)).cwiseAbs().maxCoeff() <= 1e-12);
        for (int k = 0; k < 100; ++k) {
            const Eigen::VectorXd v = testsupport::random_matrix(25, 1, rng);
            CHECK(v.dot(l * v) >= -1e-12);
        }
    }
}

TEST_CASE("spectral_bounds: disconnected graph skips the repeated zero") {
    // two triangles with different weights
    const AttributedGraph g(6,
                            {{0, 1, 1.0}, {1, 2, 1.0}, {0, 2, 1.0}, {3, 4, 2.0}, {4, 5, 2.0}, {3, 5, 2.0}},
                            Eigen::MatrixXd::Zero(6, 1));
    const Eigen::MatrixXd l = laplacian(g);
    const Eigen::VectorXd ev = dense_eigenvalues(l);
    CHECK(std::abs(ev(1)) < 1e-12);
    const SpectralBounds b = spectral_bounds(l);
    CHECK(b.lambda2 == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(b.lambda_max == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("spectral_bounds: dense oracle and eigen-residuals") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 5; ++t) {
        const Eigen::MatrixXd l = laplacian(random_graph(30, 0.3, rng));
        const Eigen::VectorXd ev = dense_eigenvalues(l);
        const double lmax = ev(ev.size() - 1);
        double l2 = 0.0;
        for (Eigen::Index k = 0; k < ev.size(); ++k)
            if (ev(k) > 1e-9 * lmax) {
                l2 = ev(k);
                break;
            }
        const SpectralBounds b = spectral_bounds(l);
        CHECK(std::abs(b.lambda2 - l2) <= 1e-8);
        CHECK(std::abs(b.lambda_max - lmax) <= 1e-8);
        CHECK((l * b.vector2 - b.lambda2 * b.vector2).norm() <= 1e-8 * b.vector2.norm());
        CHECK((l * b.vector_max - b.lambda_max * b.vector_max).norm() <= 1e-8 * b.vector_max.norm());
    }
}

TEST_CASE("normalized laplacian has spectrum in [0, 2]") {
    std::mt19937_64 rng(3);
    const Eigen::VectorXd ev = dense_eigenvalues(laplacian(random_graph(20, 0.3, rng), LaplacianKind::Normalized));
    CHECK(ev.minCoeff() >= -1e-12);
    CHECK(ev.maxCoeff() <= 2.0 + 1e-12);
}

TEST_CASE("heat_times: endpoints and log spacing") {
    const HeatTimeSchedule s = heat_times(1.0, 4.0);
    REQUIRE(s.times.size() == 15);
    CHECK(s.times.front() == 0.25);
    CHECK(s.times.back() == 4.0);
    const double ratio = s.times[1] / s.times[0];
    for (std::size_t k = 1; k < s.times.size(); ++k)
        CHECK(s.times[k] / s.times[k - 1] == doctest::Approx(ratio).epsilon(1e-12));
    CHECK(ratio == doctest::Approx(std::pow(16.0, 1.0 / 14.0)).epsilon(1e-12));
}

TEST_CASE("heat_times: equal eigenvalues and k = 2") {
    const HeatTimeSchedule s = heat_times(2.5, 2.5, 7);
    for (double t : s.times) CHECK((t >= 1.0 / 2.5 && t <= 4.0 / 2.5));
    const HeatTimeSchedule two = heat_times(1.0, 10.0, 2);
    REQUIRE(two.times.size() == 2);
    CHECK(two.times[0] == 0.1);
    CHECK(two.times[1] == 4.0);
    CHECK_THROWS_AS(heat_times(5.0, 1.0), ValidationError);
    CHECK_THROWS_AS(heat_times(0.0, 1.0), ValidationError);
}

TEST_CASE("table io: graph files round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "geoalign_unit_io";
    fs::create_directories(dir);
    std::mt19937_64 rng(4);
    const AttributedGraph g = random_graph(12, 0.4, rng);
    const Eigen::MatrixXd x = testsupport::random_matrix(12, 3, rng);
    write_edge_list(dir / "edges.csv", g.edges());
    write_matrix_csv(dir / "attributes.csv", x, "a,b,c");
    write_labels(dir / "labels.txt", std::vector<int>(12, 0));
    const AttributedGraph back = load_graph(dir / "edges.csv", dir / "attributes.csv", dir / "labels.txt");
    CHECK((back.attributes().array() == x.array()).all());
    REQUIRE(back.edge_count() == g.edge_count());
    for (std::size_t k = 0; k < g.edge_count(); ++k) {
        CHECK(back.edges()[k].i == g.edges()[k].i);
        CHECK(back.edges()[k].weight == g.edges()[k].weight);
    }
    {
        std::ofstream bad(dir / "bad_edges.csv");
        bad << "0,1\n";
    }
    CHECK_THROWS_AS(read_edge_list(dir / "bad_edges.csv"), ValidationError);
    CHECK_THROWS_AS(read_matrix_csv(dir / "missing.csv"), IoError);
    fs::remove_all(dir);
}

}
