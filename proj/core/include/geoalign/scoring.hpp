#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "geoalign/graph.hpp"
#include "geoalign/vae.hpp"

namespace geoalign {

inline constexpr double kDeltaFloor = 1e-12;
inline constexpr double kModifiedZConstant = 0.6745;
inline constexpr double kUnlabeledZCut = 3.5;

// log(max(|D1 - D2|, eps)), elementwise.
Eigen::MatrixXd delta_matrix(const Eigen::MatrixXd& d1, const Eigen::MatrixXd& d2,
                             double eps = kDeltaFloor);

// Median of a sample; even lengths average the two central values.
double median(std::vector<double> values);

struct ZStatistics {
    double median = 0.0;
    double mad = 0.0;
    std::size_t sample_size = 0;
};

// Modified Z-scores over the off-diagonal upper triangle, mirrored; diagonal is zero.
// When `mask` is given only pairs with mask(i, j) != 0 enter the statistics and receive a
// score, all other entries are zero. MAD == 0 yields Z == 0.
Eigen::MatrixXd modified_z(const Eigen::MatrixXd& delta, ZStatistics* stats = nullptr,
                           const Eigen::MatrixXd* mask = nullptr);

// Row sums excluding the diagonal.
Eigen::VectorXd node_scores(const Eigen::MatrixXd& z);

// Mann-Whitney AUC with average ranks for ties; empty when labels are single-class.
std::optional<double> roc_auc(const Eigen::VectorXd& scores, const std::vector<int>& labels);

double f1_score(const std::vector<int>& predicted, const std::vector<int>& labels);
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

struct Classification {
    double threshold = 0.0; // predict anomalous when score >= threshold
    std::vector<int> predicted;
    std::optional<double> auc;
    std::optional<double> f1;
    std::optional<double> ari;
};

// AUC threshold-free; F1 and ARI at the observed score value that maximizes F1.
// Without labels, nodes whose modified Z of S exceeds kUnlabeledZCut are flagged.
Classification classify(const Eigen::VectorXd& scores, const std::optional<std::vector<int>>& labels);

// Per-node Gaussian NLL of the attributes (N x D) under the decoder at the posterior mean.
Eigen::VectorXd recon_error_scores(const VaeModel& model, const Eigen::MatrixXd& attributes);

enum class PairScope { AllPairs, Edges };

struct DistortionReport {
    Eigen::MatrixXd delta;
    Eigen::MatrixXd z;
    Eigen::VectorXd scores;
    ZStatistics stats;
    Classification classification;
};

DistortionReport distortion_report(const Eigen::MatrixXd& d_phase1, const Eigen::MatrixXd& d_phase2,
                                   const std::optional<std::vector<int>>& labels,
                                   PairScope scope = PairScope::AllPairs,
                                   const AttributedGraph* graph = nullptr);

std::string_view to_string(PairScope s);
PairScope pair_scope_from_string(std::string_view s);

} // namespace geoalign
