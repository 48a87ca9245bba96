#pragma once

#include "fetl/embednet.hpp"
#include "fetl/synthdata.hpp"
#include "fetl/transfer.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace fetl {

using Labels = Eigen::Array<bool, Eigen::Dynamic, 1>;

struct ExtractOptions {
  /// Append the fraction of absent features as one extra coordinate.
  bool append_missing_fraction = false;
};

/// Pooled (pre-head) representation of a sample.
Eigen::VectorXd extract_features(const FeatureEmbeddingModel& model, const MaskedSample& sample,
                                 const ExtractOptions& options = {});
/// One row per sample.
Eigen::MatrixXd extract_features(const FeatureEmbeddingModel& model, const Dataset& data,
                                 const ExtractOptions& options = {});

enum class MonMode { mahalanobis, knn };
std::string to_string(MonMode mode);
MonMode mon_mode_from_string(const std::string& name);

struct MonConfig {
  MonMode mode = MonMode::mahalanobis;
  double lambda = 1e-4;
  Index k = 5;
};

struct ModelOfNormality {
  MonMode mode = MonMode::mahalanobis;
  double lambda = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // sample covariance (n - 1) plus lambda I
  Eigen::LLT<Eigen::MatrixXd> factor;
  Eigen::MatrixXd gallery;  // knn: one normal code per row
  Index k = 0;

  Index dim() const { return mode == MonMode::mahalanobis ? mean.size() : gallery.cols(); }
};

/// Rows of `normal_codes` are anomaly-free codes.
ModelOfNormality fit_mon(const Eigen::MatrixXd& normal_codes, const MonConfig& config = {});

/// Mahalanobis distance to the mean, or mean distance to the k nearest gallery codes.
double score(const ModelOfNormality& mon, const Eigen::VectorXd& code);
Eigen::VectorXd score_rows(const ModelOfNormality& mon, const Eigen::MatrixXd& codes);

/// Linearly interpolated empirical quantile at position (n - 1) q of the sorted values.
double empirical_quantile(std::vector<double> values, double q);
double calibrate_threshold(const ModelOfNormality& mon, const Eigen::MatrixXd& heldout_normal_codes, double q = 0.99);

struct AnomalyDecision {
  double score = 0;
  double threshold = 0;
  bool is_anomaly = false;
};

std::vector<AnomalyDecision> detect(const ModelOfNormality& mon, double threshold, const Dataset& samples,
                                    const FeatureEmbeddingModel& extractor, const ExtractOptions& options = {});
std::vector<AnomalyDecision> detect(const ModelOfNormality& mon, double threshold, const Dataset& samples,
                                    const Extractor& extractor);

/// extract_features() as an Extractor.
Extractor embedding_extractor(const FeatureEmbeddingModel& model, const ExtractOptions& options = {});

/// Rank-statistic AUC; tied scores share their mean rank.
double roc_auc(std::span<const double> scores, const Labels& truth);

struct DetectionMetrics {
  double auc = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t true_negatives = 0;
  std::size_t false_negatives = 0;
};

DetectionMetrics evaluate(std::span<const AnomalyDecision> decisions, const Labels& truth);

struct Injection {
  Dataset data;
  Labels labels;
};

/// Each sample is selected with probability `fraction`; selected samples get
/// their observed features of group `group` shifted by shift_sd times that
/// feature's standard deviation over the observed values of `data`.
Injection inject_anomalies(const Dataset& data, double fraction, double shift_sd, Rng& rng, int group = 1);

struct DetectionExperimentConfig {
  std::size_t fit_samples = 1000;
  std::size_t calibration_samples = 1000;
  std::size_t test_samples = 2000;
  std::size_t fresh_normal_samples = 2000;
  double anomaly_fraction = 0.05;
  double shift_sd = 3.0;
  double quantile = 0.99;
  double p_miss = kBenchmarkMissingRate;
  MonConfig mon;
  std::uint64_t seed = 0;
};

struct DetectionReport {
  DetectionExperimentConfig config;
  double threshold = 0;
  std::vector<AnomalyDecision> decisions;
  Labels truth;
  DetectionMetrics metrics;
  double fresh_false_positive_rate = 0;
};

/// Normal data for fitting and calibration, an injected test set, and fresh
/// normals for the false-positive rate, all drawn from the benchmark task.
DetectionReport run_detection_experiment(const Extractor& extractor, const DetectionExperimentConfig& config);
nlohmann::ordered_json to_json(const DetectionReport& report);

}  // namespace fetl
