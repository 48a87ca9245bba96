#pragma once

#include "fetl/embednet.hpp"
#include "fetl/synthdata.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fetl {

struct TaskDescriptor {
  std::string name;
  Eigen::VectorXd metadata;
  Dataset data;

  void validate() const;
};

TaskDescriptor describe(const FamilyTask& task);

// ---- similarity ------------------------------------------------------------

/// Median of the pairwise Euclidean distances within the pooled rows of a and b
/// (1 when that median is zero).
double median_heuristic_bandwidth(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Biased squared MMD with kernel exp(-|x-y|^2 / (2 sigma^2)); rows are samples.
/// Without a bandwidth the median heuristic is used. Clamped at zero.
double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::optional<double> bandwidth = std::nullopt);

/// Cosine of the angle between a and b.
double metadata_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Maps a dataset to one row of features per sample.
using Extractor = std::function<Eigen::MatrixXd(const Dataset&)>;

/// Raw feature vectors; every sample must be complete.
Eigen::MatrixXd raw_features(const Dataset& data);
/// Pooled codes of a trained trunk (works with missing features).
Extractor pooled_code_extractor(const FeatureTrunk& trunk);

struct GateThresholds {
  double feature = 0.5;
  double metadata = 0.9;
  /// When set, exp(-mmd2) on the targets must also reach this value.
  std::optional<double> label;
};

struct GateResult {
  double feature_mmd2 = 0;
  double feature_similarity = 0;  // exp(-feature_mmd2)
  std::optional<double> label_similarity;
  double metadata_similarity = 0;
  bool gate_decision = false;
};

/// Without an extractor the raw feature vectors are compared.
GateResult when_to_transfer(const TaskDescriptor& source, const TaskDescriptor& target,
                            const GateThresholds& thresholds = {}, const Extractor& extractor = {});

// ---- parameter transfer ----------------------------------------------------

enum class Freeze { none, trunk, head_only_trainable };
std::string to_string(Freeze f);
Freeze freeze_from_string(const std::string& name);

struct FineTuneConfig {
  Freeze freeze = Freeze::none;
  OptimizerConfig optimizer{OptimizerConfig::Kind::adam, 3e-3};
  std::int64_t steps = 300;
  Index batch_size = 32;
  std::uint64_t seed = 0;
};

struct FineTuneResult {
  FeatureEmbeddingModel model;
  FeatureEmbeddingModel baseline;
  TrainingTrace trace;
  TrainingTrace baseline_trace;
  double transferred_val_loss = 0;
  double baseline_val_loss = 0;
  bool negative_transfer = false;
};

/// Continues training a copy of `source` on the target data. The baseline is a
/// fresh model with the source architecture, trained on all parameters with the
/// same seed and step budget.
FineTuneResult fine_tune(const FeatureEmbeddingModel& source, const Dataset& target_train, const Dataset& target_val,
                         const FineTuneConfig& config);

struct HardSharedModel {
  FeatureTrunk trunk;
  std::vector<Mlp<double>> heads;
  std::vector<std::string> task_names;
  std::vector<TrainingTrace> traces;
  EmbedNetConfig config;

  /// Single-task view (trunk copy plus that task's head).
  FeatureEmbeddingModel view(std::size_t task) const;
};

/// One trunk shared by every task and one head per task, trained jointly.
/// Each task is split with config.train_fraction; a single task reproduces train().
HardSharedModel train_hard_shared(std::span<const TaskDescriptor> tasks, const EmbedNetConfig& config);

// ---- instance transfer -----------------------------------------------------

struct ReweightConfig {
  double ridge = 1e-3;
  int max_iterations = 50;
  double clip_min = 0.05;
  double clip_max = 20.0;
};

/// Density-ratio weights for source samples from a logistic classifier that
/// separates source (0) from target (1) codes. Clipped, then scaled to mean 1.
std::vector<double> instance_reweight(const Dataset& source, const Dataset& target, const Extractor& extractor,
                                      const ReweightConfig& config = {});

// ---- feature-representation transfer ----------------------------------------

struct AutoencoderConfig {
  Index bottleneck = 2;
  std::vector<Index> hidden{32};
  Activation activation = Activation::tanh;
  OptimizerConfig optimizer{OptimizerConfig::Kind::adam, 3e-3};
  int epochs = 200;
  Index batch_size = 32;
  std::uint64_t seed = 0;
};

/// Input is the zero-filled feature vector followed by the K mask bits.
struct Autoencoder {
  Mlp<double> encoder;  // 2K -> ... -> bottleneck
  Mlp<double> decoder;  // bottleneck -> ... -> K

  Index feature_count() const { return decoder.output_size(); }
  Index bottleneck() const { return encoder.output_size(); }
  void validate() const;
};

Autoencoder make_autoencoder(Index feature_count, const AutoencoderConfig& config);
/// Trains on reconstruction error over observed entries only. Returns the per-epoch loss.
std::vector<double> autoencoder_train(Autoencoder& ae, const Dataset& data, const AutoencoderConfig& config);
Autoencoder autoencoder_fit(const Dataset& data, const AutoencoderConfig& config);

Eigen::VectorXd autoencoder_input(const MaskedSample& sample);
Eigen::VectorXd autoencoder_encode(const Autoencoder& ae, const MaskedSample& sample);
Eigen::VectorXd autoencoder_reconstruct(const Autoencoder& ae, const MaskedSample& sample);
/// Mean squared reconstruction error over observed entries.
double reconstruction_mse(const Autoencoder& ae, const Dataset& data);
Extractor autoencoder_extractor(const Autoencoder& ae);

// ---- scenarios ---------------------------------------------------------------

/// argmax of metadata cosine; ties go to the lexicographically smallest name.
std::size_t select_source(std::span<const TaskDescriptor> sources, const Eigen::VectorXd& target_metadata);

struct TransferReport {
  std::string source_name;
  std::string target_name;
  GateResult gate;
  bool transfer_performed = false;
  std::optional<double> baseline_val_loss;
  std::optional<double> transferred_val_loss;
  bool negative_transfer = false;
  std::string note;
};

nlohmann::ordered_json to_json(const TransferReport& report);

struct ZeroShotResult {
  std::size_t chosen = 0;
  std::vector<double> similarities;  // aligned with the source list
  Eigen::VectorXd predictions;
};

/// Picks a source by metadata and applies its model unchanged to the target.
ZeroShotResult zero_shot(std::span<const TaskDescriptor> sources, std::span<const FeatureEmbeddingModel> models,
                         const TaskDescriptor& target);

struct FewShotResult {
  std::size_t chosen = 0;
  FineTuneResult tuned;
  TransferReport report;
};

/// zero_shot selection, then fine_tune on the labeled target samples.
FewShotResult few_shot(std::span<const TaskDescriptor> sources, std::span<const FeatureEmbeddingModel> models,
                       const TaskDescriptor& target_train, const Dataset& target_val, const FineTuneConfig& config);

enum class ScenarioMode { zero_shot, few_shot };

struct ExperimentSpec {
  std::size_t n_tasks = 5;
  double perturbation_scale = 0.1;
  ScenarioMode mode = ScenarioMode::few_shot;
  std::size_t n_target_samples = 25;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::size_t source_samples = 1000;
  std::size_t validation_samples = 500;
  double p_miss = kBenchmarkMissingRate;
  TargetForm form = TargetForm::symmetric;
  GateThresholds thresholds;
  EmbedNetConfig embednet;
  FineTuneConfig fine_tune;
};

/// Reads `{"family":{"n_tasks","perturbation_scale"},"mode","n_target_samples","seeds",...}`.
/// Unknown keys raise ConfigError.
ExperimentSpec experiment_from_json(const nlohmann::json& j, const ExperimentSpec& defaults = {});

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::vector<std::string> source_names;
  std::vector<double> metadata_similarities;
  TransferReport report;
};

struct ExperimentResult {
  std::vector<SeedOutcome> seeds;
  std::size_t transfers_performed = 0;
  std::size_t negative_transfers = 0;
  std::optional<double> median_improvement_ratio;  // median of transferred / baseline
  std::optional<double> median_transferred_val_loss;
  std::optional<double> median_baseline_val_loss;
};

/// Per seed: a task family, a held-out target task, source selection, gate,
/// and the chosen scenario. Only the selected source model is trained.
ExperimentResult run_experiment(const ExperimentSpec& spec);
nlohmann::ordered_json to_json(const ExperimentResult& result, const ExperimentSpec& spec);

}  // namespace fetl
