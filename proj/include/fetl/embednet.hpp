#pragma once

#include "fetl/numcore.hpp"
#include "fetl/synthdata.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fetl {

struct OptimizerConfig {
  enum class Kind { adam, sgd };
  Kind kind = Kind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Decoupled (AdamW-style) decay applied as p -= lr * weight_decay * p.
  double weight_decay = 0.0;

  bool operator==(const OptimizerConfig&) const = default;
};

/// Adam or SGD over a fixed list of parameter blocks; keeps Adam moments between steps.
class Optimizer {
public:
  explicit Optimizer(const OptimizerConfig& cfg);
  void step(std::vector<ParamBlock<double>> params, const std::vector<Eigen::VectorXd>& grads);

private:
  OptimizerConfig cfg_;
  AdamState<double> adam_;
};

struct EmbedNetConfig {
  Index embedding_dim = 2;
  std::vector<Index> encoder_hidden{32, 32};
  Index code_dim = 16;
  std::vector<Index> head_hidden{32};
  Activation activation = Activation::relu;
  OptimizerConfig optimizer{OptimizerConfig::Kind::adam, 3e-3};
  int epochs = 150;
  Index batch_size = 32;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  /// Decoupled decay on the embedding table only: E *= 1 - lr * embedding_decay per step.
  double embedding_decay = 10.0;

  void validate() const;
  bool operator==(const EmbedNetConfig&) const = default;
};

/// The parts shared by every feature: the embedding table (row i embeds
/// feature i) and the encoder applied to [embedding_i; value].
struct FeatureTrunk {
  Eigen::MatrixXd embedding_table;  // K x d_e
  Mlp<double> encoder;              // d_e + 1 -> hidden... -> d_code

  Index feature_count() const { return embedding_table.rows(); }
  Index embedding_dim() const { return embedding_table.cols(); }
  Index code_dim() const { return encoder.output_size(); }
  bool operator==(const FeatureTrunk& o) const {
    return embedding_table.rows() == o.embedding_table.rows() && embedding_table.cols() == o.embedding_table.cols() &&
           embedding_table == o.embedding_table && encoder == o.encoder;
  }
};

/// Per-feature encoder, masked mean pooling over present features, and a
/// prediction head on the pooled code.
struct FeatureEmbeddingModel {
  FeatureTrunk trunk;
  Mlp<double> head;  // d_code -> ... -> 1
  EmbedNetConfig config;

  Index feature_count() const { return trunk.feature_count(); }
  Index code_dim() const { return trunk.code_dim(); }
  void validate() const;
  bool same_parameters(const FeatureEmbeddingModel& o) const { return trunk == o.trunk && head == o.head; }
};

/// Seeded initialization (config.seed). Embedding rows are Xavier-uniform over
/// +-sqrt(6 / (K + d_e)).
FeatureEmbeddingModel make_model(Index feature_count, const EmbedNetConfig& config);

Eigen::VectorXd encode_feature(const FeatureTrunk& trunk, Index index, double value);
inline Eigen::VectorXd encode_feature(const FeatureEmbeddingModel& m, Index index, double value) {
  return encode_feature(m.trunk, index, value);
}

/// Mean of the columns of `codes` selected by `mask`.
Eigen::VectorXd masked_global_pool(const Eigen::MatrixXd& codes, const Mask& mask);

/// Pooled code of one sample (input to the head).
Eigen::VectorXd pooled_representation(const FeatureTrunk& trunk, const MaskedSample& sample);
inline Eigen::VectorXd pooled_representation(const FeatureEmbeddingModel& m, const MaskedSample& sample) {
  return pooled_representation(m.trunk, sample);
}

/// Pooled codes for every sample, one row per sample.
Eigen::MatrixXd pooled_codes(const FeatureTrunk& trunk, const Dataset& data);

double predict_pooled(const Mlp<double>& head, const Eigen::VectorXd& pooled);
double predict(const FeatureEmbeddingModel& model, const MaskedSample& sample);
Eigen::VectorXd predict(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data);
inline Eigen::VectorXd predict(const FeatureEmbeddingModel& m, const Dataset& data) {
  return predict(m.trunk, m.head, data);
}

/// Mean squared error of the model over `data` (or the given subset).
double evaluate_mse(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data,
                    std::span<const std::size_t> indices = {});
inline double evaluate_mse(const FeatureEmbeddingModel& m, const Dataset& data,
                           std::span<const std::size_t> indices = {}) {
  return evaluate_mse(m.trunk, m.head, data, indices);
}

struct TrunkGradients {
  Eigen::MatrixXd embedding_table;
  MlpGradients<double> encoder;
};

struct BatchResult {
  double loss = 0;
  TrunkGradients trunk;
  MlpGradients<double> head;
};

/// Weighted batch loss sum_b w_b (yhat_b - y_b)^2 / B and its gradients with
/// respect to every parameter. Empty `weights` means all ones; otherwise it is
/// indexed like `data.samples`.
BatchResult loss_and_gradients(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data,
                               std::span<const std::size_t> batch, std::span<const double> weights = {});

std::vector<ParamBlock<double>> parameter_blocks(FeatureTrunk& trunk);
std::vector<Eigen::VectorXd> gradient_blocks(const TrunkGradients& g);

/// All parameters flattened (embedding, encoder, head), and the inverse.
Eigen::VectorXd flatten_parameters(const FeatureEmbeddingModel& model);
void assign_parameters(FeatureEmbeddingModel& model, const Eigen::VectorXd& flat);
Eigen::VectorXd flatten_gradients(const BatchResult& g);

struct TrainingTrace {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  bool operator==(const TrainingTrace&) const = default;
};

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle split; both sides receive at least one sample.
DataSplit split_indices(std::size_t n, double train_fraction, std::uint64_t seed);

/// One task inside a (possibly multi-task) optimization run.
struct FitTask {
  const Dataset* train_data = nullptr;
  std::vector<std::size_t> train_indices;
  const Dataset* validation_data = nullptr;
  std::vector<std::size_t> validation_indices;
  std::vector<double> weights;  // empty = uniform, else indexed like train_data->samples
  Mlp<double>* head = nullptr;
};

struct FitSchedule {
  int epochs = 1;
  std::optional<std::int64_t> max_steps;
  bool update_trunk = true;
  bool update_head = true;
  OptimizerConfig optimizer;
  Index batch_size = 32;
  std::uint64_t seed = 0;
  double embedding_decay = 0.0;
};

/// Minibatch optimization of a shared trunk and one head per task. Each epoch
/// shuffles every task's training indices and visits their batches round-robin
/// across tasks. Returns one trace per task.
std::vector<TrainingTrace> fit(FeatureTrunk& trunk, std::span<FitTask> tasks, const FitSchedule& schedule);

FitSchedule schedule_from(const EmbedNetConfig& config);

/// 80/20 (config.train_fraction) split, minibatch training on MSE.
TrainingTrace train(FeatureEmbeddingModel& model, const Dataset& data, const EmbedNetConfig& config);
TrainingTrace train(FeatureEmbeddingModel& model, const Dataset& data);

/// Same as train() with per-sample loss weights (indexed like data.samples).
TrainingTrace weighted_train(FeatureEmbeddingModel& model, const Dataset& data, std::span<const double> weights,
                             const EmbedNetConfig& config);

struct EmbeddingTable {
  std::vector<int> feature_index;  // 1-based, matching the f1..fK column names
  std::vector<int> group_label;
  Eigen::MatrixXd coordinates;  // K x d_e
};

EmbeddingTable export_embeddings(const FeatureEmbeddingModel& model, const std::vector<int>& group_labels);
std::string embeddings_to_csv(const EmbeddingTable& table);

struct ClusterMetrics {
  double mean_within_group_dist = 0;
  double mean_between_group_dist = 0;
  double silhouette = 0;
};

/// Euclidean cluster statistics of the rows of `points` under `labels`.
ClusterMetrics embedding_cluster_metrics(const Eigen::MatrixXd& points, std::span<const int> labels);

}  // namespace fetl
