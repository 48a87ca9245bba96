#include "fetl/embednet.hpp"

#include "fetl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fetl {

void EmbedNetConfig::validate() const {
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
  if (code_dim < 1) throw ConfigError("code_dim must be positive");
  for (auto w : encoder_hidden)
    if (w < 1) throw ConfigError("encoder_hidden widths must be positive");
  for (auto w : head_hidden)
    if (w < 1) throw ConfigError("head_hidden widths must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (!(embedding_decay >= 0.0)) throw ConfigError("embedding_decay must be non-negative");
  if (!(optimizer.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be non-negative");
  if (!(optimizer.lr >= 0.0) || !std::isfinite(optimizer.lr)) throw ConfigError("optimizer.lr must be non-negative");
  if (optimizer.kind == OptimizerConfig::Kind::adam) {
    if (!(optimizer.beta1 > 0 && optimizer.beta1 < 1) || !(optimizer.beta2 > 0 && optimizer.beta2 < 1))
      throw ConfigError("optimizer betas must lie in (0, 1)");
    if (!(optimizer.eps > 0)) throw ConfigError("optimizer.eps must be positive");
  }
}

void FeatureEmbeddingModel::validate() const {
  if (trunk.feature_count() < 1 || trunk.embedding_dim() < 1) throw ShapeError("model: empty embedding table");
  trunk.encoder.validate();
  head.validate();
  if (trunk.encoder.input_size() != trunk.embedding_dim() + 1)
    throw ShapeError("model: encoder input must be embedding_dim + 1");
  if (head.input_size() != trunk.code_dim()) throw ShapeError("model: head input must equal code_dim");
  if (head.output_size() != 1) throw ShapeError("model: head must produce one output");
  if (!trunk.embedding_table.allFinite()) throw NumericalError("model: non-finite embedding entry");
}

FeatureEmbeddingModel make_model(Index feature_count, const EmbedNetConfig& config) {
  config.validate();
  if (feature_count < 1) throw ConfigError("feature_count must be positive");
  Rng rng = make_rng(config.seed, 1);
  FeatureEmbeddingModel m;
  m.config = config;

  const double bound = std::sqrt(6.0 / static_cast<double>(feature_count + config.embedding_dim));
  std::uniform_real_distribution<double> uni(-bound, bound);
  m.trunk.embedding_table = Eigen::MatrixXd::NullaryExpr(feature_count, config.embedding_dim, [&] { return uni(rng); });

  std::vector<Index> enc_dims{config.embedding_dim + 1};
  enc_dims.insert(enc_dims.end(), config.encoder_hidden.begin(), config.encoder_hidden.end());
  enc_dims.push_back(config.code_dim);
  m.trunk.encoder = make_mlp<double>(enc_dims, config.activation, Activation::identity, rng);

  std::vector<Index> head_dims{config.code_dim};
  head_dims.insert(head_dims.end(), config.head_hidden.begin(), config.head_hidden.end());
  head_dims.push_back(1);
  m.head = make_mlp<double>(head_dims, config.activation, Activation::identity, rng);
  return m;
}

Eigen::VectorXd encode_feature(const FeatureTrunk& trunk, Index index, double value) {
  if (index < 0 || index >= trunk.feature_count())
    throw ContractError("encode_feature: index " + std::to_string(index) + " out of range");
  if (!std::isfinite(value)) throw ContractError("encode_feature: value must be finite");
  Eigen::VectorXd in(trunk.embedding_dim() + 1);
  in << trunk.embedding_table.row(index).transpose(), value;
  return infer(trunk.encoder, in);
}

Eigen::VectorXd masked_global_pool(const Eigen::MatrixXd& codes, const Mask& mask) {
  if (codes.cols() != mask.size()) throw ShapeError("masked_global_pool: one mask entry per code required");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(codes.rows());
  Index present = 0;
  for (Index j = 0; j < codes.cols(); ++j) {
    if (!mask[j]) continue;
    sum += codes.col(j);
    ++present;
  }
  if (present == 0) throw AllFeaturesMissing();
  return sum / static_cast<double>(present);
}

namespace {

/// Every present (sample, feature) pair of a batch laid out as encoder input
/// columns, in sample-major, feature-index order.
struct PairLayout {
  Eigen::MatrixXd input;
  std::vector<Index> feature;
  std::vector<Index> owner;
  std::vector<Index> counts;
};

const MaskedSample& sample_at(const Dataset& data, std::size_t i) {
  if (i >= data.samples.size()) throw ContractError("sample index out of range");
  return data.samples[i];
}

PairLayout gather_pairs(const FeatureTrunk& trunk, const Dataset& data, std::span<const std::size_t> batch) {
  const Index K = trunk.feature_count();
  const Index de = trunk.embedding_dim();
  PairLayout layout;
  layout.counts.assign(batch.size(), 0);
  Index total = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = sample_at(data, batch[b]);
    if (s.values.size() != K || s.mask.size() != K)
      throw ShapeError("sample has " + std::to_string(s.values.size()) + " features, model expects " +
                       std::to_string(K));
    layout.counts[b] = s.mask.count();
    if (layout.counts[b] == 0) throw AllFeaturesMissing();
    total += layout.counts[b];
  }
  layout.input.resize(de + 1, total);
  layout.feature.reserve(static_cast<std::size_t>(total));
  layout.owner.reserve(static_cast<std::size_t>(total));
  Index p = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& s = data.samples[batch[b]];
    for (Index k = 0; k < K; ++k) {
      if (!s.mask[k]) continue;
      layout.input.col(p).head(de) = trunk.embedding_table.row(k).transpose();
      layout.input(de, p) = s.values[k];
      layout.feature.push_back(k);
      layout.owner.push_back(static_cast<Index>(b));
      ++p;
    }
  }
  return layout;
}

Eigen::MatrixXd pool_columns(const Eigen::MatrixXd& codes, const PairLayout& layout) {
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(codes.rows(), static_cast<Index>(layout.counts.size()));
  for (Index p = 0; p < codes.cols(); ++p) pooled.col(layout.owner[static_cast<std::size_t>(p)]) += codes.col(p);
  for (std::size_t b = 0; b < layout.counts.size(); ++b)
    pooled.col(static_cast<Index>(b)) /= static_cast<double>(layout.counts[b]);
  return pooled;
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

// Pooled codes in chunks, one column per sample.
Eigen::MatrixXd pooled_columns(const FeatureTrunk& trunk, const Dataset& data, std::span<const std::size_t> indices) {
  constexpr std::size_t chunk = 256;
  Eigen::MatrixXd out(trunk.code_dim(), static_cast<Index>(indices.size()));
  for (std::size_t start = 0; start < indices.size(); start += chunk) {
    const auto part = indices.subspan(start, std::min(chunk, indices.size() - start));
    const auto layout = gather_pairs(trunk, data, part);
    out.middleCols(static_cast<Index>(start), static_cast<Index>(part.size())) =
        pool_columns(infer(trunk.encoder, layout.input), layout);
  }
  return out;
}

}  // namespace

Eigen::VectorXd pooled_representation(const FeatureTrunk& trunk, const MaskedSample& sample) {
  Dataset single;
  single.feature_count = trunk.feature_count();
  single.samples.push_back(sample);
  const std::size_t idx = 0;
  return pooled_columns(trunk, single, std::span(&idx, 1)).col(0);
}

Eigen::MatrixXd pooled_codes(const FeatureTrunk& trunk, const Dataset& data) {
  const auto idx = all_indices(data);
  return pooled_columns(trunk, data, idx).transpose();
}

double predict_pooled(const Mlp<double>& head, const Eigen::VectorXd& pooled) { return infer(head, pooled)(0, 0); }

double predict(const FeatureEmbeddingModel& model, const MaskedSample& sample) {
  return predict_pooled(model.head, pooled_representation(model.trunk, sample));
}

Eigen::VectorXd predict(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data) {
  const auto idx = all_indices(data);
  return infer(head, pooled_columns(trunk, data, idx)).row(0).transpose();
}

double evaluate_mse(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data,
                    std::span<const std::size_t> indices) {
  std::vector<std::size_t> owned;
  if (indices.empty()) {
    owned = all_indices(data);
    indices = owned;
  }
  if (indices.empty()) throw ContractError("evaluate_mse: empty dataset");
  const Eigen::RowVectorXd yhat = infer(head, pooled_columns(trunk, data, indices)).row(0);
  double sum = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const double r = yhat[static_cast<Index>(i)] - data.samples[indices[i]].target;
    sum += r * r;
  }
  return sum / static_cast<double>(indices.size());
}

BatchResult loss_and_gradients(const FeatureTrunk& trunk, const Mlp<double>& head, const Dataset& data,
                               std::span<const std::size_t> batch, std::span<const double> weights) {
  if (batch.empty()) throw ContractError("loss_and_gradients: empty batch");
  if (!weights.empty() && weights.size() != data.samples.size())
    throw ShapeError("loss_and_gradients: one weight per dataset sample required");
  const auto layout = gather_pairs(trunk, data, batch);
  const auto enc = forward(trunk.encoder, layout.input);
  const Eigen::MatrixXd pooled = pool_columns(enc.output, layout);
  const auto hp = forward(head, pooled);

  const Index B = static_cast<Index>(batch.size());
  const double inv_b = 1.0 / static_cast<double>(B);
  Eigen::MatrixXd upstream(1, B);
  BatchResult result;
  for (Index b = 0; b < B; ++b) {
    const auto i = batch[static_cast<std::size_t>(b)];
    const double w = weights.empty() ? 1.0 : weights[i];
    const double r = hp.output(0, b) - data.samples[i].target;
    result.loss += w * r * r * inv_b;
    upstream(0, b) = 2.0 * w * r * inv_b;
  }
  result.head = backward(head, hp.tape, upstream);

  Eigen::MatrixXd d_codes(enc.output.rows(), enc.output.cols());
  for (Index p = 0; p < d_codes.cols(); ++p) {
    const auto b = layout.owner[static_cast<std::size_t>(p)];
    d_codes.col(p) = result.head.input.col(b) / static_cast<double>(layout.counts[static_cast<std::size_t>(b)]);
  }
  result.trunk.encoder = backward(trunk.encoder, enc.tape, d_codes);

  const Index de = trunk.embedding_dim();
  result.trunk.embedding_table = Eigen::MatrixXd::Zero(trunk.feature_count(), de);
  for (Index p = 0; p < d_codes.cols(); ++p)
    result.trunk.embedding_table.row(layout.feature[static_cast<std::size_t>(p)]) +=
        result.trunk.encoder.input.col(p).head(de).transpose();
  return result;
}

std::vector<ParamBlock<double>> parameter_blocks(FeatureTrunk& trunk) {
  std::vector<ParamBlock<double>> blocks;
  blocks.emplace_back(trunk.embedding_table.data(), trunk.embedding_table.size());
  auto enc = parameter_blocks(trunk.encoder);
  blocks.insert(blocks.end(), enc.begin(), enc.end());
  return blocks;
}

std::vector<Eigen::VectorXd> gradient_blocks(const TrunkGradients& g) {
  std::vector<Eigen::VectorXd> blocks;
  blocks.push_back(g.embedding_table.reshaped());
  auto enc = gradient_blocks(g.encoder);
  blocks.insert(blocks.end(), enc.begin(), enc.end());
  return blocks;
}

namespace {

Eigen::VectorXd concat(const std::vector<Eigen::VectorXd>& parts) {
  Index n = 0;
  for (const auto& p : parts) n += p.size();
  Eigen::VectorXd out(n);
  Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

}  // namespace

Eigen::VectorXd flatten_parameters(const FeatureEmbeddingModel& model) {
  auto copy = model;
  std::vector<Eigen::VectorXd> parts;
  for (const auto& b : parameter_blocks(copy.trunk)) parts.emplace_back(b);
  for (const auto& b : parameter_blocks(copy.head)) parts.emplace_back(b);
  return concat(parts);
}

void assign_parameters(FeatureEmbeddingModel& model, const Eigen::VectorXd& flat) {
  auto blocks = parameter_blocks(model.trunk);
  auto head_blocks = parameter_blocks(model.head);
  blocks.insert(blocks.end(), head_blocks.begin(), head_blocks.end());
  Index total = 0;
  for (const auto& b : blocks) total += b.size();
  if (total != flat.size()) throw ShapeError("assign_parameters: flat vector has wrong length");
  Index at = 0;
  for (auto& b : blocks) {
    b = flat.segment(at, b.size());
    at += b.size();
  }
}

Eigen::VectorXd flatten_gradients(const BatchResult& g) {
  auto parts = gradient_blocks(g.trunk);
  auto head = gradient_blocks(g.head);
  parts.insert(parts.end(), head.begin(), head.end());
  return concat(parts);
}

DataSplit split_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  if (n < 2) throw ContractError("split_indices: need at least two samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng = make_rng(seed, 2);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
  DataSplit split;
  split.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return split;
}

Optimizer::Optimizer(const OptimizerConfig& cfg) : cfg_(cfg) {
  adam_.lr = cfg.lr;
  adam_.beta1 = cfg.beta1;
  adam_.beta2 = cfg.beta2;
  adam_.eps = cfg.eps;
}

void Optimizer::step(std::vector<ParamBlock<double>> params, const std::vector<Eigen::VectorXd>& grads) {
  if (cfg_.weight_decay > 0.0)
    for (auto& p : params) p *= 1.0 - cfg_.lr * cfg_.weight_decay;
  if (cfg_.kind == OptimizerConfig::Kind::sgd)
    sgd_step<double>(params, grads, cfg_.lr);
  else
    adam_step<double>(params, grads, adam_);
}

FitSchedule schedule_from(const EmbedNetConfig& config) {
  FitSchedule s;
  s.epochs = config.epochs;
  s.optimizer = config.optimizer;
  s.batch_size = config.batch_size;
  s.seed = config.seed;
  s.embedding_decay = config.embedding_decay;
  return s;
}

std::vector<TrainingTrace> fit(FeatureTrunk& trunk, std::span<FitTask> tasks, const FitSchedule& schedule) {
  if (tasks.empty()) throw ContractError("fit: no tasks");
  if (schedule.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (schedule.epochs < 0) throw ConfigError("epochs must be non-negative");
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    if (!task.train_data || !task.head) throw ContractError("fit: task without data or head");
    if (task.train_indices.empty()) throw ContractError("fit: task " + std::to_string(t) + " has no training samples");
    if (task.train_data->feature_count != trunk.feature_count())
      throw ContractError("fit: task " + std::to_string(t) + " feature count differs from the model");
    if (!task.train_data->labeled) throw ContractError("fit: training data must be labeled");
    if (!task.weights.empty()) {
      if (task.weights.size() != task.train_data->samples.size())
        throw ShapeError("fit: one weight per training sample required");
      for (double w : task.weights)
        if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("fit: weights must be finite and non-negative");
    }
  }

  Optimizer trunk_opt(schedule.optimizer);
  std::vector<Optimizer> head_opts(tasks.size(), Optimizer(schedule.optimizer));
  std::vector<Rng> rngs;
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    rngs.push_back(make_rng(schedule.seed, 101 + t));
    orders.push_back(tasks[t].train_indices);
  }
  std::vector<TrainingTrace> traces(tasks.size());
  const auto bs = static_cast<std::size_t>(schedule.batch_size);
  std::int64_t steps = 0;
  auto budget_left = [&] { return !schedule.max_steps || steps < *schedule.max_steps; };

  for (int epoch = 0; epoch < schedule.epochs && budget_left(); ++epoch) {
    std::size_t max_batches = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      std::shuffle(orders[t].begin(), orders[t].end(), rngs[t]);
      max_batches = std::max(max_batches, (orders[t].size() + bs - 1) / bs);
    }
    for (std::size_t j = 0; j < max_batches && budget_left(); ++j) {
      for (std::size_t t = 0; t < tasks.size() && budget_left(); ++t) {
        const auto& order = orders[t];
        if (j * bs >= order.size()) continue;
        const auto batch = std::span(order).subspan(j * bs, std::min(bs, order.size() - j * bs));
        auto& task = tasks[t];
        auto res = loss_and_gradients(trunk, *task.head, *task.train_data, batch, task.weights);
        if (!std::isfinite(res.loss))
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(j) +
                               ", task " + std::to_string(t));
        if (schedule.update_trunk) {
          if (schedule.embedding_decay > 0.0)
            trunk.embedding_table *= 1.0 - schedule.optimizer.lr * schedule.embedding_decay;
          trunk_opt.step(parameter_blocks(trunk), gradient_blocks(res.trunk));
        }
        if (schedule.update_head) head_opts[t].step(parameter_blocks(*task.head), gradient_blocks(res.head));
        ++steps;
      }
    }
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const auto& task = tasks[t];
      traces[t].train_loss.push_back(evaluate_mse(trunk, *task.head, *task.train_data, task.train_indices));
      const Dataset* vdata = task.validation_data ? task.validation_data : task.train_data;
      traces[t].val_loss.push_back(task.validation_indices.empty()
                                       ? std::nan("")
                                       : evaluate_mse(trunk, *task.head, *vdata, task.validation_indices));
      if (!std::isfinite(traces[t].train_loss.back()))
        throw NumericalError("non-finite training loss after epoch " + std::to_string(epoch));
    }
  }
  return traces;
}

TrainingTrace weighted_train(FeatureEmbeddingModel& model, const Dataset& data, std::span<const double> weights,
                             const EmbedNetConfig& config) {
  config.validate();
  if (data.empty()) throw ContractError("train: empty dataset");
  auto split = split_indices(data.size(), config.train_fraction, config.seed);
  FitTask task;
  task.train_data = &data;
  task.train_indices = std::move(split.train);
  task.validation_data = &data;
  task.validation_indices = std::move(split.validation);
  task.weights.assign(weights.begin(), weights.end());
  task.head = &model.head;
  auto traces = fit(model.trunk, std::span(&task, 1), schedule_from(config));
  return std::move(traces.front());
}

TrainingTrace train(FeatureEmbeddingModel& model, const Dataset& data, const EmbedNetConfig& config) {
  return weighted_train(model, data, {}, config);
}

TrainingTrace train(FeatureEmbeddingModel& model, const Dataset& data) { return train(model, data, model.config); }

EmbeddingTable export_embeddings(const FeatureEmbeddingModel& model, const std::vector<int>& group_labels) {
  const Index K = model.feature_count();
  if (static_cast<Index>(group_labels.size()) != K)
    throw ContractError("export_embeddings: one group label per feature required");
  EmbeddingTable table;
  table.coordinates = model.trunk.embedding_table;
  for (Index k = 0; k < K; ++k) {
    table.feature_index.push_back(static_cast<int>(k + 1));
    table.group_label.push_back(group_labels[static_cast<std::size_t>(k)]);
  }
  return table;
}

std::string embeddings_to_csv(const EmbeddingTable& table) {
  std::string out = "feature_index,group_label";
  for (Index j = 0; j < table.coordinates.cols(); ++j) out += ",e" + std::to_string(j + 1);
  out += '\n';
  for (Index k = 0; k < table.coordinates.rows(); ++k) {
    out += std::to_string(table.feature_index[static_cast<std::size_t>(k)]) + ',' +
           std::to_string(table.group_label[static_cast<std::size_t>(k)]);
    for (Index j = 0; j < table.coordinates.cols(); ++j) out += ',' + format_double(table.coordinates(k, j));
    out += '\n';
  }
  return out;
}

ClusterMetrics embedding_cluster_metrics(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const Index n = points.rows();
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("cluster metrics: one label per point required");
  std::vector<int> groups(labels.begin(), labels.end());
  std::sort(groups.begin(), groups.end());
  groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
  if (groups.size() < 2) throw ContractError("cluster metrics: at least two groups required");

  Eigen::MatrixXd dist(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) dist(i, j) = (points.row(i) - points.row(j)).norm();

  ClusterMetrics m;
  double within = 0, between = 0;
  std::size_t n_within = 0, n_between = 0;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)]) {
        within += dist(i, j);
        ++n_within;
      } else {
        between += dist(i, j);
        ++n_between;
      }
    }
  m.mean_within_group_dist = n_within ? within / static_cast<double>(n_within) : 0.0;
  m.mean_between_group_dist = n_between ? between / static_cast<double>(n_between) : 0.0;

  double total = 0;
  for (Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    double a = 0;
    Index own_count = 0;
    double b = std::numeric_limits<double>::infinity();
    for (int g : groups) {
      double sum = 0;
      Index count = 0;
      for (Index j = 0; j < n; ++j) {
        if (labels[static_cast<std::size_t>(j)] != g || j == i) continue;
        sum += dist(i, j);
        ++count;
      }
      if (g == own) {
        a = count ? sum / static_cast<double>(count) : 0.0;
        own_count = count;
      } else if (count) {
        b = std::min(b, sum / static_cast<double>(count));
      }
    }
    // Singleton clusters score 0, as does a point with a == b == 0.
    const double scale = std::max(a, b);
    if (own_count > 0 && scale > 0) total += (b - a) / scale;
  }
  m.silhouette = total / static_cast<double>(n);
  return m;
}

}  // namespace fetl
