#include "fetl/transfer.hpp"

#include "fetl/checkpoint.hpp"
#include "fetl/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fetl {

void TaskDescriptor::validate() const {
  if (metadata.size() == 0 || !metadata.allFinite()) throw ContractError("task '" + name + "': metadata must be finite");
  data.validate();
}

TaskDescriptor describe(const FamilyTask& task) { return {task.name, task.spec.metadata(), task.data}; }

// ---- similarity ------------------------------------------------------------

namespace {

double kernel_mean(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double inv_two_sigma2) {
  double sum = 0;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < y.rows(); ++j) sum += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv_two_sigma2);
  return sum / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

double median(std::vector<double> v) {
  if (v.empty()) throw ContractError("median of an empty set");
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

void check_sets(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("mmd: both sample sets must be non-empty");
  if (a.cols() != b.cols()) throw ShapeError("mmd: sample dimensions differ");
}

}  // namespace

double median_heuristic_bandwidth(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  check_sets(a, b);
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Index i = 0; i < pooled.rows(); ++i)
    for (Index j = i + 1; j < pooled.rows(); ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  const double m = median(std::move(d));
  return m > 0.0 ? m : 1.0;
}

double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::optional<double> bandwidth) {
  check_sets(a, b);
  const double sigma = bandwidth ? *bandwidth : median_heuristic_bandwidth(a, b);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("mmd: bandwidth must be positive");
  const double g = 1.0 / (2.0 * sigma * sigma);
  const double value = kernel_mean(a, a, g) + kernel_mean(b, b, g) - 2.0 * kernel_mean(a, b, g);
  return std::max(value, 0.0);
}

double metadata_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ShapeError("metadata_similarity: lengths differ");
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw ContractError("metadata_similarity: zero vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

Eigen::MatrixXd raw_features(const Dataset& data) {
  Eigen::MatrixXd out(static_cast<Index>(data.size()), data.feature_count);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data.samples[i].mask.all())
      throw ContractError("raw feature comparison needs complete samples (sample " + std::to_string(i) + ")");
    out.row(static_cast<Index>(i)) = data.samples[i].values.transpose();
  }
  return out;
}

Extractor pooled_code_extractor(const FeatureTrunk& trunk) {
  return [trunk](const Dataset& data) { return pooled_codes(trunk, data); };
}

GateResult when_to_transfer(const TaskDescriptor& source, const TaskDescriptor& target,
                            const GateThresholds& thresholds, const Extractor& extractor) {
  if (!std::isfinite(thresholds.feature) || !std::isfinite(thresholds.metadata) ||
      (thresholds.label && !std::isfinite(*thresholds.label)))
    throw ConfigError("gate thresholds must be finite");
  GateResult g;
  const Extractor& ex = extractor ? extractor : Extractor(raw_features);
  g.feature_mmd2 = mmd2(ex(source.data), ex(target.data));
  g.feature_similarity = std::exp(-g.feature_mmd2);
  g.metadata_similarity = metadata_similarity(source.metadata, target.metadata);
  if (source.data.labeled && target.data.labeled) {
    const Eigen::MatrixXd ys = source.data.targets();
    const Eigen::MatrixXd yt = target.data.targets();
    g.label_similarity = std::exp(-mmd2(ys, yt));
  }
  g.gate_decision = g.feature_similarity >= thresholds.feature && g.metadata_similarity >= thresholds.metadata;
  if (thresholds.label) {
    if (!g.label_similarity) throw ContractError("label gate requires labeled source and target data");
    g.gate_decision = g.gate_decision && *g.label_similarity >= *thresholds.label;
  }
  return g;
}

// ---- parameter transfer ----------------------------------------------------

std::string to_string(Freeze f) {
  switch (f) {
    case Freeze::none: return "none";
    case Freeze::trunk: return "trunk";
    case Freeze::head_only_trainable: return "head_only_trainable";
  }
  return "none";
}

Freeze freeze_from_string(const std::string& name) {
  if (name == "none") return Freeze::none;
  if (name == "trunk") return Freeze::trunk;
  if (name == "head_only_trainable") return Freeze::head_only_trainable;
  throw ConfigError("unknown freeze policy '" + name + "'");
}

namespace {

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

TrainingTrace run_steps(FeatureEmbeddingModel& m, const Dataset& train, const Dataset& val, const FineTuneConfig& cfg,
                        bool update_trunk) {
  FitTask task;
  task.train_data = &train;
  task.train_indices = iota_indices(train.size());
  task.validation_data = &val;
  task.validation_indices = iota_indices(val.size());
  task.head = &m.head;
  FitSchedule s;
  const auto bs = static_cast<std::int64_t>(cfg.batch_size);
  const auto per_epoch = (static_cast<std::int64_t>(train.size()) + bs - 1) / bs;
  s.epochs = static_cast<int>((cfg.steps + per_epoch - 1) / per_epoch);
  s.max_steps = cfg.steps;
  s.update_trunk = update_trunk;
  s.optimizer = cfg.optimizer;
  s.batch_size = cfg.batch_size;
  s.seed = cfg.seed;
  return fit(m.trunk, std::span(&task, 1), s).front();
}

}  // namespace

FineTuneResult fine_tune(const FeatureEmbeddingModel& source, const Dataset& target_train, const Dataset& target_val,
                         const FineTuneConfig& config) {
  source.validate();
  if (target_train.empty() || target_val.empty()) throw ContractError("fine_tune: target data must be non-empty");
  if (target_train.feature_count != source.feature_count() || target_val.feature_count != source.feature_count())
    throw ContractError("fine_tune: target feature count " + std::to_string(target_train.feature_count) +
                        " does not match the source model (" + std::to_string(source.feature_count()) + ")");
  if (config.steps < 0) throw ConfigError("fine_tune: steps must be non-negative");
  if (config.batch_size < 1) throw ConfigError("fine_tune: batch_size must be positive");

  FineTuneResult r;
  r.model = source;
  r.trace = run_steps(r.model, target_train, target_val, config, config.freeze == Freeze::none);

  EmbedNetConfig base_cfg = source.config;
  base_cfg.seed = config.seed;
  r.baseline = make_model(source.feature_count(), base_cfg);
  r.baseline_trace = run_steps(r.baseline, target_train, target_val, config, true);

  r.transferred_val_loss = evaluate_mse(r.model, target_val);
  r.baseline_val_loss = evaluate_mse(r.baseline, target_val);
  r.negative_transfer = r.transferred_val_loss > r.baseline_val_loss;
  return r;
}

FeatureEmbeddingModel HardSharedModel::view(std::size_t task) const {
  if (task >= heads.size()) throw ContractError("hard-shared model has no task " + std::to_string(task));
  FeatureEmbeddingModel m;
  m.trunk = trunk;
  m.head = heads[task];
  m.config = config;
  return m;
}

HardSharedModel train_hard_shared(std::span<const TaskDescriptor> tasks, const EmbedNetConfig& config) {
  if (tasks.empty()) throw ContractError("train_hard_shared: no tasks");
  const Index K = tasks.front().data.feature_count;
  for (const auto& t : tasks)
    if (t.data.feature_count != K) throw ContractError("train_hard_shared: task '" + t.name + "' has a different K");

  auto first = make_model(K, config);
  HardSharedModel out;
  out.trunk = std::move(first.trunk);
  out.config = config;
  out.heads.reserve(tasks.size());
  out.heads.push_back(std::move(first.head));
  std::vector<Index> head_dims{config.code_dim};
  head_dims.insert(head_dims.end(), config.head_hidden.begin(), config.head_hidden.end());
  head_dims.push_back(1);
  for (std::size_t t = 1; t < tasks.size(); ++t) {
    Rng rng = make_rng(config.seed, 1000 + t);
    out.heads.push_back(make_mlp<double>(head_dims, config.activation, Activation::identity, rng));
  }

  std::vector<FitTask> fit_tasks(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    auto split = split_indices(tasks[t].data.size(), config.train_fraction, config.seed);
    fit_tasks[t].train_data = &tasks[t].data;
    fit_tasks[t].train_indices = std::move(split.train);
    fit_tasks[t].validation_data = &tasks[t].data;
    fit_tasks[t].validation_indices = std::move(split.validation);
    fit_tasks[t].head = &out.heads[t];
    out.task_names.push_back(tasks[t].name);
  }
  out.traces = fit(out.trunk, fit_tasks, schedule_from(config));
  return out;
}

// ---- instance transfer -----------------------------------------------------

std::vector<double> instance_reweight(const Dataset& source, const Dataset& target, const Extractor& extractor,
                                      const ReweightConfig& config) {
  if (source.empty() || target.empty()) throw ContractError("instance_reweight: both datasets must be non-empty");
  if (!extractor) throw ContractError("instance_reweight: extractor required");
  if (!(config.clip_min > 0.0 && config.clip_min <= config.clip_max)) throw ConfigError("instance_reweight: bad clip range");
  const Eigen::MatrixXd xs = extractor(source);
  const Eigen::MatrixXd xt = extractor(target);
  if (xs.cols() != xt.cols()) throw ShapeError("instance_reweight: code widths differ");
  const Index ns = xs.rows(), nt = xt.rows(), n = ns + nt, d = xs.cols();

  Eigen::MatrixXd x(n, d + 1);
  x.leftCols(d) << xs, xt;
  const Eigen::RowVectorXd mean = x.leftCols(d).colwise().mean();
  x.leftCols(d).rowwise() -= mean;
  for (Index k = 0; k < d; ++k) {
    const double sd = std::sqrt(x.col(k).squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) x.col(k) /= sd;
  }
  x.col(d).setOnes();
  Eigen::VectorXd y(n);
  y << Eigen::VectorXd::Zero(ns), Eigen::VectorXd::Ones(nt);

  // Newton iterations on the ridge-penalized logistic likelihood.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  const double ridge = config.ridge * static_cast<double>(n);
  for (int it = 0; it < config.max_iterations; ++it) {
    const Eigen::ArrayXd p = 1.0 / (1.0 + (-(x * beta)).array().exp());
    const Eigen::ArrayXd w = p * (1.0 - p);
    Eigen::MatrixXd h = x.transpose() * (x.array().colwise() * w).matrix();
    h.diagonal().array() += ridge;
    const Eigen::VectorXd grad = x.transpose() * (p.matrix() - y) + ridge * beta;
    const Eigen::VectorXd delta = h.ldlt().solve(grad);
    if (!delta.allFinite()) throw NumericalError("instance_reweight: classifier diverged");
    beta -= delta;
    if (delta.norm() < 1e-10) break;
  }
  const Eigen::VectorXd logits = x.topRows(ns) * beta;
  const double prior = static_cast<double>(ns) / static_cast<double>(nt);
  std::vector<double> weights(static_cast<std::size_t>(ns));
  for (Index i = 0; i < ns; ++i) {
    const double r = std::exp(logits[i]) * prior;
    if (!std::isfinite(r)) throw NumericalError("instance_reweight: non-finite density ratio");
    weights[static_cast<std::size_t>(i)] = std::clamp(r, config.clip_min, config.clip_max);
  }
  const double m = std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(ns);
  for (double& w : weights) w /= m;
  return weights;
}

// ---- feature-representation transfer ----------------------------------------

void Autoencoder::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.output_size() != decoder.input_size()) throw ShapeError("autoencoder: bottleneck widths differ");
  if (encoder.input_size() != 2 * decoder.output_size()) throw ShapeError("autoencoder: encoder input must be 2K");
  if (bottleneck() >= feature_count()) throw ShapeError("autoencoder: bottleneck must be smaller than K");
}

Autoencoder make_autoencoder(Index feature_count, const AutoencoderConfig& config) {
  if (config.bottleneck < 1 || config.bottleneck >= feature_count)
    throw ConfigError("autoencoder: bottleneck must lie in [1, K)");
  for (auto w : config.hidden)
    if (w < 1) throw ConfigError("autoencoder: hidden widths must be positive");
  Rng rng = make_rng(config.seed, 3);
  std::vector<Index> enc{2 * feature_count};
  enc.insert(enc.end(), config.hidden.begin(), config.hidden.end());
  enc.push_back(config.bottleneck);
  std::vector<Index> dec{config.bottleneck};
  dec.insert(dec.end(), config.hidden.rbegin(), config.hidden.rend());
  dec.push_back(feature_count);
  Autoencoder ae;
  ae.encoder = make_mlp<double>(enc, config.activation, Activation::identity, rng);
  ae.decoder = make_mlp<double>(dec, config.activation, Activation::identity, rng);
  return ae;
}

Eigen::VectorXd autoencoder_input(const MaskedSample& sample) {
  const Index K = sample.feature_count();
  Eigen::VectorXd in(2 * K);
  for (Index k = 0; k < K; ++k) {
    in[k] = sample.mask[k] ? sample.values[k] : 0.0;
    in[K + k] = sample.mask[k] ? 1.0 : 0.0;
  }
  return in;
}

namespace {

void check_width(const Autoencoder& ae, const MaskedSample& s) {
  if (s.feature_count() != ae.feature_count()) throw ShapeError("autoencoder: sample width differs from K");
}

struct AeBatch {
  Eigen::MatrixXd input;   // 2K x B
  Eigen::MatrixXd target;  // K x B, zero where absent
  Eigen::MatrixXd mask;    // K x B
};

AeBatch gather(const Dataset& data, std::span<const std::size_t> batch) {
  const Index K = data.feature_count, B = static_cast<Index>(batch.size());
  AeBatch b{Eigen::MatrixXd(2 * K, B), Eigen::MatrixXd(K, B), Eigen::MatrixXd(K, B)};
  for (Index j = 0; j < B; ++j) {
    b.input.col(j) = autoencoder_input(data.samples[batch[static_cast<std::size_t>(j)]]);
    b.target.col(j) = b.input.col(j).head(K);
    b.mask.col(j) = b.input.col(j).tail(K);
  }
  return b;
}

}  // namespace

Eigen::VectorXd autoencoder_encode(const Autoencoder& ae, const MaskedSample& sample) {
  check_width(ae, sample);
  return infer(ae.encoder, autoencoder_input(sample));
}

Eigen::VectorXd autoencoder_reconstruct(const Autoencoder& ae, const MaskedSample& sample) {
  return infer(ae.decoder, autoencoder_encode(ae, sample));
}

double reconstruction_mse(const Autoencoder& ae, const Dataset& data) {
  if (data.empty()) throw ContractError("reconstruction_mse: empty dataset");
  if (data.feature_count != ae.feature_count()) throw ShapeError("autoencoder: dataset width differs from K");
  const auto idx = iota_indices(data.size());
  const auto b = gather(data, idx);
  const Eigen::MatrixXd out = infer(ae.decoder, infer(ae.encoder, b.input));
  return ((out - b.target).array() * b.mask.array()).square().sum() / b.mask.sum();
}

std::vector<double> autoencoder_train(Autoencoder& ae, const Dataset& data, const AutoencoderConfig& config) {
  ae.validate();
  if (data.empty()) throw ContractError("autoencoder_train: empty dataset");
  if (data.feature_count != ae.feature_count()) throw ShapeError("autoencoder: dataset width differs from K");
  if (config.batch_size < 1) throw ConfigError("autoencoder: batch_size must be positive");
  if (config.epochs < 0) throw ConfigError("autoencoder: epochs must be non-negative");

  Optimizer opt(config.optimizer);
  Rng rng = make_rng(config.seed, 4);
  auto order = iota_indices(data.size());
  const auto bs = static_cast<std::size_t>(config.batch_size);
  std::vector<double> losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto batch = std::span(order).subspan(start, std::min(bs, order.size() - start));
      const auto b = gather(data, batch);
      const auto enc = forward(ae.encoder, b.input);
      const auto dec = forward(ae.decoder, enc.output);
      const double n_obs = b.mask.sum();
      const Eigen::MatrixXd diff = (dec.output - b.target).cwiseProduct(b.mask);
      const double loss = diff.squaredNorm() / n_obs;
      if (!std::isfinite(loss))
        throw NumericalError("autoencoder: non-finite loss at epoch " + std::to_string(epoch));
      const auto g_dec = backward(ae.decoder, dec.tape, Eigen::MatrixXd(2.0 * diff / n_obs));
      const auto g_enc = backward(ae.encoder, enc.tape, g_dec.input);
      auto params = parameter_blocks(ae.encoder);
      auto dec_params = parameter_blocks(ae.decoder);
      params.insert(params.end(), dec_params.begin(), dec_params.end());
      auto grads = gradient_blocks(g_enc);
      auto dec_grads = gradient_blocks(g_dec);
      grads.insert(grads.end(), dec_grads.begin(), dec_grads.end());
      opt.step(std::move(params), grads);
    }
    losses.push_back(reconstruction_mse(ae, data));
  }
  return losses;
}

Autoencoder autoencoder_fit(const Dataset& data, const AutoencoderConfig& config) {
  auto ae = make_autoencoder(data.feature_count, config);
  autoencoder_train(ae, data, config);
  return ae;
}

Extractor autoencoder_extractor(const Autoencoder& ae) {
  return [ae](const Dataset& data) {
    Eigen::MatrixXd out(static_cast<Index>(data.size()), ae.bottleneck());
    for (std::size_t i = 0; i < data.size(); ++i)
      out.row(static_cast<Index>(i)) = autoencoder_encode(ae, data.samples[i]).transpose();
    return out;
  };
}

// ---- scenarios ---------------------------------------------------------------

std::size_t select_source(std::span<const TaskDescriptor> sources, const Eigen::VectorXd& target_metadata) {
  if (sources.empty()) throw ContractError("no source tasks to choose from");
  std::size_t best = 0;
  double best_sim = metadata_similarity(sources[0].metadata, target_metadata);
  for (std::size_t i = 1; i < sources.size(); ++i) {
    const double s = metadata_similarity(sources[i].metadata, target_metadata);
    if (s > best_sim || (s == best_sim && sources[i].name < sources[best].name)) {
      best = i;
      best_sim = s;
    }
  }
  return best;
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void check_models(std::span<const TaskDescriptor> sources, std::span<const FeatureEmbeddingModel> models) {
  if (sources.empty()) throw ContractError("no source tasks to choose from");
  if (sources.size() != models.size()) throw ContractError("one model per source task required");
}

}  // namespace

nlohmann::ordered_json to_json(const TransferReport& r) {
  nlohmann::ordered_json j;
  j["source_name"] = r.source_name;
  j["target_name"] = r.target_name;
  j["feature_mmd2"] = r.gate.feature_mmd2;
  j["feature_similarity"] = r.gate.feature_similarity;
  j["label_similarity"] = optional_number(r.gate.label_similarity);
  j["metadata_similarity"] = r.gate.metadata_similarity;
  j["gate_decision"] = r.gate.gate_decision;
  j["transfer_performed"] = r.transfer_performed;
  j["baseline_val_loss"] = optional_number(r.baseline_val_loss);
  j["transferred_val_loss"] = optional_number(r.transferred_val_loss);
  j["negative_transfer"] = r.negative_transfer;
  j["note"] = r.note;
  return j;
}

ZeroShotResult zero_shot(std::span<const TaskDescriptor> sources, std::span<const FeatureEmbeddingModel> models,
                         const TaskDescriptor& target) {
  check_models(sources, models);
  ZeroShotResult r;
  for (const auto& s : sources) r.similarities.push_back(metadata_similarity(s.metadata, target.metadata));
  r.chosen = select_source(sources, target.metadata);
  const auto& model = models[r.chosen];
  if (target.data.feature_count != model.feature_count())
    throw ContractError("zero_shot: target feature count does not match the source model");
  r.predictions = predict(model, target.data);
  return r;
}

FewShotResult few_shot(std::span<const TaskDescriptor> sources, std::span<const FeatureEmbeddingModel> models,
                       const TaskDescriptor& target_train, const Dataset& target_val, const FineTuneConfig& config) {
  check_models(sources, models);
  FewShotResult r;
  r.chosen = select_source(sources, target_train.metadata);
  const auto& source = sources[r.chosen];
  r.tuned = fine_tune(models[r.chosen], target_train.data, target_val, config);
  r.report.source_name = source.name;
  r.report.target_name = target_train.name;
  r.report.gate = when_to_transfer(source, target_train, GateThresholds{}, pooled_code_extractor(models[r.chosen].trunk));
  r.report.transfer_performed = true;
  r.report.baseline_val_loss = r.tuned.baseline_val_loss;
  r.report.transferred_val_loss = r.tuned.transferred_val_loss;
  r.report.negative_transfer = r.tuned.negative_transfer;
  r.report.note = "gate reported, not enforced";
  return r;
}

// ---- experiment harness ----------------------------------------------------

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  return median(std::move(v));
}

}  // namespace

ExperimentSpec experiment_from_json(const nlohmann::json& j, const ExperimentSpec& defaults) {
  ExperimentSpec s = defaults;
  reject_unknown(j,
                 {"family", "mode", "n_target_samples", "seeds", "source_samples", "validation_samples", "p_miss",
                  "target_form", "thresholds", "embednet", "fine_tune"},
                 "transfer");
  try {
    if (j.contains("family")) {
      const auto& f = j["family"];
      reject_unknown(f, {"n_tasks", "perturbation_scale"}, "transfer.family");
      if (f.contains("n_tasks")) s.n_tasks = f["n_tasks"].get<std::size_t>();
      if (f.contains("perturbation_scale")) s.perturbation_scale = f["perturbation_scale"].get<double>();
    }
    if (j.contains("mode")) {
      const auto mode = j["mode"].get<std::string>();
      if (mode == "zero_shot")
        s.mode = ScenarioMode::zero_shot;
      else if (mode == "few_shot")
        s.mode = ScenarioMode::few_shot;
      else
        throw ConfigError("unknown transfer mode '" + mode + "'");
    }
    if (j.contains("n_target_samples")) s.n_target_samples = j["n_target_samples"].get<std::size_t>();
    if (j.contains("seeds")) s.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    if (j.contains("source_samples")) s.source_samples = j["source_samples"].get<std::size_t>();
    if (j.contains("validation_samples")) s.validation_samples = j["validation_samples"].get<std::size_t>();
    if (j.contains("p_miss")) s.p_miss = j["p_miss"].get<double>();
    if (j.contains("target_form")) s.form = target_form_from_string(j["target_form"].get<std::string>());
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      reject_unknown(t, {"feature", "metadata", "label"}, "transfer.thresholds");
      if (t.contains("feature")) s.thresholds.feature = t["feature"].get<double>();
      if (t.contains("metadata")) s.thresholds.metadata = t["metadata"].get<double>();
      if (t.contains("label")) {
        if (t["label"].is_null())
          s.thresholds.label.reset();
        else
          s.thresholds.label = t["label"].get<double>();
      }
    }
    if (j.contains("embednet")) s.embednet = config_from_json(j["embednet"], s.embednet);
    if (j.contains("fine_tune")) {
      const auto& f = j["fine_tune"];
      reject_unknown(f, {"freeze", "steps", "batch_size", "lr", "optimizer"}, "transfer.fine_tune");
      if (f.contains("freeze")) s.fine_tune.freeze = freeze_from_string(f["freeze"].get<std::string>());
      if (f.contains("steps")) s.fine_tune.steps = f["steps"].get<std::int64_t>();
      if (f.contains("batch_size")) s.fine_tune.batch_size = f["batch_size"].get<Index>();
      if (f.contains("lr")) s.fine_tune.optimizer.lr = f["lr"].get<double>();
      if (f.contains("optimizer")) {
        const auto& o = f["optimizer"];
        reject_unknown(o, {"kind", "lr"}, "transfer.fine_tune.optimizer");
        if (o.contains("kind")) {
          const auto kind = o["kind"].get<std::string>();
          if (kind == "adam")
            s.fine_tune.optimizer.kind = OptimizerConfig::Kind::adam;
          else if (kind == "sgd")
            s.fine_tune.optimizer.kind = OptimizerConfig::Kind::sgd;
          else
            throw ConfigError("unknown optimizer '" + kind + "'");
        }
        if (o.contains("lr")) s.fine_tune.optimizer.lr = o["lr"].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("transfer config: ") + e.what());
  }
  if (s.n_tasks < 1) throw ConfigError("transfer: family.n_tasks must be at least 1");
  if (s.n_target_samples < 1) throw ConfigError("transfer: n_target_samples must be positive");
  if (s.validation_samples < 1) throw ConfigError("transfer: validation_samples must be positive");
  if (s.source_samples < 2) throw ConfigError("transfer: source_samples must be at least 2");
  if (s.seeds.empty()) throw ConfigError("transfer: seeds must be non-empty");
  return s;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  const GenerateOptions opts{spec.p_miss, spec.form};
  ExperimentResult result;
  std::vector<double> ratios, transferred, baseline;
  for (auto seed : spec.seeds) {
    auto family = generate_task_family(TaskSpec{}, spec.n_tasks + 1, spec.perturbation_scale, seed,
                                       spec.source_samples, opts);
    const TaskSpec target_spec = family.back().spec;
    family.pop_back();
    std::vector<TaskDescriptor> sources;
    for (const auto& t : family) sources.push_back(describe(t));

    const auto target_all =
        generate_dataset(spec.n_target_samples + spec.validation_samples, target_spec, seed * 1000003 + 500000, opts);
    std::vector<std::size_t> train_idx(spec.n_target_samples), val_idx(spec.validation_samples);
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
    std::iota(val_idx.begin(), val_idx.end(), spec.n_target_samples);
    TaskDescriptor target{"target", target_spec.metadata(), target_all.subset(train_idx)};
    const Dataset target_val = target_all.subset(val_idx);
    if (spec.mode == ScenarioMode::zero_shot) target.data.labeled = false;

    SeedOutcome out;
    out.seed = seed;
    for (const auto& s : sources) {
      out.source_names.push_back(s.name);
      out.metadata_similarities.push_back(metadata_similarity(s.metadata, target.metadata));
    }
    const auto chosen = select_source(sources, target.metadata);
    const auto& source = sources[chosen];

    EmbedNetConfig cfg = spec.embednet;
    cfg.seed = seed;
    auto model = make_model(source.data.feature_count, cfg);
    train(model, source.data, cfg);

    auto& rep = out.report;
    rep.source_name = source.name;
    rep.target_name = target.name;
    rep.gate = when_to_transfer(source, target, spec.thresholds, pooled_code_extractor(model.trunk));
    if (!rep.gate.gate_decision) {
      rep.note = "gate closed: similarity below threshold, transfer skipped";
    } else if (spec.mode == ScenarioMode::zero_shot) {
      rep.transfer_performed = true;
      rep.transferred_val_loss = evaluate_mse(model, target_val);
      rep.baseline_val_loss = evaluate_mse(make_model(source.data.feature_count, cfg), target_val);
      rep.note = "zero-shot: source model applied unchanged; baseline is the untrained model";
    } else {
      FineTuneConfig ft = spec.fine_tune;
      ft.seed = seed;
      auto tuned = fine_tune(model, target.data, target_val, ft);
      rep.transfer_performed = true;
      rep.transferred_val_loss = tuned.transferred_val_loss;
      rep.baseline_val_loss = tuned.baseline_val_loss;
      rep.note = "few-shot: fine-tuned on " + std::to_string(spec.n_target_samples) +
                 " target samples; baseline trained from scratch with the same budget";
    }
    if (rep.transfer_performed) {
      rep.negative_transfer = *rep.transferred_val_loss > *rep.baseline_val_loss;
      ++result.transfers_performed;
      if (rep.negative_transfer) ++result.negative_transfers;
      transferred.push_back(*rep.transferred_val_loss);
      baseline.push_back(*rep.baseline_val_loss);
      ratios.push_back(*rep.transferred_val_loss / *rep.baseline_val_loss);
    }
    result.seeds.push_back(std::move(out));
  }
  result.median_improvement_ratio = median_of(ratios);
  result.median_transferred_val_loss = median_of(transferred);
  result.median_baseline_val_loss = median_of(baseline);
  return result;
}

nlohmann::ordered_json to_json(const ExperimentResult& result, const ExperimentSpec& spec) {
  nlohmann::ordered_json j;
  j["mode"] = spec.mode == ScenarioMode::zero_shot ? "zero_shot" : "few_shot";
  j["family"] = {{"n_tasks", spec.n_tasks}, {"perturbation_scale", spec.perturbation_scale}};
  j["n_target_samples"] = spec.n_target_samples;
  j["thresholds"] = {{"feature", spec.thresholds.feature},
                     {"metadata", spec.thresholds.metadata},
                     {"label", optional_number(spec.thresholds.label)}};
  auto seeds = nlohmann::ordered_json::array();
  for (const auto& s : result.seeds) {
    nlohmann::ordered_json e;
    e["seed"] = s.seed;
    auto table = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.source_names.size(); ++i)
      table.push_back({{"name", s.source_names[i]}, {"metadata_similarity", s.metadata_similarities[i]}});
    e["sources"] = std::move(table);
    e["chosen_source"] = s.report.source_name;
    e["report"] = to_json(s.report);
    seeds.push_back(std::move(e));
  }
  j["seeds"] = std::move(seeds);
  j["aggregate"] = {{"transfers_performed", result.transfers_performed},
                    {"negative_transfers", result.negative_transfers},
                    {"median_improvement_ratio", optional_number(result.median_improvement_ratio)},
                    {"median_transferred_val_loss", optional_number(result.median_transferred_val_loss)},
                    {"median_baseline_val_loss", optional_number(result.median_baseline_val_loss)}};
  return j;
}

}  // namespace fetl
