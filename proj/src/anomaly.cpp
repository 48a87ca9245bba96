#include "fetl/anomaly.hpp"

#include "fetl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fetl {

Eigen::VectorXd extract_features(const FeatureEmbeddingModel& model, const MaskedSample& sample,
                                 const ExtractOptions& options) {
  Eigen::VectorXd pooled = pooled_representation(model, sample);
  if (!options.append_missing_fraction) return pooled;
  Eigen::VectorXd out(pooled.size() + 1);
  out << pooled, 1.0 - static_cast<double>(sample.present_count()) / static_cast<double>(sample.feature_count());
  return out;
}

Eigen::MatrixXd extract_features(const FeatureEmbeddingModel& model, const Dataset& data,
                                 const ExtractOptions& options) {
  Eigen::MatrixXd codes = pooled_codes(model.trunk, data);
  if (!options.append_missing_fraction) return codes;
  Eigen::MatrixXd out(codes.rows(), codes.cols() + 1);
  out.leftCols(codes.cols()) = codes;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data.samples[i];
    out(static_cast<Index>(i), codes.cols()) =
        1.0 - static_cast<double>(s.present_count()) / static_cast<double>(s.feature_count());
  }
  return out;
}

std::string to_string(MonMode mode) { return mode == MonMode::mahalanobis ? "mahalanobis" : "knn"; }

MonMode mon_mode_from_string(const std::string& name) {
  if (name == "mahalanobis") return MonMode::mahalanobis;
  if (name == "knn") return MonMode::knn;
  throw ConfigError("unknown model-of-normality mode '" + name + "'");
}

ModelOfNormality fit_mon(const Eigen::MatrixXd& normal_codes, const MonConfig& config) {
  if (!normal_codes.allFinite()) throw NumericalError("fit_mon: non-finite code");
  ModelOfNormality mon;
  mon.mode = config.mode;
  mon.lambda = config.lambda;
  const Index n = normal_codes.rows();
  if (config.mode == MonMode::knn) {
    if (config.k < 1) throw ConfigError("fit_mon: k must be positive");
    if (n < config.k) throw ContractError("fit_mon: gallery smaller than k");
    mon.gallery = normal_codes;
    mon.k = config.k;
    return mon;
  }
  if (!(config.lambda > 0.0)) throw ConfigError("fit_mon: lambda must be positive");
  if (n < 2) throw ContractError("fit_mon: need at least two normal codes");
  mon.mean = normal_codes.colwise().mean().transpose();
  const Eigen::MatrixXd centered = normal_codes.rowwise() - mon.mean.transpose();
  mon.covariance = centered.transpose() * centered / static_cast<double>(n - 1);
  mon.covariance.diagonal().array() += config.lambda;
  mon.factor.compute(mon.covariance);
  if (mon.factor.info() != Eigen::Success) throw NumericalError("fit_mon: covariance not positive definite");
  return mon;
}

double score(const ModelOfNormality& mon, const Eigen::VectorXd& code) {
  if (code.size() != mon.dim()) throw ShapeError("score: code dimension does not match the model of normality");
  if (mon.mode == MonMode::mahalanobis) {
    const Eigen::VectorXd z = mon.factor.matrixL().solve(code - mon.mean);
    return z.norm();
  }
  std::vector<double> d(static_cast<std::size_t>(mon.gallery.rows()));
  for (Index i = 0; i < mon.gallery.rows(); ++i)
    d[static_cast<std::size_t>(i)] = (mon.gallery.row(i).transpose() - code).norm();
  const auto k = static_cast<std::size_t>(mon.k);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  return std::accumulate(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
}

Eigen::VectorXd score_rows(const ModelOfNormality& mon, const Eigen::MatrixXd& codes) {
  Eigen::VectorXd s(codes.rows());
  for (Index i = 0; i < codes.rows(); ++i) s[i] = score(mon, codes.row(i).transpose());
  return s;
}

double empirical_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile of an empty set");
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must lie in (0, 1)");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double calibrate_threshold(const ModelOfNormality& mon, const Eigen::MatrixXd& heldout_normal_codes, double q) {
  if (heldout_normal_codes.rows() == 0) throw ContractError("calibrate_threshold: no held-out normals");
  const Eigen::VectorXd s = score_rows(mon, heldout_normal_codes);
  return empirical_quantile(std::vector<double>(s.data(), s.data() + s.size()), q);
}

std::vector<AnomalyDecision> detect(const ModelOfNormality& mon, double threshold, const Dataset& samples,
                                    const FeatureEmbeddingModel& extractor, const ExtractOptions& options) {
  return detect(mon, threshold, samples, embedding_extractor(extractor, options));
}

Extractor embedding_extractor(const FeatureEmbeddingModel& model, const ExtractOptions& options) {
  return [model, options](const Dataset& data) { return extract_features(model, data, options); };
}

std::vector<AnomalyDecision> detect(const ModelOfNormality& mon, double threshold, const Dataset& samples,
                                    const Extractor& extractor) {
  if (!extractor) throw ContractError("detect: extractor required");
  const Eigen::VectorXd s = score_rows(mon, extractor(samples));
  std::vector<AnomalyDecision> out;
  out.reserve(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) out.push_back({s[i], threshold, s[i] > threshold});
  return out;
}

double roc_auc(std::span<const double> scores, const Labels& truth) {
  if (static_cast<Index>(scores.size()) != truth.size()) throw ShapeError("roc_auc: one label per score required");
  const auto pos = static_cast<double>(truth.count());
  const double neg = static_cast<double>(truth.size()) - pos;
  if (pos == 0 || neg == 0) throw ContractError("roc_auc: need at least one positive and one negative label");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t)
      if (truth[static_cast<Index>(order[t])]) rank_sum += midrank;
    i = j + 1;
  }
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

DetectionMetrics evaluate(std::span<const AnomalyDecision> decisions, const Labels& truth) {
  if (static_cast<Index>(decisions.size()) != truth.size()) throw ShapeError("evaluate: one label per decision required");
  std::vector<double> scores;
  DetectionMetrics m;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    scores.push_back(decisions[i].score);
    const bool t = truth[static_cast<Index>(i)], p = decisions[i].is_anomaly;
    m.true_positives += t && p;
    m.false_positives += !t && p;
    m.true_negatives += !t && !p;
    m.false_negatives += t && !p;
  }
  m.auc = roc_auc(scores, truth);
  const auto tp = static_cast<double>(m.true_positives);
  const double flagged = tp + static_cast<double>(m.false_positives);
  m.precision = flagged > 0 ? tp / flagged : 0.0;
  m.recall = tp / (tp + static_cast<double>(m.false_negatives));
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

Injection inject_anomalies(const Dataset& data, double fraction, double shift_sd, Rng& rng, int group) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("inject_anomalies: fraction must lie in (0, 1)");
  const auto labels = data.group_labels.empty() ? benchmark_group_labels() : data.group_labels;
  if (static_cast<Index>(labels.size()) != data.feature_count)
    throw ContractError("inject_anomalies: one group label per feature required");

  Eigen::VectorXd sd = Eigen::VectorXd::Zero(data.feature_count);
  for (Index k = 0; k < data.feature_count; ++k) {
    if (labels[static_cast<std::size_t>(k)] != group) continue;
    double sum = 0, sq = 0, n = 0;
    for (const auto& s : data.samples)
      if (s.mask[k]) {
        sum += s.values[k];
        sq += s.values[k] * s.values[k];
        n += 1;
      }
    if (n > 1) sd[k] = std::sqrt(std::max(0.0, (sq - sum * sum / n) / (n - 1)));
  }

  Injection out{data, Labels::Constant(static_cast<Index>(data.size()), false)};
  std::bernoulli_distribution pick(fraction);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (!pick(rng)) continue;
    out.labels[static_cast<Index>(i)] = true;
    auto& s = out.data.samples[i];
    for (Index k = 0; k < data.feature_count; ++k)
      if (labels[static_cast<std::size_t>(k)] == group && s.mask[k]) s.values[k] += shift_sd * sd[k];
  }
  return out;
}

DetectionReport run_detection_experiment(const Extractor& extractor, const DetectionExperimentConfig& config) {
  if (!extractor) throw ContractError("detection experiment: extractor required");
  const GenerateOptions opts{config.p_miss, TargetForm::symmetric};
  const auto base = config.seed * 1000003 + 700000;
  const auto fit_data = generate_dataset(config.fit_samples, TaskSpec{}, base + 1, opts);
  const auto cal_data = generate_dataset(config.calibration_samples, TaskSpec{}, base + 2, opts);
  const auto test_data = generate_dataset(config.test_samples, TaskSpec{}, base + 3, opts);
  const auto fresh = generate_dataset(config.fresh_normal_samples, TaskSpec{}, base + 4, opts);

  DetectionReport r;
  r.config = config;
  const auto mon = fit_mon(extractor(fit_data), config.mon);
  r.threshold = calibrate_threshold(mon, extractor(cal_data), config.quantile);

  Rng rng = make_rng(base, 5);
  auto injected = inject_anomalies(test_data, config.anomaly_fraction, config.shift_sd, rng);
  r.truth = injected.labels;
  r.decisions = detect(mon, r.threshold, injected.data, extractor);
  r.metrics = evaluate(r.decisions, r.truth);

  const auto fresh_decisions = detect(mon, r.threshold, fresh, extractor);
  const auto flagged = std::count_if(fresh_decisions.begin(), fresh_decisions.end(),
                                     [](const AnomalyDecision& d) { return d.is_anomaly; });
  r.fresh_false_positive_rate = static_cast<double>(flagged) / static_cast<double>(fresh_decisions.size());
  return r;
}

nlohmann::ordered_json to_json(const DetectionReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(r.config.mon.mode);
  if (r.config.mon.mode == MonMode::mahalanobis)
    j["lambda"] = r.config.mon.lambda;
  else
    j["k"] = r.config.mon.k;
  j["threshold"] = r.threshold;
  j["quantile"] = r.config.quantile;
  auto results = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.decisions.size(); ++i)
    results.push_back({{"id", i},
                       {"score", r.decisions[i].score},
                       {"is_anomaly", r.decisions[i].is_anomaly},
                       {"injected", static_cast<bool>(r.truth[static_cast<Index>(i)])}});
  j["results"] = std::move(results);
  j["metrics"] = {{"auc", r.metrics.auc},
                  {"precision", r.metrics.precision},
                  {"recall", r.metrics.recall},
                  {"f1", r.metrics.f1},
                  {"true_positives", r.metrics.true_positives},
                  {"false_positives", r.metrics.false_positives},
                  {"true_negatives", r.metrics.true_negatives},
                  {"false_negatives", r.metrics.false_negatives},
                  {"fresh_false_positive_rate", r.fresh_false_positive_rate}};
  return j;
}

}  // namespace fetl
