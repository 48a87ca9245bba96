#include "commands.hpp"

#include "fetl/checkpoint.hpp"
#include "fetl/errors.hpp"
#include "fetl/io.hpp"

#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace fetl::cli {

namespace {

std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

double variance(const Eigen::VectorXd& y) {
  if (y.size() < 2) return 0.0;
  return (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
}

std::string trace_to_csv(const TrainingTrace& trace) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
    out << e + 1 << ',' << format_double(trace.train_loss[e]) << ',';
    if (e < trace.val_loss.size()) out << format_double(trace.val_loss[e]);
    out << '\n';
  }
  return out.str();
}

ordered_json metrics_json(const ClusterMetrics& m) {
  return {{"silhouette", m.silhouette},
          {"mean_within_group_dist", m.mean_within_group_dist},
          {"mean_between_group_dist", m.mean_between_group_dist}};
}

std::size_t distinct(std::span<const int> labels) { return std::set<int>(labels.begin(), labels.end()).size(); }

}  // namespace

int cmd_generate(const RunConfig& config, std::ostream& log) {
  const auto& g = config.generate;
  const auto data =
      generate_dataset(g.n_samples, g.task, config.seed, {.p_miss = g.p_miss, .form = config.eq1_interpretation});
  const Sidecar sidecar{data.feature_count, data.group_labels, g.task};
  const auto csv = config.paths.data_path();
  const auto side = config.paths.sidecar_path();
  AtomicOutputs out;
  out.stage(csv, to_csv(data));
  out.stage(side, to_sidecar_json(sidecar));
  out.commit();
  log << "generate: " << data.size() << " samples, " << data.feature_count << " features -> " << csv.string() << ", "
      << side.string() << "\n";
  return kSuccess;
}

int cmd_train(const RunConfig& config, std::ostream& log) {
  const auto data = read_csv(config.paths.data_path());
  if (!data.labeled) throw ContractError("train: '" + config.paths.data_path().string() + "' has no targets");
  const auto cfg = config.embednet_config();
  auto model = make_model(data.feature_count, cfg);
  const auto trace = train(model, data, cfg);

  const auto ckpt = config.paths.checkpoint_path();
  const auto trace_path = config.paths.out / "trace.csv";
  AtomicOutputs out;
  out.stage(ckpt, model_to_json(model).dump() + "\n");
  out.stage(trace_path, trace_to_csv(trace));
  out.commit();

  log << "train: " << trace.train_loss.size() << " epochs";
  if (!trace.val_loss.empty())
    log << ", val_mse " << format_double(trace.val_loss.back()) << ", var_y " << format_double(variance(data.targets()));
  log << " -> " << ckpt.string() << "\n";
  return kSuccess;
}

int cmd_embeddings(const RunConfig& config, std::ostream& log) {
  const auto model = load_checkpoint(config.paths.checkpoint_path());
  const auto sidecar = read_sidecar(config.paths.sidecar_path());
  if (sidecar.feature_count != model.feature_count())
    throw ConfigError("embeddings: sidecar has " + std::to_string(sidecar.feature_count) +
                      " features but the checkpoint has " + std::to_string(model.feature_count()));
  const auto table = export_embeddings(model, sidecar.group_labels);

  ordered_json metrics;
  metrics["feature_count"] = model.feature_count();
  metrics["embedding_dim"] = model.trunk.embedding_dim();
  if (distinct(table.group_label) >= 2) {
    const auto all = embedding_cluster_metrics(table.coordinates, table.group_label);
    metrics.update(metrics_json(all));
  }
  // Groups 1 and 2 carry the latent signal; group 3 is noise.
  std::vector<Index> rows;
  std::vector<int> labels;
  for (std::size_t i = 0; i < table.group_label.size(); ++i)
    if (table.group_label[i] == 1 || table.group_label[i] == 2) {
      rows.push_back(static_cast<Index>(i));
      labels.push_back(table.group_label[i]);
    }
  if (distinct(labels) == 2) {
    const auto signal = embedding_cluster_metrics(table.coordinates(rows, Eigen::all), labels);
    auto j = metrics_json(signal);
    j["within_below_between"] = signal.mean_within_group_dist < signal.mean_between_group_dist;
    metrics["groups_1_2"] = std::move(j);
  }

  AtomicOutputs out;
  out.stage(config.paths.out / "embeddings.csv", embeddings_to_csv(table));
  out.stage(config.paths.out / "embedding_metrics.json", dump(metrics));
  out.commit();
  log << "embeddings: " << table.coordinates.rows() << " features";
  if (metrics.contains("silhouette")) log << ", silhouette " << format_double(metrics["silhouette"].get<double>());
  log << "\n";
  return kSuccess;
}

int cmd_transfer(const RunConfig& config, std::ostream& log) {
  const auto result = run_experiment(config.transfer);
  write_file_atomic(config.paths.out / "transfer_report.json", dump(to_json(result, config.transfer)));
  log << "transfer: " << result.seeds.size() << " seeds, " << result.transfers_performed << " transfers, "
      << result.negative_transfers << " negative";
  if (result.median_improvement_ratio) log << ", median ratio " << format_double(*result.median_improvement_ratio);
  log << "\n";
  return kSuccess;
}

int cmd_detect(const RunConfig& config, std::ostream& log) {
  const auto& d = config.detect;
  Extractor extractor;
  std::string extractor_name;
  if (d.extractor == ExtractorKind::embedding) {
    const auto model = load_checkpoint(config.paths.checkpoint_path());
    if (model.feature_count() != kBenchmarkFeatures)
      throw ConfigError("detect: checkpoint must have " + std::to_string(kBenchmarkFeatures) + " features");
    extractor = embedding_extractor(model, d.extract);
    extractor_name = "embedding";
  } else {
    const auto normal = generate_dataset(d.autoencoder_samples, TaskSpec{}, config.seed * 1000003 + 900000,
                                         {.p_miss = d.experiment.p_miss});
    extractor = autoencoder_extractor(autoencoder_fit(normal, d.autoencoder));
    extractor_name = "autoencoder";
  }
  const auto report = run_detection_experiment(extractor, d.experiment);
  ordered_json j;
  j["extractor"] = extractor_name;
  j.update(to_json(report));
  write_file_atomic(config.paths.out / "detection_report.json", dump(j));
  log << "detect: auc " << format_double(report.metrics.auc) << ", fresh false-positive rate "
      << format_double(report.fresh_false_positive_rate) << "\n";
  return kSuccess;
}

int cmd_gradcheck(const RunConfig& config, std::ostream& log) {
  const auto& g = config.gradcheck;
  const auto cfg = config.embednet_config();
  const auto model = make_model(kBenchmarkFeatures, cfg);
  const auto data = generate_dataset(g.batch_size, TaskSpec{}, config.seed,
                                     {.p_miss = config.generate.p_miss, .form = config.eq1_interpretation});
  std::vector<std::size_t> batch(data.size());
  std::iota(batch.begin(), batch.end(), std::size_t{0});

  const Eigen::VectorXd params = flatten_parameters(model);
  Eigen::VectorXd analytic = flatten_gradients(loss_and_gradients(model.trunk, model.head, data, batch));
  if (g.inject_bug) analytic *= 0.5;

  const std::vector<std::pair<std::string, Index>> blocks{
      {"embedding_table", model.trunk.embedding_table.size()},
      {"encoder", model.trunk.encoder.parameter_count()},
      {"head", model.head.parameter_count()}};

  ordered_json report;
  report["parameters"] = params.size();
  report["batch_size"] = g.batch_size;
  report["h"] = g.h;
  report["tol"] = g.tol;
  report["activation"] = std::string(to_string(cfg.activation));
  report["blocks"] = ordered_json::array();
  double max_err = 0;
  Index offset = 0;
  for (const auto& [name, size] : blocks) {
    auto f = [&, offset = offset, size = size](const Eigen::VectorXd& part) {
      Eigen::VectorXd full = params;
      full.segment(offset, size) = part;
      auto copy = model;
      assign_parameters(copy, full);
      return loss_and_gradients(copy.trunk, copy.head, data, batch).loss;
    };
    const auto r = grad_check<double>(f, params.segment(offset, size), analytic.segment(offset, size), g.h, g.tol);
    report["blocks"].push_back(
        {{"name", name}, {"size", size}, {"max_rel_err", r.max_rel_err}, {"worst_coordinate", offset + r.worst_coordinate}});
    max_err = std::max(max_err, r.max_rel_err);
    offset += size;
  }
  const bool pass = max_err < g.tol;
  report["max_rel_err"] = max_err;
  report["pass"] = pass;
  write_file_atomic(config.paths.out / "gradcheck_report.json", dump(report));
  log << "gradcheck: " << (pass ? "pass" : "FAIL") << ", max_rel_err " << format_double(max_err) << "\n";
  return pass ? kSuccess : kNumericalFailure;
}

}  // namespace fetl::cli
