#include "run_config.hpp"

#include "fetl/checkpoint.hpp"
#include "fetl/errors.hpp"
#include "fetl/io.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace fs = std::filesystem;
using nlohmann::json;

namespace fetl::cli {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config block '" + where + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j[key].get<T>();
}

TaskSpec task_from_json(const json& j, TaskSpec t) {
  reject_unknown(j, {"amplitude_sin", "amplitude_cos", "freq_sin", "freq_cos", "noise_sd"}, "generate.task");
  read(j, "amplitude_sin", t.amplitude_sin);
  read(j, "amplitude_cos", t.amplitude_cos);
  read(j, "freq_sin", t.freq_sin);
  read(j, "freq_cos", t.freq_cos);
  read(j, "noise_sd", t.noise_sd);
  return t;
}

AutoencoderConfig autoencoder_from_json(const json& j, AutoencoderConfig c) {
  reject_unknown(j, {"bottleneck", "hidden", "activation", "epochs", "batch_size", "lr", "samples"},
                 "detect.autoencoder");
  read(j, "bottleneck", c.bottleneck);
  read(j, "hidden", c.hidden);
  if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "lr", c.optimizer.lr);
  return c;
}

void parse_detect(const json& j, DetectSettings& d) {
  reject_unknown(j,
                 {"mode", "lambda", "k", "quantile", "anomaly_fraction", "shift_sd", "fit_samples",
                  "calibration_samples", "test_samples", "fresh_normal_samples", "p_miss", "append_missing_fraction",
                  "extractor", "autoencoder"},
                 "detect");
  auto& e = d.experiment;
  if (j.contains("mode")) e.mon.mode = mon_mode_from_string(j["mode"].get<std::string>());
  read(j, "lambda", e.mon.lambda);
  read(j, "k", e.mon.k);
  read(j, "quantile", e.quantile);
  read(j, "anomaly_fraction", e.anomaly_fraction);
  read(j, "shift_sd", e.shift_sd);
  read(j, "fit_samples", e.fit_samples);
  read(j, "calibration_samples", e.calibration_samples);
  read(j, "test_samples", e.test_samples);
  read(j, "fresh_normal_samples", e.fresh_normal_samples);
  read(j, "p_miss", e.p_miss);
  read(j, "append_missing_fraction", d.extract.append_missing_fraction);
  if (j.contains("extractor")) {
    const auto name = j["extractor"].get<std::string>();
    if (name == "embedding")
      d.extractor = ExtractorKind::embedding;
    else if (name == "autoencoder")
      d.extractor = ExtractorKind::autoencoder;
    else
      throw ConfigError("unknown extractor '" + name + "' (expected embedding or autoencoder)");
  }
  if (j.contains("autoencoder")) {
    d.autoencoder = autoencoder_from_json(j["autoencoder"], d.autoencoder);
    read(j["autoencoder"], "samples", d.autoencoder_samples);
  }
}

// Alias -> dot path, per subcommand ("" applies to all).
const std::map<std::pair<std::string, std::string>, std::string>& aliases() {
  static const std::map<std::pair<std::string, std::string>, std::string> table{
      {{"generate", "p_miss"}, "generate.p_miss"},
      {{"generate", "n"}, "generate.n_samples"},
      {{"detect", "p_miss"}, "detect.p_miss"},
      {{"transfer", "p_miss"}, "transfer.p_miss"},
      {{"", "epochs"}, "embednet.epochs"},
      {{"", "quantile"}, "detect.quantile"},
      {{"", "extractor"}, "detect.extractor"},
      {{"", "data"}, "paths.data"},
      {{"", "sidecar"}, "paths.sidecar"},
      {{"", "checkpoint"}, "paths.checkpoint"},
      {{"", "eq1"}, "eq1_interpretation"},
      {{"", "target_form"}, "eq1_interpretation"},
      {{"", "inject_bug"}, "gradcheck.inject_bug"},
  };
  return table;
}

std::string normalize(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

}  // namespace

fs::path Paths::sidecar_path() const {
  if (sidecar) return *sidecar;
  auto p = data_path();
  p.replace_extension(".json");
  return p;
}

EmbedNetConfig RunConfig::embednet_config() const {
  auto c = embednet;
  c.seed = seed;
  return c;
}

RunConfig run_config_from_json(const json& j) {
  reject_unknown(j, {"seed", "eq1_interpretation", "paths", "generate", "embednet", "transfer", "detect", "gradcheck"},
                 "");
  RunConfig r;
  try {
    read(j, "seed", r.seed);
    if (j.contains("eq1_interpretation"))
      r.eq1_interpretation = target_form_from_string(j["eq1_interpretation"].get<std::string>());
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      reject_unknown(p, {"out", "data", "sidecar", "checkpoint"}, "paths");
      if (p.contains("out")) r.paths.out = p["out"].get<std::string>();
      if (p.contains("data")) r.paths.data = p["data"].get<std::string>();
      if (p.contains("sidecar")) r.paths.sidecar = p["sidecar"].get<std::string>();
      if (p.contains("checkpoint")) r.paths.checkpoint = p["checkpoint"].get<std::string>();
    }
    if (j.contains("generate")) {
      const auto& g = j["generate"];
      reject_unknown(g, {"n_samples", "p_miss", "task"}, "generate");
      read(g, "n_samples", r.generate.n_samples);
      read(g, "p_miss", r.generate.p_miss);
      if (g.contains("task")) r.generate.task = task_from_json(g["task"], r.generate.task);
    }
    if (j.contains("embednet")) {
      if (j["embednet"].contains("seed")) throw ConfigError("unknown config key 'embednet.seed' (use the top-level 'seed')");
      r.embednet = config_from_json(j["embednet"], r.embednet);
    }
    ExperimentSpec transfer_defaults;
    transfer_defaults.form = r.eq1_interpretation;
    transfer_defaults.embednet = r.embednet;
    r.transfer = j.contains("transfer") ? experiment_from_json(j["transfer"], transfer_defaults) : transfer_defaults;
    if (j.contains("detect")) parse_detect(j["detect"], r.detect);
    if (j.contains("gradcheck")) {
      const auto& g = j["gradcheck"];
      reject_unknown(g, {"batch_size", "h", "tol", "inject_bug"}, "gradcheck");
      read(g, "batch_size", r.gradcheck.batch_size);
      read(g, "h", r.gradcheck.h);
      read(g, "tol", r.gradcheck.tol);
      read(g, "inject_bug", r.gradcheck.inject_bug);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (r.generate.n_samples == 0) throw ConfigError("generate.n_samples must be positive");
  if (r.gradcheck.batch_size == 0) throw ConfigError("gradcheck.batch_size must be positive");
  if (!(r.gradcheck.h > 0) || !(r.gradcheck.tol > 0)) throw ConfigError("gradcheck.h and gradcheck.tol must be positive");
  r.embednet_config().validate();
  r.detect.experiment.seed = r.seed;
  r.detect.autoencoder.seed = r.seed;
  return r;
}

json load_config_file(const fs::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

void set_dot_path(json& root, const std::string& dot_path, const std::string& value) {
  if (dot_path.empty()) throw ConfigError("empty config key");
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dot_path.find('.', start);
    const auto part = dot_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed config key '" + dot_path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ConfigError("config key '" + dot_path + "' descends into a non-object value");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : std::move(parsed);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

void apply_overrides(json& root, const std::vector<std::string>& args, const std::string& subcommand) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& arg = args[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) throw ConfigError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < args.size() && args[i + 1].rfind("--", 0) != 0) {
      value = args[++i];
    } else {
      value = "true";
    }
    key = normalize(key);
    const auto& table = aliases();
    if (auto it = table.find({subcommand, key}); it != table.end())
      key = it->second;
    else if (auto any = table.find({"", key}); any != table.end())
      key = any->second;
    set_dot_path(root, key, value);
  }
}

}  // namespace fetl::cli
