#pragma once

#include "fetl/anomaly.hpp"
#include "fetl/embednet.hpp"
#include "fetl/synthdata.hpp"
#include "fetl/transfer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fetl::cli {

/// Explicit paths are taken as given; unset ones default to files inside `out`.
struct Paths {
  std::filesystem::path out = ".";
  std::optional<std::filesystem::path> data;
  std::optional<std::filesystem::path> sidecar;
  std::optional<std::filesystem::path> checkpoint;

  std::filesystem::path data_path() const { return data ? *data : out / "bench.csv"; }
  /// Defaults to the data path with a .json extension.
  std::filesystem::path sidecar_path() const;
  std::filesystem::path checkpoint_path() const { return checkpoint ? *checkpoint : out / "checkpoint.json"; }
};

struct GenerateSettings {
  std::size_t n_samples = kBenchmarkSamples;
  double p_miss = kBenchmarkMissingRate;
  TaskSpec task;
};

enum class ExtractorKind { embedding, autoencoder };

struct DetectSettings {
  DetectionExperimentConfig experiment;
  ExtractOptions extract;
  ExtractorKind extractor = ExtractorKind::embedding;
  AutoencoderConfig autoencoder{.epochs = 100};
  std::size_t autoencoder_samples = 1000;
};

struct GradcheckSettings {
  std::size_t batch_size = 5;
  double h = 1e-6;
  double tol = 1e-4;
  /// Test hook: halves the analytic gradient, as if the factor 2 of the
  /// squared-error derivative had been dropped.
  bool inject_bug = false;
};

/// The top-level seed drives every module; sub-blocks carry no seed of their own.
struct RunConfig {
  std::uint64_t seed = 0;
  TargetForm eq1_interpretation = TargetForm::symmetric;
  Paths paths;
  GenerateSettings generate;
  EmbedNetConfig embednet;
  ExperimentSpec transfer;
  DetectSettings detect;
  GradcheckSettings gradcheck;

  /// embednet with the run seed applied.
  EmbedNetConfig embednet_config() const;
};

/// Parses a full configuration tree. Unknown keys raise ConfigError naming the key.
RunConfig run_config_from_json(const nlohmann::json& j);

nlohmann::json load_config_file(const std::filesystem::path& path);

/// Sets `root` at a dot-separated path, creating objects on the way. The value
/// is read as JSON when it parses, otherwise as a plain string.
void set_dot_path(nlohmann::json& root, const std::string& dot_path, const std::string& value);

/// Applies `--key value` pairs. Short aliases (`--p-miss`, `--epochs`,
/// `--quantile`, ...) resolve per subcommand; anything else is a dot path.
void apply_overrides(nlohmann::json& root, const std::vector<std::string>& args, const std::string& subcommand);

}  // namespace fetl::cli
