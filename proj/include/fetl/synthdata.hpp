#pragma once

#include "fetl/numcore/types.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

namespace fetl {

using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Which reading of the sine term in the benchmark target to use.
///   symmetric: a_s sin(f_s (pi/4) (z1 + z2)) + a_c cos(f_c 0.7 pi (z1 - z2))
///   literal:   a_s sin(f_s pi/4) (z1 + z2)   + a_c cos(f_c 0.7 pi (z1 - z2))
enum class TargetForm { symmetric, literal };

std::string to_string(TargetForm form);
TargetForm target_form_from_string(const std::string& name);

/// Coefficients of the latent-to-target map plus the feature noise level.
/// The reference benchmark has every coefficient equal to 1 and noise_sd 0.1.
struct TaskSpec {
  double amplitude_sin = 1.0;
  double amplitude_cos = 1.0;
  double freq_sin = 1.0;
  double freq_cos = 1.0;
  double noise_sd = 0.1;

  /// (amplitude_sin, amplitude_cos, freq_sin, freq_cos).
  Eigen::VectorXd metadata() const;
  bool operator==(const TaskSpec&) const = default;
};

struct LatentPair {
  double z1 = 0;
  double z2 = 0;
};

/// Feature values with a presence mask. Absent entries hold NaN.
struct MaskedSample {
  Eigen::VectorXd values;
  Mask mask;
  double target = 0;

  Index feature_count() const { return values.size(); }
  Index present_count() const { return mask.count(); }
  bool operator==(const MaskedSample& other) const;
};

struct Dataset {
  std::vector<MaskedSample> samples;
  Index feature_count = 0;
  /// Per-feature group id in {1, 2, 3}; empty when unknown.
  std::vector<int> group_labels;
  /// False when targets are unavailable (they are then written as empty cells).
  bool labeled = true;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Throws ContractError on any invariant violation.
  void validate() const;
  Eigen::VectorXd targets() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  bool operator==(const Dataset& other) const;
};

/// Group layout of the ten-feature benchmark: {1,1,1,2,2,2,3,3,3,3}.
std::vector<int> benchmark_group_labels();

inline constexpr Index kBenchmarkFeatures = 10;
inline constexpr double kBenchmarkMissingRate = 0.2;
inline constexpr std::size_t kBenchmarkSamples = 1000;

double make_target(double z1, double z2, const TaskSpec& spec, TargetForm form = TargetForm::symmetric);

LatentPair draw_latents(Rng& rng);

/// Ten benchmark features: 1-3 track z1, 4-6 track z2 (each plus independent
/// N(0, noise_sd^2) noise), 7-10 are independent standard normals.
Eigen::VectorXd make_features(double z1, double z2, double noise_sd, Rng& rng);

/// Independent per-feature Bernoulli(p_miss) absence. A draw with no present
/// feature is discarded and redrawn.
Mask draw_missing_mask(Index feature_count, double p_miss, Rng& rng);

/// Masks `values` in place of a fresh sample; absent values become NaN.
MaskedSample apply_missing_mask(const Eigen::VectorXd& values, double target, double p_miss, Rng& rng);

struct GenerateOptions {
  double p_miss = kBenchmarkMissingRate;
  TargetForm form = TargetForm::symmetric;
};

Dataset generate_dataset(std::size_t n, const TaskSpec& spec, std::uint64_t seed, const GenerateOptions& options = {});

struct FamilyTask {
  std::string name;
  TaskSpec spec;
  Dataset data;
};

/// Tasks whose coefficients are `base` plus independent U(-scale, scale)
/// perturbations. For a fixed seed the perturbation directions are shared
/// across scales, so metadata distance to `base` grows with `scale`.
std::vector<FamilyTask> generate_task_family(const TaskSpec& base, std::size_t n_tasks, double perturbation_scale,
                                             std::uint64_t seed, std::size_t samples_per_task,
                                             const GenerateOptions& options = {});

/// Header `id,f1,...,fK,y`; an empty cell marks an absent feature (or an
/// unavailable target).
void write_csv(const Dataset& data, const std::filesystem::path& path);
std::string to_csv(const Dataset& data);
Dataset read_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);

struct Sidecar {
  Index feature_count = 0;
  std::vector<int> group_labels;
  TaskSpec task;
};

std::string to_sidecar_json(const Sidecar& sidecar);
void write_sidecar(const Sidecar& sidecar, const std::filesystem::path& path);
Sidecar read_sidecar(const std::filesystem::path& path);

/// Formats a double with the shortest representation that round-trips.
std::string format_double(double x);

}  // namespace fetl
