#include "fetl/synthdata.hpp"

#include "fetl/errors.hpp"
#include "fetl/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <string_view>

namespace fetl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::string to_string(TargetForm form) { return form == TargetForm::symmetric ? "symmetric" : "literal"; }

TargetForm target_form_from_string(const std::string& name) {
  if (name == "symmetric") return TargetForm::symmetric;
  if (name == "literal") return TargetForm::literal;
  throw ConfigError("unknown eq1 interpretation '" + name + "' (expected symmetric or literal)");
}

Eigen::VectorXd TaskSpec::metadata() const {
  Eigen::VectorXd md(4);
  md << amplitude_sin, amplitude_cos, freq_sin, freq_cos;
  return md;
}

bool MaskedSample::operator==(const MaskedSample& other) const {
  if (values.size() != other.values.size() || mask.size() != other.mask.size()) return false;
  if ((mask != other.mask).any()) return false;
  if (!(target == other.target || (std::isnan(target) && std::isnan(other.target)))) return false;
  for (Index i = 0; i < values.size(); ++i)
    if (mask[i] && values[i] != other.values[i]) return false;
  return true;
}

void Dataset::validate() const {
  if (feature_count < 1) throw ContractError("dataset: feature_count must be positive");
  if (!group_labels.empty()) {
    if (static_cast<Index>(group_labels.size()) != feature_count)
      throw ContractError("dataset: group_labels length differs from feature_count");
    for (int g : group_labels)
      if (g < 1 || g > 3) throw ContractError("dataset: group labels must be 1, 2 or 3");
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto where = " (sample " + std::to_string(i) + ")";
    if (s.values.size() != feature_count || s.mask.size() != feature_count)
      throw ContractError("dataset: sample width differs from feature_count" + where);
    if (!s.mask.any()) throw AllFeaturesMissing("dataset: sample has no present feature" + where);
    for (Index k = 0; k < feature_count; ++k)
      if (s.mask[k] && !std::isfinite(s.values[k])) throw ContractError("dataset: non-finite present value" + where);
    if (labeled && !std::isfinite(s.target)) throw ContractError("dataset: non-finite target" + where);
  }
}

Eigen::VectorXd Dataset::targets() const {
  Eigen::VectorXd y(static_cast<Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Index>(i)] = samples[i].target;
  return y;
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.feature_count = feature_count;
  out.group_labels = group_labels;
  out.labeled = labeled;
  out.samples.reserve(indices.size());
  for (auto i : indices) out.samples.push_back(samples.at(i));
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  return feature_count == other.feature_count && group_labels == other.group_labels && labeled == other.labeled &&
         samples == other.samples;
}

std::vector<int> benchmark_group_labels() { return {1, 1, 1, 2, 2, 2, 3, 3, 3, 3}; }

double make_target(double z1, double z2, const TaskSpec& spec, TargetForm form) {
  constexpr double pi = std::numbers::pi;
  const double cos_term = spec.amplitude_cos * std::cos(spec.freq_cos * 0.7 * pi * (z1 - z2));
  if (form == TargetForm::literal) return spec.amplitude_sin * std::sin(spec.freq_sin * pi / 4.0) * (z1 + z2) + cos_term;
  return spec.amplitude_sin * std::sin(spec.freq_sin * (pi / 4.0) * (z1 + z2)) + cos_term;
}

LatentPair draw_latents(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentPair z;
  z.z1 = normal(rng);
  z.z2 = normal(rng);
  return z;
}

Eigen::VectorXd make_features(double z1, double z2, double noise_sd, Rng& rng) {
  if (!(noise_sd >= 0)) throw ConfigError("noise_sd must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd x(kBenchmarkFeatures);
  for (Index i = 0; i < 3; ++i) x[i] = z1 + noise_sd * normal(rng);
  for (Index i = 3; i < 6; ++i) x[i] = z2 + noise_sd * normal(rng);
  for (Index i = 6; i < kBenchmarkFeatures; ++i) x[i] = normal(rng);
  return x;
}

Mask draw_missing_mask(Index feature_count, double p_miss, Rng& rng) {
  if (!(p_miss >= 0.0 && p_miss < 1.0)) throw ConfigError("p_miss must lie in [0, 1)");
  if (feature_count < 1) throw ContractError("draw_missing_mask: feature_count must be positive");
  std::bernoulli_distribution missing(p_miss);
  Mask mask(feature_count);
  do {
    for (Index k = 0; k < feature_count; ++k) mask[k] = !missing(rng);
  } while (!mask.any());
  return mask;
}

MaskedSample apply_missing_mask(const Eigen::VectorXd& values, double target, double p_miss, Rng& rng) {
  MaskedSample s;
  s.mask = draw_missing_mask(values.size(), p_miss, rng);
  s.values = s.mask.select(values.array(), kNaN).matrix();
  s.target = target;
  return s;
}

Dataset generate_dataset(std::size_t n, const TaskSpec& spec, std::uint64_t seed, const GenerateOptions& options) {
  if (n < 1) throw ConfigError("generate_dataset: n must be at least 1");
  if (!(options.p_miss >= 0.0 && options.p_miss < 1.0)) throw ConfigError("p_miss must lie in [0, 1)");
  Rng rng = make_rng(seed);
  Dataset data;
  data.feature_count = kBenchmarkFeatures;
  data.group_labels = benchmark_group_labels();
  data.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = draw_latents(rng);
    const Eigen::VectorXd x = make_features(z.z1, z.z2, spec.noise_sd, rng);
    const double y = make_target(z.z1, z.z2, spec, options.form);
    data.samples.push_back(apply_missing_mask(x, y, options.p_miss, rng));
  }
  return data;
}

std::vector<FamilyTask> generate_task_family(const TaskSpec& base, std::size_t n_tasks, double perturbation_scale,
                                             std::uint64_t seed, std::size_t samples_per_task,
                                             const GenerateOptions& options) {
  if (n_tasks < 2) throw ConfigError("generate_task_family: n_tasks must be at least 2");
  if (!(perturbation_scale >= 0)) throw ConfigError("generate_task_family: perturbation_scale must be non-negative");
  Rng rng = make_rng(seed, 0x7a5c);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<FamilyTask> family;
  family.reserve(n_tasks);
  for (std::size_t t = 0; t < n_tasks; ++t) {
    FamilyTask task;
    task.name = (t < 10 ? "task_0" : "task_") + std::to_string(t);
    task.spec = base;
    task.spec.amplitude_sin += perturbation_scale * unit(rng);
    task.spec.amplitude_cos += perturbation_scale * unit(rng);
    task.spec.freq_sin += perturbation_scale * unit(rng);
    task.spec.freq_cos += perturbation_scale * unit(rng);
    task.data = generate_dataset(samples_per_task, task.spec, seed * 1000003ULL + t + 1, options);
    family.push_back(std::move(task));
  }
  return family;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw NumericalError("cannot format number");
  return std::string(buf, end);
}

std::string to_csv(const Dataset& data) {
  data.validate();
  std::string out = "id";
  for (Index k = 0; k < data.feature_count; ++k) out += ",f" + std::to_string(k + 1);
  out += ",y\n";
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    out += std::to_string(i);
    for (Index k = 0; k < data.feature_count; ++k) {
      out += ',';
      if (s.mask[k]) out += format_double(s.values[k]);
    }
    out += ',';
    if (data.labeled) out += format_double(s.target);
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) { write_file_atomic(path, to_csv(data)); }

namespace {

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(std::string_view cell, std::size_t line) {
  double value = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(value))
    throw ParseError("malformed number '" + std::string(cell) + "'", line);
  return value;
}

}  // namespace

Dataset parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  auto next_line = [&](std::string& line) {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  std::string header;
  if (!next_line(header)) throw ParseError("empty file", 0);
  const auto names = split_cells(header);
  if (names.size() < 3 || names.front() != "id" || names.back() != "y")
    throw ParseError("header must be id,f1,...,fK,y", line_no);
  Dataset data;
  data.feature_count = static_cast<Index>(names.size() - 2);
  for (Index k = 0; k < data.feature_count; ++k)
    if (names[static_cast<std::size_t>(k) + 1] != "f" + std::to_string(k + 1))
      throw ParseError("header column " + std::to_string(k + 2) + " must be f" + std::to_string(k + 1), line_no);

  bool any_target = false;
  bool any_missing_target = false;
  while (next_line(raw)) {
    if (raw.empty()) continue;
    const auto cells = split_cells(raw);
    if (cells.size() != names.size())
      throw ParseError("expected " + std::to_string(names.size()) + " cells, found " + std::to_string(cells.size()),
                       line_no);
    MaskedSample s;
    s.values = Eigen::VectorXd::Constant(data.feature_count, kNaN);
    s.mask = Mask::Constant(data.feature_count, false);
    for (Index k = 0; k < data.feature_count; ++k) {
      const auto cell = cells[static_cast<std::size_t>(k) + 1];
      if (cell.empty()) continue;
      s.values[k] = parse_number(cell, line_no);
      s.mask[k] = true;
    }
    if (!s.mask.any()) throw ParseError("row has no present feature", line_no);
    if (cells.back().empty()) {
      s.target = kNaN;
      any_missing_target = true;
    } else {
      s.target = parse_number(cells.back(), line_no);
      any_target = true;
    }
    if (any_target && any_missing_target) throw ParseError("target column is only partially filled", line_no);
    data.samples.push_back(std::move(s));
  }
  data.labeled = !any_missing_target;
  return data;
}

Dataset read_csv(const std::filesystem::path& path) { return parse_csv(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Sidecar

std::string to_sidecar_json(const Sidecar& sidecar) {
  nlohmann::ordered_json j;
  j["feature_count"] = sidecar.feature_count;
  j["group_labels"] = sidecar.group_labels;
  j["task"] = {{"amplitude_sin", sidecar.task.amplitude_sin}, {"amplitude_cos", sidecar.task.amplitude_cos},
               {"freq_sin", sidecar.task.freq_sin},           {"freq_cos", sidecar.task.freq_cos},
               {"noise_sd", sidecar.task.noise_sd}};
  return j.dump(2) + "\n";
}

void write_sidecar(const Sidecar& sidecar, const std::filesystem::path& path) {
  write_file_atomic(path, to_sidecar_json(sidecar));
}

Sidecar read_sidecar(const std::filesystem::path& path) {
  Sidecar s;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    s.feature_count = j.at("feature_count").get<Index>();
    s.group_labels = j.at("group_labels").get<std::vector<int>>();
    const auto& t = j.at("task");
    s.task.amplitude_sin = t.at("amplitude_sin").get<double>();
    s.task.amplitude_cos = t.at("amplitude_cos").get<double>();
    s.task.freq_sin = t.at("freq_sin").get<double>();
    s.task.freq_cos = t.at("freq_cos").get<double>();
    s.task.noise_sd = t.at("noise_sd").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("sidecar '" + path.string() + "': " + e.what(), 0);
  }
  return s;
}

}  // namespace fetl
