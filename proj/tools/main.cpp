#include "commands.hpp"

#include "fetl/errors.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

using namespace fetl;
using namespace fetl::cli;

int main(int argc, char** argv) {
  CLI::App app{"Feature-embedding networks: synthetic benchmark, training, transfer and anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();
  app.allow_extras();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--seed", seed, "seed for every random draw");
  app.add_option("--out", out_dir, "output directory (default: current directory)");

  const std::map<std::string, std::pair<std::string, std::function<int(const RunConfig&, std::ostream&)>>> commands{
      {"generate", {"write the synthetic benchmark as CSV plus sidecar JSON", cmd_generate}},
      {"train", {"train a feature-embedding model; writes checkpoint and trace", cmd_train}},
      {"embeddings", {"export learned feature embeddings and cluster metrics", cmd_embeddings}},
      {"transfer", {"run a zero- or few-shot transfer experiment", cmd_transfer}},
      {"detect", {"run the anomaly injection experiment", cmd_detect}},
      {"gradcheck", {"compare analytic and finite-difference gradients", cmd_gradcheck}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->allow_extras();
    sub->footer("Any config key can be overridden with --dot.path value, e.g. --embednet.epochs 50.");
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kUserError;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      nlohmann::json root = config_path.empty() ? nlohmann::json::object() : load_config_file(config_path);
      apply_overrides(root, app.remaining(true), name);
      if (seed) root["seed"] = *seed;
      if (!out_dir.empty()) root["paths"]["out"] = out_dir;
      const auto config = run_config_from_json(root);
      return commands.at(name).second(config, std::cout);
    } catch (const NumericalError& e) {
      std::cerr << "fetl " << name << ": numerical failure: " << e.what() << "\n";
      return kNumericalFailure;
    } catch (const std::exception& e) {
      std::cerr << "fetl " << name << ": error: " << e.what() << "\n";
      return kUserError;
    }
  }
  return kUserError;
}
