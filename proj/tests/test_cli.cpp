#include "fetl/checkpoint.hpp"
#include "fetl/io.hpp"
#include "fetl/synthdata.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("fetl_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string& args) const {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd =
        std::string(FETL_CLI_PATH) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = fetl::read_text_file(out);
    r.err = fetl::read_text_file(err);
    fs::remove(out);
    fs::remove(err);
    return r;
  }

  std::string out(const std::string& sub = "") const { return "--out '" + (dir_ / sub).string() + "'"; }
  fs::path path(const std::string& name) const { return dir_ / name; }
  std::string read(const std::string& name) const { return fetl::read_text_file(dir_ / name); }
  json read_json(const std::string& name) const { return json::parse(read(name)); }

  void write(const std::string& name, const std::string& text) const { fetl::write_file_atomic(dir_ / name, text); }

  fs::path dir_;
};

std::size_t line_count(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_F(Cli, GenerateDefaultBenchmark) {
  auto r = run("generate " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto data = fetl::read_csv(path("bench.csv"));
  EXPECT_EQ(data.size(), 1000u);
  EXPECT_EQ(data.feature_count, 10);
  EXPECT_EQ(read("bench.csv").substr(0, 30), "id,f1,f2,f3,f4,f5,f6,f7,f8,f9,");
  const auto side = fetl::read_sidecar(path("bench.json"));
  EXPECT_EQ(side.group_labels, fetl::benchmark_group_labels());
}

TEST_F(Cli, NoMissingCellsWhenPMissZero) {
  ASSERT_EQ(run("generate --p-miss 0 " + out()).code, 0);
  std::istringstream lines(read("bench.csv"));
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.find(",,"), std::string::npos) << line;
    EXPECT_NE(line.back(), ',');
  }
}

TEST_F(Cli, SameSeedByteIdentical) {
  ASSERT_EQ(run("generate --seed 7 " + out("a")).code, 0);
  ASSERT_EQ(run("generate --seed 7 " + out("b")).code, 0);
  ASSERT_EQ(run("generate --seed 8 " + out("c")).code, 0);
  EXPECT_EQ(read("a/bench.csv"), read("b/bench.csv"));
  EXPECT_EQ(read("a/bench.json"), read("b/bench.json"));
  EXPECT_NE(read("a/bench.csv"), read("c/bench.csv"));

  for (const char* sub : {"a", "b"}) {
    const std::string o = out(sub);
    ASSERT_EQ(run("train --seed 7 --epochs 3 " + o).code, 0);
    ASSERT_EQ(run("embeddings " + o).code, 0);
  }
  for (const char* file : {"checkpoint.json", "trace.csv", "embeddings.csv", "embedding_metrics.json"})
    EXPECT_EQ(read(std::string("a/") + file), read(std::string("b/") + file)) << file;
}

TEST_F(Cli, TrainWritesCheckpointAndTrace) {
  ASSERT_EQ(run("generate --generate.n_samples 200 " + out()).code, 0);
  auto r = run("train --epochs 4 " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json("checkpoint.json")["format_version"], 1);
  const auto trace = read("trace.csv");
  EXPECT_EQ(trace.substr(0, trace.find('\n')), "epoch,train_loss,val_loss");
  EXPECT_EQ(line_count(trace), 5u);
  EXPECT_EQ(fetl::load_checkpoint(path("checkpoint.json")).config.epochs, 4);
}

TEST_F(Cli, ZeroEpochsCheckpointIsInitialization) {
  ASSERT_EQ(run("generate --generate.n_samples 50 " + out()).code, 0);
  ASSERT_EQ(run("train --epochs 0 --seed 5 " + out()).code, 0);
  fetl::EmbedNetConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 5;
  const auto init = fetl::make_model(10, cfg);
  EXPECT_TRUE(fetl::load_checkpoint(path("checkpoint.json")).same_parameters(init));
  EXPECT_EQ(line_count(read("trace.csv")), 1u);
}

TEST_F(Cli, EmbeddingsOnUntrainedCheckpoint) {
  ASSERT_EQ(run("generate --generate.n_samples 50 " + out()).code, 0);
  ASSERT_EQ(run("train --epochs 0 " + out()).code, 0);
  auto r = run("embeddings " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(line_count(read("embeddings.csv")), 11u);
  EXPECT_EQ(read("embeddings.csv").substr(0, 34), "feature_index,group_label,e1,e2\n1,");
  const auto m = read_json("embedding_metrics.json");
  EXPECT_TRUE(m.contains("silhouette"));
  EXPECT_TRUE(m["groups_1_2"].contains("within_below_between"));
}

TEST_F(Cli, EmbeddingsNeedSidecar) {
  ASSERT_EQ(run("generate --generate.n_samples 50 " + out()).code, 0);
  ASSERT_EQ(run("train --epochs 0 " + out()).code, 0);
  fs::remove(path("bench.json"));
  auto r = run("embeddings " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("embeddings.csv")));
  EXPECT_FALSE(fs::exists(path("embedding_metrics.json")));
}

TEST_F(Cli, TrainMissingDataFails) {
  auto r = run("train " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("bench.csv"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("checkpoint.json")));
}

TEST_F(Cli, ZeroShotReportNamesSourcePerSeed) {
  write("cfg.json", R"({"transfer": {"mode": "zero_shot", "seeds": [0, 1], "source_samples": 200,
                         "validation_samples": 100, "embednet": {"epochs": 3}}})");
  auto r = run("transfer --config '" + path("cfg.json").string() + "' " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = read_json("transfer_report.json");
  EXPECT_EQ(rep["mode"], "zero_shot");
  ASSERT_EQ(rep["seeds"].size(), 2u);
  for (const auto& s : rep["seeds"]) {
    EXPECT_EQ(s["sources"].size(), 5u);
    EXPECT_EQ(s["chosen_source"], s["report"]["source_name"]);
    EXPECT_EQ(s["chosen_source"].get<std::string>().rfind("task_", 0), 0u);
  }
}

TEST_F(Cli, ImpossibleGateSkipsTransfer) {
  auto r = run("transfer --transfer.seeds [3] --transfer.thresholds.metadata 1.5 --transfer.source_samples 100 "
               "--transfer.validation_samples 50 --epochs 2 " +
               out());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto s = read_json("transfer_report.json")["seeds"][0]["report"];
  EXPECT_FALSE(s["gate_decision"].get<bool>());
  EXPECT_FALSE(s["transfer_performed"].get<bool>());
  EXPECT_NE(s["note"].get<std::string>().find("transfer skipped"), std::string::npos);
}

TEST_F(Cli, DetectMissingCheckpointLeavesNothing) {
  auto r = run("detect --checkpoint '" + path("nope.json").string() + "' " + out("rep"));
  EXPECT_NE(r.code, 0);
  EXPECT_FALSE(fs::exists(path("rep/detection_report.json")));
  EXPECT_FALSE(fs::exists(path("rep/detection_report.json.tmp")));
}

TEST_F(Cli, DetectQuantileHalfFlagsHalfOfFreshNormals) {
  ASSERT_EQ(run("generate --generate.n_samples 300 " + out()).code, 0);
  ASSERT_EQ(run("train --epochs 5 " + out()).code, 0);
  auto r = run("detect --quantile 0.5 " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = read_json("detection_report.json");
  EXPECT_EQ(rep["quantile"], 0.5);
  EXPECT_NEAR(rep["metrics"]["fresh_false_positive_rate"].get<double>(), 0.5, 0.05);
  for (const auto& e : rep["results"])
    EXPECT_EQ(e["is_anomaly"].get<bool>(), e["score"].get<double>() > rep["threshold"].get<double>());

  ASSERT_EQ(run("detect --quantile 0.5 " + out("again") + " --checkpoint '" + path("checkpoint.json").string() + "'")
                .code,
            0);
  EXPECT_EQ(read("detection_report.json"), read("again/detection_report.json"));
}

TEST_F(Cli, DetectAutoencoderNeedsNoCheckpoint) {
  auto r = run("detect --extractor autoencoder --detect.autoencoder.epochs 5 --detect.test_samples 200 " + out());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_json("detection_report.json")["extractor"], "autoencoder");
}

TEST_F(Cli, GradcheckPassesAndFailsWithInjectedBug) {
  auto ok = run("gradcheck " + out());
  ASSERT_EQ(ok.code, 0) << ok.err;
  auto rep = read_json("gradcheck_report.json");
  EXPECT_TRUE(rep["pass"].get<bool>());
  EXPECT_LT(rep["max_rel_err"].get<double>(), 1e-4);
  EXPECT_EQ(rep["blocks"].size(), 3u);

  auto bad = run("gradcheck --inject-bug " + out());
  EXPECT_EQ(bad.code, 2);
  rep = read_json("gradcheck_report.json");
  EXPECT_FALSE(rep["pass"].get<bool>());
}

TEST_F(Cli, UnknownConfigKeysNamed) {
  write("cfg.json", R"({"embednet": {"epochs": 1, "colour": "blue"}})");
  auto r = run("train --config '" + path("cfg.json").string() + "' " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("embednet.colour"), std::string::npos) << r.err;

  r = run("generate --generate.bogus 1 " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("generate.bogus"), std::string::npos) << r.err;

  r = run("transfer --transfer.family.size 3 " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("transfer.family.size"), std::string::npos) << r.err;

  r = run("generate --embednet.seed 3 " + out());
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(fs::exists(path("bench.csv")));
}

TEST_F(Cli, FlagsOverrideFileOverridesDefaults) {
  write("cfg.json", R"({"generate": {"n_samples": 20}, "seed": 2})");
  const std::string cfg = "--config '" + path("cfg.json").string() + "' ";
  ASSERT_EQ(run("generate " + cfg + out("file")).code, 0);
  ASSERT_EQ(run("generate " + cfg + "--generate.n_samples 30 " + out("flag")).code, 0);
  ASSERT_EQ(run("generate --seed 2 --generate.n_samples 20 " + out("plain")).code, 0);
  EXPECT_EQ(fetl::read_csv(path("file/bench.csv")).size(), 20u);
  EXPECT_EQ(fetl::read_csv(path("flag/bench.csv")).size(), 30u);
  EXPECT_EQ(read("file/bench.csv"), read("plain/bench.csv"));
}

TEST_F(Cli, LiteralInterpretationSelectable) {
  ASSERT_EQ(run("generate --seed 1 --eq1 literal --p-miss 0 --generate.n_samples 5 " + out("lit")).code, 0);
  ASSERT_EQ(run("generate --seed 1 --p-miss 0 --generate.n_samples 5 " + out("sym")).code, 0);
  const auto lit = fetl::read_csv(path("lit/bench.csv"));
  const auto sym = fetl::read_csv(path("sym/bench.csv"));
  EXPECT_EQ(lit.samples[0].values, sym.samples[0].values);
  EXPECT_NE(lit.targets(), sym.targets());
  EXPECT_EQ(run("generate --eq1 sideways " + out("bad")).code, 1);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("generate stray " + out()).code, 1);
  write("broken.json", "{\"seed\": ");
  EXPECT_EQ(run("generate --config '" + path("broken.json").string() + "' " + out()).code, 1);
  EXPECT_EQ(run("generate --config '" + path("absent.json").string() + "' " + out()).code, 1);
  EXPECT_EQ(run("--help").code, 0);
}
