#include "fetl/errors.hpp"
#include "fetl/transfer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace fetl;

namespace {

Eigen::MatrixXd gaussian_rows(Index n, Index d, Rng& rng) {
  std::normal_distribution<double> normal;
  return Eigen::MatrixXd::NullaryExpr(n, d, [&] { return normal(rng); });
}

// Independent brute-force MMD: explicit pair lists, sorted median, three kernel sums.
double oracle_mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<Eigen::VectorXd> all;
  for (Index i = 0; i < a.rows(); ++i) all.push_back(a.row(i).transpose());
  for (Index i = 0; i < b.rows(); ++i) all.push_back(b.row(i).transpose());
  std::vector<double> d;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < i; ++j) d.push_back((all[i] - all[j]).norm());
  std::sort(d.begin(), d.end());
  const double sigma = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  auto k = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return std::exp(-(x - y).squaredNorm() / (2 * sigma * sigma));
  };
  const auto na = static_cast<std::size_t>(a.rows());
  double aa = 0, bb = 0, ab = 0;
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = 0; j < all.size(); ++j) {
      const double v = k(all[i], all[j]);
      if (i < na && j < na)
        aa += v;
      else if (i >= na && j >= na)
        bb += v;
      else if (i < na)
        ab += v;
    }
  const double nA = static_cast<double>(a.rows()), nB = static_cast<double>(b.rows());
  return aa / (nA * nA) + bb / (nB * nB) - 2 * ab / (nA * nB);
}

EmbedNetConfig quick_config(std::uint64_t seed, int epochs) {
  EmbedNetConfig c;
  c.seed = seed;
  c.epochs = epochs;
  return c;
}

Dataset rows_to_dataset(const Eigen::MatrixXd& x) {
  Dataset d;
  d.feature_count = x.cols();
  for (Index i = 0; i < x.rows(); ++i)
    d.samples.push_back({x.row(i).transpose(), Mask::Constant(x.cols(), true), 0.0});
  return d;
}

TaskDescriptor task(const std::string& name, Eigen::VectorXd md, Dataset data = {}) {
  if (data.feature_count == 0) data = generate_dataset(10, TaskSpec{}, 1);
  return {name, std::move(md), std::move(data)};
}

}  // namespace

// ---- similarity ----

TEST(Mmd, IdenticalSetsGiveZero) {
  Rng rng = make_rng(1);
  auto a = gaussian_rows(200, 3, rng);
  EXPECT_LE(mmd2(a, a), 1e-12);
  Eigen::MatrixXd reversed = a.colwise().reverse();
  EXPECT_LE(mmd2(a, reversed), 1e-12);
}

TEST(Mmd, ShiftedSetsMatchBruteForce) {
  Rng rng = make_rng(2);
  auto a = gaussian_rows(500, 2, rng);
  Eigen::MatrixXd b = a.array() + 3.0;
  const double value = mmd2(a, b);
  EXPECT_GT(value, 0.1);
  EXPECT_NEAR(value, oracle_mmd2(a, b), 1e-10);
  EXPECT_NEAR(mmd2(b, a), value, 1e-12);
}

TEST(Mmd, Singletons) {
  Eigen::MatrixXd x(1, 2), y(1, 2);
  x << 0, 0;
  y << 1, 1;
  EXPECT_EQ(mmd2(x, x, 1.0), 0.0);
  EXPECT_NEAR(mmd2(x, y, 1.0), 2.0 - 2.0 * std::exp(-1.0), 1e-15);
}

TEST(Mmd, Errors) {
  Eigen::MatrixXd empty(0, 2), one = Eigen::MatrixXd::Ones(1, 2), wide = Eigen::MatrixXd::Ones(1, 3);
  EXPECT_THROW(mmd2(empty, one), ContractError);
  EXPECT_THROW(mmd2(one, wide), ShapeError);
  EXPECT_THROW(mmd2(one, one, 0.0), ConfigError);
}

TEST(MetadataSimilarity, Examples) {
  EXPECT_DOUBLE_EQ(metadata_similarity(Eigen::Vector2d(3, 4), Eigen::Vector2d(3, 4)), 1.0);
  EXPECT_DOUBLE_EQ(metadata_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 2)), 0.0);
  EXPECT_DOUBLE_EQ(metadata_similarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)), -1.0);
  EXPECT_THROW(metadata_similarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0)), ContractError);
}

TEST(MetadataSimilarity, SymmetricAndScaleInvariant) {
  Rng rng = make_rng(3);
  for (int i = 0; i < 100; ++i) {
    Eigen::VectorXd a = gaussian_rows(4, 1, rng), b = gaussian_rows(4, 1, rng);
    const double s = metadata_similarity(a, b);
    EXPECT_NEAR(s, metadata_similarity(b, a), 1e-15);
    EXPECT_NEAR(s, metadata_similarity(7.5 * a, 0.01 * b), 1e-12);
    EXPECT_NEAR(metadata_similarity(a, a), 1.0, 1e-15);
  }
}

TEST(Gate, IdenticalTasksOpenForAnyThresholdUpToOne) {
  auto d = generate_dataset(150, TaskSpec{}, 4, {.p_miss = 0.0});
  TaskDescriptor t{"a", TaskSpec{}.metadata(), d};
  auto g = when_to_transfer(t, t, {1.0, 1.0, 1.0});
  EXPECT_EQ(g.feature_similarity, 1.0);
  EXPECT_NEAR(g.metadata_similarity, 1.0, 1e-15);
  EXPECT_TRUE(g.gate_decision);
}

TEST(Gate, FarTasksClosedAtStrictMetadataThreshold) {
  auto family = generate_task_family(TaskSpec{}, 5, 5.0, 6, 60, {.p_miss = 0.0});
  TaskDescriptor base{"base", TaskSpec{}.metadata(), generate_dataset(60, TaskSpec{}, 7, {.p_miss = 0.0})};
  for (const auto& f : family) {
    auto g = when_to_transfer(base, describe(f), {0.0, 0.99});
    EXPECT_LT(g.metadata_similarity, 0.99) << f.name;
    EXPECT_FALSE(g.gate_decision) << f.name;
  }
}

TEST(Gate, UnlabeledTargetUsesFeaturesAndMetadata) {
  auto src = generate_dataset(80, TaskSpec{}, 8);
  auto tgt = generate_dataset(80, TaskSpec{}, 9);
  tgt.labeled = false;
  auto model = make_model(10, quick_config(0, 0));
  TaskDescriptor s{"s", TaskSpec{}.metadata(), src}, t{"t", TaskSpec{}.metadata(), tgt};
  auto g = when_to_transfer(s, t, {0.0, 0.9}, pooled_code_extractor(model.trunk));
  EXPECT_FALSE(g.label_similarity.has_value());
  EXPECT_TRUE(g.gate_decision);
  EXPECT_THROW(when_to_transfer(s, t, {0.0, 0.9, 0.5}, pooled_code_extractor(model.trunk)), ContractError);
  // Raw vectors cannot represent missing features.
  EXPECT_THROW(when_to_transfer(s, t), ContractError);
}

// ---- parameter transfer ----

TEST(FineTune, ZeroStepsIsIdentity) {
  auto data = generate_dataset(40, TaskSpec{}, 10);
  auto source = make_model(10, quick_config(1, 2));
  train(source, data);
  FineTuneConfig cfg;
  cfg.steps = 0;
  auto r = fine_tune(source, data, data, cfg);
  EXPECT_TRUE(r.model.same_parameters(source));
  EXPECT_EQ(r.negative_transfer, r.transferred_val_loss > r.baseline_val_loss);
}

TEST(FineTune, FrozenTrunkIsBitwiseUnchanged) {
  auto data = generate_dataset(60, TaskSpec{}, 11);
  auto source = make_model(10, quick_config(2, 0));
  for (auto freeze : {Freeze::trunk, Freeze::head_only_trainable}) {
    FineTuneConfig cfg;
    cfg.freeze = freeze;
    cfg.steps = 20;
    auto r = fine_tune(source, data, data, cfg);
    EXPECT_TRUE(r.model.trunk == source.trunk);
    EXPECT_FALSE(r.model.head == source.head);
  }
  FineTuneConfig cfg;
  cfg.steps = 20;
  auto r = fine_tune(source, data, data, cfg);
  EXPECT_FALSE(r.model.trunk.embedding_table == source.trunk.embedding_table);
}

TEST(FineTune, ArchitectureMismatchRejected) {
  auto source = make_model(10, quick_config(0, 0));
  Dataset narrow = generate_dataset(10, TaskSpec{}, 1);
  Rng rng = make_rng(1);
  Dataset five;
  five.feature_count = 5;
  for (int i = 0; i < 5; ++i) five.samples.push_back(apply_missing_mask(gaussian_rows(5, 1, rng), 0.0, 0.0, rng));
  EXPECT_THROW(fine_tune(source, five, five, {}), ContractError);
  EXPECT_NO_THROW(fine_tune(source, narrow, narrow, {.steps = 1}));
}

TEST(FineTune, NearTaskBeatsScratchMostSeeds) {
  auto source_data = generate_dataset(1000, TaskSpec{}, 100);
  auto source = make_model(10, quick_config(0, 150));
  train(source, source_data);
  auto family = generate_task_family(TaskSpec{}, 10, 0.1, 12, 50);
  int wins = 0;
  for (std::size_t s = 0; s < family.size(); ++s) {
    auto val = generate_dataset(300, family[s].spec, 200 + s);
    FineTuneConfig cfg;
    cfg.seed = s;
    auto r = fine_tune(source, family[s].data, val, cfg);
    EXPECT_EQ(r.negative_transfer, r.transferred_val_loss > r.baseline_val_loss);
    wins += r.transferred_val_loss <= r.baseline_val_loss;
  }
  EXPECT_GE(wins, 7);
}

TEST(HardShared, SingleTaskEqualsTrain) {
  auto data = generate_dataset(120, TaskSpec{}, 13);
  auto cfg = quick_config(3, 4);
  std::vector<TaskDescriptor> tasks{{"only", TaskSpec{}.metadata(), data}};
  auto shared = train_hard_shared(tasks, cfg);
  auto plain = make_model(10, cfg);
  auto trace = train(plain, data, cfg);
  EXPECT_TRUE(shared.view(0).same_parameters(plain));
  EXPECT_EQ(shared.traces.front(), trace);
}

TEST(HardShared, IdenticalTasksSimilarLossesSharedTrunk) {
  auto data = generate_dataset(300, TaskSpec{}, 14);
  std::vector<TaskDescriptor> tasks{{"a", TaskSpec{}.metadata(), data}, {"b", TaskSpec{}.metadata(), data}};
  auto shared = train_hard_shared(tasks, quick_config(4, 30));
  ASSERT_EQ(shared.heads.size(), 2u);
  const double la = shared.traces[0].val_loss.back(), lb = shared.traces[1].val_loss.back();
  EXPECT_LE(std::max(la, lb), 2.0 * std::min(la, lb));
  EXPECT_TRUE(shared.view(0).trunk == shared.view(1).trunk);
  EXPECT_THROW(shared.view(2), ContractError);
}

TEST(HardShared, FeatureCountMismatchRejected) {
  Dataset five;
  five.feature_count = 5;
  std::vector<TaskDescriptor> tasks{{"a", TaskSpec{}.metadata(), generate_dataset(10, TaskSpec{}, 1)},
                                    {"b", TaskSpec{}.metadata(), five}};
  EXPECT_THROW(train_hard_shared(tasks, quick_config(0, 1)), ContractError);
}

// ---- weighted training ----

TEST(WeightedTrain, UnitWeightsMatchTrain) {
  auto data = generate_dataset(80, TaskSpec{}, 15);
  auto cfg = quick_config(5, 3);
  auto a = make_model(10, cfg), b = make_model(10, cfg);
  std::vector<double> ones(data.size(), 1.0);
  EXPECT_EQ(weighted_train(a, data, ones, cfg), train(b, data, cfg));
  EXPECT_TRUE(a.same_parameters(b));
}

TEST(WeightedTrain, ZeroWeightContributesNoGradient) {
  auto data = generate_dataset(4, TaskSpec{}, 16);
  auto m = make_model(10, quick_config(6, 0));
  std::vector<double> w{1, 0, 1, 1};
  std::vector<std::size_t> only{1};
  auto g = loss_and_gradients(m.trunk, m.head, data, only, w);
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_TRUE(flatten_gradients(g).isZero(0.0));
}

TEST(WeightedTrain, DoubledWeightsHalvedLrSameSgdStep) {
  auto data = generate_dataset(64, TaskSpec{}, 17);
  auto cfg = quick_config(7, 1);
  cfg.batch_size = 64;
  cfg.train_fraction = 0.5;
  cfg.embedding_decay = 0.0;
  cfg.optimizer = {OptimizerConfig::Kind::sgd, 0.01};
  auto a = make_model(10, cfg), b = make_model(10, cfg);
  weighted_train(a, data, std::vector<double>(data.size(), 1.0), cfg);
  auto half = cfg;
  half.optimizer.lr = 0.005;
  weighted_train(b, data, std::vector<double>(data.size(), 2.0), half);
  const Eigen::VectorXd pa = flatten_parameters(a), pb = flatten_parameters(b);
  EXPECT_LE((pa - pb).cwiseAbs().maxCoeff(), 1e-12);

  // Adam normalizes gradient scale, so doubled weights give nearly the same first step.
  cfg.optimizer = {OptimizerConfig::Kind::adam, 0.01};
  auto c = make_model(10, cfg), d = make_model(10, cfg), init = make_model(10, cfg);
  weighted_train(c, data, std::vector<double>(data.size(), 1.0), cfg);
  weighted_train(d, data, std::vector<double>(data.size(), 2.0), cfg);
  const Eigen::VectorXd step_c = flatten_parameters(c) - flatten_parameters(init);
  const Eigen::VectorXd step_d = flatten_parameters(d) - flatten_parameters(init);
  EXPECT_LE((step_c - step_d).norm(), 1e-3 * step_c.norm());
}

TEST(WeightedTrain, NegativeWeightRejected) {
  auto data = generate_dataset(10, TaskSpec{}, 18);
  auto m = make_model(10, quick_config(0, 1));
  std::vector<double> w(10, 1.0);
  w[3] = -1;
  EXPECT_THROW(weighted_train(m, data, w, m.config), ContractError);
}

// ---- instance reweighting ----

TEST(Reweight, SameDistributionNearOne) {
  Rng rng = make_rng(19);
  auto src = rows_to_dataset(gaussian_rows(500, 3, rng));
  auto tgt = rows_to_dataset(gaussian_rows(500, 3, rng));
  auto w = instance_reweight(src, tgt, raw_features);
  const auto inside = std::count_if(w.begin(), w.end(), [](double v) { return v >= 0.5 && v <= 2.0; });
  EXPECT_GE(static_cast<double>(inside), 0.95 * 500);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0) / 500.0, 1.0, 1e-9);
}

TEST(Reweight, TargetLikeSourcePointsWeighMore) {
  Rng rng = make_rng(20);
  Eigen::MatrixXd near = gaussian_rows(250, 2, rng);
  Eigen::MatrixXd far = gaussian_rows(250, 2, rng).array() + 4.0;
  Eigen::MatrixXd src(500, 2);
  src << near, far;
  auto w = instance_reweight(rows_to_dataset(src), rows_to_dataset(gaussian_rows(400, 2, rng)), raw_features);
  std::vector<double> wn(w.begin(), w.begin() + 250), wf(w.begin() + 250, w.end());
  std::nth_element(wn.begin(), wn.begin() + 125, wn.end());
  std::nth_element(wf.begin(), wf.begin() + 125, wf.end());
  EXPECT_GT(wn[125], wf[125]);
  for (double v : w) EXPECT_GE(v, 0.0);
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0) / 500.0, 1.0, 1e-9);
}

// ---- autoencoder ----

TEST(Autoencoder, RecoversRankTwoData) {
  // Ten features driven by two latents, no noise, nothing missing.
  Rng rng = make_rng(21);
  Eigen::MatrixXd mix(10, 2);
  mix << 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1, 0.5, 0.5, 0.5, -0.5, -0.3, 0.8, 0.8, 0.3;
  Eigen::MatrixXd x = gaussian_rows(600, 2, rng) * mix.transpose();
  auto data = rows_to_dataset(x);
  AutoencoderConfig cfg;
  cfg.epochs = 150;
  auto ae = autoencoder_fit(data, cfg);
  EXPECT_LT(reconstruction_mse(ae, data), 0.05);
}

TEST(Autoencoder, ZeroWeightsReconstructBiases) {
  auto ae = make_autoencoder(10, {});
  for (auto* mlp : {&ae.encoder, &ae.decoder})
    for (auto& l : mlp->layers) l.weights.setZero();
  ae.decoder.layers.back().biases = Eigen::VectorXd::LinSpaced(10, -1, 1);
  auto s = generate_dataset(1, TaskSpec{}, 22).samples.front();
  EXPECT_EQ(autoencoder_reconstruct(ae, s), ae.decoder.layers.back().biases);
}

TEST(Autoencoder, EncodeDeterministicAndMaskAware) {
  auto ae = make_autoencoder(10, {});
  auto s = generate_dataset(1, TaskSpec{}, 23, {.p_miss = 0.0}).samples.front();
  EXPECT_EQ(autoencoder_encode(ae, s), autoencoder_encode(ae, s));
  auto masked = s;
  masked.mask[0] = false;
  masked.values[0] = std::nan("");
  auto in = autoencoder_input(masked);
  EXPECT_EQ(in[0], 0.0);
  EXPECT_EQ(in[10], 0.0);
  EXPECT_EQ(in[11], 1.0);
  EXPECT_TRUE(autoencoder_encode(ae, masked).allFinite());
}

TEST(Autoencoder, LossIgnoresMissingEntries) {
  auto data = generate_dataset(30, TaskSpec{}, 24);
  auto ae = make_autoencoder(10, {});
  const double before = reconstruction_mse(ae, data);
  auto corrupted = data;
  for (auto& s : corrupted.samples)
    for (Index k = 0; k < 10; ++k)
      if (!s.mask[k]) s.values[k] = 1e6;
  EXPECT_EQ(reconstruction_mse(ae, corrupted), before);
}

TEST(Autoencoder, BottleneckMustBeSmallerThanK) {
  AutoencoderConfig cfg;
  cfg.bottleneck = 10;
  EXPECT_THROW(make_autoencoder(10, cfg), ConfigError);
}

// ---- scenarios ----

TEST(SelectSource, ExactMetadataMatchChosen) {
  std::vector<TaskDescriptor> s{task("a", Eigen::Vector2d(1, 0)), task("b", Eigen::Vector2d(0.6, 0.8)),
                                task("c", Eigen::Vector2d(0, 1))};
  EXPECT_EQ(select_source(s, Eigen::Vector2d(0.6, 0.8)), 1u);
}

TEST(SelectSource, TieGoesToLowestName) {
  std::vector<TaskDescriptor> s{task("zeta", Eigen::Vector2d(1, 0)), task("alpha", Eigen::Vector2d(2, 0)),
                                task("mid", Eigen::Vector2d(0, 1))};
  EXPECT_EQ(select_source(s, Eigen::Vector2d(5, 0)), 1u);
  EXPECT_THROW(select_source({}, Eigen::Vector2d(1, 0)), ContractError);
}

TEST(SelectSource, MatchesExhaustiveArgmaxOnRandomFamilies) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto family = generate_task_family(TaskSpec{}, 6, 0.5, seed, 2);
    std::vector<TaskDescriptor> sources;
    for (std::size_t i = 0; i + 1 < family.size(); ++i) sources.push_back(describe(family[i]));
    const Eigen::VectorXd target = family.back().spec.metadata();
    std::size_t best = 0;
    double best_cos = -2;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      const Eigen::VectorXd m = sources[i].metadata;
      const double c = m.dot(target) / (m.norm() * target.norm());
      if (c > best_cos) best_cos = c, best = i;
    }
    EXPECT_EQ(select_source(sources, target), best) << "seed " << seed;
  }
}

TEST(ZeroShot, AppliesChosenModelUnchanged) {
  auto family = generate_task_family(TaskSpec{}, 3, 0.3, 25, 20);
  std::vector<TaskDescriptor> sources;
  std::vector<FeatureEmbeddingModel> models;
  for (std::size_t i = 0; i < family.size(); ++i) {
    sources.push_back(describe(family[i]));
    models.push_back(make_model(10, quick_config(i, 0)));
  }
  TaskDescriptor target{"t", family[2].spec.metadata(), generate_dataset(15, family[2].spec, 26)};
  target.data.labeled = false;
  auto r = zero_shot(sources, models, target);
  EXPECT_EQ(r.chosen, 2u);
  EXPECT_EQ(r.predictions, predict(models[2], target.data));
  EXPECT_EQ(r.similarities.size(), 3u);
}

TEST(FewShot, FullDatasetReducesToFineTune) {
  auto family = generate_task_family(TaskSpec{}, 2, 0.1, 27, 30);
  std::vector<TaskDescriptor> sources{describe(family[0]), describe(family[1])};
  std::vector<FeatureEmbeddingModel> models{make_model(10, quick_config(0, 0)), make_model(10, quick_config(1, 0))};
  TaskDescriptor target{"t", family[1].spec.metadata(), generate_dataset(30, family[1].spec, 28)};
  auto val = generate_dataset(20, family[1].spec, 29);
  FineTuneConfig cfg;
  cfg.steps = 10;
  auto r = few_shot(sources, models, target, val, cfg);
  auto direct = fine_tune(models[r.chosen], target.data, val, cfg);
  EXPECT_EQ(r.chosen, 1u);
  EXPECT_TRUE(r.tuned.model.same_parameters(direct.model));
  EXPECT_EQ(r.report.negative_transfer, *r.report.transferred_val_loss > *r.report.baseline_val_loss);
}

TEST(Experiment, ImpossibleGateSkipsTransfer) {
  auto spec = experiment_from_json(nlohmann::json::parse(R"({
    "family": {"n_tasks": 2, "perturbation_scale": 0.1},
    "mode": "few_shot", "n_target_samples": 10, "seeds": [3],
    "source_samples": 40, "validation_samples": 20,
    "thresholds": {"feature": 1.5, "metadata": 1.5},
    "embednet": {"epochs": 1}
  })"));
  auto r = run_experiment(spec);
  ASSERT_EQ(r.seeds.size(), 1u);
  const auto& rep = r.seeds[0].report;
  EXPECT_FALSE(rep.gate.gate_decision);
  EXPECT_FALSE(rep.transfer_performed);
  EXPECT_NE(rep.note.find("skipped"), std::string::npos);
  EXPECT_EQ(r.transfers_performed, 0u);
  auto j = to_json(r, spec);
  EXPECT_TRUE(j["seeds"][0]["report"]["transferred_val_loss"].is_null());
}

TEST(Experiment, ZeroShotNamesChosenSource) {
  auto spec = experiment_from_json(nlohmann::json::parse(R"({
    "family": {"n_tasks": 5, "perturbation_scale": 0.3},
    "mode": "zero_shot", "seeds": [0, 1],
    "source_samples": 40, "validation_samples": 20,
    "thresholds": {"feature": 0.0, "metadata": -1.0},
    "embednet": {"epochs": 1}
  })"));
  auto r = run_experiment(spec);
  for (const auto& s : r.seeds) {
    std::size_t best = static_cast<std::size_t>(
        std::max_element(s.metadata_similarities.begin(), s.metadata_similarities.end()) -
        s.metadata_similarities.begin());
    EXPECT_EQ(s.report.source_name, s.source_names[best]);
    EXPECT_TRUE(s.report.transfer_performed);
    EXPECT_EQ(s.report.negative_transfer, *s.report.transferred_val_loss > *s.report.baseline_val_loss);
  }
}

TEST(Experiment, UnknownKeysRejected) {
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"famly": {}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"family": {"n": 1}})")), ConfigError);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"mode": "sideways"})")), ConfigError);
}
