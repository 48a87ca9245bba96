#include "fetl/checkpoint.hpp"

#include "fetl/errors.hpp"
#include "fetl/io.hpp"

#include <set>
#include <string>

namespace fetl {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
}

std::string optimizer_name(OptimizerConfig::Kind k) { return k == OptimizerConfig::Kind::adam ? "adam" : "sgd"; }

OptimizerConfig::Kind optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerConfig::Kind::adam;
  if (name == "sgd") return OptimizerConfig::Kind::sgd;
  throw ConfigError("unknown optimizer '" + name + "'");
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& rows) {
  if (!rows.is_array()) throw ParseError("checkpoint: matrix must be an array of rows", 0);
  const auto r = static_cast<Index>(rows.size());
  const auto c = r ? static_cast<Index>(rows.front().size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Index i = 0; i < r; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) throw ParseError("checkpoint: ragged matrix", 0);
    for (Index k = 0; k < c; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

nlohmann::ordered_json matrix_to_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::ordered_json config_to_json(const EmbedNetConfig& c) {
  nlohmann::ordered_json j;
  j["embedding_dim"] = c.embedding_dim;
  j["encoder_hidden"] = c.encoder_hidden;
  j["code_dim"] = c.code_dim;
  j["head_hidden"] = c.head_hidden;
  j["activation"] = std::string(to_string(c.activation));
  j["optimizer"] = {{"kind", optimizer_name(c.optimizer.kind)},
                    {"lr", c.optimizer.lr},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"eps", c.optimizer.eps},
                    {"weight_decay", c.optimizer.weight_decay}};
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["train_fraction"] = c.train_fraction;
  j["embedding_decay"] = c.embedding_decay;
  return j;
}

EmbedNetConfig config_from_json(const nlohmann::json& j, const EmbedNetConfig& defaults) {
  reject_unknown(j,
                 {"embedding_dim", "encoder_hidden", "code_dim", "head_hidden", "activation", "optimizer", "epochs",
                  "batch_size", "seed", "train_fraction", "embedding_decay"},
                 "embednet");
  EmbedNetConfig c = defaults;
  try {
    if (j.contains("embedding_dim")) c.embedding_dim = j["embedding_dim"].get<Index>();
    if (j.contains("encoder_hidden")) c.encoder_hidden = j["encoder_hidden"].get<std::vector<Index>>();
    if (j.contains("code_dim")) c.code_dim = j["code_dim"].get<Index>();
    if (j.contains("head_hidden")) c.head_hidden = j["head_hidden"].get<std::vector<Index>>();
    if (j.contains("activation")) c.activation = activation_from_string(j["activation"].get<std::string>());
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      reject_unknown(o, {"kind", "lr", "beta1", "beta2", "eps", "weight_decay"}, "embednet.optimizer");
      if (o.contains("kind")) c.optimizer.kind = optimizer_kind(o["kind"].get<std::string>());
      if (o.contains("lr")) c.optimizer.lr = o["lr"].get<double>();
      if (o.contains("beta1")) c.optimizer.beta1 = o["beta1"].get<double>();
      if (o.contains("beta2")) c.optimizer.beta2 = o["beta2"].get<double>();
      if (o.contains("eps")) c.optimizer.eps = o["eps"].get<double>();
      if (o.contains("weight_decay")) c.optimizer.weight_decay = o["weight_decay"].get<double>();
    }
    if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<Index>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("train_fraction")) c.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("embedding_decay")) c.embedding_decay = j["embedding_decay"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("embednet config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::ordered_json mlp_to_json(const Mlp<double>& mlp) {
  auto layers = nlohmann::ordered_json::array();
  for (const auto& l : mlp.layers) {
    nlohmann::ordered_json layer;
    layer["w"] = matrix_to_json(l.weights);
    layer["b"] = std::vector<double>(l.biases.data(), l.biases.data() + l.biases.size());
    layer["act"] = std::string(to_string(l.activation));
    layers.push_back(std::move(layer));
  }
  return layers;
}

Mlp<double> mlp_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("checkpoint: layer list must be an array", 0);
  Mlp<double> mlp;
  for (const auto& layer : j) {
    DenseLayer<double> l;
    l.weights = matrix_from_json(layer.at("w"));
    const auto b = layer.at("b").get<std::vector<double>>();
    l.biases = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Index>(b.size()));
    l.activation = activation_from_string(layer.at("act").get<std::string>());
    mlp.layers.push_back(std::move(l));
  }
  mlp.validate();
  return mlp;
}

nlohmann::ordered_json model_to_json(const FeatureEmbeddingModel& model) {
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = config_to_json(model.config);
  j["embedding_table"] = matrix_to_json(model.trunk.embedding_table);
  j["encoder"] = mlp_to_json(model.trunk.encoder);
  j["head"] = mlp_to_json(model.head);
  return j;
}

FeatureEmbeddingModel model_from_json(const nlohmann::json& j) {
  FeatureEmbeddingModel m;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw ParseError("checkpoint: unsupported format_version " + std::to_string(version), 0);
    m.config = config_from_json(j.at("config"));
    m.trunk.embedding_table = matrix_from_json(j.at("embedding_table"));
    m.trunk.encoder = mlp_from_json(j.at("encoder"));
    m.head = mlp_from_json(j.at("head"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  m.validate();
  return m;
}

void save_checkpoint(const FeatureEmbeddingModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_json(model).dump() + "\n");
}

FeatureEmbeddingModel load_checkpoint(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint '" + path.string() + "': " + e.what(), 0);
  }
  return model_from_json(j);
}

}  // namespace fetl
