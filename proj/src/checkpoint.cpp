#include "pcho/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "pcho/baselines.hpp"
#include "pcho/error.hpp"
#include "pcho/network.hpp"

namespace pcho {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t parse_hex64(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 16);
    if (used != s.size()) throw SchemaError("bad hex value '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw SchemaError("bad hex value '" + s + "'");
  }
}

const char* mode_name(FeatureMode m) { return m == FeatureMode::Full ? "full" : "sinr_only"; }

FeatureMode mode_from(const std::string& s) {
  if (s == "full") return FeatureMode::Full;
  if (s == "sinr_only") return FeatureMode::SinrOnly;
  throw SchemaError("unknown feature_mode '" + s + "'");
}

json tree_to_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
  return nodes;
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  for (const auto& n : j) {
    RegressionTree::Node node;
    node.feature = n.at(0).get<int>();
    node.threshold = n.at(1).get<double>();
    node.left = n.at(2).get<int>();
    node.right = n.at(3).get<int>();
    node.value = n.at(4).get<double>();
    t.nodes.push_back(node);
  }
  return t;
}

}  // namespace

json norm_to_json(const NormStats& norm) {
  return {{"feature_mode", mode_name(norm.mode)}, {"mean", norm.mean}, {"stddev", norm.stddev}};
}

NormStats norm_from_json(const json& j) {
  NormStats n;
  n.mode = mode_from(j.at("feature_mode").get<std::string>());
  n.mean = j.at("mean").get<std::vector<double>>();
  n.stddev = j.at("stddev").get<std::vector<double>>();
  if (n.mean.size() != n.stddev.size() || n.mean.size() != static_cast<std::size_t>(feature_count(n.mode))) {
    throw SchemaError("norm stats width does not match feature mode");
  }
  return n;
}

void save_checkpoint(const Predictor& model, const TrainingManifest& manifest, const std::filesystem::path& path) {
  json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["kind"] = to_string(model.kind());
  j["window"] = model.window();
  j["feature_mode"] = mode_name(model.feature_mode());
  j["output_dim"] = model.output_dim();
  j["norm"] = norm_to_json(model.norm());

  if (const auto* net = dynamic_cast<const SequenceRegressor*>(&model)) {
    const auto& a = net->architecture();
    j["architecture"] = {{"recurrent_layers", a.recurrent_layers},
                         {"bidirectional", a.bidirectional},
                         {"hidden", a.hidden},
                         {"dense_hidden", a.dense_hidden},
                         {"dropout", a.dropout}};
    const auto& p = net->parameters();
    j["parameters"] = std::vector<double>(p.data(), p.data() + p.size());
  } else if (const auto* ar = dynamic_cast<const ArModel*>(&model)) {
    j["ar"] = {{"differencing", ar->differencing()},
               {"intercept", ar->intercept()},
               {"coefficients", ar->coefficients()},
               {"used_ridge", ar->used_ridge()}};
  } else if (const auto* gbt = dynamic_cast<const GbtModel*>(&model)) {
    const auto& gp = gbt->params();
    json ens = json::array();
    for (const auto& trees : gbt->ensembles()) {
      json arr = json::array();
      for (const auto& t : trees) arr.push_back(tree_to_json(t));
      ens.push_back(std::move(arr));
    }
    j["gbt"] = {{"n_trees", gp.n_trees},
                {"max_depth", gp.max_depth},
                {"learning_rate", gp.learning_rate},
                {"min_samples_leaf", gp.min_samples_leaf},
                {"subsample", gp.subsample},
                {"seed", hex64(gp.seed)},
                {"base", gbt->base_scores()},
                {"ensembles", std::move(ens)}};
  } else {
    throw ConfigError("unsupported model type for checkpointing");
  }

  j["manifest"] = {{"seed", hex64(manifest.seed)},
                   {"epochs", manifest.epochs},
                   {"best_epoch", manifest.best_epoch},
                   {"data_hash", hex64(manifest.data_hash)},
                   {"test_rmse_db", manifest.test_rmse_db},
                   {"test_rmse_overall_db", manifest.test_rmse_overall_db},
                   {"train_config", manifest.train_config}};

  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
  LoadedCheckpoint out;
  try {
    const int version = j.value("format_version", -1);
    if (version != kCheckpointFormatVersion) {
      throw SchemaError("checkpoint format_version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    const ModelKind kind = model_kind_from_string(j.at("kind").get<std::string>());
    const int window = j.at("window").get<int>();
    const FeatureMode mode = mode_from(j.at("feature_mode").get<std::string>());
    const int output_dim = j.at("output_dim").get<int>();
    NormStats norm = norm_from_json(j.at("norm"));

    switch (kind) {
      case ModelKind::BiLstmBs:
      case ModelKind::LiteLstmAp:
      case ModelKind::LinearHead: {
        const auto& ja = j.at("architecture");
        Architecture a;
        a.recurrent_layers = ja.at("recurrent_layers").get<int>();
        a.bidirectional = ja.at("bidirectional").get<bool>();
        a.hidden = ja.at("hidden").get<int>();
        a.dense_hidden = ja.at("dense_hidden").get<std::vector<int>>();
        a.dropout = ja.at("dropout").get<double>();
        auto net = std::make_unique<SequenceRegressor>(kind, a, window, mode, output_dim, 0);
        const auto params = j.at("parameters").get<std::vector<double>>();
        if (params.size() != net->parameter_count()) {
          throw SchemaError("checkpoint holds " + std::to_string(params.size()) + " parameters, architecture needs " +
                            std::to_string(net->parameter_count()));
        }
        net->parameters() = Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
        net->set_norm(norm);
        net->mark_trained();
        out.model = std::move(net);
        break;
      }
      case ModelKind::ArBaseline: {
        const auto& ja = j.at("ar");
        auto ar = std::make_unique<ArModel>(ArModel::from_parts(ja.at("differencing").get<int>(),
                                                                ja.at("intercept").get<double>(),
                                                                ja.at("coefficients").get<std::vector<double>>(),
                                                                ja.at("used_ridge").get<bool>()));
        ar->attach(norm, window, mode, output_dim);
        out.model = std::move(ar);
        break;
      }
      case ModelKind::GbtBaseline: {
        const auto& jg = j.at("gbt");
        GbtParams gp;
        gp.n_trees = jg.at("n_trees").get<int>();
        gp.max_depth = jg.at("max_depth").get<int>();
        gp.learning_rate = jg.at("learning_rate").get<double>();
        gp.min_samples_leaf = jg.at("min_samples_leaf").get<int>();
        gp.subsample = jg.at("subsample").get<double>();
        gp.seed = parse_hex64(jg.at("seed").get<std::string>());
        std::vector<std::vector<RegressionTree>> ens;
        for (const auto& arr : jg.at("ensembles")) {
          std::vector<RegressionTree> trees;
          for (const auto& t : arr) trees.push_back(tree_from_json(t));
          ens.push_back(std::move(trees));
        }
        out.model = std::make_unique<GbtModel>(GbtModel::from_parts(
            gp, window, mode, norm, jg.at("base").get<std::vector<double>>(), std::move(ens)));
        break;
      }
    }

    const auto& jm = j.at("manifest");
    out.manifest.seed = parse_hex64(jm.at("seed").get<std::string>());
    out.manifest.epochs = jm.at("epochs").get<int>();
    out.manifest.best_epoch = jm.at("best_epoch").get<int>();
    out.manifest.data_hash = parse_hex64(jm.at("data_hash").get<std::string>());
    out.manifest.test_rmse_db = jm.at("test_rmse_db").get<std::vector<double>>();
    out.manifest.test_rmse_overall_db = jm.at("test_rmse_overall_db").get<double>();
    out.manifest.train_config = jm.at("train_config");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
  return out;
}

}  // namespace pcho
