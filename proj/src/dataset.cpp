#include "pcho/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pcho/csv.hpp"
#include "pcho/error.hpp"
#include "pcho/rng.hpp"

namespace pcho {

namespace {

constexpr const char* kFeatureSuffix[] = {"rssi", "sq", "tp"};

std::vector<int> feature_sources(FeatureMode mode) {
  // Indices into (rssi, sq, tp).
  if (mode == FeatureMode::Full) return {0, 1, 2};
  return {1};
}

double tuple_field(const MeasurementTuple& m, int which) {
  switch (which) {
    case 0: return m.rssi_dbm;
    case 1: return m.sig_quality_db;
    default: return m.throughput_bps;
  }
}

}  // namespace

int feature_count(FeatureMode mode) { return mode == FeatureMode::Full ? 3 : 1; }

int quality_column(FeatureMode mode) { return mode == FeatureMode::Full ? 1 : 0; }

Eigen::RowVectorXd feature_row(const MeasurementTuple& m, FeatureMode mode) {
  const auto sources = feature_sources(mode);
  Eigen::RowVectorXd row(static_cast<Eigen::Index>(sources.size()));
  for (std::size_t j = 0; j < sources.size(); ++j) row[static_cast<Eigen::Index>(j)] = tuple_field(m, sources[j]);
  return row;
}

NormStats NormStats::fit(std::span<const WindowSample> train, FeatureMode mode) {
  const int f = feature_count(mode);
  NormStats s;
  s.mode = mode;
  s.mean.assign(f, 0.0);
  s.stddev.assign(f, 0.0);
  if (train.empty()) throw ConfigError("cannot fit normalization on an empty training set");
  std::size_t rows = 0;
  for (const auto& w : train) {
    for (int j = 0; j < f; ++j) s.mean[j] += w.features.col(j).sum();
    rows += w.features.rows();
  }
  for (int j = 0; j < f; ++j) s.mean[j] /= static_cast<double>(rows);
  for (const auto& w : train) {
    for (int j = 0; j < f; ++j) s.stddev[j] += (w.features.col(j).array() - s.mean[j]).square().sum();
  }
  for (int j = 0; j < f; ++j) {
    s.stddev[j] = std::sqrt(s.stddev[j] / static_cast<double>(rows));
    if (!(s.stddev[j] > 0.0)) {
      throw ConfigError(std::string("degenerate feature '") + kFeatureSuffix[feature_sources(mode)[j]] +
                        "': zero standard deviation");
    }
  }
  return s;
}

void NormStats::normalize(WindowSample& s) const {
  s.features = normalize_window(s.features);
  for (Eigen::Index i = 0; i < s.targets.size(); ++i) s.targets[i] = normalize_quality(s.targets[i]);
}

void NormStats::denormalize(WindowSample& s) const {
  for (Eigen::Index j = 0; j < s.features.cols(); ++j) {
    s.features.col(j) = (s.features.col(j).array() * stddev[j] + mean[j]).matrix();
  }
  for (Eigen::Index i = 0; i < s.targets.size(); ++i) s.targets[i] = denormalize_quality(s.targets[i]);
}

Eigen::MatrixXd NormStats::normalize_window(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != static_cast<Eigen::Index>(mean.size())) throw ShapeError("window width does not match NormStats");
  Eigen::MatrixXd out(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) out.col(j) = ((raw.col(j).array() - mean[j]) / stddev[j]).matrix();
  return out;
}

double NormStats::normalize_quality(double db) const {
  const int q = quality_column(mode);
  return (db - mean[q]) / stddev[q];
}

double NormStats::denormalize_quality(double z) const {
  const int q = quality_column(mode);
  return z * stddev[q] + mean[q];
}

std::vector<WindowSample> make_windows(const Trace& trace, NodeId node, int window, int horizon, FeatureMode mode) {
  if (window < 1 || horizon < 1) throw ConfigError("window and horizon must be >= 1");
  const auto& series = trace.of(node);
  const std::size_t length = series.size();
  const std::size_t required = static_cast<std::size_t>(window + horizon);
  if (length < required) throw ShortTraceError(length, required);

  const auto sources = feature_sources(mode);
  const int f = static_cast<int>(sources.size());
  std::vector<WindowSample> out;
  out.reserve(length - required + 1);
  for (int k = window - 1; k + horizon < static_cast<int>(length); ++k) {
    WindowSample s;
    s.traj_id = trace.traj_id;
    s.node = node;
    s.k = k;
    s.features.resize(window, f);
    for (int r = 0; r < window; ++r) {
      const auto& m = series[k - window + 1 + r];
      for (int j = 0; j < f; ++j) s.features(r, j) = tuple_field(m, sources[j]);
    }
    s.targets.resize(horizon);
    for (int tau = 1; tau <= horizon; ++tau) s.targets[tau - 1] = series[k + tau].sig_quality_db;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<WindowSample> pool_windows(std::span<const Trace> traces, NodeKind kind, int window, int horizon,
                                       FeatureMode mode) {
  std::vector<WindowSample> pool;
  for (const auto& tr : traces) {
    for (const auto& node : tr.nodes) {
      if (node.kind != kind) continue;
      auto w = make_windows(tr, node, window, horizon, mode);
      std::move(w.begin(), w.end(), std::back_inserter(pool));
    }
  }
  return pool;
}

DatasetSplit split_and_normalize(std::vector<WindowSample> pool, NodeKind kind, FeatureMode mode, int window,
                                 int horizon, double split_ratio, std::uint64_t seed) {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  if (pool.empty()) throw ConfigError("no windows for " + to_string(kind));
  Rng rng(derive_seed(seed, {0x73706c6974ULL}));
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(split_ratio * static_cast<double>(pool.size())));

  DatasetSplit split;
  split.kind = kind;
  split.mode = mode;
  split.window = window;
  split.horizon = horizon;
  split.split_ratio = split_ratio;
  split.train.assign(std::make_move_iterator(pool.begin()), std::make_move_iterator(pool.begin() + n_train));
  split.test.assign(std::make_move_iterator(pool.begin() + n_train), std::make_move_iterator(pool.end()));
  if (split.train.empty()) throw ConfigError("split leaves no training windows");
  split.norm = NormStats::fit(split.train, mode);
  for (auto& s : split.train) split.norm.normalize(s);
  for (auto& s : split.test) split.norm.normalize(s);
  return split;
}

DatasetSplit build_rat_dataset(std::span<const Trace> traces, NodeKind kind, int window, int horizon,
                               double split_ratio, std::uint64_t seed, FeatureMode mode) {
  return split_and_normalize(pool_windows(traces, kind, window, horizon, mode), kind, mode, window, horizon,
                             split_ratio, seed);
}

std::pair<DatasetSplit, DatasetSplit> build_per_rat_datasets(std::span<const Trace> traces, int window_bs,
                                                             int window_ap, int horizon, double split_ratio,
                                                             std::uint64_t seed, FeatureMode mode) {
  return {build_rat_dataset(traces, NodeKind::CellularBS, window_bs, horizon, split_ratio, seed, mode),
          build_rat_dataset(traces, NodeKind::WifiAP, window_ap, horizon, split_ratio, seed, mode)};
}

DatasetSplit build_holdout_dataset(std::span<const Trace> train_traces, std::span<const Trace> test_traces,
                                   NodeKind kind, int window, int horizon, FeatureMode mode) {
  DatasetSplit split;
  split.kind = kind;
  split.mode = mode;
  split.window = window;
  split.horizon = horizon;
  split.train = pool_windows(train_traces, kind, window, horizon, mode);
  split.test = pool_windows(test_traces, kind, window, horizon, mode);
  if (split.train.empty()) throw ConfigError("no training windows for " + to_string(kind));
  split.split_ratio = static_cast<double>(split.train.size()) /
                      static_cast<double>(split.train.size() + split.test.size());
  split.norm = NormStats::fit(split.train, mode);
  for (auto& s : split.train) split.norm.normalize(s);
  for (auto& s : split.test) split.norm.normalize(s);
  return split;
}

DatasetSplit slice_targets(const DatasetSplit& split, int horizon) {
  if (horizon < 1 || horizon > split.horizon) throw ConfigError("invalid target slice");
  DatasetSplit out = split;
  out.horizon = horizon;
  for (auto* part : {&out.train, &out.test}) {
    for (auto& s : *part) s.targets.conservativeResize(horizon);
  }
  return out;
}

std::vector<double> raw_quality_window(const WindowSample& normalized, const NormStats& norm) {
  const int q = quality_column(norm.mode);
  std::vector<double> out(normalized.features.rows());
  for (Eigen::Index r = 0; r < normalized.features.rows(); ++r) {
    out[r] = norm.denormalize_quality(normalized.features(r, q));
  }
  return out;
}

// --- CSV -------------------------------------------------------------------

std::filesystem::path dataset_manifest_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".manifest.json";
  return p;
}

void export_csv(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  const auto sources = feature_sources(split.mode);
  os << "traj_id,node_kind,node_index,k";
  for (int i = 0; i < split.window; ++i) {
    for (int src : sources) os << ",f" << i << '_' << kFeatureSuffix[src];
  }
  for (int tau = 1; tau <= split.horizon; ++tau) os << ",y_" << tau;
  os << '\n';
  for (const auto* part : {&split.train, &split.test}) {
    for (const auto& s : *part) {
      os << s.traj_id << ',' << to_string(s.node.kind) << ',' << s.node.index << ',' << s.k;
      for (Eigen::Index r = 0; r < s.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < s.features.cols(); ++c) os << ',' << csv::num17(s.features(r, c));
      }
      for (Eigen::Index t = 0; t < s.targets.size(); ++t) os << ',' << csv::num17(s.targets[t]);
      os << '\n';
    }
  }

  nlohmann::json m;
  m["format_version"] = kDatasetFormatVersion;
  m["kind"] = to_string(split.kind);
  m["feature_mode"] = split.mode == FeatureMode::Full ? "full" : "sinr_only";
  m["window"] = split.window;
  m["horizon"] = split.horizon;
  m["split_ratio"] = split.split_ratio;
  m["n_train"] = split.train.size();
  m["n_test"] = split.test.size();
  m["norm_mean"] = split.norm.mean;
  m["norm_std"] = split.norm.stddev;
  std::ofstream ms(dataset_manifest_path(path));
  ms << m.dump(2) << '\n';
}

DatasetSplit import_csv(const std::filesystem::path& path) {
  std::ifstream ms(dataset_manifest_path(path));
  if (!ms) throw SchemaError("missing dataset manifest " + dataset_manifest_path(path).string());
  nlohmann::json m;
  try {
    ms >> m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed dataset manifest: ") + e.what());
  }
  const int version = m.value("format_version", -1);
  if (version != kDatasetFormatVersion) {
    throw SchemaError("dataset format_version " + std::to_string(version) + " unsupported (expected " +
                      std::to_string(kDatasetFormatVersion) + ")");
  }

  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw SchemaError("empty dataset file");
  const auto header = csv::split(line);

  // Infer W and H from the header, then require the canonical column sequence.
  int window = 0;
  int horizon = 0;
  bool has_rssi = false;
  for (const auto& col : header) {
    if (col.rfind("y_", 0) == 0) ++horizon;
    if (col.size() > 1 && col[0] == 'f' && std::isdigit(static_cast<unsigned char>(col[1]))) {
      const auto us = col.find('_');
      window = std::max(window, static_cast<int>(csv::to_int(col.substr(1, us - 1))) + 1);
      if (col.substr(us + 1) == "rssi") has_rssi = true;
    }
  }
  const FeatureMode mode = has_rssi ? FeatureMode::Full : FeatureMode::SinrOnly;
  std::vector<std::string> expected = {"traj_id", "node_kind", "node_index", "k"};
  for (int i = 0; i < window; ++i) {
    for (int src : feature_sources(mode)) expected.push_back("f" + std::to_string(i) + "_" + kFeatureSuffix[src]);
  }
  for (int tau = 1; tau <= horizon; ++tau) expected.push_back("y_" + std::to_string(tau));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i >= header.size() || header[i] != expected[i]) throw SchemaError("missing column '" + expected[i] + "'");
  }
  if (header.size() != expected.size()) throw SchemaError("unexpected column '" + header[expected.size()] + "'");
  if (window < 1 || horizon < 1) throw SchemaError("dataset needs at least one feature step and one target");

  DatasetSplit split;
  split.mode = mode;
  split.window = window;
  split.horizon = horizon;
  split.kind = node_kind_from_string(m.at("kind").get<std::string>());
  split.split_ratio = m.at("split_ratio").get<double>();
  split.norm.mode = mode;
  split.norm.mean = m.at("norm_mean").get<std::vector<double>>();
  split.norm.stddev = m.at("norm_std").get<std::vector<double>>();
  const auto n_train = m.at("n_train").get<std::size_t>();
  const int f = feature_count(mode);

  std::vector<WindowSample> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto v = csv::split(line);
    if (v.size() != expected.size()) throw SchemaError("row has " + std::to_string(v.size()) + " columns, expected " +
                                                       std::to_string(expected.size()));
    WindowSample s;
    s.traj_id = static_cast<int>(csv::to_int(v[0]));
    s.node = {node_kind_from_string(v[1]), static_cast<std::size_t>(csv::to_int(v[2]))};
    s.k = static_cast<int>(csv::to_int(v[3]));
    s.features.resize(window, f);
    std::size_t c = 4;
    for (int r = 0; r < window; ++r) {
      for (int j = 0; j < f; ++j) s.features(r, j) = csv::to_double(v[c++]);
    }
    s.targets.resize(horizon);
    for (int t = 0; t < horizon; ++t) s.targets[t] = csv::to_double(v[c++]);
    rows.push_back(std::move(s));
  }
  if (n_train > rows.size()) throw SchemaError("manifest n_train exceeds row count");
  split.train.assign(std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.begin() + n_train));
  split.test.assign(std::make_move_iterator(rows.begin() + n_train), std::make_move_iterator(rows.end()));
  return split;
}

std::uint64_t dataset_hash(const DatasetSplit& split) {
  Fnv1a h;
  h.update(static_cast<std::uint64_t>(split.window));
  h.update(static_cast<std::uint64_t>(split.horizon));
  for (const auto* part : {&split.train, &split.test}) {
    h.update(static_cast<std::uint64_t>(part->size()));
    for (const auto& s : *part) {
      h.update(static_cast<std::uint64_t>(s.traj_id));
      h.update(static_cast<std::uint64_t>(s.k));
      h.update(s.node.str());
      h.update(s.features.data(), sizeof(double) * s.features.size());
      h.update(s.targets.data(), sizeof(double) * s.targets.size());
    }
  }
  return h.digest();
}

}  // namespace pcho
