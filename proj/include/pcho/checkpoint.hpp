#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcho/predictor.hpp"

namespace pcho {

inline constexpr int kCheckpointFormatVersion = 1;

struct TrainingManifest {
  std::uint64_t seed = 0;
  int epochs = 0;      // epochs actually run
  int best_epoch = -1;
  std::uint64_t data_hash = 0;
  std::vector<double> test_rmse_db;  // per tau, as measured when saved
  double test_rmse_overall_db = 0.0;
  nlohmann::json train_config;       // free-form
};

// Structured-text (JSON) container: kind, shapes, every parameter at full
// double precision, NormStats and the manifest. Handles every ModelKind.
void save_checkpoint(const Predictor& model, const TrainingManifest& manifest, const std::filesystem::path& path);

struct LoadedCheckpoint {
  std::unique_ptr<Predictor> model;
  TrainingManifest manifest;
};

// Throws SchemaError on version mismatch or malformed content.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json norm_to_json(const NormStats& norm);
NormStats norm_from_json(const nlohmann::json& j);

}  // namespace pcho
