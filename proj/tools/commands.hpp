#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dhal/training.hpp"

namespace dhal::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Flags shared by every command. Unset optionals fall back to the config file,
// then to built-in defaults.
struct CommonOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<int> epochs;
  std::string out;
  std::string checkpoint;
};

TrainingConfig resolve_config(const CommonOptions& common);

/// --out when given, else $DEPTH_HALLUC_OUT/<leaf>, else runs/<leaf>.
std::filesystem::path resolve_out(const CommonOptions& common, const std::string& leaf);

struct TrainOptions {
  bool resume = false;
};

struct HallucinateOptions {
  std::string input;
  std::optional<int> size;
};

struct EvalQualityOptions {
  std::string data;
  std::optional<int> size;
};

struct EvalRecognitionOptions {
  std::string data;
  std::optional<int> size;
  int folds = 2;
  int backbone_epochs = 25;
  bool ground_truth = true;
};

struct MakeSyntheticOptions {
  int count = 200;
  int size = 64;
  int identities = 20;
  std::uint64_t seed = 7;
};

struct ExportSamplesOptions {
  std::string data;
  std::optional<int> size;
  int count = 4;
};

int cmd_train(const CommonOptions& common, const TrainOptions& options);
int cmd_hallucinate(const CommonOptions& common, const HallucinateOptions& options);
int cmd_eval_quality(const CommonOptions& common, const EvalQualityOptions& options);
int cmd_eval_recognition(const CommonOptions& common, const EvalRecognitionOptions& options);
int cmd_make_synthetic(const CommonOptions& common, const MakeSyntheticOptions& options);
int cmd_export_samples(const CommonOptions& common, const ExportSamplesOptions& options);

}  // namespace dhal::cli
