#pragma once

// Binary parameter archives and per-epoch training checkpoints.
//
// Archive layout (little endian): "DHAR", u32 version, u32 entry count, then per
// entry: u32 name length, name bytes, u32 rank, i64 dims[rank], f32 data[prod(dims)].
//
// A checkpoint directory holds G_A2B.bin, D_depth.bin, optimizer and pool
// archives, and manifest.json. G_B2A.bin / D_RGB.bin are only written in full mode.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dhal/training.hpp"

namespace dhal {

struct ArchiveEntry {
  std::string name;
  std::vector<std::int64_t> dims;
  std::vector<float> data;
};

void write_archive(const std::filesystem::path& path, const std::vector<ArchiveEntry>& entries);
/// Throws LoadError on a missing file, bad magic or truncated data.
std::vector<ArchiveEntry> read_archive(const std::filesystem::path& path);

std::vector<ArchiveEntry> parameter_entries(const nn::ParameterList<float>& params);
/// Copies archive values into `params`. On any name/shape disagreement throws
/// LoadError whose message lists every differing entry ("expected ... got ...").
void load_parameters(const nn::ParameterList<float>& params, const std::vector<ArchiveEntry>& entries,
                     const std::string& source);

/// Recovers the generator layout from archive dims (base maps and block count).
GeneratorShape infer_generator_shape(const std::vector<ArchiveEntry>& entries);

void save_generator(const std::filesystem::path& path, Generator<float>& g);
/// Shape inferred from the archive.
Generator<float> load_generator(const std::filesystem::path& path);
/// Shape imposed by the caller; a mismatch throws LoadError with the shape diff.
Generator<float> load_generator(const std::filesystem::path& path, const GeneratorShape& shape);

struct CheckpointInfo {
  int epoch = 0;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string mode;
  std::string trainer_rng;
};

/// Writes <dir>/epoch_XXXX and returns its path.
std::filesystem::path save_checkpoint(const std::filesystem::path& checkpoints_dir,
                                      Trainer& trainer, const EpochSummary& summary);

std::string checkpoint_dir_name(int epoch);

/// Highest-numbered epoch_XXXX under `checkpoints_dir`, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& checkpoints_dir);

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);
/// Training config recorded in <dir>/manifest.json.
TrainingConfig read_checkpoint_config(const std::filesystem::path& dir);

/// Restores models, optimizer moments, pools and epoch. Components absent from
/// the directory keep their seed initialization.
TrainState<float> load_train_state(const std::filesystem::path& dir, const TrainingConfig& config);

/// G_A2B of a checkpoint directory, or of a bare .bin archive.
Generator<float> load_checkpoint_generator(const std::filesystem::path& path);
/// G_B2A of a checkpoint directory if present.
std::optional<Generator<float>> load_checkpoint_reverse_generator(const std::filesystem::path& dir);

}  // namespace dhal
