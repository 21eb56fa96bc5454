#pragma once

// On-disk layout:
//   <root>/rgb/<name>.png     RGB image
//   <root>/depth/<name>.png   co-registered single-channel depth (paired sets only)
//   <root>/manifest.txt       optional listing, one relative rgb path per line
// The identity label of a sample is its file name up to the first underscore.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dhal/tensor.hpp"

namespace dhal {

struct PairedSample {
  ImageTensor rgb;
  ImageTensor depth;
  std::string identity;
  std::string name;  // file stem
};

struct UnpairedSample {
  ImageTensor rgb;
  std::string identity;
  std::string name;
};

struct DatasetManifest {
  std::filesystem::path root;
  /// Relative rgb paths ("rgb/<name>.png"), sorted lexicographically.
  std::vector<std::string> entries;
  int image_size = 128;
  /// Free-form split descriptor, e.g. "all", "train fold 2/5".
  std::string split = "all";

  std::size_t sample_count() const { return entries.size(); }

  /// Reads <root>/manifest.txt when present, otherwise lists <root>/rgb/*.png.
  /// Throws ManifestError when the root or its rgb/ directory is missing, or on
  /// duplicate entries.
  static DatasetManifest open(const std::filesystem::path& root, int image_size);
  /// Parses a plain-text listing; paths are relative to the listing's directory.
  static DatasetManifest read(const std::filesystem::path& listing, int image_size);
  void write(const std::filesystem::path& listing) const;
};

std::string identity_of(const std::string& file_stem);

/// Loads and preprocesses every listed pair in manifest order.
/// Throws ManifestError("orphan rgb/<name>.png") when a depth counterpart is missing.
std::vector<PairedSample> load_paired_dataset(const DatasetManifest& manifest);

std::vector<UnpairedSample> load_rgb_dataset(const DatasetManifest& manifest);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// k-fold partition by image within identity: each identity's images are shuffled
/// and dealt round-robin across folds (the dealer position carries over between
/// identities so fold sizes stay balanced). Deterministic under seed.
std::vector<Fold> split_folds(std::span<const std::string> identities, int k, std::uint64_t seed);

template <typename Sample>
std::vector<Fold> split_folds(const std::vector<Sample>& samples, int k, std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.identity);
  return split_folds(std::span<const std::string>(ids), k, seed);
}

template <typename Sample>
std::vector<Sample> select(const std::vector<Sample>& samples, std::span<const std::size_t> idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(samples[i]);
  return out;
}

}  // namespace dhal
