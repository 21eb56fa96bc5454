#include "dhal/datasets.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "dhal/error.hpp"
#include "dhal/image_io.hpp"

namespace dhal {

namespace fs = std::filesystem;

namespace {

void check_unique(const std::vector<std::string>& sorted_entries) {
  auto dup = std::adjacent_find(sorted_entries.begin(), sorted_entries.end());
  if (dup != sorted_entries.end()) throw ManifestError("duplicate entry " + *dup);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string identity_of(const std::string& file_stem) {
  return file_stem.substr(0, file_stem.find('_'));
}

DatasetManifest DatasetManifest::open(const fs::path& root, int image_size) {
  if (!fs::is_directory(root)) throw ManifestError("dataset root not found: " + root.string());
  const fs::path listing = root / "manifest.txt";
  if (fs::exists(listing)) return read(listing, image_size);

  const fs::path rgb_dir = root / "rgb";
  if (!fs::is_directory(rgb_dir)) throw ManifestError("missing directory " + rgb_dir.string());
  DatasetManifest m;
  m.root = root;
  m.image_size = image_size;
  for (const auto& entry : fs::directory_iterator(rgb_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      m.entries.push_back("rgb/" + entry.path().filename().string());
    }
  }
  std::sort(m.entries.begin(), m.entries.end());
  return m;
}

DatasetManifest DatasetManifest::read(const fs::path& listing, int image_size) {
  std::ifstream in(listing);
  if (!in) throw ManifestError("cannot read manifest " + listing.string());
  DatasetManifest m;
  m.root = listing.parent_path();
  m.image_size = image_size;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    m.entries.push_back(line);
  }
  std::sort(m.entries.begin(), m.entries.end());
  check_unique(m.entries);
  return m;
}

void DatasetManifest::write(const fs::path& listing) const {
  std::ofstream out(listing);
  if (!out) throw IoError("cannot write manifest " + listing.string());
  for (const auto& e : entries) out << e << '\n';
}

std::vector<PairedSample> load_paired_dataset(const DatasetManifest& manifest) {
  std::vector<std::string> entries = manifest.entries;
  std::sort(entries.begin(), entries.end());
  check_unique(entries);
  // Validate the whole layout before decoding anything.
  for (const auto& e : entries) {
    const fs::path rel(e);
    if (!fs::exists(manifest.root / rel)) throw ManifestError("missing file " + e);
    if (!fs::exists(manifest.root / "depth" / rel.filename())) throw ManifestError("orphan " + e);
  }
  std::vector<PairedSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const fs::path rel(e);
    PairedSample s;
    s.name = rel.stem().string();
    s.identity = identity_of(s.name);
    s.rgb = preprocess(read_image(manifest.root / rel), manifest.image_size);
    s.depth = preprocess(read_image(manifest.root / "depth" / rel.filename()), manifest.image_size);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<UnpairedSample> load_rgb_dataset(const DatasetManifest& manifest) {
  std::vector<std::string> entries = manifest.entries;
  std::sort(entries.begin(), entries.end());
  check_unique(entries);
  for (const auto& e : entries) {
    if (!fs::exists(manifest.root / e)) throw ManifestError("missing file " + e);
  }
  std::vector<UnpairedSample> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const fs::path rel(e);
    UnpairedSample s;
    s.name = rel.stem().string();
    s.identity = identity_of(s.name);
    s.rgb = preprocess(read_image(manifest.root / rel), manifest.image_size);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Fold> split_folds(std::span<const std::string> identities, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("split_folds: k must be at least 2");
  if (static_cast<std::size_t>(k) > identities.size()) {
    throw ValidationError("split_folds: k=" + std::to_string(k) + " exceeds sample count " +
                          std::to_string(identities.size()));
  }
  std::map<std::string, std::vector<std::size_t>> by_identity;
  for (std::size_t i = 0; i < identities.size(); ++i) by_identity[identities[i]].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(identities.size(), 0);
  std::size_t dealer = 0;
  for (auto& [id, idx] : by_identity) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (auto i : idx) fold_of[i] = static_cast<int>(dealer++ % k);
  }
  std::vector<Fold> folds(k);
  for (std::size_t i = 0; i < identities.size(); ++i) {
    for (int f = 0; f < k; ++f) (f == fold_of[i] ? folds[f].test : folds[f].train).push_back(i);
  }
  return folds;
}

}  // namespace dhal
