#pragma once

#include <atomic>
#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "dhal/datasets.hpp"
#include "dhal/image_io.hpp"
#include "dhal/synthetic.hpp"
#include "dhal/tensor.hpp"

namespace dhal::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "dhal") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

template <typename T>
Tensor<T> make_tensor(int c, int h, int w, std::initializer_list<T> values) {
  Tensor<T> t(c, h, w);
  t.data.assign(values.begin(), values.end());
  return t;
}

/// In-memory synthetic pairs, preprocessed exactly as the loaders would.
inline std::vector<PairedSample> synthetic_pairs(int count, int size, int identities,
                                                 std::uint64_t seed) {
  std::vector<PairedSample> out;
  std::vector<int> per_identity(identities, 0);
  for (int i = 0; i < count; ++i) {
    const int id = i % identities;
    const int index = per_identity[id]++;
    const auto r = render_sample(sample_identity(seed, id), sample_pose(seed, id, index), size);
    char name[32];
    std::snprintf(name, sizeof(name), "id%03d_%04d", id, index);
    out.push_back({preprocess(r.rgb, size), preprocess(r.depth, size), identity_of(name), name});
  }
  return out;
}

inline std::vector<UnpairedSample> unpaired(const std::vector<PairedSample>& pairs) {
  std::vector<UnpairedSample> out;
  for (const auto& p : pairs) out.push_back({p.rgb, p.identity, p.name});
  return out;
}

}  // namespace dhal::testing
