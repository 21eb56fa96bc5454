#pragma once

// Depth quality metrics. Pixel metrics take depth already mapped to (0, 1] by
// map_depth(); evaluate_set() does the mapping from generator output range.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhal/datasets.hpp"
#include "dhal/tensor.hpp"

namespace dhal {

inline constexpr double kDepthEpsilon = 1e-3;

/// v in [-1, 1] -> clamp((v + 1) / 2, kDepthEpsilon, 1).
double map_depth(double v);
/// First channel of `depth`, mapped.
std::vector<double> mapped_depth(const ImageTensor& depth);

// All of these throw ValidationError on length mismatch or empty input.
double abs_diff(std::span<const double> gt, std::span<const double> pred);
/// mean(|y - y*| / y)
double abs_rel(std::span<const double> gt, std::span<const double> pred);
/// sum|y - y*| / sum|y|
double l1_norm(std::span<const double> gt, std::span<const double> pred);
double l2_norm(std::span<const double> gt, std::span<const double> pred);
double rmse(std::span<const double> gt, std::span<const double> pred);
/// Percentage of pixels with max(y/y*, y*/y) < 1.25^k.
double threshold_accuracy(std::span<const double> gt, std::span<const double> pred, int k);

struct PixelMetrics {
  double abs_diff = 0;
  double abs_rel = 0;
  double l1_norm = 0;
  double l2_norm = 0;
  double rmse = 0;
  std::array<double, 3> delta{};  // k = 1, 2, 3
};

PixelMetrics pixel_metrics(std::span<const double> gt, std::span<const double> pred);

using FeatureExtractor = std::function<std::vector<double>(const ImageTensor&)>;

/// Fixed seeded linear embedding: first channel area-resized to grid x grid,
/// projected with N(0, 1/grid^2) weights to `dim` outputs.
class RandomProjectionExtractor {
 public:
  RandomProjectionExtractor(int dim = 32, int grid = 16, std::uint64_t seed = 1234);
  std::vector<double> operator()(const ImageTensor& image) const;
  int dim() const { return dim_; }

 private:
  int dim_;
  int grid_;
  std::vector<double> weights_;  // dim x grid*grid
};

/// ||mu_r - mu_f||^2 + Tr(S_r + S_f - 2 (S_r S_f)^(1/2)) with unbiased covariances.
/// Throws ValidationError for < 2 vectors or mismatched dims and NumericalError
/// when the square root sees a clearly negative eigenvalue.
double frechet_distance(const std::vector<std::vector<double>>& real,
                        const std::vector<std::vector<double>>& fake);

struct QualityRow {
  std::string name;
  PixelMetrics metrics;
};

struct QualityReport {
  double abs_diff = 0;
  double abs_rel = 0;
  double l1_norm = 0;
  double l2_norm = 0;
  double rmse = 0;
  std::array<double, 3> delta{};
  std::optional<double> fid;  // needs at least two images
  std::size_t sample_count = 0;
  std::vector<QualityRow> rows;
};

/// Maps an RGB tensor in [-1, 1] to a depth tensor in [-1, 1].
using DepthGenerator = std::function<ImageTensor(const ImageTensor&)>;

/// Per-image metrics averaged over the set; FID over extractor embeddings of
/// ground-truth vs generated depth. Uses RandomProjectionExtractor when
/// `extractor` is empty.
QualityReport evaluate_set(std::span<const PairedSample> samples, const DepthGenerator& generator,
                           FeatureExtractor extractor = {});

}  // namespace dhal
