#pragma once

// Analytic paired RGB-D data: each identity is a fixed arrangement of 1-3 smooth
// gaussian bumps; each image poses it (shift, in-plane rotation) and lights it
// from a random direction. Depth is the height field itself, RGB is a lambertian
// rendering of that same field.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "dhal/datasets.hpp"
#include "dhal/image_io.hpp"

namespace dhal {

struct Blob {
  double cx = 0, cy = 0;
  double sigma_x = 0.25, sigma_y = 0.25;
  double amplitude = 1.0;
};

struct IdentityShape {
  std::vector<Blob> blobs;  // amplitudes sum to at most 1
  std::array<double, 3> albedo{1.0, 1.0, 1.0};
};

struct Pose {
  double tx = 0, ty = 0, angle = 0;
  std::array<double, 3> light{0.0, 0.0, 1.0};  // unit vector toward the light
  double ambient = 0.25;
};

/// Surface slope scale applied to the height field when computing normals.
inline constexpr double kRelief = 0.5;

/// Height field over normalized image coordinates (x, y) in [-1, 1]^2.
class HeightField {
 public:
  HeightField(const IdentityShape& shape, const Pose& pose) : shape_(shape), pose_(pose) {}

  double height(double x, double y) const;
  /// Analytic (dh/dx, dh/dy).
  std::array<double, 2> gradient(double x, double y) const;

 private:
  const IdentityShape& shape_;
  Pose pose_;
};

/// Unit surface normal of z = kRelief * h(x, y) from a height gradient.
std::array<double, 3> surface_normal(const std::array<double, 2>& gradient);

/// ambient + (1 - ambient) * max(0, n . l).
double lambert_shading(const std::array<double, 3>& normal, const Pose& pose);

/// Normalized coordinate of pixel centre i on a size-pixel axis.
inline double pixel_coord(int i, int size) { return 2.0 * (i + 0.5) / size - 1.0; }

IdentityShape sample_identity(std::uint64_t seed, int identity_index);
Pose sample_pose(std::uint64_t seed, int identity_index, int image_index);

struct RenderedSample {
  RawImage rgb;    // 8-bit, 3 channels
  RawImage depth;  // 8-bit, 1 channel, round(255 * h)
};

RenderedSample render_sample(const IdentityShape& shape, const Pose& pose, int size);

struct SyntheticSpec {
  int count = 200;
  int size = 64;
  int identities = 20;
  std::uint64_t seed = 7;
};

/// Writes rgb/, depth/ and manifest.txt under root. Image i belongs to identity
/// i % identities and is named "id<identity>_<per-identity index>".
/// Throws ValidationError on bad counts, IoError when root is unwritable.
DatasetManifest make_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec);

}  // namespace dhal
