#include "dhal/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "dhal/error.hpp"

namespace dhal {

namespace fs = std::filesystem;

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string sample_name(int identity, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "id%03d_%04d", identity, index);
  return buf;
}

}  // namespace

double HeightField::height(double x, double y) const {
  const double c = std::cos(pose_.angle), s = std::sin(pose_.angle);
  const double dx = x - pose_.tx, dy = y - pose_.ty;
  // Object-frame coordinates: R^T (p - t).
  const double ox = c * dx + s * dy, oy = -s * dx + c * dy;
  double h = 0.0;
  for (const auto& b : shape_.blobs) {
    const double u = ox - b.cx, v = oy - b.cy;
    h += b.amplitude * std::exp(-0.5 * (u * u / (b.sigma_x * b.sigma_x) +
                                        v * v / (b.sigma_y * b.sigma_y)));
  }
  return h;
}

std::array<double, 2> HeightField::gradient(double x, double y) const {
  const double c = std::cos(pose_.angle), s = std::sin(pose_.angle);
  const double dx = x - pose_.tx, dy = y - pose_.ty;
  const double ox = c * dx + s * dy, oy = -s * dx + c * dy;
  double gx = 0.0, gy = 0.0;
  for (const auto& b : shape_.blobs) {
    const double u = ox - b.cx, v = oy - b.cy;
    const double sx2 = b.sigma_x * b.sigma_x, sy2 = b.sigma_y * b.sigma_y;
    const double g = b.amplitude * std::exp(-0.5 * (u * u / sx2 + v * v / sy2));
    const double du = -u / sx2 * g, dv = -v / sy2 * g;
    // d(ox)/dx = c, d(oy)/dx = -s, d(ox)/dy = s, d(oy)/dy = c
    gx += du * c - dv * s;
    gy += du * s + dv * c;
  }
  return {gx, gy};
}

std::array<double, 3> surface_normal(const std::array<double, 2>& g) {
  const double nx = -kRelief * g[0], ny = -kRelief * g[1];
  const double inv = 1.0 / std::sqrt(nx * nx + ny * ny + 1.0);
  return {nx * inv, ny * inv, inv};
}

double lambert_shading(const std::array<double, 3>& n, const Pose& pose) {
  const double d = n[0] * pose.light[0] + n[1] * pose.light[1] + n[2] * pose.light[2];
  return pose.ambient + (1.0 - pose.ambient) * std::max(0.0, d);
}

IdentityShape sample_identity(std::uint64_t seed, int identity_index) {
  auto rng = seeded(seed, 0x1d, static_cast<std::uint64_t>(identity_index));
  IdentityShape shape;
  const int n = std::uniform_int_distribution<int>(1, 3)(rng);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Blob b;
    b.cx = uniform(rng, -0.4, 0.4);
    b.cy = uniform(rng, -0.4, 0.4);
    b.sigma_x = uniform(rng, 0.15, 0.4);
    b.sigma_y = uniform(rng, 0.15, 0.4);
    b.amplitude = uniform(rng, 0.3, 1.0);
    total += b.amplitude;
    shape.blobs.push_back(b);
  }
  if (total > 1.0) {
    for (auto& b : shape.blobs) b.amplitude /= total;
  }
  for (auto& a : shape.albedo) a = uniform(rng, 0.45, 1.0);
  return shape;
}

Pose sample_pose(std::uint64_t seed, int identity_index, int image_index) {
  auto rng = seeded(seed, 0x90000000ULL + static_cast<std::uint64_t>(identity_index),
                    static_cast<std::uint64_t>(image_index));
  Pose p;
  p.tx = uniform(rng, -0.12, 0.12);
  p.ty = uniform(rng, -0.12, 0.12);
  p.angle = uniform(rng, -0.35, 0.35);
  const double lx = uniform(rng, -0.6, 0.6), ly = uniform(rng, -0.6, 0.6);
  const double norm = std::sqrt(lx * lx + ly * ly + 1.0);
  p.light = {lx / norm, ly / norm, 1.0 / norm};
  p.ambient = uniform(rng, 0.15, 0.35);
  return p;
}

RenderedSample render_sample(const IdentityShape& shape, const Pose& pose, int size) {
  if (size <= 0) throw ValidationError("render_sample: size must be positive");
  HeightField field(shape, pose);
  RenderedSample out{RawImage(size, size, 3), RawImage(size, size, 1)};
  for (int py = 0; py < size; ++py) {
    const double y = pixel_coord(py, size);
    for (int px = 0; px < size; ++px) {
      const double x = pixel_coord(px, size);
      const double h = std::clamp(field.height(x, y), 0.0, 1.0);
      out.depth.at(py, px, 0) = static_cast<std::uint16_t>(std::lround(255.0 * h));
      const double shade = lambert_shading(surface_normal(field.gradient(x, y)), pose);
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(shape.albedo[c] * shade, 0.0, 1.0);
        out.rgb.at(py, px, c) = static_cast<std::uint16_t>(std::lround(255.0 * v));
      }
    }
  }
  return out;
}

DatasetManifest make_synthetic_dataset(const fs::path& root, const SyntheticSpec& spec) {
  if (spec.identities < 1 || spec.count < spec.identities) {
    throw ValidationError("make_synthetic_dataset: need count >= identities >= 1");
  }
  if (spec.size < 8) throw ValidationError("make_synthetic_dataset: size must be at least 8");
  std::error_code ec;
  fs::create_directories(root / "rgb", ec);
  if (!ec) fs::create_directories(root / "depth", ec);
  if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());

  std::vector<IdentityShape> shapes;
  for (int id = 0; id < spec.identities; ++id) shapes.push_back(sample_identity(spec.seed, id));

  DatasetManifest manifest;
  manifest.root = root;
  manifest.image_size = spec.size;
  std::vector<int> per_identity(spec.identities, 0);
  for (int i = 0; i < spec.count; ++i) {
    const int id = i % spec.identities;
    const int index = per_identity[id]++;
    const auto sample = render_sample(shapes[id], sample_pose(spec.seed, id, index), spec.size);
    const std::string file = sample_name(id, index) + ".png";
    write_png(root / "rgb" / file, sample.rgb);
    write_png(root / "depth" / file, sample.depth);
    manifest.entries.push_back("rgb/" + file);
  }
  std::sort(manifest.entries.begin(), manifest.entries.end());
  manifest.write(root / "manifest.txt");
  return manifest;
}

}  // namespace dhal
