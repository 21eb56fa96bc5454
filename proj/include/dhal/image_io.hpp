#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dhal/tensor.hpp"

namespace dhal {

/// Decoded pixel grid as stored on disk, interleaved row-major, RGB channel order.
struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;       // 1 or 3
  int max_value = 255;    // 255 for 8-bit, 65535 for 16-bit
  std::vector<std::uint16_t> pixels;

  RawImage() = default;
  RawImage(int h, int w, int c, int max = 255)
      : height(h), width(w), channels(c), max_value(max),
        pixels(static_cast<std::size_t>(h) * w * c, 0) {}

  std::uint16_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint16_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const RawImage&) const = default;
};

/// Reads an 8- or 16-bit grayscale/RGB(A) image. Throws LoadError naming the path.
RawImage read_image(const std::filesystem::path& path);

/// Writes an 8- or 16-bit PNG, creating parent directories. Throws IoError.
void write_png(const std::filesystem::path& path, const RawImage& image);

/// Maps v -> 2 * v / max - 1, replicates single-channel input to three channels and
/// resizes bilinearly to target_size x target_size.
ImageTensor preprocess(const RawImage& raw, int target_size);

/// Channel mean of a model-space tensor mapped from [-1, 1] to 8-bit grayscale.
RawImage to_gray8(const ImageTensor& t);

/// Model-space tensor mapped from [-1, 1] to 8-bit RGB.
RawImage to_rgb8(const ImageTensor& t);

}  // namespace dhal
