#include "dhal/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dhal/error.hpp"

namespace dhal {

namespace fs = std::filesystem;

namespace {

std::uint16_t to_byte(float v) {
  const float scaled = std::round((std::clamp(v, -1.0f, 1.0f) + 1.0f) * 0.5f * 255.0f);
  return static_cast<std::uint16_t>(scaled);
}

}  // namespace

RawImage read_image(const fs::path& path) {
  if (!fs::exists(path)) throw LoadError("cannot read image " + path.string() + ": no such file");
  cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw LoadError("cannot decode image " + path.string());
  if (mat.depth() != CV_8U && mat.depth() != CV_16U) {
    throw LoadError("unsupported bit depth in " + path.string());
  }
  if (mat.channels() == 4) {
    cv::cvtColor(mat, mat, cv::COLOR_BGRA2RGB);
  } else if (mat.channels() == 3) {
    cv::cvtColor(mat, mat, cv::COLOR_BGR2RGB);
  } else if (mat.channels() != 1) {
    throw LoadError("unsupported channel count in " + path.string());
  }
  RawImage raw(mat.rows, mat.cols, mat.channels(), mat.depth() == CV_8U ? 255 : 65535);
  for (int y = 0; y < mat.rows; ++y) {
    for (int x = 0; x < mat.cols; ++x) {
      for (int c = 0; c < raw.channels; ++c) {
        raw.at(y, x, c) = mat.depth() == CV_8U
                              ? mat.ptr<std::uint8_t>(y)[x * raw.channels + c]
                              : mat.ptr<std::uint16_t>(y)[x * raw.channels + c];
      }
    }
  }
  return raw;
}

void write_png(const fs::path& path, const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw IoError("write_png: unsupported channel count for " + path.string());
  }
  const bool wide = image.max_value > 255;
  const int type = CV_MAKETYPE(wide ? CV_16U : CV_8U, image.channels);
  cv::Mat mat(image.height, image.width, type);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        const std::uint16_t v = image.at(y, x, c);
        if (wide) {
          mat.ptr<std::uint16_t>(y)[x * image.channels + c] = v;
        } else {
          mat.ptr<std::uint8_t>(y)[x * image.channels + c] = static_cast<std::uint8_t>(v);
        }
      }
    }
  }
  if (image.channels == 3) cv::cvtColor(mat, mat, cv::COLOR_RGB2BGR);
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), mat);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image " + path.string());
}

ImageTensor preprocess(const RawImage& raw, int target_size) {
  if (raw.height <= 0 || raw.width <= 0 || raw.pixels.empty()) {
    throw ValidationError("preprocess: zero-area image");
  }
  if (target_size < 8) {
    throw ValidationError("preprocess: target size must be at least 8, got " +
                          std::to_string(target_size));
  }
  if (raw.channels != 1 && raw.channels != 3) {
    throw ValidationError("preprocess: expected 1 or 3 channels");
  }
  const float scale = 2.0f / static_cast<float>(raw.max_value);
  cv::Mat mat(raw.height, raw.width, CV_32FC(raw.channels));
  for (int y = 0; y < raw.height; ++y) {
    float* row = mat.ptr<float>(y);
    for (int x = 0; x < raw.width; ++x) {
      for (int c = 0; c < raw.channels; ++c) {
        row[x * raw.channels + c] = static_cast<float>(raw.at(y, x, c)) * scale - 1.0f;
      }
    }
  }
  if (raw.height != target_size || raw.width != target_size) {
    cv::Mat resized;
    cv::resize(mat, resized, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
    mat = resized;
  }
  ImageTensor t(3, target_size, target_size);
  for (int y = 0; y < target_size; ++y) {
    const float* row = mat.ptr<float>(y);
    for (int x = 0; x < target_size; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = row[x * raw.channels + (raw.channels == 1 ? 0 : c)];
        t.at(c, y, x) = std::clamp(v, -1.0f, 1.0f);
      }
    }
  }
  return t;
}

RawImage to_gray8(const ImageTensor& t) {
  RawImage out(t.height, t.width, 1);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      float s = 0.0f;
      for (int c = 0; c < t.channels; ++c) s += t.at(c, y, x);
      out.at(y, x, 0) = to_byte(s / static_cast<float>(t.channels));
    }
  }
  return out;
}

RawImage to_rgb8(const ImageTensor& t) {
  if (t.channels != 3) throw ValidationError("to_rgb8: expected 3 channels");
  RawImage out(t.height, t.width, 3);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = to_byte(t.at(c, y, x));
    }
  }
  return out;
}

}  // namespace dhal
