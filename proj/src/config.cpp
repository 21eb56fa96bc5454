#include "dhal/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dhal/error.hpp"

namespace dhal {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename Number>
Number parse_number(const std::string& key, const std::string& text) {
  Number v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + text + "' for key " + key);
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "lambda_pixel",  "lambda_cyc",   "alpha_teach",     "alpha_student",    "beta_decay",
      "teacher_decay_epoch", "student_decay_epoch", "total_epochs", "batch_size", "seed",
      "mode",          "image_size",   "base_maps",       "residual_blocks",  "checkpoint_every",
      "teacher_data",  "target_data"};
  return keys;
}

void set_config_value(TrainingConfig& c, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "lambda_pixel") {
    c.lambda_pixel = parse_number<double>(key, value);
  } else if (key == "lambda_cyc") {
    c.lambda_cyc = parse_number<double>(key, value);
  } else if (key == "alpha_teach") {
    c.alpha_teach = parse_number<double>(key, value);
  } else if (key == "alpha_student") {
    c.alpha_student = parse_number<double>(key, value);
  } else if (key == "beta_decay") {
    c.beta_decay = parse_number<double>(key, value);
  } else if (key == "teacher_decay_epoch") {
    c.teacher_decay_epoch = parse_number<int>(key, value);
  } else if (key == "student_decay_epoch") {
    c.student_decay_epoch = parse_number<int>(key, value);
  } else if (key == "total_epochs") {
    c.total_epochs = parse_number<int>(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_number<int>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "mode") {
    c.mode = parse_training_mode(value);
  } else if (key == "image_size") {
    c.image_size = parse_number<int>(key, value);
  } else if (key == "base_maps") {
    c.base_maps = parse_number<int>(key, value);
  } else if (key == "residual_blocks") {
    c.residual_blocks = parse_number<int>(key, value);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_number<int>(key, value);
  } else if (key == "teacher_data") {
    c.teacher_data = value;
  } else if (key == "target_data") {
    c.target_data = value;
  } else {
    std::string valid;
    for (const auto& k : config_keys()) valid += (valid.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config key '" + key + "'; valid keys: " + valid);
  }
}

void apply_assignment(TrainingConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("expected key=value, got '" + assignment + "'");
  }
  set_config_value(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

TrainingConfig load_config_file(const std::filesystem::path& path, TrainingConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      apply_assignment(base, line);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

std::string canonical_config_text(const TrainingConfig& c) {
  std::ostringstream os;
  os << "lambda_pixel=" << format_double(c.lambda_pixel) << '\n'
     << "lambda_cyc=" << format_double(c.lambda_cyc) << '\n'
     << "alpha_teach=" << format_double(c.alpha_teach) << '\n'
     << "alpha_student=" << format_double(c.alpha_student) << '\n'
     << "beta_decay=" << format_double(c.beta_decay) << '\n'
     << "teacher_decay_epoch=" << c.teacher_decay_epoch << '\n'
     << "student_decay_epoch=" << c.student_decay_epoch << '\n'
     << "total_epochs=" << c.total_epochs << '\n'
     << "batch_size=" << c.batch_size << '\n'
     << "seed=" << c.seed << '\n'
     << "mode=" << to_string(c.mode) << '\n'
     << "image_size=" << c.image_size << '\n'
     << "base_maps=" << c.base_maps << '\n'
     << "residual_blocks=" << c.residual_blocks << '\n'
     << "checkpoint_every=" << c.checkpoint_every << '\n'
     << "teacher_data=" << c.teacher_data << '\n'
     << "target_data=" << c.target_data << '\n';
  return os.str();
}

std::string config_hash(const TrainingConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config_text(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dhal
