#include "dhal/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dhal/config.hpp"
#include "dhal/error.hpp"

namespace dhal {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr char kMagic[4] = {'D', 'H', 'A', 'R'};
constexpr std::uint32_t kVersion = 1;

template <typename V>
void put(std::ostream& os, V v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V get(std::istream& is, const fs::path& path) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) {
    throw LoadError("truncated archive " + path.string());
  }
  return v;
}

std::string dims_string(const std::vector<std::int64_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

std::vector<std::int64_t> to_dims(const std::vector<int>& shape) {
  return {shape.begin(), shape.end()};
}

const ArchiveEntry* find_entry(const std::vector<ArchiveEntry>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

std::vector<ArchiveEntry> adam_entries(const AdamState<float>& state) {
  std::vector<ArchiveEntry> out;
  for (std::size_t i = 0; i < state.first.size(); ++i) {
    const auto n = static_cast<std::int64_t>(state.first[i].size());
    out.push_back({"m" + std::to_string(i), {n}, state.first[i]});
    out.push_back({"v" + std::to_string(i), {n}, state.second[i]});
  }
  return out;
}

AdamState<float> adam_from_entries(const std::vector<ArchiveEntry>& entries, std::int64_t step) {
  AdamState<float> state;
  state.step = step;
  for (std::size_t i = 0;; ++i) {
    const auto* m = find_entry(entries, "m" + std::to_string(i));
    const auto* v = find_entry(entries, "v" + std::to_string(i));
    if (!m || !v) break;
    state.first.push_back(m->data);
    state.second.push_back(v->data);
  }
  return state;
}

std::vector<ArchiveEntry> pool_entries(const ImagePool<float>& pool) {
  std::vector<ArchiveEntry> out;
  for (std::size_t i = 0; i < pool.images().size(); ++i) {
    const auto& t = pool.images()[i];
    out.push_back({"image" + std::to_string(i), {t.channels, t.height, t.width}, t.data});
  }
  return out;
}

std::vector<Tensor<float>> pool_from_entries(const std::vector<ArchiveEntry>& entries,
                                             const fs::path& path) {
  std::vector<Tensor<float>> images;
  for (const auto& e : entries) {
    if (e.dims.size() != 3) throw LoadError("pool archive " + path.string() + ": bad image rank");
    Tensor<float> t(static_cast<int>(e.dims[0]), static_cast<int>(e.dims[1]),
                    static_cast<int>(e.dims[2]));
    t.data = e.data;
    images.push_back(std::move(t));
  }
  return images;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw LoadError("malformed json " + path.string() + ": " + e.what());
  }
}

template <typename Model>
void load_model_file(Model& model, const fs::path& path) {
  load_parameters(model.parameters(), read_archive(path), path.string());
}

}  // namespace

void write_archive(const fs::path& path, const std::vector<ArchiveEntry>& entries) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
      out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
      for (auto d : e.dims) put<std::int64_t>(out, d);
      out.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::vector<ArchiveEntry> read_archive(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open archive " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw LoadError("not a parameter archive: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw LoadError("unsupported archive version " + std::to_string(version) + " in " +
                    path.string());
  }
  const auto count = get<std::uint32_t>(in, path);
  std::vector<ArchiveEntry> entries(count);
  for (auto& e : entries) {
    const auto len = get<std::uint32_t>(in, path);
    if (len > 4096) throw LoadError("corrupt entry name in " + path.string());
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw LoadError("truncated archive " + path.string());
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw LoadError("corrupt entry rank in " + path.string());
    std::int64_t total = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      e.dims.push_back(get<std::int64_t>(in, path));
      if (e.dims.back() < 0 || e.dims.back() > (1 << 28)) {
        throw LoadError("corrupt entry dims in " + path.string());
      }
      total *= e.dims.back();
    }
    e.data.resize(static_cast<std::size_t>(total));
    if (!in.read(reinterpret_cast<char*>(e.data.data()),
                 static_cast<std::streamsize>(total * sizeof(float)))) {
      throw LoadError("truncated archive " + path.string());
    }
  }
  return entries;
}

std::vector<ArchiveEntry> parameter_entries(const nn::ParameterList<float>& params) {
  std::vector<ArchiveEntry> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, to_dims(p->shape), p->value});
  return out;
}

void load_parameters(const nn::ParameterList<float>& params, const std::vector<ArchiveEntry>& entries,
                     const std::string& source) {
  std::vector<std::string> diff;
  for (const auto* p : params) {
    const auto* e = find_entry(entries, p->name);
    if (!e) {
      diff.push_back(p->name + ": expected " + dims_string(to_dims(p->shape)) + ", missing");
    } else if (e->dims != to_dims(p->shape)) {
      diff.push_back(p->name + ": expected " + dims_string(to_dims(p->shape)) + ", got " +
                     dims_string(e->dims));
    }
  }
  for (const auto& e : entries) {
    const bool known = std::any_of(params.begin(), params.end(),
                                   [&](const auto* p) { return p->name == e.name; });
    if (!known) diff.push_back(e.name + ": unexpected entry " + dims_string(e.dims));
  }
  if (!diff.empty()) {
    std::string msg = "architecture mismatch loading " + source + ":";
    for (const auto& d : diff) msg += "\n  " + d;
    throw LoadError(msg);
  }
  for (auto* p : params) p->value = find_entry(entries, p->name)->data;
}

GeneratorShape infer_generator_shape(const std::vector<ArchiveEntry>& entries) {
  GeneratorShape shape;
  for (int i = 0; i < 3; ++i) {
    const auto* e = find_entry(entries, "enc" + std::to_string(i) + ".weight");
    if (!e || e->dims.size() != 4) throw LoadError("archive is not a generator (no enc weights)");
    shape.encoder_maps[i] = static_cast<int>(e->dims[0]);
  }
  shape.residual_blocks = 0;
  while (find_entry(entries, "res" + std::to_string(shape.residual_blocks) + ".conv1.weight")) {
    ++shape.residual_blocks;
  }
  return shape;
}

void save_generator(const fs::path& path, Generator<float>& g) {
  write_archive(path, parameter_entries(g.parameters()));
}

Generator<float> load_generator(const fs::path& path) {
  const auto entries = read_archive(path);
  Generator<float> g(infer_generator_shape(entries));
  load_parameters(g.parameters(), entries, path.string());
  return g;
}

Generator<float> load_generator(const fs::path& path, const GeneratorShape& shape) {
  Generator<float> g(shape);
  load_model_file(g, path);
  return g;
}

std::string checkpoint_dir_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%04d", epoch);
  return buf;
}

fs::path save_checkpoint(const fs::path& checkpoints_dir, Trainer& trainer,
                         const EpochSummary& summary) {
  auto& state = trainer.state();
  const auto& config = trainer.config();
  const bool full = config.mode == TrainingMode::kFull;
  const fs::path dir = checkpoints_dir / checkpoint_dir_name(state.epoch);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  write_archive(dir / "G_A2B.bin", parameter_entries(state.g_a2b.parameters()));
  write_archive(dir / "D_depth.bin", parameter_entries(state.d_depth.parameters()));
  write_archive(dir / "opt_teacher_gen.bin", adam_entries(state.teacher_gen_opt.state()));
  write_archive(dir / "opt_teacher_disc.bin", adam_entries(state.teacher_disc_opt.state()));
  write_archive(dir / "pool_depth.bin", pool_entries(state.depth_pool));
  if (full) {
    write_archive(dir / "G_B2A.bin", parameter_entries(state.g_b2a.parameters()));
    write_archive(dir / "D_RGB.bin", parameter_entries(state.d_rgb.parameters()));
    write_archive(dir / "opt_student_gen.bin", adam_entries(state.student_gen_opt.state()));
    write_archive(dir / "opt_student_disc.bin", adam_entries(state.student_disc_opt.state()));
    write_archive(dir / "pool_rgb.bin", pool_entries(state.rgb_pool));
  }

  json metrics = json::object();
  for (const auto& [name, v] : summary.means.values) metrics[name] = v;
  const auto gs = config.generator_shape();
  json manifest = {
      {"epoch", state.epoch},
      {"config_hash", config_hash(config)},
      {"seed", config.seed},
      {"mode", to_string(config.mode)},
      {"config", canonical_config_text(config)},
      {"metrics", metrics},
      {"lr_teacher", summary.lr_teacher},
      {"lr_student", summary.lr_student},
      {"generator", {{"encoder_maps", gs.encoder_maps}, {"residual_blocks", gs.residual_blocks}}},
      {"discriminator", {{"maps", config.discriminator_shape().maps}}},
      {"optimizer_steps",
       {{"teacher_gen", state.teacher_gen_opt.state().step},
        {"teacher_disc", state.teacher_disc_opt.state().step},
        {"student_gen", state.student_gen_opt.state().step},
        {"student_disc", state.student_disc_opt.state().step}}},
      {"rng",
       {{"trainer", trainer.rng_state()},
        {"pool_depth", state.depth_pool.rng_state()},
        {"pool_rgb", state.rgb_pool.rng_state()}}},
  };
  write_json(dir / "manifest.json", manifest);
  return dir;
}

std::optional<fs::path> latest_checkpoint(const fs::path& checkpoints_dir) {
  std::error_code ec;
  if (!fs::is_directory(checkpoints_dir, ec)) return std::nullopt;
  std::optional<fs::path> best;
  int best_epoch = -1;
  for (const auto& entry : fs::directory_iterator(checkpoints_dir)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("epoch_", 0) != 0) continue;
    if (!fs::exists(entry.path() / "manifest.json")) continue;
    try {
      const int epoch = std::stoi(name.substr(6));
      if (epoch > best_epoch) {
        best_epoch = epoch;
        best = entry.path();
      }
    } catch (const std::exception&) {
    }
  }
  return best;
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
  const json j = read_json(dir / "manifest.json");
  try {
    CheckpointInfo info;
    info.epoch = j.at("epoch").get<int>();
    info.config_hash = j.at("config_hash").get<std::string>();
    info.seed = j.at("seed").get<std::uint64_t>();
    info.mode = j.at("mode").get<std::string>();
    info.trainer_rng = j.at("rng").at("trainer").get<std::string>();
    return info;
  } catch (const json::exception& e) {
    throw LoadError("incomplete checkpoint manifest in " + dir.string() + ": " + e.what());
  }
}

TrainingConfig read_checkpoint_config(const fs::path& dir) {
  const json j = read_json(dir / "manifest.json");
  if (!j.contains("config") || !j["config"].is_string()) {
    throw LoadError("checkpoint manifest in " + dir.string() + " has no config");
  }
  TrainingConfig config;
  std::istringstream lines(j["config"].get<std::string>());
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) apply_assignment(config, line);
  }
  return config;
}

TrainState<float> load_train_state(const fs::path& dir, const TrainingConfig& config) {
  const json j = read_json(dir / "manifest.json");
  auto state = TrainState<float>::initialize(config);
  load_model_file(state.g_a2b, dir / "G_A2B.bin");
  load_model_file(state.d_depth, dir / "D_depth.bin");
  if (fs::exists(dir / "G_B2A.bin")) load_model_file(state.g_b2a, dir / "G_B2A.bin");
  if (fs::exists(dir / "D_RGB.bin")) load_model_file(state.d_rgb, dir / "D_RGB.bin");

  try {
    const auto& steps = j.at("optimizer_steps");
    auto restore_opt = [&](Adam<float>& opt, const char* file, const char* key) {
      if (!fs::exists(dir / file)) return;
      opt.set_state(adam_from_entries(read_archive(dir / file), steps.at(key).get<std::int64_t>()));
    };
    restore_opt(state.teacher_gen_opt, "opt_teacher_gen.bin", "teacher_gen");
    restore_opt(state.teacher_disc_opt, "opt_teacher_disc.bin", "teacher_disc");
    restore_opt(state.student_gen_opt, "opt_student_gen.bin", "student_gen");
    restore_opt(state.student_disc_opt, "opt_student_disc.bin", "student_disc");

    const auto& rng = j.at("rng");
    if (fs::exists(dir / "pool_depth.bin")) {
      state.depth_pool.restore(pool_from_entries(read_archive(dir / "pool_depth.bin"), dir),
                               rng.at("pool_depth").get<std::string>());
    }
    if (fs::exists(dir / "pool_rgb.bin")) {
      state.rgb_pool.restore(pool_from_entries(read_archive(dir / "pool_rgb.bin"), dir),
                             rng.at("pool_rgb").get<std::string>());
    }
    state.epoch = j.at("epoch").get<int>();
  } catch (const json::exception& e) {
    throw LoadError("incomplete checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  return state;
}

Generator<float> load_checkpoint_generator(const fs::path& path) {
  if (fs::is_directory(path)) return load_generator(path / "G_A2B.bin");
  return load_generator(path);
}

std::optional<Generator<float>> load_checkpoint_reverse_generator(const fs::path& dir) {
  if (!fs::is_directory(dir) || !fs::exists(dir / "G_B2A.bin")) return std::nullopt;
  return load_generator(dir / "G_B2A.bin");
}

}  // namespace dhal
