#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "dhal/checkpoint.hpp"
#include "dhal/config.hpp"
#include "dhal/error.hpp"
#include "dhal/image_io.hpp"
#include "dhal/metrics.hpp"
#include "dhal/recognition.hpp"
#include "dhal/synthetic.hpp"

namespace dhal::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kIdentityCheckpoint = "identity";
constexpr const char* kGroundTruthCheckpoint = "ground-truth";
constexpr const char* kMeanDepthCheckpoint = "mean-depth";

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json config_json(const TrainingConfig& config) {
  json j = json::object();
  std::istringstream lines(canonical_config_text(config));
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    j[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

class RunManifest {
 public:
  RunManifest(std::string command, const TrainingConfig& config, const fs::path& out)
      : path_(out / "run_manifest.json") {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
    body_ = {{"command", std::move(command)},
             {"config", config_json(config)},
             {"seed", config.seed},
             {"config_hash", config_hash(config)},
             {"started_at", utc_now()},
             {"finished_at", nullptr},
             {"status", "running"},
             {"output_dir", fs::absolute(out).string()}};
    write_json(path_, body_);
  }

  void set(const std::string& key, json value) { body_[key] = std::move(value); }

  void finish() {
    body_["finished_at"] = utc_now();
    body_["status"] = "ok";
    write_json(path_, body_);
  }

 private:
  fs::path path_;
  json body_;
};

void require_dir(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw ConfigError(what + " not found: " + path);
}

bool is_checkpoint_dir(const std::string& spec) {
  std::error_code ec;
  return fs::is_directory(spec, ec) && fs::exists(fs::path(spec) / "manifest.json", ec);
}

// Image size for evaluation commands: --size, else the checkpoint's training size,
// else the resolved config.
int eval_size(const CommonOptions& common, const std::optional<int>& size,
              const TrainingConfig& config) {
  if (size) return *size;
  if (is_checkpoint_dir(common.checkpoint)) return read_checkpoint_config(common.checkpoint).image_size;
  return config.image_size;
}

// Architecture the user asked for explicitly (config file or --set); otherwise the
// checkpoint's own layout is used.
std::optional<GeneratorShape> requested_shape(const CommonOptions& common) {
  if (common.config_path.empty() && common.sets.empty()) return std::nullopt;
  return resolve_config(common).generator_shape();
}

DepthGenerator model_generator(const std::string& spec,
                               const std::optional<GeneratorShape>& shape = std::nullopt) {
  if (spec.empty()) throw ConfigError("--checkpoint is required");
  if (spec == kIdentityCheckpoint) return [](const ImageTensor& rgb) { return rgb; };
  std::error_code ec;
  if (!fs::exists(spec, ec)) throw ConfigError("checkpoint not found: " + spec);
  const fs::path archive = fs::is_directory(spec) ? fs::path(spec) / "G_A2B.bin" : fs::path(spec);
  auto g = std::make_shared<Generator<float>>(shape ? load_generator(archive, *shape)
                                                    : load_checkpoint_generator(spec));
  return [g](const ImageTensor& rgb) { return g->forward(rgb); };
}

// Generators for quality evaluation; the two oracle specs read the evaluation set
// itself and rely on evaluate_set visiting samples in order.
DepthGenerator quality_generator(const std::string& spec, const std::vector<PairedSample>& samples,
                                 const std::optional<GeneratorShape>& shape) {
  if (spec == kGroundTruthCheckpoint) {
    auto next = std::make_shared<std::size_t>(0);
    return [next, &samples](const ImageTensor&) { return samples[(*next)++ % samples.size()].depth; };
  }
  if (spec == kMeanDepthCheckpoint) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& s : samples) {
      for (float v : s.depth.channel(0)) sum += v;
      n += s.depth.channel(0).size();
    }
    const float mean = static_cast<float>(sum / static_cast<double>(n));
    return [mean](const ImageTensor& rgb) { return ImageTensor(3, rgb.height, rgb.width, mean); };
  }
  return model_generator(spec, shape);
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" ||
        ext == ".tiff") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

json modality_json(const std::optional<ModalityScores>& m) {
  if (!m) return nullptr;
  return {{"depth", m->depth}, {"feature_fusion", m->feature}, {"score_fusion", m->score}};
}

json recognition_json(const RecognitionReport& r) {
  return {{"protocol", r.protocol},
          {"backbone", r.backbone},
          {"identities", r.identities},
          {"train_count", r.train_count},
          {"test_count", r.test_count},
          {"rgb", r.rgb},
          {"rgb_d", modality_json(r.ground_truth)},
          {"rgb_d_hallucinated", modality_json(r.hallucinated)}};
}

std::string cell(const std::optional<ModalityScores>& m, double ModalityScores::*field) {
  if (!m) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", (*m).*field);
  return buf;
}

std::string markdown_row(const RecognitionReport& r) {
  char rgb[32];
  std::snprintf(rgb, sizeof(rgb), "%.2f", r.rgb);
  return "| " + r.protocol + " | " + r.backbone + " | " + rgb + " | " +
         cell(r.ground_truth, &ModalityScores::depth) + " | " +
         cell(r.ground_truth, &ModalityScores::feature) + " | " +
         cell(r.ground_truth, &ModalityScores::score) + " | " +
         cell(r.hallucinated, &ModalityScores::depth) + " | " +
         cell(r.hallucinated, &ModalityScores::feature) + " | " +
         cell(r.hallucinated, &ModalityScores::score) + " |\n";
}

void blit(RawImage& grid, const RawImage& tile, int row, int col) {
  const int s = tile.height;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      for (int c = 0; c < 3; ++c) {
        grid.at(row * s + y, col * s + x, c) = tile.at(y, x, tile.channels == 1 ? 0 : c);
      }
    }
  }
}

}  // namespace

TrainingConfig resolve_config(const CommonOptions& common) {
  TrainingConfig config;
  if (!common.config_path.empty()) config = load_config_file(common.config_path, config);
  for (const auto& s : common.sets) apply_assignment(config, s);
  if (common.seed) config.seed = *common.seed;
  if (common.mode) config.mode = parse_training_mode(*common.mode);
  if (common.epochs) config.total_epochs = *common.epochs;
  return config;
}

fs::path resolve_out(const CommonOptions& common, const std::string& leaf) {
  if (!common.out.empty()) return common.out;
  if (const char* root = std::getenv("DEPTH_HALLUC_OUT"); root && *root) return fs::path(root) / leaf;
  return fs::path("runs") / leaf;
}

int cmd_train(const CommonOptions& common, const TrainOptions& options) {
  const TrainingConfig config = resolve_config(common);
  config.validate();
  require_dir(config.teacher_data, "teacher_data");
  const bool full = config.mode == TrainingMode::kFull;
  if (full) require_dir(config.target_data, "target_data");

  const std::string hash = config_hash(config);
  const fs::path out = resolve_out(common, "train-" + hash);
  RunManifest manifest("train", config, out);

  const auto teacher =
      load_paired_dataset(DatasetManifest::open(config.teacher_data, config.image_size));
  std::vector<UnpairedSample> target;
  if (full) target = load_rgb_dataset(DatasetManifest::open(config.target_data, config.image_size));
  std::cout << "teacher samples: " << teacher.size() << ", target samples: " << target.size()
            << std::endl;

  const fs::path checkpoints = out / "checkpoints";
  const fs::path csv_path = out / "loss_curves.csv";
  std::unique_ptr<Trainer> trainer;
  std::string kept_rows;
  if (options.resume) {
    if (const auto latest = latest_checkpoint(checkpoints)) {
      const auto info = read_checkpoint_info(*latest);
      if (info.config_hash != hash) {
        std::cerr << "warning: resuming " << latest->string() << " written with config "
                  << info.config_hash << " under config " << hash << '\n';
      }
      trainer = std::make_unique<Trainer>(config, teacher, target, load_train_state(*latest, config),
                                          info.trainer_rng);
      std::ifstream in(csv_path);
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (std::stoi(line.substr(0, line.find(','))) <= info.epoch) kept_rows += line + '\n';
      }
      std::cout << "resumed from " << latest->string() << " at epoch " << info.epoch << std::endl;
      manifest.set("resumed_from", latest->string());
    }
  }
  if (!trainer) trainer = std::make_unique<Trainer>(config, teacher, target);

  {
    std::ofstream csv(csv_path, std::ios::trunc);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << "epoch,step,loss_name,value\n" << kept_rows;
  }

  while (!trainer->done()) {
    const auto summary = trainer->run_epoch();
    {
      std::ofstream csv(csv_path, std::ios::app);
      for (const auto& row : trainer->curves()) {
        if (row.epoch != summary.epoch) continue;
        csv << row.epoch << ',' << row.step << ',' << row.name << ',' << fmt(row.value) << '\n';
      }
      if (!csv) throw IoError("failed writing " + csv_path.string());
    }
    std::cout << "epoch " << summary.epoch << "/" << config.total_epochs;
    for (const auto& [name, v] : summary.means.values) std::cout << ' ' << name << '=' << fmt(v);
    std::cout << std::endl;
    if (summary.epoch % config.checkpoint_every == 0 || summary.epoch == config.total_epochs) {
      const auto dir = save_checkpoint(checkpoints, *trainer, summary);
      std::cout << "checkpoint " << dir.string() << std::endl;
    }
  }
  manifest.finish();
  return kExitOk;
}

int cmd_hallucinate(const CommonOptions& common, const HallucinateOptions& options) {
  const TrainingConfig config = resolve_config(common);
  require_dir(options.input, "input directory");
  std::optional<int> size = options.size;
  if (!size && is_checkpoint_dir(common.checkpoint)) {
    size = read_checkpoint_config(common.checkpoint).image_size;
  }
  const auto generator = model_generator(common.checkpoint, requested_shape(common));
  const fs::path out = resolve_out(common, "hallucinate");
  RunManifest manifest("hallucinate", config, out);
  manifest.set("checkpoint", common.checkpoint);

  std::size_t written = 0;
  for (const auto& path : list_images(options.input)) {
    const RawImage raw = read_image(path);
    const int s = size.value_or(raw.height);
    const ImageTensor depth = generator(preprocess(raw, s));
    write_png(out / (path.stem().string() + ".png"), to_gray8(depth));
    ++written;
  }
  std::cout << "wrote " << written << " depth images to " << out.string() << std::endl;
  manifest.set("count", written);
  manifest.finish();
  return kExitOk;
}

int cmd_eval_quality(const CommonOptions& common, const EvalQualityOptions& options) {
  const TrainingConfig config = resolve_config(common);
  require_dir(options.data, "evaluation dataset");
  if (common.checkpoint.empty()) throw ConfigError("--checkpoint is required");
  const int size = eval_size(common, options.size, config);
  const fs::path out = resolve_out(common, "eval-quality");
  RunManifest manifest("eval-quality", config, out);
  manifest.set("checkpoint", common.checkpoint);

  const auto samples = load_paired_dataset(DatasetManifest::open(options.data, size));
  const auto report = evaluate_set(samples, quality_generator(common.checkpoint, samples, requested_shape(common)));

  json j = {{"abs_diff", report.abs_diff},
            {"abs_rel", report.abs_rel},
            {"l1_norm", report.l1_norm},
            {"l2_norm", report.l2_norm},
            {"rmse", report.rmse},
            {"delta", report.delta},
            {"fid", report.fid ? json(*report.fid) : json(nullptr)},
            {"sample_count", report.sample_count}};
  write_json(out / "quality_report.json", j);

  std::ofstream csv(out / "quality_per_image.csv");
  csv << "name,Abs. Diff.,L1 Norm,L2 Norm,RMSE,delta<1.25,delta<1.25^2,delta<1.25^3\n";
  for (const auto& row : report.rows) {
    const auto& m = row.metrics;
    csv << row.name << ',' << fmt(m.abs_diff) << ',' << fmt(m.l1_norm) << ',' << fmt(m.l2_norm)
        << ',' << fmt(m.rmse) << ',' << fmt(m.delta[0]) << ',' << fmt(m.delta[1]) << ','
        << fmt(m.delta[2]) << '\n';
  }
  if (!csv) throw IoError("failed writing per-image csv");
  std::cout << j.dump(2) << std::endl;
  manifest.finish();
  return kExitOk;
}

int cmd_eval_recognition(const CommonOptions& common, const EvalRecognitionOptions& options) {
  const TrainingConfig config = resolve_config(common);
  require_dir(options.data, "recognition dataset");
  const int size = eval_size(common, options.size, config);
  const auto generator = model_generator(common.checkpoint, requested_shape(common));
  const fs::path out = resolve_out(common, "eval-recognition");
  RunManifest manifest("eval-recognition", config, out);
  manifest.set("checkpoint", common.checkpoint);

  const auto samples = load_paired_dataset(DatasetManifest::open(options.data, size));
  ProtocolOptions protocol;
  protocol.budget.epochs = options.backbone_epochs;
  protocol.budget.seed = config.seed;
  protocol.ground_truth_depth = options.ground_truth;
  const auto result = run_kfold(samples, options.folds, config.seed, generator, protocol);

  json folds = json::array();
  for (const auto& r : result.folds) folds.push_back(recognition_json(r));
  write_json(out / "recognition_report.json",
             {{"folds", folds}, {"mean", recognition_json(result.mean)}});

  std::string table =
      "| Protocol | Backbone | RGB | D | RGB+D Feat. Fusion | RGB+D Score Fusion | D~ | "
      "RGB+D~ Feat. Fusion | RGB+D~ Score Fusion |\n"
      "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : result.folds) table += markdown_row(r);
  table += markdown_row(result.mean);
  std::ofstream md(out / "recognition_table.md");
  md << table;
  std::cout << table;
  manifest.finish();
  return kExitOk;
}

int cmd_make_synthetic(const CommonOptions& common, const MakeSyntheticOptions& options) {
  TrainingConfig config = resolve_config(common);
  SyntheticSpec spec;
  spec.count = options.count;
  spec.size = options.size;
  spec.identities = options.identities;
  spec.seed = common.seed.value_or(options.seed);
  config.seed = spec.seed;
  const fs::path out = resolve_out(common, "synthetic");
  RunManifest manifest("make-synthetic", config, out);
  manifest.set("synthetic", {{"count", spec.count},
                             {"size", spec.size},
                             {"identities", spec.identities},
                             {"seed", spec.seed}});
  const auto m = make_synthetic_dataset(out, spec);
  std::cout << "wrote " << m.sample_count() << " paired samples to " << out.string() << std::endl;
  manifest.finish();
  return kExitOk;
}

int cmd_export_samples(const CommonOptions& common, const ExportSamplesOptions& options) {
  const TrainingConfig config = resolve_config(common);
  require_dir(options.data, "dataset");
  if (options.count < 1) throw ConfigError("--count must be at least 1");
  const int size = eval_size(common, options.size, config);
  const auto generator = model_generator(common.checkpoint, requested_shape(common));
  std::optional<Generator<float>> reverse;
  if (is_checkpoint_dir(common.checkpoint)) {
    reverse = load_checkpoint_reverse_generator(common.checkpoint);
  }
  const fs::path out = resolve_out(common, "export-samples");
  RunManifest manifest("export-samples", config, out);
  manifest.set("checkpoint", common.checkpoint);

  auto dataset = DatasetManifest::open(options.data, size);
  if (dataset.entries.size() > static_cast<std::size_t>(options.count)) {
    dataset.entries.resize(options.count);
  }
  const auto samples = load_paired_dataset(dataset);
  const int rows = static_cast<int>(samples.size());
  RawImage grid(rows * size, 4 * size, 3);
  for (int r = 0; r < rows; ++r) {
    const auto& s = samples[r];
    const ImageTensor fake = generator(s.rgb);
    blit(grid, to_rgb8(s.rgb), r, 0);
    blit(grid, to_gray8(s.depth), r, 1);
    blit(grid, to_gray8(fake), r, 2);
    if (reverse) blit(grid, to_rgb8(reverse->forward(fake)), r, 3);
  }
  write_png(out / "samples_grid.png", grid);
  std::cout << "wrote " << rows << "x4 grid to " << (out / "samples_grid.png").string() << std::endl;
  manifest.finish();
  return kExitOk;
}

}  // namespace dhal::cli
