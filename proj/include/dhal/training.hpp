#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dhal/datasets.hpp"
#include "dhal/losses.hpp"
#include "dhal/models.hpp"
#include "dhal/optim.hpp"

namespace dhal {

enum class TrainingMode { kFull, kTeacherOnly, kTeacherGeneratorOnly };

std::string to_string(TrainingMode mode);
/// Accepts "full", "teacher_only", "teacher_generator_only". Throws ConfigError.
TrainingMode parse_training_mode(const std::string& text);

struct TrainingConfig {
  double lambda_pixel = 10.0;
  double lambda_cyc = 5.0;
  double alpha_teach = 2e-4;
  double alpha_student = 2e-6;
  double beta_decay = 0.5;
  int teacher_decay_epoch = 25;
  int student_decay_epoch = 50;
  int total_epochs = 100;
  int batch_size = 1;
  std::uint64_t seed = 0;
  TrainingMode mode = TrainingMode::kFull;

  int image_size = 128;
  int base_maps = 64;
  int residual_blocks = 6;
  int checkpoint_every = 5;
  std::string teacher_data;
  std::string target_data;

  LossWeights weights() const { return {lambda_pixel, lambda_cyc}; }
  GeneratorShape generator_shape() const {
    return GeneratorShape::with_base(base_maps, residual_blocks);
  }
  DiscriminatorShape discriminator_shape() const { return DiscriminatorShape::with_base(base_maps); }

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// base for epoch <= decay_start, base * decay_rate^(epoch - decay_start) afterwards.
double lr_schedule(int epoch, double base, int decay_start, double decay_rate);

/// History buffer of generated images fed to a discriminator instead of the
/// freshest output. Below capacity every query is stored and returned as is;
/// once full, a fair coin either returns the query unchanged or swaps it with a
/// uniformly chosen stored image and returns that one.
template <typename T>
class ImagePool {
 public:
  static constexpr std::size_t kDefaultCapacity = 50;

  explicit ImagePool(std::size_t capacity = kDefaultCapacity, std::uint64_t seed = 0)
      : capacity_(capacity), rng_(seed) {}

  Tensor<T> query(const Tensor<T>& image);
  /// Same policy with the random draws supplied by the caller: coin in [0, 1)
  /// (< 0.5 swaps) and slot in [0, capacity).
  Tensor<T> query(const Tensor<T>& image, double coin, std::size_t slot);

  std::size_t size() const { return images_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::vector<Tensor<T>>& images() const { return images_; }

  std::string rng_state() const;
  void restore(std::vector<Tensor<T>> images, const std::string& rng_state);

 private:
  std::size_t capacity_;
  std::vector<Tensor<T>> images_;
  std::mt19937_64 rng_;
};

/// Ordered (name, value) pairs produced by one update step.
struct LossRecord {
  std::vector<std::pair<std::string, double>> values;

  void add(std::string name, double v) { values.emplace_back(std::move(name), v); }
  double get(const std::string& name) const;
  bool has(const std::string& name) const;
};

template <typename T>
struct TrainState {
  Generator<T> g_a2b;   // shared by the teacher and student phases
  Generator<T> g_b2a;
  Discriminator<T> d_depth;
  Discriminator<T> d_rgb;
  Adam<T> teacher_gen_opt;
  Adam<T> teacher_disc_opt;
  Adam<T> student_gen_opt;   // G_A2B followed by G_B2A
  Adam<T> student_disc_opt;
  ImagePool<T> depth_pool;
  ImagePool<T> rgb_pool;
  int epoch = 0;  // completed epochs

  static TrainState initialize(const GeneratorShape& gen, const DiscriminatorShape& disc,
                               std::uint64_t seed);
  static TrainState initialize(const TrainingConfig& config) {
    return initialize(config.generator_shape(), config.discriminator_shape(), config.seed);
  }

  nn::ParameterList<T> student_generator_parameters();
};

/// Forward + backward of the teacher objective without updating anything.
/// Leaves d(total)/d(theta) in the grads of g_a2b and d_depth (both zeroed first).
/// In teacher_generator_only mode the adversarial term is dropped.
template <typename T>
LossRecord teacher_gradients(TrainState<T>& state, const Tensor<T>& rgb, const Tensor<T>& depth,
                             const TrainingConfig& config, Tensor<T>* fake_depth = nullptr);

/// Forward + backward of the student objective; grads land in g_a2b, g_b2a,
/// d_depth and d_rgb (all zeroed first).
template <typename T>
LossRecord student_gradients(TrainState<T>& state, const Tensor<T>& rgb,
                             const TrainingConfig& config, Tensor<T>* reconstruction = nullptr);

/// Updates G_A2B on the teacher objective, then D_depth on pooled fakes.
/// Throws NumericalError (before any update) when a loss is not finite.
template <typename T>
LossRecord teacher_step(TrainState<T>& state, const Tensor<T>& rgb, const Tensor<T>& depth,
                        const TrainingConfig& config, double learning_rate);

/// Updates G_A2B and G_B2A on the student objective, then D_RGB on pooled
/// reconstructions. D_depth only supplies gradients.
template <typename T>
LossRecord student_step(TrainState<T>& state, const Tensor<T>& rgb, const TrainingConfig& config,
                        double learning_rate);

struct LossCurveRow {
  int epoch;
  int step;
  std::string name;
  double value;
};

struct EpochSummary {
  int epoch = 0;
  double lr_teacher = 0;
  double lr_student = 0;
  int steps = 0;
  LossRecord means;
};

/// Interleaved teacher/student epochs over shuffled datasets; the shorter dataset
/// is cycled. Owns the shuffling RNG so a run can be checkpointed mid-way.
class Trainer {
 public:
  Trainer(TrainingConfig config, std::span<const PairedSample> teacher,
          std::span<const UnpairedSample> target);
  Trainer(TrainingConfig config, std::span<const PairedSample> teacher,
          std::span<const UnpairedSample> target, TrainState<float> state,
          const std::string& rng_state);

  bool done() const { return state_.epoch >= config_.total_epochs; }
  EpochSummary run_epoch();

  TrainState<float>& state() { return state_; }
  const TrainingConfig& config() const { return config_; }
  std::string rng_state() const;
  const std::vector<LossCurveRow>& curves() const { return curves_; }
  const std::vector<EpochSummary>& history() const { return history_; }

 private:
  TrainingConfig config_;
  std::span<const PairedSample> teacher_;
  std::span<const UnpairedSample> target_;
  TrainState<float> state_;
  std::mt19937_64 rng_;
  std::vector<LossCurveRow> curves_;
  std::vector<EpochSummary> history_;
};

struct TrainOptions {
  /// Called after each epoch (e.g. to write checkpoints).
  std::function<void(Trainer&, const EpochSummary&)> on_epoch;
};

struct TrainResult {
  TrainState<float> state;
  std::vector<LossCurveRow> curves;
  std::vector<EpochSummary> epochs;
};

TrainResult train(const TrainingConfig& config, std::span<const PairedSample> teacher,
                  std::span<const UnpairedSample> target, const TrainOptions& options = {});

}  // namespace dhal
