#include "dhal/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dhal/error.hpp"

namespace dhal {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    stream};
  std::mt19937_64 rng(seq);
  return rng();
}

enum Stream : std::uint32_t {
  kGenA2B = 1,
  kGenB2A,
  kDiscDepth,
  kDiscRgb,
  kPoolDepth,
  kPoolRgb,
  kShuffle
};

void check_finite(const LossRecord& rec, const char* phase) {
  for (const auto& [name, v] : rec.values) {
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << phase << ": non-finite loss " << name << "; snapshot:";
      for (const auto& [n2, v2] : rec.values) msg << ' ' << n2 << '=' << v2;
      throw NumericalError(msg.str());
    }
  }
}

}  // namespace

std::string to_string(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kFull:
      return "full";
    case TrainingMode::kTeacherOnly:
      return "teacher_only";
    case TrainingMode::kTeacherGeneratorOnly:
      return "teacher_generator_only";
  }
  return "full";
}

TrainingMode parse_training_mode(const std::string& text) {
  if (text == "full") return TrainingMode::kFull;
  if (text == "teacher_only") return TrainingMode::kTeacherOnly;
  if (text == "teacher_generator_only") return TrainingMode::kTeacherGeneratorOnly;
  throw ConfigError("unknown mode '" + text +
                    "' (expected full, teacher_only or teacher_generator_only)");
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (!(alpha_teach > 0.0) || !(alpha_student > 0.0)) fail("learning rates must be positive");
  if (!(beta_decay > 0.0 && beta_decay <= 1.0)) fail("beta_decay must lie in (0, 1]");
  if (lambda_pixel < 0.0 || lambda_cyc < 0.0) fail("loss weights must be nonnegative");
  if (teacher_decay_epoch < 0 || student_decay_epoch < 0) fail("decay epochs must be >= 0");
  if (total_epochs < 0) fail("total_epochs must be >= 0");
  if (batch_size != 1) fail("only batch_size=1 is supported");
  if (image_size < 8 || image_size % DiscriminatorShape::with_base(1).downsample_factor() != 0) {
    fail("image_size must be a positive multiple of 32");
  }
  if (base_maps < 1 || residual_blocks < 0) fail("base_maps must be >= 1, residual_blocks >= 0");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
}

double lr_schedule(int epoch, double base, int decay_start, double decay_rate) {
  if (epoch < 0) throw ValidationError("lr_schedule: epoch must be >= 0");
  if (epoch <= decay_start) return base;
  return base * std::pow(decay_rate, epoch - decay_start);
}

// ---------------------------------------------------------------------------
// ImagePool

template <typename T>
Tensor<T> ImagePool<T>::query(const Tensor<T>& image) {
  if (images_.size() < capacity_) return query(image, 1.0, 0);
  const double coin = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
  std::size_t slot = 0;
  if (coin < 0.5) slot = std::uniform_int_distribution<std::size_t>(0, capacity_ - 1)(rng_);
  return query(image, coin, slot);
}

template <typename T>
Tensor<T> ImagePool<T>::query(const Tensor<T>& image, double coin, std::size_t slot) {
  if (capacity_ == 0) return image;
  if (images_.size() < capacity_) {
    images_.push_back(image);
    return image;
  }
  if (coin < 0.5) {
    if (slot >= capacity_) throw ValidationError("image pool: slot out of range");
    Tensor<T> old = std::move(images_[slot]);
    images_[slot] = image;
    return old;
  }
  return image;
}

template <typename T>
std::string ImagePool<T>::rng_state() const {
  std::ostringstream os;
  os << rng_;
  return os.str();
}

template <typename T>
void ImagePool<T>::restore(std::vector<Tensor<T>> images, const std::string& rng_state) {
  if (images.size() > capacity_) throw ValidationError("image pool: too many stored images");
  images_ = std::move(images);
  std::istringstream is(rng_state);
  is >> rng_;
  if (!is) throw LoadError("image pool: malformed rng state");
}

// ---------------------------------------------------------------------------
// LossRecord

double LossRecord::get(const std::string& name) const {
  for (const auto& [n, v] : values) {
    if (n == name) return v;
  }
  throw ValidationError("loss record has no entry '" + name + "'");
}

bool LossRecord::has(const std::string& name) const {
  return std::any_of(values.begin(), values.end(), [&](const auto& e) { return e.first == name; });
}

// ---------------------------------------------------------------------------
// TrainState

template <typename T>
TrainState<T> TrainState<T>::initialize(const GeneratorShape& gen, const DiscriminatorShape& disc,
                                        std::uint64_t seed) {
  return TrainState<T>{
      init_generator<T>(gen, derive_seed(seed, kGenA2B)),
      init_generator<T>(gen, derive_seed(seed, kGenB2A)),
      init_discriminator<T>(disc, derive_seed(seed, kDiscDepth)),
      init_discriminator<T>(disc, derive_seed(seed, kDiscRgb)),
      Adam<T>{},
      Adam<T>{},
      Adam<T>{},
      Adam<T>{},
      ImagePool<T>(ImagePool<T>::kDefaultCapacity, derive_seed(seed, kPoolDepth)),
      ImagePool<T>(ImagePool<T>::kDefaultCapacity, derive_seed(seed, kPoolRgb)),
      0};
}

template <typename T>
nn::ParameterList<T> TrainState<T>::student_generator_parameters() {
  auto params = g_a2b.parameters();
  auto more = g_b2a.parameters();
  params.insert(params.end(), more.begin(), more.end());
  return params;
}

// ---------------------------------------------------------------------------
// Steps

template <typename T>
LossRecord teacher_gradients(TrainState<T>& state, const Tensor<T>& rgb, const Tensor<T>& depth,
                             const TrainingConfig& config, Tensor<T>* fake_depth) {
  const bool adversarial = config.mode != TrainingMode::kTeacherGeneratorOnly;
  const T lambda = static_cast<T>(config.lambda_pixel);
  nn::zero_grad(state.g_a2b.parameters());
  nn::zero_grad(state.d_depth.parameters());

  Tensor<T> fake = state.g_a2b.forward(rgb);
  require_same_shape(fake, depth, "teacher step");
  LossRecord rec;
  Tensor<T> grad = pixel_loss_grad(depth, fake);
  grad *= lambda;
  const T pixel = pixel_loss(depth, fake);
  T total = lambda * pixel;
  if (adversarial) {
    const Tensor<T> scores = state.d_depth.forward(fake);
    const T adv = gen_adv_loss(scores);
    grad += state.d_depth.backward(gen_adv_loss_grad(scores));
    total += adv;
    rec.add("adv", adv);
  }
  rec.add("pixel", pixel);
  rec.add("teacher_total", total);
  state.g_a2b.backward(grad);
  if (fake_depth) *fake_depth = std::move(fake);
  return rec;
}

template <typename T>
LossRecord student_gradients(TrainState<T>& state, const Tensor<T>& rgb,
                             const TrainingConfig& config, Tensor<T>* reconstruction) {
  const T lambda = static_cast<T>(config.lambda_cyc);
  nn::zero_grad(state.g_a2b.parameters());
  nn::zero_grad(state.g_b2a.parameters());
  nn::zero_grad(state.d_depth.parameters());
  nn::zero_grad(state.d_rgb.parameters());

  Tensor<T> fake_depth = state.g_a2b.forward(rgb);
  Tensor<T> rec_rgb = state.g_b2a.forward(fake_depth);

  const Tensor<T> depth_scores = state.d_depth.forward(fake_depth);
  const T adv_depth = gen_adv_loss(depth_scores);
  Tensor<T> grad_fake_depth = state.d_depth.backward(gen_adv_loss_grad(depth_scores));

  const Tensor<T> rgb_scores = state.d_rgb.forward(rec_rgb);
  const T adv_rgb = gen_adv_loss(rgb_scores);
  Tensor<T> grad_rec = state.d_rgb.backward(gen_adv_loss_grad(rgb_scores));

  const T cyc = cycle_loss(rgb, rec_rgb);
  Tensor<T> grad_cyc = cycle_loss_grad(rgb, rec_rgb);
  grad_cyc *= lambda;
  grad_rec += grad_cyc;

  grad_fake_depth += state.g_b2a.backward(grad_rec);
  state.g_a2b.backward(grad_fake_depth);

  LossRecord rec;
  rec.add("adv_depth", adv_depth);
  rec.add("adv_rgb", adv_rgb);
  rec.add("cyc", cyc);
  rec.add("student_total", adv_depth + adv_rgb + lambda * cyc);
  if (reconstruction) *reconstruction = std::move(rec_rgb);
  return rec;
}

namespace {

// One least-squares discriminator update on (real, pooled fake).
template <typename T>
T update_discriminator(Discriminator<T>& disc, Adam<T>& opt, const Tensor<T>& real,
                       const Tensor<T>& fake, double lr) {
  auto params = disc.parameters();
  nn::zero_grad(params);
  const Tensor<T> real_scores = disc.forward(real);
  const auto real_grad = disc_loss_grad(real_scores, real_scores).first;
  disc.backward(real_grad);
  const Tensor<T> fake_scores = disc.forward(fake);
  const auto fake_grad = disc_loss_grad(real_scores, fake_scores).second;
  disc.backward(fake_grad);
  const T loss = disc_loss(real_scores, fake_scores);
  if (!std::isfinite(static_cast<double>(loss))) {
    throw NumericalError("discriminator update: non-finite loss");
  }
  opt.step(params, lr);
  return loss;
}

}  // namespace

template <typename T>
LossRecord teacher_step(TrainState<T>& state, const Tensor<T>& rgb, const Tensor<T>& depth,
                        const TrainingConfig& config, double learning_rate) {
  Tensor<T> fake;
  LossRecord rec = teacher_gradients(state, rgb, depth, config, &fake);
  check_finite(rec, "teacher step");
  state.teacher_gen_opt.step(state.g_a2b.parameters(), learning_rate);
  if (config.mode != TrainingMode::kTeacherGeneratorOnly) {
    const Tensor<T> pooled = state.depth_pool.query(fake);
    rec.add("disc_depth", update_discriminator(state.d_depth, state.teacher_disc_opt, depth, pooled,
                                               learning_rate));
  }
  return rec;
}

template <typename T>
LossRecord student_step(TrainState<T>& state, const Tensor<T>& rgb, const TrainingConfig& config,
                        double learning_rate) {
  Tensor<T> reconstruction;
  LossRecord rec = student_gradients(state, rgb, config, &reconstruction);
  check_finite(rec, "student step");
  state.student_gen_opt.step(state.student_generator_parameters(), learning_rate);
  nn::zero_grad(state.d_depth.parameters());
  const Tensor<T> pooled = state.rgb_pool.query(reconstruction);
  rec.add("disc_rgb", update_discriminator(state.d_rgb, state.student_disc_opt, rgb, pooled,
                                           learning_rate));
  return rec;
}

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(TrainingConfig config, std::span<const PairedSample> teacher,
                 std::span<const UnpairedSample> target)
    : Trainer(config, teacher, target, TrainState<float>::initialize(config), {}) {}

Trainer::Trainer(TrainingConfig config, std::span<const PairedSample> teacher,
                 std::span<const UnpairedSample> target, TrainState<float> state,
                 const std::string& rng_state)
    : config_(std::move(config)),
      teacher_(teacher),
      target_(target),
      state_(std::move(state)),
      rng_(derive_seed(config_.seed, kShuffle)) {
  config_.validate();
  if (!rng_state.empty()) {
    std::istringstream is(rng_state);
    is >> rng_;
    if (!is) throw LoadError("trainer: malformed rng state");
  }
  if (!done()) {
    if (teacher_.empty()) throw ValidationError("train: teacher dataset is empty");
    if (config_.mode == TrainingMode::kFull && target_.empty()) {
      throw ValidationError("train: target dataset is empty (required in full mode)");
    }
  }
}

std::string Trainer::rng_state() const {
  std::ostringstream os;
  os << rng_;
  return os.str();
}

EpochSummary Trainer::run_epoch() {
  const int n = state_.epoch + 1;
  const bool student = config_.mode == TrainingMode::kFull;
  EpochSummary summary;
  summary.epoch = n;
  summary.lr_teacher = lr_schedule(n, config_.alpha_teach, config_.teacher_decay_epoch,
                                   config_.beta_decay);
  summary.lr_student = lr_schedule(n, config_.alpha_student, config_.student_decay_epoch,
                                   config_.beta_decay);

  std::vector<std::size_t> teacher_order(teacher_.size());
  std::iota(teacher_order.begin(), teacher_order.end(), 0);
  std::shuffle(teacher_order.begin(), teacher_order.end(), rng_);
  std::vector<std::size_t> target_order;
  if (student) {
    target_order.resize(target_.size());
    std::iota(target_order.begin(), target_order.end(), 0);
    std::shuffle(target_order.begin(), target_order.end(), rng_);
  }
  const std::size_t steps =
      student ? std::max(teacher_.size(), target_.size()) : teacher_.size();

  std::vector<std::pair<std::string, double>> sums;
  auto accumulate = [&](const LossRecord& rec, int step) {
    for (const auto& [name, v] : rec.values) {
      curves_.push_back({n, step, name, v});
      auto it = std::find_if(sums.begin(), sums.end(), [&](const auto& e) { return e.first == name; });
      if (it == sums.end()) {
        sums.emplace_back(name, v);
      } else {
        it->second += v;
      }
    }
  };

  for (std::size_t s = 0; s < steps; ++s) {
    const int step = static_cast<int>(s);
    try {
      const auto& pair = teacher_[teacher_order[s % teacher_.size()]];
      accumulate(teacher_step(state_, pair.rgb, pair.depth, config_, summary.lr_teacher), step);
      if (student) {
        const auto& sample = target_[target_order[s % target_.size()]];
        accumulate(student_step(state_, sample.rgb, config_, summary.lr_student), step);
      }
    } catch (const NumericalError& e) {
      throw NumericalError("epoch " + std::to_string(n) + " step " + std::to_string(step) + ": " +
                           e.what());
    }
  }
  summary.steps = static_cast<int>(steps);
  for (const auto& [name, total] : sums) summary.means.add(name, total / static_cast<double>(steps));
  state_.epoch = n;
  history_.push_back(summary);
  return summary;
}

TrainResult train(const TrainingConfig& config, std::span<const PairedSample> teacher,
                  std::span<const UnpairedSample> target, const TrainOptions& options) {
  Trainer trainer(config, teacher, target);
  while (!trainer.done()) {
    const auto summary = trainer.run_epoch();
    if (options.on_epoch) options.on_epoch(trainer, summary);
  }
  return {std::move(trainer.state()), trainer.curves(), trainer.history()};
}

#define DHAL_INSTANTIATE(T)                                                                    \
  template class ImagePool<T>;                                                                 \
  template struct TrainState<T>;                                                               \
  template LossRecord teacher_gradients(TrainState<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                        const TrainingConfig&, Tensor<T>*);                    \
  template LossRecord student_gradients(TrainState<T>&, const Tensor<T>&,                      \
                                        const TrainingConfig&, Tensor<T>*);                    \
  template LossRecord teacher_step(TrainState<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                   const TrainingConfig&, double);                             \
  template LossRecord student_step(TrainState<T>&, const Tensor<T>&, const TrainingConfig&,    \
                                   double);

DHAL_INSTANTIATE(float)
DHAL_INSTANTIATE(double)

#undef DHAL_INSTANTIATE

}  // namespace dhal
