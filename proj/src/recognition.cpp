#include "dhal/recognition.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "dhal/error.hpp"

namespace dhal {

namespace {

void he_init(nn::ParameterList<float>& params, std::mt19937_64& rng) {
  for (auto* p : params) {
    if (p->shape.size() == 1) {
      std::fill(p->value.begin(), p->value.end(), 0.0f);
      continue;
    }
    const double fan_in = static_cast<double>(p->size()) / p->shape[0];
    std::normal_distribution<float> normal(0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
    for (auto& v : p->value) v = normal(rng);
  }
}

std::vector<double> to_vector(const Tensor<float>& t) { return {t.data.begin(), t.data.end()}; }

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  const double den = std::sqrt(aa * bb);
  return den > 0 ? ab / den : 0.0;
}

}  // namespace

// ---------------------------------------------------------------------------
// ReferenceCnn

ReferenceCnn::ReferenceCnn(int num_classes, int embedding_dim)
    : num_classes_(num_classes), embedding_dim_(embedding_dim) {
  if (num_classes < 1 || embedding_dim < 1) {
    throw ValidationError("reference cnn: classes and embedding size must be positive");
  }
  const int maps[] = {16, 32, 64, 64};
  int in = 3;
  for (int i = 0; i < 4; ++i) {
    convs_.emplace_back("block" + std::to_string(i), in, maps[i], 3, 2, 1);
    relus_.emplace_back();
    in = maps[i];
  }
  embed_ = nn::Linear<float>("embed", in, embedding_dim);
  head_ = nn::Linear<float>("head", embedding_dim, num_classes);
}

nn::ParameterList<float> ReferenceCnn::parameters() {
  nn::ParameterList<float> out;
  for (auto& c : convs_) c.collect(out);
  embed_.collect(out);
  head_.collect(out);
  return out;
}

Tensor<float> ReferenceCnn::forward_embedding(const ImageTensor& image) {
  if (image.channels != 3) {
    throw ValidationError("reference cnn: expected 3 channels, got " + shape_string(image));
  }
  Tensor<float> x = image;
  for (std::size_t i = 0; i < convs_.size(); ++i) x = relus_[i].forward(convs_[i].forward(x));
  return embed_relu_.forward(embed_.forward(pool_.forward(x)));
}

void ReferenceCnn::fit(std::span<const ImageTensor> images, std::span<const int> labels,
                       const BackboneBudget& budget) {
  if (images.size() != labels.size() || images.empty()) {
    throw ValidationError("reference cnn: need matching, nonempty images and labels");
  }
  for (int l : labels) {
    if (l < 0 || l >= num_classes_) throw ValidationError("reference cnn: label out of range");
  }
  std::mt19937_64 rng(budget.seed);
  auto params = parameters();
  he_init(params, rng);
  Adam<float> opt(AdamOptions{0.9, 0.999, 1e-8});

  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < budget.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      nn::zero_grad(params);
      const auto logits = head_.forward(forward_embedding(images[i]));
      const auto p = softmax(to_vector(logits));
      Tensor<float> g(logits.channels, logits.height, logits.width);
      for (int c = 0; c < num_classes_; ++c) {
        g.data[c] = static_cast<float>(p[c] - (c == labels[i] ? 1.0 : 0.0));
      }
      auto grad = embed_.backward(embed_relu_.backward(head_.backward(g)));
      grad = pool_.backward(grad);
      for (std::size_t k = convs_.size(); k-- > 0;) {
        grad = convs_[k].backward(relus_[k].backward(grad));
      }
      opt.step(params, budget.learning_rate);
    }
  }
  trained_ = true;
}

std::vector<double> ReferenceCnn::embed(const ImageTensor& image) {
  if (!trained_) throw ValidationError("reference cnn: backbone is untrained");
  return to_vector(forward_embedding(image));
}

std::vector<double> ReferenceCnn::classify(const ImageTensor& image) {
  if (!trained_) throw ValidationError("reference cnn: backbone is untrained");
  return softmax(to_vector(head_.forward(forward_embedding(image))));
}

double ReferenceCnn::accuracy(std::span<const ImageTensor> images, std::span<const int> labels) {
  if (images.empty() || images.size() != labels.size()) {
    throw ValidationError("reference cnn: need matching, nonempty images and labels");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (static_cast<int>(argmax(classify(images[i]))) == labels[i]) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(images.size());
}

// ---------------------------------------------------------------------------
// Fusion

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (auto& v : out) sum += (v = std::exp(v - m));
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> feature_fusion(std::span<const double> e_rgb, std::span<const double> e_depth) {
  std::vector<double> out(e_rgb.begin(), e_rgb.end());
  out.insert(out.end(), e_depth.begin(), e_depth.end());
  return out;
}

std::vector<double> score_fusion(std::span<const double> s_rgb, std::span<const double> s_depth) {
  if (s_rgb.size() != s_depth.size()) {
    throw ValidationError("score_fusion: score vectors differ in length");
  }
  std::vector<double> out(s_rgb.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.5 * (s_rgb[i] + s_depth[i]);
  return out;
}

LinearClassifier::LinearClassifier(int input_dim, int num_classes, std::uint64_t seed)
    : input_dim_(input_dim), num_classes_(num_classes), seed_(seed) {
  if (input_dim < 1 || num_classes < 1) {
    throw ValidationError("linear classifier: sizes must be positive");
  }
}

void LinearClassifier::fit(const std::vector<std::vector<double>>& features,
                           std::span<const int> labels, int epochs, double learning_rate) {
  if (features.empty() || features.size() != labels.size()) {
    throw ValidationError("linear classifier: need matching, nonempty features and labels");
  }
  const std::size_t n = features.size(), d = static_cast<std::size_t>(input_dim_),
                    c = static_cast<std::size_t>(num_classes_);
  for (const auto& f : features) {
    if (f.size() != d) throw ValidationError("linear classifier: feature length mismatch");
  }
  mean_.assign(d, 0.0);
  inv_std_.assign(d, 1.0);
  for (const auto& f : features) {
    for (std::size_t j = 0; j < d; ++j) mean_[j] += f[j] / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (const auto& f : features) var += (f[j] - mean_[j]) * (f[j] - mean_[j]) / n;
    inv_std_[j] = var > 1e-12 ? 1.0 / std::sqrt(var) : 0.0;
  }
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i][j] = (features[i][j] - mean_[j]) * inv_std_[j];
  }

  std::mt19937_64 rng(seed_);
  std::normal_distribution<double> normal(0.0, 0.01);
  weights_.resize(c * d);
  for (auto& w : weights_) w = normal(rng);
  bias_.assign(c, 0.0);

  constexpr double kWeightDecay = 1e-4;
  std::vector<double> gw(c * d), gb(c), logits(c);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        double s = bias_[k];
        for (std::size_t j = 0; j < d; ++j) s += weights_[k * d + j] * x[i][j];
        logits[k] = s;
      }
      const auto p = softmax(logits);
      for (std::size_t k = 0; k < c; ++k) {
        const double g = (p[k] - (static_cast<int>(k) == labels[i] ? 1.0 : 0.0)) / n;
        gb[k] += g;
        for (std::size_t j = 0; j < d; ++j) gw[k * d + j] += g * x[i][j];
      }
    }
    for (std::size_t k = 0; k < c * d; ++k) {
      weights_[k] -= learning_rate * (gw[k] + kWeightDecay * weights_[k]);
    }
    for (std::size_t k = 0; k < c; ++k) bias_[k] -= learning_rate * gb[k];
  }
}

std::vector<double> LinearClassifier::classify(std::span<const double> feature) const {
  if (weights_.empty()) throw ValidationError("linear classifier: not fitted");
  if (feature.size() != static_cast<std::size_t>(input_dim_)) {
    throw ValidationError("linear classifier: feature length mismatch");
  }
  const std::size_t d = static_cast<std::size_t>(input_dim_);
  std::vector<double> logits(num_classes_);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    double s = bias_[k];
    for (std::size_t j = 0; j < d; ++j) s += weights_[k * d + j] * (feature[j] - mean_[j]) * inv_std_[j];
    logits[k] = s;
  }
  return softmax(logits);
}

// ---------------------------------------------------------------------------
// Rank-1

double rank1(std::span<const LabeledVector> gallery, std::span<const LabeledVector> probes,
             Rank1Mode mode) {
  if (probes.empty()) throw ValidationError("rank1: no probes");
  std::size_t hits = 0;
  for (const auto& probe : probes) {
    int predicted = -1;
    if (mode == Rank1Mode::kScoreArgmax) {
      if (probe.label < 0 || static_cast<std::size_t>(probe.label) >= probe.values.size()) {
        throw ProtocolError("rank1: probe identity " + std::to_string(probe.label) +
                            " has no score column");
      }
      predicted = static_cast<int>(argmax(probe.values));
    } else {
      const bool covered = std::any_of(gallery.begin(), gallery.end(),
                                       [&](const auto& g) { return g.label == probe.label; });
      if (!covered) {
        throw ProtocolError("rank1: probe identity " + std::to_string(probe.label) +
                            " absent from gallery");
      }
      double best = -2.0;
      for (const auto& g : gallery) {
        if (g.values.size() != probe.values.size()) {
          throw ValidationError("rank1: embedding length mismatch");
        }
        const double s = cosine(g.values, probe.values);
        if (s > best) {
          best = s;
          predicted = g.label;
        }
      }
    }
    if (predicted == probe.label) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(probes.size());
}

// ---------------------------------------------------------------------------
// Protocol

namespace {

std::vector<LabeledVector> label_rows(const std::vector<std::vector<double>>& rows,
                                      const std::vector<int>& labels) {
  std::vector<LabeledVector> out;
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({labels[i], rows[i]});
  return out;
}

double argmax_rank1(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels) {
  const auto probes = label_rows(scores, labels);
  return rank1({}, probes, Rank1Mode::kScoreArgmax);
}

ModalityScores depth_modality(Backbone& rgb_net, const std::vector<ImageTensor>& train_rgb,
                              const std::vector<ImageTensor>& test_rgb,
                              const std::vector<ImageTensor>& train_depth,
                              const std::vector<ImageTensor>& test_depth,
                              const std::vector<int>& train_labels,
                              const std::vector<int>& test_labels, int classes,
                              const ProtocolOptions& options, std::uint64_t seed_offset) {
  auto net = options.backbone(classes);
  BackboneBudget budget = options.budget;
  budget.seed += seed_offset;
  net->fit(train_depth, train_labels, budget);

  ModalityScores out;
  std::vector<std::vector<double>> depth_scores, fused_scores;
  for (std::size_t i = 0; i < test_depth.size(); ++i) {
    depth_scores.push_back(net->classify(test_depth[i]));
    fused_scores.push_back(score_fusion(rgb_net.classify(test_rgb[i]), depth_scores.back()));
  }
  out.depth = argmax_rank1(depth_scores, test_labels);
  out.score = argmax_rank1(fused_scores, test_labels);

  std::vector<std::vector<double>> train_fused, test_fused;
  for (std::size_t i = 0; i < train_depth.size(); ++i) {
    train_fused.push_back(feature_fusion(rgb_net.embed(train_rgb[i]), net->embed(train_depth[i])));
  }
  for (std::size_t i = 0; i < test_depth.size(); ++i) {
    test_fused.push_back(feature_fusion(rgb_net.embed(test_rgb[i]), net->embed(test_depth[i])));
  }
  LinearClassifier head(static_cast<int>(train_fused.front().size()), classes, budget.seed);
  head.fit(train_fused, train_labels, options.head_epochs);
  std::vector<std::vector<double>> head_scores;
  for (const auto& f : test_fused) head_scores.push_back(head.classify(f));
  out.feature = argmax_rank1(head_scores, test_labels);
  return out;
}

}  // namespace

RecognitionReport run_protocol(std::span<const PairedSample> train,
                               std::span<const PairedSample> test, const DepthGenerator& generator,
                               const ProtocolOptions& input_options) {
  if (train.empty() || test.empty()) throw ValidationError("run_protocol: empty split");
  ProtocolOptions options = input_options;
  if (!options.backbone) {
    options.backbone = [](int classes) { return std::make_unique<ReferenceCnn>(classes); };
  }
  if (options.hallucinated_depth && !generator) {
    throw ValidationError("run_protocol: hallucinated depth requested without a generator");
  }

  std::map<std::string, int> ids;
  for (const auto& s : train) ids.emplace(s.identity, 0);
  int next = 0;
  for (auto& [name, label] : ids) label = next++;
  std::vector<int> train_labels, test_labels;
  for (const auto& s : train) train_labels.push_back(ids.at(s.identity));
  for (const auto& s : test) {
    const auto it = ids.find(s.identity);
    if (it == ids.end()) {
      throw ProtocolError("identity '" + s.identity + "' (" + s.name +
                          ") appears in the test split but not in training");
    }
    test_labels.push_back(it->second);
  }
  const int classes = static_cast<int>(ids.size());

  std::vector<ImageTensor> train_rgb, test_rgb;
  for (const auto& s : train) train_rgb.push_back(s.rgb);
  for (const auto& s : test) test_rgb.push_back(s.rgb);

  RecognitionReport report;
  report.protocol = options.protocol;
  report.identities = ids.size();
  report.train_count = train.size();
  report.test_count = test.size();

  auto rgb_net = options.backbone(classes);
  report.backbone = rgb_net->name();
  rgb_net->fit(train_rgb, train_labels, options.budget);
  std::vector<std::vector<double>> rgb_scores;
  for (const auto& x : test_rgb) rgb_scores.push_back(rgb_net->classify(x));
  report.rgb = argmax_rank1(rgb_scores, test_labels);

  if (options.ground_truth_depth) {
    std::vector<ImageTensor> train_d, test_d;
    for (const auto& s : train) train_d.push_back(s.depth);
    for (const auto& s : test) test_d.push_back(s.depth);
    report.ground_truth = depth_modality(*rgb_net, train_rgb, test_rgb, train_d, test_d,
                                         train_labels, test_labels, classes, options, 1);
  }
  if (options.hallucinated_depth) {
    std::vector<ImageTensor> train_d, test_d;
    for (const auto& x : train_rgb) train_d.push_back(generator(x));
    for (const auto& x : test_rgb) test_d.push_back(generator(x));
    report.hallucinated = depth_modality(*rgb_net, train_rgb, test_rgb, train_d, test_d,
                                         train_labels, test_labels, classes, options, 2);
  }
  return report;
}

KFoldResult run_kfold(const std::vector<PairedSample>& samples, int k, std::uint64_t seed,
                      const DepthGenerator& generator, ProtocolOptions options) {
  KFoldResult result;
  const auto folds = split_folds(samples, k, seed);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train = select(samples, folds[f].train);
    const auto test = select(samples, folds[f].test);
    options.protocol = "fold " + std::to_string(f + 1) + "/" + std::to_string(k);
    result.folds.push_back(run_protocol(train, test, generator, options));
  }

  auto& mean = result.mean;
  const double n = static_cast<double>(result.folds.size());
  mean.protocol = std::to_string(k) + "-fold mean";
  mean.backbone = result.folds.front().backbone;
  mean.identities = result.folds.front().identities;
  auto add = [n](std::optional<ModalityScores>& acc, const std::optional<ModalityScores>& v) {
    if (!v) return;
    if (!acc) acc = ModalityScores{};
    acc->depth += v->depth / n;
    acc->feature += v->feature / n;
    acc->score += v->score / n;
  };
  for (const auto& r : result.folds) {
    mean.train_count += r.train_count;
    mean.test_count += r.test_count;
    mean.rgb += r.rgb / n;
    add(mean.ground_truth, r.ground_truth);
    add(mean.hallucinated, r.hallucinated);
  }
  return result;
}

}  // namespace dhal
