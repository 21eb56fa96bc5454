#pragma once

// Closed-set face identification harness: RGB alone, RGB + depth by feature
// concatenation, and RGB + depth by softmax score averaging.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dhal/datasets.hpp"
#include "dhal/metrics.hpp"
#include "dhal/nn/layers.hpp"
#include "dhal/optim.hpp"

namespace dhal {

struct BackboneBudget {
  int epochs = 25;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Embedding network with a classifier head over `num_classes` identities.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual std::string name() const = 0;
  virtual int embedding_dim() const = 0;
  virtual int num_classes() const = 0;
  virtual bool trained() const = 0;

  virtual void fit(std::span<const ImageTensor> images, std::span<const int> labels,
                   const BackboneBudget& budget) = 0;
  /// Both throw ValidationError when the backbone has not been fitted.
  virtual std::vector<double> embed(const ImageTensor& image) = 0;
  /// Softmax probabilities, length num_classes().
  virtual std::vector<double> classify(const ImageTensor& image) = 0;
};

using BackboneFactory = std::function<std::unique_ptr<Backbone>(int num_classes)>;

/// Four 3x3 stride-2 conv + ReLU blocks (16/32/64/64 maps), global average pool,
/// linear embedding + ReLU, linear head. Trained with softmax cross-entropy and Adam.
class ReferenceCnn : public Backbone {
 public:
  explicit ReferenceCnn(int num_classes, int embedding_dim = 32);

  std::string name() const override { return "reference-cnn"; }
  int embedding_dim() const override { return embedding_dim_; }
  int num_classes() const override { return num_classes_; }
  bool trained() const override { return trained_; }

  void fit(std::span<const ImageTensor> images, std::span<const int> labels,
           const BackboneBudget& budget) override;
  std::vector<double> embed(const ImageTensor& image) override;
  std::vector<double> classify(const ImageTensor& image) override;

  /// Percentage of `images` whose argmax matches `labels`.
  double accuracy(std::span<const ImageTensor> images, std::span<const int> labels);

 private:
  Tensor<float> forward_embedding(const ImageTensor& image);
  nn::ParameterList<float> parameters();

  int num_classes_;
  int embedding_dim_;
  bool trained_ = false;
  std::vector<nn::Conv2d<float>> convs_;
  std::vector<nn::ReLU<float>> relus_;
  nn::GlobalAvgPool<float> pool_;
  nn::Linear<float> embed_;
  nn::ReLU<float> embed_relu_;
  nn::Linear<float> head_;
};

std::vector<double> softmax(std::span<const double> scores);

/// Concatenation e_rgb ++ e_depth.
std::vector<double> feature_fusion(std::span<const double> e_rgb, std::span<const double> e_depth);
/// Elementwise mean. Throws ValidationError on length mismatch.
std::vector<double> score_fusion(std::span<const double> s_rgb, std::span<const double> s_depth);

/// Softmax regression on fixed feature vectors (the joint head of feature fusion).
class LinearClassifier {
 public:
  LinearClassifier(int input_dim, int num_classes, std::uint64_t seed = 0);
  void fit(const std::vector<std::vector<double>>& features, std::span<const int> labels,
           int epochs = 200, double learning_rate = 0.05);
  std::vector<double> classify(std::span<const double> feature) const;

 private:
  int input_dim_, num_classes_;
  std::uint64_t seed_;
  std::vector<double> weights_;  // classes x input_dim
  std::vector<double> bias_;
  std::vector<double> mean_, inv_std_;  // feature standardization fitted on train
};

struct LabeledVector {
  int label;
  std::vector<double> values;
};

enum class Rank1Mode {
  kScoreArgmax,  // probe values are per-identity scores, index = identity
  kNearestNeighbour  // probe values are embeddings matched to the gallery by cosine
};

/// Percentage of probes whose top-ranked identity is correct. Throws
/// ValidationError with no probes and ProtocolError when a probe identity is
/// not covered by the gallery.
double rank1(std::span<const LabeledVector> gallery, std::span<const LabeledVector> probes,
             Rank1Mode mode);

struct ModalityScores {
  double depth = 0;     // depth-only rank-1
  double feature = 0;   // RGB + depth, feature fusion
  double score = 0;     // RGB + depth, score fusion
};

struct RecognitionReport {
  std::string protocol;
  std::string backbone;
  std::size_t identities = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double rgb = 0;
  std::optional<ModalityScores> ground_truth;   // real depth
  std::optional<ModalityScores> hallucinated;   // generator depth
};

struct ProtocolOptions {
  BackboneBudget budget;
  bool ground_truth_depth = true;
  bool hallucinated_depth = true;
  int head_epochs = 200;
  BackboneFactory backbone;  // ReferenceCnn when empty
  std::string protocol = "holdout";
};

/// Trains one backbone per modality on `train` and scores `test`. Hallucinated
/// depth for both splits comes from `generator` applied to RGB.
RecognitionReport run_protocol(std::span<const PairedSample> train,
                               std::span<const PairedSample> test, const DepthGenerator& generator,
                               const ProtocolOptions& options);

struct KFoldResult {
  std::vector<RecognitionReport> folds;
  RecognitionReport mean;
};

KFoldResult run_kfold(const std::vector<PairedSample>& samples, int k, std::uint64_t seed,
                      const DepthGenerator& generator, ProtocolOptions options);

}  // namespace dhal
