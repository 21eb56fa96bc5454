#include "dhal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "dhal/error.hpp"

namespace dhal {

namespace {

void check_pair(std::span<const double> gt, std::span<const double> pred, const char* what) {
  if (gt.size() != pred.size()) {
    throw ValidationError(std::string(what) + ": size mismatch " + std::to_string(gt.size()) +
                          " vs " + std::to_string(pred.size()));
  }
  if (gt.empty()) throw ValidationError(std::string(what) + ": empty input");
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

// Eigenvalues of a symmetric PSD matrix; tiny negatives are rounding and become 0.
Eigen::VectorXd psd_eigenvalues(const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& solver,
                                const char* what) {
  if (solver.info() != Eigen::Success) {
    throw NumericalError(std::string("frechet_distance: eigendecomposition failed for ") + what);
  }
  Eigen::VectorXd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8 * scale) {
      std::ostringstream os;
      os << "frechet_distance: " << what << " not positive semidefinite (eigenvalues "
         << ev.minCoeff() << " .. " << ev.maxCoeff() << ")";
      throw NumericalError(os.str());
    }
    if (ev(i) < 1e-10) ev(i) = 0.0;
  }
  return ev;
}

}  // namespace

double map_depth(double v) { return std::clamp((v + 1.0) / 2.0, kDepthEpsilon, 1.0); }

std::vector<double> mapped_depth(const ImageTensor& depth) {
  const auto c = depth.channel(0);
  std::vector<double> out(c.size());
  std::transform(c.begin(), c.end(), out.begin(), [](float v) { return map_depth(v); });
  return out;
}

double abs_diff(std::span<const double> gt, std::span<const double> pred) {
  check_pair(gt, pred, "abs_diff");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += std::abs(gt[i] - pred[i]);
  return s / static_cast<double>(gt.size());
}

double abs_rel(std::span<const double> gt, std::span<const double> pred) {
  check_pair(gt, pred, "abs_rel");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += std::abs(gt[i] - pred[i]) / gt[i];
  return s / static_cast<double>(gt.size());
}

double l1_norm(std::span<const double> gt, std::span<const double> pred) {
  check_pair(gt, pred, "l1_norm");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    num += std::abs(gt[i] - pred[i]);
    den += std::abs(gt[i]);
  }
  return den > 0.0 ? num / den : num;
}

double l2_norm(std::span<const double> gt, std::span<const double> pred) {
  check_pair(gt, pred, "l2_norm");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += (gt[i] - pred[i]) * (gt[i] - pred[i]);
  return std::sqrt(s);
}

double rmse(std::span<const double> gt, std::span<const double> pred) {
  check_pair(gt, pred, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) s += (gt[i] - pred[i]) * (gt[i] - pred[i]);
  return std::sqrt(s / static_cast<double>(gt.size()));
}

double threshold_accuracy(std::span<const double> gt, std::span<const double> pred, int k) {
  check_pair(gt, pred, "threshold_accuracy");
  if (k < 1) throw ValidationError("threshold_accuracy: exponent must be >= 1");
  const double threshold = std::pow(1.25, k);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] <= 0.0 || pred[i] <= 0.0) {
      throw ValidationError("threshold_accuracy: inputs must be positive");
    }
    if (std::max(gt[i] / pred[i], pred[i] / gt[i]) < threshold) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(gt.size());
}

PixelMetrics pixel_metrics(std::span<const double> gt, std::span<const double> pred) {
  PixelMetrics m;
  m.abs_diff = abs_diff(gt, pred);
  m.abs_rel = abs_rel(gt, pred);
  m.l1_norm = l1_norm(gt, pred);
  m.l2_norm = l2_norm(gt, pred);
  m.rmse = rmse(gt, pred);
  for (int k = 1; k <= 3; ++k) m.delta[k - 1] = threshold_accuracy(gt, pred, k);
  return m;
}

RandomProjectionExtractor::RandomProjectionExtractor(int dim, int grid, std::uint64_t seed)
    : dim_(dim), grid_(grid) {
  if (dim < 1 || grid < 1) throw ValidationError("extractor: dim and grid must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / grid);
  weights_.resize(static_cast<std::size_t>(dim) * grid * grid);
  for (auto& w : weights_) w = normal(rng);
}

std::vector<double> RandomProjectionExtractor::operator()(const ImageTensor& image) const {
  // Area averaging onto the grid; handles any input size >= 1.
  std::vector<double> cells(static_cast<std::size_t>(grid_) * grid_, 0.0);
  std::vector<double> counts(cells.size(), 0.0);
  for (int y = 0; y < image.height; ++y) {
    const int gy = y * grid_ / image.height;
    for (int x = 0; x < image.width; ++x) {
      const int gx = x * grid_ / image.width;
      cells[gy * grid_ + gx] += image.at(0, y, x);
      counts[gy * grid_ + gx] += 1.0;
    }
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (counts[i] > 0) cells[i] /= counts[i];
  }
  std::vector<double> out(dim_, 0.0);
  for (int d = 0; d < dim_; ++d) {
    const double* w = &weights_[static_cast<std::size_t>(d) * cells.size()];
    for (std::size_t i = 0; i < cells.size(); ++i) out[d] += w[i] * cells[i];
  }
  return out;
}

double frechet_distance(const std::vector<std::vector<double>>& real,
                        const std::vector<std::vector<double>>& fake) {
  if (real.size() < 2 || fake.size() < 2) {
    throw ValidationError("frechet_distance: need at least 2 vectors per set");
  }
  const std::size_t dim = real.front().size();
  auto check = [&](const std::vector<std::vector<double>>& set) {
    for (const auto& v : set) {
      if (v.size() != dim || dim == 0) {
        throw ValidationError("frechet_distance: feature dimension mismatch");
      }
    }
  };
  check(real);
  check(fake);

  const Eigen::MatrixXd xr = to_matrix(real), xf = to_matrix(fake);
  const Eigen::VectorXd mr = xr.colwise().mean(), mf = xf.colwise().mean();
  const Eigen::MatrixXd cr = covariance(xr, mr), cf = covariance(xf, mf);

  // Tr((Cr Cf)^1/2) = Tr((S Cf S)^1/2) with S = Cr^1/2, which keeps everything symmetric.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> er(cr);
  const Eigen::VectorXd lr = psd_eigenvalues(er, "real covariance");
  const Eigen::MatrixXd s =
      er.eigenvectors() * lr.cwiseSqrt().asDiagonal() * er.eigenvectors().transpose();
  Eigen::MatrixXd inner = s * cf * s;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ei(inner, Eigen::EigenvaluesOnly);
  const double tr_sqrt = psd_eigenvalues(ei, "covariance product").cwiseSqrt().sum();

  const double d = (mr - mf).squaredNorm() + cr.trace() + cf.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d);
}

QualityReport evaluate_set(std::span<const PairedSample> samples, const DepthGenerator& generator,
                           FeatureExtractor extractor) {
  if (samples.empty()) throw ValidationError("evaluate_set: empty evaluation set");
  if (!extractor) extractor = RandomProjectionExtractor();
  QualityReport report;
  std::vector<std::vector<double>> real_features, fake_features;
  for (const auto& s : samples) {
    const ImageTensor pred = generator(s.rgb);
    if (pred.height != s.depth.height || pred.width != s.depth.width) {
      throw ValidationError("evaluate_set: generator output " + shape_string(pred) +
                            " does not match depth " + shape_string(s.depth));
    }
    const auto gt = mapped_depth(s.depth);
    const auto pd = mapped_depth(pred);
    const auto m = pixel_metrics(gt, pd);
    report.rows.push_back({s.name, m});
    report.abs_diff += m.abs_diff;
    report.abs_rel += m.abs_rel;
    report.l1_norm += m.l1_norm;
    report.l2_norm += m.l2_norm;
    report.rmse += m.rmse;
    for (int k = 0; k < 3; ++k) report.delta[k] += m.delta[k];
    real_features.push_back(extractor(s.depth));
    fake_features.push_back(extractor(pred));
  }
  const double n = static_cast<double>(samples.size());
  report.sample_count = samples.size();
  report.abs_diff /= n;
  report.abs_rel /= n;
  report.l1_norm /= n;
  report.l2_norm /= n;
  report.rmse /= n;
  for (auto& d : report.delta) d /= n;
  if (samples.size() >= 2) report.fid = frechet_distance(real_features, fake_features);
  return report;
}

}  // namespace dhal
