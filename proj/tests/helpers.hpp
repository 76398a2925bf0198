#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hydra/net.hpp"

namespace testutil {

/// Formula-literal weighted F-measure computed straight from the label
/// lists, independent of the ConfusionMatrix implementation path.
inline double fbar_oracle(const std::vector<int>& pred, const std::vector<int>& truth,
                          const Eigen::VectorXd& w) {
  const int m = static_cast<int>(w.size());
  double num = 0.0, den = 0.0;
  for (int i = 0; i < m; ++i) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (truth[k] == i && pred[k] == i) ++tp;
      if (truth[k] != i && pred[k] == i) ++fp;
      if (truth[k] == i && pred[k] != i) ++fn;
    }
    const double p = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    const double r = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
    const double f = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    num += f * w[i];
    den += w[i];
  }
  return num / den;
}

/// Central finite differences against the analytic gradients; returns the
/// worst relative error over every parameter component.
inline double gradient_max_rel_err(hydra::Network& net, const hydra::Tensor& pixels,
                                   const hydra::Tensor& metadata, hydra::Index target,
                                   const hydra::VectorT<hydra::Real>& weights,
                                   std::uint64_t dropout_seed, double h = 1e-5) {
  const auto result = hydra::backward(net, pixels, metadata, target, weights, true, dropout_seed);
  double max_err = 0.0;
  for (std::size_t i = 0; i < net.params.size(); ++i) {
    for (std::size_t p = 0; p < net.params[i].size(); ++p) {
      for (hydra::Index e = 0; e < net.params[i][p].size(); ++e) {
        const hydra::Real orig = net.params[i][p][e];
        net.params[i][p][e] = orig + static_cast<hydra::Real>(h);
        const double lp = hydra::softmax_cross_entropy(
            hydra::forward(net, pixels, metadata, true, dropout_seed), target, weights[target]);
        net.params[i][p][e] = orig - static_cast<hydra::Real>(h);
        const double lm = hydra::softmax_cross_entropy(
            hydra::forward(net, pixels, metadata, true, dropout_seed), target, weights[target]);
        net.params[i][p][e] = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = static_cast<double>(result.grads[i][p][e]);
        const double err = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        max_err = std::max(max_err, err);
      }
    }
  }
  return max_err;
}

/// Unique scratch directory under the system temp root, removed on scope
/// exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("hydra_test_" + tag + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  std::filesystem::path path_;
};

inline hydra::Tensor random_tensor(std::vector<hydra::Index> shape, hydra::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
  hydra::Tensor t(std::move(shape));
  for (hydra::Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<hydra::Real>(rng.uniform(lo, hi));
  return t;
}

}  // namespace testutil
