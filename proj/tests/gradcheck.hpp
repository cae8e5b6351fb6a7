#pragma once
// Central finite-difference checks of the analytic head gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "test_util.hpp"
#include "vild/classifier.hpp"
#include "vild/training.hpp"

namespace gradcheck {

struct Instance {
  vild::RegionHead head;
  vild::TextClassifier clf;
  vild::TrainingSample sample;
};

inline Instance random_instance(testutil::Rng& rng, std::size_t din, std::size_t dout, std::size_t num_base,
                                std::size_t n, std::size_t m, double tau) {
  auto head = vild::init_head(din, dout, static_cast<std::uint64_t>(rng.integer(0, 1 << 30)));
  for (double& b : head.bias) b = 0.3 * rng.normal();
  head.background = rng.vec(dout, rng.uniform(0.5, 2.0));

  std::vector<int> ids(num_base);
  std::iota(ids.begin(), ids.end(), 10);
  std::vector<vild::Embedding> text;
  for (std::size_t i = 0; i < num_base; ++i) text.push_back(rng.unit(dout));
  vild::TextClassifier clf(ids, text, rng.vec(dout), tau);

  vild::TrainingSample sample;
  for (std::size_t i = 0; i < n; ++i) {
    const int pick = rng.integer(-1, static_cast<int>(num_base) - 1);
    sample.online.push_back({rng.vec(din), pick < 0 ? vild::kBackgroundLabel : ids[static_cast<std::size_t>(pick)]});
  }
  for (std::size_t i = 0; i < m; ++i) sample.offline.push_back({rng.vec(din), rng.unit(dout)});
  return {std::move(head), std::move(clf), std::move(sample)};
}

// Smallest |W f + b - teacher| coordinate over the offline proposals; L1
// checks skip instances that sit within `margin` of a kink.
inline double min_kink_distance(const Instance& inst) {
  double best = INFINITY;
  for (const auto& p : inst.sample.offline) {
    const auto e = inst.head.embed(p.feature);
    for (std::size_t i = 0; i < e.size(); ++i) best = std::min(best, std::abs(e[i] - p.teacher[i]));
  }
  return best;
}

using LossFn = std::function<vild::LossResult(const vild::RegionHead&)>;

// Largest relative error between the analytic gradient and central differences
// over every parameter of the head (W, b and the background).
inline double max_relative_error(const vild::RegionHead& head, const LossFn& fn, double step = 1e-5) {
  const auto analytic = fn(head).grad;
  double worst = 0.0;
  auto probe = [&](std::vector<double> vild::RegionHead::*field, const std::vector<double>& grad) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      vild::RegionHead plus = head;
      vild::RegionHead minus = head;
      (plus.*field)[i] += step;
      (minus.*field)[i] -= step;
      const double numeric = (fn(plus).loss - fn(minus).loss) / (2.0 * step);
      const double scale = std::max({std::abs(grad[i]), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(grad[i] - numeric) / scale);
    }
  };
  probe(&vild::RegionHead::weight, analytic.weight);
  probe(&vild::RegionHead::bias, analytic.bias);
  probe(&vild::RegionHead::background, analytic.background);
  return worst;
}

}  // namespace gradcheck
