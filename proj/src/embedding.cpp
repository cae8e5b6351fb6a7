#include "vild/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vild/errors.hpp"

namespace vild {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite entry");
  }
}

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw FormatError(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace

Embedding::Embedding(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw FormatError("embedding: empty vector");
  require_finite(values_, "embedding");
}

double Embedding::norm() const noexcept { return l2_norm(values_); }

bool Embedding::is_normalized(double tolerance) const noexcept {
  return std::abs(norm() - 1.0) <= tolerance;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

Embedding l2_normalize(std::span<const double> v) {
  require_finite(v, "l2_normalize");
  const double n = l2_norm(v);
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("l2_normalize: zero-norm vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return Embedding(std::move(out));
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  require_same_dim(a, b, "cosine_sim");
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericalError("cosine_sim: zero vector");
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Embedding compose_crop_ensemble(const Embedding& crop_1x, const Embedding& crop_1_5x) {
  require_same_dim(crop_1x.values(), crop_1_5x.values(), "compose_crop_ensemble");
  std::vector<double> sum(crop_1x.dim());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = crop_1x[i] + crop_1_5x[i];
  return l2_normalize(sum);
}

Embedding compose_text_embedding(std::span<const Embedding> per_prompt) {
  if (per_prompt.empty()) throw FormatError("compose_text_embedding: no prompt embeddings");
  if (per_prompt.size() == 1) return per_prompt.front();
  const std::size_t d = per_prompt.front().dim();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : per_prompt) {
    require_same_dim(per_prompt.front().values(), e.values(), "compose_text_embedding");
    for (std::size_t i = 0; i < d; ++i) mean[i] += e[i];
  }
  const double count = static_cast<double>(per_prompt.size());
  for (double& x : mean) x /= count;
  return l2_normalize(mean);
}

}  // namespace vild
