#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vild {

// Fixed-dimension real vector living in the shared text/image embedding space.
// Entries are always finite; unit norm is checked on demand with is_normalized().
class Embedding {
 public:
  Embedding() = default;
  explicit Embedding(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const noexcept;
  bool is_normalized(double tolerance = 1e-9) const noexcept;

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> values_;
};

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// v / ||v||. Throws NumericalError on zero norm or non-finite input.
Embedding l2_normalize(std::span<const double> v);

// a.b / (|a||b|). Throws FormatError on dim mismatch, NumericalError on zero vectors.
double cosine_sim(std::span<const double> a, std::span<const double> b);
inline double cosine_sim(const Embedding& a, const Embedding& b) {
  return cosine_sim(a.values(), b.values());
}

// Unit-renormalized sum of the 1x and 1.5x crop embeddings of one proposal.
Embedding compose_crop_ensemble(const Embedding& crop_1x, const Embedding& crop_1_5x);

// Flat mean over all prompt x synonym embeddings of one category, renormalized.
Embedding compose_text_embedding(std::span<const Embedding> per_prompt);

}  // namespace vild
