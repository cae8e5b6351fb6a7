#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "vild/classifier.hpp"
#include "vild/embedding.hpp"
#include "vild/embedding_io.hpp"

namespace vild {

inline constexpr int kBackgroundLabel = -1;
inline constexpr double kDefaultDistillWeight = 0.5;

// Affine projection from backbone features to region embeddings, plus the
// learnable background embedding: e_r = W f + b.
struct RegionHead {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;
  std::vector<double> background;

  RegionHead() = default;
  RegionHead(std::size_t in, std::size_t out);

  std::vector<double> embed(std::span<const double> feature) const;
  void embed_into(std::span<const double> feature, std::span<double> out) const;
  bool all_finite() const noexcept;
  std::size_t num_parameters() const noexcept { return weight.size() + bias.size() + background.size(); }

  friend bool operator==(const RegionHead&, const RegionHead&) = default;
};

// W ~ U(-1/sqrt(in), 1/sqrt(in)), b = 0, background ~ N(0, I) scaled to unit norm.
RegionHead init_head(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

// Same layout as RegionHead; one gradient entry per parameter.
struct HeadGradient {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> background;

  HeadGradient() = default;
  explicit HeadGradient(const RegionHead& like);
  void add_scaled(const HeadGradient& other, double scale);
};

struct LossResult {
  double loss = 0.0;
  HeadGradient grad;
};

// label is a vocabulary category id, or kBackgroundLabel.
struct OnlineProposal {
  std::vector<double> feature;
  int label = kBackgroundLabel;

  friend bool operator==(const OnlineProposal&, const OnlineProposal&) = default;
};

// teacher is the crop-ensembled, unit-norm teacher image embedding.
struct OfflineProposal {
  std::vector<double> feature;
  Embedding teacher;

  friend bool operator==(const OfflineProposal&, const OfflineProposal&) = default;
};

struct TrainingSample {
  std::int64_t image_id = 0;
  std::vector<OnlineProposal> online;
  std::vector<OfflineProposal> offline;

  friend bool operator==(const TrainingSample&, const TrainingSample&) = default;
};

enum class DistillNorm { l1, l2 };
std::string_view to_string(DistillNorm norm);
DistillNorm parse_distill_norm(std::string_view text);

struct TrainConfig {
  double tau = kDefaultTemperature;
  double distill_weight = kDefaultDistillWeight;  // w
  // Multiplier on the text loss; 0 trains a distillation-only head.
  double text_weight = 1.0;
  DistillNorm distill_norm = DistillNorm::l1;
  double learning_rate = 0.01;
  int iterations = 2000;
  std::uint64_t seed = 0;
};

// Cross entropy over temperature-softmaxed cosine logits, averaged over the
// proposals. The background slot uses head.background (the classifier's own
// background is ignored); gradients cover W, b and that background.
LossResult vild_text_loss(const RegionHead& head, const TextClassifier& base_clf,
                          std::span<const OnlineProposal> online);

// Mean L1 (or squared L2) distance between head outputs and teacher embeddings.
// The background gradient is identically zero.
LossResult vild_image_loss(const RegionHead& head, std::span<const OfflineProposal> offline,
                           DistillNorm norm = DistillNorm::l1);

// text_weight * L_text + w * L_image. Either side may be empty, not both.
LossResult vild_loss(const RegionHead& head, const TextClassifier& base_clf,
                     const TrainingSample& sample, const TrainConfig& cfg);

// Mean of vild_loss over all samples; samples are evaluated in parallel and
// reduced in dataset order, so the result does not depend on thread count.
LossResult dataset_loss(const RegionHead& head, const TextClassifier& base_clf,
                        std::span<const TrainingSample> dataset, const TrainConfig& cfg);

// Learning rate after step decay (/10 at 90%, 95%, 97.5% of iterations).
double learning_rate_at(const TrainConfig& cfg, int iteration);

struct TrainResult {
  RegionHead head;
  std::vector<double> loss_log;  // loss before each update
};

using LossObserver = std::function<void(int iteration, double loss, double lr)>;

// Full-batch gradient descent from init_head(seed). Throws NumericalError if
// the loss becomes non-finite.
TrainResult train(std::span<const TrainingSample> dataset, const TextClassifier& base_clf,
                  const TrainConfig& cfg, const LossObserver& observer = {});

// Head file: embedding records of dimension out_dim. W is stored by column as
// `W.col.<j>` (j < in_dim), followed by `b` and `__background__`.
EmbeddingTable head_to_table(const RegionHead& head);
RegionHead head_from_table(const EmbeddingTable& table);

}  // namespace vild
