#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "vild/box.hpp"
#include "vild/embedding.hpp"
#include "vild/embedding_io.hpp"
#include "vild/vocabulary.hpp"

namespace vild {

inline constexpr double kDefaultTemperature = 0.01;
inline constexpr const char* kBackgroundKey = "__background__";

// Which categories an inference-time classifier scores against.
enum class InferenceVocab { base, novel, joint };

// Fixed text embeddings (one per category) plus a background embedding and
// a softmax temperature. Immutable once built.
class TextClassifier {
 public:
  TextClassifier(std::vector<int> category_ids, std::vector<Embedding> text_embeddings,
                 std::vector<double> background, double tau = kDefaultTemperature);

  std::size_t num_categories() const noexcept { return category_ids_.size(); }
  std::size_t dim() const noexcept { return background_.size(); }
  double tau() const noexcept { return tau_; }
  const std::vector<int>& category_ids() const noexcept { return category_ids_; }
  const std::vector<Embedding>& text_embeddings() const noexcept { return text_; }
  std::span<const double> background() const noexcept { return background_; }

  // Slot of a category id within the logits (1-based; 0 is background).
  std::size_t slot_of(int category_id) const;

  TextClassifier with_background(std::vector<double> background) const;

 private:
  std::vector<int> category_ids_;
  std::vector<Embedding> text_;
  std::vector<double> background_;
  double tau_;
};

// Index 0 is background, 1..C follow the classifier's category order.
struct ScoreVector {
  std::vector<double> logits;
  std::vector<double> probs;
};

std::vector<double> softmax_temperature(std::span<const double> logits, double tau);

ScoreVector score_region(const TextClassifier& clf, std::span<const double> region_embedding);

// A localized region with its head-produced embedding.
struct Region {
  std::int64_t image_id = 0;
  int source_id = 0;
  Box box;
  std::vector<double> embedding;
};

// One detection per (region, category); background mass is dropped.
std::vector<Detection> classify_regions(const TextClassifier& clf, std::span<const Region> regions);

// p x q matrix (row-major, rows = vocabulary) of Pr(v_i, a_j | e_r) under
// conditional independence. Background is excluded from both softmaxes.
struct ExpansionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

ExpansionMatrix expand_vocabulary(const TextClassifier& vocab_clf, const TextClassifier& attr_clf,
                                  std::span<const double> region_embedding);

// Builds a classifier from a vocabulary and a table keyed by category id
// (decimal), keeping only the categories selected by `mode`.
TextClassifier build_classifier(const Vocabulary& vocab, const EmbeddingTable& text,
                                std::vector<double> background, double tau, InferenceVocab mode);

// Bundle file: `tau=` line, then an embedding file keyed by category id with a
// `__background__` record.
EmbeddingTable to_bundle(const TextClassifier& clf);
TextClassifier from_bundle(const EmbeddingTable& bundle);

}  // namespace vild
