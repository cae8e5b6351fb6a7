#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "vild/box.hpp"
#include "vild/embedding.hpp"
#include "vild/embedding_io.hpp"
#include "vild/records_io.hpp"
#include "vild/training.hpp"
#include "vild/vocabulary.hpp"

namespace vild {

// Desk-scale stand-in for a base/novel detection benchmark. Every category has
// a hidden unit "true" embedding; features are a fixed linear mixing of it plus
// noise, text and teacher embeddings are noisy renormalized copies of it.
struct SyntheticConfig {
  std::uint64_t seed = 0;
  int num_base = 20;
  int num_novel = 10;
  std::size_t in_dim = 32;
  std::size_t out_dim = 16;
  int train_images = 200;
  int eval_images = 100;
  int objects_per_image = 3;
  int online_per_image = 6;   // N
  int offline_per_image = 6;  // M
  int clutter_prototypes = 4;
  double feature_noise = 0.15;
  double text_noise = 0.15;
  double teacher_noise = 0.15;
  double image_size = 640.0;

  friend bool operator==(const SyntheticConfig&, const SyntheticConfig&) = default;
};

struct SyntheticBenchmark {
  Vocabulary vocab;
  EmbeddingTable text_embeddings;  // one record per category, keyed by id
  std::vector<TrainingSample> train;
  std::vector<ProposalImage> eval_proposals;
  std::vector<GroundTruth> eval_gt;
  // Not serialized: the hidden generative state, for oracle checks.
  std::vector<Embedding> true_embeddings;               // vocabulary order
  std::vector<std::vector<int>> eval_proposal_labels;   // per image, per proposal
};

// Novel categories are rare; base categories alternate common/frequent.
// Novel objects never carry an online label: they appear as background
// online proposals and as regular offline proposals with teacher embeddings.
SyntheticBenchmark gen_synthetic_benchmark(const SyntheticConfig& cfg);

}  // namespace vild
