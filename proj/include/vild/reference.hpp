#pragma once

// Single-threaded reference versions of the OpenMP kernels. They accumulate
// directly instead of through per-item buffers and are kept for tests and
// the benchmark.

#include <span>
#include <vector>

#include "vild/classifier.hpp"
#include "vild/eval.hpp"
#include "vild/training.hpp"

namespace vild::serial {

LossResult dataset_loss(const RegionHead& head, const TextClassifier& base_clf,
                        std::span<const TrainingSample> dataset, const TrainConfig& cfg);

std::vector<ScoreVector> score_regions(const TextClassifier& clf,
                                       std::span<const std::vector<double>> embeddings);

// Per-category AP averaged over IoU thresholds, vocabulary order.
std::vector<std::optional<double>> per_category_ap(std::span<const Detection> dets,
                                                   std::span<const GroundTruth> gts,
                                                   const Vocabulary& vocab);

}  // namespace vild::serial

namespace vild {

// Parallel counterparts.
std::vector<ScoreVector> score_regions(const TextClassifier& clf,
                                       std::span<const std::vector<double>> embeddings);

std::vector<std::optional<double>> per_category_ap(std::span<const Detection> dets,
                                                   std::span<const GroundTruth> gts,
                                                   const Vocabulary& vocab);

}  // namespace vild
