#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <vector>

#include "vild/box.hpp"

namespace vild {

inline constexpr double kDefaultEnsembleLambda = 2.0 / 3.0;
inline constexpr double kPerClassNmsThreshold = 0.6;
inline constexpr double kClassAgnosticNmsThreshold = 0.9;
inline constexpr std::size_t kMaxDetectionsPerImage = 300;
inline constexpr std::size_t kMaxProposalsPerImage = 1000;

struct EnsembleConfig {
  double lambda = kDefaultEnsembleLambda;
  std::set<int> base_ids;
};

// Ranking order used throughout: score descending, then lower source_id.
bool ranks_before(const Detection& a, const Detection& b) noexcept;

// Greedy NMS over a single image's detections. A detection survives iff its IoU
// with every previously kept detection (of the same category unless
// class_agnostic) is below the threshold. Output is at most max_out long.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold,
                           bool class_agnostic, std::size_t max_out);

// Geometric mean of a classification score and a proposal objectness.
double objectness_rescore(double score, double objectness);

// Weighted geometric mean; the first score gets weight lambda on base
// categories and 1-lambda on novel ones.
double ensemble_scores(double p_a, double p_b, int category_id, const EnsembleConfig& cfg);

// Pairs detections by (image, source, category); a side missing a pair
// contributes score 0. Output is sorted by (image, rank).
std::vector<Detection> ensemble_detections(std::span<const Detection> dets_a,
                                           std::span<const Detection> dets_b,
                                           const EnsembleConfig& cfg);

// Per image: per-class NMS, then the top max_detections by score.
std::vector<Detection> finalize(std::span<const Detection> dets,
                                std::size_t max_detections = kMaxDetectionsPerImage,
                                double per_class_nms = kPerClassNmsThreshold);

}  // namespace vild
