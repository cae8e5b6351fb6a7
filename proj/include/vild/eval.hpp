#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vild/box.hpp"
#include "vild/vocabulary.hpp"

namespace vild {

// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> iou_thresholds();

struct Match {
  std::size_t det_index = 0;              // index into the input detections
  std::optional<std::size_t> gt_index;    // matched ground truth, if any
};

// Single image, single category. Detections are processed by ranks_before
// order; each takes the unmatched GT with the highest IoU >= threshold (ties:
// lower GT index). Output is in processing order.
std::vector<Match> match_detections(std::span<const Detection> dets,
                                    std::span<const GroundTruth> gts, double iou_threshold);

struct RankedFlag {
  double score = 0.0;
  bool true_positive = false;
};

// 101-point interpolated AP. Flags must already be in ranking order.
// Absent when num_gt == 0.
std::optional<double> average_precision(std::span<const RankedFlag> flags, std::size_t num_gt);

struct ScoredBox {
  Box box;
  double score = 0.0;
};

struct ImageProposals {
  std::int64_t image_id = 0;
  std::vector<ScoredBox> boxes;
};

// Mean over IoU thresholds of the fraction of GT boxes recalled by the top-k
// proposals (by score) of their image. Matching is class-agnostic; when
// `categories` is given only GT of those categories count. Absent with no GT.
std::optional<double> average_recall_at_k(std::span<const ImageProposals> proposals,
                                          std::span<const GroundTruth> gts, std::size_t k,
                                          const std::set<int>* categories = nullptr);

struct EvalOptions {
  std::size_t max_detections = 300;
  std::vector<std::size_t> ar_ks{100, 300, 1000};
};

struct EvalReport {
  std::optional<double> ap;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::optional<double> ap_r;
  std::optional<double> ap_c;
  std::optional<double> ap_f;
  std::map<std::size_t, std::optional<double>> ar;            // by k
  std::map<int, std::optional<double>> per_category;           // AP over 0.50:0.95

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// COCO-style box AP with frequency buckets. When `proposals` is null, AR@k is
// computed over the detections collapsed to one box per (image, source_id).
EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                    const Vocabulary& vocab, const EvalOptions& options = {},
                    std::span<const ImageProposals> proposals = {});

// Mean per-category AP over a subset of ids; absent if none has GT.
std::optional<double> mean_category_ap(const EvalReport& report, std::span<const int> ids);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
std::string report_to_table(const EvalReport& report);

// Same (image, source) proposal collapsed to its best-scoring detection.
std::vector<ImageProposals> proposals_from_detections(std::span<const Detection> dets);

}  // namespace vild
