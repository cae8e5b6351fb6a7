#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vild/classifier.hpp"
#include "vild/config.hpp"
#include "vild/eval.hpp"
#include "vild/records_io.hpp"
#include "vild/training.hpp"

namespace vild {

struct InferOptions {
  double agnostic_nms = 0.9;
  std::size_t max_proposals = 1000;
  bool rescore_objectness = false;
  bool finalize = true;
  double per_class_nms = 0.6;
  std::size_t max_detections = 300;
};

// Proposals -> class-agnostic NMS -> head -> text classifier -> (rescore) ->
// (finalize). Images are processed in parallel and emitted in input order.
std::vector<Detection> infer_detections(const RegionHead& head, const TextClassifier& clf,
                                        std::span<const ProposalImage> images,
                                        const InferOptions& options);

// Groups records by id and composes each group into one text embedding;
// output is sorted by first appearance.
EmbeddingTable compose_text_table(const EmbeddingTable& per_prompt);

// Renormalized sum of records with equal ids in the two tables.
EmbeddingTable compose_crop_table(const EmbeddingTable& crops_1x, const EmbeddingTable& crops_1_5x);

struct PipelineResult {
  EvalReport report;
  std::string report_json;
  std::vector<Detection> detections;
};

// compose -> train -> infer -> (ensemble) -> finalize -> eval. Any stage
// failure is rethrown with the stage name prefixed and its exit code kept.
PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log);

}  // namespace vild
