#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vild/classifier.hpp"
#include "vild/synthetic.hpp"
#include "vild/training.hpp"

namespace vild {

// Everything a pipeline run needs. Parsed from flat `key=value` text with `#`
// comments; see README for the key list.
struct RunConfig {
  // Paths. Empty means "not used" (outputs) or "generate" (inputs, with synthetic=true).
  std::filesystem::path vocab;
  std::filesystem::path text;       // text embeddings (per-prompt records allowed)
  std::filesystem::path data;       // training samples, JSONL
  std::filesystem::path proposals;  // evaluation proposals, JSONL
  std::filesystem::path gt;         // evaluation ground truth, JSONL
  std::filesystem::path head;       // output head file
  std::filesystem::path dets;       // output detections
  std::filesystem::path report;     // output EvalReport JSON

  double tau = kDefaultTemperature;
  double w = kDefaultDistillWeight;
  double lambda = 2.0 / 3.0;
  DistillNorm distill_norm = DistillNorm::l1;
  double nms_per_class = 0.6;
  double nms_agnostic = 0.9;
  std::size_t max_detections = 300;
  std::size_t max_proposals = 1000;
  std::uint64_t seed = 0;
  int iterations = 2000;
  double learning_rate = 0.01;
  InferenceVocab inference_vocab = InferenceVocab::joint;
  bool ensemble = false;
  bool rescore_objectness = false;

  bool synthetic = false;
  SyntheticConfig synth;  // synth.seed always follows `seed`

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Throws ConfigError with the 1-based line number on unknown or duplicate
// keys, unparsable values, and out-of-range values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

// Writes every key; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& cfg);

TrainConfig train_config_from(const RunConfig& cfg);

std::string_view to_string(InferenceVocab mode);
InferenceVocab parse_inference_vocab(std::string_view text);

}  // namespace vild
