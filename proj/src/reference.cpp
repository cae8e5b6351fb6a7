#include "vild/reference.hpp"

#include <string>

#include "vild/errors.hpp"
#include "vild/parallel.hpp"
#include "vild/training_kernels.hpp"

namespace vild::serial {

LossResult dataset_loss(const RegionHead& head, const TextClassifier& base_clf,
                        std::span<const TrainingSample> dataset, const TrainConfig& cfg) {
  if (dataset.empty()) throw FormatError("dataset_loss: empty dataset");
  detail::check_head_against(head, base_clf);
  LossResult acc{0.0, HeadGradient(head)};
  detail::Workspace ws;
  const double per_image = 1.0 / static_cast<double>(dataset.size());
  for (const auto& sample : dataset) {
    if (sample.online.empty() && sample.offline.empty()) {
      throw FormatError("vild_loss: image " + std::to_string(sample.image_id) + " has no proposals");
    }
    if (cfg.text_weight != 0.0) {
      const double w = per_image * cfg.text_weight / static_cast<double>(sample.online.size());
      for (const auto& p : sample.online) detail::accumulate_text_proposal(head, base_clf, p, w, acc, ws);
    }
    if (cfg.distill_weight != 0.0) {
      const double w = per_image * cfg.distill_weight / static_cast<double>(sample.offline.size());
      for (const auto& p : sample.offline) detail::accumulate_image_proposal(head, p, cfg.distill_norm, w, acc, ws);
    }
  }
  return acc;
}

std::vector<ScoreVector> score_regions(const TextClassifier& clf, std::span<const std::vector<double>> embeddings) {
  std::vector<ScoreVector> out;
  out.reserve(embeddings.size());
  for (const auto& e : embeddings) out.push_back(score_region(clf, e));
  return out;
}

}  // namespace vild::serial

namespace vild {

std::vector<ScoreVector> score_regions(const TextClassifier& clf, std::span<const std::vector<double>> embeddings) {
  std::vector<ScoreVector> out(embeddings.size());
  std::vector<std::string> errors(embeddings.size());
  std::vector<int> codes(embeddings.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(embeddings.size());
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = score_region(clf, embeddings[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
      codes[i] = static_cast<int>(e.code());
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (codes[i] != 0) throw Error(static_cast<ExitCode>(codes[i]), errors[i]);
  }
  return out;
}

}  // namespace vild
