#include "vild/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "vild/errors.hpp"
#include "vild/reference.hpp"

namespace vild {

TextClassifier::TextClassifier(std::vector<int> category_ids, std::vector<Embedding> text_embeddings,
                               std::vector<double> background, double tau)
    : category_ids_(std::move(category_ids)),
      text_(std::move(text_embeddings)),
      background_(std::move(background)),
      tau_(tau) {
  if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ConfigError("classifier: temperature must be positive");
  if (category_ids_.size() != text_.size()) {
    throw FormatError("classifier: " + std::to_string(category_ids_.size()) + " category ids but " +
                      std::to_string(text_.size()) + " text embeddings");
  }
  if (background_.empty()) throw FormatError("classifier: empty background embedding");
  for (double x : background_) {
    if (!std::isfinite(x)) throw NumericalError("classifier: non-finite background embedding");
  }
  for (std::size_t i = 0; i < text_.size(); ++i) {
    if (text_[i].dim() != background_.size()) {
      throw FormatError("classifier: text embedding of category " + std::to_string(category_ids_[i]) +
                        " has dim " + std::to_string(text_[i].dim()) + ", expected " +
                        std::to_string(background_.size()));
    }
    if (!text_[i].is_normalized()) {
      throw NumericalError("classifier: text embedding of category " + std::to_string(category_ids_[i]) +
                           " is not unit norm");
    }
  }
  auto sorted = category_ids_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw FormatError("classifier: duplicate category id");
  }
}

std::size_t TextClassifier::slot_of(int category_id) const {
  auto it = std::find(category_ids_.begin(), category_ids_.end(), category_id);
  if (it == category_ids_.end()) {
    throw FormatError("classifier: category " + std::to_string(category_id) + " is not in the classifier");
  }
  return 1 + static_cast<std::size_t>(it - category_ids_.begin());
}

TextClassifier TextClassifier::with_background(std::vector<double> background) const {
  return TextClassifier(category_ids_, text_, std::move(background), tau_);
}

std::vector<double> softmax_temperature(std::span<const double> logits, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("softmax: temperature must be positive");
  if (logits.empty()) return {};
  double max_logit = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw NumericalError("softmax: non-finite logit");
    max_logit = std::max(max_logit, z);
  }
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - max_logit) / tau);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

ScoreVector score_region(const TextClassifier& clf, std::span<const double> region_embedding) {
  if (region_embedding.size() != clf.dim()) {
    throw FormatError("score_region: region embedding dim " + std::to_string(region_embedding.size()) +
                      " does not match classifier dim " + std::to_string(clf.dim()));
  }
  ScoreVector sv;
  sv.logits.reserve(clf.num_categories() + 1);
  sv.logits.push_back(cosine_sim(region_embedding, clf.background()));
  for (const auto& t : clf.text_embeddings()) sv.logits.push_back(cosine_sim(region_embedding, t.values()));
  sv.probs = softmax_temperature(sv.logits, clf.tau());
  return sv;
}

std::vector<Detection> classify_regions(const TextClassifier& clf, std::span<const Region> regions) {
  std::vector<std::vector<double>> embeddings;
  embeddings.reserve(regions.size());
  for (const auto& r : regions) embeddings.push_back(r.embedding);
  const auto scores = score_regions(clf, embeddings);

  std::vector<Detection> dets;
  dets.reserve(regions.size() * clf.num_categories());
  for (std::size_t r = 0; r < regions.size(); ++r) {
    for (std::size_t k = 0; k < clf.num_categories(); ++k) {
      dets.push_back(Detection{regions[r].image_id, clf.category_ids()[k], regions[r].box,
                               scores[r].probs[k + 1], regions[r].source_id});
    }
  }
  return dets;
}

ExpansionMatrix expand_vocabulary(const TextClassifier& vocab_clf, const TextClassifier& attr_clf,
                                  std::span<const double> region_embedding) {
  if (vocab_clf.dim() != attr_clf.dim() || region_embedding.size() != vocab_clf.dim()) {
    throw FormatError("expand_vocabulary: dimension mismatch");
  }
  if (vocab_clf.tau() != attr_clf.tau()) throw ConfigError("expand_vocabulary: classifiers use different temperatures");
  auto axis = [&](const TextClassifier& clf) {
    std::vector<double> logits;
    logits.reserve(clf.num_categories());
    for (const auto& t : clf.text_embeddings()) logits.push_back(cosine_sim(region_embedding, t.values()));
    return softmax_temperature(logits, clf.tau());
  };
  const auto pv = axis(vocab_clf);
  const auto pa = axis(attr_clf);
  ExpansionMatrix m{pv.size(), pa.size(), std::vector<double>(pv.size() * pa.size())};
  for (std::size_t i = 0; i < pv.size(); ++i) {
    for (std::size_t j = 0; j < pa.size(); ++j) m.values[i * m.cols + j] = pv[i] * pa[j];
  }
  return m;
}

TextClassifier build_classifier(const Vocabulary& vocab, const EmbeddingTable& text,
                                std::vector<double> background, double tau, InferenceVocab mode) {
  std::vector<int> ids;
  std::vector<Embedding> embeddings;
  for (const auto& c : vocab.categories()) {
    if (mode == InferenceVocab::base && c.split != Split::base) continue;
    if (mode == InferenceVocab::novel && c.split != Split::novel) continue;
    const auto records = text.find_all(std::to_string(c.id));
    if (records.empty()) {
      throw FormatError("classifier: no text embedding for category " + std::to_string(c.id) + " (" + c.name + ")");
    }
    std::vector<Embedding> prompts;
    for (const auto* r : records) prompts.push_back(l2_normalize(r->values));
    ids.push_back(c.id);
    embeddings.push_back(compose_text_embedding(prompts));
  }
  return TextClassifier(std::move(ids), std::move(embeddings), std::move(background), tau);
}

EmbeddingTable to_bundle(const TextClassifier& clf) {
  EmbeddingTable t;
  t.dim = clf.dim();
  t.tau = clf.tau();
  for (std::size_t k = 0; k < clf.num_categories(); ++k) {
    const auto v = clf.text_embeddings()[k].values();
    t.records.push_back({std::to_string(clf.category_ids()[k]), {v.begin(), v.end()}});
  }
  const auto bg = clf.background();
  t.records.push_back({kBackgroundKey, {bg.begin(), bg.end()}});
  return t;
}

TextClassifier from_bundle(const EmbeddingTable& bundle) {
  if (!bundle.tau) throw FormatError("classifier bundle: missing tau= header");
  std::vector<int> ids;
  std::vector<Embedding> embeddings;
  std::vector<double> background;
  bool have_background = false;
  for (const auto& r : bundle.records) {
    if (r.id == kBackgroundKey) {
      if (have_background) throw FormatError("classifier bundle: duplicate __background__ record");
      background = r.values;
      have_background = true;
      continue;
    }
    int id = 0;
    auto [ptr, ec] = std::from_chars(r.id.data(), r.id.data() + r.id.size(), id);
    if (ec != std::errc() || ptr != r.id.data() + r.id.size()) {
      throw FormatError("classifier bundle: record id '" + r.id + "' is not a category id");
    }
    ids.push_back(id);
    embeddings.push_back(l2_normalize(r.values));
  }
  if (!have_background) throw FormatError("classifier bundle: missing __background__ record");
  return TextClassifier(std::move(ids), std::move(embeddings), std::move(background), *bundle.tau);
}

}  // namespace vild
