#include "vild/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>

#include "vild/errors.hpp"

namespace vild {

namespace {

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw FormatError(std::string(what) + ": value " + std::to_string(p) + " outside [0,1]");
}

using PairKey = std::tuple<std::int64_t, int, int>;  // image, source, category

std::map<PairKey, const Detection*> index_pairs(std::span<const Detection> dets, const char* side) {
  std::map<PairKey, const Detection*> out;
  for (const auto& d : dets) {
    if (!out.emplace(PairKey{d.image_id, d.source_id, d.category_id}, &d).second) {
      throw FormatError(std::string("ensemble: duplicate (image ") + std::to_string(d.image_id) + ", source " +
                        std::to_string(d.source_id) + ", category " + std::to_string(d.category_id) + ") in " + side);
    }
  }
  return out;
}

}  // namespace

bool ranks_before(const Detection& a, const Detection& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  if (a.source_id != b.source_id) return a.source_id < b.source_id;
  if (a.category_id != b.category_id) return a.category_id < b.category_id;
  return a.image_id < b.image_id;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold, bool class_agnostic,
                           std::size_t max_out) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw ConfigError("nms: threshold must be in (0, 1]");
  if (max_out < 1) throw ConfigError("nms: max_out must be at least 1");

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });

  std::vector<Detection> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= max_out) break;
    const auto& cand = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      if (k.image_id != cand.image_id) return false;
      if (!class_agnostic && k.category_id != cand.category_id) return false;
      return iou(k.box, cand.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

double objectness_rescore(double score, double objectness) {
  require_probability(score, "objectness_rescore score");
  require_probability(objectness, "objectness_rescore objectness");
  return std::sqrt(score * objectness);
}

double ensemble_scores(double p_a, double p_b, int category_id, const EnsembleConfig& cfg) {
  if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw ConfigError("ensemble: lambda must be in [0, 1]");
  require_probability(p_a, "ensemble p_a");
  require_probability(p_b, "ensemble p_b");
  const bool base = cfg.base_ids.contains(category_id);
  const double weight_a = base ? cfg.lambda : 1.0 - cfg.lambda;
  return std::pow(p_a, weight_a) * std::pow(p_b, 1.0 - weight_a);
}

std::vector<Detection> ensemble_detections(std::span<const Detection> dets_a, std::span<const Detection> dets_b,
                                           const EnsembleConfig& cfg) {
  const auto a = index_pairs(dets_a, "first list");
  const auto b = index_pairs(dets_b, "second list");

  std::vector<Detection> out;
  out.reserve(std::max(a.size(), b.size()));
  auto ia = a.begin();
  auto ib = b.begin();
  // Merge walk over the union of keys.
  while (ia != a.end() || ib != b.end()) {
    const Detection* da = nullptr;
    const Detection* db = nullptr;
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      da = (ia++)->second;
    } else if (ia == a.end() || ib->first < ia->first) {
      db = (ib++)->second;
    } else {
      da = (ia++)->second;
      db = (ib++)->second;
    }
    Detection d = da ? *da : *db;
    d.score = ensemble_scores(da ? da->score : 0.0, db ? db->score : 0.0, d.category_id, cfg);
    out.push_back(d);
  }
  std::stable_sort(out.begin(), out.end(), [](const Detection& x, const Detection& y) {
    if (x.image_id != y.image_id) return x.image_id < y.image_id;
    return ranks_before(x, y);
  });
  return out;
}

std::vector<Detection> finalize(std::span<const Detection> dets, std::size_t max_detections, double per_class_nms) {
  std::map<std::int64_t, std::vector<Detection>> by_image;
  for (const auto& d : dets) by_image[d.image_id].push_back(d);

  std::vector<Detection> out;
  for (auto& [image, group] : by_image) {
    auto kept = nms(group, per_class_nms, false, std::numeric_limits<std::size_t>::max());
    if (kept.size() > max_detections) kept.resize(max_detections);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  return out;
}

}  // namespace vild
