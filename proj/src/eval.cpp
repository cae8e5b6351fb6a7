#include "vild/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vild/embedding_io.hpp"
#include "vild/errors.hpp"
#include "vild/parallel.hpp"
#include "vild/postprocess.hpp"
#include "vild/reference.hpp"

namespace vild {

namespace {

constexpr std::size_t kRecallPoints = 101;

struct CategorySlice {
  // image id -> detections / ground truth of one category.
  std::map<std::int64_t, std::vector<Detection>> dets;
  std::map<std::int64_t, std::vector<GroundTruth>> gts;
  std::size_t num_gt = 0;
};

std::optional<double> mean_of(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::vector<Detection> cap_per_image(std::span<const Detection> dets, std::size_t max_detections) {
  std::map<std::int64_t, std::vector<Detection>> by_image;
  for (const auto& d : dets) by_image[d.image_id].push_back(d);
  std::vector<Detection> out;
  for (auto& [image, group] : by_image) {
    std::stable_sort(group.begin(), group.end(), ranks_before);
    if (group.size() > max_detections) group.resize(max_detections);
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

std::vector<CategorySlice> slice_by_category(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                             const Vocabulary& vocab) {
  std::vector<CategorySlice> slices(vocab.size());
  for (const auto& g : gts) {
    const auto idx = vocab.index_of(g.category_id);
    if (!idx) throw FormatError("evaluate: unknown category id " + std::to_string(g.category_id) + " in ground truth");
    if (!g.box.valid()) throw FormatError("evaluate: invalid ground-truth box in image " + std::to_string(g.image_id));
    slices[*idx].gts[g.image_id].push_back(g);
    ++slices[*idx].num_gt;
  }
  for (const auto& d : dets) {
    const auto idx = vocab.index_of(d.category_id);
    if (!idx) throw FormatError("evaluate: unknown category id " + std::to_string(d.category_id) + " in detections");
    slices[*idx].dets[d.image_id].push_back(d);
  }
  return slices;
}

// AP per IoU threshold for one category.
std::vector<std::optional<double>> category_aps(const CategorySlice& slice, const std::vector<double>& thresholds) {
  std::vector<std::optional<double>> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    std::vector<RankedFlag> flags;
    for (const auto& [image, dets] : slice.dets) {
      static const std::vector<GroundTruth> kNone;
      auto git = slice.gts.find(image);
      const auto& gts = git == slice.gts.end() ? kNone : git->second;
      for (const auto& m : match_detections(dets, gts, t)) {
        flags.push_back({dets[m.det_index].score, m.gt_index.has_value()});
      }
    }
    std::stable_sort(flags.begin(), flags.end(), [](const RankedFlag& a, const RankedFlag& b) { return a.score > b.score; });
    out.push_back(average_precision(flags, slice.num_gt));
  }
  return out;
}

std::optional<double> mean_over_thresholds(const std::vector<std::optional<double>>& aps) { return mean_of(aps); }

std::optional<double> rounded(std::optional<double> v) {
  if (!v) return v;
  const auto text = format_real(*v);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

}  // namespace

std::vector<double> iou_thresholds() {
  std::vector<double> t(10);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 + 0.05 * static_cast<double>(i);
  return t;
}

std::vector<Match> match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                    double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });

  std::vector<bool> taken(gts.size(), false);
  std::vector<Match> out;
  out.reserve(dets.size());
  for (std::size_t di : order) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[di].box, gts[g].box);
      if (v >= iou_threshold && (!best || v > best_iou)) {
        best = g;
        best_iou = v;
      }
    }
    if (best) taken[*best] = true;
    out.push_back({di, best});
  }
  return out;
}

std::optional<double> average_precision(std::span<const RankedFlag> flags, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  std::vector<double> recall(flags.size());
  std::vector<double> precision(flags.size());
  double tp = 0.0;
  double fp = 0.0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    (flags[i].true_positive ? tp : fp) += 1.0;
    recall[i] = tp / static_cast<double>(num_gt);
    precision[i] = tp / (tp + fp);
  }
  // Precision envelope: max precision at any rank to the right.
  for (std::size_t i = flags.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);

  double sum = 0.0;
  for (std::size_t r = 0; r < kRecallPoints; ++r) {
    const double target = static_cast<double>(r) / 100.0;
    auto it = std::lower_bound(recall.begin(), recall.end(), target);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / static_cast<double>(kRecallPoints);
}

std::optional<double> average_recall_at_k(std::span<const ImageProposals> proposals, std::span<const GroundTruth> gts,
                                          std::size_t k, const std::set<int>* categories) {
  if (k < 1) throw ConfigError("average_recall_at_k: k must be at least 1");
  std::map<std::int64_t, std::vector<Box>> gt_boxes;
  std::size_t total_gt = 0;
  for (const auto& g : gts) {
    if (categories && !categories->contains(g.category_id)) continue;
    gt_boxes[g.image_id].push_back(g.box);
    ++total_gt;
  }
  if (total_gt == 0) return std::nullopt;

  std::map<std::int64_t, std::vector<ScoredBox>> top;
  for (const auto& img : proposals) {
    auto& boxes = top[img.image_id];
    boxes.insert(boxes.end(), img.boxes.begin(), img.boxes.end());
  }
  for (auto& [image, boxes] : top) {
    std::stable_sort(boxes.begin(), boxes.end(), [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
    if (boxes.size() > k) boxes.resize(k);
  }

  const auto thresholds = iou_thresholds();
  double recall_sum = 0.0;
  for (double t : thresholds) {
    std::size_t matched = 0;
    for (const auto& [image, gboxes] : gt_boxes) {
      auto pit = top.find(image);
      if (pit == top.end()) continue;
      std::vector<bool> taken(gboxes.size(), false);
      for (const auto& p : pit->second) {
        std::optional<std::size_t> best;
        double best_iou = 0.0;
        for (std::size_t g = 0; g < gboxes.size(); ++g) {
          if (taken[g]) continue;
          const double v = iou(p.box, gboxes[g]);
          if (v >= t && (!best || v > best_iou)) {
            best = g;
            best_iou = v;
          }
        }
        if (best) {
          taken[*best] = true;
          ++matched;
        }
      }
    }
    recall_sum += static_cast<double>(matched) / static_cast<double>(total_gt);
  }
  return recall_sum / static_cast<double>(thresholds.size());
}

std::vector<ImageProposals> proposals_from_detections(std::span<const Detection> dets) {
  std::map<std::int64_t, std::map<int, ScoredBox>> best;
  for (const auto& d : dets) {
    auto& slot = best[d.image_id];
    auto it = slot.find(d.source_id);
    if (it == slot.end() || d.score > it->second.score) slot[d.source_id] = ScoredBox{d.box, d.score};
  }
  std::vector<ImageProposals> out;
  for (auto& [image, boxes] : best) {
    ImageProposals ip{image, {}};
    for (auto& [source, box] : boxes) ip.boxes.push_back(box);
    out.push_back(std::move(ip));
  }
  return out;
}

namespace {

template <bool Parallel>
std::vector<std::vector<std::optional<double>>> all_category_aps(const std::vector<CategorySlice>& slices) {
  const auto thresholds = iou_thresholds();
  std::vector<std::vector<std::optional<double>>> out(slices.size());
  const auto n = static_cast<std::ptrdiff_t>(slices.size());
  if constexpr (Parallel) {
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
    for (std::ptrdiff_t c = 0; c < n; ++c) out[c] = category_aps(slices[c], thresholds);
  } else {
    for (std::ptrdiff_t c = 0; c < n; ++c) out[c] = category_aps(slices[c], thresholds);
  }
  return out;
}

}  // namespace

std::vector<std::optional<double>> per_category_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                                   const Vocabulary& vocab) {
  const auto per_t = all_category_aps<true>(slice_by_category(dets, gts, vocab));
  std::vector<std::optional<double>> out;
  for (const auto& aps : per_t) out.push_back(mean_over_thresholds(aps));
  return out;
}

namespace serial {

std::vector<std::optional<double>> per_category_ap(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                                   const Vocabulary& vocab) {
  const auto per_t = all_category_aps<false>(slice_by_category(dets, gts, vocab));
  std::vector<std::optional<double>> out;
  for (const auto& aps : per_t) out.push_back(mean_over_thresholds(aps));
  return out;
}

}  // namespace serial

EvalReport evaluate(std::span<const Detection> dets, std::span<const GroundTruth> gts, const Vocabulary& vocab,
                    const EvalOptions& options, std::span<const ImageProposals> proposals) {
  const auto capped = cap_per_image(dets, options.max_detections);
  const auto per_t = all_category_aps<true>(slice_by_category(capped, gts, vocab));

  EvalReport report;
  std::vector<std::optional<double>> cat_ap, at50, at75;
  std::map<Frequency, std::vector<std::optional<double>>> buckets;
  for (std::size_t c = 0; c < vocab.size(); ++c) {
    const auto& category = vocab.categories()[c];
    const auto ap = mean_over_thresholds(per_t[c]);
    report.per_category[category.id] = ap;
    cat_ap.push_back(ap);
    at50.push_back(per_t[c][0]);
    at75.push_back(per_t[c][5]);
    buckets[category.frequency].push_back(ap);
  }
  report.ap = mean_of(cat_ap);
  report.ap50 = mean_of(at50);
  report.ap75 = mean_of(at75);
  report.ap_r = mean_of(buckets[Frequency::rare]);
  report.ap_c = mean_of(buckets[Frequency::common]);
  report.ap_f = mean_of(buckets[Frequency::frequent]);

  const auto derived = proposals.empty() ? proposals_from_detections(capped) : std::vector<ImageProposals>{};
  const std::span<const ImageProposals> ar_source = proposals.empty() ? std::span<const ImageProposals>(derived) : proposals;
  for (std::size_t k : options.ar_ks) report.ar[k] = average_recall_at_k(ar_source, gts, k);
  return report;
}

std::optional<double> mean_category_ap(const EvalReport& report, std::span<const int> ids) {
  std::vector<std::optional<double>> values;
  for (int id : ids) {
    auto it = report.per_category.find(id);
    if (it != report.per_category.end()) values.push_back(it->second);
  }
  return mean_of(values);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  auto put = [&](const std::string& key, std::optional<double> v) {
    const auto r = rounded(v);
    j[key] = r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
  };
  put("AP", report.ap);
  put("AP50", report.ap50);
  put("AP75", report.ap75);
  put("APr", report.ap_r);
  put("APc", report.ap_c);
  put("APf", report.ap_f);
  for (const auto& [k, v] : report.ar) put("AR@" + std::to_string(k), v);
  for (const auto& [id, v] : report.per_category) put("AP_cat_" + std::to_string(id), v);
  return j.dump();
}

EvalReport report_from_json(const std::string& text) {
  EvalReport report;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("eval report: ") + e.what());
  }
  auto get = [&](const nlohmann::json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  for (const auto& [key, value] : j.items()) {
    if (key == "AP") report.ap = get(value);
    else if (key == "AP50") report.ap50 = get(value);
    else if (key == "AP75") report.ap75 = get(value);
    else if (key == "APr") report.ap_r = get(value);
    else if (key == "APc") report.ap_c = get(value);
    else if (key == "APf") report.ap_f = get(value);
    else if (key.rfind("AR@", 0) == 0) report.ar[std::stoul(key.substr(3))] = get(value);
    else if (key.rfind("AP_cat_", 0) == 0) report.per_category[std::stoi(key.substr(7))] = get(value);
    else throw FormatError("eval report: unknown key '" + key + "'");
  }
  return report;
}

std::string report_to_table(const EvalReport& report) {
  std::ostringstream out;
  auto row = [&](const std::string& name, std::optional<double> v) {
    char buf[64];
    if (v) {
      std::snprintf(buf, sizeof buf, "%-12s %8.4f\n", name.c_str(), *v);
    } else {
      std::snprintf(buf, sizeof buf, "%-12s %8s\n", name.c_str(), "-");
    }
    out << buf;
  };
  row("AP", report.ap);
  row("AP50", report.ap50);
  row("AP75", report.ap75);
  row("APr", report.ap_r);
  row("APc", report.ap_c);
  row("APf", report.ap_f);
  for (const auto& [k, v] : report.ar) row("AR@" + std::to_string(k), v);
  return out.str();
}

}  // namespace vild
