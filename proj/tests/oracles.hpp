#pragma once
// Brute-force reference implementations used to cross-check the library.
// They are written independently of src/ and favour obviousness over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "vild/box.hpp"
#include "vild/vocabulary.hpp"

namespace oracle {

inline double box_iou(const vild::Box& a, const vild::Box& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  if (inter <= 0.0) return 0.0;
  const double area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const double area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return inter / (area_a + area_b - inter);
}

// Sort key: higher score first, then lower source, category, image.
inline bool before(const vild::Detection& a, const vild::Detection& b) {
  return std::make_tuple(-a.score, a.source_id, a.category_id, a.image_id) <
         std::make_tuple(-b.score, b.source_id, b.category_id, b.image_id);
}

inline std::vector<std::size_t> ranked(const std::vector<vild::Detection>& dets) {
  std::vector<std::size_t> idx(dets.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return before(dets[a], dets[b]); });
  return idx;
}

// Enumerates every subset of the detections and returns the unique one that is
// self-consistent under greedy suppression: an element belongs to the set iff
// no higher-ranked member of the set conflicts with it.
inline std::vector<vild::Detection> nms(const std::vector<vild::Detection>& dets, double thr, bool agnostic,
                                        std::size_t max_out) {
  const auto order = ranked(dets);
  const std::size_t n = dets.size();
  auto conflicts = [&](std::size_t i, std::size_t j) {
    const auto& a = dets[order[i]];
    const auto& b = dets[order[j]];
    if (a.image_id != b.image_id) return false;
    if (!agnostic && a.category_id != b.category_id) return false;
    return box_iou(a.box, b.box) >= thr;
  };
  std::vector<vild::Detection> found;
  int solutions = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      bool blocked = false;
      for (std::size_t j = 0; j < i; ++j) {
        if ((mask >> j & 1u) && conflicts(i, j)) blocked = true;
      }
      const bool member = mask >> i & 1u;
      if (member == blocked) ok = false;
    }
    if (!ok) continue;
    ++solutions;
    found.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) found.push_back(dets[order[i]]);
    }
  }
  if (solutions != 1) return {};  // impossible for a correct greedy rule
  if (found.size() > max_out) found.resize(max_out);
  return found;
}

// Greedy matching, one image and one category: returns, in ranking order,
// pairs (detection index, matched gt index or -1).
inline std::vector<std::pair<std::size_t, int>> match(const std::vector<vild::Detection>& dets,
                                                      const std::vector<vild::GroundTruth>& gts, double thr) {
  std::vector<std::pair<std::size_t, int>> out;
  std::set<int> used;
  for (std::size_t di : ranked(dets)) {
    int best = -1;
    for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
      if (used.count(g)) continue;
      const double v = box_iou(dets[di].box, gts[g].box);
      if (v < thr) continue;
      if (best < 0 || v > box_iou(dets[di].box, gts[best].box)) best = g;
    }
    if (best >= 0) used.insert(best);
    out.emplace_back(di, best);
  }
  return out;
}

// 101-point interpolated AP computed directly from its definition: for each
// recall level r, the best precision over every cut-off reaching recall >= r.
inline std::optional<double> ap(const std::vector<bool>& tp_in_rank_order, std::size_t num_gt) {
  if (num_gt == 0) return std::nullopt;
  const std::size_t n = tp_in_rank_order.size();
  std::vector<double> rec(n), prec(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += tp_in_rank_order[i] ? 1 : 0;
    rec[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  double total = 0.0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (rec[i] >= level) best = std::max(best, prec[i]);
    }
    total += best;
  }
  return total / 101.0;
}

inline std::vector<double> thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

// Per-category AP over all thresholds for a whole dataset.
inline std::optional<double> category_ap(const std::vector<vild::Detection>& all_dets,
                                         const std::vector<vild::GroundTruth>& all_gts, int category) {
  std::map<std::int64_t, std::vector<vild::Detection>> dets;
  std::map<std::int64_t, std::vector<vild::GroundTruth>> gts;
  std::size_t num_gt = 0;
  for (const auto& d : all_dets) {
    if (d.category_id == category) dets[d.image_id].push_back(d);
  }
  for (const auto& g : all_gts) {
    if (g.category_id == category) {
      gts[g.image_id].push_back(g);
      ++num_gt;
    }
  }
  if (num_gt == 0) return std::nullopt;
  double sum = 0.0;
  for (double t : thresholds()) {
    // (score, image, rank-within-image, tp)
    std::vector<std::tuple<double, std::int64_t, std::size_t, bool>> rows;
    for (const auto& [image, ds] : dets) {
      const auto matches = match(ds, gts[image], t);
      for (std::size_t r = 0; r < matches.size(); ++r) {
        rows.emplace_back(ds[matches[r].first].score, image, r, matches[r].second >= 0);
      }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
      if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) < std::get<2>(b);
    });
    std::vector<bool> flags;
    for (const auto& row : rows) flags.push_back(std::get<3>(row));
    sum += *ap(flags, num_gt);
  }
  return sum / 10.0;
}

struct ScoredBox {
  std::int64_t image_id;
  vild::Box box;
  double score;
};

// AR@k: class-agnostic greedy matching of each image's top-k boxes.
inline std::optional<double> ar_at_k(const std::vector<ScoredBox>& proposals, const std::vector<vild::GroundTruth>& gts,
                                     std::size_t k) {
  if (gts.empty()) return std::nullopt;
  std::map<std::int64_t, std::vector<ScoredBox>> by_image;
  for (const auto& p : proposals) by_image[p.image_id].push_back(p);
  for (auto& [image, ps] : by_image) {
    std::stable_sort(ps.begin(), ps.end(), [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
    if (ps.size() > k) ps.resize(k);
  }
  double total = 0.0;
  for (double t : thresholds()) {
    std::size_t hit = 0;
    std::map<std::int64_t, std::set<std::size_t>> used;
    for (auto& [image, ps] : by_image) {
      for (const auto& p : ps) {
        int best = -1;
        double best_v = 0.0;
        for (std::size_t g = 0; g < gts.size(); ++g) {
          if (gts[g].image_id != image || used[image].count(g)) continue;
          const double v = box_iou(p.box, gts[g].box);
          if (v >= t && (best < 0 || v > best_v)) {
            best = static_cast<int>(g);
            best_v = v;
          }
        }
        if (best >= 0) {
          used[image].insert(static_cast<std::size_t>(best));
          ++hit;
        }
      }
    }
    total += static_cast<double>(hit) / static_cast<double>(gts.size());
  }
  return total / 10.0;
}

inline double ensemble(double a, double b, bool base, double lambda) {
  return base ? std::pow(a, lambda) * std::pow(b, 1.0 - lambda) : std::pow(a, 1.0 - lambda) * std::pow(b, lambda);
}

}  // namespace oracle
