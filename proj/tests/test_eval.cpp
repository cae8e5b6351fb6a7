#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vild/errors.hpp"
#include "vild/eval.hpp"
#include "vild/postprocess.hpp"

using namespace vild;

namespace {

Detection det(Box b, double score, int source, int category = 0, std::int64_t image = 0) {
  return Detection{image, category, b, score, source};
}

GroundTruth gt(Box b, int category = 0, std::int64_t image = 0) { return GroundTruth{image, category, b}; }

// Box near `ref`, shifted by up to `jitter` pixels per side.
Box near(testutil::Rng& rng, const Box& ref, double jitter) {
  return Box{ref.x1 + rng.uniform(-jitter, jitter), ref.y1 + rng.uniform(-jitter, jitter),
             ref.x2 + rng.uniform(-jitter, jitter), ref.y2 + rng.uniform(-jitter, jitter)};
}

Vocabulary toy_vocab() {
  return Vocabulary({{0, "a", {}, Split::base, Frequency::frequent},
                     {1, "b", {}, Split::base, Frequency::common},
                     {2, "c", {}, Split::novel, Frequency::rare}});
}

struct Instance {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
};

// Up to 10 detections and 5 ground-truth boxes over two images and the toy
// vocabulary; detections cluster around GT so that matches at every IoU
// threshold occur.
Instance random_instance(testutil::Rng& rng) {
  Instance inst;
  const int num_gt = rng.integer(0, 5);
  for (int g = 0; g < num_gt; ++g) {
    const double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
    inst.gts.push_back(gt(Box{x, y, x + rng.uniform(7, 15), y + rng.uniform(7, 15)}, rng.integer(0, 2), rng.integer(0, 1)));
  }
  const int num_det = rng.integer(0, 10);
  for (int d = 0; d < num_det; ++d) {
    Box b;
    int category = rng.integer(0, 2);
    std::int64_t image = rng.integer(0, 1);
    if (!inst.gts.empty() && rng.uniform() < 0.8) {
      const auto& ref = inst.gts[static_cast<std::size_t>(rng.integer(0, num_gt - 1))];
      b = near(rng, ref.box, rng.uniform(0.0, 3.0));
      if (rng.uniform() < 0.8) {
        category = ref.category_id;
        image = ref.image_id;
      }
    } else {
      b = Box{rng.uniform(0, 40), rng.uniform(0, 40), 0, 0};
      b.x2 = b.x1 + rng.uniform(3, 15);
      b.y2 = b.y1 + rng.uniform(3, 15);
    }
    inst.dets.push_back(det(b, rng.integer(1, 8) / 8.0, d, category, image));
  }
  return inst;
}

std::optional<double> mean_present(const std::vector<std::optional<double>>& v) {
  double s = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / n;
}

void check_opt(std::optional<double> got, std::optional<double> want, double tol = 1e-9) {
  REQUIRE(got.has_value() == want.has_value());
  if (want) CHECK(std::abs(*got - *want) <= tol);
}

}  // namespace

TEST_CASE("iou thresholds") {
  const auto t = iou_thresholds();
  REQUIRE(t.size() == 10);
  CHECK(t.front() == 0.5);
  CHECK(t[5] == doctest::Approx(0.75));
  CHECK(t.back() == doctest::Approx(0.95));
}

TEST_CASE("match_detections examples") {
  const Box b{0, 0, 10, 10};
  const auto one = match_detections(std::vector<Detection>{det(b, 0.5, 0)}, std::vector<GroundTruth>{gt(b)}, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].gt_index == std::optional<std::size_t>(0));

  const auto two = match_detections(std::vector<Detection>{det(b, 0.4, 0), det(b, 0.9, 1)}, std::vector<GroundTruth>{gt(b)}, 0.5);
  REQUIRE(two.size() == 2);
  CHECK(two[0].det_index == 1);
  CHECK(two[0].gt_index.has_value());
  CHECK_FALSE(two[1].gt_index.has_value());

  // Crossed overlaps: the top detection prefers the second GT, leaving the
  // first for the runner-up even though it overlaps the second GT more.
  const Box g0{0, 0, 10, 10}, g1{4, 0, 14, 10};
  const std::vector<GroundTruth> gts{gt(g0), gt(g1)};
  const std::vector<Detection> dets{det(Box{3, 0, 13, 10}, 0.9, 0), det(Box{2, 0, 12, 10}, 0.8, 1), det(Box{0, 0, 10, 10}, 0.7, 2)};
  const auto got = match_detections(dets, gts, 0.5);
  const auto want = oracle::match(dets, gts, 0.5);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].det_index == want[i].first);
    CHECK((got[i].gt_index ? static_cast<int>(*got[i].gt_index) : -1) == want[i].second);
  }
  CHECK(got[0].gt_index == std::optional<std::size_t>(1));
  CHECK(got[1].gt_index == std::optional<std::size_t>(0));
  CHECK_FALSE(got[2].gt_index.has_value());
}

TEST_CASE("match_detections matches the greedy oracle") {
  testutil::Rng rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    auto inst = random_instance(rng);
    for (auto& d : inst.dets) d.image_id = 0, d.category_id = 0;
    for (auto& g : inst.gts) g.image_id = 0, g.category_id = 0;
    for (double t : iou_thresholds()) {
      const auto got = match_detections(inst.dets, inst.gts, t);
      const auto want = oracle::match(inst.dets, inst.gts, t);
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].det_index == want[i].first);
        CHECK((got[i].gt_index ? static_cast<int>(*got[i].gt_index) : -1) == want[i].second);
      }
    }
  }
}

TEST_CASE("average_precision examples") {
  const std::vector<RankedFlag> all_tp{{0.9, true}, {0.8, true}, {0.7, true}};
  CHECK(*average_precision(all_tp, 3) == doctest::Approx(1.0));
  CHECK(*average_precision(std::vector<RankedFlag>{}, 4) == 0.0);
  const std::vector<RankedFlag> tp_fp{{0.9, true}, {0.8, false}};
  CHECK(std::abs(*average_precision(tp_fp, 2) - 0.5) <= 0.005);
  CHECK_FALSE(average_precision(all_tp, 0).has_value());
}

TEST_CASE("average_precision matches the definitional oracle") {
  testutil::Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = rng.integer(0, 15);
    std::vector<RankedFlag> flags;
    std::vector<bool> tp;
    std::size_t positives = 0;
    for (int i = 0; i < n; ++i) {
      const bool hit = rng.uniform() < 0.5;
      positives += hit ? 1 : 0;
      flags.push_back({1.0 - i * 0.01, hit});
      tp.push_back(hit);
    }
    const std::size_t num_gt = positives + static_cast<std::size_t>(rng.integer(positives == 0 ? 1 : 0, 3));
    check_opt(average_precision(flags, num_gt), oracle::ap(tp, num_gt));
  }
}

TEST_CASE("AP properties") {
  testutil::Rng rng(23);
  const auto vocab = toy_vocab();
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng);
    const auto base = evaluate(inst.dets, inst.gts, vocab);

    // Strictly monotone score transform.
    auto squashed = inst.dets;
    for (auto& d : squashed) d.score = std::pow(d.score, 3.0) * 0.5;
    const auto transformed = evaluate(squashed, inst.gts, vocab);
    for (const auto& [id, ap] : base.per_category) check_opt(transformed.per_category.at(id), ap, 1e-12);

    // A lowest-scored false positive never helps.
    auto extra = inst.dets;
    extra.push_back(det(Box{500, 500, 501, 501}, 0.0, 99, rng.integer(0, 2), 0));
    const auto with_fp = evaluate(extra, inst.gts, vocab);
    for (const auto& [id, ap] : base.per_category) {
      if (ap) CHECK(*with_fp.per_category.at(id) <= *ap + 1e-12);
    }
  }
}

TEST_CASE("removing a true positive never increases AP") {
  const auto vocab = toy_vocab();
  testutil::Rng rng(29);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(rng);
    const auto base = evaluate(inst.dets, inst.gts, vocab);
    // Drop one detection that is a TP at IoU 0.5 within its image/category.
    for (std::size_t i = 0; i < inst.dets.size(); ++i) {
      std::vector<Detection> same;
      std::vector<GroundTruth> gts;
      for (const auto& d : inst.dets) {
        if (d.image_id == inst.dets[i].image_id && d.category_id == inst.dets[i].category_id) same.push_back(d);
      }
      for (const auto& g : inst.gts) {
        if (g.image_id == inst.dets[i].image_id && g.category_id == inst.dets[i].category_id) gts.push_back(g);
      }
      bool all_tp = true;
      for (double t : iou_thresholds()) {
        for (const auto& m : match_detections(same, gts, t)) {
          if (same[m.det_index] == inst.dets[i] && !m.gt_index) all_tp = false;
        }
      }
      if (!all_tp) continue;
      auto fewer = inst.dets;
      fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(i));
      const auto ap_before = base.per_category.at(inst.dets[i].category_id);
      const auto ap_after = evaluate(fewer, inst.gts, vocab).per_category.at(inst.dets[i].category_id);
      CHECK(*ap_after <= *ap_before + 1e-12);
      break;
    }
  }
}

TEST_CASE("evaluate examples") {
  const auto vocab = toy_vocab();
  std::vector<GroundTruth> gts{gt(Box{0, 0, 10, 10}, 0, 1), gt(Box{20, 20, 30, 35}, 1, 1), gt(Box{5, 5, 9, 9}, 2, 2)};
  std::vector<Detection> perfect;
  for (std::size_t i = 0; i < gts.size(); ++i) perfect.push_back(det(gts[i].box, 0.9, static_cast<int>(i), gts[i].category_id, gts[i].image_id));
  const auto report = evaluate(perfect, gts, vocab);
  for (auto v : {report.ap, report.ap50, report.ap75, report.ap_r, report.ap_c, report.ap_f}) CHECK(*v == doctest::Approx(1.0));
  for (const auto& [k, v] : report.ar) CHECK(*v == doctest::Approx(1.0));

  gts.pop_back();
  perfect.pop_back();
  const auto no_rare = evaluate(perfect, gts, vocab);
  CHECK_FALSE(no_rare.ap_r.has_value());
  CHECK(no_rare.ap_c.has_value());

  perfect.push_back(det(Box{0, 0, 1, 1}, 0.5, 9, 7, 1));
  CHECK_THROWS_AS(evaluate(perfect, gts, vocab), FormatError);
}

TEST_CASE("evaluate matches the from-scratch oracle") {
  const auto vocab = toy_vocab();
  testutil::Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = random_instance(rng);
    const auto report = evaluate(inst.dets, inst.gts, vocab);
    std::vector<std::optional<double>> per_cat;
    for (int c = 0; c < 3; ++c) {
      const auto want = oracle::category_ap(inst.dets, inst.gts, c);
      check_opt(report.per_category.at(c), want);
      per_cat.push_back(want);
    }
    check_opt(report.ap, mean_present(per_cat));
    check_opt(report.ap_f, per_cat[0]);
    check_opt(report.ap_c, per_cat[1]);
    check_opt(report.ap_r, per_cat[2]);
  }
}

TEST_CASE("evaluate caps detections per image") {
  const auto vocab = toy_vocab();
  const std::vector<GroundTruth> gts{gt(Box{0, 0, 10, 10})};
  std::vector<Detection> dets{det(Box{50, 50, 60, 60}, 0.9, 0), det(Box{0, 0, 10, 10}, 0.8, 1)};
  EvalOptions opts;
  opts.max_detections = 1;
  CHECK(*evaluate(dets, gts, vocab, opts).per_category.at(0) == 0.0);
  opts.max_detections = 2;
  CHECK(*evaluate(dets, gts, vocab, opts).per_category.at(0) > 0.0);
}

TEST_CASE("average_recall_at_k examples") {
  const std::vector<GroundTruth> gts{gt(Box{0, 0, 10, 10}), gt(Box{20, 20, 30, 30})};
  const std::vector<ImageProposals> exact{{0, {{gts[0].box, 0.9}, {gts[1].box, 0.8}}}};
  CHECK(*average_recall_at_k(exact, gts, 2) == doctest::Approx(1.0));
  CHECK(*average_recall_at_k(exact, gts, 100) == doctest::Approx(1.0));
  CHECK(*average_recall_at_k(exact, gts, 1) == doctest::Approx(0.5));
  CHECK_FALSE(average_recall_at_k(exact, std::vector<GroundTruth>{}, 1).has_value());
  const std::set<int> none{5};
  CHECK_FALSE(average_recall_at_k(exact, gts, 1, &none).has_value());
}

TEST_CASE("average_recall_at_k matches the oracle and is monotone in k") {
  testutil::Rng rng(61);
  for (int trial = 0; trial < 300; ++trial) {
    const auto inst = random_instance(rng);
    std::vector<ImageProposals> props;
    std::vector<oracle::ScoredBox> flat;
    for (std::int64_t image = 0; image < 2; ++image) {
      ImageProposals ip{image, {}};
      for (const auto& d : inst.dets) {
        if (d.image_id != image) continue;
        ip.boxes.push_back({d.box, d.score});
        flat.push_back({image, d.box, d.score});
      }
      props.push_back(ip);
    }
    std::optional<double> prev;
    for (std::size_t k : {1, 2, 3, 5, 100, 300, 1000}) {
      const auto got = average_recall_at_k(props, inst.gts, k);
      check_opt(got, oracle::ar_at_k(flat, inst.gts, k));
      if (prev && got) CHECK(*prev <= *got + 1e-15);
      prev = got;
    }
  }
}

TEST_CASE("report JSON round trip and layout") {
  const auto vocab = toy_vocab();
  const std::vector<GroundTruth> gts{gt(Box{0, 0, 10, 10}, 0), gt(Box{0, 0, 10, 10}, 1)};
  const std::vector<Detection> dets{det(Box{0, 0, 10, 10}, 0.7, 0, 0), det(Box{1, 0, 10, 10}, 0.6, 0, 1)};
  const auto report = evaluate(dets, gts, vocab);
  const auto json = report_to_json(report);
  CHECK(json.rfind("{\"AP\":", 0) == 0);
  CHECK(json.find("\"APr\":null") != std::string::npos);
  CHECK(json.find("\"AR@100\":") != std::string::npos);
  CHECK(json.find("\"AP_cat_2\":null") != std::string::npos);
  CHECK(report_to_json(report_from_json(json)) == json);
  CHECK_THROWS_AS(report_from_json("{\"bogus\":1}"), FormatError);
  const auto table = report_to_table(report);
  CHECK(table.find("APr") != std::string::npos);
}

TEST_CASE("mean_category_ap averages the requested ids") {
  EvalReport r;
  r.per_category = {{0, 0.5}, {1, std::nullopt}, {2, 1.0}};
  const std::vector<int> ids{0, 1, 2};
  CHECK(*mean_category_ap(r, ids) == doctest::Approx(0.75));
  const std::vector<int> missing{1};
  CHECK_FALSE(mean_category_ap(r, missing).has_value());
}
