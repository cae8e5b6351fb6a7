// Serial reference kernels against their OpenMP counterparts.
// Argument: thread cap for the parallel variants.

#include <benchmark/benchmark.h>

#include <vector>

#include "vild/classifier.hpp"
#include "vild/eval.hpp"
#include "vild/parallel.hpp"
#include "vild/reference.hpp"
#include "vild/synthetic.hpp"
#include "vild/training.hpp"

namespace {

struct Fixture {
  vild::SyntheticBenchmark bench;
  vild::TextClassifier base_clf;
  vild::TextClassifier joint_clf;
  vild::RegionHead head;
  std::vector<std::vector<double>> embeddings;
  std::vector<vild::Detection> dets;
};

vild::TextClassifier make_classifier(const vild::SyntheticBenchmark& b, vild::InferenceVocab mode) {
  std::vector<double> bg(b.text_embeddings.dim, 0.0);
  bg[0] = 1.0;
  return vild::build_classifier(b.vocab, b.text_embeddings, bg, vild::kDefaultTemperature, mode);
}

const Fixture& fixture() {
  static const Fixture f = [] {
    vild::SyntheticConfig cfg;
    cfg.eval_images = 400;
    auto bench = vild::gen_synthetic_benchmark(cfg);
    auto base = make_classifier(bench, vild::InferenceVocab::base);
    auto joint = make_classifier(bench, vild::InferenceVocab::joint);
    auto head = vild::init_head(cfg.in_dim, cfg.out_dim, 1);
    std::vector<std::vector<double>> embeddings;
    std::vector<vild::Region> regions;
    for (const auto& img : bench.eval_proposals) {
      for (std::size_t i = 0; i < img.proposals.size(); ++i) {
        embeddings.push_back(head.embed(img.proposals[i].feature));
        regions.push_back({img.image_id, static_cast<int>(i), img.proposals[i].box, embeddings.back()});
      }
    }
    auto dets = vild::classify_regions(joint, regions);
    return Fixture{std::move(bench), std::move(base), std::move(joint), std::move(head), std::move(embeddings), std::move(dets)};
  }();
  return f;
}

void BM_DatasetLossSerial(benchmark::State& state) {
  const auto& f = fixture();
  const vild::TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(vild::serial::dataset_loss(f.head, f.base_clf, f.bench.train, cfg));
}

void BM_DatasetLossParallel(benchmark::State& state) {
  const auto& f = fixture();
  vild::set_max_threads(static_cast<int>(state.range(0)));
  const vild::TrainConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(vild::dataset_loss(f.head, f.base_clf, f.bench.train, cfg));
}

void BM_ScoreRegionsSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(vild::serial::score_regions(f.joint_clf, f.embeddings));
}

void BM_ScoreRegionsParallel(benchmark::State& state) {
  const auto& f = fixture();
  vild::set_max_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(vild::score_regions(f.joint_clf, f.embeddings));
}

void BM_PerCategoryApSerial(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(vild::serial::per_category_ap(f.dets, f.bench.eval_gt, f.bench.vocab));
}

void BM_PerCategoryApParallel(benchmark::State& state) {
  const auto& f = fixture();
  vild::set_max_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(vild::per_category_ap(f.dets, f.bench.eval_gt, f.bench.vocab));
}

}  // namespace

BENCHMARK(BM_DatasetLossSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DatasetLossParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreRegionsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreRegionsParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PerCategoryApSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PerCategoryApParallel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
