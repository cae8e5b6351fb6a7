#include "vild/pipeline.hpp"

#include <map>
#include <ostream>
#include <string>

#include "vild/errors.hpp"
#include "vild/parallel.hpp"
#include "vild/postprocess.hpp"
#include "vild/synthetic.hpp"

namespace vild {

namespace {

template <class Fn>
auto stage(const char* name, std::ostream& log, Fn fn) -> decltype(fn()) {
  log << "[" << name << "]\n";
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage '") + name + "': " + e.what());
  } catch (const std::exception& e) {
    throw Error(ExitCode::failure, std::string("stage '") + name + "': " + e.what());
  }
}

std::vector<Detection> infer_image(const RegionHead& head, const TextClassifier& clf, const ProposalImage& image,
                                   const InferOptions& options) {
  std::vector<Detection> candidates;
  candidates.reserve(image.proposals.size());
  for (std::size_t i = 0; i < image.proposals.size(); ++i) {
    candidates.push_back({image.image_id, 0, image.proposals[i].box, image.proposals[i].objectness, static_cast<int>(i)});
  }
  const auto kept = nms(candidates, options.agnostic_nms, true, options.max_proposals);

  std::vector<Region> regions;
  regions.reserve(kept.size());
  for (const auto& k : kept) {
    const auto& p = image.proposals[static_cast<std::size_t>(k.source_id)];
    regions.push_back({image.image_id, k.source_id, p.box, head.embed(p.feature)});
  }
  auto dets = classify_regions(clf, regions);
  if (options.rescore_objectness) {
    for (auto& d : dets) d.score = objectness_rescore(d.score, image.proposals[static_cast<std::size_t>(d.source_id)].objectness);
  }
  if (options.finalize) return finalize(dets, options.max_detections, options.per_class_nms);
  return dets;
}

std::vector<ImageProposals> scored_proposals(std::span<const ProposalImage> images) {
  std::vector<ImageProposals> out;
  for (const auto& img : images) {
    ImageProposals ip{img.image_id, {}};
    for (const auto& p : img.proposals) ip.boxes.push_back({p.box, p.objectness});
    out.push_back(std::move(ip));
  }
  return out;
}

// Placeholder background for the training-time classifier; training reads the
// background from the head.
std::vector<double> unit_axis(std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  v[0] = 1.0;
  return v;
}

}  // namespace

std::vector<Detection> infer_detections(const RegionHead& head, const TextClassifier& clf,
                                        std::span<const ProposalImage> images, const InferOptions& options) {
  if (clf.dim() != head.out_dim) throw FormatError("infer: classifier dim does not match head output dim");
  std::vector<std::vector<Detection>> per_image(images.size());
  std::vector<std::string> errors(images.size());
  std::vector<int> codes(images.size(), 0);
  const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(dynamic) num_threads(max_threads())
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      per_image[i] = infer_image(head, clf, images[i], options);
    } catch (const Error& e) {
      errors[i] = e.what();
      codes[i] = static_cast<int>(e.code());
    }
  }
  std::vector<Detection> out;
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    if (codes[i] != 0) throw Error(static_cast<ExitCode>(codes[i]), errors[i]);
    out.insert(out.end(), per_image[i].begin(), per_image[i].end());
  }
  return out;
}

EmbeddingTable compose_text_table(const EmbeddingTable& per_prompt) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<Embedding>> groups;
  for (const auto& r : per_prompt.records) {
    auto [it, inserted] = groups.try_emplace(r.id);
    if (inserted) order.push_back(r.id);
    it->second.push_back(l2_normalize(r.values));
  }
  EmbeddingTable out;
  out.dim = per_prompt.dim;
  for (const auto& id : order) {
    const auto e = compose_text_embedding(groups.at(id));
    out.records.push_back({id, {e.values().begin(), e.values().end()}});
  }
  return out;
}

EmbeddingTable compose_crop_table(const EmbeddingTable& crops_1x, const EmbeddingTable& crops_1_5x) {
  if (crops_1x.dim != crops_1_5x.dim) throw FormatError("compose-crops: tables have different dimensions");
  EmbeddingTable out;
  out.dim = crops_1x.dim;
  for (const auto& r : crops_1x.records) {
    const auto* other = crops_1_5x.find(r.id);
    if (!other) throw FormatError("compose-crops: record '" + r.id + "' missing from the 1.5x table");
    const auto e = compose_crop_ensemble(Embedding(r.values), Embedding(other->values));
    out.records.push_back({r.id, {e.values().begin(), e.values().end()}});
  }
  return out;
}

PipelineResult run_pipeline(const RunConfig& cfg, std::ostream& log) {
  Vocabulary vocab;
  EmbeddingTable text;
  std::vector<TrainingSample> train_set;
  std::vector<ProposalImage> eval_images;
  std::vector<GroundTruth> gts;

  stage("load", log, [&] {
    if (cfg.synthetic) {
      auto synth = cfg.synth;
      synth.seed = cfg.seed;
      auto bench = gen_synthetic_benchmark(synth);
      vocab = std::move(bench.vocab);
      text = std::move(bench.text_embeddings);
      train_set = std::move(bench.train);
      eval_images = std::move(bench.eval_proposals);
      gts = std::move(bench.eval_gt);
      log << "  generated synthetic benchmark (seed " << cfg.seed << ")\n";
      return;
    }
    vocab = load_vocabulary(cfg.vocab);
    text = load_embeddings(cfg.text);
    train_set = load_file<std::vector<TrainingSample>>(cfg.data, [](std::istream& in) { return read_training_samples(in); });
    eval_images = load_file<std::vector<ProposalImage>>(cfg.proposals, [](std::istream& in) { return read_proposals(in); });
    gts = load_file<std::vector<GroundTruth>>(cfg.gt, [](std::istream& in) { return read_ground_truth(in); });
  });

  text = stage("compose", log, [&] { return compose_text_table(text); });

  const TrainConfig train_cfg = train_config_from(cfg);
  auto train_head = [&](const TrainConfig& tc, const char* label) {
    const auto base_clf = build_classifier(vocab, text, unit_axis(text.dim), tc.tau, InferenceVocab::base);
    auto result = train(train_set, base_clf, tc);
    log << "  " << label << ": loss " << result.loss_log.front() << " -> " << result.loss_log.back() << "\n";
    return result.head;
  };

  InferOptions infer_options;
  infer_options.agnostic_nms = cfg.nms_agnostic;
  infer_options.max_proposals = cfg.max_proposals;
  infer_options.rescore_objectness = cfg.rescore_objectness;
  infer_options.per_class_nms = cfg.nms_per_class;
  infer_options.max_detections = cfg.max_detections;

  std::vector<Detection> dets;
  if (!cfg.ensemble) {
    const auto head = stage("train", log, [&] { return train_head(train_cfg, cfg.w == 0.0 ? "vild-text" : "vild"); });
    if (!cfg.head.empty()) save_embeddings(cfg.head, head_to_table(head), EmbeddingFormat::binary);
    dets = stage("infer", log, [&] {
      const auto clf = build_classifier(vocab, text, head.background, cfg.tau, cfg.inference_vocab);
      return infer_detections(head, clf, eval_images, infer_options);
    });
  } else {
    auto text_cfg = train_cfg;
    text_cfg.distill_weight = 0.0;
    auto image_cfg = train_cfg;
    image_cfg.text_weight = 0.0;
    image_cfg.distill_weight = 1.0;
    const auto text_head = stage("train", log, [&] { return train_head(text_cfg, "vild-text head"); });
    const auto image_head = stage("train", log, [&] { return train_head(image_cfg, "vild-image head"); });
    if (!cfg.head.empty()) save_embeddings(cfg.head, head_to_table(text_head), EmbeddingFormat::binary);
    infer_options.finalize = false;
    const auto clf = build_classifier(vocab, text, text_head.background, cfg.tau, cfg.inference_vocab);
    const auto dets_a = stage("infer", log, [&] { return infer_detections(text_head, clf, eval_images, infer_options); });
    const auto dets_b = stage("infer", log, [&] { return infer_detections(image_head, clf, eval_images, infer_options); });
    dets = stage("ensemble", log, [&] {
      EnsembleConfig ecfg;
      ecfg.lambda = cfg.lambda;
      for (int id : vocab.ids_where(Split::base)) ecfg.base_ids.insert(id);
      return ensemble_detections(dets_a, dets_b, ecfg);
    });
    dets = stage("finalize", log, [&] { return finalize(dets, cfg.max_detections, cfg.nms_per_class); });
  }
  if (!cfg.dets.empty()) {
    auto out = open_output(cfg.dets);
    write_detections(out, dets);
  }

  PipelineResult result;
  result.report = stage("eval", log, [&] {
    EvalOptions options;
    options.max_detections = cfg.max_detections;
    const auto proposals = scored_proposals(eval_images);
    return evaluate(dets, gts, vocab, options, proposals);
  });
  result.report_json = report_to_json(result.report);
  if (!cfg.report.empty()) {
    auto out = open_output(cfg.report);
    out << result.report_json << '\n';
  }
  result.detections = std::move(dets);
  return result;
}

}  // namespace vild
