// vild: command-line front end for the open-vocabulary detection pipeline.

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vild/classifier.hpp"
#include "vild/config.hpp"
#include "vild/embedding_io.hpp"
#include "vild/errors.hpp"
#include "vild/eval.hpp"
#include "vild/parallel.hpp"
#include "vild/pipeline.hpp"
#include "vild/postprocess.hpp"
#include "vild/prompts.hpp"
#include "vild/records_io.hpp"
#include "vild/synthetic.hpp"
#include "vild/training.hpp"
#include "vild/vocabulary.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using namespace vild;

namespace {

EmbeddingFormat parse_format(const std::string& s) {
  if (s == "text") return EmbeddingFormat::text;
  if (s == "binary") return EmbeddingFormat::binary;
  throw ConfigError("unknown embedding format '" + s + "' (expected text or binary)");
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void require_path(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("missing required path: ") + what);
}

std::vector<Detection> load_detections(const fs::path& p) {
  return load_file<std::vector<Detection>>(p, [](std::istream& in) { return read_detections(in); });
}

void save_detections(const fs::path& p, const std::vector<Detection>& dets) {
  auto out = open_output(p);
  write_detections(out, dets);
}

std::set<int> load_id_set(const fs::path& p) {
  auto in = open_input(p);
  std::set<int> ids;
  std::string tok;
  std::size_t line = 0;
  while (in >> tok) {
    ++line;
    try {
      std::size_t used = 0;
      const int id = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      ids.insert(id);
    } catch (const std::exception&) {
      throw FormatError(p.string() + ": token " + std::to_string(line) + " ('" + tok + "') is not a category id");
    }
  }
  return ids;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long v = std::stol(item);
      if (v < 1) throw std::out_of_range(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("--ar-ks: bad value '" + item + "'");
    }
  }
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_env();

  CLI::App app{"Open-vocabulary detection via vision-language distillation on precomputed embeddings"};
  app.require_subcommand(1);

  // compose-text
  auto* compose_text = app.add_subcommand("compose-text", "Render prompts, or average per-prompt text embeddings");
  std::string ct_vocab, ct_prompts_out, ct_in, ct_out, ct_format = "text";
  compose_text->add_option("--vocab", ct_vocab, "Vocabulary JSONL (with --prompts-out)");
  compose_text->add_option("--prompts-out", ct_prompts_out, "Write `<id>\\t<prompt>` lines for every category");
  compose_text->add_option("--in", ct_in, "Per-prompt embeddings keyed by category id");
  compose_text->add_option("--out", ct_out, "Composed text embeddings");
  compose_text->add_option("--format", ct_format, "text or binary")->capture_default_str();

  // compose-crops
  auto* compose_crops = app.add_subcommand("compose-crops", "Ensemble 1x and 1.5x crop embeddings");
  std::string cc_1x, cc_15x, cc_out, cc_format = "text";
  compose_crops->add_option("--crops-1x", cc_1x)->required();
  compose_crops->add_option("--crops-1.5x", cc_15x)->required();
  compose_crops->add_option("--out", cc_out)->required();
  compose_crops->add_option("--format", cc_format)->capture_default_str();

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Write a seeded synthetic base/novel benchmark");
  std::string gen_config, gen_dir;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("--config", gen_config, "Config file (synth.* keys)");
  gen->add_option("--out-dir", gen_dir)->required();
  gen->add_option("--seed", gen_seed)->each([&](const std::string&) { gen_seed_set = true; });

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a region head");
  std::string tr_config, tr_data, tr_out, tr_format = "binary", tr_log;
  train_cmd->add_option("--config", tr_config)->required();
  train_cmd->add_option("--data", tr_data, "Training samples JSONL (overrides config `data`)");
  train_cmd->add_option("--out", tr_out, "Head file (overrides config `head`)");
  train_cmd->add_option("--format", tr_format)->capture_default_str();
  train_cmd->add_option("--loss-log", tr_log, "Write the per-iteration loss log here");

  // infer
  auto* infer_cmd = app.add_subcommand("infer", "Detect with a trained head and text embeddings");
  std::string in_config, in_head, in_proposals, in_out, in_classifier;
  bool in_raw = false;
  infer_cmd->add_option("--config", in_config);
  infer_cmd->add_option("--head", in_head)->required();
  infer_cmd->add_option("--proposals", in_proposals, "Proposals JSONL (overrides config)");
  infer_cmd->add_option("--classifier", in_classifier, "Classifier bundle (tau + text + background)");
  infer_cmd->add_option("--out", in_out)->required();
  infer_cmd->add_flag("--raw", in_raw, "Skip per-class NMS and the top-k cut");

  // ensemble
  auto* ens = app.add_subcommand("ensemble", "Weighted geometric-mean ensemble of two detection files");
  std::string en_a, en_b, en_base, en_out;
  double en_lambda = kDefaultEnsembleLambda;
  bool en_finalize = false;
  ens->add_option("--a", en_a, "First detections (text head)")->required();
  ens->add_option("--b", en_b, "Second detections (teacher or image head)")->required();
  ens->add_option("--lambda", en_lambda)->capture_default_str();
  ens->add_option("--base-ids", en_base, "Whitespace-separated base category ids")->required();
  ens->add_option("--out", en_out)->required();
  ens->add_flag("--finalize", en_finalize, "Apply per-class NMS and the top-300 cut afterwards");

  // expand-vocab
  auto* expand = app.add_subcommand("expand-vocab", "Joint category x attribute probabilities per region");
  std::string ex_head, ex_vocab_text, ex_attr_text, ex_proposals, ex_out;
  double ex_tau = kDefaultTemperature;
  expand->add_option("--head", ex_head)->required();
  expand->add_option("--vocab-text", ex_vocab_text, "Text embeddings of the vocabulary")->required();
  expand->add_option("--attr-text", ex_attr_text, "Text embeddings of the attributes")->required();
  expand->add_option("--proposals", ex_proposals)->required();
  expand->add_option("--tau", ex_tau)->capture_default_str();
  expand->add_option("--out", ex_out)->required();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Box AP / AR evaluation");
  std::string ev_dets, ev_gt, ev_vocab, ev_ks = "100,300,1000", ev_proposals, ev_json;
  eval_cmd->add_option("--dets", ev_dets)->required();
  eval_cmd->add_option("--gt", ev_gt)->required();
  eval_cmd->add_option("--vocab", ev_vocab)->required();
  eval_cmd->add_option("--ar-ks", ev_ks)->capture_default_str();
  eval_cmd->add_option("--proposals", ev_proposals, "Proposals for AR (default: the detections' boxes)");
  eval_cmd->add_option("--json-out", ev_json, "Also write the report JSON here");

  // run
  auto* run_cmd = app.add_subcommand("run", "compose -> train -> infer -> (ensemble) -> finalize -> eval");
  std::string run_config, run_report;
  run_cmd->add_option("--config", run_config)->required();
  run_cmd->add_option("--report", run_report, "Report JSON path (overrides config `report`)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::config);
  }

  try {
    if (*compose_text) {
      if (!ct_prompts_out.empty()) {
        require_path(ct_vocab, "--vocab");
        const auto vocab = load_vocabulary(ct_vocab);
        auto out = open_output(ct_prompts_out);
        for (const auto& c : vocab.categories()) {
          for (const auto& p : render_prompts(c.name, c.synonyms)) out << c.id << '\t' << p << '\n';
        }
      }
      if (!ct_in.empty()) {
        require_path(ct_out, "--out");
        save_embeddings(ct_out, compose_text_table(load_embeddings(ct_in)), parse_format(ct_format));
      }
      if (ct_prompts_out.empty() && ct_in.empty()) throw ConfigError("compose-text needs --prompts-out or --in");
    } else if (*compose_crops) {
      save_embeddings(cc_out, compose_crop_table(load_embeddings(cc_1x), load_embeddings(cc_15x)), parse_format(cc_format));
    } else if (*gen) {
      auto cfg = config_or_default(gen_config);
      if (gen_seed_set) cfg.seed = gen_seed;
      cfg.synth.seed = cfg.seed;
      const auto bench = gen_synthetic_benchmark(cfg.synth);
      const fs::path dir(gen_dir);
      fs::create_directories(dir);
      save_vocabulary(dir / "vocab.jsonl", bench.vocab);
      save_embeddings(dir / "text.emb", bench.text_embeddings, EmbeddingFormat::text);
      {
        auto out = open_output(dir / "train.jsonl");
        write_training_samples(out, bench.train);
      }
      {
        auto out = open_output(dir / "proposals.jsonl");
        write_proposals(out, bench.eval_proposals);
      }
      {
        auto out = open_output(dir / "gt.jsonl");
        write_ground_truth(out, bench.eval_gt);
      }
      {
        auto out = open_output(dir / "base_ids.txt");
        for (int id : bench.vocab.ids_where(Split::base)) out << id << '\n';
      }
      std::cout << "wrote synthetic benchmark to " << dir.string() << "\n";
    } else if (*train_cmd) {
      auto cfg = load_config(tr_config);
      if (!tr_data.empty()) cfg.data = tr_data;
      if (!tr_out.empty()) cfg.head = tr_out;
      require_path(cfg.vocab, "vocab");
      require_path(cfg.text, "text");
      require_path(cfg.data, "data");
      require_path(cfg.head, "head (--out)");
      const auto vocab = load_vocabulary(cfg.vocab);
      const auto text = compose_text_table(load_embeddings(cfg.text));
      const auto samples = load_file<std::vector<TrainingSample>>(cfg.data, [](std::istream& in) { return read_training_samples(in); });
      std::vector<double> placeholder(text.dim, 0.0);
      placeholder[0] = 1.0;
      const auto base_clf = build_classifier(vocab, text, placeholder, cfg.tau, InferenceVocab::base);
      const auto result = train(samples, base_clf, train_config_from(cfg));
      save_embeddings(cfg.head, head_to_table(result.head), parse_format(tr_format));
      if (!tr_log.empty()) {
        auto out = open_output(tr_log);
        for (std::size_t i = 0; i < result.loss_log.size(); ++i) out << i << '\t' << format_real(result.loss_log[i]) << '\n';
      }
      if (!result.loss_log.empty()) {
        std::cerr << "loss " << result.loss_log.front() << " -> " << result.loss_log.back() << "\n";
      }
    } else if (*infer_cmd) {
      auto cfg = config_or_default(in_config);
      if (!in_proposals.empty()) cfg.proposals = in_proposals;
      require_path(cfg.proposals, "proposals");
      const auto head = head_from_table(load_embeddings(in_head));
      TextClassifier clf = [&] {
        if (!in_classifier.empty()) return from_bundle(load_embeddings(in_classifier));
        require_path(cfg.vocab, "vocab");
        require_path(cfg.text, "text");
        return build_classifier(load_vocabulary(cfg.vocab), compose_text_table(load_embeddings(cfg.text)), head.background,
                                cfg.tau, cfg.inference_vocab);
      }();
      const auto images = load_file<std::vector<ProposalImage>>(cfg.proposals, [](std::istream& in) { return read_proposals(in); });
      InferOptions options;
      options.agnostic_nms = cfg.nms_agnostic;
      options.max_proposals = cfg.max_proposals;
      options.rescore_objectness = cfg.rescore_objectness;
      options.per_class_nms = cfg.nms_per_class;
      options.max_detections = cfg.max_detections;
      options.finalize = !in_raw;
      save_detections(in_out, infer_detections(head, clf, images, options));
    } else if (*ens) {
      EnsembleConfig cfg;
      cfg.lambda = en_lambda;
      if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) throw ConfigError("--lambda must be in [0, 1]");
      cfg.base_ids = load_id_set(en_base);
      auto dets = ensemble_detections(load_detections(en_a), load_detections(en_b), cfg);
      if (en_finalize) dets = finalize(dets);
      save_detections(en_out, dets);
    } else if (*expand) {
      const auto head = head_from_table(load_embeddings(ex_head));
      auto classifier_from = [&](const EmbeddingTable& t) {
        const auto composed = compose_text_table(t);
        std::vector<int> ids;
        std::vector<Embedding> embeddings;
        for (std::size_t i = 0; i < composed.records.size(); ++i) {
          ids.push_back(static_cast<int>(i));
          embeddings.push_back(l2_normalize(composed.records[i].values));
        }
        return std::pair{TextClassifier(ids, embeddings, head.background, ex_tau), composed};
      };
      const auto [vocab_clf, vocab_table] = classifier_from(load_embeddings(ex_vocab_text));
      const auto [attr_clf, attr_table] = classifier_from(load_embeddings(ex_attr_text));
      const auto images = load_file<std::vector<ProposalImage>>(ex_proposals, [](std::istream& in) { return read_proposals(in); });
      auto out = open_output(ex_out);
      for (const auto& img : images) {
        for (std::size_t i = 0; i < img.proposals.size(); ++i) {
          const auto m = expand_vocabulary(vocab_clf, attr_clf, head.embed(img.proposals[i].feature));
          nlohmann::ordered_json j;
          j["image_id"] = img.image_id;
          j["source_id"] = i;
          std::vector<std::string> rows, cols;
          for (const auto& r : vocab_table.records) rows.push_back(r.id);
          for (const auto& r : attr_table.records) cols.push_back(r.id);
          j["vocab"] = rows;
          j["attributes"] = cols;
          auto probs = nlohmann::ordered_json::array();
          for (std::size_t r = 0; r < m.rows; ++r) {
            auto row = nlohmann::ordered_json::array();
            for (std::size_t c = 0; c < m.cols; ++c) row.push_back(std::stod(format_real(m.at(r, c))));
            probs.push_back(row);
          }
          j["probs"] = probs;
          out << j.dump() << '\n';
        }
      }
    } else if (*eval_cmd) {
      const auto vocab = load_vocabulary(ev_vocab);
      const auto dets = load_detections(ev_dets);
      const auto gts = load_file<std::vector<GroundTruth>>(ev_gt, [](std::istream& in) { return read_ground_truth(in); });
      EvalOptions options;
      options.ar_ks = parse_ks(ev_ks);
      std::vector<ImageProposals> proposals;
      if (!ev_proposals.empty()) {
        const auto images = load_file<std::vector<ProposalImage>>(ev_proposals, [](std::istream& in) { return read_proposals(in); });
        for (const auto& img : images) {
          ImageProposals ip{img.image_id, {}};
          for (const auto& p : img.proposals) ip.boxes.push_back({p.box, p.objectness});
          proposals.push_back(std::move(ip));
        }
      }
      const auto report = evaluate(dets, gts, vocab, options, proposals);
      const auto json = report_to_json(report);
      if (!ev_json.empty()) {
        auto out = open_output(ev_json);
        out << json << '\n';
      }
      std::cout << json << '\n' << report_to_table(report);
    } else if (*run_cmd) {
      auto cfg = load_config(run_config);
      if (!run_report.empty()) cfg.report = run_report;
      const auto result = run_pipeline(cfg, std::cerr);
      std::cout << result.report_json << '\n' << report_to_table(result.report);
    }
  } catch (const Error& e) {
    std::cerr << "vild: error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "vild: error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::failure);
  }
  return 0;
}
