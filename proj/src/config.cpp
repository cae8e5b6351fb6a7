#include "vild/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "vild/errors.hpp"

namespace vild {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_real(std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + std::string(v) + "'");
  return out;
}

template <class Int>
Int to_int(std::string_view v) {
  Int out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected an integer, got '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true/false, got '" + std::string(v) + "'");
}

void require(bool ok, const char* message) {
  if (!ok) throw ConfigError(message);
}

// Shortest representation that parses back to the same double.
std::string exact(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

using Setter = std::function<void(RunConfig&, std::string_view)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  Setter set;
  Getter get;
};

Key path_key(std::filesystem::path RunConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) { c.*member = std::filesystem::path(std::string(v)); },
          [member](const RunConfig& c) { return (c.*member).string(); }};
}

Key real_key(double RunConfig::*member, std::function<bool(double)> valid, const char* message) {
  return {[=](RunConfig& c, std::string_view v) {
            const double x = to_real(v);
            require(valid(x), message);
            c.*member = x;
          },
          [member](const RunConfig& c) { return exact(c.*member); }};
}

Key synth_real(double SyntheticConfig::*member) {
  return {[member](RunConfig& c, std::string_view v) {
            const double x = to_real(v);
            require(x >= 0.0, "noise levels must be non-negative");
            c.synth.*member = x;
          },
          [member](const RunConfig& c) { return exact(c.synth.*member); }};
}

Key synth_int(int SyntheticConfig::*member, int minimum) {
  return {[=](RunConfig& c, std::string_view v) {
            const int x = to_int<int>(v);
            require(x >= minimum, "value below the allowed minimum");
            c.synth.*member = x;
          },
          [member](const RunConfig& c) { return std::to_string(c.synth.*member); }};
}

Key synth_dim(std::size_t SyntheticConfig::*member, std::size_t minimum) {
  return {[=](RunConfig& c, std::string_view v) {
            const auto x = to_int<std::size_t>(v);
            require(x >= minimum, "dimension below the allowed minimum");
            c.synth.*member = x;
          },
          [member](const RunConfig& c) { return std::to_string(c.synth.*member); }};
}

const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = {
      {"vocab", path_key(&RunConfig::vocab)},
      {"text", path_key(&RunConfig::text)},
      {"data", path_key(&RunConfig::data)},
      {"proposals", path_key(&RunConfig::proposals)},
      {"gt", path_key(&RunConfig::gt)},
      {"head", path_key(&RunConfig::head)},
      {"dets", path_key(&RunConfig::dets)},
      {"report", path_key(&RunConfig::report)},
      {"tau", real_key(&RunConfig::tau, [](double x) { return x > 0.0; }, "tau must be positive")},
      {"w", real_key(&RunConfig::w, [](double x) { return x >= 0.0; }, "w must be non-negative")},
      {"lambda", real_key(&RunConfig::lambda, [](double x) { return x >= 0.0 && x <= 1.0; }, "lambda must be in [0, 1]")},
      {"distill_norm",
       {[](RunConfig& c, std::string_view v) { c.distill_norm = parse_distill_norm(v); },
        [](const RunConfig& c) { return std::string(to_string(c.distill_norm)); }}},
      {"nms_per_class",
       real_key(&RunConfig::nms_per_class, [](double x) { return x > 0.0 && x <= 1.0; }, "nms_per_class must be in (0, 1]")},
      {"nms_agnostic",
       real_key(&RunConfig::nms_agnostic, [](double x) { return x > 0.0 && x <= 1.0; }, "nms_agnostic must be in (0, 1]")},
      {"max_detections",
       {[](RunConfig& c, std::string_view v) {
          c.max_detections = to_int<std::size_t>(v);
          require(c.max_detections >= 1, "max_detections must be at least 1");
        },
        [](const RunConfig& c) { return std::to_string(c.max_detections); }}},
      {"max_proposals",
       {[](RunConfig& c, std::string_view v) {
          c.max_proposals = to_int<std::size_t>(v);
          require(c.max_proposals >= 1, "max_proposals must be at least 1");
        },
        [](const RunConfig& c) { return std::to_string(c.max_proposals); }}},
      {"seed",
       {[](RunConfig& c, std::string_view v) { c.seed = to_int<std::uint64_t>(v); },
        [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"iterations",
       {[](RunConfig& c, std::string_view v) {
          c.iterations = to_int<int>(v);
          require(c.iterations >= 0, "iterations must be non-negative");
        },
        [](const RunConfig& c) { return std::to_string(c.iterations); }}},
      {"learning_rate",
       real_key(&RunConfig::learning_rate, [](double x) { return x > 0.0; }, "learning_rate must be positive")},
      {"inference_vocab",
       {[](RunConfig& c, std::string_view v) { c.inference_vocab = parse_inference_vocab(v); },
        [](const RunConfig& c) { return std::string(to_string(c.inference_vocab)); }}},
      {"ensemble",
       {[](RunConfig& c, std::string_view v) { c.ensemble = to_bool(v); },
        [](const RunConfig& c) { return std::string(c.ensemble ? "true" : "false"); }}},
      {"rescore_objectness",
       {[](RunConfig& c, std::string_view v) { c.rescore_objectness = to_bool(v); },
        [](const RunConfig& c) { return std::string(c.rescore_objectness ? "true" : "false"); }}},
      {"synthetic",
       {[](RunConfig& c, std::string_view v) { c.synthetic = to_bool(v); },
        [](const RunConfig& c) { return std::string(c.synthetic ? "true" : "false"); }}},
      {"synth.num_base", synth_int(&SyntheticConfig::num_base, 1)},
      {"synth.num_novel", synth_int(&SyntheticConfig::num_novel, 0)},
      {"synth.in_dim", synth_dim(&SyntheticConfig::in_dim, 1)},
      {"synth.out_dim", synth_dim(&SyntheticConfig::out_dim, 2)},
      {"synth.train_images", synth_int(&SyntheticConfig::train_images, 1)},
      {"synth.eval_images", synth_int(&SyntheticConfig::eval_images, 0)},
      {"synth.objects_per_image", synth_int(&SyntheticConfig::objects_per_image, 1)},
      {"synth.online_per_image", synth_int(&SyntheticConfig::online_per_image, 1)},
      {"synth.offline_per_image", synth_int(&SyntheticConfig::offline_per_image, 1)},
      {"synth.clutter_prototypes", synth_int(&SyntheticConfig::clutter_prototypes, 1)},
      {"synth.feature_noise", synth_real(&SyntheticConfig::feature_noise)},
      {"synth.text_noise", synth_real(&SyntheticConfig::text_noise)},
      {"synth.teacher_noise", synth_real(&SyntheticConfig::teacher_noise)},
  };
  return table;
}

}  // namespace

std::string_view to_string(InferenceVocab mode) {
  switch (mode) {
    case InferenceVocab::base:
      return "base";
    case InferenceVocab::novel:
      return "novel";
    case InferenceVocab::joint:
      return "joint";
  }
  return "joint";
}

InferenceVocab parse_inference_vocab(std::string_view text) {
  if (text == "base") return InferenceVocab::base;
  if (text == "novel") return InferenceVocab::novel;
  if (text == "joint") return InferenceVocab::joint;
  throw ConfigError("unknown inference vocabulary '" + std::string(text) + "' (expected base, novel or joint)");
}

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::string where = "config line " + std::to_string(lineno) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    const auto& table = keys();
    auto it = std::find_if(table.begin(), table.end(), [&](const auto& k) { return k.first == key; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second.set(cfg, value);
    } catch (const Error& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  cfg.synth.seed = cfg.seed;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, key] : keys()) out += name + "=" + key.get(cfg) + "\n";
  return out;
}

TrainConfig train_config_from(const RunConfig& cfg) {
  TrainConfig t;
  t.tau = cfg.tau;
  t.distill_weight = cfg.w;
  t.distill_norm = cfg.distill_norm;
  t.learning_rate = cfg.learning_rate;
  t.iterations = cfg.iterations;
  t.seed = cfg.seed;
  return t;
}

}  // namespace vild
