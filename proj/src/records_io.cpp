#include "vild/records_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "vild/embedding_io.hpp"
#include "vild/errors.hpp"

namespace vild {

using nlohmann::json;

namespace {

// Numbers go out with 9 significant digits.
double r9(double v) {
  const auto text = format_real(v);
  double out = 0.0;
  std::from_chars(text.data(), text.data() + text.size(), out);
  return out;
}

json vec_json(std::span<const double> v) {
  json arr = json::array();
  for (double x : v) arr.push_back(r9(x));
  return arr;
}

json box_json(const Box& b) { return json::array({r9(b.x1), r9(b.y1), r9(b.x2), r9(b.y2)}); }

Box box_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 4) throw FormatError("box must have 4 coordinates");
  Box b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw FormatError("invalid box (need x2 > x1, y2 > y1, finite)");
  return b;
}

template <class Fn>
void for_each_record(std::istream& in, const char* what, Fn fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw FormatError(std::string(what) + ": line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw FormatError(std::string(what) + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

void write_detections(std::ostream& out, const std::vector<Detection>& dets) {
  for (const auto& d : dets) {
    nlohmann::ordered_json j;
    j["image_id"] = d.image_id;
    j["category_id"] = d.category_id;
    j["box"] = box_json(d.box);
    j["score"] = r9(d.score);
    j["source_id"] = d.source_id;
    out << j.dump() << '\n';
  }
}

std::vector<Detection> read_detections(std::istream& in) {
  std::vector<Detection> out;
  for_each_record(in, "detections", [&](const json& j) {
    Detection d;
    d.image_id = j.at("image_id").get<std::int64_t>();
    d.category_id = j.at("category_id").get<int>();
    d.box = box_from(j.at("box"));
    d.score = j.at("score").get<double>();
    d.source_id = j.value("source_id", 0);
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw FormatError("score outside [0,1]");
    out.push_back(d);
  });
  return out;
}

void write_ground_truth(std::ostream& out, const std::vector<GroundTruth>& gts) {
  for (const auto& g : gts) {
    nlohmann::ordered_json j;
    j["image_id"] = g.image_id;
    j["category_id"] = g.category_id;
    j["box"] = box_json(g.box);
    out << j.dump() << '\n';
  }
}

std::vector<GroundTruth> read_ground_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  for_each_record(in, "ground truth", [&](const json& j) {
    out.push_back({j.at("image_id").get<std::int64_t>(), j.at("category_id").get<int>(), box_from(j.at("box"))});
  });
  return out;
}

void write_training_samples(std::ostream& out, const std::vector<TrainingSample>& samples) {
  for (const auto& s : samples) {
    nlohmann::ordered_json j;
    j["image_id"] = s.image_id;
    json online = json::array();
    for (const auto& p : s.online) online.push_back({{"feature", vec_json(p.feature)}, {"label", p.label}});
    json offline = json::array();
    for (const auto& p : s.offline) {
      offline.push_back({{"feature", vec_json(p.feature)}, {"teacher", vec_json(p.teacher.values())}});
    }
    j["online"] = std::move(online);
    j["offline"] = std::move(offline);
    out << j.dump() << '\n';
  }
}

std::vector<TrainingSample> read_training_samples(std::istream& in) {
  std::vector<TrainingSample> out;
  for_each_record(in, "dataset", [&](const json& j) {
    TrainingSample s;
    s.image_id = j.at("image_id").get<std::int64_t>();
    for (const auto& p : j.at("online")) {
      s.online.push_back({p.at("feature").get<std::vector<double>>(), p.at("label").get<int>()});
    }
    for (const auto& p : j.at("offline")) {
      s.offline.push_back({p.at("feature").get<std::vector<double>>(), Embedding(p.at("teacher").get<std::vector<double>>())});
    }
    out.push_back(std::move(s));
  });
  return out;
}

void write_proposals(std::ostream& out, const std::vector<ProposalImage>& images) {
  for (const auto& img : images) {
    nlohmann::ordered_json j;
    j["image_id"] = img.image_id;
    json props = json::array();
    for (const auto& p : img.proposals) {
      props.push_back({{"box", box_json(p.box)}, {"objectness", r9(p.objectness)}, {"feature", vec_json(p.feature)}});
    }
    j["proposals"] = std::move(props);
    out << j.dump() << '\n';
  }
}

std::vector<ProposalImage> read_proposals(std::istream& in) {
  std::vector<ProposalImage> out;
  for_each_record(in, "proposals", [&](const json& j) {
    ProposalImage img;
    img.image_id = j.at("image_id").get<std::int64_t>();
    for (const auto& p : j.at("proposals")) {
      Proposal prop;
      prop.box = box_from(p.at("box"));
      prop.objectness = p.value("objectness", 1.0);
      if (!(prop.objectness >= 0.0 && prop.objectness <= 1.0)) throw FormatError("objectness outside [0,1]");
      prop.feature = p.at("feature").get<std::vector<double>>();
      img.proposals.push_back(std::move(prop));
    }
    out.push_back(std::move(img));
  });
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file '" + path.string() + "'");
  return out;
}

}  // namespace vild
