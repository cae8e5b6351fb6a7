#include "vild/vocabulary.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "vild/errors.hpp"

namespace vild {

using nlohmann::json;

std::string_view to_string(Split split) { return split == Split::base ? "base" : "novel"; }

std::string_view to_string(Frequency frequency) {
  switch (frequency) {
    case Frequency::rare:
      return "rare";
    case Frequency::common:
      return "common";
    case Frequency::frequent:
      return "frequent";
  }
  return "frequent";
}

Split parse_split(std::string_view text) {
  if (text == "base") return Split::base;
  if (text == "novel") return Split::novel;
  throw FormatError("unknown split '" + std::string(text) + "'");
}

Frequency parse_frequency(std::string_view text) {
  // LVIS abbreviations are accepted too.
  if (text == "rare" || text == "r") return Frequency::rare;
  if (text == "common" || text == "c") return Frequency::common;
  if (text == "frequent" || text == "f") return Frequency::frequent;
  throw FormatError("unknown frequency '" + std::string(text) + "'");
}

Vocabulary::Vocabulary(std::vector<Category> categories,
                       std::map<std::string, std::vector<std::string>> attribute_sets)
    : categories_(std::move(categories)), attribute_sets_(std::move(attribute_sets)) {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const auto& c = categories_[i];
    if (c.id < 0) throw FormatError("vocabulary: negative category id " + std::to_string(c.id));
    if (c.name.empty()) throw FormatError("vocabulary: category " + std::to_string(c.id) + " has an empty name");
    if (!index_.emplace(c.id, i).second) throw FormatError("vocabulary: duplicate category id " + std::to_string(c.id));
  }
}

const Category& Vocabulary::by_id(int id) const {
  auto idx = index_of(id);
  if (!idx) throw FormatError("vocabulary: unknown category id " + std::to_string(id));
  return categories_[*idx];
}

std::optional<std::size_t> Vocabulary::index_of(int id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> Vocabulary::ids() const {
  std::vector<int> out;
  for (const auto& c : categories_) out.push_back(c.id);
  return out;
}

std::vector<int> Vocabulary::ids_where(Split split) const {
  std::vector<int> out;
  for (const auto& c : categories_) {
    if (c.split == split) out.push_back(c.id);
  }
  return out;
}

std::vector<int> Vocabulary::ids_where(Frequency frequency) const {
  std::vector<int> out;
  for (const auto& c : categories_) {
    if (c.frequency == frequency) out.push_back(c.id);
  }
  return out;
}

void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (const auto& c : vocab.categories()) {
    json j = {{"id", c.id},
              {"name", c.name},
              {"synonyms", c.synonyms},
              {"split", to_string(c.split)},
              {"frequency", to_string(c.frequency)}};
    out << j.dump() << '\n';
  }
}

Vocabulary read_vocabulary(std::istream& in) {
  std::vector<Category> cats;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Category c;
      c.id = j.at("id").get<int>();
      c.name = j.at("name").get<std::string>();
      if (j.contains("synonyms")) c.synonyms = j.at("synonyms").get<std::vector<std::string>>();
      c.split = parse_split(j.at("split").get<std::string>());
      c.frequency = parse_frequency(j.at("frequency").get<std::string>());
      cats.push_back(std::move(c));
    } catch (const json::exception& e) {
      throw FormatError("vocabulary: line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("vocabulary: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return Vocabulary(std::move(cats));
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_vocabulary(out, vocab);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary file '" + path.string() + "'");
  try {
    return read_vocabulary(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace vild
