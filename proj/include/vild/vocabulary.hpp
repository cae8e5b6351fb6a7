#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vild {

enum class Split { base, novel };
enum class Frequency { rare, common, frequent };

std::string_view to_string(Split split);
std::string_view to_string(Frequency frequency);
Split parse_split(std::string_view text);
Frequency parse_frequency(std::string_view text);

struct Category {
  int id = 0;
  std::string name;
  std::vector<std::string> synonyms;
  Split split = Split::base;
  Frequency frequency = Frequency::frequent;

  friend bool operator==(const Category&, const Category&) = default;
};

// Category order is the canonical index order of every score vector.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<Category> categories,
                      std::map<std::string, std::vector<std::string>> attribute_sets = {});

  const std::vector<Category>& categories() const noexcept { return categories_; }
  const std::map<std::string, std::vector<std::string>>& attribute_sets() const noexcept {
    return attribute_sets_;
  }
  std::size_t size() const noexcept { return categories_.size(); }

  const Category& by_id(int id) const;
  std::optional<std::size_t> index_of(int id) const;
  bool contains(int id) const { return index_of(id).has_value(); }

  std::vector<int> ids() const;
  std::vector<int> ids_where(Split split) const;
  std::vector<int> ids_where(Frequency frequency) const;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<Category> categories_;
  std::map<std::string, std::vector<std::string>> attribute_sets_;
  std::map<int, std::size_t> index_;
};

// One JSON object per line: {id, name, synonyms, split, frequency}.
void write_vocabulary(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocabulary(std::istream& in);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocabulary(const std::filesystem::path& path);

}  // namespace vild
