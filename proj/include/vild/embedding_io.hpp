#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vild {

struct EmbeddingRecord {
  std::string id;
  std::vector<double> values;

  friend bool operator==(const EmbeddingRecord&, const EmbeddingRecord&) = default;
};

// In-memory form of an embedding file: one shared dimension, ordered records.
// Ids may repeat (e.g. one record per prompt of the same category).
struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<EmbeddingRecord> records;
  // Optional `tau=<float>` line preceding the header (classifier bundles).
  std::optional<double> tau;

  const EmbeddingRecord* find(const std::string& id) const;
  std::vector<const EmbeddingRecord*> find_all(const std::string& id) const;

  friend bool operator==(const EmbeddingTable&, const EmbeddingTable&) = default;
};

enum class EmbeddingFormat { text, binary };

// Text:   [tau=<t>\n] dim=<D> count=<N>\n then N lines `id<TAB>v,v,...`
// Binary: "VLDE", u32 dim, u32 count, count*dim little-endian f32. Binary records
//         carry no ids; they are read back with ids "0".."count-1" unless the
//         caller supplies names.
void write_embeddings(std::ostream& out, const EmbeddingTable& table, EmbeddingFormat format);
EmbeddingTable read_embeddings(std::istream& in);

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table,
                     EmbeddingFormat format);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

// Formats a double with 9 significant digits (shortest form that fits).
std::string format_real(double value);

}  // namespace vild
