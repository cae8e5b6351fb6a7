#include "vild/embedding_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vild/errors.hpp"

namespace vild {

namespace {

constexpr std::array<char, 4> kMagic = {'V', 'L', 'D', 'E'};

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  v = to_little(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("embeddings: truncated binary header");
  return to_little(v);
}

double parse_real(std::string_view text, std::size_t line) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw FormatError("embeddings: line " + std::to_string(line) + ": bad number '" + std::string(text) + "'");
  }
  return value;
}

std::size_t parse_count(std::string_view text, std::string_view key, std::size_t line) {
  if (text.substr(0, key.size()) != key) {
    throw FormatError("embeddings: line " + std::to_string(line) + ": expected '" + std::string(key) + "'");
  }
  text.remove_prefix(key.size());
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError("embeddings: line " + std::to_string(line) + ": bad integer for " + std::string(key));
  }
  return value;
}

EmbeddingTable read_text(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next()) throw FormatError("embeddings: empty file");
  if (line.rfind("tau=", 0) == 0) {
    table.tau = parse_real(std::string_view(line).substr(4), lineno);
    if (!next()) throw FormatError("embeddings: missing header after tau line");
  }
  const auto space = line.find(' ');
  if (space == std::string::npos) throw FormatError("embeddings: line " + std::to_string(lineno) + ": bad header");
  table.dim = parse_count(std::string_view(line).substr(0, space), "dim=", lineno);
  const std::size_t count = parse_count(std::string_view(line).substr(space + 1), "count=", lineno);
  if (table.dim == 0) throw FormatError("embeddings: dim must be positive");
  table.records.reserve(count);
  for (std::size_t r = 0; r < count; ++r) {
    if (!next()) throw FormatError("embeddings: expected " + std::to_string(count) + " records, got " + std::to_string(r));
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("embeddings: line " + std::to_string(lineno) + ": missing tab");
    EmbeddingRecord rec;
    rec.id = line.substr(0, tab);
    std::string_view rest = std::string_view(line).substr(tab + 1);
    rec.values.reserve(table.dim);
    while (true) {
      const auto comma = rest.find(',');
      rec.values.push_back(parse_real(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rec.values.size() != table.dim) {
      throw FormatError("embeddings: line " + std::to_string(lineno) + ": record '" + rec.id + "' has " +
                        std::to_string(rec.values.size()) + " values, header says " + std::to_string(table.dim));
    }
    table.records.push_back(std::move(rec));
  }
  if (next()) throw FormatError("embeddings: line " + std::to_string(lineno) + ": trailing data after records");
  return table;
}

EmbeddingTable read_binary(std::istream& in) {
  EmbeddingTable table;
  table.dim = get_u32(in);
  const std::uint32_t count = get_u32(in);
  if (table.dim == 0) throw FormatError("embeddings: dim must be positive");
  table.records.resize(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    auto& rec = table.records[r];
    rec.id = std::to_string(r);
    rec.values.resize(table.dim);
    for (auto& v : rec.values) {
      std::uint32_t bits = get_u32(in);
      float f;
      std::memcpy(&f, &bits, sizeof f);
      v = f;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("embeddings: trailing bytes in binary file");
  return table;
}

}  // namespace

const EmbeddingRecord* EmbeddingTable::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::vector<const EmbeddingRecord*> EmbeddingTable::find_all(const std::string& id) const {
  std::vector<const EmbeddingRecord*> out;
  for (const auto& r : records) {
    if (r.id == id) out.push_back(&r);
  }
  return out;
}

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 9);
  if (ec != std::errc()) throw NumericalError("format_real: cannot format value");
  return std::string(buf.data(), ptr);
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table, EmbeddingFormat format) {
  for (const auto& r : table.records) {
    if (r.values.size() != table.dim) {
      throw FormatError("embeddings: record '" + r.id + "' does not match dim " + std::to_string(table.dim));
    }
  }
  if (format == EmbeddingFormat::binary) {
    if (table.tau) throw FormatError("embeddings: binary format cannot carry a tau header");
    out.write(kMagic.data(), kMagic.size());
    put_u32(out, static_cast<std::uint32_t>(table.dim));
    put_u32(out, static_cast<std::uint32_t>(table.records.size()));
    for (const auto& r : table.records) {
      for (double v : r.values) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        put_u32(out, bits);
      }
    }
    return;
  }
  if (table.tau) out << "tau=" << format_real(*table.tau) << '\n';
  out << "dim=" << table.dim << " count=" << table.records.size() << '\n';
  for (const auto& r : table.records) {
    if (r.id.find_first_of("\t\n") != std::string::npos) throw FormatError("embeddings: id contains tab or newline");
    out << r.id << '\t';
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (i) out << ',';
      out << format_real(r.values[i]);
    }
    out << '\n';
  }
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::array<char, 4> head{};
  in.read(head.data(), head.size());
  if (in.gcount() == 4 && head == kMagic) return read_binary(in);
  in.clear();
  in.seekg(0);
  if (!in) throw FormatError("embeddings: stream is not seekable");
  return read_text(in);
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table, EmbeddingFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_embeddings(out, table, format);
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return read_embeddings(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace vild
