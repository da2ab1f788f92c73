#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "levelcg/errors.hpp"

namespace levelcg {

inline constexpr std::string_view kSchemaPrefix = "levelcg.";
inline constexpr int kSchemaVersion = 1;

/// "levelcg.<name>/<version>"
inline std::string schema_id(std::string_view name) {
  return std::string(kSchemaPrefix) + std::string(name) + "/" + std::to_string(kSchemaVersion);
}

/// Shortest round-trip decimal form; identical bits give identical text.
inline std::string format_number(double x) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw Error(ErrorCode::Io, "number formatting failed");
  return std::string(buf, ptr);
}

using CsvCell = std::variant<double, std::int64_t, std::string>;

/// CSV file with a `#` comment header: schema id, then the run configuration
/// verbatim, then one column-name line.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view schema, std::string_view config_text,
            const std::vector<std::string>& columns)
      : path_(path), columns_(columns.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out_ << "# schema: " << schema_id(schema) << '\n';
    write_config(config_text);
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
  }

  void row(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_) throw Error(ErrorCode::Io, "row width differs from header in " + path_.string());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      std::visit(
          [this](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out_ << format_number(v);
            } else {
              out_ << v;
            }
          },
          cells[i]);
    }
    out_ << '\n';
    ++rows_;
  }

  std::size_t rows() const noexcept { return rows_; }

  /// Flushes and verifies the stream.
  void close() {
    out_.close();
    if (!out_) throw Error(ErrorCode::Io, "failed writing " + path_.string());
  }

 private:
  void write_config(std::string_view text) {
    out_ << "# config:\n";
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) out_ << "#   " << line << '\n';
  }

  std::filesystem::path path_;
  std::size_t columns_;
  std::size_t rows_ = 0;
  std::ofstream out_;
};

/// JSON document {"schema", "config", ...body}.
inline void write_json(const std::filesystem::path& path, std::string_view schema, std::string_view config_text,
                       const nlohmann::ordered_json& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json doc;
  doc["schema"] = schema_id(schema);
  doc["config"] = std::string(config_text);
  for (const auto& [k, v] : body.items()) doc[k] = v;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << doc.dump(2) << '\n';
  out.close();
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

/// Lines of a CSV file with the comment header removed.
inline std::vector<std::string> read_csv_body(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace levelcg
