#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace openrates {

using Json = nlohmann::ordered_json;

/// 17 significant digits round-trips any double exactly.
inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

using CsvCell = std::variant<long, double, std::string>;

inline std::string format_cell(const CsvCell& c) {
  if (std::holds_alternative<long>(c)) return std::to_string(std::get<long>(c));
  if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
  return std::get<std::string>(c);
}

/// CSV table with `#`-prefixed header comment lines carrying the schema
/// version and the resolved configuration that produced the data.
class CsvWriter {
 public:
  CsvWriter(std::vector<std::string> columns, const Json& resolved_config,
            const std::string& schema = "openrates-csv-1")
      : columns_(std::move(columns)) {
    comments_.push_back("# schema: " + schema);
    comments_.push_back("# config: " + resolved_config.dump());
  }

  void add_row(std::vector<CsvCell> row) {
    if (row.size() != columns_.size())
      throw std::invalid_argument("CsvWriter: row arity mismatch");
    rows_.push_back(std::move(row));
  }

  std::string str() const {
    std::string out;
    for (auto& c : comments_) out += c + "\n";
    for (size_t i = 0; i < columns_.size(); ++i)
      out += (i ? "," : "") + columns_[i];
    out += "\n";
    for (auto& row : rows_) {
      for (size_t i = 0; i < row.size(); ++i)
        out += (i ? "," : "") + format_cell(row[i]);
      out += "\n";
    }
    return out;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
    f << str();
  }

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> comments_;
  std::vector<std::vector<CsvCell>> rows_;
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << j.dump(2) << "\n";
}

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  Json j;
  f >> j;
  return j;
}

/// Minimal severity-filtered logger controlled by OPENRATES_LOG
/// (error < warn < info < debug, default warn).
class Logger {
 public:
  enum Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

  static Level level() {
    static Level lv = [] {
      const char* e = std::getenv("OPENRATES_LOG");
      std::string s = e ? e : "warn";
      if (s == "error") return kError;
      if (s == "info") return kInfo;
      if (s == "debug") return kDebug;
      return kWarn;
    }();
    return lv;
  }

  static void log(Level lv, const std::string& msg) {
    static const char* names[] = {"error", "warn", "info", "debug"};
    if (lv <= level()) std::fprintf(stderr, "[%s] %s\n", names[lv], msg.c_str());
  }

  static void error(const std::string& m) { log(kError, m); }
  static void warn(const std::string& m) { log(kWarn, m); }
  static void info(const std::string& m) { log(kInfo, m); }
  static void debug(const std::string& m) { log(kDebug, m); }
};

}  // namespace openrates
