#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flamesentinel::csv {

/// Shortest representation that parses back to the same double.
std::string format(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; FormatError if absent.
  std::size_t column(std::string_view name) const;
};

/// Numeric CSV with a header line. FormatError on ragged rows or
/// unparsable cells.
Table read(const std::filesystem::path& path);

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void row(const std::vector<double>& values);
  /// Flushes and throws on a write failure.
  void close();

 private:
  struct Impl;
  Impl* impl_;
  std::size_t columns_;
};

}  // namespace flamesentinel::csv
