#include "flamesentinel/core/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "flamesentinel/core/error.hpp"

namespace flamesentinel::csv {

std::string format(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("CSV has no column '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Table read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const char* b = cells[i].data();
      const char* e = b + cells[i].size();
      const auto r = std::from_chars(b, e, row[i]);
      if (r.ec != std::errc() || r.ptr != e) {
        throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + cells[i] + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

struct Writer::Impl {
  std::filesystem::path path;
  std::ofstream out;
};

Writer::Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
    : impl_(new Impl{path, std::ofstream(path, std::ios::trunc)}), columns_(header.size()) {
  if (!impl_->out) {
    delete impl_;
    throw Error("cannot write " + path.string());
  }
  for (std::size_t i = 0; i < header.size(); ++i) impl_->out << (i ? "," : "") << header[i];
  impl_->out << '\n';
}

Writer::~Writer() { delete impl_; }

void Writer::row(const std::vector<double>& values) {
  if (values.size() != columns_) throw ShapeError("CSV row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) impl_->out << (i ? "," : "") << format(values[i]);
  impl_->out << '\n';
}

void Writer::close() {
  impl_->out.flush();
  if (!impl_->out) throw Error("failed writing " + impl_->path.string());
}

}  // namespace flamesentinel::csv
