#include "mvsl/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mvsl {
namespace {

[[noreturn]] void fail(const std::filesystem::path& file, std::size_t line,
                       const std::string& what) {
  throw IoError(file.string() + ":" + std::to_string(line) + ": " + what);
}

[[noreturn]] void fail(const std::filesystem::path& file,
                       const std::string& what) {
  throw IoError(file.string() + ": " + what);
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) fail(file, "cannot open for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(file, "cannot open for reading");
  return in;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

double parse_double(const std::string& s, const std::filesystem::path& file,
                    std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    fail(file, line, "cannot parse number from '" + s + "'");
  return v;
}

long parse_long(const std::string& s, const std::filesystem::path& file,
                std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0' || errno == ERANGE)
    fail(file, line, "cannot parse integer from '" + s + "'");
  return v;
}

// Strips a trailing '\r' so files written on other platforms load cleanly.
bool read_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_matrix_csv(const Matrix& m, const std::filesystem::path& file,
                     const std::string& column_prefix) {
  auto out = open_out(file);
  for (Index j = 0; j < m.cols(); ++j) {
    if (j > 0) out << ',';
    out << column_prefix << j;
  }
  out << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) fail(file, "write failed");
}

Matrix load_matrix_csv(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::string line;
  if (!read_line(in, line)) fail(file, 1, "missing header row");
  const std::size_t cols = split_fields(line, ',').size();
  if (cols == 0) fail(file, 1, "empty header row");

  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != cols)
      fail(file, lineno,
           "expected " + std::to_string(cols) + " fields, got " +
               std::to_string(fields.size()));
    for (const auto& f : fields) values.push_back(parse_double(f, file, lineno));
    ++rows;
  }
  if (rows == 0) fail(file, lineno, "no data rows");

  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return m;
}

void save_labels_csv(const std::vector<int>& labels,
                     const std::filesystem::path& file) {
  auto out = open_out(file);
  out << "label\n";
  for (int y : labels) out << y << '\n';
  if (!out) fail(file, "write failed");
}

std::vector<int> load_labels_csv(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::string line;
  if (!read_line(in, line)) fail(file, 1, "missing header row");
  if (line != "label") fail(file, 1, "expected header 'label', got '" + line + "'");
  std::vector<int> labels;
  std::size_t lineno = 1;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    labels.push_back(static_cast<int>(parse_long(line, file, lineno)));
  }
  if (labels.empty()) fail(file, lineno, "no label rows");
  return labels;
}

void save_key_values(const KeyValues& kv, const std::filesystem::path& file) {
  auto out = open_out(file);
  for (const auto& [key, value] : kv) {
    if (key.empty() || key.find_first_of(" \t#") != std::string::npos)
      fail(file, "invalid key '" + key + "'");
    out << key << ' ' << value << '\n';
  }
  if (!out) fail(file, "write failed");
}

KeyValues load_key_values(const std::filesystem::path& file) {
  auto in = open_in(file);
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (read_line(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || space == 0)
      fail(file, lineno, "expected 'key value' pair");
    kv.emplace_back(line.substr(0, space), line.substr(space + 1));
  }
  return kv;
}

const std::string& kv_get(const KeyValues& kv, const std::string& key,
                          const std::filesystem::path& origin) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  fail(origin, "missing key '" + key + "'");
}

bool kv_has(const KeyValues& kv, const std::string& key) {
  for (const auto& [k, v] : kv)
    if (k == key) return true;
  return false;
}

}  // namespace mvsl
