#include "norst/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace norst::io {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'", 0);
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

void write_row(std::ostream& out, const Matrix& m, Index i, const std::vector<IndexSet>* missing) {
  for (Index j = 0; j < m.cols(); ++j) {
    if (j) out << ',';
    if (missing && (*missing)[static_cast<std::size_t>(j)].contains(i)) {
      out << "NaN";
    } else {
      out << format_double(m(i, j));
    }
  }
  out << '\n';
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view text, long line) {
  text = trim(text);
  if (text == "nan" || text == "NaN" || text == "NAN") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ParseError("not a number: '" + std::string(text) + "'", line);
  }
  return v;
}

long parse_index(std::string_view text, long line) {
  text = trim(text);
  long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || v < 0) {
    throw ParseError("not an index: '" + std::string(text) + "'", line);
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) write_row(out, m, i, nullptr);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (auto field : split(line)) row.push_back(parse_double(field, lineno));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("expected " + std::to_string(rows.front().size()) + " fields, got " + std::to_string(row.size()),
                       lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty matrix file '" + path.string() + "'", 0);
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

void write_stream_nan_csv(const std::filesystem::path& path, const ObservationStream& s) {
  auto out = open_out(path);
  for (Index i = 0; i < s.n; ++i) write_row(out, s.y, i, &s.missing);
}

ObservationStream read_stream_nan_csv(const std::filesystem::path& path) {
  Matrix m = read_matrix_csv(path);
  ObservationStream s;
  s.n = m.rows();
  s.d = m.cols();
  s.missing.reserve(static_cast<std::size_t>(s.d));
  for (Index t = 0; t < s.d; ++t) {
    std::vector<Index> idx;
    for (Index i = 0; i < s.n; ++i) {
      if (std::isnan(m(i, t))) {
        idx.push_back(i);
        m(i, t) = 0.0;
      }
    }
    s.missing.emplace_back(std::move(idx), s.n);
  }
  s.y = std::move(m);
  return s;
}

void write_index_lists(const std::filesystem::path& path, const std::vector<IndexSet>& sets) {
  auto out = open_out(path);
  for (const auto& set : sets) {
    bool first = true;
    for (Index i : set) {
      if (!first) out << ',';
      out << i;
      first = false;
    }
    out << '\n';
  }
}

std::vector<IndexSet> read_index_lists(const std::filesystem::path& path, Index n) {
  auto in = open_in(path);
  std::vector<IndexSet> sets;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::vector<Index> idx;
    const auto body = trim(line);
    if (!body.empty()) {
      for (auto field : split(body)) {
        const long v = parse_index(field, lineno);
        if (v >= n) throw ParseError("index " + std::to_string(v) + " outside [0, " + std::to_string(n) + ")", lineno);
        idx.push_back(v);
      }
    }
    sets.emplace_back(std::move(idx), n);
  }
  return sets;
}

void write_stream_pair(const std::filesystem::path& values, const std::filesystem::path& missing,
                       const ObservationStream& s) {
  write_matrix_csv(values, s.y);
  write_index_lists(missing, s.missing);
}

ObservationStream read_stream_pair(const std::filesystem::path& values, const std::filesystem::path& missing) {
  ObservationStream s;
  s.y = read_matrix_csv(values);
  s.n = s.y.rows();
  s.d = s.y.cols();
  s.missing = read_index_lists(missing, s.n);
  if (static_cast<Index>(s.missing.size()) != s.d) {
    throw ParseError("missing-index file has " + std::to_string(s.missing.size()) + " lines, expected " +
                         std::to_string(s.d),
                     0);
  }
  for (Index t = 0; t < s.d; ++t) {
    for (Index i : s.missing[static_cast<std::size_t>(t)]) s.y(i, t) = 0.0;
  }
  return s;
}

}  // namespace norst::io
