#include "gpcn/trace_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gpcn {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& text, const std::filesystem::path& path, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": cannot parse number '" << text << "'";
    throw std::runtime_error(msg.str());
  }
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("state dump: truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trace_csv(const std::filesystem::path& path, const ChainTrace& trace, std::size_t n0,
                     const std::vector<std::string>& header_comments) {
  auto out = open_out(path);
  for (const auto& c : header_comments) out << "# " << c << '\n';
  out << "index,accepted";
  for (const auto& name : trace.qoi_names) out << ',' << name;
  out << '\n';
  const std::size_t n = trace.qoi_series.empty() ? trace.accepts.size() - n0 : trace.qoi_series.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << (trace.accepts.at(n0 + i) ? 1 : 0);
    for (const auto& series : trace.qoi_series) out << ',' << format_double(series[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

TraceTable read_trace_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  TraceTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("#", 0) == 0) {
      table.header_comments.push_back(line.size() > 2 ? line.substr(2) : std::string());
      continue;
    }
    const auto cells = split(line, ',');
    if (!have_header) {
      if (cells.size() < 2 || cells[0] != "index" || cells[1] != "accepted") {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                 ": expected header 'index,accepted,...'");
      }
      table.qoi_names.assign(cells.begin() + 2, cells.end());
      table.qoi.assign(table.qoi_names.size(), {});
      have_header = true;
      continue;
    }
    if (cells.size() != table.qoi_names.size() + 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": wrong number of columns");
    }
    table.index.push_back(static_cast<std::size_t>(parse_double(cells[0], path, line_no)));
    table.accepted.push_back(static_cast<int>(parse_double(cells[1], path, line_no)));
    for (std::size_t q = 0; q < table.qoi_names.size(); ++q) {
      table.qoi[q].push_back(parse_double(cells[q + 2], path, line_no));
    }
  }
  if (!have_header) throw std::runtime_error(path.string() + ": missing header row");
  return table;
}

void write_state_dump(const std::filesystem::path& path, const Matrix& states) {
  auto out = open_out(path, true);
  write_u64(out, static_cast<std::uint64_t>(states.cols()));
  write_u64(out, static_cast<std::uint64_t>(states.rows()));
  static_assert(std::endian::native == std::endian::little, "state dumps assume a little-endian host");
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = states;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * static_cast<Eigen::Index>(sizeof(double))));
  if (!out) throw std::runtime_error("error writing " + path.string());
}

Matrix read_state_dump(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  const auto dim = static_cast<Eigen::Index>(read_u64(in));
  const auto rows = static_cast<Eigen::Index>(read_u64(in));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, dim);
  if (!in.read(reinterpret_cast<char*>(rm.data()),
               static_cast<std::streamsize>(rm.size() * static_cast<Eigen::Index>(sizeof(double))))) {
    throw std::runtime_error("state dump " + path.string() + " is truncated");
  }
  return rm;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header_comments) {
  auto out = open_out(path);
  for (const auto& c : header_comments) out << "# " << c << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("error writing " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(parse_double(cell, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": ragged matrix row");
    }
    rows.push_back(std::move(row));
  }
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace gpcn
