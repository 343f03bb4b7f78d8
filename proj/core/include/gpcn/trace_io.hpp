#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpcn/metropolis.hpp"

namespace gpcn {

/// Formats a double with 17 significant digits (round-trips exactly).
std::string format_double(double x);

/// Retained-step table as written to / read from trace CSV files.
struct TraceTable {
  std::vector<std::string> header_comments;  // lines after the leading "# "
  std::vector<std::string> qoi_names;
  std::vector<std::size_t> index;
  std::vector<int> accepted;
  std::vector<std::vector<double>> qoi;  // one column per QoI
  std::size_t rows() const { return index.size(); }
};

/// CSV layout: "# key = value" comment lines, then the header row
/// "index,accepted,<qoi...>" and one row per retained step. `n0` is the
/// burn-in length used to align accept flags with retained steps.
void write_trace_csv(const std::filesystem::path& path, const ChainTrace& trace, std::size_t n0,
                     const std::vector<std::string>& header_comments);
TraceTable read_trace_csv(const std::filesystem::path& path);

/// Binary state dump: uint64 N, uint64 n (little-endian), then n*N float64
/// values in row-major order.
void write_state_dump(const std::filesystem::path& path, const Matrix& states);
Matrix read_state_dump(const std::filesystem::path& path);

/// Dense matrix as CSV with 17 significant digits, optional "# " comments.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                      const std::vector<std::string>& header_comments = {});
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace gpcn
