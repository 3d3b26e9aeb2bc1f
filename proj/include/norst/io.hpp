#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "norst/datagen.hpp"

namespace norst::io {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
/// Accepts "nan" / "NaN" as quiet NaN. Throws ParseError naming `line`.
double parse_double(std::string_view text, long line);
long parse_index(std::string_view text, long line);
std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Dense CSV, one matrix row per line.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Format (a): n x d CSV of y with NaN at missing entries.
void write_stream_nan_csv(const std::filesystem::path& path, const ObservationStream& s);
ObservationStream read_stream_nan_csv(const std::filesystem::path& path);

/// Format (b): n x d CSV of values (missing entries written as 0) plus a file
/// with one line per frame listing its missing row indices. Round-trips bit-exactly.
void write_stream_pair(const std::filesystem::path& values, const std::filesystem::path& missing,
                       const ObservationStream& s);
ObservationStream read_stream_pair(const std::filesystem::path& values, const std::filesystem::path& missing);

std::vector<IndexSet> read_index_lists(const std::filesystem::path& path, Index n);
void write_index_lists(const std::filesystem::path& path, const std::vector<IndexSet>& sets);

}  // namespace norst::io
