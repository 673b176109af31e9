#pragma once

// File formats for everything the pipeline ingests or emits.
//
// fbin layout (little-endian):
//   "AEF1" | u32 rows | u32 cols | f64 rate | u32 label_bytes | label block | f32 payload (row-major)
// The label block is a sequence of (u32 length, UTF-8 bytes) entries. Entries beginning with '@'
// carry key=value metadata ("@element=voice", "@level=lld"); the rest are labels. A file with an
// "@element" entry is a FeatureTable (labels name columns); otherwise it is a SignalMatrix (labels
// name rows).
//
// CSV: comma separated numbers, one matrix row per line. An optional first line starting with '#'
// holds semicolon separated key=value metadata; an optional header row (CsvOptions::header) names
// the columns.

#include "aenc/types.hpp"

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace aenc {

enum class MatrixFormat { csv, fbin };

/// Picks the format from the file extension (".fbin" or ".csv").
MatrixFormat format_from_path(const std::filesystem::path& path);

struct CsvOptions {
  bool header = false;
  double rate_hz = 1.0;
};

using LoadedMatrix = std::variant<SignalMatrix, FeatureTable>;

LoadedMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format,
                         const CsvOptions& options = {});
SignalMatrix load_signal(const std::filesystem::path& path, MatrixFormat format,
                         const CsvOptions& options = {});
FeatureTable load_feature_table(const std::filesystem::path& path, MatrixFormat format,
                                const CsvOptions& options = {});

void save_matrix(const std::filesystem::path& path, MatrixFormat format, const SignalMatrix& m);
void save_matrix(const std::filesystem::path& path, MatrixFormat format, const FeatureTable& t);

/// Reads RIFF/WAVE PCM16 or float32; multichannel input is averaged to mono.
AudioClip load_wav(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };
void save_wav(const std::filesystem::path& path, const AudioClip& clip,
              WavEncoding encoding = WavEncoding::pcm16);

/// Single-column response file; "NA" marks a missing sample.
ResponseSeries load_response_csv(const std::filesystem::path& path, bool header = false);
void save_response_csv(const std::filesystem::path& path, const ResponseSeries& series);

/// Generic numeric table with a header row; NaN is written as "NA".
void save_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                    const Matrix& rows);

struct CsvTable {
  std::vector<std::string> header;
  Matrix rows;  // NaN where the file had "NA"
};
CsvTable load_table_csv(const std::filesystem::path& path);

/// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

}  // namespace aenc
