#include "aenc/matrix_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace aenc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// types.hpp validation

void SignalMatrix::validate() const {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("SignalMatrix: sample rate must be > 0");
  if (!data.allFinite()) throw std::invalid_argument("SignalMatrix: non-finite sample");
  if (!channel_labels.empty() && static_cast<Eigen::Index>(channel_labels.size()) != data.rows())
    throw std::invalid_argument("SignalMatrix: label count does not match channel count");
}

void AudioClip::validate() const {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("AudioClip: sample rate must be > 0");
  if (samples.empty()) throw std::invalid_argument("AudioClip: empty clip");
  for (double s : samples)
    if (!(std::abs(s) <= 1.0)) throw std::invalid_argument("AudioClip: sample outside [-1, 1]");
}

void FeatureTable::validate() const {
  if (!(frame_rate_hz > 0.0)) throw std::invalid_argument("FeatureTable: frame rate must be > 0");
  if (values.rows() == 0) throw std::invalid_argument("FeatureTable: no frames");
  if (static_cast<Eigen::Index>(feature_names.size()) != values.cols())
    throw std::invalid_argument("FeatureTable: feature name count does not match column count");
  if (!values.allFinite()) throw std::invalid_argument("FeatureTable: non-finite value");
}

void ResponseSeries::validate() const {
  if (values.empty()) throw std::invalid_argument("ResponseSeries: empty");
  for (double v : values)
    if (std::isinf(v)) throw std::invalid_argument("ResponseSeries: infinite value");
}

std::string to_string(ElementTag tag) {
  switch (tag) {
    case ElementTag::original: return "original";
    case ElementTag::voice: return "voice";
    case ElementTag::soundtrack: return "soundtrack";
    case ElementTag::visual: return "visual";
  }
  return "original";
}

ElementTag parse_element_tag(const std::string& text) {
  if (text == "original") return ElementTag::original;
  if (text == "voice") return ElementTag::voice;
  if (text == "soundtrack") return ElementTag::soundtrack;
  if (text == "visual") return ElementTag::visual;
  throw std::invalid_argument("unknown element tag '" + text + "'");
}

// ---------------------------------------------------------------------------
// helpers

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

static_assert(std::endian::native == std::endian::little, "fbin/wav code assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.append(raw, sizeof(T));
}

class ByteReader {
 public:
  ByteReader(const std::string& bytes, const fs::path& path) : bytes_(bytes), path_(path) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t offset) const {
    throw LoadError(path_.string() + ": " + what + " at byte offset " + std::to_string(offset));
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("unexpected end of file");
  }

  const std::string& bytes_;
  const fs::path& path_;
  std::size_t pos_ = 0;
};

struct RawMatrix {
  Matrix values;
  double rate = 1.0;
  std::vector<std::string> labels;
  std::map<std::string, std::string> meta;
};

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == sep && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::map<std::string, std::string> parse_meta_line(const std::string& line) {
  std::map<std::string, std::string> meta;
  for (const auto& item : split(line.substr(1), ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) continue;
    std::string key = item.substr(0, eq);
    while (!key.empty() && key.front() == ' ') key.erase(key.begin());
    meta[key] = item.substr(eq + 1);
  }
  return meta;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

RawMatrix read_csv(const fs::path& path, const CsvOptions& options) {
  const auto lines = lines_of(read_file(path));
  RawMatrix raw;
  raw.rate = options.rate_hz;
  std::size_t first = 0;
  if (first < lines.size() && !lines[first].empty() && lines[first][0] == '#') {
    raw.meta = parse_meta_line(lines[first]);
    ++first;
  }
  std::vector<std::string> header;
  if (options.header || raw.meta.count("header")) {
    if (first >= lines.size()) throw LoadError(path.string() + ": missing header row");
    header = split(lines[first], ',');
    ++first;
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t li = first; li < lines.size(); ++li) {
    const auto cells = split(lines[li], ',');
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_number(cells[c], v) || !std::isfinite(v))
        throw LoadError(path.string() + ": invalid or non-finite value '" + cells[c] + "' at row " +
                        std::to_string(rows.size()) + ", column " + std::to_string(c));
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw LoadError(path.string() + ": dimension mismatch at row " + std::to_string(rows.size()) +
                      " (expected " + std::to_string(rows.front().size()) + " columns, got " +
                      std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw LoadError(path.string() + ": no data rows");
  if (!header.empty() && header.size() != rows.front().size())
    throw LoadError(path.string() + ": header has " + std::to_string(header.size()) +
                    " columns but data has " + std::to_string(rows.front().size()));
  if (raw.meta.count("rows") && std::stoul(raw.meta["rows"]) != rows.size())
    throw LoadError(path.string() + ": dimension mismatch, metadata declares " + raw.meta["rows"] +
                    " rows but file has " + std::to_string(rows.size()));
  raw.values.resize(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      raw.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (raw.meta.count("rate")) {
    double rate = 0.0;
    if (!parse_number(raw.meta["rate"], rate)) throw LoadError(path.string() + ": bad rate metadata");
    raw.rate = rate;
  }
  if (raw.meta.count("labels") && !raw.meta["labels"].empty()) raw.labels = split(raw.meta["labels"], '|');
  if (!header.empty() && raw.labels.empty()) raw.labels = header;
  return raw;
}

constexpr std::array<char, 4> kFbinMagic{'A', 'E', 'F', '1'};

RawMatrix read_fbin(const fs::path& path) {
  const std::string bytes = read_file(path);
  ByteReader in(bytes, path);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kFbinMagic.data(), 4) != 0)
    in.fail_at("unknown magic bytes", 0);
  in.skip(4);
  RawMatrix raw;
  const auto rows = in.get<std::uint32_t>();
  const auto cols = in.get<std::uint32_t>();
  raw.rate = in.get<double>();
  if (!(raw.rate > 0.0) || !std::isfinite(raw.rate)) in.fail_at("non-positive rate", 12);
  const auto label_bytes = in.get<std::uint32_t>();
  const std::size_t label_end = in.pos() + label_bytes;
  if (in.remaining() < label_bytes) in.fail("label block exceeds file size");
  while (in.pos() < label_end) {
    const auto len = in.get<std::uint32_t>();
    if (in.pos() + len > label_end) in.fail("label entry overruns label block");
    std::string entry = in.get_string(len);
    if (!entry.empty() && entry[0] == '@') {
      auto eq = entry.find('=');
      if (eq == std::string::npos) in.fail("malformed metadata entry");
      raw.meta[entry.substr(1, eq - 1)] = entry.substr(eq + 1);
    } else {
      raw.labels.push_back(std::move(entry));
    }
  }
  const std::size_t payload = static_cast<std::size_t>(rows) * cols * sizeof(float);
  if (in.remaining() != payload)
    in.fail("dimension mismatch: header declares " + std::to_string(rows) + "x" +
            std::to_string(cols) + " (" + std::to_string(payload) + " payload bytes) but " +
            std::to_string(in.remaining()) + " bytes remain");
  raw.values.resize(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) {
      const std::size_t offset = in.pos();
      const float v = in.get<float>();
      if (!std::isfinite(v)) in.fail_at("non-finite payload value", offset);
      raw.values(r, c) = v;
    }
  }
  return raw;
}

void write_fbin(const fs::path& path, const Matrix& values, double rate,
                const std::vector<std::string>& entries) {
  std::string out;
  out.append(kFbinMagic.data(), 4);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(values.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(values.cols()));
  put<double>(out, rate);
  std::string block;
  for (const auto& e : entries) {
    put<std::uint32_t>(block, static_cast<std::uint32_t>(e.size()));
    block += e;
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(block.size()));
  out += block;
  for (Eigen::Index r = 0; r < values.rows(); ++r)
    for (Eigen::Index c = 0; c < values.cols(); ++c) put<float>(out, static_cast<float>(values(r, c)));
  write_file(path, out);
}

std::string csv_rows(const Matrix& values) {
  std::string out;
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out += ',';
      out += format_double(values(r, c));
    }
    out += '\n';
  }
  return out;
}

LoadedMatrix to_loaded(RawMatrix raw, const fs::path& path) {
  if (raw.meta.count("element")) {
    FeatureTable t;
    t.values = std::move(raw.values);
    t.frame_rate_hz = raw.rate;
    t.element_tag = parse_element_tag(raw.meta["element"]);
    t.level_tag = raw.meta.count("level") ? raw.meta["level"] : "";
    t.feature_names = std::move(raw.labels);
    if (t.feature_names.empty())
      for (Eigen::Index c = 0; c < t.values.cols(); ++c) t.feature_names.push_back("f" + std::to_string(c));
    try {
      t.validate();
    } catch (const std::invalid_argument& e) {
      throw LoadError(path.string() + ": " + e.what());
    }
    return t;
  }
  SignalMatrix m;
  m.data = std::move(raw.values);
  m.sample_rate_hz = raw.rate;
  m.channel_labels = std::move(raw.labels);
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace

MatrixFormat format_from_path(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".fbin") return MatrixFormat::fbin;
  if (ext == ".csv") return MatrixFormat::csv;
  throw LoadError(path.string() + ": unrecognized matrix extension '" + ext + "'");
}

LoadedMatrix load_matrix(const fs::path& path, MatrixFormat format, const CsvOptions& options) {
  RawMatrix raw = format == MatrixFormat::fbin ? read_fbin(path) : read_csv(path, options);
  return to_loaded(std::move(raw), path);
}

SignalMatrix load_signal(const fs::path& path, MatrixFormat format, const CsvOptions& options) {
  auto loaded = load_matrix(path, format, options);
  if (auto* m = std::get_if<SignalMatrix>(&loaded)) return std::move(*m);
  throw LoadError(path.string() + ": expected a signal matrix, found a feature table");
}

FeatureTable load_feature_table(const fs::path& path, MatrixFormat format, const CsvOptions& options) {
  auto loaded = load_matrix(path, format, options);
  if (auto* t = std::get_if<FeatureTable>(&loaded)) return std::move(*t);
  // Untagged matrices are accepted as feature tables (frames x features) tagged "original".
  auto& m = std::get<SignalMatrix>(loaded);
  FeatureTable t;
  t.values = std::move(m.data);
  t.frame_rate_hz = m.sample_rate_hz;
  if (static_cast<Eigen::Index>(m.channel_labels.size()) == t.values.cols()) t.feature_names = m.channel_labels;
  else
    for (Eigen::Index c = 0; c < t.values.cols(); ++c) t.feature_names.push_back("f" + std::to_string(c));
  return t;
}

void save_matrix(const fs::path& path, MatrixFormat format, const SignalMatrix& m) {
  m.validate();
  if (format == MatrixFormat::fbin) {
    write_fbin(path, m.data, m.sample_rate_hz, m.channel_labels);
    return;
  }
  std::string out = "# kind=signal;rate=" + format_double(m.sample_rate_hz) +
                    ";rows=" + std::to_string(m.data.rows()) + ";labels=" + join(m.channel_labels, "|") + "\n";
  out += csv_rows(m.data);
  write_file(path, out);
}

void save_matrix(const fs::path& path, MatrixFormat format, const FeatureTable& t) {
  t.validate();
  if (format == MatrixFormat::fbin) {
    std::vector<std::string> entries = t.feature_names;
    entries.push_back("@element=" + to_string(t.element_tag));
    entries.push_back("@level=" + t.level_tag);
    write_fbin(path, t.values, t.frame_rate_hz, entries);
    return;
  }
  std::string out = "# kind=feature;rate=" + format_double(t.frame_rate_hz) + ";element=" +
                    to_string(t.element_tag) + ";level=" + t.level_tag +
                    ";rows=" + std::to_string(t.values.rows()) + ";header=1\n";
  out += join(t.feature_names, ",") + "\n";
  out += csv_rows(t.values);
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// WAV

AudioClip load_wav(const fs::path& path) {
  const std::string bytes = read_file(path);
  ByteReader in(bytes, path);
  if (in.get_string(4) != "RIFF") in.fail_at("not a RIFF file", 0);
  in.get<std::uint32_t>();
  if (in.get_string(4) != "WAVE") in.fail_at("not a WAVE file", 8);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (in.remaining() >= 8) {
    const std::size_t chunk_start = in.pos();
    const std::string id = in.get_string(4);
    const auto size = in.get<std::uint32_t>();
    if (id == "fmt ") {
      if (size < 16) in.fail_at("fmt chunk too small", chunk_start);
      format = in.get<std::uint16_t>();
      channels = in.get<std::uint16_t>();
      rate = in.get<std::uint32_t>();
      in.get<std::uint32_t>();  // byte rate
      in.get<std::uint16_t>();  // block align
      bits = in.get<std::uint16_t>();
      std::size_t consumed = 16;
      if (format == 0xFFFE && size >= 40) {
        in.get<std::uint16_t>();  // cbSize
        in.get<std::uint16_t>();  // valid bits
        in.get<std::uint32_t>();  // channel mask
        format = in.get<std::uint16_t>();  // first two bytes of the subformat GUID
        consumed += 10;
      }
      in.skip(size - consumed + (size & 1u));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) in.fail_at("data chunk before fmt chunk", chunk_start);
      const bool pcm16 = format == 1 && bits == 16;
      const bool f32 = format == 3 && bits == 32;
      if (!pcm16 && !f32)
        in.fail_at("unsupported encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits); only PCM16 and float32 are accepted",
                   chunk_start);
      if (channels == 0 || rate == 0) in.fail_at("invalid channel count or rate", chunk_start);
      if (size > in.remaining()) in.fail_at("truncated data chunk", chunk_start);
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      if (size % frame_bytes != 0) in.fail_at("data chunk is not a whole number of frames", chunk_start);
      const std::size_t frames = size / frame_bytes;
      AudioClip clip;
      clip.sample_rate_hz = rate;
      clip.samples.resize(frames);
      for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) {
          if (pcm16) {
            acc += static_cast<double>(in.get<std::int16_t>()) / 32768.0;
          } else {
            const std::size_t offset = in.pos();
            const float v = in.get<float>();
            if (!std::isfinite(v)) in.fail_at("non-finite sample", offset);
            acc += std::clamp(static_cast<double>(v), -1.0, 1.0);
          }
        }
        clip.samples[f] = acc / channels;
      }
      if (clip.samples.empty()) in.fail_at("empty data chunk", chunk_start);
      return clip;
    } else {
      if (size + (size & 1u) > in.remaining()) in.fail_at("truncated chunk '" + id + "'", chunk_start);
      in.skip(size + (size & 1u));
    }
  }
  throw LoadError(path.string() + ": no data chunk found");
}

void save_wav(const fs::path& path, const AudioClip& clip, WavEncoding encoding) {
  clip.validate();
  const bool pcm16 = encoding == WavEncoding::pcm16;
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(clip.samples.size() * (bits / 8));
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate_hz));
  std::string out;
  out += "RIFF";
  put<std::uint32_t>(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put<std::uint32_t>(out, 16);
  put<std::uint16_t>(out, pcm16 ? 1 : 3);
  put<std::uint16_t>(out, 1);
  put<std::uint32_t>(out, rate);
  put<std::uint32_t>(out, rate * (bits / 8));
  put<std::uint16_t>(out, bits / 8);
  put<std::uint16_t>(out, bits);
  out += "data";
  put<std::uint32_t>(out, data_bytes);
  for (double s : clip.samples) {
    if (pcm16) {
      const double scaled = std::round(s * 32768.0);
      put<std::int16_t>(out, static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0)));
    } else {
      put<float>(out, static_cast<float>(s));
    }
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// response and generic tables

ResponseSeries load_response_csv(const fs::path& path, bool header) {
  auto lines = lines_of(read_file(path));
  std::size_t first = header ? 1 : 0;
  ResponseSeries series;
  for (std::size_t i = first; i < lines.size(); ++i) {
    std::string cell = lines[i];
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == ',')) cell.pop_back();
    if (cell == "NA") {
      series.values.push_back(kMissing);
      continue;
    }
    double v = 0.0;
    if (!parse_number(cell, v) || !std::isfinite(v))
      throw LoadError(path.string() + ": invalid value '" + cell + "' at row " + std::to_string(i - first));
    series.values.push_back(v);
  }
  if (series.values.empty()) throw LoadError(path.string() + ": empty response series");
  return series;
}

void save_response_csv(const fs::path& path, const ResponseSeries& series) {
  std::string out;
  for (double v : series.values) out += format_double(v) + "\n";
  write_file(path, out);
}

void save_table_csv(const fs::path& path, const std::vector<std::string>& header, const Matrix& rows) {
  if (!header.empty() && static_cast<Eigen::Index>(header.size()) != rows.cols())
    throw std::invalid_argument("save_table_csv: header/column count mismatch");
  std::string out = join(header, ",") + "\n" + csv_rows(rows);
  write_file(path, out);
}

CsvTable load_table_csv(const fs::path& path) {
  const auto lines = lines_of(read_file(path));
  if (lines.empty()) throw LoadError(path.string() + ": empty table");
  CsvTable table;
  table.header = split(lines[0], ',');
  const auto cols = static_cast<Eigen::Index>(table.header.size());
  table.rows.resize(static_cast<Eigen::Index>(lines.size() - 1), cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (static_cast<Eigen::Index>(cells.size()) != cols)
      throw LoadError(path.string() + ": dimension mismatch at row " + std::to_string(i - 1));
    for (Eigen::Index c = 0; c < cols; ++c) {
      double v = 0.0;
      if (cells[static_cast<std::size_t>(c)] == "NA") v = kMissing;
      else if (!parse_number(cells[static_cast<std::size_t>(c)], v))
        throw LoadError(path.string() + ": invalid value at row " + std::to_string(i - 1) +
                        ", column " + std::to_string(c));
      table.rows(static_cast<Eigen::Index>(i - 1), c) = v;
    }
  }
  return table;
}

}  // namespace aenc
