#include "aenc/matrix_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstdint>
#include <cstring>

using namespace aenc;
using aenc::test::TempDir;

namespace {

// Minimal RIFF writer kept separate from save_wav so the reader is checked against known bytes.
std::string wav_bytes(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                      const std::string& payload) {
  std::string out;
  auto u32 = [&](std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); };
  auto u16 = [&](std::uint16_t v) { out.append(reinterpret_cast<const char*>(&v), 2); };
  out += "RIFF";
  u32(static_cast<std::uint32_t>(36 + payload.size()));
  out += "WAVEfmt ";
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out += "data";
  u32(static_cast<std::uint32_t>(payload.size()));
  out += payload;
  return out;
}

std::string pcm16(std::initializer_list<std::int16_t> values) {
  std::string s;
  for (auto v : values) s.append(reinterpret_cast<const char*>(&v), 2);
  return s;
}

}  // namespace

TEST_CASE("csv 2x3 parses into a signal matrix") {
  TempDir dir("io");
  aenc::test::write_file(dir / "m.csv", "1,2,3\n4,5,6\n");
  const SignalMatrix m = load_signal(dir / "m.csv", MatrixFormat::csv, {.header = false, .rate_hz = 1.0});
  REQUIRE(m.data.rows() == 2);
  REQUIRE(m.data.cols() == 3);
  CHECK(m.data(0, 0) == 1.0);
  CHECK(m.data(0, 2) == 3.0);
  CHECK(m.data(1, 1) == 5.0);
  CHECK(m.sample_rate_hz == 1.0);
}

TEST_CASE("csv containing nan is rejected with its position") {
  TempDir dir("io");
  aenc::test::write_file(dir / "m.csv", "1,2,3\n4,nan,6\n");
  try {
    (void)load_signal(dir / "m.csv", MatrixFormat::csv);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("m.csv") != std::string::npos);
  }
}

TEST_CASE("csv ragged rows are a dimension mismatch") {
  TempDir dir("io");
  aenc::test::write_file(dir / "m.csv", "1,2,3\n4,5\n");
  CHECK_THROWS_AS(load_signal(dir / "m.csv", MatrixFormat::csv), LoadError);
}

TEST_CASE("fbin save of a loaded file reproduces its bytes") {
  TempDir dir("io");
  SignalMatrix m;
  m.data = Matrix{{0.5, -1.25, 3.0}, {1e-3, 7.0, -2.5}};
  m.sample_rate_hz = 200.0;
  m.channel_labels = {"Fz", "Cz"};
  save_matrix(dir / "a.fbin", MatrixFormat::fbin, m);
  const auto first = aenc::test::read_file(dir / "a.fbin");
  const SignalMatrix back = load_signal(dir / "a.fbin", MatrixFormat::fbin);
  save_matrix(dir / "b.fbin", MatrixFormat::fbin, back);
  CHECK(first == aenc::test::read_file(dir / "b.fbin"));
  CHECK(back.channel_labels == m.channel_labels);
  CHECK(back.sample_rate_hz == 200.0);
  CHECK(first.substr(0, 4) == "AEF1");
}

TEST_CASE("fbin feature table keeps tags and names") {
  TempDir dir("io");
  FeatureTable t;
  t.values = Matrix{{1, 2}, {3, 4}, {5, 6}};
  t.frame_rate_hz = 50.0;
  t.feature_names = {"a", "b"};
  t.element_tag = ElementTag::voice;
  t.level_tag = "layer-8";
  save_matrix(dir / "t.fbin", MatrixFormat::fbin, t);
  const FeatureTable back = load_feature_table(dir / "t.fbin", MatrixFormat::fbin);
  CHECK(back.element_tag == ElementTag::voice);
  CHECK(back.level_tag == "layer-8");
  CHECK(back.feature_names == t.feature_names);
  CHECK(back.values == t.values);
  CHECK(std::holds_alternative<FeatureTable>(load_matrix(dir / "t.fbin", MatrixFormat::fbin)));
}

TEST_CASE("fbin with bad magic or truncated payload names the offset") {
  TempDir dir("io");
  SignalMatrix m;
  m.data = Matrix::Ones(2, 4);
  m.sample_rate_hz = 1.0;
  save_matrix(dir / "a.fbin", MatrixFormat::fbin, m);
  std::string bytes = aenc::test::read_file(dir / "a.fbin");

  std::string bad = bytes;
  bad[0] = 'X';
  aenc::test::write_file(dir / "bad.fbin", bad);
  try {
    (void)load_signal(dir / "bad.fbin", MatrixFormat::fbin);
    FAIL("expected LoadError");
  } catch (const LoadError& e) {
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }

  aenc::test::write_file(dir / "short.fbin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_signal(dir / "short.fbin", MatrixFormat::fbin), LoadError);
}

TEST_CASE("fbin payload with NaN is rejected") {
  TempDir dir("io");
  SignalMatrix m;
  m.data = Matrix::Ones(1, 3);
  m.sample_rate_hz = 1.0;
  save_matrix(dir / "a.fbin", MatrixFormat::fbin, m);
  std::string bytes = aenc::test::read_file(dir / "a.fbin");
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(bytes.data() + bytes.size() - 4, &nan, 4);
  aenc::test::write_file(dir / "nan.fbin", bytes);
  CHECK_THROWS_AS(load_signal(dir / "nan.fbin", MatrixFormat::fbin), LoadError);
}

TEST_CASE("csv load-save-load is the identity on values") {
  TempDir dir("io");
  std::mt19937_64 gen(7);
  std::normal_distribution<double> normal;
  SignalMatrix m;
  m.data = Matrix(3, 50);
  for (Eigen::Index i = 0; i < m.data.size(); ++i) m.data.data()[i] = normal(gen) * 1e3;
  m.sample_rate_hz = 250.0;
  m.channel_labels = {"a", "b", "c"};
  save_matrix(dir / "a.csv", MatrixFormat::csv, m);
  const SignalMatrix once = load_signal(dir / "a.csv", MatrixFormat::csv);
  save_matrix(dir / "b.csv", MatrixFormat::csv, once);
  const SignalMatrix twice = load_signal(dir / "b.csv", MatrixFormat::csv);
  CHECK((once.data - twice.data).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((m.data - once.data).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(twice.sample_rate_hz == 250.0);
}

TEST_CASE("format follows the extension") {
  CHECK(format_from_path("x/y.fbin") == MatrixFormat::fbin);
  CHECK(format_from_path("y.CSV") == MatrixFormat::csv);
  CHECK_THROWS_AS(format_from_path("y.txt"), LoadError);
}

TEST_CASE("wav pcm16 full-scale value scales by 1/32768") {
  TempDir dir("io");
  aenc::test::write_file(dir / "a.wav", wav_bytes(1, 1, 16000, 16, pcm16({32767, -32768, 0})));
  const AudioClip clip = load_wav(dir / "a.wav");
  REQUIRE(clip.samples.size() == 3);
  CHECK(clip.samples[0] == doctest::Approx(32767.0 / 32768.0).epsilon(1e-15));
  CHECK(clip.samples[0] == doctest::Approx(0.999969).epsilon(1e-6));
  CHECK(clip.samples[1] == -1.0);
  CHECK(clip.sample_rate_hz == 16000.0);
}

TEST_CASE("wav stereo is averaged to mono") {
  TempDir dir("io");
  aenc::test::write_file(dir / "s.wav", wav_bytes(1, 2, 8000, 16, pcm16({16384, -16384, 8192, 8192})));
  const AudioClip clip = load_wav(dir / "s.wav");
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == 0.0);
  CHECK(clip.samples[1] == 0.25);
}

TEST_CASE("wav one second of silence gives 16000 zeros") {
  TempDir dir("io");
  AudioClip silence;
  silence.samples.assign(16000, 0.0);
  silence.sample_rate_hz = 16000;
  save_wav(dir / "z.wav", silence);
  const AudioClip back = load_wav(dir / "z.wav");
  CHECK(back.samples.size() == 16000);
  CHECK(std::all_of(back.samples.begin(), back.samples.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("wav float32 round trip and codec rejection") {
  TempDir dir("io");
  AudioClip clip;
  clip.samples = {0.1, -0.7, 0.333};
  clip.sample_rate_hz = 22050;
  save_wav(dir / "f.wav", clip, WavEncoding::float32);
  const AudioClip back = load_wav(dir / "f.wav");
  REQUIRE(back.samples.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.samples[i] == doctest::Approx(clip.samples[i]).epsilon(1e-7));

  // format 2 is MS ADPCM
  aenc::test::write_file(dir / "c.wav", wav_bytes(2, 1, 8000, 16, pcm16({1, 2})));
  CHECK_THROWS_AS(load_wav(dir / "c.wav"), LoadError);

  std::string truncated = wav_bytes(1, 1, 8000, 16, pcm16({1, 2, 3, 4}));
  truncated.resize(truncated.size() - 3);
  aenc::test::write_file(dir / "t.wav", truncated);
  CHECK_THROWS_AS(load_wav(dir / "t.wav"), LoadError);
}

TEST_CASE("response csv uses NA for missing samples") {
  TempDir dir("io");
  aenc::test::write_file(dir / "r.csv", "0.5\nNA\n-1\n");
  const ResponseSeries r = load_response_csv(dir / "r.csv");
  REQUIRE(r.values.size() == 3);
  CHECK(r.values[0] == 0.5);
  CHECK(is_missing(r.values[1]));
  save_response_csv(dir / "o.csv", r);
  const ResponseSeries back = load_response_csv(dir / "o.csv");
  CHECK(is_missing(back.values[1]));
  CHECK(back.values[2] == -1.0);
}

TEST_CASE("table csv keeps header and NA") {
  TempDir dir("io");
  const Matrix rows{{1.5, std::numeric_limits<double>::quiet_NaN()}, {0.1, 2.0}};
  save_table_csv(dir / "t.csv", {"start_s", "E1"}, rows);
  const CsvTable t = load_table_csv(dir / "t.csv");
  CHECK(t.header == std::vector<std::string>{"start_s", "E1"});
  CHECK(t.rows(0, 0) == 1.5);
  CHECK(std::isnan(t.rows(0, 1)));
  CHECK(t.rows(1, 0) == 0.1);
}

TEST_CASE("format_double round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9})
    CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "NA");
}
