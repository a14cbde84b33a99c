#include "earmotion/features.hpp"

#include <cmath>
#include <cstring>
#include <json.hpp>

#include "earmotion/binary_io.hpp"
#include "earmotion/error.hpp"

namespace earmotion {

std::string_view to_string(Stream stream) noexcept {
  switch (stream) {
    case Stream::i3d_rgb: return "i3d-rgb";
    case Stream::i3d_flow: return "i3d-flow";
    case Stream::i3d_mixed: return "i3d-mixed";
    case Stream::videomae_rgb: return "videomae-rgb";
  }
  return "unknown";
}

Stream parse_stream(std::string_view text) {
  for (Stream s : {Stream::i3d_rgb, Stream::i3d_flow, Stream::i3d_mixed, Stream::videomae_rgb})
    if (to_string(s) == text) return s;
  fail(Errc::unknown_stream, "unknown stream tag '" + std::string(text) + "'");
}

int expected_dim(Stream stream) noexcept { return stream == Stream::videomae_rgb ? 768 : 1024; }

bool bit_equal(const FeatureSequence& a, const FeatureSequence& b) {
  return a.stream == b.stream && a.fps == b.fps && a.window == b.window && a.step == b.step &&
         a.sample_rate == b.sample_rate && a.clip_id == b.clip_id && a.data.rows() == b.data.rows() &&
         a.data.cols() == b.data.cols() &&
         std::memcmp(a.data.data(), b.data.data(), sizeof(float) * static_cast<std::size_t>(a.data.size())) == 0;
}

void validate(const FeatureSequence& seq) {
  if (seq.length() < 1) fail(Errc::validation, "feature sequence has no rows");
  if (seq.dim() != expected_dim(seq.stream))
    fail(Errc::dimension_mismatch, std::string(to_string(seq.stream)) + " features must be " +
                                       std::to_string(expected_dim(seq.stream)) + "-d, got " +
                                       std::to_string(seq.dim()));
  if (!seq.data.allFinite()) fail(Errc::non_finite, "feature sequence contains NaN or Inf");
  require(seq.fps > 0, "feature fps must be positive");
  require(seq.window >= 1 && seq.step >= 1 && seq.sample_rate >= 1, "window, step and sample rate must be >= 1");
  require(seq.clip_id.size() <= 0xffff, "clip id too long");
}

WindowPlan window_plan(std::int64_t num_frames, std::int64_t window, std::int64_t step) {
  if (num_frames <= 0) fail(Errc::validation, "window plan needs at least one frame");
  require(window >= 1 && step >= 1, "window and step must be >= 1");
  WindowPlan plan;
  if (num_frames < window) {
    plan.windows.push_back({0, num_frames});
    plan.short_window = true;
    return plan;
  }
  for (std::int64_t start = 0; start + window <= num_frames; start += step) plan.windows.push_back({start, start + window});
  return plan;
}

FeatureSequence late_fusion(const FeatureSequence& rgb, const FeatureSequence& flow) {
  if (rgb.length() != flow.length() || rgb.dim() != flow.dim())
    fail(Errc::dimension_mismatch, "fused streams differ in shape");
  require(rgb.window == flow.window && rgb.step == flow.step && rgb.fps == flow.fps &&
              rgb.sample_rate == flow.sample_rate && rgb.clip_id == flow.clip_id,
          "fused streams differ in extraction metadata");
  FeatureSequence out = rgb;
  out.data = (rgb.data + flow.data) * 0.5f;
  out.stream = Stream::i3d_mixed;
  return out;
}

namespace {
constexpr std::string_view kMagic = "EFSQ";
}

std::string encode_features(const FeatureSequence& seq) {
  validate(seq);
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.u16(kFeatureFormatVersion);
  out.u8(static_cast<std::uint8_t>(seq.stream));
  out.u32(static_cast<std::uint32_t>(seq.length()));
  out.u32(static_cast<std::uint32_t>(seq.dim()));
  out.u32(static_cast<std::uint32_t>(std::lround(seq.fps * 1000.0)));
  out.u32(seq.window);
  out.u32(seq.step);
  out.u32(seq.sample_rate);
  out.u16(static_cast<std::uint16_t>(seq.clip_id.size()));
  out.bytes(seq.clip_id);
  const float* p = seq.data.data();
  for (Eigen::Index i = 0; i < seq.data.size(); ++i) out.f32(p[i]);
  return out.data();
}

FeatureSequence decode_features(std::string_view bytes, const std::string& source) {
  detail::ByteReader in(bytes, source);
  if (in.remaining() < kMagic.size() || in.bytes(kMagic.size()) != kMagic)
    fail(Errc::bad_magic, source + " is not an .efseq file");
  const auto version = in.u16();
  if (version != kFeatureFormatVersion)
    fail(Errc::unsupported_version, source + ": format version " + std::to_string(version));
  const auto tag = in.u8();
  if (tag > static_cast<std::uint8_t>(Stream::videomae_rgb))
    fail(Errc::unknown_stream, source + ": stream tag " + std::to_string(tag));
  FeatureSequence seq;
  seq.stream = static_cast<Stream>(tag);
  const std::uint32_t rows = in.u32();
  const std::uint32_t dim = in.u32();
  seq.fps = in.u32() / 1000.0;
  seq.window = in.u32();
  seq.step = in.u32();
  seq.sample_rate = in.u32();
  const auto id_len = in.u16();
  seq.clip_id = std::string(in.bytes(id_len));
  if (static_cast<int>(dim) != expected_dim(seq.stream))
    fail(Errc::dimension_mismatch, source + ": " + std::string(to_string(seq.stream)) + " with D=" + std::to_string(dim));
  in.need(std::size_t{rows} * dim * 4);
  seq.data.resize(rows, dim);
  float* p = seq.data.data();
  for (std::size_t i = 0; i < std::size_t{rows} * dim; ++i) p[i] = in.f32();
  if (in.remaining() != 0) fail(Errc::trailing_data, source + ": bytes after payload");
  validate(seq);
  return seq;
}

void write_features(const FeatureSequence& seq, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_features(seq));
}

FeatureSequence read_features(const std::filesystem::path& path) {
  return decode_features(detail::read_file(path), path.string());
}

std::string describe_features(const FeatureSequence& seq) {
  nlohmann::ordered_json j;
  j["clip_id"] = seq.clip_id;
  j["stream"] = to_string(seq.stream);
  j["length"] = seq.length();
  j["dim"] = seq.dim();
  j["fps"] = seq.fps;
  j["window"] = seq.window;
  j["step"] = seq.step;
  j["sample_rate"] = seq.sample_rate;
  return j.dump(2);
}

}  // namespace earmotion
