#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "earmotion/binary_io.hpp"
#include "earmotion/frames.hpp"

namespace fs = std::filesystem;

namespace earmotion {

namespace detail {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(Errc::io, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    fail(Errc::io, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

}  // namespace detail

FrameSequence FrameSequence::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= frames.size(), "frame slice out of range");
  FrameSequence out;
  out.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(begin),
                    frames.begin() + static_cast<std::ptrdiff_t>(end));
  out.fps = fps;
  out.color_space = color_space;
  return out;
}

void validate(const FrameSequence& seq) {
  require(seq.fps > 0 && std::isfinite(seq.fps), "fps must be positive");
  const int expected_channels = seq.color_space == ColorSpace::rgb ? 3 : 1;
  for (const auto& f : seq.frames) {
    require(f.channels() == expected_channels, "frame channel count does not match color space");
    require(f.rows() == seq.rows() && f.cols() == seq.cols(), "frames differ in shape");
  }
}

RegionTrack RegionTrack::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= boxes.size(), "region track slice out of range");
  RegionTrack out;
  out.boxes.assign(boxes.begin() + static_cast<std::ptrdiff_t>(begin),
                   boxes.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

RegionTrack RegionTrack::full_frame(std::size_t frames, int rows, int cols) {
  RegionTrack out;
  out.boxes.assign(frames, Rect{0, 0, cols, rows});
  return out;
}

void validate(const RegionTrack& track, const FrameSequence& seq) {
  require(track.size() == seq.size(), "region track length differs from frame count");
  for (const auto& box : track.boxes) {
    if (box) require(!box->empty() && box->inside(seq.rows(), seq.cols()), "region box outside frame");
  }
}

// ---------------------------------------------------------------- .frames

namespace {
constexpr std::string_view kFramesMagic = "EFRM";

FramesHeader parse_frames_header(detail::ByteReader& in) {
  if (in.remaining() < 4 || in.bytes(4) != kFramesMagic) fail(Errc::bad_magic, "not a .frames file");
  FramesHeader h;
  h.rows = in.u32();
  h.cols = in.u32();
  h.channels = in.u32();
  h.count = in.u32();
  h.fps = in.u32() / 1000.0;
  if (h.channels != 1 && h.channels != 3) fail(Errc::validation, ".frames channel count must be 1 or 3");
  if (h.fps <= 0) fail(Errc::validation, ".frames fps must be positive");
  return h;
}
}  // namespace

void write_frames(const FrameSequence& seq, const fs::path& path) {
  validate(seq);
  detail::ByteWriter out;
  out.bytes(kFramesMagic);
  out.u32(static_cast<std::uint32_t>(seq.rows()));
  out.u32(static_cast<std::uint32_t>(seq.cols()));
  out.u32(seq.color_space == ColorSpace::rgb ? 3u : 1u);
  out.u32(static_cast<std::uint32_t>(seq.size()));
  out.u32(static_cast<std::uint32_t>(std::lround(seq.fps * 1000.0)));
  for (const auto& f : seq.frames)
    for (int ch = 0; ch < f.channels(); ++ch)
      for (int r = 0; r < f.rows(); ++r)
        for (int c = 0; c < f.cols(); ++c) out.u8(f(r, c, ch));
  detail::write_file_atomic(path, out.data());
}

FramesHeader read_frames_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  char buf[24] = {};
  in.read(buf, sizeof buf);
  detail::ByteReader reader(std::string_view(buf, static_cast<std::size_t>(in.gcount())), path.string());
  return parse_frames_header(reader);
}

FrameSequence read_frames(const fs::path& path) {
  const std::string raw = detail::read_file(path);
  detail::ByteReader in(raw, path.string());
  const FramesHeader h = parse_frames_header(in);
  const std::size_t frame_bytes = std::size_t{h.rows} * h.cols * h.channels;
  in.need(frame_bytes * h.count);
  FrameSequence seq;
  seq.fps = h.fps;
  seq.color_space = h.channels == 3 ? ColorSpace::rgb : ColorSpace::gray;
  seq.frames.reserve(h.count);
  for (std::uint32_t n = 0; n < h.count; ++n) {
    Image8 f(static_cast<int>(h.rows), static_cast<int>(h.cols), static_cast<int>(h.channels));
    for (int ch = 0; ch < f.channels(); ++ch) {
      auto plane = in.bytes(std::size_t{h.rows} * h.cols);
      for (int r = 0; r < f.rows(); ++r)
        for (int c = 0; c < f.cols(); ++c)
          f(r, c, ch) = static_cast<std::uint8_t>(plane[static_cast<std::size_t>(r) * f.cols() + c]);
    }
    seq.frames.push_back(std::move(f));
  }
  if (in.remaining() != 0) fail(Errc::trailing_data, path.string());
  return seq;
}

// ---------------------------------------------------------------- PGM / PNG

Image8 read_pgm(const fs::path& path) {
  const std::string raw = detail::read_file(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < raw.size()) {
      if (raw[pos] == '#') {
        while (pos < raw.size() && raw[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(raw[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < raw.size() && !std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
    return raw.substr(start, pos - start);
  };
  if (token() != "P5") fail(Errc::bad_magic, path.string() + " is not a binary PGM");
  int cols = 0, rows = 0, maxval = 0;
  try {
    cols = std::stoi(token());
    rows = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    fail(Errc::parse, "malformed PGM header in " + path.string());
  }
  if (maxval != 255) fail(Errc::validation, "only 8-bit PGM is supported");
  ++pos;
  if (raw.size() < pos + static_cast<std::size_t>(rows) * cols) fail(Errc::truncated, path.string());
  Image8 img(rows, cols);
  std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(pos), img.size(), img.pixels().begin());
  return img;
}

void write_pgm(const Image8& image, const fs::path& path) {
  require(image.channels() == 1, "PGM output requires a single-channel image");
  std::string out = "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels().data()), image.size());
  detail::write_file_atomic(path, out);
}

Image8 read_png(const fs::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    fail(Errc::io, "cannot read PNG " + path.string() + ": " + png.message);
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image8 img(static_cast<int>(png.height), static_cast<int>(png.width), color ? 3 : 1);
  if (!png_image_finish_read(&png, nullptr, img.pixels().data(), 0, nullptr)) {
    png_image_free(&png);
    fail(Errc::parse, "cannot decode PNG " + path.string());
  }
  return img;
}

void write_png(const Image8& image, const fs::path& path) {
  require(image.channels() == 1 || image.channels() == 3, "PNG output requires 1 or 3 channels");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.cols());
  png.height = static_cast<png_uint_32>(image.rows());
  png.format = image.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels().data(), 0, nullptr))
    fail(Errc::io, "cannot write PNG " + path.string());
}

FrameSequence read_frame_directory(const fs::path& dir, double fps) {
  require(fps > 0, "fps must be positive");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  FrameSequence seq;
  seq.fps = fps;
  for (const auto& f : files) {
    seq.frames.push_back(f.extension() == ".pgm" || f.extension() == ".PGM" ? read_pgm(f) : read_png(f));
  }
  if (!seq.frames.empty())
    seq.color_space = seq.frames.front().channels() == 3 ? ColorSpace::rgb : ColorSpace::gray;
  validate(seq);
  return seq;
}

FrameSequence load_clip(const fs::path& path, double fps_for_directories) {
  if (fs::is_directory(path)) return read_frame_directory(path, fps_for_directories);
  return read_frames(path);
}

// ---------------------------------------------------------------- ROI CSV

namespace {
std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

long parse_long(std::string_view field, std::size_t line_no) {
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
  while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size())
    fail(Errc::parse, "line " + std::to_string(line_no) + ": bad integer '" + std::string(field) + "'");
  return v;
}
}  // namespace

RegionTrack read_region_track(const fs::path& path, std::size_t frame_count) {
  std::ifstream in(path);
  if (!in) fail(Errc::io, "cannot open " + path.string());
  RegionTrack track;
  track.boxes.resize(frame_count);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 5) fail(Errc::parse, "line " + std::to_string(line_no) + ": expected 5 fields");
    const long idx = parse_long(fields[0], line_no);
    if (idx < 0 || static_cast<std::size_t>(idx) >= frame_count)
      fail(Errc::validation, "line " + std::to_string(line_no) + ": frame index out of range");
    track.boxes[static_cast<std::size_t>(idx)] =
        Rect{static_cast<int>(parse_long(fields[1], line_no)), static_cast<int>(parse_long(fields[2], line_no)),
             static_cast<int>(parse_long(fields[3], line_no)), static_cast<int>(parse_long(fields[4], line_no))};
  }
  return track;
}

void write_region_track(const RegionTrack& track, const fs::path& path) {
  std::string out = "frame_idx,x,y,w,h\n";
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (!track.boxes[i]) continue;
    const Rect& b = *track.boxes[i];
    out += std::to_string(i) + "," + std::to_string(b.x) + "," + std::to_string(b.y) + "," +
           std::to_string(b.w) + "," + std::to_string(b.h) + "\n";
  }
  detail::write_file_atomic(path, out);
}

}  // namespace earmotion
