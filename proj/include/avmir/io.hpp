#pragma once

// File formats: PCM WAV, PPM/PGM, raw RGB24 frame streams, ARFF, the JSON
// dataset manifest and benchmark split lists.

#include <avmir/audio_features.hpp>
#include <avmir/concepts.hpp>
#include <avmir/imgprep.hpp>
#include <avmir/ml.hpp>

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace avmir {

namespace fs = std::filesystem;

inline std::string read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for '" + path.string() + "'");
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

// --------------------------------------------------------------------- WAV

namespace wav_detail {

inline std::uint32_t u32(std::string_view b, std::size_t at) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

inline std::uint16_t u16(std::string_view b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) | static_cast<unsigned char>(b[at + 1]) << 8);
}

[[noreturn]] inline void fail(std::size_t offset, const std::string& what) {
  throw InputError("WAV: " + what + " at byte offset " + std::to_string(offset));
}

}  // namespace wav_detail

/// PCM WAV (8-bit unsigned or 16-bit signed, any channel count) to a mono
/// clip: samples / 128 or / 32768, channels averaged.
inline AudioClip parse_wav(std::string_view b) {
  using namespace wav_detail;
  if (b.size() < 12) fail(b.size(), "truncated RIFF header");
  if (b.substr(0, 4) != "RIFF") fail(0, "missing RIFF signature");
  if (b.substr(8, 4) != "WAVE") fail(8, "missing WAVE signature");
  std::size_t pos = 12;
  std::optional<std::size_t> fmt_at;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (pos + 8 <= b.size()) {
    const std::string_view id = b.substr(pos, 4);
    const std::uint32_t len = u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (len < 16 || body + len > b.size()) fail(pos, "truncated fmt chunk");
      std::uint16_t tag = u16(b, body);
      if (tag == 0xFFFE) {
        if (len < 40) fail(pos, "truncated extensible fmt chunk");
        tag = u16(b, body + 24);
      }
      if (tag != 1) fail(body, "unsupported non-PCM format tag " + std::to_string(tag));
      channels = u16(b, body + 2);
      rate = u32(b, body + 4);
      bits = u16(b, body + 14);
      if (channels == 0) fail(body + 2, "zero channels");
      if (rate == 0) fail(body + 4, "zero sample rate");
      if (bits != 8 && bits != 16) fail(body + 14, "unsupported bit depth " + std::to_string(bits));
      fmt_at = pos;
    } else if (id == "data") {
      if (!fmt_at) fail(pos, "data chunk before fmt chunk");
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      if (body + len > b.size()) fail(b.size(), "truncated data chunk (declared " + std::to_string(len) + " bytes)");
      if (len % frame_bytes != 0) fail(body + len - len % frame_bytes, "partial sample frame");
      const std::size_t n = len / frame_bytes;
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
          const std::size_t at = body + i * frame_bytes + c * (bits / 8);
          s += bits == 8 ? (static_cast<double>(static_cast<unsigned char>(b[at])) - 128.0) / 128.0
                         : static_cast<double>(static_cast<std::int16_t>(u16(b, at))) / 32768.0;
        }
        clip.samples[i] = s / channels;
      }
      return clip;
    }
    pos = body + len + (len & 1u);
  }
  fail(pos, fmt_at ? "missing data chunk" : "missing fmt chunk");
}

inline AudioClip read_wav(const fs::path& path) {
  try {
    return parse_wav(read_file_bytes(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

/// 16-bit mono PCM; samples are scaled by 32768 and clamped.
inline std::string encode_wav16(const AudioClip& clip) {
  std::string out;
  const auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  const auto put16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
  };
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  const auto data = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out += "RIFF";
  put32(36 + data);
  out += "WAVEfmt ";
  put32(16);
  put16(1);
  put16(1);
  put32(rate);
  put32(rate * 2);
  put16(2);
  put16(16);
  out += "data";
  put32(data);
  for (double s : clip.samples) {
    const long v = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

inline void write_wav16(const fs::path& path, const AudioClip& clip) { write_file_bytes(path, encode_wav16(clip)); }

// ----------------------------------------------------------------- PPM/PGM

namespace pnm_detail {

inline std::string token(std::istream& in) {
  std::string t;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  while (c != EOF && !std::isspace(c) && c != '#') {
    t.push_back(static_cast<char>(c));
    c = in.get();
  }
  return t;  // the single whitespace after the token has been consumed
}

inline int positive(std::istream& in, const std::string& what) {
  const std::string t = token(in);
  int v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v < 1) throw InputError("PNM: bad " + what + " '" + t + "'");
  return v;
}

}  // namespace pnm_detail

/// Binary PPM (P6, maxval 255).
inline Frame read_ppm(std::istream& in) {
  if (pnm_detail::token(in) != "P6") throw InputError("PPM: expected P6 magic");
  const int w = pnm_detail::positive(in, "width"), h = pnm_detail::positive(in, "height");
  if (pnm_detail::positive(in, "maxval") != 255) throw InputError("PPM: only maxval 255 is supported");
  std::vector<Rgb> px(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size() * 3));
  if (in.gcount() != static_cast<std::streamsize>(px.size() * 3)) throw InputError("PPM: truncated pixel data");
  return Frame(w, h, std::move(px));
}

inline Frame read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  try {
    return read_ppm(in);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

inline std::string encode_ppm(const Frame& f) {
  std::string out = "P6\n" + std::to_string(f.width()) + " " + std::to_string(f.height()) + "\n255\n";
  for (const Rgb& p : f.pixels()) {
    out.push_back(static_cast<char>(p.r));
    out.push_back(static_cast<char>(p.g));
    out.push_back(static_cast<char>(p.b));
  }
  return out;
}

inline void write_ppm(const fs::path& path, const Frame& f) { write_file_bytes(path, encode_ppm(f)); }

/// Binary PGM (P5, maxval 255).
inline GrayRaster read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  if (pnm_detail::token(in) != "P5") throw InputError(path.string() + ": expected P5 magic");
  const int w = pnm_detail::positive(in, "width"), h = pnm_detail::positive(in, "height");
  if (pnm_detail::positive(in, "maxval") != 255) throw InputError(path.string() + ": only maxval 255 is supported");
  GrayRaster g(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  in.read(reinterpret_cast<char*>(g.values().data()), static_cast<std::streamsize>(g.size()));
  if (in.gcount() != static_cast<std::streamsize>(g.size())) throw InputError(path.string() + ": truncated pixel data");
  return g;
}

inline void write_pgm(const fs::path& path, const GrayRaster& g) {
  std::string out = "P5\n" + std::to_string(g.cols()) + " " + std::to_string(g.rows()) + "\n255\n";
  out.append(reinterpret_cast<const char*>(g.values().data()), g.size());
  write_file_bytes(path, out);
}

// ------------------------------------------------------------ frame streams

/// Pull-based frame source; at most one frame is materialised per call.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<Frame> next() = 0;
  virtual double fps() const = 0;
  std::size_t frames_read() const noexcept { return index_; }

 protected:
  std::size_t index_ = 0;
};

/// One JSON line {"width":W,"height":H,"fps":F} followed by W*H*3 bytes per frame.
class RawFrameStream final : public FrameSource {
 public:
  explicit RawFrameStream(std::istream& in) : in_(in) {
    std::string line;
    if (!std::getline(in_, line)) throw InputError("frame stream: missing JSON preamble");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      width_ = j.at("width").get<int>();
      height_ = j.at("height").get<int>();
      fps_ = j.value("fps", 25.0);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("frame stream: bad preamble: ") + e.what());
    }
    if (width_ < 1 || height_ < 1) throw InputError("frame stream: non-positive dimensions in preamble");
    if (!(fps_ > 0.0)) throw InputError("frame stream: fps must be positive");
  }

  std::optional<Frame> next() override {
    const std::size_t bytes = static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_) * 3;
    std::vector<Rgb> px(bytes / 3);
    in_.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(bytes));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got == 0) return std::nullopt;
    if (got != bytes) {
      throw InputError("frame stream: short read in frame " + std::to_string(index_) + " (" + std::to_string(got) + " of " +
                       std::to_string(bytes) + " bytes)");
    }
    ++index_;
    return Frame(width_, height_, std::move(px));
  }

  double fps() const override { return fps_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

 private:
  std::istream& in_;
  int width_ = 0;
  int height_ = 0;
  double fps_ = 25.0;
};

/// Directory of *.ppm files read in lexicographic name order.
class PpmDirectory final : public FrameSource {
 public:
  explicit PpmDirectory(const fs::path& dir, double fps = 25.0) : fps_(fps) {
    if (!fs::is_directory(dir)) throw InputError("'" + dir.string() + "' is not a directory");
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".ppm") files_.push_back(e.path());
    }
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw InputError("no .ppm frames in '" + dir.string() + "'");
  }

  std::optional<Frame> next() override {
    if (index_ >= files_.size()) return std::nullopt;
    return read_ppm(files_[index_++]);
  }

  double fps() const override { return fps_; }
  std::size_t size() const noexcept { return files_.size(); }

 private:
  std::vector<fs::path> files_;
  double fps_;
};

/// Opens a PPM directory or a raw stream file (which owns its ifstream).
inline std::unique_ptr<FrameSource> open_frames(const fs::path& path, double dir_fps = 25.0) {
  if (fs::is_directory(path)) return std::make_unique<PpmDirectory>(path, dir_fps);
  struct OwningStream final : FrameSource {
    explicit OwningStream(const fs::path& p) : file(p, std::ios::binary) {
      if (!file) throw InputError("cannot open '" + p.string() + "'");
      raw = std::make_unique<RawFrameStream>(file);
    }
    std::optional<Frame> next() override {
      auto f = raw->next();
      index_ = raw->frames_read();
      return f;
    }
    double fps() const override { return raw->fps(); }
    std::ifstream file;
    std::unique_ptr<RawFrameStream> raw;
  };
  return std::make_unique<OwningStream>(path);
}

inline std::string encode_raw_stream(std::span<const Frame> frames, double fps) {
  if (frames.empty()) throw InputError("no frames to encode");
  nlohmann::json pre = {{"width", frames[0].width()}, {"height", frames[0].height()}, {"fps", fps}};
  std::string out = pre.dump() + "\n";
  for (const Frame& f : frames) {
    out.append(reinterpret_cast<const char*>(f.pixels().data()), f.pixel_count() * 3);
  }
  return out;
}

// -------------------------------------------------------------------- ARFF

/// Replaces characters outside printable ASCII and ARFF delimiters
/// (, { } ' " % \) with '_'. Empty names become "_".
inline std::string arff_sanitize(std::string_view name) {
  std::string out;
  for (char ch : name) {
    const auto c = static_cast<unsigned char>(ch);
    const bool bad = c < 0x20 || c > 0x7E || std::string_view(",{}'\"%\\").find(ch) != std::string_view::npos;
    out.push_back(bad ? '_' : ch);
  }
  if (out.empty()) out = "_";
  return out;
}

inline std::string arff_quote(const std::string& name) {
  return name.find(' ') != std::string::npos || name.find('\t') != std::string::npos ? "'" + name + "'" : name;
}

/// Sample ids and group keys travel in `% id` / `% group` comment lines.
inline std::string encode_arff(const LabeledDataset& d, const std::string& relation) {
  d.validate();
  std::string out = "@RELATION " + arff_quote(arff_sanitize(relation)) + "\n\n";
  for (const auto& name : d.schema) out += "@ATTRIBUTE " + arff_quote(arff_sanitize(name)) + " NUMERIC\n";
  out += "@ATTRIBUTE class {";
  for (std::size_t c = 0; c < d.class_names.size(); ++c) {
    out += (c ? "," : "") + arff_quote(arff_sanitize(d.class_names[c]));
  }
  out += "}\n\n";
  for (const auto& id : d.ids) out += "% id " + id + "\n";
  for (const auto& g : d.groups) out += "% group " + g + "\n";
  out += "@DATA\n";
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (double v : d.features.row(r)) out += format_double(v) + ",";
    out += arff_quote(arff_sanitize(d.class_names[static_cast<std::size_t>(d.labels[r])])) + "\n";
  }
  return out;
}

inline void write_arff(const fs::path& path, const LabeledDataset& d, const std::string& relation) {
  write_file_bytes(path, encode_arff(d, relation));
}

namespace arff_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string o(s);
  for (char& c : o) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return o;
}

/// Reads a possibly quoted name from the front of s.
inline std::optional<std::string> take_name(std::string_view& s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '\'' || s.front() == '"') {
    const std::size_t end = s.find(s.front(), 1);
    if (end == std::string_view::npos) return std::nullopt;
    std::string name(s.substr(1, end - 1));
    s.remove_prefix(end + 1);
    return name;
  }
  std::size_t end = 0;
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end])) && s[end] != '{' && s[end] != ',') ++end;
  std::string name(s.substr(0, end));
  s.remove_prefix(end);
  return name;
}

inline std::vector<std::string> split_values(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    s = trim(s);
    std::string v;
    if (!s.empty() && (s.front() == '\'' || s.front() == '"')) {
      const std::size_t end = s.find(s.front(), 1);
      if (end == std::string_view::npos) return {};
      v = std::string(s.substr(1, end - 1));
      s.remove_prefix(end + 1);
      s = trim(s);
    } else {
      const std::size_t comma = s.find(',');
      v = std::string(trim(s.substr(0, comma)));
      s.remove_prefix(comma == std::string_view::npos ? s.size() : comma);
    }
    out.push_back(std::move(v));
    if (s.empty()) break;
    if (s.front() != ',') return {};
    s.remove_prefix(1);
  }
  return out;
}

}  // namespace arff_detail

inline LabeledDataset parse_arff(std::string_view text) {
  using namespace arff_detail;
  LabeledDataset d;
  std::vector<std::string> attr_names;
  std::optional<std::vector<std::string>> class_values;
  std::vector<std::vector<double>> rows;
  bool in_data = false, saw_relation = false;
  std::size_t line_no = 0;
  const auto fail = [&](const std::string& what) -> InputError {
    return InputError("ARFF line " + std::to_string(line_no) + ": " + what);
  };
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '%') {
      const std::string_view body = trim(line.substr(1));
      if (body.starts_with("id ")) d.ids.emplace_back(trim(body.substr(3)));
      if (body.starts_with("group ")) d.groups.emplace_back(trim(body.substr(6)));
      continue;
    }
    if (!in_data) {
      if (line.front() != '@') throw fail("expected a header directive");
      const std::size_t sp = line.find_first_of(" \t");
      const std::string kw = lower(line.substr(0, sp));
      std::string_view rest = sp == std::string_view::npos ? std::string_view{} : line.substr(sp);
      if (kw == "@relation") {
        if (!take_name(rest)) throw fail("missing relation name");
        saw_relation = true;
      } else if (kw == "@attribute") {
        if (!saw_relation) throw fail("@ATTRIBUTE before @RELATION");
        if (class_values) throw fail("attribute after the nominal class attribute");
        const auto name = take_name(rest);
        if (!name || name->empty()) throw fail("missing attribute name");
        rest = trim(rest);
        if (!rest.empty() && rest.front() == '{') {
          if (rest.back() != '}') throw fail("unterminated nominal value list");
          class_values = split_values(rest.substr(1, rest.size() - 2));
          if (class_values->empty()) throw fail("bad nominal value list");
        } else {
          const std::string type = lower(rest);
          if (type != "numeric" && type != "real" && type != "integer") throw fail("unsupported attribute type '" + std::string(rest) + "'");
          attr_names.push_back(*name);
        }
      } else if (kw == "@data") {
        if (!class_values) throw fail("@DATA without a nominal class attribute");
        in_data = true;
      } else {
        throw fail("unknown directive '" + kw + "'");
      }
      continue;
    }
    const std::vector<std::string> vals = split_values(line);
    if (vals.size() != attr_names.size() + 1) {
      throw fail("expected " + std::to_string(attr_names.size() + 1) + " values, found " + std::to_string(vals.size()));
    }
    std::vector<double> row(attr_names.size());
    for (std::size_t j = 0; j < attr_names.size(); ++j) {
      const auto v = parse_double(vals[j]);
      if (!v) throw fail("non-numeric value '" + vals[j] + "'");
      row[j] = *v;
    }
    const auto it = std::find(class_values->begin(), class_values->end(), vals.back());
    if (it == class_values->end()) throw fail("undeclared class value '" + vals.back() + "'");
    d.labels.push_back(static_cast<int>(it - class_values->begin()));
    rows.push_back(std::move(row));
  }
  if (!in_data) throw InputError("ARFF: missing @DATA section");
  d.schema = attr_names;
  d.class_names = *class_values;
  d.features = Matrix(rows.size(), attr_names.size());
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy(rows[r].begin(), rows[r].end(), d.features.row(r).begin());
  if (!d.ids.empty() && d.ids.size() != d.size()) throw InputError("ARFF: id comment count differs from row count");
  if (!d.groups.empty() && d.groups.size() != d.size()) throw InputError("ARFF: group comment count differs from row count");
  d.validate();
  return d;
}

inline LabeledDataset read_arff(const fs::path& path) {
  try {
    return parse_arff(read_file_bytes(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- manifest

struct ManifestEntry {
  std::string id;
  std::string label;
  std::string artist;
  std::string album;
  std::string date;
  fs::path audio;
  fs::path frames;
  fs::path concepts;
};

struct Manifest {
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view id) const {
    for (const auto& e : entries) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }
};

/// {"tracks": [{"id", "label", "artist"?, "album"?, "date"?, "audio"?,
/// "frames"?, "concepts"?}]}; paths are relative to the manifest file.
inline Manifest parse_manifest(std::string_view text, const fs::path& base, bool check_paths) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("manifest: ") + e.what());
  }
  if (!j.contains("tracks") || !j["tracks"].is_array()) throw InputError("manifest: missing 'tracks' array");
  Manifest m;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j["tracks"].size(); ++i) {
    const auto& t = j["tracks"][i];
    const auto str = [&](const char* key) { return t.contains(key) ? t[key].get<std::string>() : std::string(); };
    ManifestEntry e;
    try {
      e.id = t.at("id").get<std::string>();
      e.label = t.at("label").get<std::string>();
      e.artist = str("artist");
      e.album = str("album");
      e.date = str("date");
      for (auto [key, dst] : {std::pair{"audio", &e.audio}, std::pair{"frames", &e.frames}, std::pair{"concepts", &e.concepts}}) {
        const std::string p = str(key);
        if (!p.empty()) *dst = fs::path(p).is_absolute() ? fs::path(p) : base / p;
      }
    } catch (const nlohmann::json::exception& ex) {
      throw InputError("manifest track " + std::to_string(i) + ": " + ex.what());
    }
    if (e.id.empty()) throw InputError("manifest track " + std::to_string(i) + ": empty id");
    if (!seen.insert(e.id).second) throw InputError("manifest: duplicate track id '" + e.id + "'");
    if (check_paths) {
      for (const fs::path* p : {&e.audio, &e.frames, &e.concepts}) {
        if (!p->empty() && !fs::exists(*p)) throw InputError("manifest track '" + e.id + "': missing file '" + p->string() + "'");
      }
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline Manifest read_manifest(const fs::path& path, bool check_paths = true) {
  return parse_manifest(read_file_bytes(path), path.parent_path(), check_paths);
}

// ------------------------------------------------------------------ splits

enum class SplitFilter { None, Artist, Album, Time };

inline SplitFilter parse_split_filter(std::string_view s) {
  if (s == "none") return SplitFilter::None;
  if (s == "artist") return SplitFilter::Artist;
  if (s == "album") return SplitFilter::Album;
  if (s == "time") return SplitFilter::Time;
  throw InputError("unknown split filter '" + std::string(s) + "'");
}

struct SplitSpec {
  double train_fraction = 0.66;
  std::optional<std::size_t> per_class_count;  // overrides the fraction
  SplitFilter filter = SplitFilter::None;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!per_class_count && !(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("train fraction must be in (0, 1)");
  }
};

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::vector<std::string> warnings;
};

namespace split_detail {

inline std::size_t train_quota(std::size_t n, const SplitSpec& spec) {
  if (spec.per_class_count) return std::min(n, *spec.per_class_count);
  return static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
}

inline void finish(Split& s) {
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
}

}  // namespace split_detail

/// Train/test id lists. Without a group filter: per-class seeded shuffle and
/// quota. With artist/album filter: whole groups go to one side, assigned
/// greedily (largest groups first) to minimise the per-class quota deficit.
/// Time filter: earliest dates (per class when stratified) go to training.
inline Split make_splits(const Manifest& m, const SplitSpec& spec) {
  using namespace split_detail;
  spec.validate();
  Split out;
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : m.entries) entries.push_back(&e);
  std::sort(entries.begin(), entries.end(), [](auto* a, auto* b) { return a->id < b->id; });
  Rng rng(spec.seed);

  std::map<std::string, std::vector<const ManifestEntry*>> by_class;
  for (auto* e : entries) by_class[spec.stratified ? e->label : std::string()].push_back(e);

  if (spec.filter == SplitFilter::None || spec.filter == SplitFilter::Time) {
    for (auto& [label, members] : by_class) {
      if (spec.filter == SplitFilter::Time) {
        for (auto* e : members) {
          if (e->date.empty()) throw InputError("time filter requires a date for track '" + e->id + "'");
        }
        std::stable_sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->date < b->date; });
      } else {
        rng.shuffle(members);
      }
      const std::size_t q = train_quota(members.size(), spec);
      for (std::size_t i = 0; i < members.size(); ++i) (i < q ? out.train : out.test).push_back(members[i]->id);
    }
    finish(out);
    return out;
  }

  const auto key = [&](const ManifestEntry* e) { return spec.filter == SplitFilter::Artist ? e->artist : e->album; };
  std::map<std::string, std::vector<const ManifestEntry*>> groups;
  for (auto* e : entries) {
    if (key(e).empty()) throw InputError("group filter requires a group key for track '" + e->id + "'");
    groups[key(e)].push_back(e);
  }
  std::map<std::string, double> target;
  for (const auto& [label, members] : by_class) target[label] = static_cast<double>(train_quota(members.size(), spec));
  std::map<std::string, std::set<std::string>> label_groups;
  for (auto* e : entries) label_groups[spec.stratified ? e->label : std::string()].insert(key(e));
  for (const auto& [label, gs] : label_groups) {
    if (gs.size() == 1) {
      out.warnings.push_back("class '" + label + "' lies entirely inside one group; it cannot appear on both sides");
    }
  }

  std::vector<std::pair<std::string, std::vector<const ManifestEntry*>>> order(groups.begin(), groups.end());
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second.size() > b.second.size(); });
  std::map<std::string, double> have;
  for (const auto& [g, members] : order) {
    std::map<std::string, double> add;
    for (auto* e : members) add[spec.stratified ? e->label : std::string()] += 1.0;
    double gain = 0.0;  // deficit reduction if the group goes to train
    for (const auto& [label, n] : add) {
      const double before = std::abs(target[label] - have[label]);
      const double after = std::abs(target[label] - have[label] - n);
      gain += before - after;
    }
    const bool to_train = gain > 0.0;
    for (auto* e : members) (to_train ? out.train : out.test).push_back(e->id);
    if (to_train) {
      for (const auto& [label, n] : add) have[label] += n;
    }
  }
  finish(out);
  return out;
}

inline std::string encode_id_list(std::span<const std::string> ids) {
  std::string out;
  for (const auto& id : ids) out += id + "\n";
  return out;
}

inline std::vector<std::string> read_id_list(const fs::path& path) {
  std::istringstream in(read_file_bytes(path));
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view t = arff_detail::trim(line);
    if (!t.empty()) ids.emplace_back(t);
  }
  return ids;
}

// --------------------------------------------------------------------- CSV

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

/// Numeric matrix with a header row and optional row labels.
inline std::string encode_csv(const Matrix& m, std::span<const std::string> header, std::span<const std::string> row_labels = {}) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + csv_field(header[j]);
  out += "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    bool first = true;
    if (!row_labels.empty()) {
      out += csv_field(row_labels[r]);
      first = false;
    }
    for (double v : m.row(r)) {
      out += (first ? "" : ",") + format_double(v);
      first = false;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------- concept scores

/// One concept name per line; blank lines ignored.
inline std::vector<std::string> read_vocabulary(const fs::path& path) {
  std::vector<std::string> v = read_id_list(path);
  if (v.empty()) throw InputError("vocabulary '" + path.string() + "' is empty");
  return v;
}

/// CSV `frame_index,p_0,...,p_{V-1}` with a header row.
inline ConceptScoreSequence parse_concept_scores(std::string_view text, std::vector<std::string> vocabulary) {
  ConceptScoreSequence seq;
  seq.vocabulary = std::move(vocabulary);
  std::vector<std::vector<double>> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (arff_detail::trim(line).empty()) continue;
    if (line_no == 1) continue;  // header
    std::vector<double> row;
    std::size_t start = 0;
    bool first = true;
    while (start <= line.size()) {
      const std::size_t comma = std::min(line.find(',', start), line.size());
      const auto v = parse_double(std::string_view(line).substr(start, comma - start));
      if (!v) throw InputError("concept scores line " + std::to_string(line_no) + ": non-numeric field");
      if (!first) row.push_back(*v);
      first = false;
      start = comma + 1;
    }
    if (row.size() != seq.vocabulary.size()) {
      throw InputError("concept scores line " + std::to_string(line_no) + ": expected " + std::to_string(seq.vocabulary.size()) +
                       " scores, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  seq.rows = stack_rows(rows);
  if (rows.empty()) seq.rows = Matrix(0, seq.vocabulary.size());
  seq.validate();
  return seq;
}

inline ConceptScoreSequence read_concept_scores(const fs::path& path, std::vector<std::string> vocabulary) {
  try {
    return parse_concept_scores(read_file_bytes(path), std::move(vocabulary));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace avmir
