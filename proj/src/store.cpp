#include "spooky/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spooky/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spooky {

double round_sig6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return std::strtod(buf, nullptr);
}

// ---- Y4M -------------------------------------------------------------------

namespace {

std::size_t chroma_plane(int w, int h) {
  return static_cast<std::size_t>((w + 1) / 2) * static_cast<std::size_t>((h + 1) / 2);
}

std::string y4m_header(const FrameSequence& seq) {
  return "YUV4MPEG2 W" + std::to_string(seq.width()) + " H" + std::to_string(seq.height()) +
         " F" + std::to_string(seq.fps()) + ":1 Ip A1:1 C420jpeg\n";
}

void check_even(const FrameSequence& seq) {
  if (seq.width() % 2 != 0 || seq.height() % 2 != 0) {
    throw Error(ErrorCode::OddDimensions,
                "Y4M 4:2:0 needs even dimensions, got " + std::to_string(seq.width()) + "x" +
                    std::to_string(seq.height()),
                seq.width() % 2 ? "width" : "height");
  }
}

}  // namespace

std::size_t write_y4m(const FrameSequence& seq, std::ostream& sink) {
  check_even(seq);
  const auto header = y4m_header(seq);
  const std::string chroma(2 * chroma_plane(seq.width(), seq.height()), '\x80');
  std::size_t n = 0;
  auto put = [&](const char* p, std::size_t len) {
    sink.write(p, static_cast<std::streamsize>(len));
    if (!sink) throw Error(ErrorCode::SinkFailure, "Y4M sink rejected a write");
    n += len;
  };
  put(header.data(), header.size());
  for (const auto& f : seq.frames()) {
    put("FRAME\n", 6);
    put(reinterpret_cast<const char*>(f.pixels().data()), f.size());
    put(chroma.data(), chroma.size());
  }
  sink.flush();
  if (!sink) throw Error(ErrorCode::SinkFailure, "Y4M sink flush failed");
  return n;
}

std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq) {
  std::ostringstream os(std::ios::binary);
  write_y4m(seq, os);
  const auto s = os.str();
  return {s.begin(), s.end()};
}

namespace {

int parse_positive(std::string_view s, std::string_view what) {
  int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v <= 0) {
    throw Error(ErrorCode::BadHeader, "bad Y4M " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

// Reads up to and excluding '\n'. Returns false on clean EOF before any byte.
bool read_line(std::istream& in, std::string& line, std::size_t limit) {
  line.clear();
  char c;
  while (in.get(c)) {
    if (c == '\n') return true;
    line.push_back(c);
    if (line.size() > limit) throw Error(ErrorCode::BadHeader, "Y4M header line too long");
  }
  if (line.empty()) return false;
  throw Error(ErrorCode::BadHeader, "Y4M line not terminated by newline");
}

}  // namespace

FrameSequence read_y4m(std::istream& in) {
  std::string line;
  if (!read_line(in, line, 4096)) throw Error(ErrorCode::BadHeader, "empty Y4M stream");
  std::istringstream tokens(line);
  std::string tok;
  tokens >> tok;
  if (tok != "YUV4MPEG2") throw Error(ErrorCode::BadHeader, "missing YUV4MPEG2 signature");
  int w = 0, h = 0, fps = 0;
  while (tokens >> tok) {
    const std::string_view body = std::string_view(tok).substr(1);
    switch (tok[0]) {
      case 'W': w = parse_positive(body, "width"); break;
      case 'H': h = parse_positive(body, "height"); break;
      case 'F': {
        const auto colon = body.find(':');
        if (colon == std::string_view::npos) throw Error(ErrorCode::BadHeader, "bad Y4M frame rate");
        const int num = parse_positive(body.substr(0, colon), "frame rate");
        const int den = parse_positive(body.substr(colon + 1), "frame rate");
        if (num % den != 0) {
          throw Error(ErrorCode::BadHeader, "non-integer Y4M frame rate " + std::string(body));
        }
        fps = num / den;
        break;
      }
      case 'C':
        if (!body.starts_with("420")) {
          throw Error(ErrorCode::UnsupportedChromaTag, "unsupported chroma " + std::string(body));
        }
        break;
      case 'I':
        if (body != "p" && body != "?") {
          throw Error(ErrorCode::BadHeader, "interlaced Y4M is not supported");
        }
        break;
      default: break;  // A, X and unknown tags carry nothing we use
    }
  }
  if (w == 0 || h == 0 || fps == 0) throw Error(ErrorCode::BadHeader, "Y4M header lacks W, H or F");

  const std::size_t luma = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t skip = 2 * chroma_plane(w, h);
  std::vector<FrameBuffer> frames;
  std::vector<char> chroma(skip);
  while (read_line(in, line, 4096)) {
    if (line != "FRAME" && !line.starts_with("FRAME ")) {
      throw Error(ErrorCode::BadHeader, "expected FRAME marker before frame " +
                                            std::to_string(frames.size()));
    }
    std::vector<std::uint8_t> px(luma);
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(luma));
    if (static_cast<std::size_t>(in.gcount()) != luma) {
      throw Error(ErrorCode::TruncatedFrame, "luma plane of frame " +
                                                 std::to_string(frames.size()) + " is truncated");
    }
    in.read(chroma.data(), static_cast<std::streamsize>(skip));
    if (static_cast<std::size_t>(in.gcount()) != skip) {
      throw Error(ErrorCode::TruncatedFrame, "chroma planes of frame " +
                                                 std::to_string(frames.size()) + " are truncated");
    }
    frames.emplace_back(w, h, std::move(px));
  }
  if (frames.empty()) throw Error(ErrorCode::TruncatedFrame, "Y4M stream has no frames");
  return FrameSequence(std::move(frames), fps);
}

FrameSequence decode_y4m(std::span<const std::uint8_t> bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_y4m(is);
}

// ---- JSON helpers ----------------------------------------------------------

namespace {

std::string dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

json parse_text(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, what + " is not valid JSON: " + e.what(), "$");
  }
}

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::SchemaViolation, path + ": " + msg, path);
}

const json& object_at(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  return j;
}

const json& array_at(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  return j;
}

const json* find(const json& obj, std::string_view key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

const json& need(const json& obj, std::string_view key, const std::string& path) {
  const json* v = find(obj, key);
  if (!v) bad(join(path, key), "missing field");
  return *v;
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) bad(path, "expected a string");
  return v.get<std::string>();
}

long long as_integer(const json& v, const std::string& path, long long lo, long long hi) {
  if (!v.is_number_integer()) bad(path, "expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
    bad(path, "integer out of range");
  }
  const auto x = v.get<long long>();
  if (x < lo || x > hi) bad(path, "integer out of range");
  return x;
}

int as_int(const json& v, const std::string& path) {
  return static_cast<int>(as_integer(v, path, std::numeric_limits<int>::min(),
                                     std::numeric_limits<int>::max()));
}

std::size_t as_size(const json& v, const std::string& path) {
  return static_cast<std::size_t>(as_integer(v, path, 0, std::numeric_limits<long long>::max()));
}

std::uint64_t as_u64(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return v.get<std::uint64_t>();
  bad(path, "expected a non-negative integer");
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) bad(path, "expected a number");
  return v.get<double>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) bad(path, "expected a boolean");
  return v.get<bool>();
}

std::string req_string(const json& o, std::string_view k, const std::string& p) {
  return as_string(need(o, k, p), join(p, k));
}
int req_int(const json& o, std::string_view k, const std::string& p) {
  return as_int(need(o, k, p), join(p, k));
}
double req_double(const json& o, std::string_view k, const std::string& p) {
  return as_double(need(o, k, p), join(p, k));
}
std::optional<std::string> opt_string(const json& o, std::string_view k, const std::string& p) {
  const json* v = find(o, k);
  return v ? std::optional(as_string(*v, join(p, k))) : std::nullopt;
}
std::optional<int> opt_int(const json& o, std::string_view k, const std::string& p) {
  const json* v = find(o, k);
  return v ? std::optional(as_int(*v, join(p, k))) : std::nullopt;
}

void check_version(const json& j, const std::string& what) {
  const int v = req_int(j, "schema_version", "");
  if (v != kSchemaVersion) {
    bad("schema_version", what + " schema version " + std::to_string(v) + " is not supported");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : base / q;
}

// ---- params ----

json params_json(const EncodingParams& p) {
  return {{"width", p.width},
          {"height", p.height},
          {"fps", p.fps},
          {"duration_s", p.duration_s},
          {"velocity", {{"vx", p.velocity.vx}, {"vy", p.velocity.vy}}},
          {"block_size", p.block_size},
          {"density", p.density},
          {"seed", p.seed}};
}

EncodingParams params_from(const json& j, const std::string& path) {
  object_at(j, path);
  EncodingParams p;
  p.width = req_int(j, "width", path);
  p.height = req_int(j, "height", path);
  p.fps = req_int(j, "fps", path);
  p.duration_s = req_double(j, "duration_s", path);
  const auto vp = join(path, "velocity");
  const auto& v = object_at(need(j, "velocity", path), vp);
  p.velocity.vx = req_double(v, "vx", vp);
  p.velocity.vy = req_double(v, "vy", vp);
  p.block_size = req_int(j, "block_size", path);
  p.density = req_double(j, "density", path);
  p.seed = as_u64(need(j, "seed", path), join(path, "seed"));
  return p;
}

}  // namespace

// ---- PNG sequences ---------------------------------------------------------

std::vector<fs::path> write_png_sequence(const FrameSequence& seq, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> files;
  files.reserve(seq.size());
  char name[32];
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%06zu.png", i);
    files.push_back(dir / name);
    write_png(files.back(), seq[i]);
  }
  json side{{"schema_version", kSchemaVersion},
            {"fps", seq.fps()},
            {"frame_count", seq.size()},
            {"width", seq.width()},
            {"height", seq.height()}};
  if (seq.params()) side["params"] = params_json(*seq.params());
  const auto text = dump(side);
  write_file(dir / kSidecarName,
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  return files;
}

FrameSequence read_png_sequence(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoFailure, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && name.starts_with("frame_") && name.ends_with(".png")) {
      files.push_back(e.path());
    }
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  if (files.empty()) throw Error(ErrorCode::EmptyDirectory, "no frame_*.png in " + dir.string());
  std::sort(files.begin(), files.end());

  const auto side_bytes = read_file(dir / kSidecarName);
  const json side = parse_text({reinterpret_cast<const char*>(side_bytes.data()), side_bytes.size()},
                               "sidecar");
  object_at(side, "");
  check_version(side, "sidecar");
  const int fps = req_int(side, "fps", "");
  std::optional<EncodingParams> params;
  if (const json* p = find(side, "params")) params = params_from(*p, "params");

  std::vector<FrameBuffer> frames;
  frames.reserve(files.size());
  for (const auto& f : files) {
    frames.push_back(read_png(f));
    if (frames.back().width() != frames.front().width() ||
        frames.back().height() != frames.front().height()) {
      throw Error(ErrorCode::MixedDimensions, f.filename().string() + " differs in size");
    }
  }
  return FrameSequence(std::move(frames), fps, params);
}

std::string_view to_string(VideoFormat f) noexcept {
  return f == VideoFormat::Y4m ? "y4m" : "png";
}

VideoFormat parse_video_format(std::string_view s) {
  if (s == "y4m") return VideoFormat::Y4m;
  if (s == "png") return VideoFormat::PngSequence;
  throw Error(ErrorCode::SchemaViolation, "format must be y4m or png", "format");
}

void write_video(const FrameSequence& seq, const fs::path& path, VideoFormat f) {
  if (f == VideoFormat::PngSequence) {
    write_png_sequence(seq, path);
    return;
  }
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot create " + path.string());
  write_y4m(seq, out);
}

FrameSequence read_video(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) return read_png_sequence(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  return read_y4m(in);
}

// ---- Manifest --------------------------------------------------------------

namespace {

json source_json(const ContentSource& s) {
  struct V {
    json operator()(const TextSource& t) const {
      return {{"kind", "text"}, {"text", t.text}, {"scale", t.scale}};
    }
    json operator()(const ShapeSource& sh) const {
      return std::visit(
          [](const auto& g) -> json {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, CircleShape>) {
              return {{"kind", "shape"}, {"shape", "circle"}, {"cx", g.center.x},
                      {"cy", g.center.y}, {"radius", g.radius}};
            } else if constexpr (std::is_same_v<T, RectangleShape>) {
              return {{"kind", "shape"}, {"shape", "rectangle"}, {"x", g.corner.x},
                      {"y", g.corner.y}, {"w", g.w}, {"h", g.h}};
            } else {
              json v = json::array();
              for (const auto& p : g.vertices) v.push_back({p.x, p.y});
              return {{"kind", "shape"}, {"shape", "polygon"}, {"vertices", v}};
            }
          },
          sh.geometry);
    }
    json operator()(const MaskFileSource& m) const { return {{"kind", "mask"}, {"path", m.path}}; }
    json operator()(const DepthSource& d) const {
      return {{"kind", "depth"}, {"path", d.path}, {"lower", d.thresholds.lower},
              {"upper", d.thresholds.upper}};
    }
  };
  return std::visit(V{}, s);
}

ContentSource source_from(const json& j, const std::string& path) {
  object_at(j, path);
  const auto kind = req_string(j, "kind", path);
  if (kind == "text") return TextSource{req_string(j, "text", path), req_int(j, "scale", path)};
  if (kind == "mask") return MaskFileSource{req_string(j, "path", path)};
  if (kind == "depth") {
    return DepthSource{req_string(j, "path", path),
                       {req_int(j, "lower", path), req_int(j, "upper", path)}};
  }
  if (kind != "shape") bad(join(path, "kind"), "unknown source kind '" + kind + "'");
  const auto shape = req_string(j, "shape", path);
  if (shape == "circle") {
    return ShapeSource{CircleShape{{req_double(j, "cx", path), req_double(j, "cy", path)},
                                   req_double(j, "radius", path)}};
  }
  if (shape == "rectangle") {
    return ShapeSource{RectangleShape{{req_double(j, "x", path), req_double(j, "y", path)},
                                      req_double(j, "w", path), req_double(j, "h", path)}};
  }
  if (shape == "polygon") {
    const auto vp = join(path, "vertices");
    const auto& arr = array_at(need(j, "vertices", path), vp);
    PolygonShape poly;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto ip = index(vp, i);
      if (!arr[i].is_array() || arr[i].size() != 2) bad(ip, "expected [x, y]");
      poly.vertices.push_back({as_double(arr[i][0], ip + "[0]"), as_double(arr[i][1], ip + "[1]")});
    }
    return ShapeSource{poly};
  }
  bad(join(path, "shape"), "unknown shape '" + shape + "'");
}

json entry_json(const ManifestEntry& e) {
  json j{{"video_id", e.video_id},
         {"category", to_string(e.category)},
         {"labels", e.labels},
         {"params", params_json(e.params)},
         {"source", source_json(e.source)},
         {"container", e.container},
         {"format", to_string(e.format)}};
  if (e.prompt_direct || e.prompt_cot) {
    json p = json::object();
    if (e.prompt_direct) p["direct"] = *e.prompt_direct;
    if (e.prompt_cot) p["chain_of_thought"] = *e.prompt_cot;
    j["prompts"] = p;
  }
  return j;
}

std::vector<std::string> string_list(const json& j, std::string_view key, const std::string& path) {
  const auto lp = join(path, key);
  const auto& arr = array_at(need(j, key, path), lp);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(as_string(arr[i], index(lp, i)));
  return out;
}

ManifestEntry entry_from(const json& j, const std::string& path) {
  object_at(j, path);
  ManifestEntry e;
  e.video_id = req_string(j, "video_id", path);
  try {
    e.category = parse_category(req_string(j, "category", path));
  } catch (const Error& err) {
    bad(join(path, "category"), err.what());
  }
  e.labels = string_list(j, "labels", path);
  e.params = params_from(need(j, "params", path), join(path, "params"));
  e.source = source_from(need(j, "source", path), join(path, "source"));
  e.container = req_string(j, "container", path);
  try {
    e.format = parse_video_format(req_string(j, "format", path));
  } catch (const Error& err) {
    bad(join(path, "format"), err.what());
  }
  if (const json* p = find(j, "prompts")) {
    const auto pp = join(path, "prompts");
    object_at(*p, pp);
    e.prompt_direct = opt_string(*p, "direct", pp);
    e.prompt_cot = opt_string(*p, "chain_of_thought", pp);
  }
  return e;
}

LabelSet to_label_set(const ManifestEntry& e) { return {e.video_id, e.category, e.labels}; }

}  // namespace

void validate(const VideoManifest& m) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const auto& e = m.entries[i];
    const auto path = index("entries", i);
    try {
      validate(to_label_set(e));
    } catch (const Error& err) {
      bad(join(path, err.field()), err.what());
    }
    if (!seen.insert(e.video_id).second) {
      throw Error(ErrorCode::DuplicateVideoId, "duplicate video_id '" + e.video_id + "'",
                  join(path, "video_id"));
    }
    if (e.container.empty()) bad(join(path, "container"), "empty container path");
    try {
      validate_params(e.params);
    } catch (const Error& err) {
      throw Error(err.code(), err.what(), join(join(path, "params"), err.field()));
    }
  }
}

std::string serialize(const VideoManifest& m) {
  validate(m);
  json entries = json::array();
  for (const auto& e : m.entries) entries.push_back(entry_json(e));
  return dump({{"schema_version", kSchemaVersion}, {"entries", entries}});
}

VideoManifest parse_manifest(std::string_view text) {
  const json j = parse_text(text, "manifest");
  object_at(j, "");
  check_version(j, "manifest");
  const auto& arr = array_at(need(j, "entries", ""), "entries");
  VideoManifest m;
  for (std::size_t i = 0; i < arr.size(); ++i) m.entries.push_back(entry_from(arr[i], index("entries", i)));
  validate(m);
  return m;
}

VideoManifest load_manifest(const fs::path& file) {
  const auto bytes = read_file(file);
  return parse_manifest({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

void save_manifest(const VideoManifest& m, const fs::path& file) {
  const auto text = serialize(m);
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
  }
  write_file(file, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<LabelSet> label_sets(const VideoManifest& m) {
  std::vector<LabelSet> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(to_label_set(e));
  return out;
}

std::string serialize(const std::vector<LabelSet>& labels) {
  json arr = json::array();
  std::set<std::string> seen;
  for (const auto& l : labels) {
    validate(l);
    if (!seen.insert(l.video_id).second) {
      throw Error(ErrorCode::DuplicateVideoId, "duplicate video_id '" + l.video_id + "'");
    }
    arr.push_back({{"video_id", l.video_id}, {"category", to_string(l.category)}, {"labels", l.labels}});
  }
  return dump({{"schema_version", kSchemaVersion}, {"label_sets", arr}});
}

std::vector<LabelSet> parse_label_sets(std::string_view text) {
  const json j = parse_text(text, "label file");
  object_at(j, "");
  check_version(j, "label file");
  const auto& arr = array_at(need(j, "label_sets", ""), "label_sets");
  std::vector<LabelSet> out;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto p = index("label_sets", i);
    object_at(arr[i], p);
    LabelSet l;
    l.video_id = req_string(arr[i], "video_id", p);
    try {
      l.category = parse_category(req_string(arr[i], "category", p));
    } catch (const Error& err) {
      bad(join(p, "category"), err.what());
    }
    l.labels = string_list(arr[i], "labels", p);
    try {
      validate(l);
    } catch (const Error& err) {
      bad(join(p, err.field()), err.what());
    }
    if (!seen.insert(l.video_id).second) {
      throw Error(ErrorCode::DuplicateVideoId, "duplicate video_id '" + l.video_id + "'",
                  join(p, "video_id"));
    }
    out.push_back(std::move(l));
  }
  return out;
}

std::optional<ContentMask> entry_mask(const ManifestEntry& e, const fs::path& base_dir) {
  const int w = e.params.width;
  const int h = e.params.height;
  struct V {
    int w, h;
    const fs::path& base;
    std::optional<ContentMask> operator()(const TextSource& t) const {
      const int scale = t.scale > 0 ? t.scale : fit_text_scale(t.text, w, h);
      return render_text_mask({t.text, scale, w, h});
    }
    std::optional<ContentMask> operator()(const ShapeSource& s) const {
      return render_shape_mask({s.geometry, w, h});
    }
    std::optional<ContentMask> operator()(const MaskFileSource& m) const {
      return load_mask_file(resolve(base, m.path), w, h);
    }
    std::optional<ContentMask> operator()(const DepthSource&) const { return std::nullopt; }
  };
  return std::visit(V{w, h, base_dir}, e.source);
}

FrameSequence render_entry(const ManifestEntry& e, const fs::path& base_dir) {
  const auto vp = validate_params(e.params);
  if (const auto* d = std::get_if<DepthSource>(&e.source)) {
    const auto p = resolve(base_dir, d->path);
    std::error_code ec;
    DepthSequence depth = fs::is_directory(p, ec) ? load_depth_sequence(p)
                                                  : DepthSequence({read_png(p)});
    return encode_depth_animation(depth, d->thresholds, vp);
  }
  return encode_mask_animation(*entry_mask(e, base_dir), vp);
}

// ---- Responses -------------------------------------------------------------

namespace {

json response_json(const ResponseRecord& r) {
  json j{{"video_id", r.video_id},
         {"responder_id", r.responder_id},
         {"response_text", r.response_text},
         {"timestamp", r.timestamp}};
  if (r.perceptibility) j["perceptibility"] = *r.perceptibility;
  if (r.fps_shown) j["fps_shown"] = *r.fps_shown;
  if (r.prompt_id) j["prompt_id"] = *r.prompt_id;
  if (r.session_id) j["session_id"] = *r.session_id;
  return j;
}

ResponseRecord response_from(const json& j, const std::string& path) {
  object_at(j, path);
  ResponseRecord r;
  r.video_id = req_string(j, "video_id", path);
  r.responder_id = req_string(j, "responder_id", path);
  r.response_text = req_string(j, "response_text", path);
  r.perceptibility = opt_int(j, "perceptibility", path);
  r.fps_shown = opt_int(j, "fps_shown", path);
  r.prompt_id = opt_string(j, "prompt_id", path);
  r.session_id = opt_string(j, "session_id", path);
  if (const json* t = find(j, "timestamp")) r.timestamp = as_double(*t, join(path, "timestamp"));
  try {
    validate(r);
  } catch (const Error& err) {
    bad(join(path, err.field()), err.what());
  }
  return r;
}

}  // namespace

std::string serialize_line(const ResponseRecord& r) {
  validate(r);
  return response_json(r).dump(-1, ' ', false, json::error_handler_t::replace);
}

ResponseRecord parse_response(std::string_view line) {
  return response_from(parse_text(line, "response"), "");
}

std::vector<ResponseRecord> parse_response_log(std::string_view text) {
  std::vector<ResponseRecord> out;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto where = "line[" + std::to_string(lineno) + "]";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      bad(where, std::string("not valid JSON: ") + e.what());
    }
    out.push_back(response_from(j, where));
  }
  return out;
}

std::vector<ResponseRecord> load_response_log(const fs::path& file) {
  const auto bytes = read_file(file);
  return parse_response_log({reinterpret_cast<const char*>(bytes.data()), bytes.size()});
}

std::vector<RosterEntry> parse_roster(std::string_view text) {
  const json j = parse_text(text, "roster");
  object_at(j, "");
  const auto& arr = array_at(need(j, "roster", ""), "roster");
  std::vector<RosterEntry> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto p = index("roster", i);
    object_at(arr[i], p);
    out.push_back({req_string(arr[i], "responder_id", p), req_string(arr[i], "video_id", p),
                   opt_int(arr[i], "fps_shown", p)});
  }
  return out;
}

ResponseLog::ResponseLog(fs::path file) : file_(std::move(file)) {
  if (file_.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file_.parent_path(), ec);
  }
  fd_ = ::open(file_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::IoFailure, "cannot open " + file_.string() + ": " + std::strerror(errno));
  }
}

ResponseLog::~ResponseLog() {
  if (fd_ >= 0) ::close(fd_);
}

void ResponseLog::append(const ResponseRecord& r) {
  const auto line = serialize_line(r) + "\n";
  std::lock_guard lock(mu_);
  const auto n = ::write(fd_, line.data(), line.size());
  if (n != static_cast<ssize_t>(line.size())) {
    throw Error(ErrorCode::IoFailure, "short append to " + file_.string());
  }
}

std::vector<ResponseRecord> ResponseLog::read_all() const {
  std::lock_guard lock(mu_);
  return load_response_log(file_);
}

// ---- Reports ---------------------------------------------------------------

namespace {

json metric_json(const MetricValue& m) {
  json v;
  switch (m.status) {
    case MetricStatus::Finite: v = round_sig6(m.db); break;
    case MetricStatus::NegativeInfinity: v = "-inf"; break;
    case MetricStatus::PositiveInfinity: v = "inf"; break;
    case MetricStatus::NotApplicable: v = "n/a"; break;
  }
  json j{{"db", v}};
  if (!m.note.empty()) j["note"] = m.note;
  return j;
}

MetricValue metric_from(const json& j, const std::string& path) {
  object_at(j, path);
  const auto& v = need(j, "db", path);
  const auto vp = join(path, "db");
  MetricValue m;
  if (v.is_number()) {
    m = MetricValue::from_db(v.get<double>());
  } else {
    const auto s = as_string(v, vp);
    if (s == "-inf") m = MetricValue::from_db(-std::numeric_limits<double>::infinity());
    else if (s == "inf") m = MetricValue::from_db(std::numeric_limits<double>::infinity());
    else if (s == "n/a") m = MetricValue::not_applicable("");
    else bad(vp, "expected a number, \"-inf\", \"inf\" or \"n/a\"");
  }
  m.note = opt_string(j, "note", path).value_or("");
  return m;
}

std::string_view mask_source_name(MaskSource s) {
  return s == MaskSource::GroundTruth ? "ground_truth" : "estimated";
}

MaskSource mask_source_from(const json& j, std::string_view key, const std::string& path) {
  const auto s = req_string(j, key, path);
  if (s == "ground_truth") return MaskSource::GroundTruth;
  if (s == "estimated") return MaskSource::Estimated;
  bad(join(path, key), "expected \"ground_truth\" or \"estimated\"");
}

json tally_json(const Tally& t) {
  return {{"correct", t.correct}, {"count", t.count}, {"accuracy", round_sig6(t.fraction())}};
}

json category_tallies(const std::map<Category, Tally>& m) {
  json j = json::object();
  for (const auto& [c, t] : m) j[std::string(to_string(c))] = tally_json(t);
  return j;
}

}  // namespace

std::string serialize(const StoredSnrReport& s) {
  const auto& r = s.report;
  json cfg{{"f0", r.config.f0},
           {"tau", r.config.tau},
           {"local_window", r.config.local_window},
           {"mask_source", mask_source_name(r.config.mask_source)}};
  if (r.config.border_exclude) cfg["border_exclude"] = *r.config.border_exclude;
  json j{{"schema_version", kSchemaVersion},
         {"video_id", s.video_id},
         {"basic", metric_json(r.basic)},
         {"perceptual", metric_json(r.perceptual)},
         {"temporal_coherence", metric_json(r.temporal_coherence)},
         {"motion_contrast", metric_json(r.motion_contrast)},
         {"combined", metric_json(r.combined)},
         {"contentless", r.contentless},
         {"mask_source_used", mask_source_name(r.mask_source_used)},
         {"frame_count", r.frame_count},
         {"width", r.width},
         {"height", r.height},
         {"fps", r.fps},
         {"config", cfg},
         {"flow",
          {{"window", r.flow.window},
           {"max_disp", r.flow.max_disp},
           {"levels", r.flow.levels},
           {"smoothing", r.flow.smoothing}}},
         {"notes", r.notes}};
  if (r.params) j["params"] = params_json(*r.params);
  return dump(j);
}

StoredSnrReport parse_snr_report(std::string_view text) {
  const json j = parse_text(text, "SNR report");
  object_at(j, "");
  check_version(j, "SNR report");
  StoredSnrReport s;
  auto& r = s.report;
  s.video_id = req_string(j, "video_id", "");
  r.basic = metric_from(need(j, "basic", ""), "basic");
  r.perceptual = metric_from(need(j, "perceptual", ""), "perceptual");
  r.temporal_coherence = metric_from(need(j, "temporal_coherence", ""), "temporal_coherence");
  r.motion_contrast = metric_from(need(j, "motion_contrast", ""), "motion_contrast");
  r.combined = metric_from(need(j, "combined", ""), "combined");
  r.contentless = as_bool(need(j, "contentless", ""), "contentless");
  r.mask_source_used = mask_source_from(j, "mask_source_used", "");
  r.frame_count = as_size(need(j, "frame_count", ""), "frame_count");
  r.width = req_int(j, "width", "");
  r.height = req_int(j, "height", "");
  r.fps = req_int(j, "fps", "");
  const auto& c = object_at(need(j, "config", ""), "config");
  r.config.f0 = req_double(c, "f0", "config");
  r.config.tau = req_double(c, "tau", "config");
  r.config.local_window = req_int(c, "local_window", "config");
  r.config.border_exclude = opt_int(c, "border_exclude", "config");
  r.config.mask_source = mask_source_from(c, "mask_source", "config");
  const auto& f = object_at(need(j, "flow", ""), "flow");
  r.flow.window = req_int(f, "window", "flow");
  r.flow.max_disp = req_int(f, "max_disp", "flow");
  r.flow.levels = req_int(f, "levels", "flow");
  r.flow.smoothing = req_int(f, "smoothing", "flow");
  r.notes = string_list(j, "notes", "");
  if (const json* p = find(j, "params")) r.params = params_from(*p, "params");
  return s;
}

std::string serialize(const ThresholdReport& r) {
  json bins = json::array();
  for (const auto& b : r.bins) {
    bins.push_back({{"lower_db", round_sig6(b.lower_db)},
                    {"upper_db", round_sig6(b.upper_db)},
                    {"correct", b.tally.correct},
                    {"count", b.tally.count},
                    {"accuracy", round_sig6(b.tally.fraction())}});
  }
  json j{{"schema_version", kSchemaVersion},
         {"bin_width_db", round_sig6(r.bin_width_db)},
         {"origin_db", round_sig6(r.origin_db)},
         {"bins", bins},
         {"skipped_non_finite", r.skipped_non_finite},
         {"max_jump", round_sig6(r.max_jump)},
         {"binary", r.binary}};
  if (r.step_db) j["step_db"] = round_sig6(*r.step_db);
  return dump(j);
}

ThresholdReport parse_threshold_report(std::string_view text) {
  const json j = parse_text(text, "threshold report");
  object_at(j, "");
  check_version(j, "threshold report");
  ThresholdReport r;
  r.bin_width_db = req_double(j, "bin_width_db", "");
  r.origin_db = req_double(j, "origin_db", "");
  const auto& arr = array_at(need(j, "bins", ""), "bins");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto p = index("bins", i);
    object_at(arr[i], p);
    SnrBin b;
    b.lower_db = req_double(arr[i], "lower_db", p);
    b.upper_db = req_double(arr[i], "upper_db", p);
    b.tally.correct = as_size(need(arr[i], "correct", p), join(p, "correct"));
    b.tally.count = as_size(need(arr[i], "count", p), join(p, "count"));
    if (b.tally.correct > b.tally.count) bad(join(p, "correct"), "exceeds count");
    r.bins.push_back(b);
  }
  r.skipped_non_finite = as_size(need(j, "skipped_non_finite", ""), "skipped_non_finite");
  r.max_jump = req_double(j, "max_jump", "");
  r.binary = as_bool(need(j, "binary", ""), "binary");
  if (const json* s = find(j, "step_db")) r.step_db = as_double(*s, "step_db");
  return r;
}

namespace {

void trim_line(std::ostringstream& os) {
  auto s = os.str();
  while (!s.empty() && s.back() == ' ') s.pop_back();
  os.str(s + "\n");
  os.seekp(0, std::ios::end);
}

}  // namespace

std::string render_snr_table(const std::vector<std::pair<Category, SnrReport>>& reports) {
  static constexpr const char* kCols[] = {"Basic SNR (dB)", "Perceptual SNR (dB)",
                                          "Temporal Coherence SNR (dB)",
                                          "Motion Contrast SNR (dB)"};
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-16s", "Category");
  os << buf;
  for (const char* c : kCols) {
    std::snprintf(buf, sizeof buf, " | %-27s", c);
    os << buf;
  }
  trim_line(os);
  for (auto cat : kCategories) {
    std::array<std::vector<double>, 4> cols;
    std::size_t n = 0;
    for (const auto& [c, r] : reports) {
      if (c != cat) continue;
      ++n;
      const MetricValue* m[] = {&r.basic, &r.perceptual, &r.temporal_coherence, &r.motion_contrast};
      for (int k = 0; k < 4; ++k) {
        if (m[k]->finite()) cols[k].push_back(m[k]->db);
      }
    }
    if (n == 0) continue;
    std::snprintf(buf, sizeof buf, "%-16s", std::string(display_name(cat)).c_str());
    os << buf;
    for (const auto& col : cols) {
      std::string cell = "n/a";
      if (!col.empty()) {
        const auto st = summarize_ratings(col);
        std::snprintf(buf, sizeof buf, "%.2f +- %.2f", st.mean, st.stdev);
        cell = buf;
        if (col.size() != n) cell += " (" + std::to_string(col.size()) + "/" + std::to_string(n) + ")";
      }
      std::snprintf(buf, sizeof buf, " | %-27s", cell.c_str());
      os << buf;
    }
    trim_line(os);
  }
  return os.str();
}

std::string serialize(const AccuracyReport& r) {
  json responders = json::object();
  for (const auto& [who, t] : r.per_responder) {
    json e = tally_json(t);
    e["per_category"] = category_tallies(r.per_responder_category.at(who));
    responders[who] = e;
  }
  json fps = json::object();
  for (const auto& [f, cells] : r.per_fps) fps[std::to_string(f)] = category_tallies(cells);
  json prompts = json::object();
  for (const auto& [p, t] : r.per_prompt) prompts[p] = tally_json(t);
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    json e{{"video_id", v.video_id},
           {"responder_id", v.responder_id},
           {"correct", v.correct},
           {"answered", v.answered}};
    if (v.response) e["response_text"] = *v.response;
    verdicts.push_back(e);
  }
  return dump({{"schema_version", kSchemaVersion},
               {"mode", r.mode == ScoringMode::Roster ? "roster" : "answered_only"},
               {"overall", tally_json(r.overall)},
               {"per_category", category_tallies(r.per_category)},
               {"per_responder", responders},
               {"per_fps", fps},
               {"per_prompt", prompts},
               {"verdicts", verdicts}});
}

}  // namespace spooky
