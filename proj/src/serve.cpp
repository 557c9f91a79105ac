#include "spooky/serve.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <regex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "spooky/image_io.hpp"
#include "spooky/noise.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spooky {

namespace {

constexpr const char* kDefaultQuestion = "What do you see in this video?";

HttpReply json_reply(int status, const json& j) {
  return {status, "application/json", j.dump(-1, ' ', false, json::error_handler_t::replace)};
}

HttpReply error_reply(int status, const Error& e) {
  json j{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (!e.field().empty()) j["field"] = e.field();
  return json_reply(status, j);
}

HttpReply not_found(const std::string& what) {
  return json_reply(404, {{"error", "NotFound"}, {"message", what}});
}

std::string completion_code(const std::string& session) {
  std::uint64_t h = 0x6a09e667f3bcc908ULL;
  for (unsigned char c : session) h = mix64(h ^ c);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 8);
}

std::optional<int> query_int(const std::string& query, const std::string& key) {
  std::size_t pos = 0;
  while (pos < query.size()) {
    auto amp = query.find('&', pos);
    if (amp == std::string::npos) amp = query.size();
    const auto kv = query.substr(pos, amp - pos);
    const auto eq = kv.find('=');
    if (eq != std::string::npos && kv.substr(0, eq) == key) {
      try {
        return std::stoi(kv.substr(eq + 1));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, "query parameter " + key + " is not an integer",
                    key);
      }
    }
    pos = amp + 1;
  }
  return std::nullopt;
}

}  // namespace

StudyConfig parse_study_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("study config is not valid JSON: ") + e.what(), "$");
  }
  auto bad = [](const std::string& path, const std::string& msg) {
    throw Error(ErrorCode::SchemaViolation, path + ": " + msg, path);
  };
  if (!j.is_object() || !j.contains("sessions") || !j["sessions"].is_array()) {
    bad("sessions", "expected an array of sessions");
  }
  StudyConfig c;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < j["sessions"].size(); ++i) {
    const auto& s = j["sessions"][i];
    const auto p = "sessions[" + std::to_string(i) + "]";
    if (!s.is_object()) bad(p, "expected an object");
    SessionConfig sc;
    auto str = [&](const char* k, bool required) -> std::optional<std::string> {
      if (!s.contains(k) || s[k].is_null()) {
        if (required) bad(p + "." + k, "missing field");
        return std::nullopt;
      }
      if (!s[k].is_string()) bad(p + "." + k, "expected a string");
      return s[k].get<std::string>();
    };
    sc.session_id = *str("session_id", true);
    sc.responder_id = *str("responder_id", true);
    if (sc.session_id.empty()) bad(p + ".session_id", "empty");
    if (sc.responder_id.empty()) bad(p + ".responder_id", "empty");
    if (!seen.insert(sc.session_id).second) bad(p + ".session_id", "duplicate session id");
    if (s.contains("video_ids")) {
      if (!s["video_ids"].is_array()) bad(p + ".video_ids", "expected an array");
      for (std::size_t k = 0; k < s["video_ids"].size(); ++k) {
        const auto& v = s["video_ids"][k];
        if (!v.is_string()) bad(p + ".video_ids[" + std::to_string(k) + "]", "expected a string");
        sc.video_ids.push_back(v.get<std::string>());
      }
    }
    if (s.contains("shuffle_seed") && !s["shuffle_seed"].is_null()) {
      if (!s["shuffle_seed"].is_number_unsigned()) bad(p + ".shuffle_seed", "expected a non-negative integer");
      sc.shuffle_seed = s["shuffle_seed"].get<std::uint64_t>();
    }
    if (s.contains("fps_shown") && !s["fps_shown"].is_null()) {
      if (!s["fps_shown"].is_number_integer() || s["fps_shown"].get<long long>() < 1 ||
          s["fps_shown"].get<long long>() > 1000) {
        bad(p + ".fps_shown", "expected an integer in 1..1000");
      }
      sc.fps_shown = s["fps_shown"].get<int>();
    }
    if (s.contains("replay_allowed")) {
      if (!s["replay_allowed"].is_boolean()) bad(p + ".replay_allowed", "expected a boolean");
      sc.replay_allowed = s["replay_allowed"].get<bool>();
    }
    if (s.contains("max_duration_s") && !s["max_duration_s"].is_null()) {
      if (!s["max_duration_s"].is_number() || !(s["max_duration_s"].get<double>() > 0)) {
        bad(p + ".max_duration_s", "expected a positive number");
      }
      sc.max_duration_s = s["max_duration_s"].get<double>();
    }
    c.sessions.push_back(std::move(sc));
  }
  return c;
}

std::string serialize(const StudyConfig& c) {
  json arr = json::array();
  for (const auto& s : c.sessions) {
    json j{{"session_id", s.session_id},
           {"responder_id", s.responder_id},
           {"video_ids", s.video_ids},
           {"replay_allowed", s.replay_allowed}};
    if (s.shuffle_seed) j["shuffle_seed"] = *s.shuffle_seed;
    if (s.fps_shown) j["fps_shown"] = *s.fps_shown;
    if (s.max_duration_s) j["max_duration_s"] = *s.max_duration_s;
    arr.push_back(j);
  }
  return json{{"sessions", arr}}.dump(2) + "\n";
}

std::vector<std::string> shuffled(std::vector<std::string> ids, std::uint64_t seed) {
  const auto key = stream_key(seed, 2);
  for (std::size_t i = ids.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(unit_interval(stream_draw(key, i)) *
                                            static_cast<double>(i));
    std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
  }
  return ids;
}

struct StudyServer::Http {
  httplib::Server server;
  std::atomic<bool> running{false};
  std::atomic<bool> stopping{false};
};

StudyServer::StudyServer(VideoManifest manifest, fs::path manifest_dir, StudyConfig config,
                         fs::path response_log, std::optional<fs::path> static_root)
    : manifest_(std::move(manifest)),
      manifest_dir_(std::move(manifest_dir)),
      log_(std::move(response_log)),
      static_root_(std::move(static_root)) {
  validate(manifest_);
  for (auto& sc : config.sessions) {
    Session s;
    s.order = sc.video_ids;
    if (s.order.empty()) {
      for (const auto& e : manifest_.entries) s.order.push_back(e.video_id);
    }
    for (std::size_t i = 0; i < s.order.size(); ++i) {
      if (!entry(s.order[i])) {
        throw Error(ErrorCode::UnknownVideoId,
                    "session '" + sc.session_id + "' lists unknown video '" + s.order[i] + "'",
                    "video_ids[" + std::to_string(i) + "]");
      }
    }
    if (sc.shuffle_seed) s.order = shuffled(std::move(s.order), *sc.shuffle_seed);
    s.config = std::move(sc);
    const auto id = s.config.session_id;
    sessions_.emplace(id, std::move(s));
  }
  std::error_code ec;
  if (fs::exists(log_.path(), ec)) {
    for (const auto& r : log_.read_all()) {
      if (r.session_id) submitted_.emplace(*r.session_id, r.video_id);
    }
  }
}

StudyServer::~StudyServer() { stop(); }

const ManifestEntry* StudyServer::entry(const std::string& id) const {
  for (const auto& e : manifest_.entries) {
    if (e.video_id == id) return &e;
  }
  return nullptr;
}

std::shared_ptr<const FrameSequence> StudyServer::video(const ManifestEntry& e) {
  {
    std::lock_guard lock(mu_);
    if (auto it = cache_.find(e.video_id); it != cache_.end()) return it->second;
  }
  const auto path = fs::path(e.container).is_absolute() ? fs::path(e.container)
                                                        : manifest_dir_ / e.container;
  std::error_code ec;
  auto seq = std::make_shared<const FrameSequence>(fs::exists(path, ec) ? read_video(path)
                                                                        : render_entry(e, manifest_dir_));
  std::lock_guard lock(mu_);
  return cache_.emplace(e.video_id, std::move(seq)).first->second;
}

StudyServer::Shown StudyServer::shown(const ManifestEntry& e, std::optional<int> fps) const {
  const int src_fps = e.params.fps;
  const int src_frames = static_cast<int>(std::lround(e.params.duration_s * src_fps));
  if (!fps || *fps == src_fps) return {src_fps, src_frames};
  return {*fps, std::max(1, static_cast<int>(std::lround(e.params.duration_s * *fps)))};
}

HttpReply StudyServer::session_descriptor(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return not_found("unknown session '" + id + "'");
  const auto& s = it->second;
  json videos = json::array();
  for (std::size_t i = 0; i < s.order.size(); ++i) {
    const auto& e = *entry(s.order[i]);
    const auto sh = shown(e, s.config.fps_shown);
    videos.push_back({{"video_id", e.video_id},
                      {"position", i},
                      {"fps_shown", sh.fps},
                      {"frame_count", sh.frames},
                      {"width", e.params.width},
                      {"height", e.params.height},
                      {"question", e.prompt_direct.value_or(kDefaultQuestion)}});
  }
  json j{{"session_id", id},
         {"responder_id", s.config.responder_id},
         {"replay_allowed", s.config.replay_allowed},
         {"videos", videos}};
  if (s.config.shuffle_seed) j["shuffle_seed"] = *s.config.shuffle_seed;
  if (s.config.max_duration_s) j["max_duration_s"] = *s.config.max_duration_s;
  return json_reply(200, j);
}

HttpReply StudyServer::progress(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return not_found("unknown session '" + id + "'");
  json done = json::array();
  {
    std::lock_guard lock(mu_);
    for (const auto& v : it->second.order) {
      if (submitted_.count({id, v})) done.push_back(v);
    }
  }
  const auto total = it->second.order.size();
  const bool complete = done.size() == total;
  json j{{"session_id", id},
         {"completed", done.size()},
         {"total", total},
         {"done", done},
         {"complete", complete}};
  if (complete) j["completion_code"] = completion_code(id);
  return json_reply(200, j);
}

HttpReply StudyServer::meta(const std::string& id) {
  const auto* e = entry(id);
  if (!e) return not_found("unknown video '" + id + "'");
  const auto sh = shown(*e, std::nullopt);
  return json_reply(200, {{"video_id", e->video_id},
                          {"width", e->params.width},
                          {"height", e->params.height},
                          {"fps", sh.fps},
                          {"frame_count", sh.frames},
                          {"duration_s", e->params.duration_s},
                          {"question", e->prompt_direct.value_or(kDefaultQuestion)}});
}

HttpReply StudyServer::frame(const std::string& id, const std::string& rest) {
  const auto* e = entry(id);
  if (!e) return not_found("unknown video '" + id + "'");
  const auto q = rest.find('?');
  const auto num = rest.substr(0, q);
  std::optional<int> fps;
  try {
    if (q != std::string::npos) fps = query_int(rest.substr(q + 1), "fps");
    if (fps && (*fps < 1 || *fps > 1000)) {
      throw Error(ErrorCode::InvalidArgument, "fps must be in 1..1000", "fps");
    }
  } catch (const Error& err) {
    return error_reply(400, err);
  }
  long long n = -1;
  try {
    std::size_t used = 0;
    n = std::stoll(num, &used);
    if (used != num.size()) n = -1;
  } catch (const std::exception&) {
  }
  const auto sh = shown(*e, fps);
  if (n < 0 || n >= sh.frames) return not_found("frame " + num + " out of range");
  try {
    const auto seq = video(*e);
    const auto src = std::min<std::size_t>(
        static_cast<std::size_t>(n * static_cast<long long>(e->params.fps) / sh.fps),
        seq->size() - 1);
    const auto png = encode_png((*seq)[src]);
    return {200, "image/png", std::string(png.begin(), png.end())};
  } catch (const Error& err) {
    return error_reply(500, err);
  }
}

HttpReply StudyServer::submit(const std::string& body) {
  ResponseRecord r;
  try {
    r = parse_response(body);
  } catch (const Error& err) {
    return error_reply(400, err);
  }
  auto reject = [](ErrorCode c, const std::string& msg, const std::string& field) {
    return error_reply(400, Error(c, msg, field));
  };
  if (!r.session_id) return reject(ErrorCode::SchemaViolation, "session_id is required", "session_id");
  const auto it = sessions_.find(*r.session_id);
  if (it == sessions_.end()) {
    return reject(ErrorCode::SchemaViolation, "unknown session '" + *r.session_id + "'", "session_id");
  }
  const auto& s = it->second;
  if (std::find(s.order.begin(), s.order.end(), r.video_id) == s.order.end()) {
    return reject(ErrorCode::UnknownVideoId, "video '" + r.video_id + "' is not in this session",
                  "video_id");
  }
  if (r.responder_id != s.config.responder_id) {
    return reject(ErrorCode::SchemaViolation, "responder does not own this session", "responder_id");
  }
  if (!r.perceptibility) {
    return reject(ErrorCode::SchemaViolation, "perceptibility is required", "perceptibility");
  }
  if (normalize_response(r.response_text).empty()) {
    return reject(ErrorCode::SchemaViolation, "identification is empty", "response_text");
  }
  if (!r.fps_shown) r.fps_shown = shown(*entry(r.video_id), s.config.fps_shown).fps;
  if (r.timestamp == 0.0) {
    r.timestamp = std::chrono::duration<double>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  }
  std::lock_guard lock(mu_);
  if (!submitted_.emplace(*r.session_id, r.video_id).second) {
    return json_reply(200, {{"status", "duplicate"}, {"video_id", r.video_id}});
  }
  try {
    log_.append(r);
  } catch (const Error& err) {
    submitted_.erase({*r.session_id, r.video_id});
    return error_reply(500, err);
  }
  return json_reply(200, {{"status", "recorded"}, {"video_id", r.video_id}});
}

HttpReply StudyServer::handle(const std::string& method, const std::string& path,
                              const std::string& body) {
  static const std::regex session_re(R"(^/session/([^/?]+)$)");
  static const std::regex progress_re(R"(^/session/([^/?]+)/progress$)");
  static const std::regex meta_re(R"(^/video/([^/?]+)/meta$)");
  static const std::regex frame_re(R"(^/video/([^/?]+)/frame/([^/]+)$)");
  std::smatch m;
  if (method == "POST") {
    if (path == "/responses") return submit(body);
    return not_found(path);
  }
  if (method != "GET") return json_reply(405, {{"error", "MethodNotAllowed"}});
  const auto q = path.find('?');
  const std::string bare = path.substr(0, q);
  if (std::regex_match(bare, m, session_re)) return session_descriptor(m[1]);
  if (std::regex_match(bare, m, progress_re)) return progress(m[1]);
  if (std::regex_match(bare, m, meta_re)) return meta(m[1]);
  if (std::regex_match(path, m, frame_re)) return frame(m[1], m[2]);
  return not_found(path);
}

int StudyServer::bind(const std::string& host, int port) {
  http_ = std::make_unique<Http>();
  auto& svr = http_->server;
  if (static_root_ && !svr.set_mount_point("/", static_root_->string())) {
    throw Error(ErrorCode::IoFailure, "static root " + static_root_->string() + " is not a directory");
  }
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::string target = req.path;
    if (!req.params.empty()) {
      std::string query;
      for (const auto& [k, v] : req.params) query += (query.empty() ? "" : "&") + k + "=" + v;
      target += "?" + query;
    }
    const auto reply = handle(req.method, target, req.body);
    res.status = reply.status;
    res.set_content(reply.body, reply.content_type);
  };
  svr.Get(R"(/session/.+)", forward);
  svr.Get(R"(/video/.+)", forward);
  svr.Post("/responses", forward);
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    http_.reset();
    throw Error(ErrorCode::IoFailure, "cannot listen on " + host + ":" + std::to_string(port));
  }
  return bound;
}

void StudyServer::run() {
  if (!http_) throw Error(ErrorCode::InvalidArgument, "bind() must be called before run()");
  http_->running = true;
  if (!http_->stopping) http_->server.listen_after_bind();
  http_->running = false;
}

// httplib ignores stop() until the listen loop is up, so keep asking.
void StudyServer::stop() {
  if (!http_) return;
  http_->stopping = true;
  while (http_->running) {
    http_->server.stop();
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }
}

}  // namespace spooky
