#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spooky/store.hpp"

namespace spooky {

/// One participant's run through a list of videos.
struct SessionConfig {
  std::string session_id;
  std::string responder_id;
  std::vector<std::string> video_ids;  ///< empty means every manifest entry
  std::optional<std::uint64_t> shuffle_seed;
  std::optional<int> fps_shown;  ///< playback rate; defaults to each video's own
  bool replay_allowed = true;
  std::optional<double> max_duration_s;
};

struct StudyConfig {
  std::vector<SessionConfig> sessions;
};

StudyConfig parse_study_config(std::string_view text);
std::string serialize(const StudyConfig& c);

/// Deterministic Fisher-Yates shuffle driven by the toolkit PRNG.
std::vector<std::string> shuffled(std::vector<std::string> ids, std::uint64_t seed);

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Study backend. Request handling is exposed directly so it can be tested
/// without sockets; `listen` wires the same handlers into an HTTP server.
///
///   GET  /session/<id>            ordered video list, no labels
///   GET  /session/<id>/progress   completed / total
///   GET  /video/<id>/meta         size, fps, frame count, question
///   GET  /video/<id>/frame/<n>    grayscale PNG
///   POST /responses               one response record
class StudyServer {
 public:
  StudyServer(VideoManifest manifest, std::filesystem::path manifest_dir, StudyConfig config,
              std::filesystem::path response_log,
              std::optional<std::filesystem::path> static_root = std::nullopt);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  HttpReply handle(const std::string& method, const std::string& path,
                   const std::string& body = {});

  /// Binds and returns the port actually used (0 picks a free one).
  /// Throws IoFailure when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void run();
  void stop();

 private:
  struct Session {
    SessionConfig config;
    std::vector<std::string> order;
  };
  struct Shown {
    int fps = 0;
    int frames = 0;
  };

  HttpReply session_descriptor(const std::string& id);
  HttpReply progress(const std::string& id);
  HttpReply meta(const std::string& id);
  HttpReply frame(const std::string& id, const std::string& n);
  HttpReply submit(const std::string& body);

  const ManifestEntry* entry(const std::string& id) const;
  std::shared_ptr<const FrameSequence> video(const ManifestEntry& e);
  Shown shown(const ManifestEntry& e, std::optional<int> fps_override) const;

  VideoManifest manifest_;
  std::filesystem::path manifest_dir_;
  std::map<std::string, Session> sessions_;
  ResponseLog log_;
  std::optional<std::filesystem::path> static_root_;

  std::mutex mu_;
  std::set<std::pair<std::string, std::string>> submitted_;  ///< (session, video)
  std::map<std::string, std::shared_ptr<const FrameSequence>> cache_;

  struct Http;
  std::unique_ptr<Http> http_;
};

}  // namespace spooky
