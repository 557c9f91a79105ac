#pragma once

// Shared data fixtures: the hand-scored response set, the synthetic SNR step
// and a scratch directory helper.

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "spooky/eval.hpp"
#include "spooky/store.hpp"

namespace fixture {

namespace fs = std::filesystem;

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("spooky-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

// Five videos: three text, two shapes. Hand count: text 2/3, shapes 1/2,
// overall 3/5.
inline std::vector<spooky::LabelSet> hand_scored_labels() {
  using spooky::Category;
  return {{"t-gold", Category::Text, {"gold"}},
          {"t-fish", Category::Text, {"fish"}},
          {"t-moon", Category::Text, {"moon"}},
          {"s-circle", Category::Shapes, {"circle"}},
          {"s-square", Category::Shapes, {"square"}}};
}

inline spooky::ResponseRecord response(std::string video, std::string responder,
                                       std::string text, int rating = 5, int fps = 30) {
  spooky::ResponseRecord r;
  r.video_id = std::move(video);
  r.responder_id = std::move(responder);
  r.response_text = std::move(text);
  r.perceptibility = rating;
  r.fps_shown = fps;
  r.timestamp = 1700000000.0;
  return r;
}

inline std::vector<spooky::ResponseRecord> hand_scored_responses() {
  return {response("t-gold", "p1", "Gold."),          // correct
          response("t-fish", "p1", "  FISH "),        // correct
          response("t-moon", "p1", "noon", 2),        // wrong
          response("s-circle", "p1", "A circle!", 4), // correct
          response("s-square", "p1", "rectangle", 3)};  // wrong
}

// Accuracy ~0 below 2.5 dB, 6/7 above, bins of 0.5 dB from 0 to 5 dB.
inline std::vector<spooky::ScoredItem> step_items() {
  std::vector<spooky::ScoredItem> items;
  const int below_correct[5] = {0, 1, 0, 1, 0};
  for (int bin = 0; bin < 10; ++bin) {
    for (int k = 0; k < 7; ++k) {
      const double snr = bin * 0.5 + 0.05 + k * 0.05;
      const bool correct = bin < 5 ? k < below_correct[bin] : k < 6;
      items.push_back({"v" + std::to_string(bin) + "-" + std::to_string(k), snr, correct});
    }
  }
  return items;
}

/// Small manifest entry for a text or shape label; renders quickly.
inline spooky::ManifestEntry small_entry(const std::string& id, spooky::Category cat,
                                         std::vector<std::string> labels, std::uint64_t seed) {
  spooky::ManifestEntry e;
  e.video_id = id;
  e.category = cat;
  e.labels = std::move(labels);
  e.params.width = 64;
  e.params.height = 64;
  e.params.fps = 8;
  e.params.duration_s = 1.0;
  e.params.seed = seed;
  if (cat == spooky::Category::Text) {
    std::string upper;
    for (char c : e.labels.front()) upper += static_cast<char>(std::toupper(c));
    e.source = spooky::TextSource{upper, 1};
  } else {
    e.source = spooky::ShapeSource{spooky::CircleShape{{32, 32}, 12}};
  }
  e.container = "videos/" + id + ".y4m";
  return e;
}

inline spooky::VideoManifest hand_scored_manifest() {
  spooky::VideoManifest m;
  std::uint64_t seed = 1;
  for (const auto& l : hand_scored_labels()) {
    m.entries.push_back(small_entry(l.video_id, l.category, l.labels, seed++));
  }
  return m;
}

}  // namespace fixture
