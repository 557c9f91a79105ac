#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spooky/core_types.hpp"

namespace spooky {

enum class Category { Text, Shapes, ObjectImages, DynamicScenes };

inline constexpr std::array<Category, 4> kCategories{Category::Text, Category::Shapes,
                                                     Category::ObjectImages,
                                                     Category::DynamicScenes};

/// "text", "shapes", "object_images", "dynamic_scenes".
std::string_view to_string(Category c) noexcept;
/// Human-readable column title, e.g. "Object Images".
std::string_view display_name(Category c) noexcept;
/// Throws SchemaViolation for anything but the four snake_case names.
Category parse_category(std::string_view s);

/// Lowercase, strip punctuation, collapse whitespace, trim, then drop any
/// run of leading "a", "an" or "the". Idempotent.
std::string normalize_response(std::string_view raw);

struct LabelSet {
  std::string video_id;
  Category category = Category::Text;
  std::vector<std::string> labels;
};

/// Text and shapes carry exactly one label; every label is non-empty and
/// already normalized. Throws SchemaViolation naming the field.
void validate(const LabelSet& l);

struct ResponseRecord {
  std::string video_id;
  std::string responder_id;
  std::string response_text;
  std::optional<int> perceptibility;  ///< 1..5
  std::optional<int> fps_shown;
  std::optional<std::string> prompt_id;
  std::optional<std::string> session_id;
  double timestamp = 0.0;  ///< seconds since the epoch
};

/// Throws SchemaViolation for an out-of-range rating or empty ids.
void validate(const ResponseRecord& r);

/// Exact correct/count pair.
struct Tally {
  std::size_t correct = 0;
  std::size_t count = 0;
  double fraction() const noexcept {
    return count ? static_cast<double>(correct) / static_cast<double>(count) : 0.0;
  }
  void add(bool ok) noexcept {
    ++count;
    correct += ok ? 1 : 0;
  }
  friend bool operator==(const Tally&, const Tally&) = default;
};

/// An assignment of a video to a responder. With a roster, assignments that
/// received no response count as incorrect.
struct RosterEntry {
  std::string responder_id;
  std::string video_id;
  std::optional<int> fps_shown;
};

enum class ScoringMode { AnsweredOnly, Roster };

struct ScoreOptions {
  std::optional<std::vector<RosterEntry>> roster;
  bool verbose = false;  ///< echo response text in verdicts
};

struct Verdict {
  std::string video_id;
  std::string responder_id;
  bool correct = false;
  bool answered = true;
  std::optional<std::string> response;  ///< verbose only
};

struct AccuracyReport {
  ScoringMode mode = ScoringMode::AnsweredOnly;
  Tally overall;
  std::map<Category, Tally> per_category;
  std::map<std::string, Tally> per_responder;
  std::map<std::string, std::map<Category, Tally>> per_responder_category;
  /// Keyed by fps shown; responses without fps are left out.
  std::map<int, std::map<Category, Tally>> per_fps;
  std::map<std::string, Tally> per_prompt;
  std::vector<Verdict> verdicts;
};

/// Exact-match accuracy. Throws EmptyInput when there is nothing to score and
/// UnknownVideoId when a response or roster entry has no label set.
AccuracyReport score(const std::vector<ResponseRecord>& responses,
                     const std::vector<LabelSet>& labels, const ScoreOptions& opts = {});

struct RatingStats {
  double mean = 0.0;
  double stdev = 0.0;  ///< population
  std::size_t count = 0;
};

RatingStats summarize_ratings(const std::vector<double>& values);

/// Per-category mean and population stdev of perceptibility ratings. Only
/// categories with ratings appear. Throws NoRatings when none do.
std::map<Category, RatingStats> perceptibility_summary(
    const std::vector<ResponseRecord>& responses, const std::vector<LabelSet>& labels);

/// Per-responder accuracy and mean rating per category plus a mean +- stdev
/// row across responders.
std::string render_responder_table(const std::vector<ResponseRecord>& responses,
                                   const std::vector<LabelSet>& labels);

/// Category rows, one column per fps, and an average row (mean of category
/// accuracies), in percent.
std::string render_fps_table(const AccuracyReport& r);

/// Overall and per-category accuracy as exact counts and percentages.
std::string render_accuracy_table(const AccuracyReport& r);

struct ScoredItem {
  std::string video_id;
  double snr_db = 0.0;
  bool correct = false;
};

struct SnrBin {
  double lower_db = 0.0;  ///< inclusive
  double upper_db = 0.0;  ///< exclusive
  Tally tally;
};

struct ThresholdReport {
  double bin_width_db = 1.0;
  double origin_db = 0.0;
  std::vector<SnrBin> bins;  ///< populated bins in increasing SNR order
  std::size_t skipped_non_finite = 0;
  double max_jump = 0.0;
  std::optional<double> step_db;  ///< absent when no bin pair improves
  bool binary = false;            ///< max_jump > 0.5
};

/// Bins are [origin + k w, origin + (k + 1) w). The step lies midway between
/// the centres of the adjacent populated bins with the largest accuracy
/// increase. Items with non-finite SNR are skipped. Throws InsufficientBins
/// when fewer than two bins are populated.
ThresholdReport snr_threshold_analysis(const std::vector<ScoredItem>& items, double bin_width_db,
                                       double origin_db = 0.0);

std::string render_threshold_table(const ThresholdReport& r);

}  // namespace spooky
