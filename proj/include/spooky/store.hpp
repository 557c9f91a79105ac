#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "spooky/core_types.hpp"
#include "spooky/encoder.hpp"
#include "spooky/eval.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/snr_metrics.hpp"

namespace spooky {

inline constexpr int kSchemaVersion = 1;

// ---- Y4M -------------------------------------------------------------------

/// Header `YUV4MPEG2 W<w> H<h> F<fps>:1 Ip A1:1 C420jpeg`, then per frame
/// `FRAME`, the luma plane and two 0x80 chroma planes. Returns bytes written.
/// Throws OddDimensions, SinkFailure.
std::size_t write_y4m(const FrameSequence& seq, std::ostream& sink);
std::vector<std::uint8_t> encode_y4m(const FrameSequence& seq);
/// Accepts C420, C420jpeg, C420paldv, C420mpeg2 or no C tag. Frame
/// parameters after FRAME are skipped. Throws BadHeader, TruncatedFrame,
/// UnsupportedChromaTag.
FrameSequence read_y4m(std::istream& source);
FrameSequence decode_y4m(std::span<const std::uint8_t> bytes);

// ---- PNG sequences ---------------------------------------------------------

inline constexpr std::string_view kSidecarName = "sequence.json";

/// frame_000000.png, frame_000001.png, ... plus a sidecar with fps and
/// parameters. Returns the frame paths. Throws IoFailure.
std::vector<std::filesystem::path> write_png_sequence(const FrameSequence& seq,
                                                      const std::filesystem::path& dir);
/// Throws IoFailure, EmptyDirectory, MixedDimensions.
FrameSequence read_png_sequence(const std::filesystem::path& dir);

enum class VideoFormat { Y4m, PngSequence };

std::string_view to_string(VideoFormat f) noexcept;
VideoFormat parse_video_format(std::string_view s);

/// Writes `path` as a .y4m file or as a frame directory.
void write_video(const FrameSequence& seq, const std::filesystem::path& path, VideoFormat f);
/// A directory is read as a PNG sequence, anything else as Y4M.
FrameSequence read_video(const std::filesystem::path& path);

// ---- Manifest --------------------------------------------------------------

/// Text rendered at `scale`; 0 picks the largest scale that fits.
struct TextSource {
  std::string text;
  int scale = 0;
  friend bool operator==(const TextSource&, const TextSource&) = default;
};

struct ShapeSource {
  std::variant<RectangleShape, CircleShape, PolygonShape> geometry;
};

/// Mask image, resampled to the video size. Paths are relative to the
/// manifest's directory unless absolute.
struct MaskFileSource {
  std::string path;
  friend bool operator==(const MaskFileSource&, const MaskFileSource&) = default;
};

/// A depth PNG directory, or a single depth PNG used for every frame.
struct DepthSource {
  std::string path;
  DepthThresholds thresholds;
};

using ContentSource = std::variant<TextSource, ShapeSource, MaskFileSource, DepthSource>;

struct ManifestEntry {
  std::string video_id;
  Category category = Category::Text;
  std::vector<std::string> labels;
  EncodingParams params;
  ContentSource source;
  std::string container;  ///< video path relative to the manifest directory
  VideoFormat format = VideoFormat::Y4m;
  std::optional<std::string> prompt_direct;
  std::optional<std::string> prompt_cot;
};

struct VideoManifest {
  std::vector<ManifestEntry> entries;
};

/// Throws DuplicateVideoId, or SchemaViolation with the entry's field path.
void validate(const VideoManifest& m);

std::string serialize(const VideoManifest& m);
VideoManifest parse_manifest(std::string_view text);
VideoManifest load_manifest(const std::filesystem::path& file);
void save_manifest(const VideoManifest& m, const std::filesystem::path& file);

std::vector<LabelSet> label_sets(const VideoManifest& m);
std::string serialize(const std::vector<LabelSet>& labels);
std::vector<LabelSet> parse_label_sets(std::string_view text);

/// Mask that drives the encoder, for everything but depth sources.
std::optional<ContentMask> entry_mask(const ManifestEntry& e,
                                      const std::filesystem::path& base_dir);
/// Re-runs the encoder from the entry's fields.
FrameSequence render_entry(const ManifestEntry& e, const std::filesystem::path& base_dir);

// ---- Responses -------------------------------------------------------------

std::string serialize_line(const ResponseRecord& r);
/// Throws SchemaViolation with the field path.
ResponseRecord parse_response(std::string_view line);
/// Blank lines are skipped; errors name the line as `line[N]`.
std::vector<ResponseRecord> parse_response_log(std::string_view text);
std::vector<ResponseRecord> load_response_log(const std::filesystem::path& file);

/// `{"roster": [{"responder_id": ..., "video_id": ..., "fps_shown": ...}]}`.
std::vector<RosterEntry> parse_roster(std::string_view text);

/// Append-only log. Each record goes out in a single write on an O_APPEND
/// descriptor, so lines from concurrent writers never interleave.
class ResponseLog {
 public:
  explicit ResponseLog(std::filesystem::path file);
  ResponseLog(const ResponseLog&) = delete;
  ResponseLog& operator=(const ResponseLog&) = delete;
  ~ResponseLog();

  void append(const ResponseRecord& r);
  std::vector<ResponseRecord> read_all() const;
  const std::filesystem::path& path() const noexcept { return file_; }

 private:
  std::filesystem::path file_;
  int fd_ = -1;
  mutable std::mutex mu_;
};

// ---- Reports ---------------------------------------------------------------

struct StoredSnrReport {
  std::string video_id;
  SnrReport report;
};

std::string serialize(const StoredSnrReport& r);
StoredSnrReport parse_snr_report(std::string_view text);

std::string serialize(const ThresholdReport& r);
ThresholdReport parse_threshold_report(std::string_view text);

/// Category rows with mean +- population stdev of each metric over finite
/// values, and the count of finite values when some were not.
std::string render_snr_table(const std::vector<std::pair<Category, SnrReport>>& reports);

/// Exact counts; response text appears only in verbose reports.
std::string serialize(const AccuracyReport& r);

/// `%.6g` then back to double. Applied to every measured value on output.
double round_sig6(double v);

}  // namespace spooky
