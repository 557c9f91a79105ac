#include <doctest.h>

#include <fstream>
#include <sstream>
#include <thread>

#include "spooky/encoder.hpp"
#include "spooky/image_io.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/store.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace spooky;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

std::string field_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.field();
  }
  FAIL("expected an Error");
  return {};
}

FrameSequence tiny_video(std::uint64_t seed = 1, int w = 32, int h = 24) {
  EncodingParams e;
  e.width = w;
  e.height = h;
  e.fps = 6;
  e.duration_s = 1.0;
  e.seed = seed;
  const auto mask = render_shape_mask({CircleShape{{w / 2.0, h / 2.0}, 6}, w, h});
  return encode_mask_animation(mask, validate_params(e));
}

std::span<const std::uint8_t> as_span(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

TEST_CASE("2x2 Y4M fixture matches byte for byte") {
  const FrameSequence seq({FrameBuffer(2, 2, {0, 255, 255, 0})}, 30);
  CHECK(encode_y4m(seq) == oracle::y4m_2x2());
  std::ostringstream os;
  CHECK(write_y4m(seq, os) == oracle::y4m_2x2().size());
  const auto back = decode_y4m(oracle::y4m_2x2());
  REQUIRE(back.size() == 1);
  CHECK(back.fps() == 30);
  CHECK(back[0] == FrameBuffer(2, 2, {0, 255, 255, 0}));
}

TEST_CASE("Y4M round trips generator output") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto v = tiny_video(seed);
    const auto back = decode_y4m(encode_y4m(v));
    CHECK(back.same_frames(v));
    CHECK(back.fps() == v.fps());
    CHECK(encode_y4m(back) == encode_y4m(v));
  }
}

TEST_CASE("Y4M writer errors") {
  const FrameSequence odd({FrameBuffer(961, 2)}, 30);
  CHECK(code_of([&] { encode_y4m(odd); }) == ErrorCode::OddDimensions);
  std::ostringstream os;
  os.setstate(std::ios::badbit);
  CHECK(code_of([&] { write_y4m(tiny_video(), os); }) == ErrorCode::SinkFailure);
}

TEST_CASE("Y4M reader errors") {
  auto read = [](const std::string& s) { return decode_y4m(as_span(s)); };
  CHECK(code_of([&] { read("NOTY4M W2 H2 F30:1\n"); }) == ErrorCode::BadHeader);
  CHECK(code_of([&] { read("YUV4MPEG2 W2 F30:1\nFRAME\n"); }) == ErrorCode::BadHeader);
  CHECK(code_of([&] { read("YUV4MPEG2 W2 H2 F30:1 C444\nFRAME\n"); }) ==
        ErrorCode::UnsupportedChromaTag);
  CHECK(code_of([&] { read("YUV4MPEG2 W2 H2 F30:1 It\nFRAME\n"); }) == ErrorCode::BadHeader);
  std::string missing_marker = "YUV4MPEG2 W2 H2 F30:1\n";
  missing_marker += std::string("\x00\xff\xff\x00\x80\x80", 6);
  CHECK(code_of([&] { read(missing_marker); }) == ErrorCode::BadHeader);
  auto full = oracle::y4m_2x2();
  full.resize(full.size() - 3);
  CHECK(code_of([&] { decode_y4m(full); }) == ErrorCode::TruncatedFrame);
  CHECK(code_of([&] { read("YUV4MPEG2 W2 H2 F30:1\n"); }) == ErrorCode::TruncatedFrame);
  // Other C420 variants and frame parameters are accepted.
  std::string ok = "YUV4MPEG2 W2 H2 F25:1 C420mpeg2 XYSCSS=420MPEG2\nFRAME Ixyz\n";
  ok += std::string("\x01\x02\x03\x04\x80\x80", 6);
  const auto s = read(ok);
  CHECK(s.fps() == 25);
  CHECK(s[0].at(1, 1) == 4);
}

TEST_CASE("PNG sequences round trip with a sidecar") {
  fixture::TempDir dir("pngseq");
  const auto v = tiny_video(4);
  const auto files = write_png_sequence(v, dir / "seq");
  REQUIRE(files.size() == v.size());
  CHECK(files[0].filename() == "frame_000000.png");
  CHECK(files[2].filename() == "frame_000002.png");
  CHECK(fs::exists(dir / "seq" / std::string(kSidecarName)));
  const auto back = read_png_sequence(dir / "seq");
  CHECK(back.same_frames(v));
  CHECK(back.fps() == 6);
  REQUIRE(back.params().has_value());
  CHECK(*back.params() == *v.params());

  write_png(dir / "seq" / "frame_000099.png", FrameBuffer(4, 4));
  CHECK(code_of([&] { read_png_sequence(dir / "seq"); }) == ErrorCode::MixedDimensions);
  fs::create_directories(dir / "empty");
  CHECK(code_of([&] { read_png_sequence(dir / "empty"); }) == ErrorCode::EmptyDirectory);
  CHECK(code_of([&] { read_png_sequence(dir / "nope"); }) == ErrorCode::IoFailure);
}

TEST_CASE("write_video and read_video dispatch on the path") {
  fixture::TempDir dir("video");
  const auto v = tiny_video(2);
  write_video(v, dir / "a.y4m", VideoFormat::Y4m);
  write_video(v, dir / "b", VideoFormat::PngSequence);
  CHECK(read_video(dir / "a.y4m").same_frames(v));
  CHECK(read_video(dir / "b").same_frames(v));
  CHECK(parse_video_format("png") == VideoFormat::PngSequence);
  CHECK(to_string(VideoFormat::Y4m) == "y4m");
  CHECK(code_of([] { parse_video_format("mp4"); }) == ErrorCode::SchemaViolation);
  CHECK(code_of([&] { read_video(dir / "missing.y4m"); }) == ErrorCode::IoFailure);
}

TEST_CASE("empty manifest is valid") {
  const VideoManifest m;
  const auto text = serialize(m);
  CHECK(parse_manifest(text).entries.empty());
  CHECK(text.find("\"schema_version\": 1") != std::string::npos);
}

TEST_CASE("manifest serialization is canonical") {
  VideoManifest m = fixture::hand_scored_manifest();
  m.entries[0].prompt_direct = "What word is shown?";
  ManifestEntry poly = fixture::small_entry("poly", Category::Shapes, {"triangle"}, 9);
  poly.source = ShapeSource{PolygonShape{{{10, 10}, {50, 10}, {30, 50}}}};
  poly.format = VideoFormat::PngSequence;
  poly.container = "videos/poly";
  m.entries.push_back(poly);
  ManifestEntry rect = fixture::small_entry("rect", Category::Shapes, {"square"}, 10);
  rect.source = ShapeSource{RectangleShape{{8, 8}, 20, 20}};
  rect.params.velocity = {1.5, -2.0};
  rect.params.density = 0.3;
  rect.params.block_size = 2;
  rect.params.seed = 0xFFFFFFFFFFFFFFFFULL;
  m.entries.push_back(rect);
  ManifestEntry depth = fixture::small_entry("dep", Category::DynamicScenes, {"man", "person"}, 11);
  depth.source = DepthSource{"depth/clip", {100, 255}};
  m.entries.push_back(depth);
  ManifestEntry file = fixture::small_entry("obj", Category::ObjectImages, {"ant", "insect"}, 12);
  file.source = MaskFileSource{"masks/ant.png"};
  m.entries.push_back(file);

  const auto once = serialize(m);
  const auto parsed = parse_manifest(once);
  CHECK(serialize(parsed) == once);
  REQUIRE(parsed.entries.size() == m.entries.size());
  CHECK(parsed.entries[6].params == rect.params);
  CHECK(parsed.entries[0].prompt_direct == m.entries[0].prompt_direct);
  CHECK(std::get<DepthSource>(parsed.entries[7].source).thresholds.lower == 100);
  CHECK(parsed.entries[5].format == VideoFormat::PngSequence);
}

TEST_CASE("manifest validation") {
  VideoManifest m = fixture::hand_scored_manifest();
  m.entries.push_back(m.entries[0]);
  CHECK(code_of([&] { serialize(m); }) == ErrorCode::DuplicateVideoId);

  const std::string bad_category =
      R"({"schema_version":1,"entries":[{"video_id":"a","category":"words"}]})";
  CHECK(code_of([&] { parse_manifest(bad_category); }) == ErrorCode::SchemaViolation);
  CHECK(field_of([&] { parse_manifest(bad_category); }).rfind("entries[0]", 0) == 0);
  CHECK(code_of([] { parse_manifest("{not json"); }) == ErrorCode::SchemaViolation);

  VideoManifest two_labels = fixture::hand_scored_manifest();
  two_labels.entries[1].labels.push_back("fishes");
  CHECK(field_of([&] { validate(two_labels); }) == "entries[1].labels");
}

TEST_CASE("every manifest entry regenerates byte for byte") {
  fixture::TempDir dir("regen");
  fs::create_directories(dir / "masks");
  fs::create_directories(dir / "depth");
  write_png(dir / "masks/blob.png",
            FrameBuffer(16, 16, [] {
              std::vector<std::uint8_t> px(256, 0);
              for (int y = 4; y < 12; ++y)
                for (int x = 5; x < 11; ++x) px[y * 16 + x] = 255;
              return px;
            }()));
  for (int k = 0; k < 3; ++k) {
    write_png(dir / ("depth/" + std::to_string(k) + ".png"),
              FrameBuffer(64, 64, static_cast<std::uint8_t>(80 * k)));
  }

  VideoManifest m = fixture::hand_scored_manifest();
  ManifestEntry file = fixture::small_entry("obj", Category::ObjectImages, {"box"}, 12);
  file.source = MaskFileSource{"masks/blob.png"};
  m.entries.push_back(file);
  ManifestEntry depth = fixture::small_entry("dep", Category::DynamicScenes, {"man"}, 13);
  depth.source = DepthSource{"depth", {100, 255}};
  depth.format = VideoFormat::PngSequence;
  depth.container = "videos/dep";
  m.entries.push_back(depth);

  for (const auto& e : m.entries) write_video(render_entry(e, dir.path()), dir / e.container, e.format);
  save_manifest(m, dir / "manifest.json");

  const auto loaded = load_manifest(dir / "manifest.json");
  for (const auto& e : loaded.entries) {
    const auto stored = read_video(dir / e.container);
    const auto again = render_entry(e, dir.path());
    CHECK(again.same_frames(stored));
    if (e.format == VideoFormat::Y4m) {
      CHECK(encode_y4m(again) == read_file(dir / e.container));
    }
  }
  CHECK_FALSE(entry_mask(loaded.entries.back(), dir.path()).has_value());
  CHECK(entry_mask(loaded.entries[0], dir.path()).has_value());
}

TEST_CASE("label sets serialize separately") {
  const auto sets = label_sets(fixture::hand_scored_manifest());
  REQUIRE(sets.size() == 5);
  const auto text = serialize(sets);
  const auto back = parse_label_sets(text);
  REQUIRE(back.size() == 5);
  CHECK(back[3].labels == std::vector<std::string>{"circle"});
  CHECK(serialize(back) == text);
}

TEST_CASE("response lines") {
  auto r = fixture::response("t-gold", "p1", "Gold", 5, 30);
  r.session_id = "s1";
  const auto line = serialize_line(r);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = parse_response(line);
  CHECK(back.video_id == "t-gold");
  CHECK(back.perceptibility == 5);
  CHECK(back.session_id == "s1");
  CHECK_FALSE(back.prompt_id.has_value());
  CHECK(serialize_line(back) == line);

  const std::string log = line + "\n\n" + line + "\n";
  CHECK(parse_response_log(log).size() == 2);
  const std::string broken = line + "\n{\"video_id\": 3}\n";
  CHECK(field_of([&] { parse_response_log(broken); }).rfind("line[2]", 0) == 0);
  const std::string rating = R"({"video_id":"a","responder_id":"p","response_text":"x","perceptibility":6})";
  CHECK(code_of([&] { parse_response(rating); }) == ErrorCode::SchemaViolation);
  CHECK(field_of([&] { parse_response(rating); }) == "perceptibility");
}

TEST_CASE("rosters") {
  const auto r = parse_roster(
      R"({"roster":[{"responder_id":"p1","video_id":"a","fps_shown":10},{"responder_id":"p2","video_id":"b"}]})");
  REQUIRE(r.size() == 2);
  CHECK(r[0].fps_shown == 10);
  CHECK_FALSE(r[1].fps_shown.has_value());
  CHECK_THROWS_AS(parse_roster(R"({"roster":[{"video_id":"a"}]})"), Error);
}

TEST_CASE("response log appends whole lines from many writers") {
  fixture::TempDir dir("log");
  ResponseLog log(dir / "r.ndjson");
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 50; ++i) {
        auto r = fixture::response("v" + std::to_string(i), "p" + std::to_string(t),
                                   std::string(200, static_cast<char>('a' + t)));
        log.append(r);
      }
    });
  }
  for (auto& th : threads) th.join();
  const auto all = log.read_all();
  CHECK(all.size() == 400);
  for (const auto& r : all) {
    CHECK(r.response_text.size() == 200);
    CHECK(r.response_text.find_first_not_of(r.response_text[0]) == std::string::npos);
  }
  // A second writer on the same file keeps appending.
  ResponseLog again(dir / "r.ndjson");
  again.append(fixture::response("x", "p", "y"));
  CHECK(load_response_log(dir / "r.ndjson").size() == 401);
}

TEST_CASE("SNR reports round trip with sentinels") {
  StoredSnrReport s;
  s.video_id = "v1";
  s.report.basic = MetricValue::from_db(-48.123456789);
  s.report.perceptual = MetricValue::from_db(-std::numeric_limits<double>::infinity());
  s.report.temporal_coherence = MetricValue::not_applicable("DegenerateCoherence: constant");
  s.report.motion_contrast = MetricValue::from_db(std::numeric_limits<double>::infinity());
  s.report.combined = MetricValue::from_db(-48.123456789);
  s.report.contentless = true;
  s.report.frame_count = 120;
  s.report.width = 960;
  s.report.height = 540;
  s.report.fps = 30;
  s.report.params = EncodingParams{};
  s.report.config.border_exclude = 7;
  s.report.notes = {"a note"};
  const auto text = serialize(s);
  CHECK(text.find("\"-inf\"") != std::string::npos);
  CHECK(text.find("\"inf\"") != std::string::npos);
  CHECK(text.find("\"n/a\"") != std::string::npos);
  CHECK(text.find("-48.1235") != std::string::npos);
  const auto back = parse_snr_report(text);
  CHECK(back.video_id == "v1");
  CHECK(back.report.perceptual.status == MetricStatus::NegativeInfinity);
  CHECK(back.report.motion_contrast.status == MetricStatus::PositiveInfinity);
  CHECK(back.report.temporal_coherence.status == MetricStatus::NotApplicable);
  CHECK(back.report.basic.db == doctest::Approx(-48.1235));
  CHECK(back.report.config.border_exclude == 7);
  CHECK(back.report.contentless);
  CHECK(serialize(back) == text);
}

TEST_CASE("threshold reports round trip") {
  const auto r = snr_threshold_analysis(fixture::step_items(), 0.5);
  const auto text = serialize(r);
  const auto back = parse_threshold_report(text);
  CHECK(back.step_db == r.step_db);
  CHECK(back.binary);
  CHECK(back.bins.size() == r.bins.size());
  CHECK(back.bins[5].tally == r.bins[5].tally);
  CHECK(serialize(back) == text);
}

TEST_CASE("accuracy report JSON keeps counts exact and hides text unless verbose") {
  const auto quiet = serialize(score(fixture::hand_scored_responses(), fixture::hand_scored_labels()));
  CHECK(quiet.find("\"correct\": 3") != std::string::npos);
  CHECK(quiet.find("noon") == std::string::npos);
  ScoreOptions o;
  o.verbose = true;
  const auto loud =
      serialize(score(fixture::hand_scored_responses(), fixture::hand_scored_labels(), o));
  CHECK(loud.find("noon") != std::string::npos);
}

TEST_CASE("SNR table layout") {
  SnrReport a, b;
  a.basic = MetricValue::from_db(-40);
  a.perceptual = MetricValue::from_db(-50);
  a.temporal_coherence = MetricValue::from_db(8);
  a.motion_contrast = MetricValue::from_db(10);
  b = a;
  b.basic = MetricValue::from_db(-44);
  b.motion_contrast = MetricValue::not_applicable("x");
  const auto t = render_snr_table({{Category::Text, a}, {Category::Text, b}, {Category::Shapes, a}});
  for (const char* col : {"Category", "| Basic SNR (dB)", "| Perceptual SNR (dB)",
                          "| Temporal Coherence SNR (dB)", "| Motion Contrast SNR (dB)"}) {
    CHECK(t.find(col) != std::string::npos);
  }
  CHECK(t.find("-42.00 +- 2.00") != std::string::npos);
  CHECK(t.find("(1/2)") != std::string::npos);
  CHECK(t.find("Shapes") != std::string::npos);
}

TEST_CASE("round_sig6") {
  CHECK(round_sig6(1.23456789) == 1.23457);
  CHECK(round_sig6(-49.0712345) == -49.0712);
  CHECK(round_sig6(0.0) == 0.0);
}
