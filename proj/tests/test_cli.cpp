#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int rc = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(SPOOKY_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct Dir {
  fs::path path;
  explicit Dir(const std::string& tag) : path(fs::temp_directory_path() / ("spooky-cli-" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

json entry(const std::string& id, const std::string& category, const std::string& label) {
  json source = category == "text"
                    ? json{{"kind", "text"}, {"text", "A"}, {"scale", 1}}
                    : json{{"kind", "shape"}, {"shape", "circle"}, {"cx", 16}, {"cy", 16}, {"radius", 6}};
  return {{"video_id", id},
          {"category", category},
          {"labels", {label}},
          {"params",
           {{"width", 32}, {"height", 32}, {"fps", 8}, {"duration_s", 1.0}, {"block_size", 1},
            {"density", 0.5}, {"seed", 1}, {"velocity", {{"vx", 0.0}, {"vy", 3.0}}}}},
          {"source", source},
          {"container", "videos/" + id + ".y4m"},
          {"format", "y4m"}};
}

std::string response(const std::string& id, const std::string& text, int rating, int fps = 30) {
  return json{{"video_id", id},         {"responder_id", "p1"}, {"response_text", text},
              {"perceptibility", rating}, {"fps_shown", fps},   {"timestamp", 1700000000}}
             .dump() +
         "\n";
}

void hand_fixture(const Dir& d) {
  json entries = json::array({entry("t-gold", "text", "gold"), entry("t-fish", "text", "fish"),
                              entry("t-moon", "text", "moon"), entry("s-circle", "shapes", "circle"),
                              entry("s-square", "shapes", "square")});
  write(d / "manifest.json", json{{"schema_version", 1}, {"entries", entries}}.dump(2));
  write(d / "responses.ndjson", response("t-gold", "Gold.", 5) + response("t-fish", "  FISH ", 5) +
                                    response("t-moon", "noon", 2) +
                                    response("s-circle", "A circle!", 4) +
                                    response("s-square", "rectangle", 3));
}

std::string stored_report(const std::string& id, double basic) {
  auto db = [](double v) { return json{{"db", v}}; };
  return json{{"schema_version", 1},
              {"video_id", id},
              {"basic", db(basic)},
              {"perceptual", db(basic)},
              {"temporal_coherence", {{"db", "n/a"}}},
              {"motion_contrast", {{"db", "n/a"}}},
              {"combined", db(basic)},
              {"contentless", false},
              {"mask_source_used", "estimated"},
              {"frame_count", 8},
              {"width", 32},
              {"height", 32},
              {"fps", 8},
              {"config", {{"f0", 0.1}, {"tau", 0.1}, {"local_window", 9}, {"mask_source", "estimated"}}},
              {"flow", {{"window", 4}, {"max_disp", 8}, {"levels", 3}, {"smoothing", 1}}},
              {"notes", json::array()}}
      .dump();
}

}  // namespace

TEST_CASE("gen text derives the label and id") {
  Dir d("gen-text");
  const auto r = run("gen text GOLD --seed 7 --size 64x48 --fps 8 --duration 1 --out " + d / "o");
  CHECK(r.rc == 0);
  const auto m = json::parse(slurp(d / "o/manifest.json"));
  REQUIRE(m["entries"].size() == 1);
  CHECK(m["entries"][0]["labels"] == json::array({"gold"}));
  CHECK(m["entries"][0]["params"]["seed"] == 7);
  CHECK(fs::exists(d.path / "o" / m["entries"][0]["container"].get<std::string>()));
}

TEST_CASE("invalid generation flags exit with 2") {
  Dir d("gen-bad");
  const auto r = run("gen shape circle --radius 0 --out " + d / "o");
  CHECK(r.rc == 2);
  CHECK(r.out.find("DegenerateShape") != std::string::npos);
  CHECK(run("gen text GOLD --velocity 0,0 --out " + d / "o").rc == 2);
  CHECK(run("gen text GOLD --density 2 --out " + d / "o").rc == 2);
  CHECK(run("gen nothing").rc == 2);
}

TEST_CASE("batch generation yields unique ids and is reproducible") {
  Dir d("batch");
  json videos = json::array();
  for (const char* w : {"GOLD", "FISH", "MOON", "BIRD", "TREE", "LAMP", "DOOR", "BOOK", "SHIP", "STAR"}) {
    videos.push_back({{"kind", "text"}, {"text", w}});
  }
  for (int i = 0; i < 5; ++i) videos.push_back({{"kind", "shape"}, {"shape", "circle"}});
  write(d.path / "spec.json",
        json{{"defaults", {{"size", "64x48"}, {"fps", 6}, {"duration_s", 1.0}}}, {"videos", videos}}
            .dump());
  REQUIRE(run("-j 4 gen batch " + d / "spec.json" + " --out " + d / "a").rc == 0);
  REQUIRE(run("-j 1 gen batch " + d / "spec.json" + " --out " + d / "b").rc == 0);
  const auto m = json::parse(slurp(d / "a/manifest.json"));
  REQUIRE(m["entries"].size() == 15);
  std::set<std::string> ids;
  for (const auto& e : m["entries"]) ids.insert(e["video_id"].get<std::string>());
  CHECK(ids.size() == 15);
  CHECK(slurp(d / "a/manifest.json") == slurp(d / "b/manifest.json"));
  for (const auto& e : m["entries"]) {
    const auto c = e["container"].get<std::string>();
    CHECK(slurp(d.path / "a" / c) == slurp(d.path / "b" / c));
  }
}

TEST_CASE("analyze prints the category table and stores reports") {
  Dir d("analyze");
  REQUIRE(run("gen shape circle --radius 14 --size 96x64 --fps 8 --duration 1 --out " + d / "o").rc == 0);
  const auto r = run("analyze " + d / "o/manifest.json");
  CHECK(r.rc == 0);
  CHECK(r.out.find("Basic SNR (dB)") != std::string::npos);
  CHECK(r.out.find("Shapes") != std::string::npos);
  CHECK(fs::exists(d.path / "o/snr_table.txt"));
  const auto first = slurp(d / "o/snr_table.txt");
  REQUIRE(run("analyze " + d / "o/manifest.json").rc == 0);
  CHECK(slurp(d / "o/snr_table.txt") == first);
  CHECK(run("analyze " + d / "missing.json").rc == 3);
}

TEST_CASE("decode reports contentless videos, IoU and missing files") {
  Dir d("decode");
  std::string y4m = "YUV4MPEG2 W64 H64 F30:1 Ip A1:1 C420jpeg\n";
  std::string frame(64 * 64, '\0');
  for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = ((i * 2654435761u) >> 9) & 1 ? '\xff' : '\0';
  for (int k = 0; k < 4; ++k) y4m += "FRAME\n" + frame + std::string(2 * 32 * 32, '\x80');
  write(d.path / "still.y4m", y4m);
  const auto still = run("decode " + d / "still.y4m" + " --out " + d / "s");
  CHECK(still.rc == 0);
  CHECK(still.out.find("contentless") != std::string::npos);

  REQUIRE(run("gen shape circle --radius 30 --size 128x128 --fps 8 --duration 1 --id c --out " + d / "o").rc == 0);
  const auto m = json::parse(slurp(d / "o/manifest.json"));
  const auto video = d.path / "o" / m["entries"][0]["container"].get<std::string>();
  REQUIRE(run("decode " + video.string() + " --out " + d / "gt").rc == 0);
  const auto r = run("decode " + video.string() + " --mask " + d / "gt/mask.png" + " --out " + d / "x");
  CHECK(r.rc == 0);
  CHECK(r.out.find("IoU: 1.0000") != std::string::npos);
  CHECK(slurp(d / "gt/mask.png") == slurp(d / "x/mask.png"));
  CHECK(run("decode " + d / "nothing.y4m").rc == 3);
  CHECK(run("decode " + video.string() + " --percentile 120").rc == 2);
}

TEST_CASE("evaluate scores the hand fixture") {
  Dir d("evaluate");
  hand_fixture(d);
  const auto r = run("evaluate " + d / "manifest.json" + " " + d / "responses.ndjson" +
                     " --report " + d / "report.json");
  CHECK(r.rc == 0);
  CHECK(r.out.find("answered-only") != std::string::npos);
  CHECK(r.out.find("60.00") != std::string::npos);
  CHECK(r.out.find("66.67") != std::string::npos);
  CHECK(r.out.find("50.00") != std::string::npos);
  const auto j = json::parse(slurp(d / "report.json"));
  CHECK(j["overall"]["correct"] == 3);
  CHECK(j["overall"]["count"] == 5);
  CHECK(slurp(d / "report.json").find("noon") == std::string::npos);

  const auto again = run("evaluate " + d / "manifest.json" + " " + d / "responses.ndjson" +
                         " --report " + d / "report2.json");
  CHECK(again.out == r.out);
  CHECK(slurp(d / "report.json") == slurp(d / "report2.json"));

  const auto verbose = run("evaluate " + d / "manifest.json" + " " + d / "responses.ndjson" + " --verbose");
  CHECK(verbose.out.find("noon") != std::string::npos);

  write(d.path / "bad.ndjson", response("t-gold", "gold", 9));
  CHECK(run("evaluate " + d / "manifest.json" + " " + d / "bad.ndjson").rc == 2);
  CHECK(run("evaluate " + d / "manifest.json" + " " + d / "none.ndjson").rc == 3);
}

TEST_CASE("evaluate per frame rate") {
  Dir d("per-fps");
  hand_fixture(d);
  write(d.path / "responses.ndjson",
        response("t-gold", "gold", 5, 1) + response("t-fish", "bird", 3, 1) +
            response("t-moon", "moon", 5, 30) + response("s-circle", "circle", 5, 30));
  const auto r = run("evaluate " + d / "manifest.json" + " " + d / "responses.ndjson" + " --per-fps");
  CHECK(r.rc == 0);
  CHECK(r.out.find("50.00") != std::string::npos);
  CHECK(r.out.find("100.00") != std::string::npos);
  CHECK(r.out.find("Average") != std::string::npos);
}

TEST_CASE("threshold analysis finds the step") {
  Dir d("threshold");
  const int correct_low[] = {0, 1, 0, 1, 0};
  json entries = json::array();
  std::string responses;
  fs::create_directories(d.path / "reports");
  for (int k = 0; k < 10; ++k) {
    for (int j = 0; j < 7; ++j) {
      const std::string id = "v" + std::to_string(k) + "-" + std::to_string(j);
      entries.push_back(entry(id, "text", "word"));
      const bool ok = k < 5 ? j < correct_low[k] : j < 6;
      responses += response(id, ok ? "word" : "nothing", 3);
      write(d.path / "reports" / (id + ".json"), stored_report(id, 0.25 + 0.5 * k));
    }
  }
  write(d.path / "manifest.json", json{{"schema_version", 1}, {"entries", entries}}.dump());
  write(d.path / "responses.ndjson", responses);
  const std::string args = "evaluate " + d / "manifest.json" + " " + d / "responses.ndjson" +
                           " --threshold-analysis --snr-from " + d / "reports" +
                           " --bin-width 0.5 --bin-origin 0";
  const auto r = run(args);
  CHECK(r.rc == 0);
  CHECK(r.out.find("step: 2.50 dB") != std::string::npos);
  CHECK(r.out.find("binary threshold: yes") != std::string::npos);
  CHECK(r.out.find("metric: basic") != std::string::npos);
  CHECK(run(args).out == r.out);
}

TEST_CASE("help and usage") {
  CHECK(run("--help").rc == 0);
  CHECK(run("").rc != 0);
  CHECK(run("analyze").rc == 2);
}
