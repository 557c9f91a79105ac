// spooky: generate, analyze, decode and evaluate temporally encoded videos.
//
// Exit codes: 0 success, 2 validation or usage error, 3 I/O error.

#include <pthread.h>
#include <signal.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spooky/spooky.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr const char* kOutEnv = "SPOOKY_OUT_DIR";

// A failed C call carried to the top level.
struct Failure {
  int status;
  std::string message;
  std::string field;
};

void check(int status) {
  if (status != SPOOKY_OK) throw Failure{status, spooky_last_error(), spooky_last_error_field()};
}

[[noreturn]] void usage_error(const std::string& msg, const std::string& field = {}) {
  throw Failure{SPOOKY_E_INVALID_ARGUMENT, msg, field};
}

[[noreturn]] void io_error(const std::string& msg) { throw Failure{SPOOKY_E_IO_FAILURE, msg, {}}; }

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (p) Free(p);
  }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Video = Handle<spooky_video, spooky_video_free>;
using Mask = Handle<spooky_mask, spooky_mask_free>;
using Manifest = Handle<spooky_manifest, spooky_manifest_free>;
using Decoding = Handle<spooky_decoding, spooky_decoding_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  spooky_string_free(s);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) io_error("cannot open " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) io_error("cannot write " + p.string());
}

fs::path default_out() {
  const char* env = std::getenv(kOutEnv);
  return env && *env ? fs::path(env) : fs::path("spooky_out");
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "video" : out;
}

// Same rule as the scorer: lowercase, drop punctuation, collapse spaces,
// drop one leading article.
std::string normalize(const std::string& s) {
  std::string out;
  bool space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      space = !out.empty();
    } else if (!std::ispunct(c)) {
      if (space) out.push_back(' ');
      space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  for (const std::string a : {"a ", "an ", "the "}) {
    if (out.size() > a.size() && out.compare(0, a.size(), a) == 0) {
      out.erase(0, a.size());
      break;
    }
  }
  return out;
}

// ---- encoding flags -----------------------------------------------------------

struct ParamFlags {
  std::string size;
  std::optional<int> fps;
  std::optional<double> duration;
  std::string velocity;
  std::optional<int> block;
  std::optional<double> density;
  std::optional<std::uint64_t> seed;

  void add_to(CLI::App* app) {
    app->add_option("--size", size, "Frame size WxH (default 960x540)");
    app->add_option("--fps", fps, "Frames per second (default 30)");
    app->add_option("--duration", duration, "Duration in seconds (default 4)");
    app->add_option("--velocity", velocity, "Foreground velocity 'vy' or 'vx,vy' in px/frame (default 0,3)");
    app->add_option("--block", block, "Noise block size in pixels (default 1)");
    app->add_option("--density", density, "White-block probability (default 0.5)");
    app->add_option("--seed", seed, "Seed (default 0)");
  }

  spooky_params apply(spooky_params p) const {
    if (!size.empty()) {
      int w = 0, h = 0;
      char x = 0;
      std::istringstream is(size);
      if (!(is >> w >> x >> h) || (x != 'x' && x != 'X') || !is.eof()) {
        usage_error("--size expects WxH, got '" + size + "'", "size");
      }
      p.width = w;
      p.height = h;
    }
    if (fps) p.fps = *fps;
    if (duration) p.duration_s = *duration;
    if (!velocity.empty()) {
      const auto comma = velocity.find(',');
      try {
        if (comma == std::string::npos) {
          p.vx = 0.0;
          p.vy = std::stod(velocity);
        } else {
          p.vx = std::stod(velocity.substr(0, comma));
          p.vy = std::stod(velocity.substr(comma + 1));
        }
      } catch (const std::exception&) {
        usage_error("--velocity expects 'vy' or 'vx,vy', got '" + velocity + "'", "velocity");
      }
    }
    if (block) p.block_size = *block;
    if (density) p.density = *density;
    if (seed) p.seed = *seed;
    return p;
  }
};

json params_json(const spooky_params& p) {
  return {{"width", p.width},           {"height", p.height},
          {"fps", p.fps},               {"duration_s", p.duration_s},
          {"velocity", {{"vx", p.vx}, {"vy", p.vy}}},
          {"block_size", p.block_size}, {"density", p.density},
          {"seed", p.seed}};
}

spooky_params params_from(const json& j, spooky_params p) {
  auto num = [&](const char* k, auto& dst) {
    if (j.contains(k)) dst = j[k].get<std::decay_t<decltype(dst)>>();
  };
  if (j.contains("size")) {
    ParamFlags f;
    f.size = j["size"].get<std::string>();
    p = f.apply(p);
  }
  num("width", p.width);
  num("height", p.height);
  num("fps", p.fps);
  num("duration_s", p.duration_s);
  num("vx", p.vx);
  num("vy", p.vy);
  num("block_size", p.block_size);
  num("density", p.density);
  num("seed", p.seed);
  return p;
}

// ---- manifests ----------------------------------------------------------------

struct Job {
  json entry;
};

std::string relative_to(const fs::path& target, const fs::path& base) {
  std::error_code ec;
  const auto abs_t = fs::weakly_canonical(fs::absolute(target), ec);
  const auto abs_b = fs::weakly_canonical(fs::absolute(base), ec);
  auto rel = abs_t.lexically_relative(abs_b);
  return rel.empty() ? abs_t.string() : rel.generic_string();
}

// Loads <out>/manifest.json when present so repeated gen calls accumulate.
void open_manifest(const fs::path& file, Manifest& m) {
  if (fs::exists(file)) {
    check(spooky_manifest_load(file.string().c_str(), m.out()));
  } else {
    check(spooky_manifest_new(m.out()));
  }
}

// Renders entries into out_dir in parallel, then records them in the manifest.
void generate(const std::vector<Job>& jobs, const fs::path& out_dir, const fs::path& manifest_file,
              int n_jobs) {
  Manifest m;
  open_manifest(manifest_file, m);
  const std::size_t first = spooky_manifest_size(m.get());
  for (const auto& j : jobs) check(spooky_manifest_add(m.get(), j.entry.dump().c_str()));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::optional<Failure> failed;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      {
        std::lock_guard lock(mu);
        if (failed) return;
      }
      try {
        Video v;
        check(spooky_manifest_render(m.get(), first + i, out_dir.string().c_str(), v.out()));
        const auto& e = jobs[i].entry;
        const auto fmt = e["format"] == "png" ? SPOOKY_FORMAT_PNG : SPOOKY_FORMAT_Y4M;
        const auto path = out_dir / e["container"].get<std::string>();
        check(spooky_video_write(v.get(), path.string().c_str(), fmt));
        std::lock_guard lock(mu);
        std::cout << e["video_id"].get<std::string>() << " -> " << path.string() << "\n";
      } catch (const Failure& f) {
        std::lock_guard lock(mu);
        if (!failed) failed = f;
      }
    }
  };
  const int n = std::max(1, std::min<int>(n_jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failed) throw *failed;
  check(spooky_manifest_save(m.get(), manifest_file.string().c_str()));
  std::cout << "manifest: " << manifest_file.string() << " (" << spooky_manifest_size(m.get())
            << " entries)\n";
}

json make_entry(const std::string& id, const std::string& category,
                const std::vector<std::string>& labels, const spooky_params& p, json source,
                const std::string& format, const std::optional<std::string>& direct,
                const std::optional<std::string>& cot) {
  json e{{"video_id", id},
         {"category", category},
         {"labels", labels},
         {"params", params_json(p)},
         {"source", std::move(source)},
         {"container", "videos/" + id + (format == "png" ? "" : ".y4m")},
         {"format", format}};
  if (direct || cot) {
    json pr = json::object();
    if (direct) pr["direct"] = *direct;
    if (cot) pr["chain_of_thought"] = *cot;
    e["prompts"] = pr;
  }
  return e;
}

std::vector<std::string> normalized_labels(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& l : raw) {
    auto n = normalize(l);
    if (n.empty()) usage_error("label '" + l + "' is empty after normalization", "label");
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& s, const char* field) {
  std::vector<double> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      usage_error(std::string("--") + field + " expects comma-separated numbers", field);
    }
  }
  return out;
}

// Builds the source object for one batch item or command line.
json shape_source(const std::string& shape, const json& g, const spooky_params& p) {
  const double w = p.width, h = p.height;
  if (shape == "circle") {
    return {{"kind", "shape"}, {"shape", "circle"},
            {"cx", g.value("cx", (w - 1) / 2)}, {"cy", g.value("cy", (h - 1) / 2)},
            {"radius", g.value("radius", std::min(w, h) / 4)}};
  }
  if (shape == "rectangle") {
    const double rw = g.value("w", w / 2), rh = g.value("h", h / 2);
    return {{"kind", "shape"}, {"shape", "rectangle"},
            {"x", g.value("x", (w - rw) / 2)}, {"y", g.value("y", (h - rh) / 2)},
            {"w", rw}, {"h", rh}};
  }
  if (shape == "polygon") {
    if (!g.contains("vertices")) usage_error("polygon needs vertices", "vertices");
    return {{"kind", "shape"}, {"shape", "polygon"}, {"vertices", g["vertices"]}};
  }
  usage_error("unknown shape '" + shape + "' (circle, rectangle, polygon)", "shape");
}

// ---- gen ----------------------------------------------------------------------

struct GenCommon {
  ParamFlags params;
  std::string out;
  std::string format = "y4m";
  std::string id;
  std::vector<std::string> labels;
  std::string category;
  std::optional<std::string> prompt_direct;
  std::optional<std::string> prompt_cot;

  void add_to(CLI::App* app, bool with_params = true) {
    if (with_params) params.add_to(app);
    app->add_option("--out", out, std::string("Output directory (default $") + kOutEnv +
                                       " or ./spooky_out)");
    app->add_option("--format", format, "Container: y4m or png")
        ->check(CLI::IsMember({"y4m", "png"}));
    if (!with_params) return;
    app->add_option("--id", id, "Video id (default derived from label and seed)");
    app->add_option("--label", labels, "Accepted answer; repeat for several");
    app->add_option("--prompt-direct", prompt_direct, "Question shown for this video");
    app->add_option("--prompt-cot", prompt_cot, "Reasoning-style question text");
  }

  fs::path out_dir() const { return out.empty() ? default_out() : fs::path(out); }
};

int run_gen_single(const GenCommon& c, const std::string& kind, const json& source,
                   const std::vector<std::string>& default_labels, const std::string& category,
                   int jobs) {
  spooky_params p;
  spooky_params_default(&p);
  p = c.params.apply(p);
  check(spooky_params_check(&p));
  const auto labels = normalized_labels(c.labels.empty() ? default_labels : c.labels);
  if (labels.empty()) usage_error("at least one --label is required", "label");
  const auto id = c.id.empty() ? kind + "-" + slug(labels.front()) + "-s" + std::to_string(p.seed) : c.id;
  const auto out = c.out_dir();
  std::vector<Job> jobs_list{{make_entry(id, category, labels, p, source, c.format,
                                         c.prompt_direct, c.prompt_cot)}};
  generate(jobs_list, out, out / "manifest.json", jobs);
  return 0;
}

int run_gen_batch(const std::string& spec_path, const GenCommon& c, int jobs) {
  json spec;
  try {
    spec = json::parse(slurp(spec_path));
  } catch (const json::exception& e) {
    throw Failure{SPOOKY_E_SCHEMA_VIOLATION, std::string("batch spec: ") + e.what(), "$"};
  }
  const fs::path spec_dir = fs::path(spec_path).parent_path();
  const auto out = c.out_dir();
  spooky_params base;
  spooky_params_default(&base);
  std::string format = spec.value("format", c.format);
  std::vector<Job> list;
  try {
    if (spec.contains("defaults")) base = params_from(spec["defaults"], base);
    if (!spec.contains("videos") || !spec["videos"].is_array()) {
      throw Failure{SPOOKY_E_SCHEMA_VIOLATION, "batch spec needs a 'videos' array", "videos"};
    }
    const auto& videos = spec["videos"];
    for (std::size_t i = 0; i < videos.size(); ++i) {
      const auto& v = videos[i];
      const std::string where = "videos[" + std::to_string(i) + "]";
      spooky_params p = base;
      if (!v.contains("seed")) p.seed = base.seed + i;
      p = params_from(v, p);
      const int st = spooky_params_check(&p);
      if (st != SPOOKY_OK) {
        throw Failure{st, where + ": " + spooky_last_error(),
                      where + ".params." + spooky_last_error_field()};
      }
      const auto kind = v.value("kind", std::string());
      json source;
      std::vector<std::string> labels;
      std::string category;
      if (v.contains("labels")) labels = v["labels"].get<std::vector<std::string>>();
      if (v.contains("label")) labels.push_back(v["label"].get<std::string>());
      if (kind == "text") {
        const auto text = v.at("text").get<std::string>();
        source = {{"kind", "text"}, {"text", text}, {"scale", v.value("scale", 0)}};
        if (labels.empty()) labels.push_back(text);
        category = "text";
      } else if (kind == "shape") {
        const auto shape = v.value("shape", std::string("circle"));
        source = shape_source(shape, v, p);
        if (labels.empty()) labels.push_back(shape);
        category = "shapes";
      } else if (kind == "mask" || kind == "depth") {
        const auto path = relative_to(spec_dir / v.at("path").get<std::string>(), out);
        source = {{"kind", kind}, {"path", path}};
        if (kind == "depth") {
          source["lower"] = v.value("lower", 128);
          source["upper"] = v.value("upper", 255);
        }
        category = kind == "mask" ? "object_images" : "dynamic_scenes";
        if (labels.empty()) usage_error(where + ": mask and depth videos need labels", where + ".labels");
      } else {
        usage_error(where + ": kind must be text, shape, mask or depth", where + ".kind");
      }
      category = v.value("category", category);
      const auto norm = normalized_labels(labels);
      const auto id = v.value("id", kind + "-" + slug(norm.front()) + "-s" + std::to_string(p.seed));
      std::optional<std::string> direct, cot;
      if (v.contains("prompt_direct")) direct = v["prompt_direct"].get<std::string>();
      if (v.contains("prompt_cot")) cot = v["prompt_cot"].get<std::string>();
      list.push_back({make_entry(id, category, norm, p, source, v.value("format", format), direct, cot)});
    }
  } catch (const json::exception& e) {
    throw Failure{SPOOKY_E_SCHEMA_VIOLATION, std::string("batch spec: ") + e.what(), "videos"};
  }
  generate(list, out, out / "manifest.json", jobs);
  return 0;
}

// ---- analyze ------------------------------------------------------------------

void print_values(const std::string& id, const spooky_snr_values& v) {
  auto cell = [](double db, int finite) {
    if (finite) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", db);
      return std::string(buf);
    }
    if (std::isnan(db)) return std::string("n/a");
    return std::string(db < 0 ? "-inf" : "inf");
  };
  std::cout << id << ": basic " << cell(v.basic, v.basic_finite) << " dB, perceptual "
            << cell(v.perceptual, v.perceptual_finite) << " dB, coherence "
            << cell(v.temporal_coherence, v.temporal_coherence_finite) << " dB, contrast "
            << cell(v.motion_contrast, v.motion_contrast_finite) << " dB, combined "
            << cell(v.combined, v.combined_finite) << " dB"
            << (v.contentless ? " [contentless]" : "") << "\n";
}

int run_analyze(const std::string& input, const std::string& mask_source, const std::string& mask_path,
                const std::string& out_arg, const std::string& report_path, int jobs) {
  spooky_analysis_options opts;
  spooky_analysis_options_default(&opts);
  opts.use_ground_truth = mask_source == "gt" ? 1 : 0;

  if (fs::path(input).extension() != ".json") {
    Video v;
    check(spooky_video_read(input.c_str(), v.out()));
    Mask m;
    if (!mask_path.empty()) {
      int w = 0, h = 0;
      check(spooky_video_info(v.get(), &w, &h, nullptr, nullptr));
      check(spooky_mask_read(mask_path.c_str(), w, h, m.out()));
    }
    spooky_snr_values values;
    char* report = nullptr;
    const auto id = fs::path(input).stem().string();
    check(spooky_analyze(v.get(), m.get(), &opts, id.c_str(), &values, &report));
    const auto text = take(report);
    print_values(id, values);
    if (!report_path.empty()) spit(report_path, text);
    return 0;
  }

  Manifest m;
  check(spooky_manifest_load(input.c_str(), m.out()));
  const fs::path base = fs::path(input).parent_path().empty() ? fs::path(".") : fs::path(input).parent_path();
  const fs::path out = out_arg.empty() ? base : fs::path(out_arg);
  const std::size_t n = spooky_manifest_size(m.get());
  std::vector<json> entries(n);
  for (std::size_t i = 0; i < n; ++i) {
    char* e = nullptr;
    check(spooky_manifest_entry(m.get(), i, &e));
    entries[i] = json::parse(take(e));
  }
  std::vector<std::string> reports(n);
  std::vector<spooky_snr_values> values(n);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::optional<Failure> failed;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      try {
        const auto& e = entries[i];
        const auto container = base / e["container"].get<std::string>();
        Video v;
        if (fs::exists(container)) {
          check(spooky_video_read(container.string().c_str(), v.out()));
        } else {
          check(spooky_manifest_render(m.get(), i, base.string().c_str(), v.out()));
        }
        Mask gt;
        if (opts.use_ground_truth) check(spooky_manifest_mask(m.get(), i, base.string().c_str(), gt.out()));
        char* report = nullptr;
        const auto id = e["video_id"].get<std::string>();
        check(spooky_analyze(v.get(), gt.get(), &opts, id.c_str(), &values[i], &report));
        reports[i] = take(report);
        spit(out / "reports" / (id + ".json"), reports[i]);
        std::lock_guard lock(mu);
        print_values(id, values[i]);
      } catch (const Failure& f) {
        std::lock_guard lock(mu);
        if (!failed) failed = f;
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failed) throw *failed;
  if (n == 0) {
    std::cout << "manifest has no entries\n";
    return 0;
  }
  json items = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    items.push_back({{"category", entries[i]["category"]}, {"report", json::parse(reports[i])}});
  }
  char* table = nullptr;
  check(spooky_snr_table(items.dump().c_str(), &table));
  const auto t = take(table);
  std::cout << "\n" << t;
  spit(out / "snr_table.txt", t);
  return 0;
}

// ---- decode -------------------------------------------------------------------

int run_decode(const std::string& input, const std::string& mask_path, const std::string& out_arg,
               const spooky_decode_options& dopts) {
  Video v;
  check(spooky_video_read(input.c_str(), v.out()));
  Decoding d;
  check(spooky_decode(v.get(), nullptr, &dopts, d.out()));
  const fs::path out = out_arg.empty() ? default_out() / ("decode-" + fs::path(input).stem().string())
                                       : fs::path(out_arg);
  check(spooky_decoding_write(d.get(), v.get(), out.string().c_str()));
  if (spooky_decoding_contentless(d.get())) {
    std::cout << "contentless: no coherent moving region found\n";
    std::cout << "maps written to " << out.string() << "\n";
    return 0;
  }
  std::cout << "mask, overlay and maps written to " << out.string() << "\n";
  if (!mask_path.empty()) {
    int w = 0, h = 0;
    check(spooky_video_info(v.get(), &w, &h, nullptr, nullptr));
    Mask gt;
    check(spooky_mask_read(mask_path.c_str(), w, h, gt.out()));
    double iou = 0.0;
    check(spooky_mask_iou(spooky_decoding_mask(d.get()), gt.get(), &iou));
    std::printf("IoU: %.4f\n", iou);
  }
  return 0;
}

// ---- evaluate -----------------------------------------------------------------

std::vector<std::string> expand_reports(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> dir;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".json") dir.push_back(e.path().string());
      }
      std::sort(dir.begin(), dir.end());
      out.insert(out.end(), dir.begin(), dir.end());
    } else {
      out.push_back(in);
    }
  }
  return out;
}

struct EvalFlags {
  std::string manifest, responses, roster, report;
  bool per_fps = false, verbose = false, threshold = false;
  std::vector<std::string> snr_from;
  std::string metric = "basic";
  double bin_width = 1.0, bin_origin = 0.0;
};

int run_evaluate(const EvalFlags& f) {
  spooky_eval_options o{f.roster.empty() ? nullptr : f.roster.c_str(), f.per_fps ? 1 : 0,
                        f.verbose ? 1 : 0};
  char* report = nullptr;
  char* table = nullptr;
  check(spooky_evaluate(f.manifest.c_str(), f.responses.c_str(), &o, &report, &table));
  const auto report_text = take(report);
  std::cout << take(table);
  if (!f.report.empty()) spit(f.report, report_text);
  if (!f.threshold) return 0;
  if (f.snr_from.empty()) usage_error("--threshold-analysis needs --snr-from", "snr-from");
  const auto files = expand_reports(f.snr_from);
  std::vector<const char*> ptrs;
  for (const auto& s : files) ptrs.push_back(s.c_str());
  char* th_json = nullptr;
  char* th_table = nullptr;
  check(spooky_threshold_analysis(f.manifest.c_str(), f.responses.c_str(), ptrs.data(), ptrs.size(),
                                  f.metric.c_str(), f.bin_width, f.bin_origin, &th_json, &th_table));
  const auto th = take(th_json);
  std::cout << "\n" << take(th_table);
  if (!f.report.empty()) {
    fs::path p(f.report);
    spit(p.parent_path() / (p.stem().string() + ".threshold.json"), th);
  }
  return 0;
}

// ---- serve --------------------------------------------------------------------

int run_serve(const std::string& manifest, const std::string& session, const std::string& log,
              const std::string& root, const std::string& host, int port) {
  spooky_server* s = nullptr;
  check(spooky_server_new(manifest.c_str(), session.c_str(), log.c_str(),
                          root.empty() ? nullptr : root.c_str(), &s));
  std::unique_ptr<spooky_server, void (*)(spooky_server*)> guard(s, spooky_server_free);
  int bound = 0;
  check(spooky_server_bind(s, host.c_str(), port, &bound));

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    spooky_server_stop(s);
  });
  std::cout << "serving on http://" << host << ":" << bound << "\n" << std::flush;
  const int st = spooky_server_run(s);
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  check(st);
  return 0;
}

int exit_code(const Failure& f) {
  std::cerr << "error: " << spooky_status_name(f.status) << ": " << f.message;
  if (!f.field.empty()) std::cerr << " [field: " << f.field << "]";
  std::cerr << "\n";
  return spooky_status_is_io(f.status) ? kExitIo : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate, analyze, decode and score temporally encoded noise videos"};
  app.require_subcommand(1);
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--jobs,-j", jobs, "Parallel workers for batch work")->check(CLI::PositiveNumber);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate videos and manifest rows");
  gen->require_subcommand(1);
  GenCommon text_c, shape_c, mask_c, depth_c, batch_c;
  std::string text;
  int scale = 0;
  auto* g_text = gen->add_subcommand("text", "Encode a word");
  g_text->add_option("text", text, "Text to render")->required();
  g_text->add_option("--scale", scale, "Glyph scale (default: largest that fits)");
  text_c.add_to(g_text);

  std::string shape;
  std::optional<double> radius, rw, rh;
  std::string center, corner, vertices;
  auto* g_shape = gen->add_subcommand("shape", "Encode a geometric shape");
  g_shape->add_option("shape", shape, "circle, rectangle or polygon")->required();
  g_shape->add_option("--radius", radius, "Circle radius");
  g_shape->add_option("--center", center, "Circle center x,y");
  g_shape->add_option("--corner", corner, "Rectangle top-left x,y");
  g_shape->add_option("--width", rw, "Rectangle width");
  g_shape->add_option("--height", rh, "Rectangle height");
  g_shape->add_option("--vertices", vertices, "Polygon vertices x1,y1,x2,y2,...");
  shape_c.add_to(g_shape);

  std::string mask_file;
  auto* g_mask = gen->add_subcommand("mask", "Encode a binary mask image");
  g_mask->add_option("file", mask_file, "Mask PNG (foreground >= 128)")->required();
  mask_c.add_to(g_mask);
  g_mask->add_option("--category", mask_c.category, "Category (default object_images)")
      ->check(CLI::IsMember({"text", "shapes", "object_images", "dynamic_scenes"}));

  std::string depth_path;
  int lower = 128, upper = 255;
  auto* g_depth = gen->add_subcommand("depth", "Encode a depth map directory or image");
  g_depth->add_option("path", depth_path, "Directory of depth PNGs or a single PNG")->required();
  g_depth->add_option("--lower", lower, "Lowest foreground depth value");
  g_depth->add_option("--upper", upper, "Highest foreground depth value");
  depth_c.add_to(g_depth);

  std::string batch_spec;
  auto* g_batch = gen->add_subcommand("batch", "Generate every video of a JSON spec");
  g_batch->add_option("spec", batch_spec, "Batch spec file")->required();
  batch_c.add_to(g_batch, false);

  // analyze
  std::string an_input, an_mask_source = "gt", an_mask, an_out, an_report;
  auto* analyze = app.add_subcommand("analyze", "Compute SNR metrics");
  analyze->add_option("input", an_input, "Manifest (.json) or video")->required();
  analyze->add_option("--mask-source", an_mask_source, "gt or estimated")
      ->check(CLI::IsMember({"gt", "estimated"}));
  analyze->add_option("--mask", an_mask, "Ground-truth mask PNG for a single video");
  analyze->add_option("--out", an_out, "Directory for reports (default: next to the manifest)");
  analyze->add_option("--report", an_report, "Report file for a single video");

  // decode
  std::string de_input, de_mask, de_out;
  spooky_decode_options dopts;
  spooky_decode_options_default(&dopts);
  bool bimodal = false;
  auto* decode = app.add_subcommand("decode", "Recover the hidden region from motion");
  decode->add_option("video", de_input, "Video file or frame directory")->required();
  decode->add_option("--mask", de_mask, "Ground-truth mask PNG; prints IoU");
  decode->add_option("--out", de_out, "Output directory");
  decode->add_flag("--bimodal", bimodal, "Bimodal threshold instead of the percentile rule");
  decode->add_option("--percentile", dopts.percentile, "Boundary percentile threshold");
  decode->add_option("--closing", dopts.closing_iterations, "Closing iterations");
  decode->add_option("--min-component-fraction", dopts.min_component_fraction,
                     "Keep components at least this fraction of the largest");

  // evaluate
  EvalFlags ef;
  auto* evaluate = app.add_subcommand("evaluate", "Score responses against labels");
  evaluate->add_option("manifest", ef.manifest, "Manifest")->required();
  evaluate->add_option("responses", ef.responses, "Response log (NDJSON)")->required();
  evaluate->add_flag("--per-fps", ef.per_fps, "Accuracy per frame rate");
  evaluate->add_option("--roster", ef.roster, "Assignments; unanswered ones count as wrong");
  evaluate->add_flag("--verbose", ef.verbose, "List every verdict with its response");
  evaluate->add_option("--report", ef.report, "Write the JSON report here");
  evaluate->add_flag("--threshold-analysis", ef.threshold, "Accuracy by SNR bin");
  evaluate->add_option("--snr-from", ef.snr_from, "SNR report files or directories");
  evaluate->add_option("--metric", ef.metric, "SNR metric for the threshold analysis")
      ->check(CLI::IsMember({"basic", "perceptual", "temporal_coherence", "motion_contrast", "combined"}));
  evaluate->add_option("--bin-width", ef.bin_width, "SNR bin width in dB");
  evaluate->add_option("--bin-origin", ef.bin_origin, "SNR bin origin in dB");

  // serve
  std::string sv_manifest, sv_session, sv_log = "responses.ndjson", sv_root, sv_host = "127.0.0.1";
  int sv_port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the study backend");
  serve->add_option("manifest", sv_manifest, "Manifest")->required();
  serve->add_option("--session", sv_session, "Study config JSON")->required();
  serve->add_option("--log", sv_log, "Response log file");
  serve->add_option("--root", sv_root, "Static UI directory");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port (0 picks a free one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*g_text) {
      return run_gen_single(text_c, "text", {{"kind", "text"}, {"text", text}, {"scale", scale}},
                            {text}, "text", jobs);
    }
    if (*g_shape) {
      spooky_params p;
      spooky_params_default(&p);
      p = shape_c.params.apply(p);
      json g = json::object();
      if (radius) g["radius"] = *radius;
      if (!center.empty()) {
        const auto c = parse_numbers(center, "center");
        if (c.size() != 2) usage_error("--center expects x,y", "center");
        g["cx"] = c[0];
        g["cy"] = c[1];
      }
      if (!corner.empty()) {
        const auto c = parse_numbers(corner, "corner");
        if (c.size() != 2) usage_error("--corner expects x,y", "corner");
        g["x"] = c[0];
        g["y"] = c[1];
      }
      if (rw) g["w"] = *rw;
      if (rh) g["h"] = *rh;
      if (!vertices.empty()) {
        const auto v = parse_numbers(vertices, "vertices");
        if (v.size() < 6 || v.size() % 2) usage_error("--vertices needs at least three x,y pairs", "vertices");
        json arr = json::array();
        for (std::size_t i = 0; i < v.size(); i += 2) arr.push_back({v[i], v[i + 1]});
        g["vertices"] = arr;
      }
      return run_gen_single(shape_c, "shape", shape_source(shape, g, p), {shape}, "shapes", jobs);
    }
    if (*g_mask) {
      const auto out = mask_c.out_dir();
      json src{{"kind", "mask"}, {"path", relative_to(mask_file, out)}};
      if (!fs::exists(mask_file)) io_error("cannot open " + mask_file);
      return run_gen_single(mask_c, "mask", src, {},
                            mask_c.category.empty() ? "object_images" : mask_c.category, jobs);
    }
    if (*g_depth) {
      const auto out = depth_c.out_dir();
      if (!fs::exists(depth_path)) io_error("cannot open " + depth_path);
      json src{{"kind", "depth"}, {"path", relative_to(depth_path, out)}, {"lower", lower}, {"upper", upper}};
      return run_gen_single(depth_c, "depth", src, {}, "dynamic_scenes", jobs);
    }
    if (*g_batch) return run_gen_batch(batch_spec, batch_c, jobs);
    if (*analyze) return run_analyze(an_input, an_mask_source, an_mask, an_out, an_report, jobs);
    if (*decode) {
      dopts.bimodal = bimodal ? 1 : 0;
      return run_decode(de_input, de_mask, de_out, dopts);
    }
    if (*evaluate) return run_evaluate(ef);
    if (*serve) return run_serve(sv_manifest, sv_session, sv_log, sv_root, sv_host, sv_port);
  } catch (const Failure& f) {
    return exit_code(f);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoFailure: " << e.what() << "\n";
    return kExitIo;
  } catch (const json::exception& e) {
    std::cerr << "error: SchemaViolation: " << e.what() << "\n";
    return kExitValidation;
  }
  return 0;
}
