#include "spooky/spooky.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "spooky/core_types.hpp"
#include "spooky/decoder.hpp"
#include "spooky/eval.hpp"
#include "spooky/image_io.hpp"
#include "spooky/mask_render.hpp"
#include "spooky/serve.hpp"
#include "spooky/snr_metrics.hpp"
#include "spooky/store.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spooky;

struct spooky_video {
  FrameSequence seq;
};

struct spooky_mask {
  ContentMask mask;
};

struct spooky_manifest {
  VideoManifest m;
};

struct spooky_decoding {
  DecodeResult result;
  std::optional<spooky_mask> mask;
};

struct spooky_server {
  std::unique_ptr<StudyServer> server;
};

static_assert(static_cast<int>(ErrorCode::InvalidArgument) + 1 == SPOOKY_E_INVALID_ARGUMENT);
static_assert(static_cast<int>(ErrorCode::NoRegionFound) + 1 == SPOOKY_E_NO_REGION_FOUND);
static_assert(static_cast<int>(ErrorCode::DuplicateVideoId) + 1 == SPOOKY_E_DUPLICATE_VIDEO_ID);

namespace {

thread_local std::string t_error;
thread_local std::string t_field;

int status_of(ErrorCode c) { return static_cast<int>(c) + 1; }

template <class F>
int guard(F&& f) {
  t_error.clear();
  t_field.clear();
  try {
    f();
    return SPOOKY_OK;
  } catch (const Error& e) {
    t_error = e.what();
    t_field = e.field();
    return status_of(e.code());
  } catch (const std::exception& e) {
    t_error = e.what();
    return SPOOKY_E_INTERNAL;
  } catch (...) {
    t_error = "unknown failure";
    return SPOOKY_E_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(name) + " must not be null", name);
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

EncodingParams to_params(const spooky_params& p) {
  EncodingParams e;
  e.width = p.width;
  e.height = p.height;
  e.fps = p.fps;
  e.duration_s = p.duration_s;
  e.velocity = {p.vx, p.vy};
  e.block_size = p.block_size;
  e.density = p.density;
  e.seed = p.seed;
  return e;
}

std::pair<MetricConfig, FlowOptions> to_config(const spooky_analysis_options* o) {
  spooky_analysis_options d;
  spooky_analysis_options_default(&d);
  if (!o) o = &d;
  MetricConfig c;
  c.f0 = o->f0;
  c.tau = o->tau;
  c.local_window = o->local_window;
  if (o->border_exclude >= 0) c.border_exclude = o->border_exclude;
  c.mask_source = o->use_ground_truth ? MaskSource::GroundTruth : MaskSource::Estimated;
  FlowOptions f{o->flow_window, o->flow_max_disp, o->flow_levels, o->flow_smoothing};
  validate(c);
  validate(f);
  return {c, f};
}

std::string read_text(const char* path) {
  require(path, "path");
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

fs::path base_of(const char* manifest_path) {
  const auto p = fs::path(manifest_path).parent_path();
  return p.empty() ? fs::path(".") : p;
}

void set_value(const MetricValue& m, double& db, int& finite) {
  finite = m.finite() ? 1 : 0;
  db = m.status == MetricStatus::NotApplicable ? std::numeric_limits<double>::quiet_NaN() : m.db;
}

const MetricValue& pick(const SnrReport& r, std::string_view metric) {
  if (metric == "basic") return r.basic;
  if (metric == "perceptual") return r.perceptual;
  if (metric == "temporal_coherence") return r.temporal_coherence;
  if (metric == "motion_contrast") return r.motion_contrast;
  if (metric == "combined") return r.combined;
  throw Error(ErrorCode::InvalidArgument, "unknown metric '" + std::string(metric) + "'", "metric");
}

}  // namespace

extern "C" {

const char* spooky_version(void) { return "1.0.0"; }

const char* spooky_status_name(int status) {
  static thread_local std::string name;
  if (status == SPOOKY_OK) return "Ok";
  if (status == SPOOKY_E_INTERNAL) return "Internal";
  if (status < 1 || status > SPOOKY_E_DUPLICATE_VIDEO_ID) return "Unknown";
  name = std::string(to_string(static_cast<ErrorCode>(status - 1)));
  return name.c_str();
}

int spooky_status_is_io(int status) {
  switch (status) {
    case SPOOKY_E_IO_FAILURE:
    case SPOOKY_E_SINK_FAILURE:
    case SPOOKY_E_UNREADABLE_IMAGE:
    case SPOOKY_E_EMPTY_DIRECTORY:
    case SPOOKY_E_BAD_HEADER:
    case SPOOKY_E_TRUNCATED_FRAME:
    case SPOOKY_E_UNSUPPORTED_CHROMA_TAG:
      return 1;
    default:
      return 0;
  }
}

const char* spooky_last_error(void) { return t_error.c_str(); }
const char* spooky_last_error_field(void) { return t_field.c_str(); }
void spooky_string_free(char* s) { std::free(s); }

void spooky_params_default(spooky_params* p) {
  if (!p) return;
  const EncodingParams e;
  *p = {e.width, e.height, e.fps, e.duration_s, e.velocity.vx, e.velocity.vy,
        e.block_size, e.density, e.seed};
}

int spooky_params_check(const spooky_params* p) {
  return guard([&] {
    require(p, "params");
    validate_params(to_params(*p));
  });
}

int spooky_fit_text_scale(const char* text, int width, int height, int* scale) {
  return guard([&] {
    require(text, "text");
    require(scale, "scale");
    *scale = fit_text_scale(text, width, height);
  });
}

int spooky_video_read(const char* path, spooky_video** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new spooky_video{read_video(path)};
  });
}

int spooky_video_write(const spooky_video* v, const char* path, spooky_format f) {
  return guard([&] {
    require(v, "video");
    require(path, "path");
    write_video(v->seq, path, f == SPOOKY_FORMAT_PNG ? VideoFormat::PngSequence : VideoFormat::Y4m);
  });
}

int spooky_video_info(const spooky_video* v, int* width, int* height, int* fps, size_t* frames) {
  return guard([&] {
    require(v, "video");
    if (width) *width = v->seq.width();
    if (height) *height = v->seq.height();
    if (fps) *fps = v->seq.fps();
    if (frames) *frames = v->seq.size();
  });
}

int spooky_video_frame(const spooky_video* v, size_t index, const uint8_t** pixels) {
  return guard([&] {
    require(v, "video");
    require(pixels, "pixels");
    if (index >= v->seq.size()) throw Error(ErrorCode::InvalidArgument, "frame index out of range", "index");
    *pixels = v->seq[index].pixels().data();
  });
}

int spooky_video_equal(const spooky_video* a, const spooky_video* b) {
  return a && b && a->seq.fps() == b->seq.fps() && a->seq.same_frames(b->seq) ? 1 : 0;
}

void spooky_video_free(spooky_video* v) { delete v; }

int spooky_mask_read(const char* path, int width, int height, spooky_mask** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new spooky_mask{load_mask_file(path, width, height)};
  });
}

int spooky_mask_write(const spooky_mask* m, const char* path) {
  return guard([&] {
    require(m, "mask");
    require(path, "path");
    write_png(path, m->mask);
  });
}

int spooky_mask_iou(const spooky_mask* a, const spooky_mask* b, double* iou) {
  return guard([&] {
    require(a, "a");
    require(b, "b");
    require(iou, "iou");
    *iou = intersection_over_union(a->mask, b->mask);
  });
}

void spooky_mask_free(spooky_mask* m) { delete m; }

int spooky_manifest_new(spooky_manifest** out) {
  return guard([&] {
    require(out, "out");
    *out = new spooky_manifest{};
  });
}

int spooky_manifest_load(const char* path, spooky_manifest** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new spooky_manifest{load_manifest(path)};
  });
}

int spooky_manifest_save(const spooky_manifest* m, const char* path) {
  return guard([&] {
    require(m, "manifest");
    require(path, "path");
    save_manifest(m->m, path);
  });
}

int spooky_manifest_add(spooky_manifest* m, const char* entry_json) {
  return guard([&] {
    require(m, "manifest");
    require(entry_json, "entry_json");
    json entry;
    try {
      entry = json::parse(entry_json);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("entry is not valid JSON: ") + e.what(), "$");
    }
    const json wrapper{{"schema_version", kSchemaVersion}, {"entries", json::array({entry})}};
    auto parsed = parse_manifest(wrapper.dump());
    auto next = m->m;
    next.entries.push_back(std::move(parsed.entries.front()));
    validate(next);
    m->m = std::move(next);
  });
}

size_t spooky_manifest_size(const spooky_manifest* m) { return m ? m->m.entries.size() : 0; }

int spooky_manifest_entry(const spooky_manifest* m, size_t index, char** entry_json) {
  return guard([&] {
    require(m, "manifest");
    require(entry_json, "entry_json");
    if (index >= m->m.entries.size()) throw Error(ErrorCode::InvalidArgument, "entry index out of range", "index");
    const auto text = serialize(VideoManifest{{m->m.entries[index]}});
    *entry_json = dup(json::parse(text)["entries"][0].dump());
  });
}

int spooky_manifest_render(const spooky_manifest* m, size_t index, const char* base_dir,
                           spooky_video** out) {
  return guard([&] {
    require(m, "manifest");
    require(out, "out");
    if (index >= m->m.entries.size()) throw Error(ErrorCode::InvalidArgument, "entry index out of range", "index");
    *out = new spooky_video{render_entry(m->m.entries[index], base_dir ? base_dir : ".")};
  });
}

int spooky_manifest_mask(const spooky_manifest* m, size_t index, const char* base_dir,
                         spooky_mask** out) {
  return guard([&] {
    require(m, "manifest");
    require(out, "out");
    if (index >= m->m.entries.size()) throw Error(ErrorCode::InvalidArgument, "entry index out of range", "index");
    auto mask = entry_mask(m->m.entries[index], base_dir ? base_dir : ".");
    *out = mask ? new spooky_mask{std::move(*mask)} : nullptr;
  });
}

void spooky_manifest_free(spooky_manifest* m) { delete m; }

void spooky_analysis_options_default(spooky_analysis_options* o) {
  if (!o) return;
  const MetricConfig c;
  const FlowOptions f;
  *o = {c.f0, c.tau, c.local_window, -1, 1, f.window, f.max_disp, f.levels, f.smoothing};
}

int spooky_analyze(const spooky_video* v, const spooky_mask* mask,
                   const spooky_analysis_options* o, const char* video_id,
                   spooky_snr_values* values, char** report_json) {
  return guard([&] {
    require(v, "video");
    const auto [cfg, flow] = to_config(o);
    std::optional<ContentMask> gt;
    if (mask) gt = mask->mask;
    const auto r = analyze_video(v->seq, gt, cfg, flow);
    if (values) {
      set_value(r.basic, values->basic, values->basic_finite);
      set_value(r.perceptual, values->perceptual, values->perceptual_finite);
      set_value(r.temporal_coherence, values->temporal_coherence, values->temporal_coherence_finite);
      set_value(r.motion_contrast, values->motion_contrast, values->motion_contrast_finite);
      set_value(r.combined, values->combined, values->combined_finite);
      values->contentless = r.contentless ? 1 : 0;
    }
    if (report_json) *report_json = dup(serialize(StoredSnrReport{video_id ? video_id : "", r}));
  });
}

int spooky_snr_table(const char* items_json, char** table) {
  return guard([&] {
    require(items_json, "items_json");
    require(table, "table");
    json items;
    try {
      items = json::parse(items_json);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::SchemaViolation, std::string("items are not valid JSON: ") + e.what(), "$");
    }
    if (!items.is_array()) throw Error(ErrorCode::SchemaViolation, "expected an array", "$");
    std::vector<std::pair<Category, SnrReport>> rows;
    for (std::size_t i = 0; i < items.size(); ++i) {
      const auto p = "[" + std::to_string(i) + "]";
      const auto& it = items[i];
      if (!it.is_object() || !it.contains("category") || !it["category"].is_string() ||
          !it.contains("report")) {
        throw Error(ErrorCode::SchemaViolation, p + ": expected {category, report}", p);
      }
      rows.emplace_back(parse_category(it["category"].get<std::string>()),
                        parse_snr_report(it["report"].dump()).report);
    }
    if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no reports to tabulate");
    *table = dup(render_snr_table(rows));
  });
}

void spooky_decode_options_default(spooky_decode_options* o) {
  if (!o) return;
  const MaskEstimateOptions d;
  *o = {d.rule == ThresholdRule::Bimodal ? 1 : 0, d.percentile, d.closing_iterations,
        d.min_component_fraction};
}

int spooky_decode(const spooky_video* v, const spooky_analysis_options* a,
                  const spooky_decode_options* o, spooky_decoding** out) {
  return guard([&] {
    require(v, "video");
    require(out, "out");
    const auto [cfg, flow] = to_config(a);
    spooky_decode_options d;
    spooky_decode_options_default(&d);
    if (!o) o = &d;
    MaskEstimateOptions opts;
    opts.rule = o->bimodal ? ThresholdRule::Bimodal : ThresholdRule::Percentile;
    opts.percentile = o->percentile;
    opts.closing_iterations = o->closing_iterations;
    opts.min_component_fraction = o->min_component_fraction;
    auto dec = std::make_unique<spooky_decoding>();
    dec->result = decode_video(v->seq, flow, cfg, opts);
    if (dec->result.estimate) dec->mask = spooky_mask{dec->result.estimate->mask};
    *out = dec.release();
  });
}

int spooky_decoding_contentless(const spooky_decoding* d) {
  return d && !d->result.estimate ? 1 : 0;
}

const spooky_mask* spooky_decoding_mask(const spooky_decoding* d) {
  return d && d->mask ? &*d->mask : nullptr;
}

int spooky_decoding_write(const spooky_decoding* d, const spooky_video* v, const char* dir) {
  return guard([&] {
    require(d, "decoding");
    require(v, "video");
    require(dir, "dir");
    const fs::path out(dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out.string() + ": " + ec.message());
    write_png(out / "boundary.png", map_to_frame(d->result.boundary));
    write_png(out / "coherence.png", map_to_frame(d->result.coherence));
    json summary{{"contentless", !d->result.estimate}};
    if (const auto& e = d->result.estimate) {
      write_png(out / "mask.png", e->mask);
      write_png(out / "overlay.png", render_overlay(v->seq[0], e->mask, OverlayStyle{}));
      summary["rule"] = e->rule == ThresholdRule::Bimodal ? "bimodal" : "percentile";
      summary["percentile"] = e->percentile;
      summary["threshold"] = round_sig6(e->threshold);
      summary["closing_iterations"] = e->closing_iterations;
      summary["structuring_element"] = e->structuring_element;
      summary["edge_pixels"] = e->edge_pixels;
      summary["components"] = e->components;
      summary["kept_components"] = e->kept_components;
      summary["min_component_fraction"] = e->min_component_fraction;
      summary["region_pixels"] = e->region_pixels;
      summary["mean_coherence_inside"] = round_sig6(e->mean_coherence_inside);
      summary["mean_coherence_outside"] = round_sig6(e->mean_coherence_outside);
    }
    const auto text = summary.dump(2) + "\n";
    write_file(out / "decode.json", {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
  });
}

void spooky_decoding_free(spooky_decoding* d) { delete d; }

int spooky_evaluate(const char* manifest_path, const char* responses_path,
                    const spooky_eval_options* o, char** report_json, char** table) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    require(responses_path, "responses_path");
    const auto labels = label_sets(load_manifest(manifest_path));
    const auto responses = load_response_log(responses_path);
    ScoreOptions opts;
    if (o && o->roster_path) opts.roster = parse_roster(read_text(o->roster_path));
    opts.verbose = o && o->verbose;
    const auto rep = score(responses, labels, opts);
    if (report_json) *report_json = dup(serialize(rep));
    if (table) {
      std::string t = render_accuracy_table(rep);
      if (o && o->per_fps && !rep.per_fps.empty()) t += "\n" + render_fps_table(rep);
      if (!responses.empty()) t += "\n" + render_responder_table(responses, labels);
      if (opts.verbose) {
        t += "\n";
        for (const auto& v : rep.verdicts) {
          t += v.responder_id + "  " + v.video_id + "  " +
               (v.answered ? (v.correct ? "correct" : "wrong") : "unanswered");
          if (v.response) t += "  \"" + *v.response + "\"";
          t += "\n";
        }
      }
      *table = dup(t);
    }
  });
}

int spooky_threshold_analysis(const char* manifest_path, const char* responses_path,
                              const char* const* report_paths, size_t report_count,
                              const char* metric, double bin_width_db, double origin_db,
                              char** report_json, char** table) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    require(responses_path, "responses_path");
    if (report_count) require(report_paths, "report_paths");
    const std::string which = metric ? metric : "basic";
    std::map<std::string, MetricValue> snr;
    for (size_t i = 0; i < report_count; ++i) {
      const auto r = parse_snr_report(read_text(report_paths[i]));
      snr[r.video_id] = pick(r.report, which);
    }
    const auto labels = label_sets(load_manifest(manifest_path));
    const auto responses = load_response_log(responses_path);
    const auto rep = score(responses, labels);
    std::vector<ScoredItem> items;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto it = snr.find(responses[i].video_id);
      if (it == snr.end()) {
        throw Error(ErrorCode::UnknownVideoId,
                    "no SNR report for video '" + responses[i].video_id + "'", "video_id");
      }
      const double db = it->second.status == MetricStatus::NotApplicable
                            ? std::numeric_limits<double>::quiet_NaN()
                            : it->second.db;
      items.push_back({responses[i].video_id, db, rep.verdicts[i].correct});
    }
    const auto th = snr_threshold_analysis(items, bin_width_db, origin_db);
    if (report_json) *report_json = dup(serialize(th));
    if (table) *table = dup("metric: " + which + "\n" + render_threshold_table(th));
  });
}

int spooky_server_new(const char* manifest_path, const char* study_config_path,
                      const char* response_log_path, const char* static_root,
                      spooky_server** out) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    require(study_config_path, "study_config_path");
    require(response_log_path, "response_log_path");
    require(out, "out");
    auto srv = std::make_unique<spooky_server>();
    std::optional<fs::path> root;
    if (static_root) root = fs::path(static_root);
    srv->server = std::make_unique<StudyServer>(
        load_manifest(manifest_path), base_of(manifest_path),
        parse_study_config(read_text(study_config_path)), response_log_path, root);
    *out = srv.release();
  });
}

int spooky_server_bind(spooky_server* s, const char* host, int port, int* bound_port) {
  return guard([&] {
    require(s, "server");
    const int p = s->server->bind(host ? host : "127.0.0.1", port);
    if (bound_port) *bound_port = p;
  });
}

int spooky_server_run(spooky_server* s) {
  return guard([&] {
    require(s, "server");
    s->server->run();
  });
}

void spooky_server_stop(spooky_server* s) {
  if (s) s->server->stop();
}

void spooky_server_free(spooky_server* s) { delete s; }

}  // extern "C"
