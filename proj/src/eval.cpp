#include "spooky/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

namespace spooky {

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::Text: return "text";
    case Category::Shapes: return "shapes";
    case Category::ObjectImages: return "object_images";
    case Category::DynamicScenes: return "dynamic_scenes";
  }
  return "text";
}

std::string_view display_name(Category c) noexcept {
  switch (c) {
    case Category::Text: return "Text";
    case Category::Shapes: return "Shapes";
    case Category::ObjectImages: return "Object Images";
    case Category::DynamicScenes: return "Dynamic Scenes";
  }
  return "Text";
}

Category parse_category(std::string_view s) {
  for (auto c : kCategories) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::SchemaViolation, "unknown category '" + std::string(s) + "'",
              "category");
}

std::string normalize_response(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char ch : raw) {
    if (std::isspace(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (std::ispunct(ch)) continue;
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  // Repeated so that normalization is idempotent ("a the cat" -> "cat").
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (std::string_view article : {"a ", "an ", "the "}) {
      if (out.size() > article.size() && out.compare(0, article.size(), article) == 0) {
        out.erase(0, article.size());
        stripped = true;
        break;
      }
    }
  }
  return out;
}

void validate(const LabelSet& l) {
  if (l.video_id.empty()) throw Error(ErrorCode::SchemaViolation, "empty video id", "video_id");
  if (l.labels.empty()) throw Error(ErrorCode::SchemaViolation, "no labels", "labels");
  if ((l.category == Category::Text || l.category == Category::Shapes) && l.labels.size() != 1) {
    throw Error(ErrorCode::SchemaViolation, "text and shapes take exactly one label", "labels");
  }
  for (std::size_t i = 0; i < l.labels.size(); ++i) {
    const auto& s = l.labels[i];
    const std::string field = "labels[" + std::to_string(i) + "]";
    if (s.empty()) throw Error(ErrorCode::SchemaViolation, "empty label", field);
    if (normalize_response(s) != s) {
      throw Error(ErrorCode::SchemaViolation, "label '" + s + "' is not normalized", field);
    }
  }
}

void validate(const ResponseRecord& r) {
  if (r.video_id.empty()) throw Error(ErrorCode::SchemaViolation, "empty video id", "video_id");
  if (r.responder_id.empty()) {
    throw Error(ErrorCode::SchemaViolation, "empty responder id", "responder_id");
  }
  if (r.perceptibility && (*r.perceptibility < 1 || *r.perceptibility > 5)) {
    throw Error(ErrorCode::SchemaViolation, "perceptibility must be 1..5", "perceptibility");
  }
  if (r.fps_shown && *r.fps_shown < 1) {
    throw Error(ErrorCode::SchemaViolation, "fps_shown must be >= 1", "fps_shown");
  }
}

namespace {

using LabelIndex = std::unordered_map<std::string, const LabelSet*>;

LabelIndex index_labels(const std::vector<LabelSet>& labels) {
  LabelIndex idx;
  for (const auto& l : labels) idx.emplace(l.video_id, &l);
  return idx;
}

const LabelSet& lookup(const LabelIndex& idx, const std::string& id) {
  const auto it = idx.find(id);
  if (it == idx.end()) {
    throw Error(ErrorCode::UnknownVideoId, "no label set for video '" + id + "'", "video_id");
  }
  return *it->second;
}

bool matches(const LabelSet& l, const std::string& normalized) {
  return std::find(l.labels.begin(), l.labels.end(), normalized) != l.labels.end();
}

}  // namespace

AccuracyReport score(const std::vector<ResponseRecord>& responses,
                     const std::vector<LabelSet>& labels, const ScoreOptions& opts) {
  const auto idx = index_labels(labels);
  AccuracyReport r;
  r.mode = opts.roster ? ScoringMode::Roster : ScoringMode::AnsweredOnly;

  auto record = [&](const LabelSet& l, const std::string& responder, std::optional<int> fps,
                    const std::optional<std::string>& prompt, bool ok) {
    r.overall.add(ok);
    r.per_category[l.category].add(ok);
    r.per_responder[responder].add(ok);
    r.per_responder_category[responder][l.category].add(ok);
    if (fps) r.per_fps[*fps][l.category].add(ok);
    if (prompt) r.per_prompt[*prompt].add(ok);
  };

  std::set<std::pair<std::string, std::string>> answered;
  for (const auto& resp : responses) {
    validate(resp);
    const auto& l = lookup(idx, resp.video_id);
    const auto norm = normalize_response(resp.response_text);
    const bool ok = matches(l, norm);
    record(l, resp.responder_id, resp.fps_shown, resp.prompt_id, ok);
    answered.emplace(resp.responder_id, resp.video_id);
    Verdict v{resp.video_id, resp.responder_id, ok, true, std::nullopt};
    if (opts.verbose) v.response = resp.response_text;
    r.verdicts.push_back(std::move(v));
  }
  if (opts.roster) {
    for (const auto& a : *opts.roster) {
      const auto& l = lookup(idx, a.video_id);
      if (answered.count({a.responder_id, a.video_id})) continue;
      record(l, a.responder_id, a.fps_shown, std::nullopt, false);
      r.verdicts.push_back({a.video_id, a.responder_id, false, false, std::nullopt});
    }
  }
  if (r.overall.count == 0) throw Error(ErrorCode::EmptyInput, "no responses to score");
  return r;
}

RatingStats summarize_ratings(const std::vector<double>& values) {
  RatingStats s;
  s.count = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.stdev = std::sqrt(ss / static_cast<double>(values.size()));
  return s;
}

std::map<Category, RatingStats> perceptibility_summary(
    const std::vector<ResponseRecord>& responses, const std::vector<LabelSet>& labels) {
  const auto idx = index_labels(labels);
  std::map<Category, std::vector<double>> ratings;
  for (const auto& resp : responses) {
    validate(resp);
    const auto& l = lookup(idx, resp.video_id);
    if (resp.perceptibility) ratings[l.category].push_back(*resp.perceptibility);
  }
  if (ratings.empty()) throw Error(ErrorCode::NoRatings, "no perceptibility ratings");
  std::map<Category, RatingStats> out;
  for (const auto& [c, v] : ratings) out[c] = summarize_ratings(v);
  return out;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(std::string s, std::size_t w, bool left = false) {
  if (s.size() >= w) return s;
  return left ? s + std::string(w - s.size(), ' ') : std::string(w - s.size(), ' ') + s;
}

}  // namespace

std::string render_responder_table(const std::vector<ResponseRecord>& responses,
                                   const std::vector<LabelSet>& labels) {
  const auto rep = score(responses, labels);
  const auto idx = index_labels(labels);
  std::map<std::string, std::map<Category, std::vector<double>>> ratings;
  for (const auto& resp : responses) {
    if (resp.perceptibility) {
      ratings[resp.responder_id][lookup(idx, resp.video_id).category].push_back(
          *resp.perceptibility);
    }
  }
  std::vector<Category> cats;
  for (auto c : kCategories) {
    if (rep.per_category.count(c)) cats.push_back(c);
  }
  std::ostringstream os;
  os << pad("Responder", 14, true);
  for (auto c : cats) {
    os << " | " << pad(std::string(display_name(c)) + " Acc(%)", 22) << " "
       << pad("Perc(1-5)", 10);
  }
  os << "\n";
  std::map<Category, std::vector<double>> acc_cols;
  std::map<Category, std::vector<double>> perc_cols;
  for (const auto& [who, per_cat] : rep.per_responder_category) {
    os << pad(who, 14, true);
    for (auto c : cats) {
      const auto it = per_cat.find(c);
      std::string a = "-";
      std::string p = "-";
      if (it != per_cat.end()) {
        const double pct = 100.0 * it->second.fraction();
        acc_cols[c].push_back(pct);
        a = fmt("%.1f", pct);
      }
      const auto& rv = ratings[who][c];
      if (!rv.empty()) {
        const double m = summarize_ratings(rv).mean;
        perc_cols[c].push_back(m);
        p = fmt("%.1f", m);
      }
      os << " | " << pad(a, 22) << " " << pad(p, 10);
    }
    os << "\n";
  }
  os << pad("Mean", 14, true);
  for (auto c : cats) {
    const auto a = summarize_ratings(acc_cols[c]);
    const auto p = summarize_ratings(perc_cols[c]);
    os << " | " << pad(fmt("%.1f", a.mean) + "+-" + fmt("%.1f", a.stdev), 22) << " "
       << pad(perc_cols[c].empty() ? "-" : fmt("%.1f", p.mean) + "+-" + fmt("%.1f", p.stdev), 10);
  }
  os << "\n";
  return os.str();
}

std::string render_fps_table(const AccuracyReport& r) {
  std::ostringstream os;
  os << pad("Category", 16, true);
  for (const auto& [fps, _] : r.per_fps) os << pad(std::to_string(fps) + " FPS", 10);
  os << "\n";
  std::map<int, std::vector<double>> col;
  for (auto c : kCategories) {
    bool any = false;
    for (const auto& [fps, cells] : r.per_fps) any = any || cells.count(c);
    if (!any) continue;
    os << pad(std::string(display_name(c)), 16, true);
    for (const auto& [fps, cells] : r.per_fps) {
      const auto it = cells.find(c);
      if (it == cells.end()) {
        os << pad("-", 10);
        continue;
      }
      const double pct = 100.0 * it->second.fraction();
      col[fps].push_back(pct);
      os << pad(fmt("%.2f", pct), 10);
    }
    os << "\n";
  }
  os << pad("Average", 16, true);
  for (const auto& [fps, _] : r.per_fps) os << pad(fmt("%.2f", summarize_ratings(col[fps]).mean), 10);
  os << "\n";
  return os.str();
}

std::string render_accuracy_table(const AccuracyReport& r) {
  std::ostringstream os;
  os << "mode: " << (r.mode == ScoringMode::Roster ? "roster" : "answered-only") << "\n";
  os << pad("Category", 16, true) << pad("Correct", 9) << pad("Count", 7) << pad("Acc(%)", 9)
     << "\n";
  auto row = [&](std::string name, const Tally& t) {
    os << pad(std::move(name), 16, true) << pad(std::to_string(t.correct), 9)
       << pad(std::to_string(t.count), 7) << pad(fmt("%.2f", 100.0 * t.fraction()), 9) << "\n";
  };
  for (auto c : kCategories) {
    const auto it = r.per_category.find(c);
    if (it != r.per_category.end()) row(std::string(display_name(c)), it->second);
  }
  row("Overall", r.overall);
  return os.str();
}

ThresholdReport snr_threshold_analysis(const std::vector<ScoredItem>& items, double bin_width_db,
                                       double origin_db) {
  if (!(bin_width_db > 0.0) || !std::isfinite(bin_width_db)) {
    throw Error(ErrorCode::InvalidArgument, "bin width must be positive", "bin_width");
  }
  ThresholdReport r;
  r.bin_width_db = bin_width_db;
  r.origin_db = origin_db;
  std::map<long long, Tally> bins;
  for (const auto& it : items) {
    if (!std::isfinite(it.snr_db)) {
      ++r.skipped_non_finite;
      continue;
    }
    bins[static_cast<long long>(std::floor((it.snr_db - origin_db) / bin_width_db))].add(
        it.correct);
  }
  if (bins.size() < 2) {
    throw Error(ErrorCode::InsufficientBins, "need at least two populated SNR bins");
  }
  for (const auto& [k, t] : bins) {
    const double lo = origin_db + static_cast<double>(k) * bin_width_db;
    r.bins.push_back({lo, lo + bin_width_db, t});
  }
  for (std::size_t i = 0; i + 1 < r.bins.size(); ++i) {
    const double jump = r.bins[i + 1].tally.fraction() - r.bins[i].tally.fraction();
    if (jump > r.max_jump) {
      r.max_jump = jump;
      const double c0 = 0.5 * (r.bins[i].lower_db + r.bins[i].upper_db);
      const double c1 = 0.5 * (r.bins[i + 1].lower_db + r.bins[i + 1].upper_db);
      r.step_db = 0.5 * (c0 + c1);
    }
  }
  r.binary = r.max_jump > 0.5;
  return r;
}

std::string render_threshold_table(const ThresholdReport& r) {
  std::ostringstream os;
  os << pad("SNR bin (dB)", 22, true) << pad("Correct", 9) << pad("Count", 7) << pad("Acc(%)", 9)
     << "\n";
  for (const auto& b : r.bins) {
    os << pad("[" + fmt("%.2f", b.lower_db) + ", " + fmt("%.2f", b.upper_db) + ")", 22, true)
       << pad(std::to_string(b.tally.correct), 9) << pad(std::to_string(b.tally.count), 7)
       << pad(fmt("%.2f", 100.0 * b.tally.fraction()), 9) << "\n";
  }
  os << "max jump: " << fmt("%.4f", r.max_jump) << "\n";
  os << "step: " << (r.step_db ? fmt("%.2f", *r.step_db) + " dB" : std::string("none")) << "\n";
  os << "binary threshold: " << (r.binary ? "yes" : "no") << "\n";
  if (r.skipped_non_finite) os << "skipped (non-finite SNR): " << r.skipped_non_finite << "\n";
  return os.str();
}

}  // namespace spooky
