#include "cogload/report.hpp"

#include "cogload/error.hpp"
#include "cogload/lopo.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace cogload::eval {
namespace {

using nlohmann::ordered_json;

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

double get_num(const ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

ordered_json opt(const std::optional<double>& v) { return v ? num(*v) : ordered_json(nullptr); }

// Optional metrics are stored as {"defined":bool,"value":...} so an undefined
// value stays distinct from a defined NaN.
ordered_json opt_tagged(const std::optional<double>& v) {
  ordered_json j;
  j["defined"] = v.has_value();
  j["value"] = opt(v);
  return j;
}

std::optional<double> get_opt_tagged(const ordered_json& j) {
  if (!j.at("defined").get<bool>()) {
    return std::nullopt;
  }
  return get_num(j.at("value"));
}

template <class Array>
ordered_json nums(const Array& a) {
  ordered_json j = ordered_json::array();
  for (double v : a) {
    j.push_back(num(v));
  }
  return j;
}

template <std::size_t N>
std::array<double, N> get_nums(const ordered_json& j) {
  if (j.size() != N) {
    throw Error(ErrorCode::SchemaViolation, "report: expected " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    out[i] = get_num(j[i]);
  }
  return out;
}

ordered_json summary_json(const MetricSummary& s) {
  ordered_json j;
  j["mean"] = num(s.mean);
  j["std"] = num(s.std);
  j["min"] = num(s.min);
  j["max"] = num(s.max);
  j["count"] = s.count;
  return j;
}

MetricSummary summary_from(const ordered_json& j) {
  return {get_num(j.at("mean")), get_num(j.at("std")), get_num(j.at("min")), get_num(j.at("max")),
          j.at("count").get<std::size_t>()};
}

ordered_json table_json(const MetricTable& t) {
  ordered_json j;
  j["groups"] = t.groups;
  ordered_json rows = ordered_json::object();
  for (const std::string& name : model::kTableMetrics) {
    if (const auto it = t.rows.find(name); it != t.rows.end()) {
      rows[name] = summary_json(it->second);
    }
  }
  for (const auto& [name, s] : t.rows) {
    if (!rows.contains(name)) {
      rows[name] = summary_json(s);
    }
  }
  j["rows"] = rows;
  return j;
}

MetricTable table_from(const ordered_json& j) {
  MetricTable t;
  t.groups = j.at("groups").get<std::vector<std::string>>();
  for (const auto& [name, s] : j.at("rows").items()) {
    t.rows[name] = summary_from(s);
  }
  return t;
}

ordered_json classification_json(const ClassificationReport& r) {
  ordered_json j;
  j["n"] = r.n;
  j["confusion"] = r.confusion;
  ordered_json rows = ordered_json::array();
  for (const auto& row : r.row_percent) {
    rows.push_back(nums(row));
  }
  j["row_percent"] = rows;
  j["accuracy"] = num(r.accuracy);
  j["precision"] = nums(r.precision);
  j["recall"] = nums(r.recall);
  j["f1"] = nums(r.f1);
  j["macro_precision"] = num(r.macro_precision);
  j["macro_recall"] = num(r.macro_recall);
  j["macro_f1"] = num(r.macro_f1);
  ordered_json auc = ordered_json::array();
  ordered_json ap = ordered_json::array();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auc.push_back(opt_tagged(r.roc_auc[c]));
    ap.push_back(opt_tagged(r.auprc[c]));
  }
  j["roc_auc"] = auc;
  j["auprc"] = ap;
  j["macro_roc_auc"] = opt_tagged(r.macro_roc_auc);
  j["macro_auprc"] = opt_tagged(r.macro_auprc);
  ordered_json curves = ordered_json::array();
  for (const auto& curve : r.roc_curves) {
    ordered_json pts = ordered_json::array();
    for (const CurvePoint& p : curve) {
      pts.push_back({num(p.x), num(p.y)});
    }
    curves.push_back(pts);
  }
  j["roc_curves"] = curves;
  j["severe_misclassification_rate"] = num(r.severe_misclassification_rate);
  j["notes"] = r.notes;
  return j;
}

ClassificationReport classification_from(const ordered_json& j) {
  ClassificationReport r;
  r.n = j.at("n").get<std::size_t>();
  r.confusion = j.at("confusion").get<ConfusionMatrix>();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.row_percent[c] = get_nums<kNumClasses>(j.at("row_percent").at(c));
    r.roc_auc[c] = get_opt_tagged(j.at("roc_auc").at(c));
    r.auprc[c] = get_opt_tagged(j.at("auprc").at(c));
    for (const auto& p : j.at("roc_curves").at(c)) {
      r.roc_curves[c].push_back({get_num(p.at(0)), get_num(p.at(1))});
    }
  }
  r.accuracy = get_num(j.at("accuracy"));
  r.precision = get_nums<kNumClasses>(j.at("precision"));
  r.recall = get_nums<kNumClasses>(j.at("recall"));
  r.f1 = get_nums<kNumClasses>(j.at("f1"));
  r.macro_precision = get_num(j.at("macro_precision"));
  r.macro_recall = get_num(j.at("macro_recall"));
  r.macro_f1 = get_num(j.at("macro_f1"));
  r.macro_roc_auc = get_opt_tagged(j.at("macro_roc_auc"));
  r.macro_auprc = get_opt_tagged(j.at("macro_auprc"));
  r.severe_misclassification_rate = get_num(j.at("severe_misclassification_rate"));
  r.notes = j.at("notes").get<std::vector<std::string>>();
  return r;
}

ordered_json importance_json(const ImportanceReport& r) {
  ordered_json j;
  j["baseline"] = num(r.baseline);
  j["repeats"] = r.repeats;
  j["seed"] = r.seed;
  ordered_json features = ordered_json::array();
  const auto& names = feature_manifest();
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    features.push_back({{"name", std::string(names[f])}, {"mean", num(r.mean[f])}, {"std", num(r.std[f])}});
  }
  j["features"] = features;
  return j;
}

ImportanceReport importance_from(const ordered_json& j) {
  ImportanceReport r;
  r.baseline = get_num(j.at("baseline"));
  r.repeats = j.at("repeats").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& features = j.at("features");
  if (features.size() != kFeatureCount) {
    throw Error(ErrorCode::SchemaViolation, "report: importance needs 28 features");
  }
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    r.mean[f] = get_num(features[f].at("mean"));
    r.std[f] = get_num(features[f].at("std"));
  }
  return r;
}

ordered_json convergence_json(const ConvergenceReport& r) {
  ordered_json j;
  ordered_json conditions = ordered_json::object();
  for (const auto& [key, c] : r.conditions) {
    conditions[key] = {{"sessions", c.sessions},
                       {"final_difficulty", summary_json(c.final_difficulty)},
                       {"weighted_score", summary_json(c.weighted_score)}};
  }
  j["conditions"] = conditions;
  ordered_json deltas = ordered_json::object();
  for (const auto& [key, d] : r.deltas) {
    deltas[key] = num(d);
  }
  j["deltas"] = deltas;
  return j;
}

ConvergenceReport convergence_from(const ordered_json& j) {
  ConvergenceReport r;
  for (const auto& [key, c] : j.at("conditions").items()) {
    r.conditions[key] = {c.at("sessions").get<std::size_t>(), summary_from(c.at("final_difficulty")),
                         summary_from(c.at("weighted_score"))};
  }
  for (const auto& [key, d] : j.at("deltas").items()) {
    r.deltas[key] = get_num(d);
  }
  return r;
}

// --- SVG helpers -----------------------------------------------------------

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

std::string svg_open(int w, int h) {
  return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(w) + "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(w) + " " +
         std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" "
         "fill=\"white\"/>\n";
}

std::string text(double x, double y, std::string_view s, std::string_view anchor = "middle", int size = 12) {
  return "<text x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", y) + "\" text-anchor=\"" + std::string(anchor) +
         "\" font-size=\"" + std::to_string(size) + "\">" + escape(s) + "</text>\n";
}

std::string line(double x1, double y1, double x2, double y2, std::string_view stroke, std::string_view extra = "") {
  return "<line x1=\"" + fmt("%.1f", x1) + "\" y1=\"" + fmt("%.1f", y1) + "\" x2=\"" + fmt("%.1f", x2) + "\" y2=\"" +
         fmt("%.1f", y2) + "\" stroke=\"" + std::string(stroke) + "\"" + std::string(extra) + "/>\n";
}

const std::array<const char*, kNumClasses> kClassNames = {"Too Easy", "Just Right", "Too Difficult"};
const std::array<const char*, 6> kPalette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

struct Plot {
  double left = 60, top = 40, width = 360, height = 300;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }

  std::string axes(std::string_view xlabel, std::string_view ylabel, int xticks, int yticks,
                   const char* xfmt, const char* yfmt) const {
    std::string s = "<rect x=\"" + fmt("%.1f", left) + "\" y=\"" + fmt("%.1f", top) + "\" width=\"" +
                    fmt("%.1f", width) + "\" height=\"" + fmt("%.1f", height) +
                    "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= xticks; ++i) {
      const double v = x0 + (x1 - x0) * i / xticks;
      s += line(px(v), top + height, px(v), top + height + 4, "black");
      s += text(px(v), top + height + 16, fmt(xfmt, v));
    }
    for (int i = 0; i <= yticks; ++i) {
      const double v = y0 + (y1 - y0) * i / yticks;
      s += line(left - 4, py(v), left, py(v), "black");
      s += text(left - 6, py(v) + 4, fmt(yfmt, v), "end");
    }
    s += text(left + width / 2, top + height + 34, xlabel);
    s += "<text x=\"16\" y=\"" + fmt("%.1f", top + height / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt("%.1f", top + height / 2) + ")\">" + escape(ylabel) + "</text>\n";
    return s;
  }
};

void write_file(const std::filesystem::path& path, const std::string& content, std::vector<std::string>& written) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) {
    throw Error(ErrorCode::IoFailure, "evaluation: cannot write '" + path.string() + "'");
  }
  written.push_back(path.string());
}

}  // namespace

MetricTable metric_table(const std::vector<std::string>& groups, const std::vector<ClassificationReport>& reports) {
  return {groups, model::aggregate_folds(reports)};
}

std::vector<TrajectorySeries> trajectories(const std::vector<control::SessionLog>& logs) {
  std::vector<TrajectorySeries> out;
  for (const control::SessionLog& log : logs) {
    TrajectorySeries t;
    t.condition = condition_key(log.config.control, log.config.task);
    t.label = log.config.participant_id + " " + t.condition;
    for (const control::LevelResult& r : log.levels) {
      t.delays.push_back(r.delay_played());
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::string report_to_json(const EvaluationReport& r) {
  ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["title"] = r.title;
  j["offline"] = r.offline ? table_json(*r.offline) : ordered_json(nullptr);
  j["realtime"] = r.realtime ? table_json(*r.realtime) : ordered_json(nullptr);
  j["pooled"] = r.pooled ? classification_json(*r.pooled) : ordered_json(nullptr);
  j["importance"] = r.importance ? importance_json(*r.importance) : ordered_json(nullptr);
  j["convergence"] = r.convergence ? convergence_json(*r.convergence) : ordered_json(nullptr);
  ordered_json series = ordered_json::array();
  for (const TrajectorySeries& t : r.trajectories) {
    series.push_back({{"label", t.label}, {"condition", t.condition}, {"delays", nums(t.delays)}});
  }
  j["trajectories"] = series;
  return j.dump(2);
}

EvaluationReport report_from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw Error(ErrorCode::SchemaViolation, "report: unsupported schema_version");
    }
    EvaluationReport r;
    r.title = j.at("title").get<std::string>();
    if (!j.at("offline").is_null()) r.offline = table_from(j["offline"]);
    if (!j.at("realtime").is_null()) r.realtime = table_from(j["realtime"]);
    if (!j.at("pooled").is_null()) r.pooled = classification_from(j["pooled"]);
    if (!j.at("importance").is_null()) r.importance = importance_from(j["importance"]);
    if (!j.at("convergence").is_null()) r.convergence = convergence_from(j["convergence"]);
    for (const auto& t : j.at("trajectories")) {
      TrajectorySeries s;
      s.label = t.at("label").get<std::string>();
      s.condition = t.at("condition").get<std::string>();
      for (const auto& d : t.at("delays")) {
        s.delays.push_back(get_num(d));
      }
      r.trajectories.push_back(std::move(s));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("report: ") + e.what());
  }
}

void write_metric_table_csv(std::ostream& out, const MetricTable& table) {
  out << "Metric,Mean,Std,Min,Max\n";
  auto cell = [](double v) { return std::isfinite(v) ? fmt("%.6f", v) : std::string(); };
  for (const std::string& name : model::kTableMetrics) {
    const auto it = table.rows.find(name);
    const MetricSummary s = it != table.rows.end() ? it->second : summarize({});
    out << name << ',' << cell(s.mean) << ',' << cell(s.std) << ',' << cell(s.min) << ',' << cell(s.max) << '\n';
  }
}

std::string confusion_svg(const ClassificationReport& r) {
  const double cell = 90, left = 130, top = 60;
  std::string s = svg_open(static_cast<int>(left + 3 * cell + 30), static_cast<int>(top + 3 * cell + 60));
  s += text(left + 1.5 * cell, 24, "Confusion matrix (row %)", "middle", 14);
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    s += text(left - 8, top + (t + 0.5) * cell + 4, kClassNames[t], "end");
    s += text(left + (t + 0.5) * cell, top + 3 * cell + 18, kClassNames[t]);
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      const double pct = r.row_percent[t][p];
      const double shade = std::isfinite(pct) ? std::clamp(pct / 100.0, 0.0, 1.0) : 0.0;
      const int level = static_cast<int>(std::lround(255 - 200 * shade));
      char fill[16];
      std::snprintf(fill, sizeof fill, "#%02x%02xff", level, level);
      s += "<rect x=\"" + fmt("%.1f", left + p * cell) + "\" y=\"" + fmt("%.1f", top + t * cell) + "\" width=\"" +
           fmt("%.1f", cell) + "\" height=\"" + fmt("%.1f", cell) + "\" fill=\"" + fill + "\" stroke=\"white\"/>\n";
      s += text(left + (p + 0.5) * cell, top + (t + 0.5) * cell, std::to_string(r.confusion[t][p]));
      s += text(left + (p + 0.5) * cell, top + (t + 0.5) * cell + 16, fmt("%.1f%%", std::isfinite(pct) ? pct : 0.0),
                "middle", 10);
    }
  }
  s += text(left + 1.5 * cell, top + 3 * cell + 40, "Predicted");
  s += text(20, top - 10, "True", "start");
  return s + "</svg>\n";
}

std::string roc_svg(const ClassificationReport& r) {
  Plot plot;
  std::string s = svg_open(600, 400);
  s += text(plot.left + plot.width / 2, 24, "One-vs-rest ROC", "middle", 14);
  s += plot.axes("False positive rate", "True positive rate", 5, 5, "%.1f", "%.1f");
  s += line(plot.px(0), plot.py(0), plot.px(1), plot.py(1), "#999999", " stroke-dasharray=\"4 4\"");
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::string pts;
    for (const CurvePoint& p : r.roc_curves[c]) {
      pts += fmt("%.2f", plot.px(p.x)) + "," + fmt("%.2f", plot.py(p.y)) + " ";
    }
    if (!pts.empty()) {
      s += "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" + std::string(kPalette[c]) + "\" points=\"" + pts +
           "\"/>\n";
    }
    const std::string auc = r.roc_auc[c] ? fmt("%.3f", *r.roc_auc[c]) : std::string("n/a");
    const double y = plot.top + 20 + 18 * c;
    s += line(plot.left + plot.width + 16, y - 4, plot.left + plot.width + 36, y - 4, kPalette[c], " stroke-width=\"2\"");
    s += text(plot.left + plot.width + 40, y, std::string(kClassNames[c]) + " (AUC " + auc + ")", "start", 11);
  }
  return s + "</svg>\n";
}

std::string trajectories_svg(const std::vector<TrajectorySeries>& series) {
  Plot plot;
  plot.width = 420;
  std::size_t levels = 1;
  for (const TrajectorySeries& t : series) {
    levels = std::max(levels, t.delays.size());
  }
  plot.x0 = 1;
  plot.x1 = static_cast<double>(std::max<std::size_t>(levels, 2));
  plot.y0 = 1.0;
  plot.y1 = 4.0;
  std::string s = svg_open(640, 400);
  s += text(plot.left + plot.width / 2, 24, "Difficulty trajectories", "middle", 14);
  s += plot.axes("Level", "Spawn delay (s)", static_cast<int>(plot.x1 - plot.x0), 6, "%.0f", "%.1f");
  std::map<std::string, std::size_t> colour;
  for (const TrajectorySeries& t : series) {
    colour.emplace(t.condition, colour.size());
  }
  for (const TrajectorySeries& t : series) {
    std::string pts;
    for (std::size_t i = 0; i < t.delays.size(); ++i) {
      pts += fmt("%.2f", plot.px(static_cast<double>(i + 1))) + "," + fmt("%.2f", plot.py(t.delays[i])) + " ";
    }
    s += "<polyline fill=\"none\" stroke-opacity=\"0.6\" stroke=\"" +
         std::string(kPalette[colour[t.condition] % kPalette.size()]) + "\" points=\"" + pts + "\"><title>" +
         escape(t.label) + "</title></polyline>\n";
  }
  for (const auto& [condition, idx] : colour) {
    const double y = plot.top + 20 + 18 * static_cast<double>(idx);
    s += line(plot.left + plot.width + 16, y - 4, plot.left + plot.width + 36, y - 4, kPalette[idx % kPalette.size()],
              " stroke-width=\"2\"");
    s += text(plot.left + plot.width + 40, y, condition, "start", 11);
  }
  return s + "</svg>\n";
}

std::string importance_svg(const ImportanceReport& r) {
  const double bar = 16, left = 200, top = 50, width = 360;
  const auto& names = feature_manifest();
  double hi = 1e-12;
  double lo = 0.0;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    if (std::isfinite(r.mean[f])) {
      hi = std::max(hi, r.mean[f]);
      lo = std::min(lo, r.mean[f]);
    }
  }
  auto px = [&](double v) { return left + (v - lo) / (hi - lo) * width; };
  std::string s = svg_open(static_cast<int>(left + width + 40), static_cast<int>(top + bar * kFeatureCount + 40));
  s += text(left + width / 2, 24, "Permutation importance (metric drop)", "middle", 14);
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const double v = std::isfinite(r.mean[f]) ? r.mean[f] : 0.0;
    const double y = top + bar * static_cast<double>(f);
    const double x = std::min(px(0.0), px(v));
    s += "<rect x=\"" + fmt("%.1f", x) + "\" y=\"" + fmt("%.1f", y + 2) + "\" width=\"" +
         fmt("%.1f", std::abs(px(v) - px(0.0))) + "\" height=\"" + fmt("%.1f", bar - 4) + "\" fill=\"#1f77b4\"/>\n";
    s += text(left - 6, y + bar - 4, names[f], "end", 10);
  }
  s += line(px(0.0), top, px(0.0), top + bar * kFeatureCount, "black");
  return s + "</svg>\n";
}

std::vector<std::string> emit_report(const EvaluationReport& report, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    throw Error(ErrorCode::IoFailure, "evaluation: cannot create '" + directory + "': " + ec.message());
  }
  const fs::path dir(directory);
  std::vector<std::string> written;
  write_file(dir / "report.json", report_to_json(report) + "\n", written);
  if (report.offline) {
    std::ostringstream csv;
    write_metric_table_csv(csv, *report.offline);
    write_file(dir / "offline_metrics.csv", csv.str(), written);
  }
  if (report.realtime) {
    std::ostringstream csv;
    write_metric_table_csv(csv, *report.realtime);
    write_file(dir / "realtime_metrics.csv", csv.str(), written);
  }
  if (report.pooled) {
    write_file(dir / "confusion.svg", confusion_svg(*report.pooled), written);
    write_file(dir / "roc.svg", roc_svg(*report.pooled), written);
  }
  if (!report.trajectories.empty()) {
    write_file(dir / "trajectories.svg", trajectories_svg(report.trajectories), written);
  }
  if (report.importance) {
    write_file(dir / "importance.svg", importance_svg(*report.importance), written);
  }
  return written;
}

}  // namespace cogload::eval
