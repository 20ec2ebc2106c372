#include "cli.hpp"

#include "cogload/error.hpp"
#include "cogload/evaluation.hpp"
#include "cogload/hub_server.hpp"
#include "cogload/io.hpp"
#include "cogload/lopo.hpp"
#include "cogload/model_rater.hpp"
#include "cogload/replay.hpp"
#include "cogload/report.hpp"
#include "cogload/simulator.hpp"
#include "cogload/windowing.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

namespace cogload::cli {
namespace {

using nlohmann::json;
using Logger = std::shared_ptr<spdlog::logger>;

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorCode::UsageError, what); }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cli: cannot write '" + path + "'");
  }
  return out;
}

void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::IoFailure, "cli: no such file '" + path + "'");
  }
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Option layering. Values missing from the command line are appended as
// "--name=value" from the environment first, then from the JSON config.

json load_config(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    }
  }
  if (path.empty()) {
    if (const char* env = std::getenv("COGLOAD_CONFIG")) {
      path = env;
    }
  }
  if (path.empty()) {
    return json::object();
  }
  std::ifstream in(path);
  if (!in) {
    usage("cannot read config file '" + path + "'");
  }
  try {
    json j = json::parse(in);
    if (!j.is_object()) {
      usage("config file must hold a JSON object");
    }
    return j;
  } catch (const json::exception& e) {
    usage("config file '" + path + "': " + e.what());
  }
}

bool given(const std::vector<std::string>& args, const CLI::Option* opt) {
  for (const std::string& a : args) {
    for (const std::string& l : opt->get_lnames()) {
      const std::string flag = "--" + l;
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        return true;
      }
    }
    for (const std::string& s : opt->get_snames()) {
      if (a.rfind("-" + s, 0) == 0 && a.rfind("--", 0) != 0) {
        return true;
      }
    }
  }
  return false;
}

std::vector<std::string> config_values(const json& v) {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const json& e : v) {
      auto sub = config_values(e);
      out.insert(out.end(), sub.begin(), sub.end());
    }
  } else if (v.is_string()) {
    out.push_back(v.get<std::string>());
  } else if (v.is_boolean()) {
    out.push_back(v.get<bool>() ? "true" : "false");
  } else if (!v.is_null()) {
    out.push_back(v.dump());
  }
  return out;
}

void layer(const CLI::App& app, const std::vector<std::string>& args, const json& scope, const json& global,
           std::vector<std::string>& extra) {
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty() || opt->get_single_name() == "help" || opt->get_single_name() == "config" ||
        given(args, opt)) {
      continue;
    }
    const std::string name = opt->get_single_name();
    std::vector<std::string> values;
    if (const char* env = std::getenv(env_name(name).c_str()); env != nullptr && *env != '\0') {
      values.emplace_back(env);
    } else if (scope.is_object() && scope.contains(name)) {
      values = config_values(scope[name]);
    } else if (global.is_object() && global.contains(name) && !global[name].is_object()) {
      values = config_values(global[name]);
    }
    for (const std::string& v : values) {
      extra.push_back("--" + name + "=" + v);
    }
  }
}

std::vector<std::string> layered_args(const CLI::App& app, const std::vector<std::string>& args) {
  const json config = load_config(args);
  std::vector<std::string> out = args;
  std::vector<std::string> extra;
  const CLI::App* sub = nullptr;
  for (std::size_t i = 1; i < args.size() && sub == nullptr; ++i) {
    for (const CLI::App* s : app.get_subcommands({})) {
      if (s->get_name() == args[i]) {
        sub = s;
        break;
      }
    }
  }
  layer(app, args, json::object(), config, extra);
  if (sub != nullptr) {
    const json scope = config.contains(sub->get_name()) ? config[sub->get_name()] : json::object();
    layer(*sub, args, scope, config, extra);
  }
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

// ---------------------------------------------------------------------------

windowing::NormalizationScope parse_scope(const std::string& s) {
  if (s == "global") return windowing::NormalizationScope::Global;
  if (s == "per_participant" || s == "per-participant") return windowing::NormalizationScope::PerParticipant;
  usage("unknown normalization scope '" + s + "' (global | per_participant)");
}

struct TrainOptions {
  int hidden = 64;
  int epochs = 100;
  int batch_size = 32;
  int patience = 15;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double val_fraction = 0.10;
  bool no_augment = false;

  void add(CLI::App* app) {
    app->add_option("--hidden", hidden, "Recurrent and head width")->capture_default_str();
    app->add_option("--epochs", epochs, "Maximum epochs")->capture_default_str();
    app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app->add_option("--patience", patience, "Early-stopping patience in epochs")->capture_default_str();
    app->add_option("--lr", lr, "AdamW learning rate")->capture_default_str();
    app->add_option("--weight-decay", weight_decay, "Decoupled weight decay")->capture_default_str();
    app->add_option("--val-fraction", val_fraction, "Stratified validation share")->capture_default_str();
    app->add_flag("--no-augment", no_augment, "Disable synthetic augmentation");
  }

  model::TrainingConfig config(std::uint64_t seed) const {
    model::TrainingConfig c;
    c.model.hidden = hidden;
    c.model.head_hidden = hidden;
    c.max_epochs = epochs;
    c.batch_size = batch_size;
    c.patience = patience;
    c.learning_rate = lr;
    c.weight_decay = weight_decay;
    c.validation_fraction = val_fraction;
    c.augment = !no_augment;
    c.seed = seed;
    return c;
  }
};

// --- extract -----------------------------------------------------------------

struct ExtractOptions {
  std::string gaze, physio, levels, participant = "P00", out;
  bool skip_invalid = false;
};

struct LevelRow {
  int id;
  double start;
  double end;
  std::optional<LoadLabel> label;
};

std::vector<LevelRow> read_levels_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cli: cannot read '" + path + "'");
  }
  std::string line;
  std::getline(in, line);
  if (line.rfind("level_id,start,end", 0) != 0) {
    throw Error(ErrorCode::SchemaViolation, "cli: levels CSV header must be level_id,start,end[,label]");
  }
  std::vector<LevelRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    std::stringstream ss(line);
    std::string id, start, end, label;
    std::getline(ss, id, ',');
    std::getline(ss, start, ',');
    std::getline(ss, end, ',');
    std::getline(ss, label, ',');
    try {
      LevelRow r{std::stoi(id), std::stod(start), std::stod(end), std::nullopt};
      if (!label.empty()) {
        r.label = label_from_int(std::stoi(label));
        if (!r.label) {
          throw std::invalid_argument("label");
        }
      }
      rows.push_back(r);
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaViolation, "cli: levels CSV line " + std::to_string(line_no));
    }
  }
  return rows;
}

int run_extract(const ExtractOptions& o, std::ostream& out, const Logger& log) {
  require_file(o.gaze);
  require_file(o.physio);
  const GazeSeries gaze = io::read_gaze_csv(o.gaze);
  const PhysioSeries physio = io::read_physio_csv(o.physio);
  std::vector<LevelRow> levels;
  if (!o.levels.empty()) {
    require_file(o.levels);
    levels = read_levels_csv(o.levels);
  } else if (!gaze.empty() && !physio.empty()) {
    // Back-to-back 60 s levels covering the overlap of both recordings.
    const double start = std::max(gaze.front().timestamp, physio.front().timestamp);
    const double end = std::min(gaze.back().timestamp, physio.back().timestamp);
    for (int k = 0; start + (k + 1) * kLevelSeconds <= end + 1.0 / kPhysioRateHz; ++k) {
      levels.push_back({k, start + k * kLevelSeconds, start + (k + 1) * kLevelSeconds, std::nullopt});
    }
  }
  Dataset data;
  for (const LevelRow& row : levels) {
    try {
      FeatureSequence seq = windowing::build_feature_sequence(gaze, physio, {row.start, row.end});
      seq.participant_id = o.participant;
      seq.level_id = row.id;
      seq.label = row.label;
      data.push_back(std::move(seq));
    } catch (const Error& e) {
      if (!o.skip_invalid) {
        throw Error(e.code(), "level " + std::to_string(row.id) + ": " + e.what());
      }
      log->warn("event=skip_level level={} reason=\"{}\"", row.id, e.what());
    }
  }
  if (o.out.empty() || o.out == "-") {
    io::write_features_jsonl(out, data);
  } else {
    io::write_features_jsonl(o.out, data);
  }
  log->info("event=extract levels={} participant={}", data.size(), o.participant);
  return kExitOk;
}

// --- train ---------------------------------------------------------------------

struct TrainCmd {
  std::string features, out, report_dir, scope = "global";
  bool lopo = false;
  std::uint64_t seed = 42;
  TrainOptions train;
};

eval::ClassificationReport pooled_report(const model::LopoResult& r) {
  std::vector<eval::Probabilities> probs;
  std::vector<LoadLabel> labels;
  for (const model::FoldResult& f : r.folds) {
    probs.insert(probs.end(), f.probabilities.begin(), f.probabilities.end());
    labels.insert(labels.end(), f.labels.begin(), f.labels.end());
  }
  return eval::classification_report(probs, labels);
}

int run_train(const TrainCmd& o, std::ostream& out, const Logger& log) {
  if (!o.lopo && o.out.empty()) {
    usage("train needs --out (or --lopo)");
  }
  require_file(o.features);
  const Dataset data = io::read_features_jsonl(o.features);
  const auto scope = parse_scope(o.scope);
  const model::TrainingConfig tc = o.train.config(o.seed);
  if (o.lopo) {
    model::LopoConfig lc{tc, scope};
    const model::LopoResult r = model::lopo_cross_validate(data, lc, [&](const model::FoldResult& f) {
      log->info("event=fold participant={} accuracy={:.4f} macro_f1={:.4f} best_epoch={}", f.participant,
                f.report.accuracy, f.report.macro_f1, f.best_epoch);
    });
    eval::EvaluationReport report;
    report.title = "Leave-one-participant-out cross-validation";
    std::vector<std::string> groups;
    std::vector<eval::ClassificationReport> reports;
    for (const model::FoldResult& f : r.folds) {
      groups.push_back(f.participant);
      reports.push_back(f.report);
    }
    report.offline = eval::MetricTable{groups, r.aggregate};
    report.pooled = pooled_report(r);
    eval::write_metric_table_csv(out, *report.offline);
    if (!o.report_dir.empty()) {
      for (const std::string& p : eval::emit_report(report, o.report_dir)) {
        log->info("event=write path={}", p);
      }
    }
  }
  if (!o.out.empty()) {
    const model::ModelBundle bundle = model::fit_bundle(data, tc, scope);
    model::save_model(o.out, bundle);
    log->info("event=model_saved path={} sequences={}", o.out, data.size());
  }
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------------

struct EvaluateCmd {
  std::string model, features, out_dir;
  bool importance = false;
  int repeats = 10;
  std::uint64_t seed = 42;
};

int run_evaluate(const EvaluateCmd& o, std::ostream& out, const Logger& log) {
  require_file(o.model);
  require_file(o.features);
  const model::ModelBundle bundle = model::load_model(o.model);
  const Dataset data = io::read_features_jsonl(o.features);
  const eval::Predictor predict = eval::bundle_predictor(bundle);
  const std::vector<eval::Probabilities> probs = predict(data);

  std::map<std::string, std::pair<std::vector<eval::Probabilities>, std::vector<LoadLabel>>> by_participant;
  std::vector<std::string> order;
  std::vector<LoadLabel> labels;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!data[i].label) {
      throw Error(ErrorCode::LengthMismatch, "cli: evaluate needs labelled sequences");
    }
    labels.push_back(*data[i].label);
    auto [it, fresh] = by_participant.try_emplace(data[i].participant_id);
    if (fresh) {
      order.push_back(data[i].participant_id);
    }
    it->second.first.push_back(probs[i]);
    it->second.second.push_back(*data[i].label);
  }
  eval::EvaluationReport report;
  report.title = "Model evaluation";
  std::vector<eval::ClassificationReport> reports;
  for (const std::string& p : order) {
    reports.push_back(eval::classification_report(by_participant[p].first, by_participant[p].second));
  }
  report.offline = eval::metric_table(order, reports);
  report.pooled = eval::classification_report(probs, labels);
  if (o.importance) {
    report.importance = eval::permutation_importance(predict, data, eval::accuracy_metric, o.repeats, o.seed);
  }
  eval::write_metric_table_csv(out, *report.offline);
  if (!o.out_dir.empty()) {
    for (const std::string& p : eval::emit_report(report, o.out_dir)) {
      log->info("event=write path={}", p);
    }
  }
  log->info("event=evaluate sequences={} accuracy={:.4f}", data.size(), report.pooled->accuracy);
  return kExitOk;
}

// --- serve -------------------------------------------------------------------------

struct ServeCmd {
  std::string model, host = "127.0.0.1", port_file, features_out, ratings_out;
  int port = 0;
  double horizon = 120.0;
  double echo_timeout = 2.0;
  bool exit_after_session = false;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

std::string rating_line(const hub::Response& r) {
  json j;
  if (const auto* m = std::get_if<hub::RatingMessage>(&r)) {
    j["level_id"] = m->level_id;
    j["label"] = to_int(m->label);
    j["probs"] = m->probs;
  } else {
    const auto& e = std::get<hub::ErrorMessage>(r);
    j["level_id"] = e.level_id;
    j["error"] = e.code;
  }
  return j.dump();
}

int run_serve(const ServeCmd& o, const Logger& log) {
  if (o.port < 0 || o.port > 65535) {
    usage("--port must be in [0, 65535]");
  }
  std::optional<model::ModelBundle> bundle;
  if (!o.model.empty()) {
    require_file(o.model);
    bundle = model::load_model(o.model);
  } else {
    log->warn("event=no_model detail=\"levels will be answered with ModelNotLoaded\"");
  }
  std::ofstream features;
  std::ofstream ratings;
  if (!o.features_out.empty()) features = open_out(o.features_out);
  if (!o.ratings_out.empty()) ratings = open_out(o.ratings_out);
  std::mutex file_mutex;

  hub::ServerConfig sc;
  sc.host = o.host;
  sc.port = static_cast<std::uint16_t>(o.port);
  sc.hub.horizon_seconds = o.horizon;
  sc.hub.echo_timeout_seconds = o.echo_timeout;
  sc.exit_after_session = o.exit_after_session;
  hub::HubServer server(
      sc, std::move(bundle),
      [&](const FeatureSequence& seq) {
        std::lock_guard lock(file_mutex);
        if (features.is_open()) {
          features << io::sequence_to_json_line(seq) << '\n' << std::flush;
        }
      },
      [&](const hub::Response& r) {
        if (const auto* m = std::get_if<hub::RatingMessage>(&r)) {
          log->info("event=rating level={} label={} latency_ms={}", m->level_id, to_int(m->label), m->latency_ms);
        } else {
          const auto& e = std::get<hub::ErrorMessage>(r);
          log->warn("event=error level={} code={} message=\"{}\"", e.level_id, e.code, e.message);
        }
        std::lock_guard lock(file_mutex);
        if (ratings.is_open() && std::visit([](const auto& m) { return m.level_id; }, r) >= 0) {
          ratings << rating_line(r) << '\n' << std::flush;
        }
      });
  log->info("event=listening host={} port={}", o.host, server.port());
  if (!o.port_file.empty()) {
    const std::string tmp = o.port_file + ".tmp";
    {
      std::ofstream pf = open_out(tmp);
      pf << server.port() << '\n';
    }
    std::filesystem::rename(tmp, o.port_file);
  }
  g_interrupted = false;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    while (!done) {
      if (g_interrupted) {
        server.stop();
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  server.run();
  done = true;
  watcher.join();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
  for (hub::StreamId s : {hub::StreamId::Gaze, hub::StreamId::Physio}) {
    const hub::StreamCounters c = server.hub().counters(s);
    log->info("event=stream_stats stream={} received={} dropped_late={} evicted={} seq_gaps={}", hub::to_string(s),
              c.received, c.dropped_late, c.evicted, c.seq_gaps);
  }
  return kExitOk;
}

// --- replay ------------------------------------------------------------------------

struct ReplayCmd {
  std::string recording, host = "127.0.0.1", ratings_out, summary_out;
  int port = 0;
  double speed = 1.0;
  double timeout = 30.0;
};

int run_replay(const ReplayCmd& o, std::ostream& out, const Logger& log) {
  if (o.port <= 0 || o.port > 65535) {
    usage("replay needs --port of a running hub");
  }
  require_file(o.recording);
  const auto lines = hub::load_recording(o.recording);
  hub::ReplayConfig rc;
  rc.host = o.host;
  rc.port = static_cast<std::uint16_t>(o.port);
  rc.speed = o.speed;
  rc.response_timeout_seconds = o.timeout;
  log->info("event=replay_start messages={} speed={}", lines.size(), o.speed);
  const hub::ReplayReport r = hub::replay(lines, rc);
  if (!o.ratings_out.empty()) {
    std::ofstream f = open_out(o.ratings_out);
    for (const hub::Response& resp : r.responses) {
      f << std::visit([](const auto& m) { return hub::encode(m); }, resp) << '\n';
    }
  }
  json summary;
  summary["messages_sent"] = r.messages_sent;
  summary["responses"] = r.responses.size();
  summary["wall_seconds"] = r.wall_seconds;
  summary["max_schedule_lag_ms"] = r.max_schedule_lag_ms;
  json latency = json::object();
  double worst = 0.0;
  for (const auto& [level, ms] : r.client_latency_ms) {
    latency[std::to_string(level)] = ms;
    worst = std::max(worst, ms);
  }
  summary["client_latency_ms"] = latency;
  json server_latency = json::object();
  for (const hub::Response& resp : r.responses) {
    if (const auto* m = std::get_if<hub::RatingMessage>(&resp)) {
      server_latency[std::to_string(m->level_id)] = m->latency_ms;
    }
  }
  summary["server_latency_ms"] = server_latency;
  summary["max_client_latency_ms"] = worst;
  if (!o.summary_out.empty()) {
    std::ofstream f = open_out(o.summary_out);
    f << summary.dump(2) << '\n';
  }
  out << summary.dump(2) << '\n';
  log->info("event=replay_done responses={} max_client_latency_ms={:.1f}", r.responses.size(), worst);
  return kExitOk;
}

// --- simulate ----------------------------------------------------------------------

struct SimulateCmd {
  int participants = 20;
  std::vector<std::string> conditions{"model/single", "model/dual", "self/single", "self/dual"};
  int levels = 8;
  double start_delay = 2.6;
  std::uint64_t seed = 42;
  std::string model, out, summary_out, truth_out, dataset_out, record_out;
  int train_participants = 20;
  int train_levels_per_class = 4;
  int dataset_levels_per_class = 4;
  int hidden = 32;
  int epochs = 40;
  double noise_scale = 1.0;
  double gap_spread = 0.20;
  double baseline_spread = 1.0;
  std::string self_policy = "biased";
  double biased_low = 0.60;
  double biased_high = 0.95;
  bool no_sessions = false;
};

struct Condition {
  std::string control;  // model | self | oracle
  control::TaskType task;
};

Condition parse_condition(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) {
    usage("condition must look like <model|self|oracle>/<single|dual>, got '" + s + "'");
  }
  Condition c{s.substr(0, slash), control::TaskType::Single};
  if (c.control != "model" && c.control != "self" && c.control != "oracle") {
    usage("unknown control '" + c.control + "'");
  }
  const std::string task = s.substr(slash + 1);
  if (task != "single" && task != "dual") {
    usage("unknown task '" + task + "'");
  }
  c.task = control::task_from_string(task);
  return c;
}

int run_simulate(const SimulateCmd& o, std::ostream& out, const Logger& log) {
  if (o.participants < 1) {
    usage("--participants must be positive");
  }
  std::vector<Condition> conditions;
  for (const std::string& c : o.conditions) {
    conditions.push_back(parse_condition(c));
  }
  sim::PopulationConfig pop;
  pop.noise_scale = o.noise_scale;
  pop.gap_spread = o.gap_spread;
  pop.baseline_spread = o.baseline_spread;
  std::vector<sim::SimProfile> profiles;
  for (int i = 0; i < o.participants; ++i) {
    profiles.push_back(sim::make_profile(i, o.seed, pop));
  }

  if (!o.dataset_out.empty()) {
    io::write_features_jsonl(o.dataset_out,
                             sim::generate_dataset(profiles, o.dataset_levels_per_class, sim::derive_seed(o.seed, 0xDA7A)));
    log->info("event=dataset_written path={} participants={}", o.dataset_out, profiles.size());
  }
  if (!o.record_out.empty()) {
    sim::RecordingConfig rc;
    rc.profile = profiles.front();
    rc.task = conditions.empty() ? control::TaskType::Single : conditions.front().task;
    rc.levels = o.levels;
    rc.seed = sim::derive_seed(o.seed, 0x5EC);
    std::ofstream f = open_out(o.record_out);
    sim::write_recording(f, rc);
    log->info("event=recording_written path={} participant={}", o.record_out, rc.profile.id);
  }
  if (o.no_sessions || conditions.empty()) {
    return kExitOk;
  }

  std::optional<model::ModelBundle> bundle;
  const bool needs_model = std::any_of(conditions.begin(), conditions.end(),
                                       [](const Condition& c) { return c.control == "model"; });
  if (needs_model) {
    if (!o.model.empty()) {
      require_file(o.model);
      bundle = model::load_model(o.model);
    } else {
      std::vector<sim::SimProfile> train_profiles;
      for (int i = 0; i < o.train_participants; ++i) {
        train_profiles.push_back(sim::make_profile(i, sim::derive_seed(o.seed, 0x7EA1), pop));
      }
      const Dataset train = sim::generate_dataset(train_profiles, o.train_levels_per_class,
                                                  sim::derive_seed(o.seed, 0x7EA2));
      model::TrainingConfig tc;
      tc.model.hidden = o.hidden;
      tc.model.head_hidden = o.hidden;
      tc.max_epochs = o.epochs;
      tc.seed = o.seed;
      bundle = model::fit_bundle(train, tc);
      log->info("event=model_trained sequences={} hidden={} epochs={}", train.size(), o.hidden, o.epochs);
    }
  }

  const sim::RatingPolicy self_policy =
      o.self_policy == "oracle" ? sim::RatingPolicy::oracle_weighted()
                                : sim::RatingPolicy{sim::RatingPolicy::Kind::BiasedRaw, o.biased_low, o.biased_high};
  if (o.self_policy != "oracle" && o.self_policy != "biased") {
    usage("--self-policy must be biased or oracle");
  }

  std::ofstream sessions_file;
  std::ostream* sessions = &out;
  if (!o.out.empty() && o.out != "-") {
    sessions_file = open_out(o.out);
    sessions = &sessions_file;
  }
  std::ofstream summary;
  if (!o.summary_out.empty()) {
    summary = open_out(o.summary_out);
    control::write_session_summary_header(summary);
  }
  std::ofstream truth;
  if (!o.truth_out.empty()) {
    truth = open_out(o.truth_out);
  }

  for (const sim::SimProfile& p : profiles) {
    for (const Condition& c : conditions) {
      // Executor and session seeds depend on participant and task only, so
      // conditions that share a task face identical performance noise.
      const std::uint64_t seed = sim::derive_seed(p.seed, static_cast<std::uint64_t>(c.task) + 1);
      sim::SimulatedExecutor executor(p, c.task, seed, c.control == "model");
      control::SessionConfig sc;
      sc.participant_id = p.id;
      sc.task = c.task;
      sc.levels = o.levels;
      sc.start_delay_tenths = static_cast<int>(std::lround(o.start_delay * 10.0));
      sc.seed = seed;
      std::unique_ptr<control::Rater> rater;
      if (c.control == "model") {
        sc.control = control::ControlType::Model;
        rater = std::make_unique<model::ModelRater>(*bundle);
      } else if (c.control == "oracle") {
        rater = std::make_unique<sim::PolicyRater>(sim::RatingPolicy::oracle_weighted(), control::RatingSource::Oracle);
      } else {
        rater = std::make_unique<sim::PolicyRater>(self_policy, control::RatingSource::Self);
      }
      const control::SessionLog session = control::run_session(sc, executor, *rater);
      control::write_session_jsonl(*sessions, session);
      if (summary.is_open()) {
        control::write_session_summary_row(summary, session);
      }
      if (truth.is_open()) {
        for (std::size_t k = 0; k < session.levels.size(); ++k) {
          json j;
          j["participant_id"] = p.id;
          j["control"] = control::to_string(sc.control);
          j["task"] = control::to_string(sc.task);
          j["seed"] = sc.seed;
          j["level"] = session.levels[k].level_index;
          j["true_label"] = to_int(executor.true_labels()[k]);
          truth << j.dump() << '\n';
        }
      }
    }
  }
  log->info("event=simulate participants={} conditions={}", profiles.size(), conditions.size());
  return kExitOk;
}

// --- report ------------------------------------------------------------------------

struct ReportCmd {
  std::vector<std::string> sessions;
  std::string truth, out_dir, title = "Closed-loop sessions";
};

int run_report(const ReportCmd& o, std::ostream& out, const Logger& log) {
  std::vector<control::SessionLog> logs;
  for (const std::string& path : o.sessions) {
    require_file(path);
    std::ifstream in(path);
    auto part = control::read_session_jsonl(in);
    logs.insert(logs.end(), part.begin(), part.end());
  }
  eval::EvaluationReport report;
  report.title = o.title;
  report.convergence = eval::convergence_analysis(logs);
  report.trajectories = eval::trajectories(logs);

  if (!o.truth.empty()) {
    require_file(o.truth);
    std::map<std::tuple<std::string, std::string, std::string, std::uint64_t, int>, LoadLabel> truth;
    std::ifstream in(o.truth);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        const auto label = label_from_int(j.at("true_label").get<int>());
        if (!label) throw Error(ErrorCode::SchemaViolation, "label out of range");
        truth[{j.at("participant_id").get<std::string>(), j.at("control").get<std::string>(),
               j.at("task").get<std::string>(), j.at("seed").get<std::uint64_t>(), j.at("level").get<int>()}] = *label;
      } catch (const std::exception& e) {
        throw Error(ErrorCode::SchemaViolation, "cli: truth line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    // Real-time predictions against ground truth, one report per participant.
    std::map<std::string, std::pair<std::vector<eval::Probabilities>, std::vector<LoadLabel>>> groups;
    std::vector<std::string> order;
    std::vector<eval::Probabilities> all_probs;
    std::vector<LoadLabel> all_labels;
    for (const control::SessionLog& s : logs) {
      for (const control::LevelResult& r : s.levels) {
        if (r.rating_source != control::RatingSource::Model || !r.probabilities) continue;
        const auto it = truth.find({s.config.participant_id, std::string(control::to_string(s.config.control)),
                                    std::string(control::to_string(s.config.task)), s.config.seed, r.level_index});
        if (it == truth.end()) continue;
        auto [g, fresh] = groups.try_emplace(s.config.participant_id);
        if (fresh) order.push_back(s.config.participant_id);
        g->second.first.push_back(*r.probabilities);
        g->second.second.push_back(it->second);
        all_probs.push_back(*r.probabilities);
        all_labels.push_back(it->second);
      }
    }
    if (!all_labels.empty()) {
      std::vector<eval::ClassificationReport> reports;
      for (const std::string& p : order) {
        reports.push_back(eval::classification_report(groups[p].first, groups[p].second));
      }
      report.realtime = eval::metric_table(order, reports);
      report.pooled = eval::classification_report(all_probs, all_labels);
    }
  }

  for (const auto& [key, c] : report.convergence->conditions) {
    out << key << ": sessions=" << c.sessions << " final_difficulty_mean=" << fixed(c.final_difficulty.mean, 3)
        << " std=" << fixed(c.final_difficulty.std, 3) << '\n';
  }
  for (const auto& [key, d] : report.convergence->deltas) {
    out << key << ": " << fixed(d, 3) << '\n';
  }
  if (!o.out_dir.empty()) {
    for (const std::string& p : eval::emit_report(report, o.out_dir)) {
      log->info("event=write path={}", p);
    }
  }
  return kExitOk;
}

Logger make_logger(std::ostream& err, const std::string& level) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto logger = std::make_shared<spdlog::logger>("cogload", sink);
  logger->set_pattern("ts=%Y-%m-%dT%H:%M:%S.%e level=%l %v");
  const auto lvl = spdlog::level::from_str(level);
  if (lvl == spdlog::level::off && level != "off") {
    usage("unknown log level '" + level + "'");
  }
  logger->set_level(lvl);
  return logger;
}

}  // namespace

std::string env_name(const std::string& option) {
  std::string out = "COGLOAD_";
  for (char c : option) {
    out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

int dispatch(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cognitive-load estimation and adaptive difficulty engine", "cogload"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  app.set_version_flag("--version", "cogload 0.1.0");
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--config", config_path, "JSON config file (flags > COGLOAD_* env > config > defaults)");
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")->capture_default_str();
  app.footer("Every option NAME can also come from the COGLOAD_NAME environment variable (dashes become\n"
             "underscores) or from the config file, either at top level or under the subcommand name.");

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "Raw gaze/physio CSVs to feature JSON lines");
  extract->add_option("--gaze", ex.gaze, "Gaze CSV (t,dlx,...,valid_r)")->required();
  extract->add_option("--physio", ex.physio, "Physio CSV (t,ppg,gsr)")->required();
  extract->add_option("--levels", ex.levels, "Level CSV level_id,start,end[,label]; default back-to-back 60 s levels");
  extract->add_option("--participant", ex.participant, "Participant id")->capture_default_str();
  extract->add_option("--out", ex.out, "Output JSON-lines path ('-' for stdout)");
  extract->add_flag("--skip-invalid", ex.skip_invalid, "Skip levels whose features cannot be computed");

  TrainCmd tr;
  auto* train = app.add_subcommand("train", "Train a model from labelled features");
  train->add_option("--features", tr.features, "Labelled feature JSON lines")->required();
  train->add_option("--out", tr.out, "Model output path");
  train->add_flag("--lopo", tr.lopo, "Run leave-one-participant-out cross-validation");
  train->add_option("--report-dir", tr.report_dir, "Directory for the cross-validation report");
  train->add_option("--scope", tr.scope, "Normalization scope: global | per_participant")->capture_default_str();
  train->add_option("--seed", tr.seed, "Seed for initialization, shuffling and augmentation")->capture_default_str();
  tr.train.add(train);

  EvaluateCmd ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on labelled features");
  evaluate->add_option("--model", ev.model, "Model file")->required();
  evaluate->add_option("--features", ev.features, "Labelled feature JSON lines")->required();
  evaluate->add_option("--out-dir", ev.out_dir, "Report directory");
  evaluate->add_flag("--importance", ev.importance, "Compute permutation feature importance");
  evaluate->add_option("--repeats", ev.repeats, "Permutation repeats")->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Permutation seed")->capture_default_str();

  ServeCmd sv;
  auto* serve = app.add_subcommand("serve", "Run the streaming hub");
  serve->add_option("--model", sv.model, "Model file");
  serve->add_option("--host", sv.host, "Bind address")->capture_default_str();
  serve->add_option("--port", sv.port, "TCP port, 0 picks a free one")->capture_default_str();
  serve->add_option("--port-file", sv.port_file, "Write the bound port to this file");
  serve->add_option("--horizon", sv.horizon, "Buffered seconds per stream before eviction")->capture_default_str();
  serve->add_option("--echo-timeout", sv.echo_timeout, "Seconds to wait for level_end echoes")->capture_default_str();
  serve->add_flag("--exit-after-session", sv.exit_after_session, "Stop after session_end has been answered");
  serve->add_option("--features-out", sv.features_out, "Append each level's raw features (JSON lines)");
  serve->add_option("--ratings-out", sv.ratings_out, "Append each level's label and probabilities (JSON lines)");

  SimulateCmd si;
  auto* simulate = app.add_subcommand("simulate", "Closed-loop sessions with simulated participants");
  simulate->add_option("--participants", si.participants, "Simulated participants")->capture_default_str();
  simulate->add_option("--condition", si.conditions, "control/task, control in model|self|oracle (repeatable)")
      ->capture_default_str();
  simulate->add_option("--levels", si.levels, "Levels per session")->capture_default_str();
  simulate->add_option("--start-delay", si.start_delay, "Starting spawn delay in seconds")->capture_default_str();
  simulate->add_option("--seed", si.seed, "Run seed")->capture_default_str();
  simulate->add_option("--model", si.model, "Model file; trained on a separate simulated population when absent");
  simulate->add_option("--out", si.out, "Session log JSON lines ('-' or absent for stdout)");
  simulate->add_option("--summary-out", si.summary_out, "Per-session CSV summary");
  simulate->add_option("--truth-out", si.truth_out, "Ground-truth labels per level (JSON lines)");
  simulate->add_option("--dataset-out", si.dataset_out, "Also write a labelled feature dataset");
  simulate->add_option("--dataset-levels-per-class", si.dataset_levels_per_class, "Levels per class in --dataset-out")
      ->capture_default_str();
  simulate->add_option("--record-out", si.record_out, "Also write a wire-format recording of the first participant");
  simulate->add_option("--train-participants", si.train_participants, "Population for the internal model")
      ->capture_default_str();
  simulate->add_option("--train-levels-per-class", si.train_levels_per_class, "Levels per class for the internal model")
      ->capture_default_str();
  simulate->add_option("--hidden", si.hidden, "Internal model width")->capture_default_str();
  simulate->add_option("--epochs", si.epochs, "Internal model epochs")->capture_default_str();
  simulate->add_option("--noise-scale", si.noise_scale, "Scales all generator noise")->capture_default_str();
  simulate->add_option("--gap-spread", si.gap_spread, "Std of the load gap within a band")->capture_default_str();
  simulate->add_option("--baseline-spread", si.baseline_spread, "Scales between-participant baselines")
      ->capture_default_str();
  simulate->add_option("--self-policy", si.self_policy, "Rating policy for self control: biased | oracle")
      ->capture_default_str();
  simulate->add_option("--biased-low", si.biased_low, "Biased policy: raw score below this is TooDifficult")
      ->capture_default_str();
  simulate->add_option("--biased-high", si.biased_high, "Biased policy: raw score at or above this is TooEasy")
      ->capture_default_str();
  simulate->add_flag("--no-sessions", si.no_sessions, "Only write --dataset-out / --record-out");

  ReplayCmd rp;
  auto* replay = app.add_subcommand("replay", "Stream a recorded session into a running hub");
  replay->add_option("--recording", rp.recording, "Recorded wire-format JSON lines")->required();
  replay->add_option("--host", rp.host, "Hub address")->capture_default_str();
  replay->add_option("--port", rp.port, "Hub port")->required();
  replay->add_option("--speed", rp.speed, "Pace factor; 0 sends as fast as possible, level by level")
      ->capture_default_str();
  replay->add_option("--timeout", rp.timeout, "Seconds to wait for each rating")->capture_default_str();
  replay->add_option("--ratings-out", rp.ratings_out, "Responses as received");
  replay->add_option("--summary-out", rp.summary_out, "Latency summary JSON");

  ReportCmd rc;
  auto* report = app.add_subcommand("report", "Convergence report and plots from session logs");
  report->add_option("--sessions", rc.sessions, "Session log JSON lines (repeatable)")->required();
  report->add_option("--truth", rc.truth, "Ground-truth labels from simulate --truth-out");
  report->add_option("--out-dir", rc.out_dir, "Report directory");
  report->add_option("--title", rc.title, "Report title")->capture_default_str();

  Logger log;
  try {
    const std::vector<std::string> args = layered_args(app, raw_args);
    std::vector<const char*> argv;
    for (const std::string& a : args) {
      argv.push_back(a.c_str());
    }
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitUsage;
    }
    log = make_logger(err, log_level);
    if (extract->parsed()) return run_extract(ex, out, log);
    if (train->parsed()) return run_train(tr, out, log);
    if (evaluate->parsed()) return run_evaluate(ev, out, log);
    if (serve->parsed()) return run_serve(sv, log);
    if (simulate->parsed()) return run_simulate(si, out, log);
    if (replay->parsed()) return run_replay(rp, out, log);
    if (report->parsed()) return run_report(rc, out, log);
    usage("no subcommand");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::UsageError) {
      err << "error: " << e.what() << "\nRun with --help for usage.\n";
      return kExitUsage;
    }
    if (log) {
      log->error("event=failed error=\"{}\"", e.what());
    } else {
      err << "error: " << e.what() << '\n';
    }
    return kExitDomainError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDomainError;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace cogload::cli
