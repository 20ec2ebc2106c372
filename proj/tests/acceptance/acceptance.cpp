// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only 3,4` restricts the set.

#include "augment_props.hpp"
#include "controller_table.hpp"
#include "model_oracle.hpp"
#include "test_util.hpp"

#include "cogload/gaze_features.hpp"
#include "cogload/lopo.hpp"
#include "cogload/metrics.hpp"
#include "cogload/model_rater.hpp"
#include "cogload/physio_features.hpp"
#include "cogload/report.hpp"
#include "cogload/signal.hpp"
#include "cogload/simulator.hpp"
#include "cogload/windowing.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

extern char** environ;

using namespace cogload;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt2(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- subprocess helpers -----------------------------------------------------

std::string g_cli = COGLOAD_CLI_PATH;
fs::path g_work;

pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
  std::vector<char*> argv;
  argv.push_back(const_cast<char*>(g_cli.c_str()));
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  posix_spawn_file_actions_adddup2(&fa, STDOUT_FILENO, STDERR_FILENO);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, g_cli.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw std::runtime_error("cannot spawn " + g_cli);
  return pid;
}

int wait_exit(pid_t pid) {
  int status = 0;
  waitpid(pid, &status, 0);
  return WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
}

int run_cli(const std::vector<std::string>& args) { return wait_exit(spawn(args, g_work / "cli.log")); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::optional<int> wait_for_port(const fs::path& port_file, double timeout_s) {
  Stopwatch sw;
  while (sw.seconds() < timeout_s) {
    const std::string text = slurp(port_file);
    if (!text.empty() && text.back() == '\n') return std::stoi(text);
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  return std::nullopt;
}

// ---- shared end-to-end artefacts ---------------------------------------------

struct Artefacts {
  fs::path dataset, recording, model;
};

// Dataset and model from one simulated population, recording from another.
const Artefacts& artefacts() {
  static std::optional<Artefacts> a;
  if (a) return *a;
  Artefacts x{g_work / "train.jsonl", g_work / "session.rec.jsonl", g_work / "model.clm"};
  if (run_cli({"simulate", "--no-sessions", "--participants", "20", "--seed", "1001", "--dataset-out",
               x.dataset.string()}) != 0 ||
      run_cli({"simulate", "--no-sessions", "--participants", "1", "--seed", "5", "--levels", "8",
               "--record-out", x.recording.string()}) != 0 ||
      run_cli({"train", "--features", x.dataset.string(), "--out", x.model.string(), "--hidden", "32", "--epochs",
               "40", "--seed", "3"}) != 0) {
    throw std::runtime_error("artefact preparation failed; see " + (g_work / "cli.log").string());
  }
  a = x;
  return *a;
}

struct HubRun {
  int serve_exit = -1, replay_exit = -1;
  fs::path features, ratings, summary;
};

HubRun hub_run(const std::string& tag, const std::string& speed) {
  const auto& a = artefacts();
  HubRun r;
  r.features = g_work / (tag + ".features.jsonl");
  r.ratings = g_work / (tag + ".ratings.jsonl");
  r.summary = g_work / (tag + ".summary.json");
  const fs::path port_file = g_work / (tag + ".port");
  for (const auto& p : {r.features, r.ratings, r.summary, port_file}) fs::remove(p);
  const pid_t server = spawn({"serve", "--model", a.model.string(), "--port", "0", "--port-file", port_file.string(),
                              "--exit-after-session", "--features-out", r.features.string(), "--ratings-out",
                              r.ratings.string()},
                             g_work / (tag + ".serve.log"));
  const auto port = wait_for_port(port_file, 30.0);
  if (!port) {
    kill(server, SIGTERM);
    wait_exit(server);
    return r;
  }
  r.replay_exit = wait_exit(spawn({"replay", "--recording", a.recording.string(), "--port", std::to_string(*port),
                                   "--speed", speed, "--summary-out", r.summary.string()},
                                  g_work / (tag + ".replay.log")));
  r.serve_exit = wait_exit(server);
  return r;
}

const HubRun& realtime_run() {
  static std::optional<HubRun> r;
  if (!r) r = hub_run("realtime", "1");
  return *r;
}

// ---- criteria -----------------------------------------------------------------

Outcome pipeline_shape() {
  // 60 s physio at exactly 51 Hz: 15 s windows hold 765 samples each.
  PhysioSeries exact;
  for (int i = 0; i < 60 * 51; ++i) exact.push_back({i / 51.0, 0.0, 1.0});
  double worst = 0.0;
  for (int k = 0; k < 5; ++k) {
    const auto s = sim::generate_signals(sim::make_profile(k, 11), 0.0, 60.0, 100 + k);
    const auto windows = windowing::slice_level(s.gaze, exact, {0.0, 60.0});
    for (const auto& w : windows) {
      if (w.physio.size() != 765u) return {false, "window with " + std::to_string(w.physio.size()) + " physio samples"};
    }
    Stopwatch sw;
    const FeatureSequence seq = windowing::build_feature_sequence(s.gaze, s.physio, {0.0, 60.0});
    worst = std::max(worst, sw.seconds());
    if (seq.windows.size() != 4u || seq.windows[0].features.size() != 28u) return {false, "sequence is not 4x28"};
    for (const auto& w : seq.windows) {
      for (double v : w.features)
        if (!std::isfinite(v)) return {false, "non-finite feature"};
    }
  }
  return {worst < 1.0, "5 levels 4x28, 765 physio per window, slowest extraction " + fmt2(worst) + " s"};
}

Outcome gradients() {
  Stopwatch sw;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = oracle::random_instance(seed, seed % 2 == 1);
    const auto g = oracle::check_gradients(inst.params, inst.batch, inst.weights, inst.masks, inst.l2);
    worst = std::max(worst, g.max_relative_error);
  }
  const double t = sw.seconds();
  return {worst < 1e-4 && t < 30.0, "max relative error " + fmt2(worst * 1e6, 3) + "e-6 over 20 instances in " +
                                        fmt2(t, 1) + " s"};
}

double bilinear_butterworth(double f, double fc, double fs, int order) {
  const double ratio = std::tan(std::numbers::pi * f / fs) / std::tan(std::numbers::pi * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2 * order));
}

double sine_amplitude(const std::vector<double>& y, double f, double fs) {
  const std::size_t period = static_cast<std::size_t>(std::llround(fs / f));
  const std::size_t start = y.size() / 4, stop = start + (y.size() / 2 / period) * period;
  double s = 0.0, c = 0.0;
  for (std::size_t i = start; i < stop; ++i) {
    const double ph = 2.0 * std::numbers::pi * f * static_cast<double>(i) / fs;
    s += y[i] * std::sin(ph);
    c += y[i] * std::cos(ph);
  }
  return 2.0 * std::hypot(s, c) / static_cast<double>(stop - start);
}

Outcome signal_oracles() {
  Stopwatch sw;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  double sg = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(200 + trial * 7);
    for (double& v : x) v = nd(rng) + 0.01 * static_cast<double>(&v - x.data());
    const auto got = signal::savgol_smooth(x, 11, 2);
    const auto want = testutil::savgol_oracle(x, 11, 2);
    for (std::size_t i = 0; i < x.size(); ++i) sg = std::max(sg, std::fabs(got[i] - want[i]));
  }

  std::uniform_real_distribution<double> rr_dist(600.0, 1100.0);
  double hrv = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> rr(40 + trial);
    for (double& v : rr) v = rr_dist(rng);
    const double n = static_cast<double>(rr.size());
    double mean = 0.0, var = 0.0, sq = 0.0, over = 0.0;
    for (double v : rr) mean += v / n;
    for (double v : rr) var += (v - mean) * (v - mean) / n;
    for (std::size_t i = 1; i < rr.size(); ++i) {
      const double d = rr[i] - rr[i - 1];
      sq += d * d;
      over += std::fabs(d) > 50.0;
    }
    const auto m = physio::compute_hrv(rr);
    hrv = std::max({hrv, std::fabs(m.bpm - 60000.0 / mean), std::fabs(m.sdnn - std::sqrt(var)),
                    std::fabs(m.rmssd - std::sqrt(sq / (n - 1.0))), std::fabs(m.pnn50 - 100.0 * over / (n - 1.0))});
  }

  const double fs = 51.0;
  const signal::ButterworthLowpass lp(2, 3.0, fs);
  double bw = 0.0;
  for (double f : {0.5, 10.0}) {
    std::vector<double> x(51 * 80);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
    bw = std::max(bw, std::fabs(sine_amplitude(lp.filter(x), f, fs) / bilinear_butterworth(f, 3.0, fs, 2) - 1.0));
  }

  std::normal_distribution<double> fix(10.0, 5.0), sac(300.0, 5.0);
  std::bernoulli_distribution stay_fix(0.95), stay_sac(0.80);
  gaze::KinematicsSeries k;
  k.sampling_rate = 90.0;
  std::vector<int> truth;
  int state = 0;
  for (int i = 0; i < 3000; ++i) {
    k.velocity.push_back(state == 0 ? fix(rng) : sac(rng));
    truth.push_back(state);
    state = state == 0 ? (stay_fix(rng) ? 0 : 1) : (stay_sac(rng) ? 1 : 0);
  }
  k.dx.assign(k.velocity.size(), 0.0);
  k.dy.assign(k.velocity.size(), 0.0);
  for (std::size_t i = 0; i + 1 < k.velocity.size(); ++i) k.acceleration.push_back((k.velocity[i + 1] - k.velocity[i]) * 90.0);
  const auto seg = gaze::segment_movements(k);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) agree += seg.state_per_sample[i] == truth[i];
  const double hmm = static_cast<double>(agree) / static_cast<double>(truth.size());

  const double t = sw.seconds();
  const bool ok = sg < 1e-9 && hrv < 1e-9 && bw < 0.02 && hmm >= 0.95 && t < 60.0;
  return {ok, "savgol " + fmt2(sg * 1e12, 2) + "e-12, hrv " + fmt2(hrv * 1e12, 2) + "e-12, butterworth ratio off by " +
                  fmt2(100.0 * bw, 2) + "%, hmm agreement " + fmt2(hmm) + ", " + fmt2(t, 2) + " s"};
}

Outcome controller_table() {
  std::size_t rows = 0;
  for (const auto& row : table::trajectories()) {
    table::ScriptedExecutor exec;
    table::ScriptedRater rater(row.ratings);
    control::SessionConfig cfg;
    cfg.participant_id = "T";
    const auto log = control::run_session(cfg, exec, rater);
    if (log.levels.size() != 8u) return {false, std::string(row.ratings) + ": " + std::to_string(log.levels.size()) + " levels"};
    for (std::size_t i = 0; i < 8; ++i) {
      const int want = static_cast<int>(std::lround(row.delays[i] * 10.0));
      if (log.levels[i].delay_tenths != want)
        return {false, std::string(row.ratings) + " level " + std::to_string(i) + ": " + std::to_string(log.levels[i].delay_tenths) +
                           " tenths, want " + std::to_string(want)};
    }
    ++rows;
  }
  table::ScriptedExecutor exec;
  table::ScriptedRater rater("J");
  const auto log = control::run_session(control::SessionConfig{}, exec, rater);
  const bool ok = log.final_delay_tenths() == 19;
  return {ok, std::to_string(rows) + " trajectories exact, all-JustRight final " + fmt2(log.final_difficulty(), 1)};
}

model::LopoResult lopo(double noise) {
  sim::PopulationConfig pop;
  pop.noise_scale = noise;
  pop.gap_spread *= noise;
  std::vector<sim::SimProfile> ps;
  for (int i = 0; i < 20; ++i) ps.push_back(sim::make_profile(i, 7, pop));
  model::LopoConfig cfg;
  cfg.training.model.hidden = 32;
  cfg.training.model.head_hidden = 32;
  cfg.training.max_epochs = 40;
  return model::lopo_cross_validate(sim::generate_dataset(ps, 4, 7), cfg);
}

Outcome lopo_training() {
  Stopwatch sw;
  auto clean = lopo(1.0);
  auto noisy = lopo(5.0);
  const double acc = clean.aggregate["Accuracy"].mean, auc = clean.aggregate["AUC-ROC"].mean;
  const double noisy_acc = noisy.aggregate["Accuracy"].mean;
  const double t = sw.seconds();
  return {acc >= 0.90 && auc >= 0.95 && noisy_acc < 0.70 && t < 600.0,
          "separated acc " + fmt2(acc) + " auc " + fmt2(auc) + ", noise x5 acc " + fmt2(noisy_acc) + ", " +
              fmt2(t, 1) + " s"};
}

Outcome closed_loop() {
  Stopwatch sw;
  std::vector<sim::SimProfile> train;
  for (int i = 0; i < 30; ++i) train.push_back(sim::make_profile(i, 1001));
  model::TrainingConfig tc;
  tc.model.hidden = 32;
  tc.model.head_hidden = 32;
  tc.max_epochs = 40;
  const model::ModelBundle bundle = model::fit_bundle(sim::generate_dataset(train, 6, 1001), tc);

  int close = 0, harder = 0;
  const int n = 50;
  for (int i = 0; i < n; ++i) {
    const sim::SimProfile p = sim::make_profile(i, 2002);
    auto final_delay = [&](control::TaskType task, control::Rater& rater, bool model_signals) {
      sim::SimulatedExecutor ex(p, task, p.seed, model_signals);
      control::SessionConfig c;
      c.participant_id = p.id;
      c.task = task;
      c.seed = p.seed;
      return control::run_session(c, ex, rater).final_difficulty();
    };
    model::ModelRater m(bundle);
    sim::PolicyRater oracle(sim::RatingPolicy::oracle_weighted(), control::RatingSource::Oracle);
    sim::PolicyRater biased(sim::RatingPolicy::biased_raw(), control::RatingSource::Self);
    close += std::fabs(final_delay(control::TaskType::Single, m, true) -
                       final_delay(control::TaskType::Single, oracle, false)) <= 0.3 + 1e-9;
    // Smaller delay is harder.
    harder += final_delay(control::TaskType::Dual, m, true) <= final_delay(control::TaskType::Dual, biased, false) + 1e-9;
  }
  const double p1 = close / static_cast<double>(n), p2 = harder / static_cast<double>(n);
  const double t = sw.seconds();
  return {p1 >= 0.80 && p2 >= 0.70 && t < 300.0, "single within 0.3 s: " + fmt2(p1, 2) +
                                                    ", dual model at least as hard as biased self: " + fmt2(p2, 2) +
                                                    ", " + fmt2(t, 1) + " s"};
}

Outcome latency() {
  const HubRun& r = realtime_run();
  if (r.serve_exit != 0 || r.replay_exit != 0)
    return {false, "serve exit " + std::to_string(r.serve_exit) + ", replay exit " + std::to_string(r.replay_exit)};
  const json s = json::parse(slurp(r.summary));
  const auto& lat = s.at("client_latency_ms");
  double worst = 0.0;
  for (const auto& [level, ms] : lat.items()) worst = std::max(worst, ms.get<double>());
  std::size_t ratings = 0;
  std::ifstream in(r.ratings);
  for (std::string line; std::getline(in, line);) ratings += json::parse(line).contains("label");
  const bool ok = lat.size() == 8u && ratings == 8u && worst < 500.0;
  return {ok, std::to_string(ratings) + " of 8 levels rated at real-time pace, worst end-to-end " + fmt2(worst, 1) +
                  " ms, wall " + fmt2(s.at("wall_seconds").get<double>(), 1) + " s"};
}

Outcome metrics_fidelity() {
  using eval::classification_report;
  constexpr LoadLabel E = LoadLabel::TooEasy, J = LoadLabel::JustRight, D = LoadLabel::TooDifficult;
  std::vector<eval::Probabilities> probs;
  std::vector<LoadLabel> labels;
  auto add = [&](LoadLabel t, LoadLabel p) {
    eval::Probabilities v;
    v.fill(0.2);
    v[static_cast<std::size_t>(to_int(p))] = 0.6;
    probs.push_back(v);
    labels.push_back(t);
  };
  for (auto [t, p] : std::vector<std::pair<LoadLabel, LoadLabel>>{
           {E, E}, {E, E}, {E, J}, {E, E}, {J, J}, {J, J}, {J, E}, {J, J}, {D, D}, {D, D}, {D, J}, {D, D}})
    add(t, p);
  const auto r = classification_report(probs, labels);
  const eval::ConfusionMatrix cm{{{3, 1, 0}, {1, 3, 0}, {0, 1, 3}}};
  const bool fixture = r.confusion == cm && r.accuracy == 0.75 && r.precision[0] == 0.75 && r.precision[1] == 0.6 &&
                       r.precision[2] == 1.0 && r.recall[0] == 0.75 && r.recall[1] == 0.75 && r.recall[2] == 0.75 &&
                       std::fabs(r.f1[1] - 2.0 / 3.0) < 1e-15 && std::fabs(r.f1[2] - 6.0 / 7.0) < 1e-15;

  eval::MetricTable table = eval::metric_table({"P1", "P2"}, std::vector<eval::ClassificationReport>{r, r});
  std::ostringstream csv;
  eval::write_metric_table_csv(csv, table);
  const std::string want_head = "Metric,Mean,Std,Min,Max\n";
  std::istringstream lines(csv.str());
  std::vector<std::string> first;
  for (std::string line; std::getline(lines, line);) first.push_back(line.substr(0, line.find(',')));
  const bool table_ok = csv.str().rfind(want_head, 0) == 0 &&
                        first == std::vector<std::string>{"Metric", "Accuracy", "F1", "Precision", "Recall", "AUC-ROC",
                                                          "AUPRC"};

  probs.clear();
  labels.clear();
  for (int i = 0; i < 6; ++i) add(E, E);
  for (int i = 0; i < 6; ++i) add(J, J);
  for (int i = 0; i < 5; ++i) add(D, D);
  add(E, D);
  add(D, E);
  add(J, E);
  const double severe = classification_report(probs, labels).severe_misclassification_rate;
  return {fixture && table_ok && severe == 0.10, std::string("12-item fixture ") + (fixture ? "exact" : "MISMATCH") +
                                                     ", six-metric table " + (table_ok ? "ok" : "MISMATCH") +
                                                     ", severe rate " + fmt2(severe, 2)};
}

Outcome determinism() {
  std::vector<std::string> failed;
  const std::vector<std::string> sim_args{"simulate", "--participants", "20", "--condition", "model/dual", "--seed", "7"};
  auto sim_run = [&](const std::string& tag) {
    auto args = sim_args;
    const fs::path out = g_work / ("sim_" + tag + ".jsonl");
    args.insert(args.end(), {"--out", out.string()});
    return run_cli(args) == 0 ? slurp(out) : std::string();
  };
  const std::string s1 = sim_run("a"), s2 = sim_run("b");
  if (s1.empty() || s1 != s2) failed.push_back("simulate");

  const auto& a = artefacts();
  const fs::path again = g_work / "model_again.clm";
  if (run_cli({"train", "--features", a.dataset.string(), "--out", again.string(), "--hidden", "32", "--epochs", "40",
               "--seed", "3"}) != 0 ||
      slurp(again) != slurp(a.model))
    failed.push_back("train");

  const HubRun& slow = realtime_run();
  const HubRun fast1 = hub_run("fast1", "0"), fast2 = hub_run("fast2", "0");
  const std::string feats = slurp(slow.features), ratings = slurp(slow.ratings);
  if (feats.empty() || ratings.empty() || slurp(fast1.features) != feats || slurp(fast2.features) != feats ||
      slurp(fast1.ratings) != ratings || slurp(fast2.ratings) != ratings)
    failed.push_back("replay");

  std::string detail = "simulate, train and fast vs real-time replay outputs";
  if (failed.empty()) return {true, detail + " byte-identical"};
  for (const auto& f : failed) detail += " [" + f + " differs]";
  return {false, detail};
}

Outcome augmentation() {
  props::AugmentStats stats;
  std::size_t failures = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::string why = props::check_case(seed, stats);
    if (!why.empty() && failures++ == 0) first = "seed " + std::to_string(seed) + ": " + why;
  }
  const double mean_abs = stats.abs_perturbation_sum / static_cast<double>(stats.perturbations);
  const bool ok = failures == 0 && stats.cases == 1000u && std::fabs(mean_abs - 0.05 * std::sqrt(2.0 / std::numbers::pi)) < 5e-4;
  return {ok, std::to_string(stats.cases - failures) + "/1000 cases hold, mean |jitter| " + fmt2(mean_abs, 4) +
                  (first.empty() ? "" : ", " + first)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) {
      std::stringstream s(argv[++i]);
      for (std::string tok; std::getline(s, tok, ',');) only.insert(std::stoi(tok));
    } else if (a == "--cli" && i + 1 < argc) {
      g_cli = argv[++i];
    } else {
      std::cerr << "usage: cogload_acceptance [--only 1,2,...] [--cli path]\n";
      return 2;
    }
  }
  g_work = fs::temp_directory_path() / ("cogload_acceptance_" + std::to_string(getpid()));
  fs::create_directories(g_work);
  setenv("COGLOAD_LOG_LEVEL", "warn", 0);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, pipeline_shape}, {2, gradients},   {3, signal_oracles}, {4, controller_table}, {5, lopo_training},
      {6, closed_loop},    {7, latency},     {8, metrics_fidelity}, {9, determinism},    {10, augmentation}};
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
  }
  if (failures == 0) fs::remove_all(g_work);
  else std::cout << "artefacts kept in " << g_work.string() << std::endl;
  return failures == 0 ? 0 : 1;
}
