// ecmirror: data generation, training, experiment runs, and the cloud
// service / edge node launchers.

#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ecmirror/config_file.hpp"
#include "ecmirror/coordinator.hpp"
#include "ecmirror/dataset.hpp"
#include "ecmirror/errors.hpp"
#include "ecmirror/experiments.hpp"
#include "ecmirror/http_bridge.hpp"
#include "ecmirror/model_io.hpp"
#include "ecmirror/tcp.hpp"
#include "ecmirror/tuning.hpp"
#include "node_client.hpp"

namespace fs = std::filesystem;
using namespace ecmirror;

namespace {

struct Common {
  std::uint64_t seed = 1;
  fs::path out_dir = "out";
  fs::path config;
};

// Optional INI file; CLI flags given explicitly win over it.
//   [dataset]    samples, noise_sd, train_fraction, max_ambient_v
//   [federation] decay, correction, quorum
struct Settings {
  SyntheticDatasetSpec dataset;
  FederationConfig federation;
};

Settings load_settings(const Common& c) {
  Settings s;
  s.dataset.seed = c.seed;
  if (c.config.empty()) return s;
  const ConfigFile file = ConfigFile::load(c.config);
  for (const auto& e : file.entries()) {
    const std::string where = file.origin() + ":" + std::to_string(e.line);
    if (e.section == "dataset") {
      if (e.key == "samples") s.dataset.samples = static_cast<std::size_t>(parse_double(e.value, where));
      else if (e.key == "noise_sd") s.dataset.noise_sd = parse_double(e.value, where);
      else if (e.key == "train_fraction") s.dataset.train_fraction = parse_double(e.value, where);
      else if (e.key == "max_ambient_v") s.dataset.max_ambient_v = parse_double(e.value, where);
      else throw FormatError(where + ": unknown dataset key '" + e.key + "'");
    } else if (e.section == "federation") {
      if (e.key == "decay") s.federation.decay = parse_double(e.value, where);
      else if (e.key == "correction") s.federation.correction = parse_double(e.value, where);
      else if (e.key == "quorum") s.federation.quorum = static_cast<std::size_t>(parse_double(e.value, where));
      else throw FormatError(where + ": unknown federation key '" + e.key + "'");
    } else {
      throw FormatError(where + ": unknown section '" + e.section + "'");
    }
  }
  return s;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  body(out);
  if (!out) throw FormatError("failed writing " + path.string());
}

void emit(const fs::path& dir, const std::string& stem,
          const std::function<void(std::ostream&)>& csv,
          const std::function<void(std::ostream&)>& summary) {
  fs::create_directories(dir);
  write_file(dir / (stem + ".csv"), csv);
  write_file(dir / (stem + ".txt"), summary);
  summary(std::cout);
  std::cout << "\nwrote " << (dir / (stem + ".csv")).string() << " and "
            << (dir / (stem + ".txt")).string() << "\n";
}

// Dataset from --train/--test files when given, else generated.
Dataset resolve_dataset(const Settings& s, const fs::path& train, const fs::path& test) {
  if (train.empty() != test.empty()) throw DomainError("--train and --test go together");
  if (!train.empty()) return {read_samples_csv(train), read_samples_csv(test)};
  return generate_dataset(s.dataset);
}

EnsembleModel resolve_model(const Settings& s, const fs::path& model_path) {
  if (!model_path.empty()) return load_model(model_path);
  return stack_fit(generate_dataset(s.dataset).train, StackOptions{});
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) out.push_back(static_cast<int>(v));
  return out;
}

int run_serve(const Common& c, const Settings& s_in, const std::string& listen,
              const std::string& http, const fs::path& ui_dir, const fs::path& data_dir,
              const fs::path& model_path, int period_ms, double duration_s) {
  Settings s = s_in;
  if (period_ms <= 0) throw DomainError("--period-ms must be positive");

  // Block termination signals before any thread starts; sigwait below.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  ServiceConfig cfg;
  cfg.federation = s.federation;
  cfg.data_dir = data_dir;
  cfg.period = std::chrono::milliseconds(period_ms);
  Coordinator coordinator(resolve_model(s, model_path), cfg);

  const auto handler = [&](std::string_view payload) { return coordinator.handle_payload(payload); };
  const auto [host, port] = split_address(listen);
  TcpServer server(handler, host, port);
  std::optional<HttpBridge> bridge;
  if (!http.empty()) {
    const auto [hhost, hport] = split_address(http);
    HttpBridgeConfig hcfg;
    hcfg.host = hhost;
    hcfg.port = hport;
    hcfg.ui_dir = ui_dir;
    hcfg.refresh_ms = std::min(period_ms, 1000);
    bridge.emplace(handler, hcfg);
  }
  RoundScheduler scheduler(coordinator, cfg.period, [](const RoundResult& r) {
    if (r.status == RoundResult::Status::Published) {
      std::printf("round: published version %llu from %zu node(s)\n",
                  static_cast<unsigned long long>(r.model->version), r.participants);
      std::fflush(stdout);
    }
  });

  std::printf("listening on %s:%u\n", host.c_str(), static_cast<unsigned>(server.port()));
  if (bridge) std::printf("http bridge on port %u\n", static_cast<unsigned>(bridge->port()));
  std::printf("model version %llu, seed %llu\n",
              static_cast<unsigned long long>(coordinator.current()->version),
              static_cast<unsigned long long>(c.seed));
  std::fflush(stdout);

  if (duration_s > 0) {
    timespec ts{};
    ts.tv_sec = static_cast<time_t>(duration_s);
    ts.tv_nsec = static_cast<long>((duration_s - static_cast<double>(ts.tv_sec)) * 1e9);
    sigtimedwait(&signals, nullptr, &ts);
  } else {
    int sig = 0;
    sigwait(&signals, &sig);
  }
  scheduler.stop();
  server.stop();
  if (bridge) bridge->stop();
  std::printf("stopped at model version %llu\n",
              static_cast<unsigned long long>(coordinator.current()->version));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecmirror: electrochromic mirror glare control with cloud-edge federation"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Random seed")->capture_default_str();
  app.add_option("--out-dir", common.out_dir, "Directory for result files")->capture_default_str();
  app.add_option("--config", common.config, "INI file with [dataset] / [federation] settings")
      ->check(CLI::ExistingFile);

  std::optional<std::size_t> samples;
  std::optional<double> noise_sd, train_fraction, lambda, alpha;
  std::optional<std::size_t> quorum;
  auto dataset_flags = [&](CLI::App* cmd) {
    cmd->add_option("--samples", samples, "Synthetic sample count");
    cmd->add_option("--noise-sd", noise_sd, "Label noise sd [V]");
    cmd->add_option("--train-fraction", train_fraction, "Train split fraction");
  };
  auto federation_flags = [&](CLI::App* cmd) {
    cmd->add_option("--lambda", lambda, "Staleness decay in (0, 1]");
    cmd->add_option("--alpha", alpha, "Error-correction strength >= 0");
    cmd->add_option("--quorum", quorum, "Minimum updates per round");
  };
  auto settings = [&] {
    Settings s = load_settings(common);
    s.dataset.seed = common.seed;
    if (samples) s.dataset.samples = *samples;
    if (noise_sd) s.dataset.noise_sd = *noise_sd;
    if (train_fraction) s.dataset.train_fraction = *train_fraction;
    if (lambda) s.federation.decay = *lambda;
    if (alpha) s.federation.correction = *alpha;
    if (quorum) s.federation.quorum = *quorum;
    s.dataset.validate();
    s.federation.validate();
    return s;
  };

  fs::path train_csv, test_csv, model_path;

  auto* generate = app.add_subcommand("generate", "Write a synthetic train/test split");
  dataset_flags(generate);

  auto* train = app.add_subcommand("train", "Grid-search base learners and fit the stacking model");
  dataset_flags(train);
  int folds = 5;
  train->add_option("--train", train_csv, "Training CSV (default: generated)");
  train->add_option("--folds", folds, "Cross-validation folds")->capture_default_str();

  auto* compare = app.add_subcommand("compare", "Held-out R2/RMSE for six regressors");
  dataset_flags(compare);
  compare->add_option("--train", train_csv, "Training CSV");
  compare->add_option("--test", test_csv, "Test CSV");

  auto* federate = app.add_subcommand("federate", "Federated rounds over simulated nodes");
  dataset_flags(federate);
  federation_flags(federate);
  FederateOptions fed_opts;
  federate->add_option("--nodes", fed_opts.nodes, "Node count")->capture_default_str();
  federate->add_option("--rounds", fed_opts.rounds, "Round count")->capture_default_str();
  federate->add_option("--bootstrap-samples", fed_opts.bootstrap_samples,
                       "Training rows behind the initial model")->capture_default_str();
  bool sequential = false;
  federate->add_flag("--sequential", sequential, "Train nodes one at a time");

  auto* bench = app.add_subcommand("bench-aggregation", "Aggregation time by node count");
  federation_flags(bench);
  BenchOptions bench_opts;
  std::string counts = "2,4,8,16,32";
  bench->add_option("--counts", counts, "Comma-separated node counts")->capture_default_str();
  bench->add_option("--rounds", bench_opts.rounds_per_point, "Rounds per point")->capture_default_str();
  bench->add_option("--repeats", bench_opts.repeats, "Best-of batches")->capture_default_str();
  bench->add_option("--dim", bench_opts.param_dim, "Parameter vector length")->capture_default_str();

  auto* glare = app.add_subcommand("glare-eval", "Mean TOPSIS score before/after activation");
  dataset_flags(glare);
  GlareEvalOptions glare_opts;
  fs::path scenarios_path, calibration_path, logs_dir;
  glare->add_option("--participants", glare_opts.participants, "Simulated participants")
      ->capture_default_str();
  glare->add_option("--tick-s", glare_opts.tick_s, "Control tick [s]")->capture_default_str();
  glare->add_option("--model", model_path, "Model JSON (default: fit on generated data)");
  glare->add_option("--scenarios", scenarios_path, "Scenario INI (default: built-in six)");
  glare->add_option("--calibration", calibration_path, "TOPSIS calibration INI");
  glare->add_option("--run-logs", logs_dir, "Write per-tick logs of participant 1 here");

  auto* serve = app.add_subcommand("serve", "Run the cloud service");
  dataset_flags(serve);
  federation_flags(serve);
  std::string listen = "127.0.0.1:7700", http;
  fs::path ui_dir, data_dir;
  int period_ms = 10000;
  double duration_s = 0.0;
  serve->add_option("--listen", listen, "host:port for the framed protocol")->capture_default_str();
  serve->add_option("--http", http, "host:port for the browser bridge (off when empty)");
  serve->add_option("--ui-dir", ui_dir, "Static UI files served by the bridge");
  serve->add_option("--data-dir", data_dir, "Persistence directory (off when empty)");
  serve->add_option("--period-ms", period_ms, "Round period [ms]")->capture_default_str();
  serve->add_option("--model", model_path, "Bootstrap model JSON (default: fit on generated data)");
  serve->add_option("--duration-s", duration_s, "Stop after this long (0: until signalled)");

  auto* node = app.add_subcommand("node", "Run a simulated edge node against a server");
  tool::NodeRunOptions node_opts;
  std::string taps;
  node->add_option("--server", node_opts.server, "host:port")->capture_default_str();
  node->add_option("--id", node_opts.node_id, "Node id")->required();
  node->add_option("--scenario", node_opts.scenario, "Built-in scenario 1..6")->capture_default_str();
  node->add_option("--ticks", node_opts.ticks, "Control ticks (0: until signalled)")->capture_default_str();
  node->add_option("--tick-s", node_opts.tick_s, "Simulated seconds per tick")->capture_default_str();
  node->add_option("--tick-ms", node_opts.tick_ms, "Wall-clock pause per tick")->capture_default_str();
  node->add_option("--manual-taps", taps, "Comma-separated scripted override taps");
  node->add_option("--override-every", node_opts.override_every, "Ticks between scripted overrides")
      ->capture_default_str();
  node->add_option("--min-samples", node_opts.min_samples, "Buffered overrides before training")
      ->capture_default_str();
  node->add_flag("--wait-provenance", node_opts.wait_provenance,
                 "After the ticks, wait for a round that includes this node's upload");
  node->add_option("--timeout-s", node_opts.timeout_s, "Wait limit for --wait-provenance")
      ->capture_default_str();
  node->add_flag("-v,--verbose", node_opts.verbose, "Log pushes and installs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const Settings s = settings();
    if (generate->parsed()) {
      const Dataset d = generate_dataset(s.dataset);
      fs::create_directories(common.out_dir);
      write_samples_csv(common.out_dir / "train.csv", d.train);
      write_samples_csv(common.out_dir / "test.csv", d.test);
      std::printf("wrote %zu train and %zu test rows to %s\n", d.train.size(), d.test.size(),
                  common.out_dir.string().c_str());
    } else if (train->parsed()) {
      const std::vector<TrainingSample> rows =
          train_csv.empty() ? generate_dataset(s.dataset).train : read_samples_csv(train_csv);
      const TunedStack tuned = tune_stack(rows, GbtGrid{}, MlpGrid{}, folds, common.seed);
      const EnsembleModel model = stack_fit(rows, tuned.options);
      fs::create_directories(common.out_dir);
      save_model(model, common.out_dir / "model.json");
      auto cv_csv = [&](std::ostream& out) {
        out << "learner,config,cv_rmse_v,selected\n";
        for (std::size_t i = 0; i < tuned.gbt.table.size(); ++i) {
          out << "gbt,\"" << tuned.gbt.table[i].label << "\"," << tuned.gbt.table[i].cv_rmse << ','
              << (i == tuned.gbt.best_index) << '\n';
        }
        for (std::size_t i = 0; i < tuned.mlp.table.size(); ++i) {
          out << "mlp,\"" << tuned.mlp.table[i].label << "\"," << tuned.mlp.table[i].cv_rmse << ','
              << (i == tuned.mlp.best_index) << '\n';
        }
      };
      auto cv_summary = [&](std::ostream& out) {
        out << folds << "-fold grid search on " << rows.size() << " rows\n";
        out << "  gbt: " << describe(tuned.options.gbt) << "  (cv rmse "
            << tuned.gbt.table[tuned.gbt.best_index].cv_rmse << ")\n";
        out << "  mlp: " << describe(tuned.options.mlp) << "  (cv rmse "
            << tuned.mlp.table[tuned.mlp.best_index].cv_rmse << ")\n";
        out << "model: " << (common.out_dir / "model.json").string() << "\n";
      };
      emit(common.out_dir, "train_cv", cv_csv, cv_summary);
    } else if (compare->parsed()) {
      const Dataset d = resolve_dataset(s, train_csv, test_csv);
      const auto rows = run_compare(d, StackOptions{});
      emit(common.out_dir, "compare", [&](std::ostream& o) { write_compare_csv(o, rows); },
           [&](std::ostream& o) { write_compare_summary(o, rows); });
    } else if (federate->parsed()) {
      fed_opts.federation = s.federation;
      fed_opts.seed = common.seed;
      fed_opts.parallel = !sequential;
      const auto result = run_federate(generate_dataset(s.dataset), fed_opts);
      emit(common.out_dir, "federate", [&](std::ostream& o) { write_federate_csv(o, result); },
           [&](std::ostream& o) { write_federate_summary(o, result); });
    } else if (bench->parsed()) {
      bench_opts.federation = s.federation;
      bench_opts.seed = common.seed;
      bench_opts.node_counts.clear();
      for (int n : parse_int_list(counts, "--counts")) {
        if (n < 1) throw DomainError("--counts entries must be >= 1");
        bench_opts.node_counts.push_back(static_cast<std::size_t>(n));
      }
      const auto rows = run_bench_aggregation(bench_opts);
      emit(common.out_dir, "bench_aggregation", [&](std::ostream& o) { write_bench_csv(o, rows); },
           [&](std::ostream& o) { write_bench_summary(o, rows); });
    } else if (glare->parsed()) {
      const EnsembleModel model = resolve_model(s, model_path);
      const auto scenarios =
          scenarios_path.empty() ? canonical_scenarios() : load_scenarios(scenarios_path);
      glare_opts.seed = common.seed;
      if (!calibration_path.empty()) glare_opts.node.calibration = TopsisCalibration::load(calibration_path);
      const auto rows = run_glare_eval(model, scenarios, glare_opts);
      emit(common.out_dir, "glare_eval", [&](std::ostream& o) { write_glare_csv(o, rows); },
           [&](std::ostream& o) { write_glare_summary(o, rows); });
      if (!logs_dir.empty()) {
        fs::create_directories(logs_dir);
        for (const auto& sc : scenarios) {
          // Same node and noise seeds as participant 1 in the evaluation above.
          NodeConfig ncfg = glare_opts.node;
          ncfg.seed = glare_opts.seed;
          EdgeNode n("participant-1", model, ncfg);
          ScenarioRunOptions run;
          run.tick_s = glare_opts.tick_s;
          run.seed = glare_opts.seed * 1000003ull + static_cast<std::uint64_t>(sc.id) * 1009ull;
          const auto ticks = run_scenario(n, sc, run);
          write_file(logs_dir / ("scenario_" + std::to_string(sc.id) + ".csv"),
                     [&](std::ostream& o) { write_run_log(o, ticks); });
        }
      }
    } else if (serve->parsed()) {
      return run_serve(common, s, listen, http, ui_dir, data_dir, model_path, period_ms, duration_s);
    } else if (node->parsed()) {
      if (!taps.empty()) node_opts.manual_taps = parse_int_list(taps, "--manual-taps");
      node_opts.seed = common.seed;
      return tool::run_node(node_opts);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
