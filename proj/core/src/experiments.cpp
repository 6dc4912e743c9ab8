#include "ecmirror/experiments.hpp"

#include <time.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <future>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "ecmirror/baselines.hpp"
#include "ecmirror/errors.hpp"

namespace ecmirror {

namespace {

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::string r2_text(const std::optional<double>& r2) {
  return r2 ? fmt("%.6f", *r2) : std::string("nan");
}

CompareRow score_row(const std::string& name, std::span<const TrainingSample> test,
                     const std::function<std::function<double(const Features&)>()>& fit) {
  CompareRow row;
  row.model = name;
  try {
    const auto predict = fit();
    const RegressionMetrics m = evaluate(test, predict);
    row.r2 = m.r2;
    row.rmse = m.rmse;
    if (!std::isfinite(m.rmse)) row.error = "non-finite predictions";
  } catch (const std::exception& e) {
    row.rmse = std::numeric_limits<double>::quiet_NaN();
    row.error = e.what();
  }
  return row;
}

}  // namespace

std::vector<CompareRow> run_compare(const Dataset& data, const StackOptions& options) {
  if (data.train.empty() || data.test.empty()) throw DomainError("compare: empty split");
  const FeatureScaler scaler = FeatureScaler::fit(data.train);
  const std::vector<TrainingSample> z = scaler.transform(data.train);

  std::vector<CompareRow> rows;
  rows.push_back(score_row("gbt", data.test, [&] {
    auto m = std::make_shared<GbtModel>(gbt_fit(z, options.gbt));
    return [m, scaler](const Features& x) { return gbt_predict(*m, scaler.transform(x)); };
  }));
  rows.push_back(score_row("mlp", data.test, [&] {
    auto m = std::make_shared<MlpModel>(mlp_fit(z, options.mlp));
    return [m, scaler](const Features& x) { return mlp_forward(*m, scaler.transform(x)); };
  }));
  rows.push_back(score_row("ridge_raw", data.test, [&] {
    auto m = std::make_shared<RawRidgeRegressor>(data.train);
    return [m](const Features& x) { return m->predict(x); };
  }));
  rows.push_back(score_row("stacking", data.test, [&] {
    auto m = std::make_shared<EnsembleModel>(stack_fit(data.train, options));
    return [m](const Features& x) { return m->predict(x); };
  }));
  rows.push_back(score_row("knn5", data.test, [&] {
    auto m = std::make_shared<KnnRegressor>(data.train, 5);
    return [m](const Features& x) { return m->predict(x); };
  }));
  rows.push_back(score_row("decision_tree", data.test, [&] {
    auto m = std::make_shared<DecisionTreeRegressor>(data.train);
    return [m](const Features& x) { return m->predict(x); };
  }));
  return rows;
}

void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "model,r2,rmse_v,error\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r2_text(r.r2) << ',' << fmt("%.6f", r.rmse) << ',' << r.error << '\n';
  }
}

void write_compare_summary(std::ostream& out, const std::vector<CompareRow>& rows) {
  out << "Held-out comparison (stand-in six-model set: gbt, mlp, ridge_raw, stacking, knn5, "
         "decision_tree)\n\n";
  char line[160];
  std::snprintf(line, sizeof line, "  %-15s %10s %10s\n", "model", "R2", "RMSE [V]");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "  %-15s %10s %10s  %s\n", r.model.c_str(),
                  r2_text(r.r2).c_str(), fmt("%.4f", r.rmse).c_str(), r.error.c_str());
    out << line;
  }
}

namespace {

FederateRound evaluate_global(const EnsembleModel& bootstrap, const GlobalModel& global,
                              const Dataset& data) {
  const EnsembleModel m = apply_params(bootstrap, global.params);
  FederateRound r;
  r.version = global.version;
  r.correction = std::string(to_string(global.correction));
  const RegressionMetrics tr = evaluate(m, data.train);
  const RegressionMetrics te = evaluate(m, data.test);
  r.train_r2 = tr.r2.value_or(std::numeric_limits<double>::quiet_NaN());
  r.test_r2 = te.r2.value_or(std::numeric_limits<double>::quiet_NaN());
  r.test_rmse = te.rmse;
  return r;
}

// Plays one shard row as an operator override: the sensors read the row's
// features and the driver dials the tap nearest to the row's label.
void play_override(EdgeNode& node, const TrainingSample& row, std::int64_t ts) {
  const double incident = row.features[0];
  const double ambient = adc_quantize(incident - row.features[1]);
  node.observe({incident, ambient, ts});
  node.manual_override(volts_to_tap(row.label));
}

}  // namespace

FederateResult run_federate(const Dataset& data, const FederateOptions& options) {
  if (options.nodes < 1) throw DomainError("federate: need at least one node");
  if (options.rounds < 1) throw DomainError("federate: need at least one round");
  if (options.bootstrap_samples < 4 || options.bootstrap_samples >= data.train.size()) {
    throw DomainError("federate: bootstrap sample count must be in [4, train size)");
  }
  options.federation.validate();

  // Seeded shuffle, then a bootstrap slice and disjoint round-robin shards.
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<TrainingSample> boot;
  for (std::size_t i = 0; i < options.bootstrap_samples; ++i) boot.push_back(data.train[order[i]]);
  std::vector<std::vector<TrainingSample>> shards(options.nodes);
  for (std::size_t i = options.bootstrap_samples, k = 0; i < order.size(); ++i, ++k) {
    shards[k % options.nodes].push_back(data.train[order[i]]);
  }

  const EnsembleModel initial = stack_fit(boot, options.stack);
  Federation fed(options.federation, extract_params(initial));

  std::vector<EdgeNode> nodes;
  nodes.reserve(options.nodes);
  for (std::size_t i = 0; i < options.nodes; ++i) {
    NodeConfig cfg = options.node;
    cfg.seed = options.node.seed + i;
    char id[32];
    std::snprintf(id, sizeof id, "node-%02zu", i + 1);
    nodes.emplace_back(id, initial, cfg);
    fed.register_node(id);
  }

  FederateResult result;
  result.baseline = evaluate_global(initial, *fed.current(), data);
  result.baseline.status = "bootstrap";

  for (std::size_t round = 1; round <= options.rounds; ++round) {
    const auto global = fed.current();
    auto work = [&](std::size_t i) -> std::optional<NodeUpdate> {
      EdgeNode& node = nodes[i];
      node.install(global->params);
      const auto& shard = shards[i];
      const std::size_t begin = shard.size() * (round - 1) / options.rounds;
      const std::size_t end = shard.size() * round / options.rounds;
      for (std::size_t k = begin; k < end; ++k) {
        play_override(node, shard[k], static_cast<std::int64_t>(round * 1000000 + k));
      }
      return node.local_train();
    };

    std::vector<std::optional<NodeUpdate>> produced(nodes.size());
    if (options.parallel && nodes.size() > 1) {
      std::vector<std::future<std::optional<NodeUpdate>>> jobs;
      for (std::size_t i = 0; i < nodes.size(); ++i) jobs.push_back(std::async(std::launch::async, work, i));
      for (std::size_t i = 0; i < nodes.size(); ++i) produced[i] = jobs[i].get();
    } else {
      for (std::size_t i = 0; i < nodes.size(); ++i) produced[i] = work(i);
    }

    std::vector<NodeUpdate> submitted;
    for (auto& u : produced) {
      if (!u) continue;
      fed.submit(*u);
      submitted.push_back(std::move(*u));
    }
    const RoundResult rr = fed.run_round(static_cast<std::int64_t>(round));
    FederateRound row = evaluate_global(initial, *rr.model, data);
    row.round = round;
    row.status = std::string(to_string(rr.status));
    row.participants = rr.participants;
    for (const auto& u : submitted) row.usage_total += u.usage_count;
    result.rounds.push_back(row);
    result.versions.push_back(rr.model);
    result.updates.push_back(std::move(submitted));
  }
  return result;
}

void write_federate_csv(std::ostream& out, const FederateResult& result) {
  out << "round,status,participants,version,usage_total,correction,train_r2,test_r2,test_rmse_v\n";
  char line[256];
  for (const auto& r : result.rounds) {
    std::snprintf(line, sizeof line, "%zu,%s,%zu,%llu,%llu,%s,%.6f,%.6f,%.6f\n", r.round,
                  r.status.c_str(), r.participants, static_cast<unsigned long long>(r.version),
                  static_cast<unsigned long long>(r.usage_total), r.correction.c_str(), r.train_r2,
                  r.test_r2, r.test_rmse);
    out << line;
  }
}

void write_federate_summary(std::ostream& out, const FederateResult& result) {
  char line[200];
  out << "Global model per federated round\n\n";
  std::snprintf(line, sizeof line, "  %5s %-18s %5s %7s %10s %10s %10s\n", "round", "status",
                "nodes", "version", "train R2", "test R2", "RMSE [V]");
  out << line;
  auto emit = [&](const FederateRound& r) {
    std::snprintf(line, sizeof line, "  %5zu %-18s %5zu %7llu %10.4f %10.4f %10.4f\n", r.round,
                  r.status.c_str(), r.participants, static_cast<unsigned long long>(r.version),
                  r.train_r2, r.test_r2, r.test_rmse);
    out << line;
  };
  emit(result.baseline);
  for (const auto& r : result.rounds) emit(r);
}

namespace {

double process_cpu_us() {
  timespec ts{};
  ::clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e6 + static_cast<double>(ts.tv_nsec) / 1e3;
}

std::uint64_t hash_params(const ParamVector& p) {
  std::uint64_t h = 1469598103934665603ull;
  for (double v : p.values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 1099511628211ull;
    }
  }
  return h;
}

}  // namespace

std::vector<BenchRow> run_bench_aggregation(const BenchOptions& options) {
  if (options.rounds_per_point < 1 || options.repeats < 1) {
    throw DomainError("bench: rounds and repeats must be positive");
  }
  options.federation.validate();
  std::vector<BenchRow> rows;
  for (std::size_t n : options.node_counts) {
    if (n < 1) throw DomainError("bench: node counts must be >= 1");
    std::mt19937_64 rng(options.seed * 1000003ull + n);
    std::normal_distribution<double> value(0.0, 0.5);
    std::uniform_int_distribution<int> usage(1, 20);
    std::uniform_int_distribution<int> stale(0, 3);
    std::uniform_real_distribution<double> err(0.05, 0.5);
    std::vector<NodeUpdate> updates(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto& u = updates[i];
      u.node_id = "n" + std::to_string(i);
      u.params.values.resize(options.param_dim);
      for (double& v : u.params.values) v = value(rng);
      u.usage_count = static_cast<std::uint64_t>(usage(rng));
      u.staleness = static_cast<std::uint64_t>(stale(rng));
      u.mean_error = err(rng);
    }

    BenchRow row;
    row.nodes = n;
    row.wall_us = std::numeric_limits<double>::infinity();
    row.cpu_us = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < options.repeats; ++rep) {
      ParamVector last;
      const double cpu0 = process_cpu_us();
      const auto t0 = std::chrono::steady_clock::now();
      for (std::size_t r = 0; r < options.rounds_per_point; ++r) {
        const ParamVector global = aggregate(updates, options.federation);
        last = error_correct(global, updates, options.federation).params;
      }
      const auto t1 = std::chrono::steady_clock::now();
      const double cpu1 = process_cpu_us();
      const double per = static_cast<double>(options.rounds_per_point);
      row.wall_us = std::min(row.wall_us,
                             std::chrono::duration<double, std::micro>(t1 - t0).count() / per);
      row.cpu_us = std::min(row.cpu_us, (cpu1 - cpu0) / per);
      row.checksum = hash_params(last);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "nodes,wall_us,cpu_us,checksum\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%zu,%.3f,%.3f,%016llx\n", r.nodes, r.wall_us, r.cpu_us,
                  static_cast<unsigned long long>(r.checksum));
    out << line;
  }
}

void write_bench_summary(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "Aggregation + correction time per round\n\n";
  char line[128];
  std::snprintf(line, sizeof line, "  %6s %12s %12s %8s\n", "nodes", "wall [us]", "cpu [us]",
                "x prev");
  out << line;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string ratio = i == 0 ? "-" : fmt("%.2f", rows[i].wall_us / rows[i - 1].wall_us);
    std::snprintf(line, sizeof line, "  %6zu %12.3f %12.3f %8s\n", rows[i].nodes, rows[i].wall_us,
                  rows[i].cpu_us, ratio.c_str());
    out << line;
  }
}

std::vector<GlareEvalRow> run_glare_eval(const EnsembleModel& model,
                                         const std::vector<GlareScenario>& scenarios,
                                         const GlareEvalOptions& options) {
  if (options.participants < 1) throw DomainError("glare-eval: need at least one participant");
  std::vector<GlareEvalRow> rows;
  for (const auto& sc : scenarios) {
    GlareEvalRow row;
    row.scenario = sc.id;
    row.name = sc.name;
    double before = 0.0;
    double after = 0.0;
    for (std::size_t p = 0; p < options.participants; ++p) {
      NodeConfig cfg = options.node;
      cfg.seed = options.seed + p;
      EdgeNode node("participant-" + std::to_string(p + 1), model, cfg);
      ScenarioRunOptions run;
      run.tick_s = options.tick_s;
      run.seed = options.seed * 1000003ull + static_cast<std::uint64_t>(sc.id) * 1009ull + p;
      for (const auto& t : run_scenario(node, sc, run)) {
        before += t.before.topsis_score;
        after += t.after.topsis_score;
        ++row.samples;
      }
    }
    if (row.samples > 0) {
      row.before_mean = before / static_cast<double>(row.samples);
      row.after_mean = after / static_cast<double>(row.samples);
    }
    row.before_rating = score_to_rating(row.before_mean).rating;
    row.after_rating = score_to_rating(row.after_mean).rating;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_glare_csv(std::ostream& out, const std::vector<GlareEvalRow>& rows) {
  out << "scenario,name,before_mean,after_mean,before_rating,after_rating,samples\n";
  char line[200];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%s,%.6f,%.6f,%d,%d,%zu\n", r.scenario, r.name.c_str(),
                  r.before_mean, r.after_mean, r.before_rating, r.after_rating, r.samples);
    out << line;
  }
}

void write_glare_summary(std::ostream& out, const std::vector<GlareEvalRow>& rows) {
  out << "Mean TOPSIS glare score before and after mirror activation\n\n";
  char line[200];
  std::snprintf(line, sizeof line, "  %3s %-20s %8s %6s %8s %6s\n", "#", "scenario", "before", "W",
                "after", "W");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "  %3d %-20s %8.4f %6d %8.4f %6d\n", r.scenario,
                  r.name.c_str(), r.before_mean, r.before_rating, r.after_mean, r.after_rating);
    out << line;
  }
}

}  // namespace ecmirror
