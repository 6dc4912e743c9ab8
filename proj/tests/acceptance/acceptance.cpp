// Acceptance run: one PASS/FAIL line per criterion at pinned tolerances.
//
//   ecmirror_acceptance [--only name,...] [--known-red name,...] [--skip-e2e]
//
// Exit status is 0 when the failing set equals the declared known-red set.

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ecmirror/coordinator.hpp"
#include "ecmirror/dataset.hpp"
#include "ecmirror/edge.hpp"
#include "ecmirror/experiments.hpp"
#include "ecmirror/federation.hpp"
#include "ecmirror/glare.hpp"
#include "ecmirror/protocol.hpp"
#include "ecmirror/tcp.hpp"

extern char** environ;

using namespace ecmirror;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string measured;
  std::string tolerance;
  std::vector<std::string> notes;  // printed indented under the line
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path scratch_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("ecmirror_accept_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

const Dataset& default_dataset() {
  static const Dataset d = generate_dataset(SyntheticDatasetSpec{});
  return d;
}

// 1. Weighted mean against a long-double transcription, input order.
Outcome aggregate_oracle() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> val(-10.0, 10.0);
  const FederationConfig cfg;
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    const std::size_t nodes = 1 + rng() % 10;
    const std::size_t dim = 1 + rng() % 1000;
    std::vector<NodeUpdate> ups(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      ups[i].node_id = "n" + std::to_string(rng() % 1000) + "_" + std::to_string(i);
      ups[i].params.schema = 1;
      ups[i].params.values.resize(dim);
      for (auto& v : ups[i].params.values) v = val(rng);
      ups[i].usage_count = 1 + rng() % 100;
      ups[i].staleness = rng() % 8;
    }
    const ParamVector got = aggregate(ups, cfg);
    long double denom = 0;
    for (const auto& u : ups) denom += std::pow(0.9L, (long double)u.staleness) * u.usage_count;
    for (std::size_t j = 0; j < dim; ++j) {
      long double num = 0;
      for (const auto& u : ups) {
        num += std::pow(0.9L, (long double)u.staleness) * u.usage_count * u.params.values[j];
      }
      worst = std::max(worst, std::abs(got.values[j] - static_cast<double>(num / denom)));
    }
  }
  return {worst < 1e-12, "max|diff|=" + fmt("%.3g", worst), "< 1e-12 over 100 sets", {}};
}

// 2.
Outcome aggregate_hand() {
  std::vector<NodeUpdate> ups{{"a", {1, {1.0}}, 2, 0, 0.0}, {"b", {1, {0.0}}, 1, 1, 0.0}};
  const double got = aggregate(ups, FederationConfig{}).values[0];
  return {std::abs(got - 0.68966) <= 1e-5, fmt("%.8f", got), "0.68966 +- 1e-5", {}};
}

// 3.
Outcome correction_hand() {
  std::vector<NodeUpdate> ups{{"a", {1, {0.2}}, 1, 0, 1.0}, {"b", {1, {0.6}}, 1, 0, 3.0}};
  const ParamVector global{1, {0.5}};
  FederationConfig cfg;
  cfg.correction = 0.1;
  const double got = error_correct(global, ups, cfg).params.values[0];
  cfg.correction = 0.0;
  const bool identity = error_correct(global, ups, cfg).params == global;
  return {std::abs(got - 0.55) <= 1e-12 && identity,
          fmt("%.15f", got) + (identity ? ", alpha=0 identity" : ", alpha=0 NOT identity"),
          "0.55 +- 1e-12; exact identity at alpha=0", {}};
}

// 4. Relative error ||g - fd|| / (||g|| + ||fd||) over every parameter.
Outcome mlp_gradient() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> feat(-2.0, 2.0), lab(1.49, 3.79), alpha(0.0, 0.1);
  const double eps = 1e-6;
  double worst = 0.0;
  const int configs = 24;
  for (int k = 0; k < configs; ++k) {
    const Activation act = k % 2 == 0 ? Activation::Tanh : Activation::Logistic;
    MlpModel m = mlp_init(2, 100, act, alpha(rng), rng());
    std::vector<TrainingSample> data(5 + rng() % 20);
    for (auto& r : data) r = {{feat(rng), feat(rng)}, lab(rng)};
    MlpGradient g;
    mlp_objective(m, data, &g);

    std::vector<double*> params;
    std::vector<double> analytic;
    for (Eigen::Index i = 0; i < m.w1.size(); ++i) {
      params.push_back(m.w1.data() + i);
      analytic.push_back(g.w1.data()[i]);
    }
    for (Eigen::Index i = 0; i < m.b1.size(); ++i) {
      params.push_back(m.b1.data() + i);
      analytic.push_back(g.b1[i]);
    }
    for (Eigen::Index i = 0; i < m.w2.size(); ++i) {
      params.push_back(m.w2.data() + i);
      analytic.push_back(g.w2[i]);
    }
    params.push_back(&m.b2);
    analytic.push_back(g.b2);

    double diff2 = 0, ga2 = 0, gf2 = 0;
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double saved = *params[p];
      *params[p] = saved + eps;
      const double up = mlp_objective(m, data);
      *params[p] = saved - eps;
      const double down = mlp_objective(m, data);
      *params[p] = saved;
      const double fd = (up - down) / (2 * eps);
      diff2 += (fd - analytic[p]) * (fd - analytic[p]);
      ga2 += analytic[p] * analytic[p];
      gf2 += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff2) / (std::sqrt(ga2) + std::sqrt(gf2)));
  }
  return {worst < 1e-5, "max rel=" + fmt("%.3g", worst) + " over " + std::to_string(configs) + " nets",
          "< 1e-5", {}};
}

// 5.
Outcome gbt_monotone() {
  GbtHyperparams hp;
  hp.gamma = 0.0;
  hp.n_estimators = 50;
  const auto& train = default_dataset().train;
  const GbtModel full = gbt_fit(train, hp);
  GbtModel prefix = full;
  double prev = std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  double last = 0.0;
  for (std::size_t k = 0; k <= full.trees.size(); ++k) {
    prefix.trees.assign(full.trees.begin(), full.trees.begin() + static_cast<std::ptrdiff_t>(k));
    double mse = 0.0;
    for (const auto& r : train) mse += std::pow(gbt_predict(prefix, r.features) - r.label, 2);
    mse /= static_cast<double>(train.size());
    if (mse > prev) ++violations;
    prev = last = mse;
  }

  GbtHyperparams one;
  one.n_estimators = 1;
  one.max_depth = 0;
  one.lambda = 1.0;
  one.learning_rate = 0.1;
  one.base_score = 0.0;
  const std::vector<TrainingSample> hand{{{0.0, 0.0}, 2.0}, {{1.0, 0.0}, 2.0}};
  const GbtModel h = gbt_fit(hand, one);
  const double w = h.trees.at(0).nodes.at(0).weight;
  const bool exact = w == 4.0 / 3.0 && gbt_predict(h, {0.5, 0.0}) == 0.1 * (4.0 / 3.0);
  return {violations == 0 && exact && full.trees.size() == 50,
          std::to_string(violations) + " increases over 50 trees (final mse " + fmt("%.5f", last) +
              "), w=" + fmt("%.17g", w),
          "0 increases; w == 4/3 exactly", {}};
}

// 6. Cyclic coordinate descent on |y - Xb - c|^2 + alpha |b|^2.
Outcome ridge_oracle() {
  std::mt19937_64 rng(66);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> alpha_dist(0.05, 5.0);
  double worst = 0.0;
  for (int prob = 0; prob < 50; ++prob) {
    const int rows = 10 + static_cast<int>(rng() % 190);
    const int cols = 1 + static_cast<int>(rng() % 6);
    const double alpha = alpha_dist(rng);
    Eigen::MatrixXd x(rows, cols);
    Eigen::VectorXd y(rows);
    for (int i = 0; i < rows; ++i) {
      y(i) = n01(rng);
      for (int j = 0; j < cols; ++j) {
        x(i, j) = n01(rng) * (1 + j) + 0.5;
        y(i) += (j % 2 ? -0.7 : 1.3) * x(i, j);
      }
    }
    const RidgeMeta fit = ridge_fit(x, y, alpha);

    std::vector<double> b(static_cast<std::size_t>(cols), 0.0);
    double c = 0.0;
    std::vector<double> resid(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) resid[static_cast<std::size_t>(i)] = y(i);
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      double shift = 0.0;
      for (double r : resid) shift += r;
      shift /= rows;
      c += shift;
      for (auto& r : resid) r -= shift;
      change = std::max(change, std::abs(shift));
      for (int j = 0; j < cols; ++j) {
        double num = 0.0, den = alpha;
        const double bj = b[static_cast<std::size_t>(j)];
        for (int i = 0; i < rows; ++i) {
          num += x(i, j) * (resid[static_cast<std::size_t>(i)] + bj * x(i, j));
          den += x(i, j) * x(i, j);
        }
        const double nb = num / den;
        for (int i = 0; i < rows; ++i) resid[static_cast<std::size_t>(i)] -= (nb - bj) * x(i, j);
        b[static_cast<std::size_t>(j)] = nb;
        change = std::max(change, std::abs(nb - bj));
      }
      if (change < 1e-15) break;
    }
    for (int j = 0; j < cols; ++j) {
      worst = std::max(worst, std::abs(fit.coef[static_cast<std::size_t>(j)] - b[static_cast<std::size_t>(j)]));
    }
    worst = std::max(worst, std::abs(fit.intercept - c));
  }
  return {worst < 1e-6, "max|diff|=" + fmt("%.3g", worst), "< 1e-6 over 50 problems", {}};
}

// 7. Each score must fall in exactly one rating interval.
Outcome rating_partition() {
  // Rating r owns (edges[r], edges[r-1]]: the larger endpoint is included.
  const double edges[] = {1.0, 0.7671, 0.6576, 0.5207, 0.3015, 0.2192, 0.1644, 0.0548, 0.0};
  auto owners = [&](double s) {
    std::vector<int> out;
    for (int r = 1; r <= 8; ++r) {
      if (s > edges[r] && s <= edges[r - 1]) out.push_back(r);
    }
    if (s == 0.0) out.push_back(9);
    return out;
  };
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t bad = 0;
  for (int i = 0; i < 1000000; ++i) {
    const double s = u(rng);
    const auto o = owners(s);
    if (o.size() != 1 || score_to_rating(s).rating != o[0]) ++bad;
  }
  std::size_t bad_edges = 0;
  for (int k = 1; k <= 7; ++k) {
    if (score_to_rating(edges[k]).rating != k + 1) ++bad_edges;
  }
  if (score_to_rating(1.0).rating != 1) ++bad_edges;
  if (score_to_rating(0.0).rating != 9) ++bad_edges;
  return {bad == 0 && bad_edges == 0,
          std::to_string(bad) + " misassigned of 1e6, " + std::to_string(bad_edges) + " bad edges",
          "0 and 0", {}};
}

// 8.
Outcome stacking_accuracy() {
  const auto rows = run_compare(default_dataset(), StackOptions{});
  double stack_rmse = 0, stack_r2 = 0, best_base = std::numeric_limits<double>::infinity();
  std::vector<std::string> notes;
  for (const auto& r : rows) {
    notes.push_back(r.model + ": rmse " + fmt("%.4f", r.rmse) +
                    (r.r2 ? ", r2 " + fmt("%.4f", *r.r2) : std::string()) +
                    (r.error.empty() ? std::string() : " (" + r.error + ")"));
    if (r.model == "stacking") {
      stack_rmse = r.rmse;
      stack_r2 = r.r2.value_or(0.0);
    }
    if (r.model == "gbt" || r.model == "mlp") best_base = std::min(best_base, r.rmse);
  }
  return {stack_rmse <= best_base + 0.02 && stack_r2 >= 0.90,
          "stack rmse " + fmt("%.4f", stack_rmse) + " vs min(gbt,mlp) " + fmt("%.4f", best_base) +
              ", r2 " + fmt("%.4f", stack_r2),
          "rmse <= base+0.02 V, r2 >= 0.90", notes};
}

struct FederateStats {
  double r0 = 0, r10 = 0;
  int ok_deltas = 0;
  std::vector<double> series;
};

FederateStats federate_stats(const FederationConfig& fc) {
  FederateOptions o;
  o.federation = fc;
  const FederateResult res = run_federate(default_dataset(), o);
  FederateStats s;
  s.r0 = res.baseline.test_r2;
  s.series.push_back(s.r0);
  double prev = s.r0;
  for (const auto& r : res.rounds) {
    s.series.push_back(r.test_r2);
    if (r.test_r2 - prev >= -0.01) ++s.ok_deltas;
    prev = r.test_r2;
  }
  s.r10 = prev;
  return s;
}

std::string series_text(const std::vector<double>& v) {
  std::string out;
  for (double x : v) out += (out.empty() ? "" : " ") + fmt("%.4f", x);
  return out;
}

// 9.
Outcome federated_r2() {
  const FederateStats def = federate_stats(FederationConfig{});
  FederationConfig off;
  off.correction = 0.0;
  const FederateStats diag = federate_stats(off);
  Outcome o;
  o.pass = def.r10 >= def.r0 && def.ok_deltas >= 7;
  o.measured = "r2 " + fmt("%.4f", def.r0) + " -> " + fmt("%.4f", def.r10) + ", " +
               std::to_string(def.ok_deltas) + "/10 deltas >= -0.01";
  o.tolerance = "final >= initial, >= 7/10 deltas";
  o.notes.push_back("lambda 0.9, alpha 0.1: " + series_text(def.series));
  o.notes.push_back("diagnostic, alpha 0: " + series_text(diag.series) + " (" +
                    std::to_string(diag.ok_deltas) + "/10 deltas ok)");
  return o;
}

// 10.
Outcome aggregation_scaling() {
  const auto rows = run_bench_aggregation(BenchOptions{});
  double worst = 0.0;
  std::vector<std::string> notes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    notes.push_back(std::to_string(rows[i].nodes) + " nodes: " + fmt("%.2f", rows[i].wall_us) + " us");
    if (i > 0) worst = std::max(worst, rows[i].wall_us / rows[i - 1].wall_us);
  }
  return {worst <= 3.0, "max t(2N)/t(N)=" + fmt("%.3f", worst), "<= 3", notes};
}

// 11.
Outcome glare_reduction() {
  const EnsembleModel model = stack_fit(default_dataset().train, StackOptions{});
  const auto rows = run_glare_eval(model, canonical_scenarios(), GlareEvalOptions{});
  bool ok = rows.size() == 6;
  int strict = 0;
  std::vector<std::string> notes;
  for (const auto& r : rows) {
    notes.push_back(std::to_string(r.scenario) + " " + r.name + ": " + fmt("%.4f", r.before_mean) +
                    " -> " + fmt("%.4f", r.after_mean) + " (rating " + std::to_string(r.before_rating) +
                    " -> " + std::to_string(r.after_rating) + ")");
    if (r.after_mean > r.before_mean) ok = false;
    if (r.before_rating < kAcceptableRating) {
      ++strict;
      if (!(r.after_mean < r.before_mean)) ok = false;
    }
  }
  return {ok, std::to_string(rows.size()) + " scenarios, " + std::to_string(strict) + " needing strict drop",
          "after <= before; strict below rating 7", notes};
}

// 12.
Outcome device() {
  ECDeviceState s = apply_command(make_device(), VoltageCommand::from_tap(kMaxTap));
  const double gap = 0.80 - 0.06;
  double t = 0.0;
  const double dt = 0.001;
  while (s.transmittance - 0.06 > 0.1 * gap && t < 60.0) {
    s = device_step(s, dt);
    t += dt;
  }
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> tap(0, kMaxTap);
  std::uniform_real_distribution<double> step(0.001, 5.0);
  std::size_t escapes = 0;
  for (int seq = 0; seq < 100000; ++seq) {
    ECDeviceState d = make_device();
    const int len = 1 + static_cast<int>(rng() % 10);
    for (int k = 0; k < len; ++k) {
      d = apply_command(d, VoltageCommand::from_tap(tap(rng)));
      d = device_step(d, step(rng));
      if (d.transmittance < 0.06 || d.transmittance > 0.80) ++escapes;
    }
  }
  return {t <= 10.0 && escapes == 0,
          "90% swing at " + fmt("%.3f", t) + " s, " + std::to_string(escapes) + " escapes in 1e5 sequences",
          "<= 10 s, 0 escapes", {}};
}

NodeUpdate scripted_update(const ParamVector& base, const std::string& id, double shift,
                           std::uint64_t usage, double err) {
  NodeUpdate u{id, base, usage, 0, err};
  for (std::size_t j = 0; j < u.params.values.size(); ++j) {
    u.params.values[j] += shift * std::sin(static_cast<double>(j) + shift);
  }
  return u;
}

// 13.
Outcome protocol_persistence() {
  SyntheticDatasetSpec spec;
  spec.samples = 120;
  StackOptions so;
  so.mlp.max_epochs = 100;
  const EnsembleModel boot = stack_fit(generate_dataset(spec).train, so);
  const ParamVector base = extract_params(boot);

  const fs::path dir = scratch_dir("persist");
  ServiceConfig cfg;
  cfg.data_dir = dir;
  std::int64_t now = 5000;
  std::vector<GlobalModel> live;
  std::mt19937_64 rng(13);
  {
    Coordinator c(boot, cfg, [&] { return now; });
    for (int i = 0; i < 5; ++i) {
      c.handle(make_request("register", i, {{"node_id", "car-" + std::to_string(i)}}));
    }
    live.push_back(*c.current());
    for (int round = 0; round < 25; ++round) {
      for (int i = 0; i < 5; ++i) {
        if (rng() % 3 == 0) continue;
        const auto u = scripted_update(base, "car-" + std::to_string(i), 0.01 * (round + i),
                                       rng() % 6, 0.01 * static_cast<double>(rng() % 20));
        c.handle(make_request("push_update", round, {{"update", to_json(u)}}));
      }
      now += 250;
      const auto r = c.run_round();
      if (r.status == RoundResult::Status::Published) live.push_back(*r.model);
    }
  }
  const auto replayed = Coordinator::replay(dir);
  const auto stored = Coordinator::read_versions(dir);
  std::size_t mismatched = 0;
  bool gap_free = stored.size() == live.size() && replayed.size() == live.size();
  for (std::size_t v = 0; v < std::min(stored.size(), live.size()); ++v) {
    if (stored[v].version != v) gap_free = false;
    if (v >= replayed.size() || to_json(replayed[v]).dump() != to_json(live[v]).dump() ||
        !(replayed[v].params == live[v].params)) {
      ++mismatched;
    }
  }
  fs::remove_all(dir);

  // Fuzz over TCP: every frame must be answered with its id echoed.
  Coordinator svc(boot, {});
  TcpServer server([&](std::string_view p) { return svc.handle_payload(p); }, "127.0.0.1", 0);
  TcpClient client("127.0.0.1", server.port());
  const std::vector<std::string> types{"register", "push_update", "pull_model", "status", "report", "command"};
  std::size_t unanswered = 0, well_formed = 0, malformed = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string& type = types[static_cast<std::size_t>(i) % types.size()];
    const std::string node = "fz-" + std::to_string(rng() % 7);
    json payload = {{"node_id", node}};
    if (type == "push_update") {
      payload = {{"update", to_json(scripted_update(base, node, 0.001, rng() % 3, 0.1))}};
    } else if (type == "report") {
      payload["tap"] = static_cast<int>(rng() % 128);
      payload["usage_count"] = rng() % 5;
    } else if (type == "command") {
      payload["action"] = rng() % 2 ? "set_mode" : "manual_tap";
      payload["mode"] = "manual";
      payload["tap"] = static_cast<int>(rng() % 128);
    } else if (type == "pull_model") {
      payload["full"] = rng() % 10 == 0;
    }
    const json reply = json::parse(client.round_trip(make_request(type, i, payload).dump()), nullptr, false);
    if (reply.is_discarded() || reply.value("id", json()) != i) ++unanswered;
    ++well_formed;
  }
  for (int i = 0; i < 1000; ++i) {
    std::string junk(1 + rng() % 200, '\0');
    for (auto& ch : junk) ch = static_cast<char>(rng() % 256);
    if (i % 3 == 0) junk = R"({"type":"register","version":1,"id":)" + std::to_string(i);
    if (i % 3 == 1) junk = R"({"type":"warp","version":1,"id":)" + std::to_string(i) + "}";
    const json reply = json::parse(client.round_trip(junk), nullptr, false);
    if (reply.is_discarded() || reply.value("type", "") != "error") ++unanswered;
    ++malformed;
  }
  server.stop();

  return {mismatched == 0 && gap_free && unanswered == 0,
          std::to_string(live.size()) + " versions, " + std::to_string(mismatched) + " replay mismatches, " +
              (gap_free ? "gap-free" : "GAPS") + ", " + std::to_string(unanswered) + " unanswered of " +
              std::to_string(well_formed) + "+" + std::to_string(malformed),
          "bit-exact, gap-free, 0 unanswered", {}};
}

// 14. Real processes: one server, three nodes with scripted overrides.
pid_t spawn(const std::vector<std::string>& args, int stdout_fd) {
  std::vector<char*> argv;
  for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
  argv.push_back(nullptr);
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  if (stdout_fd >= 0) posix_spawn_file_actions_adddup2(&fa, stdout_fd, STDOUT_FILENO);
  pid_t pid = -1;
  const int rc = posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw std::runtime_error("posix_spawn failed for " + args[0]);
  return pid;
}

Outcome end_to_end() {
  const std::string cli = ECMIRROR_CLI_PATH;
  const fs::path dir = scratch_dir("e2e");
  int pipe_fd[2];
  if (pipe(pipe_fd) != 0) throw std::runtime_error("pipe failed");
  const pid_t server = spawn({cli, "serve", "--listen", "127.0.0.1:0", "--data-dir", dir.string(),
                              "--period-ms", "400", "--duration-s", "50"},
                             pipe_fd[1]);
  close(pipe_fd[1]);

  std::string out;
  int port = 0;
  char buf[512];
  while (port == 0) {
    const ssize_t n = read(pipe_fd[0], buf, sizeof buf);
    if (n <= 0) break;
    out.append(buf, static_cast<std::size_t>(n));
    const auto at = out.find("listening on ");
    if (at != std::string::npos && out.find('\n', at) != std::string::npos) {
      const auto colon = out.find(':', at + 13);
      port = std::stoi(out.substr(colon + 1));
    }
  }
  if (port == 0) {
    kill(server, SIGTERM);
    waitpid(server, nullptr, 0);
    return {false, "server did not start", "", {out}};
  }

  const int devnull = open("/dev/null", O_WRONLY);
  std::vector<pid_t> nodes;
  for (int i = 1; i <= 3; ++i) {
    const std::string taps = std::to_string(80 + i) + "," + std::to_string(90 + i) + "," +
                             std::to_string(100 + i) + "," + std::to_string(110 + i);
    nodes.push_back(spawn({cli, "node", "--server", "127.0.0.1:" + std::to_string(port), "--id",
                           "mirror-" + std::to_string(i), "--scenario", std::to_string(3 + i), "--ticks",
                           "10", "--manual-taps", taps + "," + taps, "--min-samples", "8",
                           "--wait-provenance", "--timeout-s", "30", "--seed", std::to_string(i)},
                          devnull));
  }
  int node_failures = 0;
  for (pid_t p : nodes) {
    int status = 0;
    waitpid(p, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) ++node_failures;
  }
  close(devnull);
  kill(server, SIGTERM);
  int status = 0;
  waitpid(server, &status, 0);
  close(pipe_fd[0]);

  const auto versions = Coordinator::read_versions(dir);
  std::set<std::string> credited;
  bool changed = false;
  for (std::size_t v = 1; v < versions.size(); ++v) {
    for (const auto& p : versions[v].provenance) {
      if (p.usage_count > 0) credited.insert(p.node_id);
    }
    if (!(versions[v].params == versions[v - 1].params)) changed = true;
  }
  fs::remove_all(dir);
  const bool ok = node_failures == 0 && credited.size() == 3 && changed && versions.size() >= 2;
  return {ok,
          std::to_string(versions.size() - (versions.empty() ? 0 : 1)) + " published, " +
              std::to_string(credited.size()) + "/3 nodes credited with usage, params " +
              (changed ? "changed" : "unchanged") + ", " + std::to_string(node_failures) + " node failures",
          "3/3 credited, params changed", {}};
}

std::set<std::string> split_names(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecmirror acceptance run"};
  std::string only, known_red;
  bool skip_e2e = false;
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--known-red", known_red, "Criteria expected to fail");
  app.add_flag("--skip-e2e", skip_e2e, "Skip the multi-process run");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"aggregate_oracle", 5, aggregate_oracle},
      {"aggregate_hand_case", 1, aggregate_hand},
      {"correction_hand_case", 1, correction_hand},
      {"mlp_gradient_check", 30, mlp_gradient},
      {"gbt_loss_monotone", 10, gbt_monotone},
      {"ridge_vs_iterative", 10, ridge_oracle},
      {"rating_partition", 5, rating_partition},
      {"stacking_accuracy", 120, stacking_accuracy},
      {"federated_r2", 300, federated_r2},
      {"aggregation_scaling", 120, aggregation_scaling},
      {"glare_reduction", 120, glare_reduction},
      {"device_dynamics", 10, device},
      {"protocol_persistence", 60, protocol_persistence},
      {"end_to_end", 60, end_to_end},
  };
  const std::set<std::string> selected = split_names(only);
  const std::set<std::string> expected_red = split_names(known_red);

  std::set<std::string> failed;
  int run = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.name)) continue;
    if (skip_e2e && c.name == "end_to_end") continue;
    ++run;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), "", {}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs <= c.budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) failed.insert(c.name);
    std::printf("%s %-26s %s | want %s | %.2f s (budget %.0f s)%s\n", pass ? "PASS" : "FAIL",
                c.name.c_str(), o.measured.c_str(), o.tolerance.c_str(), secs, c.budget_s,
                !pass && expected_red.contains(c.name) ? " [known red]" : "");
    for (const auto& n : o.notes) std::printf("       %s\n", n.c_str());
    std::fflush(stdout);
  }

  std::set<std::string> expected_here;
  for (const auto& n : expected_red) {
    bool ran = false;
    for (const auto& c : criteria) {
      if (c.name == n && (selected.empty() || selected.contains(n)) && !(skip_e2e && n == "end_to_end")) ran = true;
    }
    if (ran) expected_here.insert(n);
  }
  std::printf("%d criteria, %zu failed, %zu known red\n", run, failed.size(), expected_here.size());
  if (failed != expected_here) {
    for (const auto& n : failed) {
      if (!expected_here.contains(n)) std::printf("unexpected failure: %s\n", n.c_str());
    }
    for (const auto& n : expected_here) {
      if (!failed.contains(n)) std::printf("known-red criterion now passes: %s\n", n.c_str());
    }
    return 1;
  }
  return 0;
}
