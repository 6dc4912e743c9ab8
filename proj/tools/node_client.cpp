#include "node_client.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <random>
#include <thread>

#include "ecmirror/coordinator.hpp"
#include "ecmirror/edge.hpp"
#include "ecmirror/errors.hpp"
#include "ecmirror/model_io.hpp"
#include "ecmirror/protocol.hpp"
#include "ecmirror/scenario.hpp"
#include "ecmirror/tcp.hpp"

namespace ecmirror::tool {

namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

const nlohmann::json& expect(const nlohmann::json& reply, const char* type) {
  if (reply.at("type") == "error") {
    const auto& p = reply.at("payload");
    throw ProtocolError("server refused: " + p.value("code", std::string("?")) + ": " +
                        p.value("message", std::string()));
  }
  if (reply.at("type") != type) {
    throw ProtocolError("expected '" + std::string(type) + "' reply, got " +
                        reply.at("type").dump());
  }
  return reply.at("payload");
}

}  // namespace

int run_node(const NodeRunOptions& o) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  const auto scenarios = canonical_scenarios();
  if (o.scenario < 1 || o.scenario > static_cast<int>(scenarios.size())) {
    throw DomainError("scenario must be 1.." + std::to_string(scenarios.size()));
  }
  if (o.override_every == 0) throw DomainError("override interval must be >= 1 tick");
  if (!valid_node_id(o.node_id)) throw DomainError("node id must match [A-Za-z0-9_.-]{1,64}");
  const GlareScenario& scenario = scenarios[static_cast<std::size_t>(o.scenario - 1)];

  const auto [host, port] = split_address(o.server);
  TcpClient client(host, port);

  expect(client.request("register", {{"node_id", o.node_id}}), "ack");
  const auto pulled = expect(client.request("pull_model", {{"node_id", o.node_id}, {"full", true}}),
                             "model");
  GlobalModel installed = global_model_from_json(pulled.at("model"));

  NodeConfig cfg;
  cfg.min_train_samples = o.min_samples;
  cfg.seed = o.seed;
  EdgeNode node(o.node_id, model_from_json(pulled.at("ensemble")), cfg);

  std::mt19937_64 rng(o.seed);
  std::size_t next_override = 0;
  std::size_t pushes = 0;
  // A pending push always lands in the next published version.
  std::uint64_t version_at_push = 0;
  const double period = scenario.duration_s();

  auto sync_model = [&] {
    const auto reply = expect(client.request("pull_model", {{"node_id", o.node_id}}), "model");
    GlobalModel latest = global_model_from_json(reply.at("model"));
    if (latest.version > installed.version) {
      node.install(latest.params);
      installed = std::move(latest);
      if (o.verbose) std::printf("%s: installed version %llu\n", o.node_id.c_str(),
                                 static_cast<unsigned long long>(installed.version));
    }
  };

  auto report = [&](const GlareAssessment& after) {
    const auto reply = expect(client.request("report", {{"node_id", o.node_id},
                                                        {"mode", to_string(node.mode())},
                                                        {"tap", node.device().applied.tap()},
                                                        {"transmittance", node.device().transmittance},
                                                        {"score", after.topsis_score},
                                                        {"rating", after.rating},
                                                        {"usage_count", node.usage_count()}}),
                              "ack");
    for (const auto& cmd : reply.at("commands")) {
      if (cmd.at("action") == "set_mode") {
        node.set_mode(mode_from_string(cmd.at("mode").get<std::string>()));
      } else if (cmd.at("action") == "manual_tap" && node.last_reading()) {
        node.manual_override(cmd.at("tap").get<int>());
      }
    }
  };

  for (std::size_t tick = 0; (o.ticks == 0 || tick < o.ticks) && !g_stop.load(); ++tick) {
    const double t = static_cast<double>(tick) * o.tick_s;
    const LightReading reading =
        scenario.sample(period > 0.0 ? std::fmod(t, period) : 0.0, rng);
    if (node.mode() == Mode::Auto) {
      node.auto_adjust(reading);
    } else {
      node.observe(reading);
    }
    if (next_override < o.manual_taps.size() && tick % o.override_every == 0) {
      node.manual_override(o.manual_taps[next_override++]);
    }
    node.tick(o.tick_s);
    report(node.assess_through_mirror(reading));

    if (node.buffer().size() >= o.min_samples) {
      if (auto update = node.local_train()) {
        const auto ack =
            expect(client.request("push_update", {{"update", to_json(*update)}}), "ack");
        ++pushes;
        version_at_push = ack.at("model_version").get<std::uint64_t>();
        if (o.verbose) std::printf("%s: pushed update (usage %llu, mae %.4f)\n", o.node_id.c_str(),
                                   static_cast<unsigned long long>(update->usage_count),
                                   update->mean_error);
      }
    }
    sync_model();
    if (o.tick_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(o.tick_ms));
  }

  if (o.wait_provenance) {
    if (pushes == 0) throw DomainError("nothing was pushed, so no round can include this node");
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::milliseconds(static_cast<long>(o.timeout_s * 1000));
    while (installed.version <= version_at_push) {
      if (g_stop.load()) return 130;
      if (std::chrono::steady_clock::now() > deadline) {
        std::fprintf(stderr, "error: no published version included %s within %.1f s\n",
                     o.node_id.c_str(), o.timeout_s);
        return 1;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
      sync_model();
    }
  }
  std::printf("%s: done, model version %llu, pushes %zu\n", o.node_id.c_str(),
              static_cast<unsigned long long>(installed.version), pushes);
  return 0;
}

}  // namespace ecmirror::tool
