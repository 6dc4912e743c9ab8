#pragma once

// Cloud side of the fleet: node registry, update intake, model publication,
// fleet status and operator commands, with append-only persistence.
//
// Data directory layout (all optional; an empty path disables persistence):
//   bootstrap.json  initial ensemble
//   events.log      one JSON object per accepted register / push / round
//   versions.log    one JSON object per published model version

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ecmirror/ensemble.hpp"
#include "ecmirror/federation.hpp"

namespace ecmirror {

struct ServiceConfig {
  FederationConfig federation;
  std::filesystem::path data_dir;
  std::chrono::milliseconds period{10000};
};

struct NodeRecord {
  std::string node_id;
  std::int64_t registered_at_ms = 0;
  std::int64_t last_seen_ms = 0;
  std::string mode = "auto";
  int tap = 0;
  double transmittance = 0.0;
  double score = 0.0;
  int rating = 9;
  std::uint64_t uploaded_usage = 0;  // usage counts carried by accepted pushes
  std::uint64_t unsent_usage = 0;    // last reported count not yet uploaded
  std::uint64_t pushes = 0;

  std::uint64_t usage_count() const { return uploaded_usage + unsent_usage; }
};

// Letters, digits, '_', '.', '-'; 1 to 64 characters.
bool valid_node_id(std::string_view id);

class Coordinator {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds

  // With a data directory that already holds a bootstrap and logs, state is
  // restored by replaying events.log; the stored bootstrap wins over
  // `bootstrap` in that case.
  Coordinator(EnsembleModel bootstrap, ServiceConfig cfg, Clock clock = {});

  Coordinator(const Coordinator&) = delete;
  Coordinator& operator=(const Coordinator&) = delete;

  // Never throws. Malformed input yields an error response.
  std::string handle_payload(std::string_view payload);
  nlohmann::json handle(const nlohmann::json& request);

  // One scheduler tick. Serialized with request handling.
  RoundResult run_round();

  nlohmann::json status() const;
  std::shared_ptr<const GlobalModel> current() const;
  const EnsembleModel& bootstrap() const { return bootstrap_; }
  std::size_t node_count() const;
  std::uint64_t rounds_attempted() const;
  const ServiceConfig& config() const { return cfg_; }

  // Rebuilds every published version from bootstrap.json and events.log.
  static std::vector<GlobalModel> replay(const std::filesystem::path& data_dir);
  // Versions as persisted in versions.log.
  static std::vector<GlobalModel> read_versions(const std::filesystem::path& data_dir);

 private:
  nlohmann::json dispatch(const std::string& type, const nlohmann::json& id,
                          const nlohmann::json& payload);
  nlohmann::json on_register(const nlohmann::json& id, const nlohmann::json& payload);
  nlohmann::json on_push(const nlohmann::json& id, const nlohmann::json& payload);
  nlohmann::json on_pull(const nlohmann::json& id, const nlohmann::json& payload);
  nlohmann::json on_report(const nlohmann::json& id, const nlohmann::json& payload);
  nlohmann::json on_command(const nlohmann::json& id, const nlohmann::json& payload);
  nlohmann::json status_locked() const;
  RoundResult round_locked(std::int64_t ts);

  void restore();
  void append_event(const nlohmann::json& record);
  void append_version(const GlobalModel& model);

  EnsembleModel bootstrap_;
  ServiceConfig cfg_;
  Clock clock_;

  mutable std::mutex mu_;
  Federation federation_;
  std::map<std::string, NodeRecord> records_;
  std::map<std::string, std::deque<nlohmann::json>> commands_;
  std::int64_t started_ms_ = 0;
  std::uint64_t rounds_attempted_ = 0;
  std::int64_t last_round_ms_ = 0;
  std::string last_round_status_ = "none";
  std::ofstream events_;
  std::ofstream versions_;
};

// Background driver calling Coordinator::run_round every period.
class RoundScheduler {
 public:
  RoundScheduler(Coordinator& coordinator, std::chrono::milliseconds period,
                 std::function<void(const RoundResult&)> on_round = {});
  ~RoundScheduler();
  RoundScheduler(const RoundScheduler&) = delete;
  RoundScheduler& operator=(const RoundScheduler&) = delete;

  void stop();

 private:
  void loop();

  Coordinator& coordinator_;
  std::chrono::milliseconds period_;
  std::function<void(const RoundResult&)> on_round_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool stopping_ = false;
  std::thread thread_;
};

}  // namespace ecmirror
