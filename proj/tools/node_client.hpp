#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ecmirror::tool {

struct NodeRunOptions {
  std::string server = "127.0.0.1:7700";
  std::string node_id;
  int scenario = 6;
  std::size_t ticks = 60;     // 0: run until interrupted
  double tick_s = 0.5;        // simulated seconds per tick
  int tick_ms = 0;            // wall-clock pause per tick
  std::vector<int> manual_taps;
  std::size_t override_every = 1;
  std::size_t min_samples = 8;
  bool wait_provenance = false;
  double timeout_s = 30.0;
  std::uint64_t seed = 1;
  bool verbose = false;
};

// Returns the process exit code.
int run_node(const NodeRunOptions& options);

}  // namespace ecmirror::tool
