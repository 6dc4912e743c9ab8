#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "ecmirror/edge.hpp"

namespace ecmirror {

// Piecewise-constant sensor levels with Gaussian noise, in volts.
struct WaveformSegment {
  double start_s = 0.0;
  double duration_s = 0.0;
  double incident_v = 0.0;
  double ambient_v = 0.0;
  double noise_sd = 0.0;
};

struct GlareScenario {
  int id = 0;
  std::string name;
  std::vector<WaveformSegment> segments;

  double duration_s() const;
  // ADC-quantized reading at time t. Outside every segment both sensors read 0.
  LightReading sample(double t_s, std::mt19937_64& rng) const;
};

// Six conditions whose noiseless readings fall one per glare category,
// with two in the Disturbing band.
std::vector<GlareScenario> canonical_scenarios();

// "[scenario <id>]" sections with "name = ..." and repeated
// "segment = start_s, duration_s, incident_v, ambient_v, noise_sd".
std::vector<GlareScenario> load_scenarios(const std::filesystem::path& path);
std::vector<GlareScenario> parse_scenarios(const std::string& text);

struct ScenarioTick {
  double t_s = 0.0;
  LightReading reading;
  GlareAssessment before;
  VoltageCommand command;
  double transmittance = 0.0;
  GlareAssessment after;  // incident attenuated by the current transmittance
};

struct ScenarioRunOptions {
  double duration_s = 0.0;  // 0: the scenario's own duration
  double tick_s = 0.5;
  std::uint64_t seed = 1;
};

// Ticks the node through the scenario: read, assess, auto-adjust (Auto mode
// only), advance the device, assess again through the mirror.
std::vector<ScenarioTick> run_scenario(EdgeNode& node, const GlareScenario& scenario,
                                       const ScenarioRunOptions& options);

void write_run_log(std::ostream& out, const std::vector<ScenarioTick>& ticks);

}  // namespace ecmirror
