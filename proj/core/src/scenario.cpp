#include "ecmirror/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <ostream>

#include "ecmirror/config_file.hpp"
#include "ecmirror/errors.hpp"

namespace ecmirror {

double GlareScenario::duration_s() const {
  double end = 0.0;
  for (const auto& s : segments) end = std::max(end, s.start_s + s.duration_s);
  return end;
}

LightReading GlareScenario::sample(double t_s, std::mt19937_64& rng) const {
  LightReading r;
  r.timestamp_ms = static_cast<std::int64_t>(std::llround(t_s * 1000.0));
  for (const auto& s : segments) {
    if (t_s >= s.start_s && t_s < s.start_s + s.duration_s) {
      double incident = s.incident_v;
      double ambient = s.ambient_v;
      if (s.noise_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, s.noise_sd);
        incident += noise(rng);
        ambient += noise(rng);
      }
      r.incident_v = adc_quantize(incident);
      r.ambient_v = adc_quantize(ambient);
      return r;
    }
  }
  return r;
}

std::vector<GlareScenario> canonical_scenarios() {
  // Noiseless TOPSIS scores: 0, 0.089, 0.230, 0.385, 0.519, 0.850.
  return {
      {1, "no glare", {{0.0, 30.0, 0.00, 0.50, 0.00}}},
      {2, "distant headlights", {{0.0, 30.0, 0.60, 0.40, 0.03}}},
      {3, "low beam at range", {{0.0, 30.0, 1.50, 0.80, 0.04}}},
      {4, "low beam close", {{0.0, 30.0, 2.40, 1.00, 0.05}}},
      {5, "high beam at range", {{0.0, 30.0, 3.20, 1.20, 0.05}}},
      {6, "high beam close", {{0.0, 30.0, 4.60, 0.60, 0.05}}},
  };
}

std::vector<GlareScenario> parse_scenarios(const std::string& text) {
  const ConfigFile file = ConfigFile::parse(text, "<scenarios>");
  std::vector<GlareScenario> out;
  for (const auto& e : file.entries()) {
    if (e.section.rfind("scenario", 0) != 0) {
      throw FormatError("scenarios:" + std::to_string(e.line) + ": entry outside a [scenario N] section");
    }
    const int id = static_cast<int>(parse_double(e.section.substr(8), "scenario id"));
    if (out.empty() || out.back().id != id) {
      out.push_back({id, "scenario " + std::to_string(id), {}});
    }
    GlareScenario& sc = out.back();
    if (e.key == "name") {
      sc.name = e.value;
    } else if (e.key == "segment") {
      const auto v = parse_double_list(e.value, "scenarios:" + std::to_string(e.line));
      if (v.size() != 5) {
        throw FormatError("scenarios:" + std::to_string(e.line) +
                          ": segment needs start_s, duration_s, incident_v, ambient_v, noise_sd");
      }
      if (v[1] <= 0.0 || v[4] < 0.0 || v[2] < 0.0 || v[2] > kSensorMaxVolts || v[3] < 0.0 ||
          v[3] > kSensorMaxVolts) {
        throw FormatError("scenarios:" + std::to_string(e.line) + ": segment values out of range");
      }
      sc.segments.push_back({v[0], v[1], v[2], v[3], v[4]});
    } else {
      throw FormatError("scenarios:" + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
  }
  return out;
}

std::vector<GlareScenario> load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenarios(buf.str());
}

std::vector<ScenarioTick> run_scenario(EdgeNode& node, const GlareScenario& scenario,
                                       const ScenarioRunOptions& options) {
  if (!(options.tick_s > 0.0)) throw DomainError("scenario tick must be positive");
  const double duration = options.duration_s > 0.0 ? options.duration_s : scenario.duration_s();
  const auto steps = static_cast<std::size_t>(std::floor(duration / options.tick_s + 1e-9));
  std::mt19937_64 rng(options.seed);
  const auto& cal = node.config().calibration;

  std::vector<ScenarioTick> ticks;
  ticks.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    ScenarioTick tick;
    tick.t_s = static_cast<double>(i) * options.tick_s;
    tick.reading = scenario.sample(tick.t_s, rng);
    tick.before = assess(tick.reading, cal);
    if (node.mode() == Mode::Auto) {
      tick.command = node.auto_adjust(tick.reading);
    } else {
      node.observe(tick.reading);
      tick.command = node.device().applied;
    }
    node.tick(options.tick_s);
    tick.transmittance = node.device().transmittance;
    tick.after = node.assess_through_mirror(tick.reading);
    ticks.push_back(tick);
  }
  return ticks;
}

void write_run_log(std::ostream& out, const std::vector<ScenarioTick>& ticks) {
  out << "t_s,incident_v,ambient_v,before_score,before_rating,tap,volts,transmittance,"
         "after_score,after_rating\n";
  char line[256];
  for (const auto& t : ticks) {
    std::snprintf(line, sizeof line, "%.2f,%.2f,%.2f,%.6f,%d,%d,%.4f,%.6f,%.6f,%d\n", t.t_s,
                  t.reading.incident_v, t.reading.ambient_v, t.before.topsis_score, t.before.rating,
                  t.command.tap(), t.command.volts(), t.transmittance, t.after.topsis_score,
                  t.after.rating);
    out << line;
  }
}

}  // namespace ecmirror
