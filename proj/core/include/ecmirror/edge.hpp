#pragma once

// Simulated rearview-mirror edge node: sensor ADC, 128-tap drive ladder,
// electrochromic transmittance dynamics, auto/manual control and local
// training for federation.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ecmirror/ensemble.hpp"
#include "ecmirror/federation.hpp"
#include "ecmirror/glare.hpp"

namespace ecmirror {

inline constexpr double kAdcStepVolts = 0.01;
inline constexpr int kTapCount = 128;
inline constexpr int kMaxTap = kTapCount - 1;

// Clamp into [0, 5] V, then round half-up to the 0.01 V grid.
double adc_quantize(double analog_volts);

// Clamped linear tap ladder over [1.49, 3.79] V.
double tap_to_volts(int tap);
int volts_to_tap(double volts);

class VoltageCommand {
 public:
  VoltageCommand() = default;
  // Throws DomainError when tap is outside 0..127.
  static VoltageCommand from_tap(int tap);
  static VoltageCommand from_volts(double volts) { return from_tap(volts_to_tap(volts)); }

  int tap() const { return tap_; }
  double volts() const { return tap_to_volts(tap_); }

  friend bool operator==(const VoltageCommand&, const VoltageCommand&) = default;

 private:
  explicit VoltageCommand(int tap) : tap_(tap) {}
  int tap_ = 0;
};

struct DeviceConfig {
  double bleached = 0.80;  // transmittance at the lowest drive voltage
  double colored = 0.06;   // transmittance at the highest drive voltage
  // 90% of a commanded swing settles within 10 s (10 / ln 10 = 4.343).
  double time_constant_s = 4.34;
};

// Linear in volts between the bleached and colored endpoints, clamped.
double target_transmittance(double volts, const DeviceConfig& cfg = {});

// Incident light seen through the mirror, normalized so the bleached state
// passes it unchanged.
double attenuate_incident(double incident_v, double transmittance, const DeviceConfig& cfg = {});

struct ECDeviceState {
  double transmittance = 0.80;
  double target = 0.80;
  double time_constant_s = DeviceConfig{}.time_constant_s;
  VoltageCommand applied;
  std::uint64_t cycles = 0;  // commanded voltage changes, for the lifetime counter
};

ECDeviceState make_device(const DeviceConfig& cfg = {});
ECDeviceState apply_command(ECDeviceState state, VoltageCommand command,
                            const DeviceConfig& cfg = {});
// First-order relaxation toward the target. Throws DomainError for dt <= 0.
ECDeviceState device_step(ECDeviceState state, double dt_s, const DeviceConfig& cfg = {});

enum class Mode { Auto, Manual };
std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view name);

struct NodeConfig {
  TopsisCalibration calibration;
  DeviceConfig device;
  std::size_t min_train_samples = 8;
  double holdout_fraction = 0.2;
  MlpHyperparams fine_tune = [] {
    MlpHyperparams hp;
    hp.max_epochs = 300;
    return hp;
  }();
  std::uint64_t seed = 1;
};

struct EscalationTrace {
  int predicted_tap = 0;
  int commanded_tap = 0;
  int predicted_rating = 9;  // rating expected once the device settles
  bool escalating = false;
  bool saturated = false;
};

// One mirror. A sequential state machine; callers serialize access.
class EdgeNode {
 public:
  EdgeNode(std::string node_id, EnsembleModel model, NodeConfig cfg = {});

  const std::string& id() const { return id_; }
  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }
  const EnsembleModel& model() const { return model_; }
  const ECDeviceState& device() const { return device_; }
  const NodeConfig& config() const { return cfg_; }
  std::uint64_t usage_count() const { return usage_count_; }
  std::uint64_t uploads() const { return uploads_; }
  const std::vector<TrainingSample>& buffer() const { return buffer_; }
  const std::vector<TrainingSample>& history() const { return history_; }
  const std::optional<LightReading>& last_reading() const { return last_reading_; }
  const std::vector<TrainingSample>& last_holdout() const { return last_holdout_; }
  const EscalationTrace& last_escalation() const { return escalation_; }

  // Replaces MLP/meta parameters with a downloaded global model.
  void install(const ParamVector& params);
  void replace_model(EnsembleModel model) { model_ = std::move(model); }

  // Records the most recent sensor reading.
  void observe(const LightReading& reading);

  // Auto-mode control tick: predicted tap, escalated one step per tick while
  // the settled assessment stays below Acceptable. Commands the device.
  VoltageCommand auto_adjust(const LightReading& reading);

  // Operator override against the last observed reading. Switches to
  // Manual, commands the device, buffers a training sample and counts the
  // usage. Throws DomainError for an invalid tap or no reading yet; the
  // node is unchanged in that case.
  void manual_override(int tap);

  // Advances the device by dt seconds.
  void tick(double dt_s);

  // Fine-tunes the MLP and refits the meta-model on history + buffer, holding
  // out a seeded fraction to measure mean absolute error. Returns nullopt
  // while the buffer holds fewer than min_train_samples.
  std::optional<NodeUpdate> local_train();

  // Assessment of the current reading as seen through the mirror right now.
  GlareAssessment assess_through_mirror(const LightReading& reading) const;

 private:
  int settled_rating(const LightReading& reading, int tap) const;

  std::string id_;
  EnsembleModel model_;
  NodeConfig cfg_;
  Mode mode_ = Mode::Auto;
  ECDeviceState device_;
  std::uint64_t usage_count_ = 0;
  std::uint64_t uploads_ = 0;
  std::vector<TrainingSample> buffer_;
  std::vector<TrainingSample> history_;
  std::vector<TrainingSample> last_holdout_;
  std::optional<LightReading> last_reading_;
  EscalationTrace escalation_;
  std::optional<int> escalation_floor_;  // last tap of an ongoing escalation
};

// Seeded split of n rows: returns the holdout row indices (at least one).
std::vector<std::size_t> holdout_indices(std::size_t n, double fraction, std::uint64_t seed);

}  // namespace ecmirror
