#include "ecmirror/edge.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecmirror/errors.hpp"

namespace ecmirror {

double adc_quantize(double analog_volts) {
  const double clamped = std::clamp(analog_volts, 0.0, kSensorMaxVolts);
  // The epsilon keeps decimal halves such as 2.345 rounding up.
  // Dividing the step count gives the double nearest the decimal value.
  return std::floor(clamped / kAdcStepVolts + 0.5 + 1e-9) / 100.0;
}

double tap_to_volts(int tap) {
  const int t = std::clamp(tap, 0, kMaxTap);
  return std::lerp(kDriveMinVolts, kDriveMaxVolts, static_cast<double>(t) / kMaxTap);
}

int volts_to_tap(double volts) {
  const double v = std::clamp(volts, kDriveMinVolts, kDriveMaxVolts);
  const double frac = (v - kDriveMinVolts) / (kDriveMaxVolts - kDriveMinVolts);
  return static_cast<int>(std::lround(frac * kMaxTap));
}

VoltageCommand VoltageCommand::from_tap(int tap) {
  if (tap < 0 || tap > kMaxTap) {
    throw DomainError("tap " + std::to_string(tap) + " outside 0.." + std::to_string(kMaxTap));
  }
  return VoltageCommand(tap);
}

double target_transmittance(double volts, const DeviceConfig& cfg) {
  const double v = std::clamp(volts, kDriveMinVolts, kDriveMaxVolts);
  const double frac = (v - kDriveMinVolts) / (kDriveMaxVolts - kDriveMinVolts);
  return std::lerp(cfg.bleached, cfg.colored, frac);
}

double attenuate_incident(double incident_v, double transmittance, const DeviceConfig& cfg) {
  return incident_v * transmittance / cfg.bleached;
}

ECDeviceState make_device(const DeviceConfig& cfg) {
  ECDeviceState s;
  s.transmittance = cfg.bleached;
  s.target = cfg.bleached;
  s.time_constant_s = cfg.time_constant_s;
  return s;
}

ECDeviceState apply_command(ECDeviceState state, VoltageCommand command, const DeviceConfig& cfg) {
  if (!(command == state.applied)) ++state.cycles;
  state.applied = command;
  state.target = target_transmittance(command.volts(), cfg);
  return state;
}

ECDeviceState device_step(ECDeviceState state, double dt_s, const DeviceConfig& cfg) {
  if (!(dt_s > 0.0)) throw DomainError("device_step: dt must be positive");
  const double decay = std::exp(-dt_s / state.time_constant_s);
  const double next = state.target + (state.transmittance - state.target) * decay;
  state.transmittance = std::clamp(next, std::min(cfg.colored, cfg.bleached),
                                   std::max(cfg.colored, cfg.bleached));
  return state;
}

std::string_view to_string(Mode mode) { return mode == Mode::Auto ? "auto" : "manual"; }

Mode mode_from_string(std::string_view name) {
  if (name == "auto") return Mode::Auto;
  if (name == "manual") return Mode::Manual;
  throw DomainError("unknown mode '" + std::string(name) + "'");
}

std::vector<std::size_t> holdout_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 2) throw DomainError("holdout: need at least 2 rows");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n))), 1, n - 1);
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

EdgeNode::EdgeNode(std::string node_id, EnsembleModel model, NodeConfig cfg)
    : id_(std::move(node_id)), model_(std::move(model)), cfg_(cfg), device_(make_device(cfg.device)) {
  if (id_.empty()) throw DomainError("edge node needs an id");
}

void EdgeNode::install(const ParamVector& params) { model_ = apply_params(std::move(model_), params); }

void EdgeNode::observe(const LightReading& reading) {
  validate(reading);
  last_reading_ = reading;
}

int EdgeNode::settled_rating(const LightReading& reading, int tap) const {
  const double t = target_transmittance(tap_to_volts(tap), cfg_.device);
  const LightReading seen{attenuate_incident(reading.incident_v, t, cfg_.device), reading.ambient_v,
                          reading.timestamp_ms};
  return assess(seen, cfg_.calibration).rating;
}

VoltageCommand EdgeNode::auto_adjust(const LightReading& reading) {
  observe(reading);
  if (mode_ != Mode::Auto) return device_.applied;

  const GlareCriteria c = compute_criteria(reading);
  const int predicted = volts_to_tap(model_.predict({c.incident, c.contrast}));

  EscalationTrace trace;
  trace.predicted_tap = predicted;
  int tap = predicted;
  if (settled_rating(reading, predicted) >= kAcceptableRating) {
    escalation_floor_.reset();
  } else if (escalation_floor_) {
    tap = std::max(predicted, *escalation_floor_);
    if (tap < kMaxTap && settled_rating(reading, tap) < kAcceptableRating) ++tap;
    escalation_floor_ = tap;
  } else {
    escalation_floor_ = tap;
  }
  trace.commanded_tap = tap;
  trace.predicted_rating = settled_rating(reading, tap);
  trace.escalating = trace.predicted_rating < kAcceptableRating && tap < kMaxTap;
  trace.saturated = trace.predicted_rating < kAcceptableRating && tap == kMaxTap;
  escalation_ = trace;

  const VoltageCommand command = VoltageCommand::from_tap(tap);
  device_ = apply_command(device_, command, cfg_.device);
  return command;
}

void EdgeNode::manual_override(int tap) {
  const VoltageCommand command = VoltageCommand::from_tap(tap);
  if (!last_reading_) throw DomainError("manual override before any sensor reading");
  const GlareCriteria c = compute_criteria(*last_reading_);
  mode_ = Mode::Manual;
  escalation_floor_.reset();
  device_ = apply_command(device_, command, cfg_.device);
  buffer_.push_back({{c.incident, c.contrast}, command.volts()});
  ++usage_count_;
}

void EdgeNode::tick(double dt_s) { device_ = device_step(device_, dt_s, cfg_.device); }

std::optional<NodeUpdate> EdgeNode::local_train() {
  if (buffer_.empty() || buffer_.size() < cfg_.min_train_samples) return std::nullopt;

  std::vector<TrainingSample> all(history_);
  all.insert(all.end(), buffer_.begin(), buffer_.end());
  const auto held = holdout_indices(all.size(), cfg_.holdout_fraction, cfg_.seed + uploads_);
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> holdout;
  for (std::size_t i = 0, h = 0; i < all.size(); ++i) {
    if (h < held.size() && held[h] == i) {
      holdout.push_back(all[i]);
      ++h;
    } else {
      train.push_back(all[i]);
    }
  }

  MlpHyperparams hp = cfg_.fine_tune;
  hp.alpha = model_.mlp.alpha;
  hp.activation = model_.mlp.activation;
  const std::vector<TrainingSample> scaled = model_.scaler.transform(train);
  mlp_train(model_.mlp, scaled, hp);
  refit_meta(model_, train, model_.meta.alpha);

  NodeUpdate update;
  update.node_id = id_;
  update.params = extract_params(model_);
  update.usage_count = usage_count_;
  update.mean_error = mean_absolute_error(model_, holdout);

  history_.insert(history_.end(), buffer_.begin(), buffer_.end());
  buffer_.clear();
  usage_count_ = 0;
  ++uploads_;
  last_holdout_ = std::move(holdout);
  return update;
}

GlareAssessment EdgeNode::assess_through_mirror(const LightReading& reading) const {
  const LightReading seen{attenuate_incident(reading.incident_v, device_.transmittance, cfg_.device),
                          reading.ambient_v, reading.timestamp_ms};
  return assess(seen, cfg_.calibration);
}

}  // namespace ecmirror
