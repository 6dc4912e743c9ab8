#include "ecmirror/federation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecmirror/errors.hpp"

namespace ecmirror {

std::uint64_t param_schema(int inputs, int hidden, int meta_inputs) {
  const std::string descriptor = "mlp:" + std::to_string(inputs) + "-" + std::to_string(hidden) +
                                 "-1;meta:" + std::to_string(meta_inputs) + "+1";
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : descriptor) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t param_schema(const EnsembleModel& model) {
  return param_schema(model.mlp.inputs(), model.mlp.hidden(),
                      static_cast<int>(model.meta.coef.size()));
}

std::size_t param_count(int inputs, int hidden, int meta_inputs) {
  return static_cast<std::size_t>(hidden * inputs + hidden + hidden + 1 + meta_inputs + 1);
}

ParamVector extract_params(const EnsembleModel& model) {
  const auto& mlp = model.mlp;
  ParamVector p;
  p.schema = param_schema(model);
  p.values.reserve(param_count(mlp.inputs(), mlp.hidden(), static_cast<int>(model.meta.coef.size())));
  for (Eigen::Index r = 0; r < mlp.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < mlp.w1.cols(); ++c) p.values.push_back(mlp.w1(r, c));
  }
  p.values.insert(p.values.end(), mlp.b1.data(), mlp.b1.data() + mlp.b1.size());
  p.values.insert(p.values.end(), mlp.w2.data(), mlp.w2.data() + mlp.w2.size());
  p.values.push_back(mlp.b2);
  p.values.insert(p.values.end(), model.meta.coef.begin(), model.meta.coef.end());
  p.values.push_back(model.meta.intercept);
  return p;
}

EnsembleModel apply_params(EnsembleModel model, const ParamVector& params) {
  const std::uint64_t expected = param_schema(model);
  if (params.schema != expected) throw SchemaMismatch(expected, params.schema);
  auto& mlp = model.mlp;
  const std::size_t needed =
      param_count(mlp.inputs(), mlp.hidden(), static_cast<int>(model.meta.coef.size()));
  if (params.values.size() != needed) {
    throw DomainError("parameter vector length does not match its schema");
  }
  auto it = params.values.begin();
  for (Eigen::Index r = 0; r < mlp.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < mlp.w1.cols(); ++c) mlp.w1(r, c) = *it++;
  }
  for (Eigen::Index i = 0; i < mlp.b1.size(); ++i) mlp.b1(i) = *it++;
  for (Eigen::Index i = 0; i < mlp.w2.size(); ++i) mlp.w2(i) = *it++;
  mlp.b2 = *it++;
  for (auto& c : model.meta.coef) c = *it++;
  model.meta.intercept = *it++;
  return model;
}

void validate(const NodeUpdate& update) {
  if (update.node_id.empty()) throw DomainError("node update without node id");
  if (!std::isfinite(update.mean_error) || update.mean_error < 0.0) {
    throw DomainError("node update mean error must be finite and >= 0");
  }
  for (double v : update.params.values) {
    if (!std::isfinite(v)) throw DomainError("node update carries non-finite parameters");
  }
}

void FederationConfig::validate() const {
  if (!(decay > 0.0 && decay <= 1.0)) throw DomainError("federation: decay must be in (0, 1]");
  if (!(correction >= 0.0) || !std::isfinite(correction)) {
    throw DomainError("federation: correction must be >= 0");
  }
  if (quorum < 1) throw DomainError("federation: quorum must be >= 1");
}

namespace {

// Indices of `updates` sorted by node id (stable for duplicates).
std::vector<std::size_t> canonical_order(std::span<const NodeUpdate> updates) {
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return updates[a].node_id < updates[b].node_id;
  });
  return order;
}

void check_schemas(std::span<const NodeUpdate> updates, std::uint64_t expected) {
  for (const auto& u : updates) {
    if (u.params.schema != expected) throw SchemaMismatch(expected, u.params.schema);
    if (u.params.values.size() != updates.front().params.values.size()) {
      throw DomainError("parameter vectors differ in length");
    }
  }
}

// Sum_k weights[k] * theta_{order[k]}, weights already normalized.
std::vector<double> weighted_sum(std::span<const NodeUpdate> updates,
                                 const std::vector<std::size_t>& order,
                                 const std::vector<double>& weights) {
  std::vector<double> out(updates.front().params.values.size(), 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& theta = updates[order[k]].params.values;
    const double w = weights[order[k]];
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * theta[j];
  }
  return out;
}

}  // namespace

std::vector<double> aggregation_weights(std::span<const NodeUpdate> updates,
                                        const FederationConfig& cfg) {
  if (updates.empty()) throw AggregationError(AggregationError::Kind::Empty, "no updates to aggregate");
  const auto order = canonical_order(updates);
  std::vector<double> raw(updates.size());
  double total = 0.0;
  for (auto i : order) {
    raw[i] = std::pow(cfg.decay, static_cast<double>(updates[i].staleness)) *
             static_cast<double>(updates[i].usage_count);
    total += raw[i];
  }
  if (!(total > 0.0)) {
    throw AggregationError(AggregationError::Kind::NoUsableUpdates,
                           "no usable updates: every usage count is zero");
  }
  for (auto& w : raw) w /= total;
  return raw;
}

ParamVector aggregate(std::span<const NodeUpdate> updates, const FederationConfig& cfg) {
  if (updates.empty()) throw AggregationError(AggregationError::Kind::Empty, "no updates to aggregate");
  check_schemas(updates, updates.front().params.schema);
  const auto weights = aggregation_weights(updates, cfg);
  return {updates.front().params.schema, weighted_sum(updates, canonical_order(updates), weights)};
}

std::string_view to_string(CorrectionOutcome outcome) {
  switch (outcome) {
    case CorrectionOutcome::Applied: return "applied";
    case CorrectionOutcome::Disabled: return "disabled";
    case CorrectionOutcome::ZeroErrorCohort: return "zero_error_cohort";
  }
  return "?";
}

CorrectionOutcome correction_outcome_from_string(std::string_view name) {
  if (name == "applied") return CorrectionOutcome::Applied;
  if (name == "disabled") return CorrectionOutcome::Disabled;
  if (name == "zero_error_cohort") return CorrectionOutcome::ZeroErrorCohort;
  throw FormatError("unknown correction outcome '" + std::string(name) + "'");
}

CorrectedParams error_correct(const ParamVector& global, std::span<const NodeUpdate> updates,
                              const FederationConfig& cfg) {
  if (cfg.correction == 0.0) return {global, CorrectionOutcome::Disabled};
  if (updates.empty()) throw AggregationError(AggregationError::Kind::Empty, "no updates for correction");
  check_schemas(updates, global.schema);
  if (updates.front().params.values.size() != global.values.size()) {
    throw DomainError("correction: parameter length mismatch");
  }

  const auto order = canonical_order(updates);
  double total = 0.0;
  for (auto i : order) total += updates[i].mean_error;
  if (!(total > 0.0)) return {global, CorrectionOutcome::ZeroErrorCohort};

  std::vector<double> weights(updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) weights[i] = updates[i].mean_error / total;
  const std::vector<double> term = weighted_sum(updates, order, weights);

  CorrectedParams out{global, CorrectionOutcome::Applied};
  for (std::size_t j = 0; j < term.size(); ++j) out.params.values[j] += cfg.correction * term[j];
  return out;
}

std::string_view to_string(RoundResult::Status status) {
  switch (status) {
    case RoundResult::Status::Published: return "published";
    case RoundResult::Status::BelowQuorum: return "below_quorum";
    case RoundResult::Status::NoUsableUpdates: return "no_usable_updates";
  }
  return "?";
}

Federation::Federation(FederationConfig cfg, ParamVector bootstrap) : cfg_(cfg) {
  cfg_.validate();
  auto model = std::make_shared<GlobalModel>();
  model->params = std::move(bootstrap);
  model->config = cfg_;
  current_ = std::move(model);
}

void Federation::register_node(const std::string& node_id) {
  if (node_id.empty()) throw DomainError("empty node id");
  staleness_.try_emplace(node_id, 0);
}

bool Federation::is_registered(const std::string& node_id) const {
  return staleness_.contains(node_id);
}

std::uint64_t Federation::staleness(const std::string& node_id) const {
  auto it = staleness_.find(node_id);
  if (it == staleness_.end()) throw DomainError("unknown node '" + node_id + "'");
  return it->second;
}

void Federation::submit(NodeUpdate update) {
  if (!is_registered(update.node_id)) {
    throw DomainError("node '" + update.node_id + "' is not registered");
  }
  if (update.params.schema != schema()) throw SchemaMismatch(schema(), update.params.schema);
  if (update.params.values.size() != current_->params.values.size()) {
    throw DomainError("parameter vector length does not match the active schema");
  }
  validate(update);
  std::string id = update.node_id;
  pending_.insert_or_assign(std::move(id), std::move(update));
}

RoundResult Federation::run_round(std::int64_t now_ms) {
  RoundResult result;
  result.participants = pending_.size();
  if (pending_.size() < cfg_.quorum) {
    result.status = RoundResult::Status::BelowQuorum;
    result.model = current_;
    return result;
  }

  std::vector<NodeUpdate> updates;
  updates.reserve(pending_.size());
  for (auto& [id, u] : pending_) {
    u.staleness = staleness_.at(id);
    updates.push_back(std::move(u));
  }
  pending_.clear();

  std::vector<double> weights;
  try {
    weights = aggregation_weights(updates, cfg_);
  } catch (const AggregationError&) {
    result.status = RoundResult::Status::NoUsableUpdates;
    result.model = current_;
    return result;
  }
  const ParamVector global = aggregate(updates, cfg_);
  CorrectedParams corrected = error_correct(global, updates, cfg_);

  auto next = std::make_shared<GlobalModel>();
  next->params = std::move(corrected.params);
  next->version = current_->version + 1;
  next->created_at_ms = now_ms;
  next->correction = corrected.outcome;
  next->config = cfg_;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    next->provenance.push_back({updates[i].node_id, weights[i], updates[i].usage_count,
                                updates[i].staleness, updates[i].mean_error});
  }

  for (auto& [id, t] : staleness_) {
    const bool took_part = std::any_of(updates.begin(), updates.end(),
                                       [&](const NodeUpdate& u) { return u.node_id == id; });
    t = took_part ? 0 : t + 1;
  }

  current_ = std::move(next);
  result.status = RoundResult::Status::Published;
  result.model = current_;
  return result;
}

}  // namespace ecmirror
