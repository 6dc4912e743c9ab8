#pragma once

// Usage- and recency-weighted parameter aggregation with error-weighted
// correction, plus serial round orchestration.
//
//   global    = sum_i decay^t_i * u_i * theta_i / sum_i decay^t_i * u_i
//   corrected = global + correction * sum_i e_i * theta_i / sum_i e_i

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ecmirror/ensemble.hpp"

namespace ecmirror {

// Federable parameters: MLP weights/biases then meta coefficients and
// intercept. The GBT forest is not federated.
struct ParamVector {
  std::uint64_t schema = 0;
  std::vector<double> values;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

// FNV-1a hash of the architecture descriptor.
std::uint64_t param_schema(int inputs, int hidden, int meta_inputs);
std::uint64_t param_schema(const EnsembleModel& model);
std::size_t param_count(int inputs, int hidden, int meta_inputs);

ParamVector extract_params(const EnsembleModel& model);
// Replaces MLP and meta parameters; throws SchemaMismatch.
EnsembleModel apply_params(EnsembleModel model, const ParamVector& params);

struct NodeUpdate {
  std::string node_id;
  ParamVector params;
  std::uint64_t usage_count = 0;  // manual adjustments since last upload
  std::uint64_t staleness = 0;    // rounds since the node's last update
  double mean_error = 0.0;        // MAE on the node's local holdout, volts
};

// Throws DomainError on empty id, non-finite parameters or a bad mean error.
void validate(const NodeUpdate& update);

struct FederationConfig {
  double decay = 0.9;       // in (0, 1]
  double correction = 0.1;  // >= 0
  std::size_t quorum = 1;

  void validate() const;
};

class AggregationError : public std::runtime_error {
 public:
  enum class Kind { Empty, NoUsableUpdates };
  AggregationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Normalized aggregation weights, indexed like `updates`.
std::vector<double> aggregation_weights(std::span<const NodeUpdate> updates,
                                        const FederationConfig& cfg);

// Sums run in node_id order so the result does not depend on input order.
ParamVector aggregate(std::span<const NodeUpdate> updates, const FederationConfig& cfg);

enum class CorrectionOutcome { Applied, Disabled, ZeroErrorCohort };
std::string_view to_string(CorrectionOutcome outcome);
CorrectionOutcome correction_outcome_from_string(std::string_view name);

struct CorrectedParams {
  ParamVector params;
  CorrectionOutcome outcome = CorrectionOutcome::Applied;
};

CorrectedParams error_correct(const ParamVector& global, std::span<const NodeUpdate> updates,
                              const FederationConfig& cfg);

struct ProvenanceEntry {
  std::string node_id;
  double weight = 0.0;
  std::uint64_t usage_count = 0;
  std::uint64_t staleness = 0;
  double mean_error = 0.0;
};

struct GlobalModel {
  ParamVector params;
  std::uint64_t version = 0;  // 0 is the bootstrap configuration
  std::int64_t created_at_ms = 0;
  std::vector<ProvenanceEntry> provenance;
  CorrectionOutcome correction = CorrectionOutcome::Disabled;
  FederationConfig config;
};

struct RoundResult {
  enum class Status { Published, BelowQuorum, NoUsableUpdates };
  Status status = Status::BelowQuorum;
  std::size_t participants = 0;
  std::shared_ptr<const GlobalModel> model;  // current model after the round
};

std::string_view to_string(RoundResult::Status status);

// Single-writer round state machine: registry staleness, pending updates,
// published versions. Not thread-safe; callers serialize access.
class Federation {
 public:
  Federation(FederationConfig cfg, ParamVector bootstrap);

  const FederationConfig& config() const { return cfg_; }
  std::uint64_t schema() const { return current_->params.schema; }

  // Idempotent. New nodes start with staleness 0.
  void register_node(const std::string& node_id);
  bool is_registered(const std::string& node_id) const;
  std::size_t node_count() const { return staleness_.size(); }
  std::uint64_t staleness(const std::string& node_id) const;

  // Last write wins per node within a round. Throws DomainError for
  // unregistered nodes, SchemaMismatch for foreign architectures.
  void submit(NodeUpdate update);
  std::size_t pending() const { return pending_.size(); }
  const std::map<std::string, NodeUpdate>& pending_updates() const { return pending_; }

  // Aggregates the pending updates using registry staleness as t_i. Below
  // quorum the round is skipped and pending updates are kept.
  RoundResult run_round(std::int64_t now_ms);

  std::shared_ptr<const GlobalModel> current() const { return current_; }

 private:
  FederationConfig cfg_;
  std::map<std::string, std::uint64_t> staleness_;
  std::map<std::string, NodeUpdate> pending_;
  std::shared_ptr<const GlobalModel> current_;
};

}  // namespace ecmirror
