#pragma once

// Desk-scale experiment drivers behind the CLI: model comparison, federated
// rounds over simulated nodes, aggregation timing and glare reduction.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ecmirror/dataset.hpp"
#include "ecmirror/edge.hpp"
#include "ecmirror/ensemble.hpp"
#include "ecmirror/federation.hpp"
#include "ecmirror/scenario.hpp"

namespace ecmirror {

// comparison

struct CompareRow {
  std::string model;
  std::optional<double> r2;
  double rmse = 0.0;
  std::string error;  // non-empty when the model could not be fit
};

// GBT, MLP, ridge on raw features, stacking, k-NN (k=5), decision tree.
std::vector<CompareRow> run_compare(const Dataset& data, const StackOptions& options);

void write_compare_csv(std::ostream& out, const std::vector<CompareRow>& rows);
void write_compare_summary(std::ostream& out, const std::vector<CompareRow>& rows);

// federation

struct FederateOptions {
  std::size_t nodes = 5;
  std::size_t rounds = 10;
  FederationConfig federation;
  // Rows of the training split used for the initial model; the rest is dealt
  // into disjoint node shards, fed to the nodes as manual overrides.
  std::size_t bootstrap_samples = 80;
  StackOptions stack;
  NodeConfig node;
  std::uint64_t seed = 1;
  bool parallel = true;
};

struct FederateRound {
  std::size_t round = 0;
  std::string status;
  std::size_t participants = 0;
  std::uint64_t version = 0;
  std::uint64_t usage_total = 0;
  std::string correction;
  double train_r2 = 0.0;
  double test_r2 = 0.0;
  double test_rmse = 0.0;
};

struct FederateResult {
  FederateRound baseline;  // round 0: the initial model, before any round
  std::vector<FederateRound> rounds;
  std::vector<std::shared_ptr<const GlobalModel>> versions;
  std::vector<std::vector<NodeUpdate>> updates;  // per round, as submitted
};

FederateResult run_federate(const Dataset& data, const FederateOptions& options);

void write_federate_csv(std::ostream& out, const FederateResult& result);
void write_federate_summary(std::ostream& out, const FederateResult& result);

// aggregation timing

struct BenchOptions {
  std::vector<std::size_t> node_counts{2, 4, 8, 16, 32};
  std::size_t rounds_per_point = 200;
  std::size_t repeats = 5;       // best-of batches, to damp scheduler noise
  std::size_t param_dim = 404;   // 2-100-1 MLP plus meta-model
  FederationConfig federation;
  std::uint64_t seed = 1;
};

struct BenchRow {
  std::size_t nodes = 0;
  double wall_us = 0.0;  // mean per aggregation round
  double cpu_us = 0.0;   // process CPU time per round
  std::uint64_t checksum = 0;  // hash of the aggregated output
};

std::vector<BenchRow> run_bench_aggregation(const BenchOptions& options);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void write_bench_summary(std::ostream& out, const std::vector<BenchRow>& rows);

// glare reduction

struct GlareEvalOptions {
  std::size_t participants = 10;
  double tick_s = 0.5;
  NodeConfig node;
  std::uint64_t seed = 1;
};

struct GlareEvalRow {
  int scenario = 0;
  std::string name;
  double before_mean = 0.0;
  double after_mean = 0.0;
  int before_rating = 9;  // rating of the mean score
  int after_rating = 9;
  std::size_t samples = 0;
};

std::vector<GlareEvalRow> run_glare_eval(const EnsembleModel& model,
                                         const std::vector<GlareScenario>& scenarios,
                                         const GlareEvalOptions& options);

void write_glare_csv(std::ostream& out, const std::vector<GlareEvalRow>& rows);
void write_glare_summary(std::ostream& out, const std::vector<GlareEvalRow>& rows);

}  // namespace ecmirror
