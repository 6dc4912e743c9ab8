#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ecmirror/dataset.hpp"
#include "ecmirror/errors.hpp"
#include "ecmirror/federation.hpp"

using namespace ecmirror;

namespace {

constexpr std::uint64_t kSchema = 77;

NodeUpdate update(std::string id, std::vector<double> theta, std::uint64_t usage,
                  std::uint64_t staleness = 0, double err = 0.1) {
  return {std::move(id), {kSchema, std::move(theta)}, usage, staleness, err};
}

// Straight transcription of the weighted mean, in input order.
std::vector<double> aggregate_oracle(const std::vector<NodeUpdate>& ups, double decay) {
  long double total = 0;
  for (const auto& u : ups) total += std::pow((long double)decay, (long double)u.staleness) * u.usage_count;
  std::vector<double> out(ups.front().params.values.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    long double s = 0;
    for (const auto& u : ups) {
      s += std::pow((long double)decay, (long double)u.staleness) * u.usage_count *
           u.params.values[j];
    }
    out[j] = static_cast<double>(s / total);
  }
  return out;
}

std::vector<NodeUpdate> random_cohort(std::mt19937_64& rng, std::size_t nodes, std::size_t dim) {
  std::uniform_real_distribution<double> v(-3.0, 3.0);
  std::uniform_int_distribution<int> usage(1, 50), stale(0, 6);
  std::vector<NodeUpdate> out;
  for (std::size_t i = 0; i < nodes; ++i) {
    std::vector<double> theta(dim);
    for (auto& x : theta) x = v(rng);
    out.push_back(update("n" + std::to_string(i), theta, usage(rng), stale(rng),
                         std::abs(v(rng))));
  }
  return out;
}

}  // namespace

TEST(Aggregate, HandCase) {
  const std::vector<NodeUpdate> ups{update("a", {1.0}, 2, 0), update("b", {0.0}, 1, 1)};
  const auto g = aggregate(ups, FederationConfig{});
  EXPECT_NEAR(g.values[0], 2.0 / 2.9, 1e-15);
  EXPECT_NEAR(g.values[0], 0.68966, 5e-6);
}

TEST(Aggregate, MatchesOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ups = random_cohort(rng, 1 + rng() % 10, 1 + rng() % 300);
    const auto g = aggregate(ups, FederationConfig{});
    const auto o = aggregate_oracle(ups, 0.9);
    for (std::size_t j = 0; j < o.size(); ++j) ASSERT_NEAR(g.values[j], o[j], 1e-12);
  }
}

TEST(Aggregate, ConvexCombination) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    const auto ups = random_cohort(rng, 2 + rng() % 8, 20);
    const auto w = aggregation_weights(ups, FederationConfig{});
    double sum = 0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    const auto g = aggregate(ups, FederationConfig{});
    for (std::size_t j = 0; j < 20; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto& u : ups) {
        lo = std::min(lo, u.params.values[j]);
        hi = std::max(hi, u.params.values[j]);
      }
      EXPECT_GE(g.values[j], lo - 1e-12);
      EXPECT_LE(g.values[j], hi + 1e-12);
    }
  }
}

TEST(Aggregate, UsageScaleInvariant) {
  std::mt19937_64 rng(23);
  auto ups = random_cohort(rng, 5, 30);
  const auto g = aggregate(ups, FederationConfig{});
  for (auto& u : ups) u.usage_count *= 7;
  const auto g7 = aggregate(ups, FederationConfig{});
  for (std::size_t j = 0; j < 30; ++j) EXPECT_NEAR(g.values[j], g7.values[j], 1e-12);
}

TEST(Aggregate, OrderIndependentBitwise) {
  std::mt19937_64 rng(24);
  auto ups = random_cohort(rng, 8, 50);
  const auto g = aggregate(ups, FederationConfig{});
  for (int k = 0; k < 10; ++k) {
    std::shuffle(ups.begin(), ups.end(), rng);
    EXPECT_EQ(aggregate(ups, FederationConfig{}), g);
  }
}

TEST(Aggregate, StaleUpdatesCountLess) {
  const std::vector<NodeUpdate> fresh{update("a", {1.0}, 1, 0), update("b", {0.0}, 1, 0)};
  const std::vector<NodeUpdate> stale{update("a", {1.0}, 1, 0), update("b", {0.0}, 1, 3)};
  EXPECT_NEAR(aggregate(fresh, FederationConfig{}).values[0], 0.5, 1e-15);
  EXPECT_NEAR(aggregate(stale, FederationConfig{}).values[0], 1.0 / (1.0 + 0.729), 1e-15);
  FederationConfig no_decay;
  no_decay.decay = 1.0;
  EXPECT_NEAR(aggregate(stale, no_decay).values[0], 0.5, 1e-15);
}

TEST(Aggregate, Errors) {
  EXPECT_THROW(aggregate({}, FederationConfig{}), AggregationError);
  const std::vector<NodeUpdate> zero{update("a", {1.0}, 0), update("b", {2.0}, 0)};
  try {
    aggregate(zero, FederationConfig{});
    FAIL();
  } catch (const AggregationError& e) {
    EXPECT_EQ(e.kind(), AggregationError::Kind::NoUsableUpdates);
  }
  std::vector<NodeUpdate> mixed{update("a", {1.0}, 1), update("b", {2.0}, 1)};
  mixed[1].params.schema = kSchema + 1;
  EXPECT_THROW(aggregate(mixed, FederationConfig{}), SchemaMismatch);
}

TEST(Correct, HandCase) {
  const std::vector<NodeUpdate> ups{update("a", {1.0}, 1, 0, 0.2), update("b", {0.0}, 1, 0, 0.2)};
  const ParamVector global{kSchema, {0.5}};
  const auto c = error_correct(global, ups, FederationConfig{});
  EXPECT_EQ(c.outcome, CorrectionOutcome::Applied);
  EXPECT_NEAR(c.params.values[0], 0.55, 1e-15);
}

TEST(Correct, ErrorWeighted) {
  const std::vector<NodeUpdate> ups{update("a", {1.0}, 1, 0, 0.3), update("b", {0.0}, 1, 0, 0.1)};
  const auto c = error_correct({kSchema, {0.0}}, ups, FederationConfig{});
  EXPECT_NEAR(c.params.values[0], 0.1 * 0.75, 1e-15);
}

TEST(Correct, AlphaZeroIsIdentity) {
  std::mt19937_64 rng(25);
  const auto ups = random_cohort(rng, 4, 40);
  FederationConfig cfg;
  cfg.correction = 0.0;
  const auto g = aggregate(ups, cfg);
  const auto c = error_correct(g, ups, cfg);
  EXPECT_EQ(c.outcome, CorrectionOutcome::Disabled);
  EXPECT_EQ(c.params, g);
}

TEST(Correct, ZeroErrorCohortLeavesGlobal) {
  const std::vector<NodeUpdate> ups{update("a", {1.0}, 1, 0, 0.0), update("b", {3.0}, 1, 0, 0.0)};
  const ParamVector g{kSchema, {2.0}};
  const auto c = error_correct(g, ups, FederationConfig{});
  EXPECT_EQ(c.outcome, CorrectionOutcome::ZeroErrorCohort);
  EXPECT_EQ(c.params, g);
}

TEST(Correct, LinearInAlpha) {
  std::mt19937_64 rng(26);
  const auto ups = random_cohort(rng, 5, 25);
  const ParamVector g = aggregate(ups, FederationConfig{});
  FederationConfig a1, a2;
  a1.correction = 0.1;
  a2.correction = 0.2;
  const auto c1 = error_correct(g, ups, a1);
  const auto c2 = error_correct(g, ups, a2);
  for (std::size_t j = 0; j < 25; ++j) {
    EXPECT_NEAR(c2.params.values[j] - g.values[j], 2.0 * (c1.params.values[j] - g.values[j]),
                1e-12);
  }
}

TEST(FederationConfig, Validation) {
  FederationConfig c;
  EXPECT_NO_THROW(c.validate());
  c.decay = 0.0;
  EXPECT_THROW(c.validate(), DomainError);
  c.decay = 1.1;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.correction = -0.1;
  EXPECT_THROW(c.validate(), DomainError);
  c = {};
  c.quorum = 0;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Federation, QuorumKeepsPending) {
  FederationConfig cfg;
  cfg.quorum = 2;
  Federation fed(cfg, {kSchema, {0.0}});
  fed.register_node("a");
  fed.register_node("b");
  fed.submit(update("a", {1.0}, 1));
  auto r = fed.run_round(10);
  EXPECT_EQ(r.status, RoundResult::Status::BelowQuorum);
  EXPECT_EQ(fed.pending(), 1u);
  EXPECT_EQ(fed.current()->version, 0u);
  fed.submit(update("b", {3.0}, 1));
  r = fed.run_round(20);
  EXPECT_EQ(r.status, RoundResult::Status::Published);
  EXPECT_EQ(r.model->version, 1u);
  EXPECT_EQ(fed.pending(), 0u);
  EXPECT_EQ(r.model->provenance.size(), 2u);
}

TEST(Federation, SingleNodeWithoutCorrectionIsIdentity) {
  FederationConfig cfg;
  cfg.correction = 0.0;
  Federation fed(cfg, {kSchema, {0.0, 0.0}});
  fed.register_node("solo");
  fed.submit(update("solo", {1.25, -7.5}, 4));
  const auto r = fed.run_round(1);
  EXPECT_EQ(r.model->params.values, (std::vector<double>{1.25, -7.5}));
  EXPECT_EQ(r.model->provenance[0].weight, 1.0);
}

TEST(Federation, StalenessCountsMissedRounds) {
  Federation fed(FederationConfig{}, {kSchema, {0.0}});
  fed.register_node("a");
  fed.register_node("b");
  for (int k = 0; k < 3; ++k) {
    fed.submit(update("a", {1.0}, 1));
    fed.run_round(k);
  }
  EXPECT_EQ(fed.staleness("a"), 0u);
  EXPECT_EQ(fed.staleness("b"), 3u);
  fed.submit(update("a", {1.0}, 1));
  fed.submit(update("b", {0.0}, 1, /*ignored client claim*/ 0));
  const auto r = fed.run_round(9);
  const auto& prov = r.model->provenance;
  ASSERT_EQ(prov.size(), 2u);
  EXPECT_EQ(prov[1].node_id, "b");
  EXPECT_EQ(prov[1].staleness, 3u);
  EXPECT_NEAR(prov[1].weight, 0.729 / 1.729, 1e-15);
  EXPECT_EQ(fed.staleness("b"), 0u);
}

TEST(Federation, LastWriteWins) {
  FederationConfig cfg;
  cfg.correction = 0.0;
  Federation fed(cfg, {kSchema, {0.0}});
  fed.register_node("a");
  fed.submit(update("a", {1.0}, 1));
  fed.submit(update("a", {5.0}, 1));
  EXPECT_EQ(fed.pending(), 1u);
  EXPECT_EQ(fed.run_round(1).model->params.values[0], 5.0);
}

TEST(Federation, RejectsBadSubmissions) {
  Federation fed(FederationConfig{}, {kSchema, {0.0}});
  EXPECT_THROW(fed.submit(update("ghost", {1.0}, 1)), DomainError);
  fed.register_node("a");
  fed.register_node("a");
  EXPECT_EQ(fed.node_count(), 1u);
  auto foreign = update("a", {1.0}, 1);
  foreign.params.schema = 5;
  EXPECT_THROW(fed.submit(foreign), SchemaMismatch);
  EXPECT_THROW(fed.submit(update("a", {1.0, 2.0}, 1)), DomainError);
  EXPECT_THROW(fed.submit(update("a", {NAN}, 1)), DomainError);
  EXPECT_EQ(fed.pending(), 0u);
}

TEST(Federation, ZeroUsageRoundPublishesNothing) {
  Federation fed(FederationConfig{}, {kSchema, {0.0}});
  fed.register_node("a");
  fed.submit(update("a", {1.0}, 0));
  const auto r = fed.run_round(1);
  EXPECT_EQ(r.status, RoundResult::Status::NoUsableUpdates);
  EXPECT_EQ(fed.current()->version, 0u);
}

TEST(Params, ExtractApplyRoundTrip) {
  SyntheticDatasetSpec spec;
  spec.samples = 40;
  StackOptions opt;
  opt.mlp.max_epochs = 20;
  const EnsembleModel m = stack_fit(generate_dataset(spec).train, opt);
  const ParamVector p = extract_params(m);
  EXPECT_EQ(p.values.size(), param_count(2, 100, 2));
  EXPECT_EQ(p.values.size(), 404u);
  EXPECT_EQ(p.schema, param_schema(2, 100, 2));
  EXPECT_NE(param_schema(2, 100, 2), param_schema(2, 50, 2));
  EXPECT_EQ(extract_params(apply_params(m, p)), p);

  ParamVector shifted = p;
  for (auto& v : shifted.values) v += 0.5;
  EXPECT_EQ(extract_params(apply_params(m, shifted)), shifted);

  shifted.schema ^= 1;
  EXPECT_THROW(apply_params(m, shifted), SchemaMismatch);
}
