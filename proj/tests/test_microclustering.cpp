#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "dieclust/microclustering.hpp"

using namespace dieclust;

namespace {

// Blocks of the given sizes; within distances near `in`, between near `out`.
DistanceMatrix blocks(const std::vector<int>& sizes, double in, double out, double noise,
                      std::uint32_t seed, std::vector<int>* truth = nullptr) {
  std::vector<int> label;
  for (std::size_t b = 0; b < sizes.size(); ++b)
    for (int k = 0; k < sizes[b]; ++k) label.push_back(static_cast<int>(b));
  const std::size_t n = label.size();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-noise, noise);
  std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      dense[i][j] = dense[j][i] = (label[i] == label[j] ? in : out) + u(rng);
  if (truth) *truth = label;
  return DistanceMatrix::from_dense(dense);
}

void enumerate(std::size_t n, std::vector<int>& cur, int maxl, std::vector<Partition>& out) {
  if (cur.size() == n) {
    out.emplace_back(cur);
    return;
  }
  for (int l = 0; l <= maxl + 1; ++l) {
    cur.push_back(l);
    enumerate(n, cur, std::max(maxl, l), out);
    cur.pop_back();
  }
}

std::vector<Partition> all_partitions(std::size_t n) {
  std::vector<Partition> out;
  std::vector<int> cur;
  enumerate(n, cur, -1, out);
  return out;
}

}  // namespace

TEST(Partition, Canonical) {
  const Partition p({7, 7, 3, 9, 3});
  EXPECT_EQ(p.labels(), (std::vector<int>{0, 0, 1, 2, 1}));
  EXPECT_EQ(p.num_clusters(), 3);
  EXPECT_EQ(p.cluster_sizes(), (std::vector<int>{2, 2, 1}));
  EXPECT_EQ(p, Partition({1, 1, 0, 5, 0}));
  EXPECT_EQ(Partition::singletons(3).num_clusters(), 3);
  EXPECT_EQ(Partition::single_cluster(3).num_clusters(), 1);
}

TEST(Partition, CsvRoundTrip) {
  const Partition p({0, 1, 0, 2});
  std::stringstream ss;
  write_partition_csv(ss, p, {"a", "b", "c", "d"});
  std::vector<std::string> ids;
  EXPECT_EQ(read_partition_csv(ss, ids), p);
  EXPECT_EQ(ids, (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(Partition, LabelCsvWithStrings) {
  std::stringstream ss("image_id,die\nx,obv-3\ny,obv-1\nz,obv-3\n");
  std::vector<std::string> ids;
  EXPECT_EQ(read_label_csv(ss, ids), (std::vector<int>{0, 1, 0}));
}

TEST(Partition, BellNumbers) {
  EXPECT_EQ(all_partitions(5).size(), 52u);
  EXPECT_EQ(all_partitions(8).size(), 4140u);
}

TEST(SizePrior, ShiftedNegativeBinomial) {
  PriorConfig cfg{5.0, 15.0, 1000};
  SizePrior prior(cfg);
  double total = 0, mean = 0, second = 0;
  for (int s = 1; s < 600; ++s) {
    const double p = std::exp(prior.log_pmf(s));
    total += p;
    mean += s * p;
    second += double(s) * s * p;
  }
  EXPECT_NEAR(total, 1.0, 1e-9);
  EXPECT_NEAR(mean, 5.0, 1e-6);
  EXPECT_NEAR(second - mean * mean, 15.0, 1e-4);
  EXPECT_EQ(prior.log_pmf(0), -std::numeric_limits<double>::infinity());
}

TEST(SizePrior, PoissonAndPointMassLimits) {
  SizePrior poisson(PriorConfig{3.0, 2.0, 50});
  EXPECT_NEAR(poisson.log_pmf(1), -2.0, 1e-12);
  EXPECT_NEAR(poisson.log_pmf(3), 2 * std::log(2.0) - 2.0 - std::log(2.0), 1e-12);
  SizePrior point(PriorConfig{1.0, 0.0, 50});
  EXPECT_EQ(point.log_pmf(1), 0.0);
  EXPECT_EQ(point.log_pmf(2), -std::numeric_limits<double>::infinity());
  EXPECT_THROW(PriorConfig({5.0, 2.0, 10}).validate(), std::invalid_argument);
}

TEST(GammaLogPdf, MatchesClosedForm) {
  EXPECT_NEAR(gamma_log_pdf(0.5, 1.0, 2.0), std::log(2.0) - 1.0, 1e-14);
  EXPECT_NEAR(gamma_log_pdf(2.0, 3.0, 1.5), 3 * std::log(1.5) - std::log(2.0) + 2 * std::log(2.0) - 3.0, 1e-14);
  EXPECT_EQ(gamma_log_pdf(0.0, 2.0, 1.0), gamma_log_pdf(kDistanceFloor, 2.0, 1.0));
}

TEST(Posterior, TwoPoints) {
  const auto d = DistanceMatrix::from_dense({{0, 0.3}, {0.3, 0}});
  const PriorConfig prior{5.0, 15.0, 25};
  const LikelihoodParams like;
  const SizePrior sp(prior);
  EXPECT_NEAR(log_partition_posterior(d, Partition({0, 0}), prior, like),
              sp.log_pmf(2) + gamma_log_pdf(0.3, like.cohesion_shape, like.cohesion_rate), 1e-12);
  EXPECT_NEAR(log_partition_posterior(d, Partition({0, 1}), prior, like),
              2 * sp.log_pmf(1) + gamma_log_pdf(0.3, like.repulsion_shape, like.repulsion_rate), 1e-12);
}

TEST(Posterior, SingletonsHaveNoCohesion) {
  const auto d = blocks({2, 2}, 0.2, 0.8, 0.05, 1);
  const PriorConfig prior;
  const LikelihoodParams like;
  double expected = 4 * SizePrior(prior).log_pmf(1);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) expected += gamma_log_pdf(d(i, j), like.repulsion_shape, like.repulsion_rate);
  EXPECT_NEAR(log_partition_posterior(d, Partition::singletons(4), prior, like), expected, 1e-12);
}

TEST(Posterior, RelabelInvariant) {
  const auto d = blocks({3, 2, 2}, 0.2, 0.8, 0.1, 2);
  const PriorConfig prior;
  const LikelihoodParams like;
  EXPECT_DOUBLE_EQ(log_partition_posterior(d, Partition({0, 0, 1, 1, 2, 2, 0}), prior, like),
                   log_partition_posterior(d, Partition({5, 5, 9, 9, 1, 1, 5}), prior, like));
}

TEST(KMedoids, KEqualsN) {
  const auto d = blocks({3, 3}, 0.1, 0.9, 0.05, 3);
  EXPECT_EQ(kmedoids_init(d, 6), Partition::singletons(6));
}

TEST(KMedoids, KEqualsOne) {
  const auto d = blocks({3, 3}, 0.1, 0.9, 0.05, 3);
  EXPECT_EQ(kmedoids_init(d, 1), Partition::single_cluster(6));
  EXPECT_THROW(kmedoids_init(d, 0), std::invalid_argument);
  EXPECT_THROW(kmedoids_init(d, 7), std::invalid_argument);
}

TEST(KMedoids, TwoBlocksRecovered) {
  std::vector<int> truth;
  const auto d = blocks({3, 3}, 0.1, 0.9, 0.0, 4, &truth);
  EXPECT_EQ(kmedoids_init(d, 2), Partition(truth));
}

TEST(EnforceCap, SplitsLargeClusters) {
  const auto d = blocks({7, 2}, 0.1, 0.9, 0.05, 5);
  const auto p = enforce_cluster_cap(d, Partition({0, 0, 0, 0, 0, 0, 0, 1, 1}), 3);
  for (int s : p.cluster_sizes()) EXPECT_LE(s, 3);
  EXPECT_EQ(p[7], p[8]);
}

TEST(EstimateLikelihood, ConstantWithinDistances) {
  const auto d = blocks({3, 3}, 0.2, 0.9, 0.0, 6);
  std::vector<int> truth{0, 0, 0, 1, 1, 1};
  const auto like = estimate_likelihood_params(d, Partition(truth));
  EXPECT_NEAR(like.cohesion_mean(), 0.2, 1e-12);
  EXPECT_EQ(like.cohesion_shape, 1e4);
}

TEST(EstimateLikelihood, TwoBlockMoments) {
  std::vector<int> truth;
  const auto d = blocks({10, 10}, 0.1, 0.9, 0.05, 7, &truth);
  const auto like = estimate_likelihood_params(d, Partition(truth));
  EXPECT_NEAR(like.cohesion_mean(), 0.1, 0.01);
  EXPECT_NEAR(like.repulsion_mean(), 0.9, 0.01);
}

TEST(EstimateLikelihood, DegenerateFallsBack) {
  const auto d = blocks({2, 2}, 0.1, 0.9, 0.05, 8);
  const auto like = estimate_likelihood_params(d, Partition::singletons(4));
  EXPECT_EQ(like.cohesion_shape, LikelihoodParams{}.cohesion_shape);
  EXPECT_EQ(like.repulsion_rate, LikelihoodParams{}.repulsion_rate);
}

TEST(EstimateLikelihood, SwappedPopulationsThrow) {
  const auto d = blocks({3, 3}, 0.9, 0.1, 0.02, 9);
  EXPECT_THROW(estimate_likelihood_params(d, Partition({0, 0, 0, 1, 1, 1})), LikelihoodOrderError);
}

TEST(Sampler, MatchesEnumerationAtFivePoints) {
  std::vector<std::vector<double>> dense{{0, .2, .3, .9, .8}, {.2, 0, .4, .7, .9}, {.3, .4, 0, .6, .8},
                                         {.9, .7, .6, 0, .3}, {.8, .9, .8, .3, 0}};
  const auto d = DistanceMatrix::from_dense(dense);
  const PriorConfig prior{2.5, 3.0, 3};
  const LikelihoodParams like{4, 4 / 0.3, 8, 8 / 0.8};
  std::map<std::vector<int>, double> exact;
  double z = 0;
  for (const auto& p : all_partitions(5)) {
    int mx = 0;
    for (int s : p.cluster_sizes()) mx = std::max(mx, s);
    const double w = mx > 3 ? 0.0 : std::exp(log_partition_posterior(d, p, prior, like));
    exact[p.labels()] = w;
    z += w;
  }
  ChaperonesSampler s(d, prior, like, Partition::singletons(5), 3);
  std::map<std::vector<int>, double> freq;
  const int steps = 300000;
  for (int t = 0; t < steps; ++t) {
    s.step();
    ASSERT_LE(s.max_cluster_size(), 3);
    freq[s.partition().labels()] += 1.0 / steps;
  }
  double tv = 0;
  for (const auto& [k, w] : exact) tv += std::abs(w / z - freq[k]);
  EXPECT_LT(tv / 2, 0.02);
  EXPECT_LT(s.consistency_error(), 1e-8);
}

TEST(Sampler, CapRejectsOversizedMerges) {
  // Everything wants to merge; the cap must hold regardless.
  const auto d = blocks({8}, 0.05, 0.05, 0.01, 10);
  const PriorConfig prior{5.0, 15.0, 2};
  const LikelihoodParams like{20, 200, 20, 20};
  ChaperonesSampler s(d, prior, like, Partition::singletons(8), 1);
  for (int t = 0; t < 20000; ++t) {
    s.step();
    ASSERT_LE(s.max_cluster_size(), 2);
  }
  EXPECT_GT(s.stats().capped.proposed, 0u);
  EXPECT_THROW(ChaperonesSampler(d, prior, like, Partition::single_cluster(8), 1), std::invalid_argument);
}

TEST(Sampler, DeterministicPerSeed) {
  const auto d = blocks({4, 4}, 0.3, 0.7, 0.2, 11);
  const PriorConfig prior;
  const LikelihoodParams like;
  ChaperonesSampler a(d, prior, like, Partition::singletons(8), 5), b(d, prior, like, Partition::singletons(8), 5);
  for (int t = 0; t < 5000; ++t) a.step(), b.step();
  EXPECT_EQ(a.partition(), b.partition());
  EXPECT_EQ(a.log_posterior(), b.log_posterior());
}

TEST(Mcmc, SingleItem) {
  const auto d = DistanceMatrix::from_dense({{0}});
  McmcConfig cfg;
  cfg.iterations = 100;
  cfg.burn_in = 10;
  const auto r = run_mcmc(d, PriorConfig{}, LikelihoodParams{}, Partition::singletons(1), cfg);
  EXPECT_TRUE(r.coclustering.values().empty());
  for (int k : r.cluster_trace) EXPECT_EQ(k, 1);
}

TEST(Mcmc, TwoBlockCoclustering) {
  std::vector<int> truth;
  const auto d = blocks({10, 10}, 0.1, 0.9, 0.05, 12, &truth);
  const PriorConfig prior{5.0, 15.0, 25};
  const auto like = estimate_likelihood_params(d, Partition(truth));
  McmcConfig cfg;
  cfg.iterations = 50000;
  cfg.burn_in = 25000;
  cfg.log_every = 0;
  const auto r = run_mcmc(d, prior, like, Partition::singletons(20), cfg);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = i + 1; j < 20; ++j) {
      if (truth[i] == truth[j])
        EXPECT_GT(r.coclustering(i, j), 0.95);
      else
        EXPECT_LT(r.coclustering(i, j), 0.05);
    }
  EXPECT_LE(r.max_cluster_size_seen, 25);
}

TEST(Mcmc, SeedsAgree) {
  const auto d = blocks({5, 4, 6, 5}, 0.3, 0.8, 0.2, 13);
  const PriorConfig prior{5.0, 15.0, 25};
  const LikelihoodParams like{6, 20, 12, 15};
  McmcConfig cfg;
  cfg.iterations = 200000;
  cfg.burn_in = 20000;
  cfg.log_every = 0;
  const auto a = run_mcmc(d, prior, like, Partition::singletons(20), cfg);
  cfg.seed = 99;
  const auto b = run_mcmc(d, prior, like, Partition::singletons(20), cfg);
  double dev = 0;
  for (std::size_t k = 0; k < a.coclustering.values().size(); ++k)
    dev = std::max(dev, std::abs(a.coclustering.values()[k] - b.coclustering.values()[k]));
  EXPECT_LT(dev, 0.05);
  EXPECT_NE(a.cluster_trace, b.cluster_trace);
}

TEST(Mcmc, ConfigValidation) {
  McmcConfig cfg;
  cfg.burn_in = cfg.iterations;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Coclustering, BinaryRoundTrip) {
  CoClusteringMatrix q(4);
  for (std::size_t k = 0; k < q.values().size(); ++k) q.values()[k] = 0.125 * static_cast<double>(k);
  std::stringstream ss;
  write_coclustering(ss, q);
  const auto back = read_coclustering(ss);
  EXPECT_EQ(back.values(), q.values());
  EXPECT_EQ(back(2, 2), 1.0);
}

TEST(Salso, RecoversExactPartition) {
  const Partition p({0, 1, 0, 2, 1, 1});
  CoClusteringMatrix q(6);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) q.upper(i, j) = p[i] == p[j];
  EXPECT_EQ(salso_point_estimate(q, 5, 1), p);
  EXPECT_EQ(binder_loss(q, p), 0.0);
}

TEST(Salso, AllZeroAndAllOne) {
  CoClusteringMatrix zero(5), one(5);
  for (auto& v : one.values()) v = 1.0;
  EXPECT_EQ(salso_point_estimate(zero, 3, 1), Partition::singletons(5));
  EXPECT_EQ(salso_point_estimate(one, 3, 1), Partition::single_cluster(5));
}

TEST(Salso, NeverWorseThanTruthOnNoisyQ) {
  std::mt19937 rng(14);
  std::uniform_real_distribution<double> u(0, 0.3);
  const Partition p({0, 0, 0, 1, 1, 2, 2, 2, 3, 4});
  CoClusteringMatrix q(10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = i + 1; j < 10; ++j) q.upper(i, j) = p[i] == p[j] ? 1 - u(rng) : u(rng);
  const auto est = salso_point_estimate(q, 10, 2);
  EXPECT_LE(binder_loss(q, est), binder_loss(q, p) + 1e-12);
  EXPECT_EQ(est, p);
}
