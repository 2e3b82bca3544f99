#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dieclust/distance_matrix.hpp"
#include "dieclust/gp_keypoints.hpp"
#include "dieclust/imaging.hpp"
#include "dieclust/metrics.hpp"
#include "dieclust/microclustering.hpp"
#include "dieclust/synth.hpp"

using namespace dieclust;

namespace {

std::vector<int> random_labels(std::mt19937& rng, int n, int k) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = static_cast<int>(rng() % static_cast<unsigned>(k));
  return v;
}

std::vector<int> relabel(const std::vector<int>& v, std::mt19937& rng) {
  std::vector<int> perm(64);
  std::iota(perm.begin(), perm.end(), 100);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> out;
  for (int x : v) out.push_back(perm[static_cast<std::size_t>(x)]);
  return out;
}

}  // namespace

TEST(Properties, PriorFieldParallelEqualsReference) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 10; ++t) {
    WeightField f;
    const int w = 20 + static_cast<int>(rng() % 30), h = 20 + static_cast<int>(rng() % 30);
    f.weights = Grid<double>(w, h);
    for (auto& v : f.weights.values()) v = u(rng) < 0.4 ? u(rng) : 0.0;
    if (t % 2) {
      f.masked = true;
      f.mask = {w / 2.0, h / 2.0, std::min(w, h) / 3.0};
    }
    KernelConfig cfg;
    cfg.lengthscale = 1.0 + 3 * u(rng);
    cfg.truncation_radius = 4 * cfg.lengthscale;
    const auto a = prior_variance_field(f, cfg), b = prior_variance_field_reference(f, cfg);
    for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_NEAR(a.values[i], b.values[i], 1e-9);
  }
}

TEST(Properties, PairScoringParallelEqualsSerial) {
  SyntheticBenchmarkSpec spec;
  spec.n_dies = 3;
  spec.fixed_sizes = {2, 2, 2};
  spec.image_size = 96;
  const auto bench = generate_synthetic_benchmark(spec, 3);
  MatchingConfig mc = MatchingConfig::for_height(96);
  std::vector<ImageFeatures> feats;
  for (const auto& im : bench.images) {
    const auto w = apply_circular_mask(laplacian_relief(im.image), 47.5, 47.5, 40);
    auto kps = select_keypoints(w, KernelConfig::for_height(96, 0.02, 80), im.id);
    feats.push_back(extract_features(im.image, kps, mc));
  }
  const auto a = score_all_pairs(feats, mc), b = score_all_pairs_serial(feats, mc);
  ASSERT_EQ(a.size(), 15u);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].i, b[k].i);
    EXPECT_EQ(a[k].j, b[k].j);
    EXPECT_EQ(a[k].score.n, b[k].score.n);
    EXPECT_EQ(a[k].score.p, b[k].score.p);
    EXPECT_EQ(a[k].score.degenerate, b[k].score.degenerate);
  }
}

TEST(Properties, MetricsInvariantUnderRelabeling) {
  std::mt19937 rng(2);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng() % 40);
    const auto l = random_labels(rng, n, 1 + static_cast<int>(rng() % 8));
    const auto c = random_labels(rng, n, 1 + static_cast<int>(rng() % 8));
    const auto l2 = relabel(l, rng), c2 = relabel(c, rng);
    EXPECT_NEAR(nmi(l, c), nmi(l2, c2), 1e-12);
    EXPECT_NEAR(ari(l, c), ari(l2, c2), 1e-12);
    EXPECT_NEAR(nmi(l, c), nmi(c, l), 1e-12);
    EXPECT_NEAR(ari(l, c), ari(c, l), 1e-12);
    const double v = nmi(l, c);
    EXPECT_GE(v, -1e-12);
    EXPECT_LE(v, 1 + 1e-12);
    const auto s = weighted_summary(class_report(l, c));
    EXPECT_GE(s.sensitivity, 0.0);
    EXPECT_LE(s.sensitivity, 1.0);
    EXPECT_GE(s.fdr, 0.0);
    EXPECT_LT(s.fdr, 1.0);
  }
}

TEST(Properties, PartitionCanonicalization) {
  std::mt19937 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto v = random_labels(rng, 1 + static_cast<int>(rng() % 20), 6);
    const Partition p(v), q(relabel(v, rng));
    EXPECT_EQ(p, q);
    EXPECT_EQ(Partition(p.labels()), p);
    int total = 0;
    for (auto [size, count] : frequency_chart(p)) total += size * count;
    EXPECT_EQ(total, static_cast<int>(v.size()));
  }
}

TEST(Properties, AssembledDistancesBounded) {
  std::mt19937 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 3 + rng() % 10;
    std::vector<ScoredPair> s;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        PairScore ps;
        if (rng() % 4) ps = {3 + static_cast<int>(rng() % 100), 1e-6 + (rng() % 1000) / 1000.0, 0.0, false};
        s.push_back({i, j, ps});
      }
    s[0].score = {10, 0.1, 0.0, false};
    std::vector<std::string> ids(n);
    const auto d = assemble_distance_matrix(s, n, ids, 1e-4);
    for (double v : d.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 2.0);
    }
  }
}

TEST(Properties, ProcrustesRigidInvariance) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 3 + rng() % 30;
    std::vector<Point2> a(n), b(n), a2, b2;
    for (std::size_t i = 0; i < n; ++i) a[i] = {u(rng), u(rng)}, b[i] = {u(rng), u(rng)};
    const double th = u(rng) * std::numbers::pi, tx = u(rng), ty = u(rng);
    auto move = [&](Point2 p) {
      return Point2{std::cos(th) * p.x - std::sin(th) * p.y + tx, std::sin(th) * p.x + std::cos(th) * p.y + ty};
    };
    for (auto p : a) a2.push_back(move(p));
    for (auto p : b) b2.push_back(move(p));
    const double p1 = procrustes_distance(a, b).distance;
    EXPECT_NEAR(procrustes_distance(a2, b).distance, p1, 1e-9);
    EXPECT_NEAR(procrustes_distance(a, b2).distance, p1, 1e-9);
    EXPECT_NEAR(procrustes_distance(b, a).distance, p1, 1e-9);
  }
}

TEST(Properties, SamplerIncrementalPosteriorStaysExact) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> u(0.05, 1.2);
  for (int t = 0; t < 5; ++t) {
    const std::size_t n = 6 + rng() % 20;
    std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) dense[i][j] = dense[j][i] = u(rng);
    const auto d = DistanceMatrix::from_dense(dense);
    const PriorConfig prior{3.0, 4.0, 5};
    const LikelihoodParams like{3, 6, 6, 7};
    ChaperonesSampler s(d, prior, like, Partition::singletons(n), rng());
    for (int k = 0; k < 20000; ++k) {
      s.step();
      ASSERT_LE(s.max_cluster_size(), 5);
    }
    EXPECT_LT(s.consistency_error(), 1e-8);
    EXPECT_NEAR(s.log_posterior(), log_partition_posterior(d, s.partition(), prior, like), 1e-8);
  }
}

TEST(Properties, VerificationBoundExcessOverOracleFactors) {
  // verification - oracle = -(Kt - K)(Kt - 3K + 1) / 2, so it is at least the
  // oracle exactly on K <= Kt <= 3K - 1 and meets it at both ends.
  for (std::int64_t k = 1; k < 60; ++k)
    for (std::int64_t kt = k; kt < 200; ++kt) {
      const auto b = verification_bound(k, kt);
      const std::int64_t twice = -(kt - k) * (kt - 3 * k + 1);
      EXPECT_EQ(2 * (b.verification - b.oracle), twice + (twice % 2 != 0 && twice > 0 ? 1 : 0))
          << k << " " << kt;
      if (kt <= 3 * k - 1) EXPECT_GE(b.verification, b.oracle);
      if (kt == k || kt == 3 * k - 1) EXPECT_EQ(b.verification, b.oracle);
    }
}
