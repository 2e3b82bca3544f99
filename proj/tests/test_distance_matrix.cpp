#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "dieclust/distance_matrix.hpp"

using namespace dieclust;

namespace {

PairScore ok(int n, double p) { return {n, p, 0.0, false}; }
PairScore degenerate() { return {}; }

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("img" + std::to_string(i));
  return v;
}

}  // namespace

TEST(PairIndex, RowMajorUpperTriangle) {
  std::size_t k = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) EXPECT_EQ(pair_index(6, i, j), k++);
  EXPECT_EQ(pair_count(6), 15u);
}

TEST(Assemble, AnchorsAndDegenerate) {
  // 3 images: (0,1) best on both statistics, (1,2) degenerate.
  std::vector<ScoredPair> s{{0, 1, ok(40, 0.01)}, {0, 2, ok(4, 0.5)}, {1, 2, degenerate()}};
  const auto d = assemble_distance_matrix(s, 3, names(3), 1e-4);
  EXPECT_DOUBLE_EQ(d(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d(1, 2), 2.0);
  EXPECT_DOUBLE_EQ(d(2, 1), 2.0);
  EXPECT_EQ(d(1, 1), 0.0);
  // Degenerate p is substituted by the largest non-degenerate p.
  EXPECT_DOUBLE_EQ(d.scores()[pair_index(3, 1, 2)].p, 0.5);
  const double expected = (0.25 - 1.0 / 40) / (1.0 - 1.0 / 40) + 1.0;
  EXPECT_NEAR(d(0, 2), expected, 1e-12);
  EXPECT_EQ(d.ids()[2], "img2");
}

TEST(Assemble, FloorAppliesBeforeLog) {
  std::vector<ScoredPair> s{{0, 1, ok(10, 0.0)}, {0, 2, ok(10, 1e-9)}, {1, 2, ok(10, 0.1)}};
  const auto d = assemble_distance_matrix(s, 3, names(3), 1e-4);
  EXPECT_EQ(d(0, 1), d(0, 2));
  EXPECT_NEAR(d.rescale().log_p_min, std::log(1e-4), 1e-12);
  EXPECT_DOUBLE_EQ(d(1, 2), 1.0);
}

TEST(Assemble, AllDegenerateIsAnError) {
  std::vector<ScoredPair> s{{0, 1, degenerate()}, {0, 2, degenerate()}, {1, 2, degenerate()}};
  EXPECT_THROW(assemble_distance_matrix(s, 3, names(3), 1e-4), DegenerateInputError);
}

TEST(Assemble, RejectsMissingAndDuplicatePairs) {
  std::vector<ScoredPair> s{{0, 1, ok(5, 0.1)}, {0, 1, ok(5, 0.1)}, {1, 2, ok(5, 0.1)}};
  EXPECT_THROW(assemble_distance_matrix(s, 3, names(3), 1e-4), std::invalid_argument);
  s.pop_back();
  EXPECT_THROW(assemble_distance_matrix(s, 3, names(3), 1e-4), std::invalid_argument);
}

TEST(Assemble, PermutationInvariant) {
  const std::size_t n = 7;
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> un(0, 40);
  std::uniform_real_distribution<double> up(0.001, 1.0);
  std::vector<std::vector<PairScore>> table(n, std::vector<PairScore>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const int k = un(rng);
      table[i][j] = table[j][i] = k <= 2 ? degenerate() : ok(k, up(rng));
    }
  std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  std::vector<ScoredPair> a, b;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      a.push_back({i, j, table[i][j]});
      b.push_back({i, j, table[perm[i]][perm[j]]});
    }
  const auto da = assemble_distance_matrix(a, n, names(n), 1e-4);
  const auto db = assemble_distance_matrix(b, n, names(n), 1e-4);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) EXPECT_DOUBLE_EQ(db(i, j), da(perm[i], perm[j]));
}

TEST(DistanceMatrixIo, BinaryRoundTrip) {
  std::vector<ScoredPair> s{{0, 1, ok(40, 0.01)}, {0, 2, ok(4, 0.5)}, {1, 2, degenerate()}};
  const auto d = assemble_distance_matrix(s, 3, {"a", "b", "c"}, 1e-4);
  std::stringstream ss;
  write_distance_matrix(ss, d);
  const auto back = read_distance_matrix(ss);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back.ids(), d.ids());
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_FLOAT_EQ(static_cast<float>(back.values()[k]), static_cast<float>(d.values()[k]));
    EXPECT_EQ(back.scores()[k].n, d.scores()[k].n);
    EXPECT_EQ(back.scores()[k].degenerate, d.scores()[k].degenerate);
  }
}

TEST(DistanceMatrixIo, BadMagic) {
  std::stringstream ss("NOPE0000");
  EXPECT_THROW(read_distance_matrix(ss), FormatError);
}

TEST(DistanceMatrixIo, Csv) {
  std::vector<ScoredPair> s{{0, 1, ok(40, 0.01)}, {0, 2, ok(4, 0.5)}, {1, 2, degenerate()}};
  const auto d = assemble_distance_matrix(s, 3, {"a", "b", "c"}, 1e-4);
  std::stringstream ss;
  write_distance_csv(ss, d);
  std::string line;
  std::getline(ss, line);
  EXPECT_EQ(line, "i,j,id_i,id_j,d,n,p,rotation_deg,degenerate");
  int rows = 0;
  while (std::getline(ss, line)) rows += !line.empty();
  EXPECT_EQ(rows, 3);
}

TEST(DistanceMatrix, FromDense) {
  const auto d = DistanceMatrix::from_dense({{0, 1, 2}, {1, 0, 3}, {2, 3, 0}});
  EXPECT_EQ(d(2, 1), 3.0);
  EXPECT_EQ(d(0, 2), 2.0);
  EXPECT_THROW(DistanceMatrix::from_dense({{0, 1}, {1}}), std::invalid_argument);
}
