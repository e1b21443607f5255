#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "curate/compression.hpp"
#include "curate/linalg.hpp"
#include "test_util.hpp"

namespace curate {
namespace {

Matrix random_matrix(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  Matrix m(n, d);
  for (auto& x : m.data()) x = testing::random_vector(1, rng)[0];
  return m;
}

// Anisotropic data so the spectrum has clear gaps.
Matrix anisotropic(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  Matrix m = random_matrix(n, d, rng);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) m(i, j) = m(i, j) * (1.0 + 2.0 * static_cast<double>(d - j)) + 0.3 * j;
  return m;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

TEST(Pca, ComponentsAreOrthonormal) {
  std::mt19937_64 rng(1);
  for (auto [n, d, k] : {std::tuple{50, 10, 4}, std::tuple{8, 30, 6}, std::tuple{200, 64, 32}}) {
    const auto pca = fit_pca(anisotropic(n, d, rng), k);
    for (std::size_t a = 0; a < static_cast<std::size_t>(k); ++a)
      for (std::size_t b = 0; b < static_cast<std::size_t>(k); ++b) {
        EXPECT_NEAR(dot(pca.components.row(a), pca.components.row(b)), a == b ? 1.0 : 0.0, 1e-6);
      }
    for (std::size_t r = 1; r < pca.explained_variance.size(); ++r) {
      EXPECT_LE(pca.explained_variance[r], pca.explained_variance[r - 1] + 1e-9);
    }
  }
}

TEST(Pca, MatchesDenseEigendecomposition) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 4 + static_cast<std::size_t>(trial % 13);
    const std::size_t n = 3 * d;
    const std::size_t k = 1 + static_cast<std::size_t>(trial) % (d - 1);
    const auto data = anisotropic(n, d, rng);
    const auto pca = fit_pca(data, k);

    Eigen::MatrixXd x = to_eigen(data);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::MatrixXd cov = x.transpose() * x / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const Eigen::VectorXd ev = es.eigenvalues().reverse();  // descending

    for (std::size_t r = 0; r < k; ++r) {
      EXPECT_NEAR(pca.explained_variance[r], ev(r), 1e-8 * std::max(1.0, ev(0)));
    }
    // Mean squared reconstruction error * n/(n-1) equals the trailing eigenvalue sum.
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto back = pca.reconstruct(pca.project(data.row(i)));
      for (std::size_t j = 0; j < d; ++j) err += std::pow(back[j] - data(i, j), 2);
    }
    err /= static_cast<double>(n - 1);
    const double trailing = ev.tail(d - k).sum();
    EXPECT_NEAR(err, trailing, 1e-6 * std::max(trailing, 1e-12)) << "d=" << d << " k=" << k;
  }
}

TEST(Pca, RecoversPlaneInThreeDimensions) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> big(0.0, 5.0), tiny(0.0, 1e-4);
  Matrix m(300, 3);
  for (std::size_t i = 0; i < 300; ++i) {
    m(i, 0) = big(rng);
    m(i, 1) = big(rng);
    m(i, 2) = tiny(rng);
  }
  const auto pca = fit_pca(m, 2);
  EXPECT_NEAR(std::abs(pca.components(0, 2)), 0.0, 1e-4);
  EXPECT_NEAR(std::abs(pca.components(1, 2)), 0.0, 1e-4);
  for (std::size_t i = 0; i < 300; ++i) {
    const auto back = pca.reconstruct(pca.project(std::as_const(m).row(i)));
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back[j], m(i, j), 1e-3);
  }
}

TEST(Pca, GramRouteAgreesWithCovarianceRoute) {
  // n < d takes the Gram path; its reconstruction must be lossless at k = n - 1.
  std::mt19937_64 rng(4);
  const auto data = random_matrix(6, 40, rng);
  const auto pca = fit_pca(data, 5);
  for (std::size_t i = 0; i < 6; ++i) {
    const auto back = pca.reconstruct(pca.project(data.row(i)));
    for (std::size_t j = 0; j < 40; ++j) EXPECT_NEAR(back[j], data(i, j), 1e-8);
  }
}

TEST(Pca, Errors) {
  std::mt19937_64 rng(5);
  EXPECT_THROW(fit_pca(random_matrix(1, 4, rng), 2), Error);
  EXPECT_THROW(fit_pca(random_matrix(10, 4, rng), 5), Error);
  EXPECT_THROW(fit_pca(random_matrix(10, 4, rng), 0), Error);
}

TEST(Quantize, ErrorWithinHalfStep) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 20; ++t) {
    auto m = random_matrix(100, 17, rng);
    for (std::size_t i = 0; i < 100; ++i) m(i, 3) = 2.5;  // constant column
    const auto q = quantize_8bit(m);
    const auto back = dequantize(q);
    for (std::size_t i = 0; i < 100; ++i)
      for (std::size_t j = 0; j < 17; ++j) {
        EXPECT_LE(std::abs(back(i, j) - m(i, j)), q.scale[j] / 2 + 1e-12);
      }
    EXPECT_EQ(q.scale[3], 0.0);
    EXPECT_EQ(back(0, 3), 2.5);
  }
}

TEST(Quantize, EndpointsMapToExtremeCodes) {
  Matrix m(3, 1);
  m(0, 0) = -1.0;
  m(1, 0) = 0.0;
  m(2, 0) = 1.0;
  const auto q = quantize_8bit(m);
  EXPECT_EQ(q.code(0, 0), 0);
  EXPECT_EQ(q.code(2, 0), 255);
  EXPECT_EQ(q.code(1, 0), 128);
  // Out-of-range values clamp.
  const std::vector<double> outside{5.0};
  EXPECT_EQ(q.encode(outside)[0], 255);
}

TEST(Quantize, RejectsNonFinite) {
  Matrix m(2, 2);
  m(0, 0) = NAN;
  EXPECT_THROW(quantize_8bit(m), Error);
  EXPECT_THROW(quantize_8bit(Matrix{}), Error);
}

TEST(KMeans, ObjectiveNeverIncreases) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const auto pts = random_matrix(200, 5, rng);
    const auto res = lloyd_kmeans(pts, 12, rng);
    ASSERT_FALSE(res.objective.empty());
    for (std::size_t i = 1; i < res.objective.size(); ++i) {
      EXPECT_LE(res.objective[i], res.objective[i - 1] * (1 + 1e-12));
    }
  }
}

TEST(KMeans, SeparatesWellSpacedBlobs) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.05);
  Matrix pts(90, 2);
  for (std::size_t i = 0; i < 90; ++i) {
    const double cx = static_cast<double>(i % 3) * 10.0;
    pts(i, 0) = cx + noise(rng);
    pts(i, 1) = noise(rng);
  }
  const auto res = lloyd_kmeans(pts, 3, rng);
  EXPECT_TRUE(res.converged);
  for (std::size_t i = 3; i < 90; ++i) EXPECT_EQ(res.assignment[i], res.assignment[i % 3]);
}

TEST(KMeans, Errors) {
  std::mt19937_64 rng(9);
  EXPECT_THROW(lloyd_kmeans(random_matrix(3, 2, rng), 4, rng), Error);
  EXPECT_THROW(lloyd_kmeans(random_matrix(3, 2, rng), 0, rng), Error);
}

TEST(Coreset, SizeAndUnitNorm) {
  EXPECT_EQ(coreset_size(1000, 0.1), 100u);
  EXPECT_EQ(coreset_size(5, 0.1), 1u);
  EXPECT_EQ(coreset_size(11, 0.1), 2u);
  EXPECT_THROW(coreset_size(10, 0.0), Error);

  std::mt19937_64 rng(10);
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 1000; ++i) vs.push_back(testing::random_unit(16, rng));
  const auto cs = kmeans_coreset(to_matrix(vs), 0.1, rng);
  ASSERT_EQ(cs.size(), 100u);
  for (const auto& c : cs) EXPECT_TRUE(c.is_unit());
}

TEST(Linalg, JacobiMatchesEigen) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 2 + static_cast<std::size_t>(t);
    auto a = random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    const auto mine = jacobi_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(a));
    const Eigen::VectorXd ev = es.eigenvalues().reverse();
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(mine.values[i], ev(static_cast<Eigen::Index>(i)), 1e-9);
  }
}

TEST(Pca, PlaneInFiveDimensionsIsExact) {
  std::mt19937_64 rng(12);
  const auto basis = random_matrix(2, 5, rng);
  Matrix m(40, 5);
  for (std::size_t i = 0; i < 40; ++i) {
    const auto c = testing::random_vector(2, rng);
    for (std::size_t j = 0; j < 5; ++j) m(i, j) = c[0] * basis(0, j) + c[1] * basis(1, j) + 1.0;
  }
  const auto pca = fit_pca(m, 2);
  double err = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto back = pca.reconstruct(pca.project(std::as_const(m).row(i)));
    for (std::size_t j = 0; j < 5; ++j) err += std::pow(back[j] - m(i, j), 2);
  }
  EXPECT_LE(err, 1e-8);
}

TEST(Pca, FullRankIsLossless) {
  std::mt19937_64 rng(13);
  const auto m = random_matrix(30, 7, rng);
  const auto pca = fit_pca(m, 7);
  double err = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto back = pca.reconstruct(pca.project(std::as_const(m).row(i)));
    for (std::size_t j = 0; j < 7; ++j) err += std::pow(back[j] - m(i, j), 2);
  }
  EXPECT_LE(err, 1e-8);
}

TEST(Pca, TrailingEigenvaluesOn50By8) {
  std::mt19937_64 rng(14);
  const auto m = random_matrix(50, 8, rng);
  const auto pca = fit_pca(m, 3);
  Eigen::MatrixXd x = to_eigen(m);
  x.rowwise() -= x.colwise().mean();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x / 49.0);
  const double trailing = es.eigenvalues().head(5).sum() * 49.0;  // ascending order
  double err = 0.0;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto back = pca.reconstruct(pca.project(std::as_const(m).row(i)));
    for (std::size_t j = 0; j < 8; ++j) err += std::pow(back[j] - m(i, j), 2);
  }
  EXPECT_NEAR(err, trailing, 1e-6 * trailing);
}

TEST(Quantize, ZeroOneColumnAndRandomBlock) {
  Matrix m(2, 1);
  m(1, 0) = 1.0;
  const auto q = quantize_8bit(m);
  EXPECT_EQ(q.code(0, 0), 0);
  EXPECT_EQ(q.code(1, 0), 255);
  EXPECT_EQ(dequantize(q), m);

  std::mt19937_64 rng(15);
  const auto r = random_matrix(20, 4, rng);
  const auto qr = quantize_8bit(r);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 4; ++j) {
      const double expected = qr.offset[j] + qr.scale[j] * qr.code(i, j);
      EXPECT_EQ(qr.value(i, j), expected);
      EXPECT_LE(std::abs(expected - r(i, j)), qr.scale[j] / 2 + 1e-9);
    }
}

TEST(Coreset, KeepAllReturnsInputs) {
  std::mt19937_64 rng(16);
  std::vector<EmbeddingVector> vs;
  for (int i = 0; i < 12; ++i) vs.push_back(testing::random_unit(6, rng));
  const auto cs = kmeans_coreset(to_matrix(vs), 1.0, rng);
  ASSERT_EQ(cs.size(), vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(cs[i][j], vs[i][j], 1e-12);
}

TEST(Coreset, TwoClustersGiveNormalizedMeans) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> noise(0.0, 0.01);
  Matrix pts(20, 3);
  std::vector<double> mean_a(3, 0.0), mean_b(3, 0.0);
  for (std::size_t i = 0; i < 20; ++i) {
    const bool a = i < 10;
    pts(i, 0) = (a ? 1.0 : 0.0) + noise(rng);
    pts(i, 1) = (a ? 0.0 : 1.0) + noise(rng);
    pts(i, 2) = noise(rng);
    for (std::size_t j = 0; j < 3; ++j) (a ? mean_a : mean_b)[j] += pts(i, j) / 10.0;
  }
  const auto cs = kmeans_coreset(pts, 0.1, rng);
  ASSERT_EQ(cs.size(), 2u);
  const auto na = l2_normalized(std::span<const double>(mean_a));
  const auto nb = l2_normalized(std::span<const double>(mean_b));
  const bool first_is_a = cs[0][0] > cs[0][1];
  const auto& ca = first_is_a ? cs[0] : cs[1];
  const auto& cb = first_is_a ? cs[1] : cs[0];
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(ca[j], na[j], 1e-6);
    EXPECT_NEAR(cb[j], nb[j], 1e-6);
  }
}

}  // namespace
}  // namespace curate
