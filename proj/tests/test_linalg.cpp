#include <doctest.h>

#include <parityspace/linalg.hpp>

#include "support.hpp"

using namespace parityspace;
using testsupport::dlyap_series;
using testsupport::random_matrix;
using testsupport::random_spd;
using testsupport::random_stable;

TEST_SUITE("linalg") {

TEST_CASE("svd of identity has unit singular values and full rank") {
  const Svd f = svd(Mat::Identity(3, 3));
  CHECK(f.rank == 3);
  for (int i = 0; i < 3; ++i) CHECK(f.sigma(i) == doctest::Approx(1.0));
}

TEST_CASE("svd of zero matrix has rank zero") {
  const Svd f = svd(Mat::Zero(4, 2));
  CHECK(f.rank == 0);
}

TEST_CASE("svd reconstructs the input") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 2 + static_cast<int>(rng() % 6);
    const int cols = 2 + static_cast<int>(rng() % 6);
    const Mat m = random_matrix(rng, rows, cols);
    const Svd f = svd(m);
    const Mat rebuilt = f.u * f.sigma.asDiagonal() * f.v.transpose();
    CHECK((rebuilt - m).norm() <= 1e-10 * std::max(1.0, m.norm()));
    for (Eigen::Index i = 1; i < f.sigma.size(); ++i) {
      CHECK(f.sigma(i - 1) >= f.sigma(i));
    }
  }
}

TEST_CASE("svd detects rank deficiency") {
  std::mt19937_64 rng(12);
  const Mat a = random_matrix(rng, 5, 2);
  const Mat b = random_matrix(rng, 2, 5);
  CHECK(svd(a * b).rank == 2);
}

TEST_CASE("svd rejects non-finite input") {
  Mat m = Mat::Zero(2, 2);
  m(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(svd(m), InvalidInputError);
}

TEST_CASE("null_space_left of a single column vector") {
  Mat m(2, 1);
  m << 1.0, 0.0;
  const Mat n = null_space_left(m);
  REQUIRE(n.rows() == 1);
  CHECK(std::abs(n(0, 0)) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(n(0, 1)) == doctest::Approx(1.0));
}

TEST_CASE("null_space_left of full-row-rank matrix is empty") {
  std::mt19937_64 rng(13);
  const Mat m = random_matrix(rng, 3, 5);
  CHECK(null_space_left(m).rows() == 0);
}

TEST_CASE("null_space_left rows annihilate and are orthonormal") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    const int rows = 4 + static_cast<int>(rng() % 5);
    const int cols = 1 + static_cast<int>(rng() % 3);
    const Mat m = random_matrix(rng, rows, cols);
    const Mat n = null_space_left(m);
    const Svd f = svd(m);
    CHECK(n.rows() == rows - f.rank);
    CHECK((n * m).norm() <= 1e-10 * std::max(1.0, m.norm()));
    const Mat gram = n * n.transpose();
    CHECK((gram - Mat::Identity(n.rows(), n.rows())).norm() <= 1e-12);
  }
}

TEST_CASE("gen_eig_spd with scaled identity pencil") {
  const Mat s = 2.0 * Mat::Identity(3, 3);
  const Mat t = Mat::Identity(3, 3);
  const GenEig g = gen_eig_spd(s, t);
  for (int i = 0; i < 3; ++i) CHECK(g.values(i) == doctest::Approx(2.0));
}

TEST_CASE("gen_eig_spd solves the pencil and T-orthonormalizes") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    const Mat s = random_spd(rng, n, 0.1);
    const Mat t = random_spd(rng, n, 0.5);
    const GenEig g = gen_eig_spd(s, t);
    const double scale = s.norm() + t.norm();
    for (int i = 0; i < n; ++i) {
      const Vec resid = s * g.vectors.col(i) - g.values(i) * t * g.vectors.col(i);
      CHECK(resid.norm() <= 1e-8 * scale);
    }
    const Mat gram = g.vectors.transpose() * t * g.vectors;
    CHECK((gram - Mat::Identity(n, n)).norm() <= 1e-8);
    for (int i = 1; i < n; ++i) CHECK(g.values(i - 1) >= g.values(i));
  }
}

TEST_CASE("gen_eig_spd against plain eigensolver when T = I") {
  std::mt19937_64 rng(16);
  const Mat s = random_spd(rng, 5);
  const GenEig g = gen_eig_spd(s, Mat::Identity(5, 5));
  Eigen::SelfAdjointEigenSolver<Mat> plain(s);
  for (int i = 0; i < 5; ++i) {
    CHECK(g.values(i) == doctest::Approx(plain.eigenvalues()(4 - i)).epsilon(1e-9));
  }
}

TEST_CASE("gen_eig_spd rejects an indefinite T") {
  Mat t = Mat::Identity(2, 2);
  t(1, 1) = -1.0;
  CHECK_THROWS_AS(gen_eig_spd(Mat::Identity(2, 2), t), NumericalError);
}

TEST_CASE("gen_eig_spd rejects asymmetric input") {
  Mat s(2, 2);
  s << 0.0, 1.0, 0.0, 0.0;
  CHECK_THROWS_AS(gen_eig_spd(s, Mat::Identity(2, 2)), InvalidInputError);
}

TEST_CASE("dlyap with A = 0 returns W") {
  std::mt19937_64 rng(17);
  const Mat w = random_spd(rng, 4);
  CHECK((dlyap(Mat::Zero(4, 4), w) - w).norm() <= 1e-14 * w.norm());
}

TEST_CASE("dlyap scalar geometric series") {
  Mat a(1, 1), w(1, 1);
  a << 0.5;
  w << 1.0;
  // sum 0.25^k = 1 / (1 - 0.25)
  CHECK(dlyap(a, w)(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("dlyap agrees with the truncated power series") {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    const Mat a = random_stable(rng, n, 0.85);
    const Mat g = random_matrix(rng, n, n);
    const Mat w = g * g.transpose();
    const Mat p = dlyap(a, w);
    const Mat oracle = dlyap_series(a, w);
    CHECK((p - oracle).norm() <= 1e-8 * std::max(1.0, oracle.norm()));
    // fixed point check
    CHECK((a * p * a.transpose() + w - p).norm() <= 1e-10 * std::max(1.0, p.norm()));
  }
}

TEST_CASE("dlyap rejects marginally stable dynamics") {
  Mat a(1, 1), w(1, 1);
  a << 1.0;
  w << 1.0;
  CHECK_THROWS_AS(dlyap(a, w), UnstableError);
}

TEST_CASE("dlyap handles slow modes near one") {
  Mat a(1, 1), w(1, 1);
  a << 0.999;
  w << 1.0;
  const double expected = 1.0 / (1.0 - 0.999 * 0.999);
  CHECK(dlyap(a, w)(0, 0) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("spectral_radius of a rotation-like matrix") {
  Mat a(2, 2);
  a << 0.0, -0.7, 0.7, 0.0;
  CHECK(spectral_radius(a) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("psd_sqrt squares back to the input") {
  std::mt19937_64 rng(19);
  const Mat m = random_spd(rng, 5, 0.0);
  const Mat r = psd_sqrt(m);
  CHECK((r * r - m).norm() <= 1e-9 * std::max(1.0, m.norm()));
}

TEST_CASE("psd_sqrt rejects clearly indefinite input") {
  Mat m = Mat::Identity(2, 2);
  m(1, 1) = -0.5;
  CHECK_THROWS_AS(psd_sqrt(m), NumericalError);
}

}  // TEST_SUITE
