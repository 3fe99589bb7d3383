#include "doctest.h"

#include "ksync/genmodel.hpp"
#include "ksync/linalg.hpp"
#include "ksync/rng.hpp"
#include "ksync/sync.hpp"

#include <cmath>

using namespace ksync;

namespace {

HermitianMatrix random_hermitian(int n, std::uint64_t seed) {
  Rng rng(seed);
  HermitianMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = Complex(rng.normal(), rng.normal());
  return (a + a.adjoint()) / 2.0;
}

Eigen::VectorXcd random_unit(int n, Rng& rng) {
  Eigen::VectorXcd v(n);
  for (int i = 0; i < n; ++i) v(i) = Complex(rng.normal(), rng.normal());
  return v.normalized();
}

}  // namespace

TEST_CASE("rank-one matrix") {
  Rng rng(1);
  const Eigen::VectorXcd z = random_unit(5, rng);
  const EigenPairs ep = top_k_eig(z * z.adjoint(), 2);
  CHECK(ep.values(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(ep.values(1)) < 1e-12);
  CHECK(std::abs(ep.vectors.col(0).dot(z)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagonal matrix") {
  HermitianMatrix h = HermitianMatrix::Zero(3, 3);
  h.diagonal() << 3.0, 2.0, 1.0;
  const EigenPairs ep = top_k_eig(h, 2);
  CHECK(ep.values(0) == doctest::Approx(3.0));
  CHECK(ep.values(1) == doctest::Approx(2.0));
  CHECK(std::abs(ep.vectors(0, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(ep.vectors(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("top_k_eig contract against a full decomposition") {
  for (int n : {8, 40, 120}) {
    const HermitianMatrix h = random_hermitian(n, 100 + n);
    const int k = 4;
    const EigenPairs ep = top_k_eig(h, k);
    Eigen::SelfAdjointEigenSolver<HermitianMatrix> full(h);
    const double norm = spectral_norm(h);
    for (int j = 0; j < k; ++j) {
      CHECK(ep.values(j) == doctest::Approx(full.eigenvalues()(n - 1 - j)).epsilon(1e-10));
      CHECK(std::abs(ep.vectors.col(j).norm() - 1.0) < 1e-10);
      CHECK(ep.residuals(j) <= 1e-10 * norm);
      CHECK((h * ep.vectors.col(j) - ep.values(j) * ep.vectors.col(j)).norm() <= 1e-10 * norm);
      for (int i = 0; i < j; ++i) CHECK(std::abs(ep.vectors.col(i).dot(ep.vectors.col(j))) <= 1e-8);
    }
    for (int j = 1; j < k; ++j) CHECK(ep.values(j - 1) >= ep.values(j));
  }
}

TEST_CASE("repeated eigenvalues stay orthogonal") {
  HermitianMatrix h = HermitianMatrix::Zero(6, 6);
  h.diagonal() << 2, 2, 2, 1, 0, -1;
  const EigenPairs ep = top_k_eig(h, 3);
  CHECK(ep.has_ties);
  for (int i = 0; i < 3; ++i) {
    CHECK(ep.values(i) == doctest::Approx(2.0));
    for (int j = 0; j < i; ++j) CHECK(std::abs(ep.vectors.col(i).dot(ep.vectors.col(j))) <= 1e-8);
  }
}

TEST_CASE("top_k_eig input validation") {
  CHECK_THROWS_AS(top_k_eig(HermitianMatrix::Zero(3, 2), 1), std::invalid_argument);
  CHECK_THROWS_AS(top_k_eig(HermitianMatrix::Identity(3, 3), 0), std::invalid_argument);
  CHECK_THROWS_AS(top_k_eig(HermitianMatrix::Identity(3, 3), 4), std::invalid_argument);
  HermitianMatrix bad = HermitianMatrix::Identity(3, 3);
  bad(0, 1) = Complex(0, 1);
  CHECK_THROWS_AS(top_k_eig(bad, 1), std::invalid_argument);
  CHECK(hermitian_defect(bad) == doctest::Approx(1.0));
}

TEST_CASE("spectral_norm examples") {
  CHECK(spectral_norm(HermitianMatrix::Zero(4, 4)) == 0.0);
  HermitianMatrix d = HermitianMatrix::Zero(2, 2);
  d.diagonal() << -5.0, 3.0;
  CHECK(spectral_norm(d) == doctest::Approx(5.0));
  Eigen::VectorXcd z = Eigen::VectorXcd::Zero(4), w = Eigen::VectorXcd::Zero(4);
  z(0) = 1.0;
  w(1) = Complex(0, 1);
  CHECK(spectral_norm(z * z.adjoint() - w * w.adjoint()) == doctest::Approx(1.0));
  const auto [lo, hi] = eigenvalue_range(d);
  CHECK(lo == doctest::Approx(-5.0));
  CHECK(hi == doctest::Approx(3.0));
}

TEST_CASE("closed-form top-2 eigenvalues of the expected matrix") {
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const int n = 50;
    const double p1 = 0.2 + 0.3 * rng.uniform(), p2 = p1 * rng.uniform(), lambda = 0.2 + 0.8 * rng.uniform();
    const AngleGroups ang = sample_angles(n, 2, rng.next_u64());
    const MixtureParams params{n, 2, lambda, {p1, p2}, 0};
    const EigenPairs ep = top_k_eig(expected_H(params, ang), 2);
    const UnitVectorRep z = to_unit_vectors(ang);
    const double inner = std::abs(z.z.col(0).dot(z.z.col(1)));
    const auto [l1, l2] = closed_form_eigs_k2(n, lambda, p1, p2, inner);
    CHECK(ep.values(0) == doctest::Approx(l1).epsilon(1e-9));
    CHECK(ep.values(1) == doctest::Approx(l2).epsilon(1e-9));
  }
}

TEST_CASE("degree_normalized_eig examples") {
  HermitianMatrix id = HermitianMatrix::Identity(5, 5);
  id.diagonal() << 1, 1, 1, 1, 1;
  const EigenPairs a = degree_normalized_eig(id, 2), b = top_k_eig(id, 2);
  CHECK(a.values(0) == doctest::Approx(b.values(0)));

  const EigenPairs ones = degree_normalized_eig(HermitianMatrix::Ones(6, 6), 1);
  CHECK(ones.values(0) == doctest::Approx(1.0).epsilon(1e-12));
  for (int i = 1; i < 6; ++i) CHECK(std::abs(ones.vectors(i, 0) - ones.vectors(0, 0)) < 1e-10);

  HermitianMatrix zero_row = HermitianMatrix::Identity(3, 3);
  zero_row(2, 2) = 0.0;
  CHECK_THROWS_AS(degree_normalized_eig(zero_row, 1), std::invalid_argument);
}

TEST_CASE("normalized and plain spectra agree on regular graphs") {
  int agree = 0;
  for (int t = 0; t < 10; ++t) {
    const AngleGroups ang = sample_angles(100, 2, 500 + t);
    const MeasurementGraph g = sample_er_mixture({100, 2, 1.0, {0.5, 0.3}, 600u + t}, ang);
    const EvalResult h = evaluate(ang, spectral_ksync(g, 2));
    const EvalResult r = evaluate(ang, normalized_spectral_ksync(g, 2));
    agree += (h.matched - r.matched).cwiseAbs().maxCoeff() <= 0.02 ? 1 : 0;
  }
  CHECK(agree == 10);
}

TEST_CASE("Weyl and Davis-Kahan containment") {
  const int n = 200;
  for (int t = 0; t < 5; ++t) {
    const AngleGroups ang = sample_angles(n, 2, 40 + t);
    const MixtureParams params{n, 2, 0.6, {0.4, 0.2}, 80u + t};
    const MeasurementGraph g = sample_er_mixture(params, ang);
    const double diag = params.lambda * 0.6;
    const HermitianMatrix h = build_measurement_matrix(g, diag);
    const HermitianMatrix eh = expected_H(params, ang);
    const double r = spectral_norm(h - eh);
    const EigenPairs a = top_k_eig(h, 3), b = top_k_eig(eh, 3);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(a.values(j) - b.values(j)) <= r + 1e-9);
    Eigen::SelfAdjointEigenSolver<HermitianMatrix> full(eh, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = full.eigenvalues().reverse();
    for (int j = 0; j < 2; ++j) {
      // Gap between the perturbed eigenvalue and the neighbouring unperturbed ones.
      double gap = std::abs(ev(j + 1) - a.values(j));
      if (j > 0) gap = std::min(gap, std::abs(ev(j - 1) - a.values(j)));
      if (gap <= 0) continue;
      const double c = std::abs(a.vectors.col(j).dot(b.vectors.col(j)));
      const double sin_theta = std::sqrt(std::max(0.0, 1.0 - c * c));
      CHECK(sin_theta <= r / gap + 1e-9);
    }
  }
}
