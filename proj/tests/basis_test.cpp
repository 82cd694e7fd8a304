#include <doctest.h>

#include <cmath>
#include <random>

#include "svirkit/basis.hpp"
#include "svirkit/errors.hpp"

using namespace svirkit;

namespace {

Eigen::VectorXd random_signal(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

} // namespace

TEST_SUITE("basis") {

TEST_CASE("haar collapses a constant block to one scaling coefficient") {
  BasisSpec spec(BasisKind::Haar, 4, 2);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  auto coeffs = analyze(ones, spec);
  CHECK(coeffs.values[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(coeffs.values.tail(3).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("unit scaling coefficient synthesizes to a flat half signal") {
  BasisSpec spec(BasisKind::Haar, 4, 2);
  CoefficientVector e0{spec, Eigen::VectorXd::Zero(4)};
  e0.values[0] = 1.0;
  Eigen::VectorXd sig = synthesize(e0);
  for (int i = 0; i < 4; ++i) CHECK(sig[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("round trip is exact for every kind in 1D") {
  for (auto kind : {BasisKind::Canonical, BasisKind::Haar, BasisKind::Daubechies4}) {
    for (int levels : {1, 2, 5}) {
      BasisSpec spec(kind, 32, levels);
      Eigen::VectorXd sig = random_signal(32, 101 + levels);
      Eigen::VectorXd back = synthesize(analyze(sig, spec));
      CHECK((back - sig).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }
}

TEST_CASE("round trip is exact at the deepest level") {
  for (auto kind : {BasisKind::Haar, BasisKind::Daubechies4}) {
    BasisSpec spec(kind, 64, 6);
    Eigen::VectorXd sig = random_signal(64, 7);
    Eigen::VectorXd back = synthesize(analyze(sig, spec));
    CHECK((back - sig).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("parseval: coefficient norm equals signal norm") {
  for (auto kind : {BasisKind::Haar, BasisKind::Daubechies4}) {
    BasisSpec spec(kind, 128, 4);
    Eigen::VectorXd sig = random_signal(128, 55);
    auto coeffs = analyze(sig, spec);
    CHECK(coeffs.values.norm() == doctest::Approx(sig.norm()).epsilon(1e-10));
  }
}

TEST_CASE("analysis rows are orthonormal") {
  BasisSpec spec(BasisKind::Daubechies4, 16, 3);
  Eigen::MatrixXd rows(16, 16);
  for (int i = 0; i < 16; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(16);
    e[i] = 1.0;
    rows.col(i) = analyze(e, spec).values;
  }
  Eigen::MatrixXd gram = rows.transpose() * rows;
  CHECK((gram - Eigen::MatrixXd::Identity(16, 16)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("2D tensor transform round trips and preserves energy") {
  for (auto kind : {BasisKind::Haar, BasisKind::Daubechies4}) {
    BasisSpec spec(kind, 16, 3, 2);
    Eigen::VectorXd img = random_signal(256, 91);
    auto coeffs = analyze(img, spec);
    CHECK(coeffs.values.norm() == doctest::Approx(img.norm()).epsilon(1e-10));
    Eigen::VectorXd back = synthesize(coeffs);
    CHECK((back - img).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("truncation keeps the leading coarse channels only") {
  BasisSpec spec(BasisKind::Haar, 16, 2);
  Eigen::VectorXd sig = random_signal(16, 3);
  auto coeffs = analyze(sig, spec);
  auto cut = truncate(coeffs, 6);
  CHECK(cut.values.head(6) == coeffs.values.head(6));
  CHECK(cut.values.tail(10).norm() == 0.0);
  CHECK_THROWS_AS(truncate(coeffs, 0), ValidationError);
  CHECK_THROWS_AS(truncate(coeffs, 17), ValidationError);
}

TEST_CASE("subband weights follow the dyadic scale law") {
  BasisSpec spec(BasisKind::Haar, 16, 3);
  auto seq = subband_weights(spec, 1.0);
  // Layout: scaling(2) | scale 1 (2) | scale 2 (4) | scale 3 (8).
  CHECK(seq.weights[0] == 1.0);
  CHECK(seq.weights[1] == 1.0);
  CHECK(seq.weights[2] == doctest::Approx(4.0));
  CHECK(seq.weights[4] == doctest::Approx(16.0));
  CHECK(seq.weights[8] == doctest::Approx(64.0));
  CHECK(seq.weights[15] == doctest::Approx(64.0));
  CHECK(seq.groups.size() == 4);
  CHECK(seq.groups.front().value == 1.0);
  CHECK(seq.groups.back().value == doctest::Approx(64.0));
}

TEST_CASE("weights on a 64 grid at full depth form 7 groups") {
  BasisSpec spec(BasisKind::Haar, 64, 6);
  auto seq = subband_weights(spec, 1.0);
  CHECK(seq.groups.size() == 7);
  long long covered = 0;
  for (const auto& g : seq.groups) covered += static_cast<long long>(g.channels.size());
  CHECK(covered == 64);
  // Weights are nondecreasing along the coarse-to-fine layout.
  for (int k = 1; k < 64; ++k) CHECK(seq.weights[k] >= seq.weights[k - 1]);
}

TEST_CASE("weights dominate the polynomial growth floor") {
  for (auto kind : {BasisKind::Haar, BasisKind::Daubechies4}) {
    BasisSpec spec(kind, 64, 6);
    auto seq = subband_weights(spec, 1.0);
    CHECK(seq.lower_bound_constant > 0.0);
    for (int k = 0; k < 64; ++k) {
      const double floor = seq.lower_bound_constant * std::pow(1.0 + double(k) * k, 1.0);
      CHECK(seq.weights[k] >= floor * (1.0 - 1e-12));
    }
  }
}

TEST_CASE("canonical weights fall back to per-channel growth") {
  BasisSpec spec(BasisKind::Canonical, 8, 0);
  auto seq = subband_weights(spec, 1.0);
  CHECK(seq.groups.size() == 8);
  CHECK(seq.weights[0] == doctest::Approx(1.0));
  CHECK(seq.weights[3] == doctest::Approx(10.0));
  BasisSpec spec2(BasisKind::Canonical, 4, 0, 2);
  auto seq2 = subband_weights(spec2, 2.0);
  CHECK(seq2.weights[5] == doctest::Approx(26.0)); // (1+25)^(2/2)
}

TEST_CASE("2D tensor weights are constant per subband pair") {
  BasisSpec spec(BasisKind::Haar, 8, 2, 2);
  auto seq = subband_weights(spec, 1.5);
  // Scaling-by-scaling block: 2x2 channels of weight 1 leading the layout.
  CHECK(seq.weights.head(4).maxCoeff() == 1.0);
  // Finest isotropic scale present must be 2^(2*1.5*2) = 64.
  CHECK(seq.weights.maxCoeff() == doctest::Approx(64.0));
  CHECK(seq.groups.size() == 3); // max-scale values 0, 1, 2
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(BasisSpec(BasisKind::Haar, 12, 2), ValidationError);
  CHECK_THROWS_AS(BasisSpec(BasisKind::Haar, 16, 0), ValidationError);
  CHECK_THROWS_AS(BasisSpec(BasisKind::Haar, 16, 5), ValidationError);
  CHECK_THROWS_AS(BasisSpec(BasisKind::Haar, 16, 2, 3), ValidationError);
  BasisSpec spec(BasisKind::Haar, 16, 2);
  CHECK_THROWS_AS(analyze(Eigen::VectorXd::Zero(8), spec), ValidationError);
  CHECK_THROWS_AS(subband_weights(spec, 0.5), ValidationError);
  CHECK_THROWS_AS(basis_kind_from_string("fourier"), ValidationError);
}

} // TEST_SUITE
