#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "phaselab/fock.hpp"
#include "phaselab/rng.hpp"

using namespace phaselab;

TEST_CASE("spin-coherent amplitudes are normalized with binomial populations") {
  RandomStream rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    const int N = 1 + static_cast<int>(rng.uniform() * 40);
    const double th = rng.uniform() * kPi;
    const double ph = rng.uniform() * kTwoPi;
    const TwoModeFockVector v = scs_amplitudes(N, th, ph);
    REQUIRE(v.amplitudes.size() == N + 1);
    CHECK(v.amplitudes.squaredNorm() == Catch::Approx(1.0).margin(1e-12));
    double mean = 0.0;
    for (int n = 0; n <= N; ++n) mean += n * std::norm(v.amplitudes(n));
    CHECK(mean == Catch::Approx(N * std::pow(std::cos(0.5 * th), 2)).margin(1e-10));
  }
}

TEST_CASE("polar spin-coherent states occupy a single mode") {
  const TwoModeFockVector north = scs_amplitudes(4, 0.0, 0.3);
  CHECK(std::abs(north.amplitudes(4)) == Catch::Approx(1.0));
  for (int n = 0; n < 4; ++n) CHECK(std::abs(north.amplitudes(n)) == Catch::Approx(0.0).margin(1e-15));

  const TwoModeFockVector south = scs_amplitudes(4, kPi, 0.0);
  CHECK(std::abs(south.amplitudes(0)) == Catch::Approx(1.0));
}

TEST_CASE("the equatorial single particle splits evenly with the right phase") {
  const double phi = 1.1;
  const TwoModeFockVector v = scs_amplitudes(1, 0.5 * kPi, phi);
  CHECK(std::abs(v.amplitudes(1) - 1.0 / std::sqrt(2.0)) < 1e-14);
  CHECK(std::abs(v.amplitudes(0) - std::polar(1.0 / std::sqrt(2.0), phi)) < 1e-14);
}

TEST_CASE("annihilation lowers a spin-coherent state along its own axis") {
  const int N = 5;
  const double th = 0.5 * kPi, ph = 0.0;
  const TwoModeFockVector v = scs_amplitudes(N, th, ph);
  const TwoModeFockVector lower = scs_amplitudes(N - 1, th, ph);
  const TwoModeFockVector va = apply_annihilation(v, Mode::a);
  const double scale = std::sqrt(5.0) / std::sqrt(2.0);  // sqrt(N) cos(theta/2)
  for (int n = 0; n < N; ++n)
    CHECK(std::abs(va.amplitudes(n) - scale * lower.amplitudes(n)) < 1e-12);
}

TEST_CASE("simple ladder actions") {
  TwoModeFockVector one;
  one.N = 1;
  one.amplitudes = Eigen::VectorXcd::Zero(2);
  one.amplitudes(1) = 1.0;  // |1, 0>
  const TwoModeFockVector zero = apply_annihilation(one, Mode::a);
  CHECK(zero.N == 0);
  CHECK(std::abs(zero.amplitudes(0) - 1.0) < 1e-15);

  // mode b is empty at the north pole, so b annihilates to nothing
  const TwoModeFockVector north = scs_amplitudes(3, 0.0, 0.0);
  const TwoModeFockVector vb = apply_annihilation(north, Mode::b);
  CHECK(vb.amplitudes.norm() == Catch::Approx(0.0).margin(1e-15));

  const TwoModeFockVector vac = apply_annihilation(zero, Mode::a);
  CHECK(vac.amplitudes.norm() == 0.0);
}

TEST_CASE("creation is the adjoint of annihilation") {
  RandomStream rng(99);
  for (Mode mode : {Mode::a, Mode::b}) {
    const int N = 6;
    TwoModeFockVector v, w;
    v.N = N;
    v.amplitudes = Eigen::VectorXcd::Random(N + 1);
    w.N = N + 1;
    w.amplitudes = Eigen::VectorXcd::Random(N + 2);
    const std::complex<double> lhs = w.amplitudes.dot(apply_creation(v, mode).amplitudes);
    const std::complex<double> rhs = apply_annihilation(w, mode).amplitudes.dot(v.amplitudes);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
  (void)rng;
}

TEST_CASE("repeated rotated creation rebuilds the spin-coherent state") {
  RandomStream rng(2718);
  for (int trial = 0; trial < 10; ++trial) {
    const int N = 1 + static_cast<int>(rng.uniform() * 30);
    const double th = rng.uniform() * kPi, ph = rng.uniform() * kTwoPi;
    TwoModeFockVector v;
    v.N = 0;
    v.amplitudes = Eigen::VectorXcd::Ones(1);
    for (int k = 0; k < N; ++k) {
      v = apply_mode_creation(v, th, ph);
      v.amplitudes /= std::sqrt(static_cast<double>(k + 1));
    }
    const TwoModeFockVector want = scs_amplitudes(N, th, ph);
    CHECK((v.amplitudes - want.amplitudes).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("truncation bookkeeping") {
  CHECK(required_n_max(1.0) == 33);
  CHECK(poisson_tail(1.0, required_n_max(1.0)) < 1e-12);
  CHECK(poisson_tail(3.0, required_n_max(3.0)) < 1e-12);
  CHECK_NOTHROW(check_truncation(1.0, 40));
  CHECK_THROWS_AS(check_truncation(2.0, 5), TruncationError);
  CHECK_THROWS_AS(detection_factor_oracle(PoissonMixedState{2.0, 0.5, 0.5, 3}, UnitVector3{0, 0, 1}),
                  TruncationError);
}

TEST_CASE("detection factor oracle hits the parallel, antiparallel and orthogonal values") {
  const double R = 1.3;
  PoissonMixedState st{R, 0.7, 2.1, required_n_max(R)};
  const UnitVector3 u = direction_to_vector(SphericalDirection(st.theta, st.phi));
  CHECK(detection_factor_oracle(st, u) == Catch::Approx(R * R).margin(1e-8));
  CHECK(detection_factor_oracle(st, -u) == Catch::Approx(0.0).margin(1e-8));
  const UnitVector3 perp = direction_to_vector(SphericalDirection(st.theta + 0.5 * kPi, st.phi));
  CHECK(detection_factor_oracle(st, perp) == Catch::Approx(0.5 * R * R).margin(1e-8));
}

TEST_CASE("empty history density is the no-detection probability") {
  const SourceParams src{1.0, 1.0, 2.0};
  const auto bs = beam_splitter_channels(0.5 * kPi);
  const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
  const double got = history_prob_oracle(src, channels, {}, BaseMeasure::ring(0.5 * kPi));
  CHECK(got == Catch::Approx(std::exp(-src.mean_count())).epsilon(1e-10));
}

TEST_CASE("single-detection history density factorizes into time and channel parts") {
  const SourceParams src{1.0, 1.0, 2.0};
  const auto bs = beam_splitter_channels(0.5 * kPi);
  const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
  const double t1 = 0.8;
  const std::vector<std::pair<double, int>> events{{t1, 0}};
  const double got = history_prob_oracle(src, channels, events, BaseMeasure::ring(0.5 * kPi));
  const double want = src.Gamma * src.R * src.R * std::exp(-src.Gamma * t1) *
                      std::exp(-src.mean_count()) * 0.25;
  CHECK(got == Catch::Approx(want).epsilon(1e-10));
}

TEST_CASE("point-base history densities agree with the factorized weight") {
  const SourceParams src{0.8, 1.2, 1.5};
  const auto bs = beam_splitter_channels(0.5 * kPi);
  const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
  const BaseMeasure init = BaseMeasure::point(0.5 * kPi, 0.9);
  const PhaseDistribution dist(init);
  const std::vector<std::pair<double, int>> events{{0.2, 0}, {0.6, 2}, {1.1, 0}};
  Partition part{{2, 0, 1, 0}};
  const double got = history_prob_oracle(src, channels, events, init);
  double lw = log_history_weight(dist, channels, part) - src.mean_count();
  for (const auto& [t, ch] : events) lw += std::log(src.Gamma * src.R * src.R) - src.Gamma * t;
  CHECK(got == Catch::Approx(std::exp(lw)).epsilon(1e-7));
}

TEST_CASE("history oracle validates its inputs") {
  const SourceParams src{1.0, 1.0, 2.0};
  const auto bs = beam_splitter_channels(0.5 * kPi);
  const std::vector<DetectorChannel> channels(bs.begin(), bs.end());
  const std::vector<std::pair<double, int>> unsorted{{1.0, 0}, {0.5, 1}};
  CHECK_THROWS_AS(history_prob_oracle(src, channels, unsorted, BaseMeasure::ring(0.5 * kPi)), ConfigError);
  const std::vector<std::pair<double, int>> out_of_range{{0.5, 7}};
  CHECK_THROWS_AS(history_prob_oracle(src, channels, out_of_range, BaseMeasure::ring(0.5 * kPi)), ConfigError);
  const std::vector<std::pair<double, int>> late{{3.0, 0}};
  CHECK_THROWS_AS(history_prob_oracle(src, channels, late, BaseMeasure::ring(0.5 * kPi)), ConfigError);
  CHECK_THROWS_AS(history_prob_oracle(src, channels, {}, BaseMeasure::uniform_sphere()), ConfigError);
}
