#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "pipemap/normal.hpp"

using namespace pipemap;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("norm_ppf matches reference values") {
  // reference values computed with scipy.stats.norm.ppf
  struct Case {
    double p, expected;
  };
  const Case cases[] = {
      {1e-15, -7.941345326170998},
      {1e-10, -6.361340902404056},
      {1e-6, -4.753424308822899},
      {0.001, -3.090232306167813},
      {0.01, -2.3263478740408408},
      {0.025, -1.9599639845400545},
      {0.05, -1.6448536269514729},
      {0.1, -1.2815515655446004},
      {0.3, -0.5244005127080409},
      {0.6321205588285577, 0.33747496376420244},
      {0.9, 1.2815515655446004},
      {0.999, 3.090232306167813},
      {0.9999999999, 6.361340889697422},
  };
  for (const auto& c : cases) {
    CAPTURE(c.p);
    REQUIRE_THAT(norm_ppf(c.p), WithinRel(c.expected, 1e-9));
  }
  REQUIRE(norm_ppf(0.5) == 0.0);
}

TEST_CASE("norm_cdf matches reference values") {
  struct Case {
    double z, expected;
  };
  const Case cases[] = {
      {-8.0, 6.22096057427174e-16},
      {-3.0, 0.0013498980316300933},
      {-1.0, 0.15865525393145707},
      {0.0, 0.5},
      {0.5, 0.6914624612740131},
      {1.0, 0.8413447460685429},
      {2.5, 0.9937903346742238},
      {6.0, 0.9999999990134123},
  };
  for (const auto& c : cases) {
    CAPTURE(c.z);
    REQUIRE_THAT(norm_cdf(c.z), WithinAbs(c.expected, 1e-14));
  }
}

TEST_CASE("norm_ppf and norm_cdf are mutual inverses") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-10, 1.0 - 1e-10);
  for (int i = 0; i < 1000; ++i) {
    const double p = u(rng);
    REQUIRE_THAT(norm_cdf(norm_ppf(p)), WithinAbs(p, 1e-12));
  }
  // for z >> 0 the upper tail saturates in double precision, so the
  // recoverable range is asymmetric
  for (double z : {-7.0, -2.5, -0.3, 0.0, 0.3, 2.5, 5.0})
    REQUIRE_THAT(norm_ppf(norm_cdf(z)), WithinAbs(z, 1e-9));
}

TEST_CASE("norm_ppf is strictly increasing") {
  double prev = -1e300;
  for (double p = 1e-6; p < 1.0; p += 1e-3) {
    const double q = norm_ppf(p);
    REQUIRE(q > prev);
    prev = q;
  }
}

TEST_CASE("norm_ppf rejects arguments outside (0,1)") {
  REQUIRE_THROWS_AS(norm_ppf(0.0), std::domain_error);
  REQUIRE_THROWS_AS(norm_ppf(1.0), std::domain_error);
  REQUIRE_THROWS_AS(norm_ppf(-0.1), std::domain_error);
  REQUIRE_THROWS_AS(norm_ppf(1.1), std::domain_error);
}

TEST_CASE("norm_pdf consistent with finite-difference of the cdf") {
  for (double z : {-2.0, -0.5, 0.0, 0.7, 1.9}) {
    const double h = 1e-6;
    const double fd = (norm_cdf(z + h) - norm_cdf(z - h)) / (2 * h);
    REQUIRE_THAT(norm_pdf(z), WithinRel(fd, 1e-8));
  }
}
