#include <doctest.h>

#include "sasv/core.hpp"

#include <cmath>
#include <random>

using namespace sasv;

TEST_CASE("cosine similarity") {
  SUBCASE("self similarity") {
    const std::vector<double> e{0.3, -1.2, 4.0, 0.01};
    CHECK(cosine_similarity(e, e) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("orthogonal") {
    CHECK(cosine_similarity(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 0.0);
  }
  SUBCASE("hand computed") {
    const double expect = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
    CHECK(expect == doctest::Approx(0.974631846).epsilon(1e-9));
    CHECK(cosine_similarity(std::vector<double>{1, 2, 3}, std::vector<double>{4, 5, 6}) ==
          doctest::Approx(expect).epsilon(1e-15));
  }
  SUBCASE("symmetric and scale invariant") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n;
    for (int t = 0; t < 50; ++t) {
      std::vector<double> a(37), b(37);
      for (auto &v : a)
        v = n(rng);
      for (auto &v : b)
        v = n(rng);
      const double c = cosine_similarity(a, b);
      CHECK(c == doctest::Approx(cosine_similarity(b, a)).epsilon(1e-14));
      auto a2 = a;
      for (auto &v : a2)
        v *= 7.5;
      CHECK(c == doctest::Approx(cosine_similarity(a2, b)).epsilon(1e-13));
      CHECK(c >= -1.0);
      CHECK(c <= 1.0);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), Error);
    CHECK_THROWS_AS(cosine_similarity(std::vector<double>{0, 0}, std::vector<double>{1, 2}), Error);
  }
}

TEST_CASE("sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1.0) == doctest::Approx(0.73105857863).epsilon(1e-11));
  for (double x : {-800.0, -30.0, -2.5, -1e-9, 0.3, 4.0, 40.0, 800.0}) {
    CHECK(sigmoid(x) + sigmoid(-x) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::isfinite(sigmoid(x)));
  }
}

TEST_CASE("asv probability") {
  const Embedding a("a", {1, 2, 3}), b("b", {4, 5, 6}), neg("n", {-1, -2, -3});
  CHECK(asv_probability(a, a) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(asv_probability(a, a) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(asv_probability(a, neg) == doctest::Approx(0.2689).epsilon(1e-4));
  const double c = 32.0 / (std::sqrt(14.0) * std::sqrt(77.0));
  CHECK(asv_probability(a, b) == doctest::Approx(1.0 / (1.0 + std::exp(-c))).epsilon(1e-15));
  // 0.726042 exactly; the commonly quoted 0.72601 is only good to ~3e-5.
  CHECK(std::fabs(asv_probability(a, b) - 0.72601) < 1e-4);
}

TEST_CASE("score fusion") {
  CHECK(fuse_scores(0.8, 0.6) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(fuse_scores(1.0, 0.0) == 0.5);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng), b = u(rng);
    CHECK(fuse_scores(a, a) == a);
    CHECK(fuse_scores(a, b) == fuse_scores(b, a));
    CHECK(fuse_scores(a, b) == (a + b) / 2);
  }
  CHECK_THROWS_AS(fuse_scores(1.2, 0.5), Error);
  CHECK_THROWS_AS(fuse_scores(0.5, -0.1), Error);
}

TEST_CASE("embeddings and labels") {
  CHECK_THROWS_AS(Embedding("x", {}), Error);
  CHECK_THROWS_AS(Embedding("x", {1.0, NAN}), Error);
  CHECK(parse_label("TARGET") == TrialLabel::Target);
  CHECK(parse_label("NonTarget") == TrialLabel::Nontarget);
  CHECK(parse_label("spoof") == TrialLabel::Spoof);
  CHECK_FALSE(parse_label("bonafide").has_value());
  CHECK(sasv_positive(TrialLabel::Target));
  CHECK_FALSE(sasv_positive(TrialLabel::Nontarget));
  CHECK_FALSE(sasv_positive(TrialLabel::Spoof));
  CHECK(cm_positive(TrialLabel::Nontarget));
  CHECK_FALSE(cm_positive(TrialLabel::Spoof));
}
