#include <doctest.h>

#include "oracles.hpp"
#include "sasv/losses.hpp"

#include <cmath>
#include <random>

using namespace sasv;
using L = TrialLabel;

namespace {

struct Batch {
  std::vector<double> y;
  std::vector<L> labels;
};

Batch random_batch(std::mt19937_64 &rng, std::size_t n = 30) {
  std::uniform_real_distribution<double> u(0.05, 0.95);
  Batch b;
  b.labels = oracle::random_labels(rng, n);
  for (std::size_t i = 0; i < n; ++i)
    b.y.push_back(u(rng));
  return b;
}

// Central differences of the long double reference with respect to each score
// and the threshold.
void fd_check(oracle::Loss which, const Batch &b, double tau, const LossOutput &out,
              const SoftAdcfConfig &cfg, bool check_tau) {
  const oracle::SoftCfg rc{cfg.cost, cfg.alpha, cfg.normalize};
  const long double h = 1e-6L;
  std::vector<long double> y(b.y.begin(), b.y.end());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const long double keep = y[i];
    y[i] = keep + h;
    const long double lp = oracle::loss(which, y, b.labels, tau, rc);
    y[i] = keep - h;
    const long double lm = oracle::loss(which, y, b.labels, tau, rc);
    y[i] = keep;
    CHECK(oracle::rel_err(out.grad_scores[i], (lp - lm) / (2 * h)) < 1e-4);
  }
  if (check_tau) {
    const long double lp = oracle::loss(which, y, b.labels, tau + h, rc);
    const long double lm = oracle::loss(which, y, b.labels, tau - h, rc);
    CHECK(oracle::rel_err(out.grad_tau, (lp - lm) / (2 * h)) < 1e-4);
  }
  const long double ref = oracle::loss(which, y, b.labels, tau, rc);
  CHECK(std::fabs(out.value - static_cast<double>(ref)) < 1e-12 * (1.0 + std::fabs(out.value)));
}

} // namespace

TEST_CASE("soft rates") {
  const std::vector<double> y{0.5, 0.5, 0.5};
  const std::vector<L> l{L::Target, L::Nontarget, L::Spoof};
  auto r = soft_rates(y, l, 0.5, 0.05);
  CHECK(r.p_miss_tar == 0.5);
  CHECK(r.p_fa_non == 0.5);
  CHECK(r.p_fa_spf == 0.5);

  const double one[] = {0.6};
  const L tar[] = {L::Target};
  r = soft_rates(one, tar, 0.5, 0.1);
  CHECK(r.p_miss_tar == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-14));
  CHECK(r.p_miss_tar == doctest::Approx(0.26894).epsilon(1e-5));

  SUBCASE("sharp limit approaches hard rates") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
      LabeledScores s;
      s.labels = oracle::random_labels(rng, 45);
      for (std::size_t i = 0; i < s.labels.size(); ++i) {
        double v;
        do
          v = u(rng);
        while (std::fabs(v - 0.4) < 0.01);
        s.scores.push_back(v);
      }
      const auto soft = soft_rates(s.scores, s.labels, 0.4, 1e-4);
      const auto hard = hard_rates(s, 0.4);
      CHECK(std::fabs(soft.p_miss_tar - hard.p_miss_tar) < 1e-6);
      CHECK(std::fabs(soft.p_fa_non - hard.p_fa_non) < 1e-6);
      CHECK(std::fabs(soft.p_fa_spf - hard.p_fa_spf) < 1e-6);
    }
  }
}

TEST_CASE("soft a-DCF loss") {
  SoftAdcfConfig cfg;
  SUBCASE("saturated separation") {
    cfg.alpha = 0.01;
    cfg.normalize = false;
    const std::vector<double> y{1, 1, 0, 0, 0};
    const std::vector<L> l{L::Target, L::Target, L::Nontarget, L::Spoof, L::Spoof};
    const auto out = soft_adcf_loss(y, l, 0.5, cfg);
    CHECK(out.value < 1e-10);
    for (double g : out.grad_scores)
      CHECK(std::fabs(g) < 1e-8);
    CHECK(std::fabs(out.grad_tau) < 1e-8);
  }
  SUBCASE("symmetric construction has zero threshold gradient") {
    // 2 * 0.25 == 1 * 0.5; spoofs carry no cost and are absent.
    cfg.cost = CostModel{2.0, 1.0, 0.0, 0.25, 0.5, 0.25};
    const double tau = 0.4, d = 0.07;
    const std::vector<double> y{tau + d, tau + d, tau + d, tau - d, tau - d, tau - d};
    const std::vector<L> l{L::Target, L::Target, L::Target, L::Nontarget, L::Nontarget, L::Nontarget};
    const auto out = soft_adcf_loss(y, l, tau, cfg);
    CHECK(std::fabs(out.grad_tau) < 1e-15);
    CHECK(out.class_missing[2]);
  }
  SUBCASE("finite differences") {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 20; ++t) {
      const auto b = random_batch(rng);
      const double tau = 0.3 + 0.4 * std::uniform_real_distribution<double>(0, 1)(rng);
      cfg.normalize = t % 2 == 0;
      fd_check(oracle::Loss::Adcf, b, tau, soft_adcf_loss(b.y, b.labels, tau, cfg), cfg, true);
    }
  }
  SUBCASE("gradient signs") {
    std::mt19937_64 rng(17);
    const auto b = random_batch(rng);
    const auto out = soft_adcf_loss(b.y, b.labels, 0.5, cfg);
    for (std::size_t i = 0; i < b.y.size(); ++i) {
      if (b.labels[i] == L::Target)
        CHECK(out.grad_scores[i] < 0);
      else
        CHECK(out.grad_scores[i] > 0);
    }
    double sum = 0;
    for (double g : out.grad_scores)
      sum += g;
    CHECK(out.grad_tau == doctest::Approx(-sum).epsilon(1e-12));
  }
  SUBCASE("fixed threshold") {
    cfg.tau_trainable = false;
    std::mt19937_64 rng(19);
    const auto b = random_batch(rng);
    CHECK(soft_adcf_loss(b.y, b.labels, 0.5, cfg).grad_tau == 0.0);
  }
  SUBCASE("missing class contributes nothing") {
    const std::vector<double> y{0.7, 0.2};
    const std::vector<L> l{L::Target, L::Nontarget};
    const auto out = soft_adcf_loss(y, l, 0.5, cfg);
    CHECK(out.class_missing[2]);
    CHECK_FALSE(out.class_missing[0]);
    CHECK(std::isfinite(out.value));
  }
}

TEST_CASE("binary cross-entropy") {
  const double half[] = {0.5};
  const double one[] = {1.0};
  auto out = bce_loss(half, one);
  CHECK(out.value == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(out.value == doctest::Approx(0.693147).epsilon(1e-6));

  const double p8[] = {0.8};
  out = bce_loss(p8, one);
  CHECK(out.value == doctest::Approx(0.223144).epsilon(1e-6));
  CHECK(out.grad_scores[0] == doctest::Approx(-1.25).epsilon(1e-14));

  const double perfect[] = {1.0 - kBceEpsilon, kBceEpsilon};
  const double t10[] = {1.0, 0.0};
  CHECK(bce_loss(perfect, t10).value < 1e-6);

  const double sat[] = {1.0, 0.0};
  const double t01[] = {0.0, 1.0};
  CHECK(std::isfinite(bce_loss(sat, t01).value));

  SUBCASE("finite differences") {
    std::mt19937_64 rng(23);
    SoftAdcfConfig cfg;
    for (int t = 0; t < 20; ++t) {
      const auto b = random_batch(rng);
      const auto targets = sasv_targets(b.labels);
      fd_check(oracle::Loss::Bce, b, 0.5, bce_loss(b.y, targets), cfg, false);
    }
  }
}

TEST_CASE("combined loss") {
  SoftAdcfConfig cfg;
  std::mt19937_64 rng(29);
  for (int t = 0; t < 20; ++t) {
    const auto b = random_batch(rng);
    const double tau = 0.35 + 0.3 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto a = soft_adcf_loss(b.y, b.labels, tau, cfg);
    const auto c = bce_loss(b.y, sasv_targets(b.labels));
    const auto m = combined_loss(b.y, b.labels, tau, cfg);
    CHECK(m.value == (a.value + c.value) / 2);
    for (std::size_t i = 0; i < b.y.size(); ++i)
      CHECK(m.grad_scores[i] == (a.grad_scores[i] + c.grad_scores[i]) / 2);
    CHECK(m.grad_tau == a.grad_tau / 2);
    CHECK(m.value >= 0.0);
    fd_check(oracle::Loss::Combined, b, tau, m, cfg, true);
  }
}

TEST_CASE("config validation") {
  SoftAdcfConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SoftAdcfConfig{};
  cfg.cost.pi_tar = 2.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
