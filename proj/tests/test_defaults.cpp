#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "scnsim/bank.hpp"
#include "scnsim/defaults.hpp"
#include "scnsim/synth.hpp"
#include "support/fixtures.hpp"

using namespace scnsim;

namespace {

FirmFinancials one_firm(double r, double c, double z, double a, double s) {
  FirmFinancials f;
  f.revenue = {r};
  f.material_costs = {c};
  f.other_profit = {0.0};
  f.equity = {z};
  f.short_term_assets = {a};
  f.short_term_liabilities = {s};
  f.pd = {0.1};
  return f;
}

}  // namespace

TEST_CASE("profit delta evaluates the production shortfall") {
  auto fin = one_firm(100.0, 60.0, 20.0, 10.0, 5.0);
  SECTION("no production loss, no profit change") {
    auto dp = profit_delta(std::vector<double>{1.0}, fin);
    CHECK(dp[0] == 0.0);
  }
  SECTION("full stop loses the whole operating margin") {
    auto dp = profit_delta(std::vector<double>{0.0}, fin);
    CHECK(dp[0] == 40.0);
  }
  SECTION("partial stop scales linearly") {
    auto dp = profit_delta(std::vector<double>{0.7}, fin);
    CHECK(dp[0] == Catch::Approx(12.0));
  }
  SECTION("negative margin gains from a stop") {
    auto loss_maker = one_firm(60.0, 100.0, 20.0, 10.0, 5.0);
    auto dp = profit_delta(std::vector<double>{0.0}, loss_maker);
    CHECK(dp[0] == -40.0);
  }
}

TEST_CASE("default evaluation") {
  SECTION("liquidity breach without equity breach") {
    auto fin = one_firm(100.0, 60.0, 20.0, 8.0, 3.0);  // z=20, a-s=5
    auto d = evaluate_defaults(std::vector<double>{12.0}, fin);
    CHECK(d.chi_eq[0] == 0);
    CHECK(d.chi_l[0] == 1);
    CHECK(d.chi[0] == 1);
  }
  SECTION("boundary equality counts as default") {
    auto fin = one_firm(100.0, 60.0, 12.0, 100.0, 5.0);
    auto d = evaluate_defaults(std::vector<double>{12.0}, fin);
    CHECK(d.chi_eq[0] == 1);
  }
  SECTION("firm already insolvent defaults at zero shock") {
    auto fin = one_firm(100.0, 60.0, 20.0, 5.0, 9.0);  // a-s < 0
    auto d = evaluate_defaults(std::vector<double>{0.0}, fin);
    CHECK(d.chi_l[0] == 1);
    CHECK(d.chi[0] == 1);
  }
}

TEST_CASE("split_defaults on the fig1 scenario") {
  // chi = (0,0,0,1,0,1) under psi failing only f.
  std::vector<std::uint8_t> chi = {0, 0, 0, 1, 0, 1};
  auto psi = ShockVector::single_firm(6, 5);
  auto s = split_defaults(chi, psi);
  CHECK(s.indir == std::vector<std::uint8_t>{0, 0, 0, 1, 0, 0});
  CHECK(s.dir == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1});
}

TEST_CASE("split_defaults edge cases") {
  SECTION("no defaults, both parts empty") {
    std::vector<std::uint8_t> chi(4, 0);
    auto s = split_defaults(chi, ShockVector::single_firm(4, 2));
    CHECK(s.dir == std::vector<std::uint8_t>(4, 0));
    CHECK(s.indir == std::vector<std::uint8_t>(4, 0));
  }
  SECTION("untouched shock makes every default indirect") {
    std::vector<std::uint8_t> chi = {1, 0, 1};
    auto s = split_defaults(chi, ShockVector(3));
    CHECK(s.indir == chi);
    CHECK(s.dir == std::vector<std::uint8_t>(3, 0));
  }
}

TEST_CASE("decomposition identities hold on random instances") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 150; ++rep) {
    auto ds = fixtures::random_economy(rng);
    const FirmId n = ds.net.firm_count();
    ProductionEngine eng(ds.net, ds.ess, 0.5);
    auto psi = fixtures::random_shock(rng, n);
    auto res = eng.propagate(psi, 1e-6, 1000);
    auto dp = profit_delta(res.h, ds.fin);
    auto d = evaluate_defaults(dp, ds.fin);
    auto s = split_defaults(d.chi, psi);
    for (FirmId i = 0; i < n; ++i) {
      CHECK(d.chi[i] == std::max(d.chi_eq[i], d.chi_l[i]));
      CHECK(s.dir[i] + s.indir[i] == d.chi[i]);
      CHECK(s.dir[i] * s.indir[i] == 0);
      if (s.indir[i]) CHECK(psi.value(i) == 1.0);
    }
  }
}

TEST_CASE("defaults are monotone in production for non-negative margins") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 100; ++rep) {
    auto ds = fixtures::random_economy(rng);  // positive margins by default
    const FirmId n = ds.net.firm_count();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> h(n), lower(n);
    for (FirmId i = 0; i < n; ++i) {
      h[i] = uni(rng);
      lower[i] = h[i] * uni(rng);
    }
    auto d_hi = evaluate_defaults(profit_delta(h, ds.fin), ds.fin);
    auto d_lo = evaluate_defaults(profit_delta(lower, ds.fin), ds.fin);
    for (FirmId i = 0; i < n; ++i) {
      CHECK(d_lo.chi[i] >= d_hi.chi[i]);
    }
  }
}

TEST_CASE("direct defaults equal the no-propagation shortcut") {
  // With binary shocks and no firm insolvent at rest, evaluating defaults at
  // h := psi reproduces the direct component exactly.
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 100; ++rep) {
    auto ds = fixtures::random_economy(rng);
    const FirmId n = ds.net.firm_count();
    ProductionEngine eng(ds.net, ds.ess, 0.5);
    auto psi = fixtures::random_shock(rng, n, /*binary_only=*/true);
    auto res = eng.propagate(psi, 1e-6, 1000);
    auto full = evaluate_defaults(profit_delta(res.h, ds.fin), ds.fin);
    auto split = split_defaults(full.chi, psi);
    auto shortcut = evaluate_defaults(profit_delta(psi.dense(), ds.fin), ds.fin);
    for (FirmId i = 0; i < n; ++i) {
      CHECK(shortcut.chi[i] == split.dir[i]);
    }
  }
}
