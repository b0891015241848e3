#pragma once

// Shared fixtures and generators for the test suites.

#include <random>
#include <vector>

#include "scnsim/io.hpp"
#include "scnsim/network.hpp"
#include "scnsim/production.hpp"
#include "scnsim/synth.hpp"

namespace fixtures {

using namespace scnsim;

struct RandomEconomyOptions {
  FirmId n_min = 3;
  FirmId n_max = 8;
  std::uint32_t products_max = 4;
  double edge_prob = 0.35;
  double essential_prob = 0.3;
  double loan_prob = 0.5;
  BankId banks_max = 4;
  bool positive_margin = true;       // r >= c for every firm
  bool no_baseline_insolvent = true; // positive equity and liquidity buffers
};

inline Dataset random_economy(std::mt19937_64& rng,
                              const RandomEconomyOptions& opt = {}) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const FirmId n =
      opt.n_min + static_cast<FirmId>(rng() % (opt.n_max - opt.n_min + 1));
  const std::uint32_t products = 1 + static_cast<std::uint32_t>(rng() % opt.products_max);

  std::vector<ProductCode> product(n);
  for (FirmId i = 0; i < n; ++i) product[i] = static_cast<ProductCode>(rng() % products);

  std::vector<EdgeInput> edges;
  for (FirmId i = 0; i < n; ++i) {
    for (FirmId j = 0; j < n; ++j) {
      if (i != j && uni(rng) < opt.edge_prob) {
        edges.push_back(EdgeInput{i, j, static_cast<double>(1 + rng() % 20)});
      }
    }
  }

  Dataset ds;
  ds.net = build_network(edges, std::move(product));
  for (std::uint32_t a = 0; a < products; ++a) {
    for (std::uint32_t b = 0; b < products; ++b) {
      if (uni(rng) < opt.essential_prob) ds.ess.set(a, b, InputClass::essential);
    }
  }

  ds.fin.revenue.resize(n);
  ds.fin.material_costs.resize(n);
  ds.fin.other_profit.resize(n);
  ds.fin.equity.resize(n);
  ds.fin.short_term_assets.resize(n);
  ds.fin.short_term_liabilities.resize(n);
  ds.fin.pd.resize(n);
  for (FirmId i = 0; i < n; ++i) {
    const double r = static_cast<double>(50 + rng() % 150);
    double c = opt.positive_margin ? r * (0.5 + 0.45 * uni(rng))
                                   : r * (0.5 + 0.7 * uni(rng));
    c = std::round(c);
    if (opt.positive_margin && c > r) c = r;
    ds.fin.revenue[i] = r;
    ds.fin.material_costs[i] = c;
    ds.fin.other_profit[i] = static_cast<double>(static_cast<int>(rng() % 11) - 5);
    const double margin = r - c;
    const double z = opt.no_baseline_insolvent
                         ? std::max(1.0, std::round(margin * (0.2 + 2.8 * uni(rng))))
                         : std::round(margin * (3.0 * uni(rng) - 0.5));
    ds.fin.equity[i] = z;
    const double liq = opt.no_baseline_insolvent
                           ? std::max(1.0, std::round(margin * (0.2 + 2.8 * uni(rng))))
                           : std::round(margin * (3.0 * uni(rng) - 0.5));
    ds.fin.short_term_assets[i] = std::max(liq, 0.0) + static_cast<double>(rng() % 40);
    ds.fin.short_term_liabilities[i] = ds.fin.short_term_assets[i] - liq;
    ds.fin.pd[i] = 0.01 + 0.4 * uni(rng);
  }

  const BankId m = 1 + static_cast<BankId>(rng() % opt.banks_max);
  std::vector<double> equity(m);
  for (BankId k = 0; k < m; ++k) equity[k] = static_cast<double>(5 + rng() % 46);
  std::vector<LoanInput> loans;
  for (FirmId i = 0; i < n; ++i) {
    if (uni(rng) < opt.loan_prob) {
      const int cnt = 1 + static_cast<int>(rng() % 2);
      for (int l = 0; l < cnt; ++l) {
        loans.push_back(LoanInput{i, static_cast<BankId>(rng() % m),
                                  static_cast<double>(1 + rng() % 15)});
      }
    }
  }
  ds.banks = BankLayer::build(n, std::move(equity), loans);
  return ds;
}

/// Random shock vector; levels are a mix of 0, fractions, and untouched.
inline ShockVector random_shock(std::mt19937_64& rng, FirmId n,
                                bool binary_only = false) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  ShockVector psi(n);
  for (FirmId i = 0; i < n; ++i) {
    const double roll = uni(rng);
    if (roll < 0.25) {
      psi.set(i, 0.0);
    } else if (!binary_only && roll < 0.45) {
      psi.set(i, uni(rng));
    }
  }
  return psi;
}

/// Economy with no trade links at all: defaults are exactly the drawn
/// failures (margins exceed equity), so direct expected losses have a closed
/// form.
inline Dataset no_contagion_fixture(std::mt19937_64& rng, FirmId n, BankId m) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Dataset ds;
  std::vector<ProductCode> product(n, 0);
  ds.net = build_network(std::vector<EdgeInput>{}, std::move(product));
  ds.fin.revenue.assign(n, 100.0);
  ds.fin.material_costs.assign(n, 60.0);
  ds.fin.other_profit.assign(n, 0.0);
  ds.fin.equity.assign(n, 5.0);  // margin 40 wipes out equity 5
  ds.fin.short_term_assets.assign(n, 200.0);
  ds.fin.short_term_liabilities.assign(n, 50.0);
  ds.fin.pd.resize(n);
  for (FirmId i = 0; i < n; ++i) ds.fin.pd[i] = 0.05 + 0.5 * uni(rng);
  std::vector<double> equity(m);
  for (BankId k = 0; k < m; ++k) equity[k] = 50.0 + static_cast<double>(rng() % 100);
  std::vector<LoanInput> loans;
  for (FirmId i = 0; i < n; ++i) {
    loans.push_back(LoanInput{i, static_cast<BankId>(rng() % m),
                              static_cast<double>(1 + rng() % 20)});
  }
  ds.banks = BankLayer::build(n, std::move(equity), loans);
  return ds;
}

}  // namespace fixtures
