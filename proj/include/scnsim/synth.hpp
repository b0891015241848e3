#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "scnsim/io.hpp"
#include "scnsim/network.hpp"
#include "scnsim/production.hpp"
#include "scnsim/types.hpp"

namespace scnsim {

/// Parameters of the synthetic economy. The generator is a fixture factory
/// with a heavy-tailed degree model and a tightly knit core whose members
/// are mutually essential; it makes no claim of matching any real topology.
struct SynthSpec {
  std::string preset = "core-periphery";  // core-periphery | fig1
  FirmId firms = 1000;
  BankId banks = 5;
  double edges_per_firm = 8.0;
  double degree_exponent = 2.1;
  double loan_coverage = 0.13;
  std::uint32_t products = 20;
  std::uint32_t core_size = 12;
  double core_dependence = 0.15;   // chance a product depends on a core product
  double essential_share = 0.0;    // essential density among periphery pairs
  double sink_share = 0.40;        // retailers: firms with no in-network sales
  double reciprocity = 0.08;       // chance of a backward (cycle-closing) edge
  double thin_buffer_share = 0.30; // firms whose buffers trail their margin
  double pd_scale = 0.01;
  double bank_leverage = 2.5;      // client exposure over bank equity
  std::uint64_t seed = 7;

  void validate() const {
    if (firms < 1) throw ValidationError("synth: firms must be >= 1");
    if (banks < 1) throw ValidationError("synth: banks must be >= 1");
    if (edges_per_firm < 0.0) throw ValidationError("synth: negative edge density");
    const double max_edges =
        static_cast<double>(firms) * (static_cast<double>(firms) - 1.0);
    if (edges_per_firm * static_cast<double>(firms) > max_edges) {
      throw ValidationError("synth: edge density exceeds the complete graph");
    }
    if (degree_exponent <= 1.0) {
      throw ValidationError("synth: degree exponent must be > 1");
    }
    if (!(loan_coverage >= 0.0 && loan_coverage <= 1.0)) {
      throw ValidationError("synth: loan coverage must lie in [0,1]");
    }
    if (products < 1) throw ValidationError("synth: products must be >= 1");
  }
};

/// The six-firm, four-bank textbook economy: one supplier chain b->c, a hub f
/// selling to a, d, e, d essentially dependent on f, unit loans from f and d
/// at banks 2 and 3, all bank equities 5. Meant to run with floor_share = 1.
inline Dataset fig1_dataset() {
  Dataset ds;
  std::vector<ProductCode> product = {0, 1, 2, 3, 4, 5};
  const std::vector<EdgeInput> edges = {
      {1, 2, 1.0},  // b supplies c
      {5, 0, 1.0},  // f supplies a
      {5, 3, 1.0},  // f supplies d
      {5, 4, 1.0},  // f supplies e
  };
  ds.net = build_network(edges, std::move(product));
  const std::size_t n = 6;
  ds.fin.revenue.assign(n, 100.0);
  ds.fin.material_costs.assign(n, 90.0);
  ds.fin.other_profit.assign(n, 0.0);
  ds.fin.equity = {50.0, 50.0, 50.0, 5.0, 50.0, 5.0};
  ds.fin.short_term_assets.assign(n, 100.0);
  ds.fin.short_term_liabilities.assign(n, 50.0);
  ds.fin.pd.assign(n, 0.1);
  const std::vector<LoanInput> loans = {{5, 2, 1.0}, {3, 2, 1.0}, {3, 3, 1.0}};
  ds.banks = BankLayer::build(6, {5.0, 5.0, 5.0, 5.0}, loans);
  ds.ess.set(5, 3, InputClass::essential);  // f's product is essential to d
  return ds;
}

inline Dataset synthesize(const SynthSpec& spec) {
  if (spec.preset == "fig1") return fig1_dataset();
  if (spec.preset != "core-periphery" && !spec.preset.empty()) {
    throw ValidationError("synth: unknown preset '" + spec.preset + "'");
  }
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const FirmId n = spec.firms;
  const std::uint32_t core = std::min<std::uint32_t>(spec.core_size, n);
  const std::uint32_t products = std::max(spec.products, core + 1);
  // Core firms produce dedicated product codes; the periphery draws from the
  // remaining range, so core essentiality never leaks into periphery pairs.
  const std::uint32_t core_products = core;
  const std::uint32_t periphery_products = products - core_products;

  std::vector<ProductCode> product(n);
  for (FirmId i = 0; i < n; ++i) {
    product[i] = i < core
                     ? i
                     : core_products +
                           static_cast<ProductCode>(rng() % periphery_products);
  }

  // Heavy-tailed out-degrees: bounded Pareto draws rescaled to the target
  // edge count. Core firms receive the top of the distribution. A share of
  // the periphery sells nothing in-network (retailers facing final demand);
  // without them every demand loop closes and any dent spirals the whole
  // economy downward.
  const double target_edges = spec.edges_per_firm * static_cast<double>(n);
  const double inv = 1.0 / (spec.degree_exponent - 1.0);
  const double cap = std::max(4.0, static_cast<double>(n) / 10.0);
  std::vector<double> raw(n);
  std::vector<double> attract(n);
  for (FirmId i = 0; i < n; ++i) {
    raw[i] = std::min(std::pow(std::max(uni(rng), 1e-12), -inv), cap);
    if (i < core) raw[i] = cap * (0.5 + 0.5 * uni(rng));
    attract[i] = std::min(std::pow(std::max(uni(rng), 1e-12), -inv), cap);
  }
  // Retailers: periphery firms that buy but sell nothing in-network. The
  // biggest buyers are retailers first, so most demand is anchored within
  // one hop; a random share joins them until the head count is reached.
  double attract_sum = 0.0;
  for (FirmId i = 0; i < n; ++i) attract_sum += attract[i];
  {
    std::vector<FirmId> by_attract(n);
    for (FirmId i = 0; i < n; ++i) by_attract[i] = i;
    std::sort(by_attract.begin(), by_attract.end(),
              [&](FirmId a, FirmId b) { return attract[a] > attract[b]; });
    double sink_mass = 0.0;
    std::size_t sinks = 0;
    const auto sink_target = static_cast<std::size_t>(
        spec.sink_share * static_cast<double>(n));
    for (FirmId i : by_attract) {
      if (i < core) continue;
      if (sink_mass < 0.55 * attract_sum && sinks < sink_target) {
        raw[i] = 0.0;
        sink_mass += attract[i];
        ++sinks;
      }
    }
    for (FirmId i = core; i < n && sinks < sink_target; ++i) {
      if (raw[i] > 0.0 && uni(rng) < spec.sink_share) {
        raw[i] = 0.0;
        ++sinks;
      }
    }
  }
  double raw_sum = 0.0;
  for (FirmId i = 0; i < n; ++i) raw_sum += raw[i];
  std::vector<double> cum(n);
  {
    double acc = 0.0;
    for (FirmId i = 0; i < n; ++i) {
      acc += attract[i];
      cum[i] = acc;
    }
  }

  // Periphery trade is mostly feed-forward (toward higher indices or
  // retailers); only a small reciprocity share closes cycles. Long strong
  // cycles otherwise give the fixed point extremely slow-decaying modes.
  std::vector<EdgeInput> edges;
  edges.reserve(static_cast<std::size_t>(target_edges) + 8 * core);
  std::vector<bool> is_sink(n);
  for (FirmId i = 0; i < n; ++i) is_sink[i] = raw[i] == 0.0 && i >= core;
  for (FirmId i = 0; i < n; ++i) {
    if (raw[i] == 0.0) continue;
    const auto degree = static_cast<std::uint32_t>(
        std::max(1.0, std::round(raw[i] / raw_sum * target_edges)));
    for (std::uint32_t d = 0; d < degree; ++d) {
      FirmId j = n;
      for (int attempt = 0; attempt < 8; ++attempt) {
        const double pick = uni(rng) * attract_sum;
        const auto it = std::lower_bound(cum.begin(), cum.end(), pick);
        auto cand = static_cast<FirmId>(it - cum.begin());
        if (cand >= n) cand = n - 1;
        if (cand == i) continue;
        if (is_sink[cand] || cand > i || uni(rng) < spec.reciprocity) {
          j = cand;
          break;
        }
      }
      if (j >= n) continue;
      const double w = std::max(1.0, std::round(std::exp(2.0 + 0.8 * gauss(rng))));
      edges.push_back(EdgeInput{i, j, w});
    }
  }
  // Core ring plus chords. Their weights stay small: the mutual essential
  // classification already makes any core failure collapse the whole ring,
  // while heavy intra-core sales would hand the demand loop a slow mode.
  if (core >= 2) {
    double mean_w = 0.0;
    for (const auto& e : edges) mean_w += e.weight;
    mean_w = edges.empty() ? 10.0 : mean_w / static_cast<double>(edges.size());
    const double core_w = std::max(4.0, std::round(mean_w * 2.0));
    for (std::uint32_t c = 0; c < core; ++c) {
      const FirmId a = c;
      const FirmId b = (c + 1) % core;
      if (a != b) edges.push_back(EdgeInput{a, b, core_w});
      const FirmId chord = (c + 2 + rng() % std::max(1u, core - 3)) % core;
      if (chord != a) edges.push_back(EdgeInput{a, chord, core_w / 2.0});
    }
  }

  Dataset ds;
  ds.net = build_network(edges, std::move(product));

  // Essentiality: core products are mutually essential; a share of periphery
  // products depends essentially on core products; sparse essential pairs
  // among the periphery.
  for (std::uint32_t a = 0; a < core_products; ++a) {
    for (std::uint32_t b = 0; b < core_products; ++b) {
      if (a != b) ds.ess.set(a, b, InputClass::essential);
    }
  }
  for (std::uint32_t a = 0; a < core_products; ++a) {
    for (std::uint32_t b = core_products; b < products; ++b) {
      if (uni(rng) < spec.core_dependence) {
        ds.ess.set(a, b, InputClass::essential);
      }
    }
  }
  for (std::uint32_t a = core_products; a < products; ++a) {
    for (std::uint32_t b = core_products; b < products; ++b) {
      if (a != b && uni(rng) < spec.essential_share) {
        ds.ess.set(a, b, InputClass::essential);
      }
    }
  }

  // Financials from realized strengths; margins positive throughout, buffers
  // thin for a tunable share of firms, never insolvent before a shock.
  const Strengths st = compute_strengths(ds.net);
  const FirmId nn = ds.net.firm_count();
  ds.fin.revenue.resize(nn);
  ds.fin.material_costs.resize(nn);
  ds.fin.other_profit.resize(nn);
  ds.fin.equity.resize(nn);
  ds.fin.short_term_assets.resize(nn);
  ds.fin.short_term_liabilities.resize(nn);
  ds.fin.pd.resize(nn);
  for (FirmId i = 0; i < nn; ++i) {
    const double size = std::max({st.s_out[i], st.s_in[i], 10.0});
    const double r = std::round(size * (1.1 + 0.4 * uni(rng)));
    const double c = std::round(r * (0.60 + 0.32 * uni(rng)));
    const double margin = r - c;
    ds.fin.revenue[i] = r;
    ds.fin.material_costs[i] = c;
    ds.fin.other_profit[i] = std::round(margin * (uni(rng) - 0.5) * 0.2);
    const bool thin_eq = uni(rng) < spec.thin_buffer_share;
    const bool thin_liq = uni(rng) < spec.thin_buffer_share;
    // Thin firms fail once production drops by 25-90%; robust firms survive
    // even a full stop.
    const double z = margin * (thin_eq ? 0.25 + 0.65 * uni(rng)
                                       : 1.5 + 4.5 * uni(rng));
    const double liq = margin * (thin_liq ? 0.25 + 0.65 * uni(rng)
                                          : 1.5 + 4.5 * uni(rng));
    ds.fin.equity[i] = std::max(1.0, std::round(z));
    const double a = std::round(liq + c * (0.05 + 0.25 * uni(rng)));
    ds.fin.short_term_assets[i] = std::max(1.0, a);
    ds.fin.short_term_liabilities[i] =
        std::max(0.0, ds.fin.short_term_assets[i] - std::max(1.0, std::round(liq)));
    double p = spec.pd_scale * std::exp(0.8 * gauss(rng));
    if (i < core) p = spec.pd_scale * (1.0 + 2.0 * uni(rng));
    ds.fin.pd[i] = std::clamp(p, 1e-5, 0.9);
  }

  // Loans: coverage fraction of firms borrow from 1-2 banks, exposure scales
  // with firm size; bank equity set from realized books via the leverage.
  const BankId m = spec.banks;
  std::vector<FirmId> perm(nn);
  for (FirmId i = 0; i < nn; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto borrowers = static_cast<std::size_t>(
      std::round(spec.loan_coverage * static_cast<double>(nn)));
  std::vector<double> bank_attr(m);
  double bank_attr_sum = 0.0;
  for (BankId k = 0; k < m; ++k) {
    bank_attr[k] = std::pow(static_cast<double>(k + 1), -0.7);
    bank_attr_sum += bank_attr[k];
  }
  std::vector<LoanInput> loans;
  std::vector<double> book(m, 0.0);
  for (std::size_t b = 0; b < borrowers && b < perm.size(); ++b) {
    const FirmId i = perm[b];
    const double size = std::max({st.s_out[i], st.s_in[i], 10.0});
    const int k_loans = uni(rng) < 0.3 ? 2 : 1;
    for (int l = 0; l < k_loans; ++l) {
      double pick = uni(rng) * bank_attr_sum;
      BankId k = 0;
      while (k + 1 < m && pick > bank_attr[k]) {
        pick -= bank_attr[k];
        ++k;
      }
      const double expo = std::max(1.0, std::round(size * (0.1 + 0.4 * uni(rng))));
      loans.push_back(LoanInput{i, k, expo});
      book[k] += expo;
    }
  }
  std::vector<double> equity(m);
  for (BankId k = 0; k < m; ++k) {
    equity[k] = std::max(1.0, std::round(book[k] / spec.bank_leverage));
  }
  ds.banks = BankLayer::build(nn, std::move(equity), loans);
  return ds;
}

}  // namespace scnsim
