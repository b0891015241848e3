#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "scnsim/bank.hpp"
#include "scnsim/defaults.hpp"
#include "scnsim/network.hpp"
#include "scnsim/production.hpp"
#include "scnsim/rng.hpp"

namespace scnsim {

/// A batch of initial shock scenarios. Each scenario is the set of firms
/// whose production drops to zero; membership is a pure function of
/// (seed, scenario, firm).
struct ScenarioSet {
  std::uint64_t seed = 0;
  std::uint32_t count = 0;
  std::string generator;
  std::vector<std::vector<FirmId>> failures;
};

/// Independent Bernoulli failure draws, one per (scenario, firm).
inline ScenarioSet sample_scenarios(std::span<const double> pd, std::uint32_t n_scenarios,
                                    std::uint64_t seed,
                                    const std::string& tag = "idiosyncratic-pd") {
  for (double p : pd) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ValidationError("default probability outside [0,1]");
    }
  }
  if (n_scenarios < 1) throw ValidationError("scenario count must be >= 1");
  ScenarioSet s;
  s.seed = seed;
  s.count = n_scenarios;
  s.generator = tag;
  s.failures.resize(n_scenarios);
  for (std::uint32_t l = 0; l < n_scenarios; ++l) {
    auto& f = s.failures[l];
    for (FirmId i = 0; i < pd.size(); ++i) {
      if (pd[i] > 0.0 && rng::uniform(seed, l, i) < pd[i]) f.push_back(i);
    }
  }
  return s;
}

/// Direct and contagion-adjusted loss samples, per bank and system-wide.
/// Scenario-by-scenario the adjusted loss dominates the direct loss.
struct LossDistribution {
  std::uint32_t scenarios = 0;
  std::vector<std::vector<double>> bank_direct;    // [bank][scenario]
  std::vector<std::vector<double>> bank_adjusted;  // [bank][scenario]
  std::vector<double> system_direct;
  std::vector<double> system_adjusted;
  std::size_t nonconverged = 0;
};

struct StressOptions {
  double eps = 1e-6;
  int max_iter = 1000;
  double lgd = 1.0;
  unsigned threads = 0;
};

namespace detail {

template <typename Fn>
void parallel_scenarios(std::uint32_t count, unsigned threads, Fn&& fn) {
  const unsigned t = ProductionEngine::effective_threads(threads, count);
  if (t <= 1) {
    for (std::uint32_t l = 0; l < count; ++l) fn(0u, l);
    return;
  }
  std::atomic<std::uint32_t> cursor{0};
  constexpr std::uint32_t kBlock = 16;
  std::vector<std::thread> pool;
  pool.reserve(t);
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w]() {
      for (;;) {
        const std::uint32_t begin = cursor.fetch_add(kBlock);
        if (begin >= count) break;
        const std::uint32_t end = std::min(begin + kBlock, count);
        for (std::uint32_t l = begin; l < end; ++l) fn(w, l);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Runs every scenario through the three model steps, producing the direct
/// (propagation skipped, h := psi) and contagion-adjusted loss samples.
inline LossDistribution run_stress(const ScenarioSet& scenarios,
                                   const ProductionEngine& engine,
                                   const FirmFinancials& fin,
                                   const BankLayer& banks,
                                   const StressOptions& opts = {}) {
  const FirmId n = engine.network().firm_count();
  const BankId m = banks.bank_count();
  const detail::SweepBaseline base = detail::make_baseline(fin, banks, opts.lgd);
  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto eq = banks.equity();
  const double total_equity = banks.total_equity();
  double base_num = 0.0;
  for (BankId k = 0; k < m; ++k) base_num += base.base_tot[k] * eq[k];

  LossDistribution out;
  out.scenarios = scenarios.count;
  out.bank_direct.assign(m, std::vector<double>(scenarios.count, 0.0));
  out.bank_adjusted.assign(m, std::vector<double>(scenarios.count, 0.0));
  out.system_direct.assign(scenarios.count, 0.0);
  out.system_adjusted.assign(scenarios.count, 0.0);
  std::atomic<std::size_t> bad{0};

  const unsigned workers =
      ProductionEngine::effective_threads(opts.threads, scenarios.count);
  struct Worker {
    CascadeScratch ws;
    detail::SweepBankScratch bs;
  };
  std::vector<Worker> pool(workers);

  detail::parallel_scenarios(scenarios.count, opts.threads, [&](unsigned w,
                                                                std::uint32_t l) {
    Worker& wk = pool[w];
    wk.ws.ensure(n);
    wk.bs.ensure(m);
    const auto& failed = scenarios.failures[l];

    // Direct losses: solvency re-evaluated at h := psi, no propagation.
    for (FirmId i : failed) {
      const double dp = fin.operating_margin(i);
      const bool dchi = equity_default(fin, i, dp) || liquidity_default(fin, i, dp);
      const double d_tot = (dchi ? 1.0 : 0.0) - (base.chi0[i] ? 1.0 : 0.0);
      if (d_tot == 0.0 || !banks.has_loans(i)) continue;
      for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
        const BankId k = bank[e];
        wk.bs.mark(k);
        wk.bs.tot[k] += d_tot * opts.lgd * base.loan_frac[e];
      }
    }
    double num = base_num;
    for (BankId k = 0; k < m; ++k) out.bank_direct[k][l] = base.base_tot[k];
    for (BankId k : wk.bs.touched_banks) {
      out.bank_direct[k][l] += wk.bs.tot[k];
      num += wk.bs.tot[k] * eq[k];
    }
    out.system_direct[l] = total_equity > 0.0 ? num / total_equity : 0.0;
    wk.bs.reset();

    // Contagion-adjusted losses: full propagation first.
    const CascadeStats st = engine.cascade(
        wk.ws, ShockVector::failures(n, failed), opts.eps, opts.max_iter);
    if (!st.converged) bad.fetch_add(1, std::memory_order_relaxed);
    for (FirmId i : wk.ws.touched) {
      const double dp = (1.0 - wk.ws.h[i]) * fin.operating_margin(i);
      const bool dchi = equity_default(fin, i, dp) || liquidity_default(fin, i, dp);
      const double d_tot = (dchi ? 1.0 : 0.0) - (base.chi0[i] ? 1.0 : 0.0);
      if (d_tot == 0.0 || !banks.has_loans(i)) continue;
      for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
        const BankId k = bank[e];
        wk.bs.mark(k);
        wk.bs.tot[k] += d_tot * opts.lgd * base.loan_frac[e];
      }
    }
    num = base_num;
    for (BankId k = 0; k < m; ++k) out.bank_adjusted[k][l] = base.base_tot[k];
    for (BankId k : wk.bs.touched_banks) {
      out.bank_adjusted[k][l] += wk.bs.tot[k];
      num += wk.bs.tot[k] * eq[k];
    }
    out.system_adjusted[l] = total_equity > 0.0 ? num / total_equity : 0.0;
    wk.bs.reset();
    engine.reset_scratch(wk.ws);
  });
  out.nonconverged = bad.load();
  return out;
}

/// Direct losses only (h := psi, no propagation). Same arithmetic as the
/// direct half of run_stress.
struct DirectDistribution {
  std::uint32_t scenarios = 0;
  std::vector<std::vector<double>> bank;  // [bank][scenario]
  std::vector<double> system;
};

inline DirectDistribution run_direct_stress(const ScenarioSet& scenarios,
                                            const FirmFinancials& fin,
                                            const BankLayer& banks,
                                            const StressOptions& opts = {}) {
  const BankId m = banks.bank_count();
  const detail::SweepBaseline base = detail::make_baseline(fin, banks, opts.lgd);
  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto eq = banks.equity();
  const double total_equity = banks.total_equity();
  double base_num = 0.0;
  for (BankId k = 0; k < m; ++k) base_num += base.base_tot[k] * eq[k];

  DirectDistribution out;
  out.scenarios = scenarios.count;
  out.bank.assign(m, std::vector<double>(scenarios.count, 0.0));
  out.system.assign(scenarios.count, 0.0);
  std::vector<detail::SweepBankScratch> pool(
      ProductionEngine::effective_threads(opts.threads, scenarios.count));
  detail::parallel_scenarios(scenarios.count, opts.threads, [&](unsigned w,
                                                                std::uint32_t l) {
    detail::SweepBankScratch& bs = pool[w];
    bs.ensure(m);
    for (FirmId i : scenarios.failures[l]) {
      const double dp = fin.operating_margin(i);
      const bool dchi = equity_default(fin, i, dp) || liquidity_default(fin, i, dp);
      const double d_tot = (dchi ? 1.0 : 0.0) - (base.chi0[i] ? 1.0 : 0.0);
      if (d_tot == 0.0 || !banks.has_loans(i)) continue;
      for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
        const BankId k = bank[e];
        bs.mark(k);
        bs.tot[k] += d_tot * opts.lgd * base.loan_frac[e];
      }
    }
    double num = base_num;
    for (BankId k = 0; k < m; ++k) out.bank[k][l] = base.base_tot[k];
    for (BankId k : bs.touched_banks) {
      out.bank[k][l] += bs.tot[k];
      num += bs.tot[k] * eq[k];
    }
    out.system[l] = total_equity > 0.0 ? num / total_equity : 0.0;
    bs.reset();
  });
  return out;
}

struct RiskMeasures {
  double el = 0.0;
  double var = 0.0;
  double es = 0.0;
};

/// Index convention: VaR is the ascending order statistic at ceil(q*N)
/// (1-based, no interpolation); ES averages the N - ceil(q*N) larger values.
/// With q = 0.95 and N = 10,000 the ES therefore averages exactly the 500
/// largest losses. An empty tail degenerates to ES = VaR.
inline std::size_t var_index(std::size_t n, double q) {
  double x = q * static_cast<double>(n);
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) x = r;
  auto idx = static_cast<std::size_t>(std::ceil(x));
  if (idx < 1) idx = 1;
  if (idx > n) idx = n;
  return idx;
}

inline RiskMeasures risk_measures(std::span<const double> sample, double q) {
  if (sample.empty()) throw ValidationError("risk measures need a non-empty sample");
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile must lie in (0,1)");
  RiskMeasures r;
  double sum = 0.0;
  for (double v : sample) sum += v;
  r.el = sum / static_cast<double>(sample.size());
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t idx = var_index(sorted.size(), q);
  r.var = sorted[idx - 1];
  if (idx < sorted.size()) {
    double tail = 0.0;
    for (std::size_t i = idx; i < sorted.size(); ++i) tail += sorted[i];
    r.es = tail / static_cast<double>(sorted.size() - idx);
  } else {
    r.es = r.var;
  }
  return r;
}

/// Ratio of contagion-adjusted to direct risk, per measure. Undefined where
/// the direct value is zero; averages skip undefined entries.
struct AmplificationEntry {
  std::optional<double> el, var, es;
};

struct AmplificationReport {
  std::vector<AmplificationEntry> banks;
  AmplificationEntry system;
  std::optional<double> avg_el, avg_var, avg_es;
  std::uint32_t defined_el = 0, defined_var = 0, defined_es = 0;
};

inline std::optional<double> ratio_or_undefined(double adjusted, double direct) {
  if (direct > 0.0) return adjusted / direct;
  return std::nullopt;
}

inline AmplificationReport amplification(std::span<const RiskMeasures> direct,
                                         std::span<const RiskMeasures> adjusted,
                                         const RiskMeasures& system_direct,
                                         const RiskMeasures& system_adjusted) {
  if (direct.size() != adjusted.size()) {
    throw ValidationError("amplification inputs must cover the same banks");
  }
  AmplificationReport rep;
  rep.banks.resize(direct.size());
  double se = 0.0, sv = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < direct.size(); ++k) {
    rep.banks[k].el = ratio_or_undefined(adjusted[k].el, direct[k].el);
    rep.banks[k].var = ratio_or_undefined(adjusted[k].var, direct[k].var);
    rep.banks[k].es = ratio_or_undefined(adjusted[k].es, direct[k].es);
    if (rep.banks[k].el) {
      se += *rep.banks[k].el;
      ++rep.defined_el;
    }
    if (rep.banks[k].var) {
      sv += *rep.banks[k].var;
      ++rep.defined_var;
    }
    if (rep.banks[k].es) {
      ss += *rep.banks[k].es;
      ++rep.defined_es;
    }
  }
  if (rep.defined_el) rep.avg_el = se / rep.defined_el;
  if (rep.defined_var) rep.avg_var = sv / rep.defined_var;
  if (rep.defined_es) rep.avg_es = ss / rep.defined_es;
  rep.system.el = ratio_or_undefined(system_adjusted.el, system_direct.el);
  rep.system.var = ratio_or_undefined(system_adjusted.var, system_direct.var);
  rep.system.es = ratio_or_undefined(system_adjusted.es, system_direct.es);
  return rep;
}

/// Critical suppliers/buyers: firms whose single failure defaults firm i.
/// Requires a sweep run with collect_critical enabled.
inline std::vector<std::vector<FirmId>> critical_sets(const SweepResult& sweep) {
  if (sweep.critical_sets.size() != sweep.records.size()) {
    throw ValidationError(
        "sweep was run without critical-set collection; enable collect_critical");
  }
  return sweep.critical_sets;
}

struct AdjustedPd {
  std::vector<double> q;
  std::vector<std::uint32_t> critical_count;
};

/// Contagion-adjusted default probability: the chance that the firm itself
/// or any of its critical suppliers/buyers fails,
/// q_i = 1 - (1 - pd_i) * prod_{j in crit(i)} (1 - pd_j).
inline AdjustedPd adjusted_pd(const std::vector<std::vector<FirmId>>& critical,
                              std::span<const double> pd) {
  AdjustedPd out;
  const std::size_t n = pd.size();
  if (critical.size() != n) {
    throw ValidationError("critical sets and pd vector differ in length");
  }
  out.q.resize(n);
  out.critical_count.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double surv = 1.0 - pd[i];
    for (FirmId j : critical[i]) surv *= 1.0 - pd[j];
    out.q[i] = 1.0 - surv;
    out.critical_count[i] = static_cast<std::uint32_t>(critical[i].size());
  }
  return out;
}

/// Same quantity from the streaming survival products of a sweep.
inline AdjustedPd adjusted_pd_from_sweep(const SweepResult& sweep,
                                         std::span<const double> pd) {
  AdjustedPd out;
  const std::size_t n = pd.size();
  if (sweep.survival_other.size() != n) {
    throw ValidationError(
        "sweep was run without adjusted-pd accumulation; enable "
        "accumulate_adjusted_pd");
  }
  out.q.resize(n);
  out.critical_count = sweep.critical_count;
  for (std::size_t i = 0; i < n; ++i) {
    out.q[i] = 1.0 - (1.0 - pd[i]) * sweep.survival_other[i];
  }
  return out;
}

/// Exhaustive joint-probability evaluation over the critical set plus the
/// firm itself (first argument order is irrelevant). Test oracle for the
/// product form; limited to 20 probabilities.
inline double exact_adjusted_pd(std::span<const double> critical_pds) {
  const std::size_t k = critical_pds.size();
  if (k == 0) return 0.0;
  if (k > 20) {
    throw ValidationError(
        "exact enumeration limited to 20 probabilities; use the product form");
  }
  double sum = 0.0;
  double comp = 0.0;  // compensated summation keeps 2^k terms exact enough
  const std::uint32_t total = 1u << k;
  for (std::uint32_t mask = 1; mask < total; ++mask) {
    double prod = 1.0;
    for (std::size_t b = 0; b < k; ++b) {
      prod *= (mask & (1u << b)) ? critical_pds[b] : 1.0 - critical_pds[b];
    }
    const double y = prod - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  return sum;
}

struct PdAdjustedDistribution {
  std::uint32_t scenarios = 0;
  std::vector<std::vector<double>> bank;  // [bank][scenario]
  std::vector<double> system;
};

/// Monte Carlo with the contagion channel folded into the adjusted PDs:
/// drawn firms default outright and no propagation is performed.
inline PdAdjustedDistribution pd_adjusted_stress(std::span<const double> q,
                                                 std::uint32_t n_scenarios,
                                                 std::uint64_t seed,
                                                 const BankLayer& banks,
                                                 double lgd = 1.0,
                                                 unsigned threads = 0) {
  const ScenarioSet scen = sample_scenarios(q, n_scenarios, seed, "adjusted-pd");
  const BankId m = banks.bank_count();
  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto expo = banks.loan_exposure();
  const auto eq = banks.equity();
  const double total_equity = banks.total_equity();

  PdAdjustedDistribution out;
  out.scenarios = n_scenarios;
  out.bank.assign(m, std::vector<double>(n_scenarios, 0.0));
  out.system.assign(n_scenarios, 0.0);

  std::vector<detail::SweepBankScratch> pool(
      ProductionEngine::effective_threads(threads, n_scenarios));
  detail::parallel_scenarios(n_scenarios, threads, [&](unsigned w, std::uint32_t l) {
    detail::SweepBankScratch& bs = pool[w];
    bs.ensure(m);
    for (FirmId i : scen.failures[l]) {
      for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
        const BankId k = bank[e];
        bs.mark(k);
        bs.tot[k] += lgd * (expo[e] / eq[k]);
      }
    }
    double num = 0.0;
    for (BankId k : bs.touched_banks) {
      out.bank[k][l] = bs.tot[k];
      num += bs.tot[k] * eq[k];
    }
    out.system[l] = total_equity > 0.0 ? num / total_equity : 0.0;
    bs.reset();
  });
  return out;
}

}  // namespace scnsim
