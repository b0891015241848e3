#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "scnsim/defaults.hpp"
#include "scnsim/network.hpp"
#include "scnsim/production.hpp"

namespace scnsim {

/// Per-bank equity-loss fractions. Values may exceed 1; the cap is applied
/// only inside the systemic index.
struct BankLossVector {
  std::vector<double> total;
  std::vector<double> dir;
  std::vector<double> indir;
};

/// Loss fraction per bank for an arbitrary default indicator:
/// sum_j chi_j * lgd * B_jk / e_k.
inline std::vector<double> bank_losses_from(std::span<const std::uint8_t> chi,
                                            const BankLayer& banks,
                                            double lgd = 1.0) {
  std::vector<double> loss(banks.bank_count(), 0.0);
  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto expo = banks.loan_exposure();
  const auto eq = banks.equity();
  for (FirmId i = 0; i < chi.size(); ++i) {
    if (!chi[i]) continue;
    for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
      loss[bank[e]] += lgd * expo[e] / eq[bank[e]];
    }
  }
  return loss;
}

inline BankLossVector bank_losses(std::span<const std::uint8_t> chi_dir,
                                  std::span<const std::uint8_t> chi_indir,
                                  const BankLayer& banks, double lgd = 1.0) {
  BankLossVector v;
  v.dir = bank_losses_from(chi_dir, banks, lgd);
  v.indir = bank_losses_from(chi_indir, banks, lgd);
  v.total.resize(banks.bank_count());
  for (BankId k = 0; k < banks.bank_count(); ++k) {
    v.total[k] = v.dir[k] + v.indir[k];
  }
  return v;
}

/// Equity-weighted average of per-bank loss fractions, uncapped.
inline double system_loss(std::span<const double> bank_loss,
                          std::span<const double> equity) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < bank_loss.size(); ++k) {
    num += bank_loss[k] * equity[k];
    den += equity[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

/// Financial systemic risk of one firm: capped, equity-weighted bank losses
/// after its single failure, with the direct/indirect and equity/liquidity
/// decompositions.
struct FsriRecord {
  double fsri = 0.0;
  double fsri_dir = 0.0;
  double fsri_indir = 0.0;
  double fsri_eq = 0.0;
  double fsri_l = 0.0;
  double esri = 0.0;
  bool converged = true;
};

struct SweepOptions {
  double eps = 1e-6;
  int max_iter = 1000;
  double lgd = 1.0;
  unsigned threads = 0;
  bool collect_critical = false;      // keep explicit critical sets (small runs)
  bool accumulate_adjusted_pd = false;  // stream survival products for q_i
};

struct SweepResult {
  std::vector<FsriRecord> records;
  std::size_t nonconverged = 0;
  /// For every firm i: product of (1 - pd_j) over the firms j whose single
  /// failure defaults i (j != i). 1.0 when no such firm exists.
  std::vector<double> survival_other;
  std::vector<std::uint32_t> critical_count;
  std::vector<std::vector<FirmId>> critical_sets;
};

namespace detail {

struct SweepBaseline {
  std::vector<std::uint8_t> chi0, eq0, l0;  // defaults at zero shock
  std::vector<double> base_tot, base_eq, base_l;
  std::vector<BankId> base_banks;
  std::vector<std::uint8_t> is_base_bank;
  std::vector<double> loan_frac;  // exposure / bank equity, per loan
  std::vector<double> weight;     // e_k / total equity
};

inline SweepBaseline make_baseline(const FirmFinancials& fin,
                                   const BankLayer& banks, double lgd) {
  SweepBaseline b;
  const std::size_t n = fin.size();
  const BankId m = banks.bank_count();
  b.chi0.resize(n);
  b.eq0.resize(n);
  b.l0.resize(n);
  b.base_tot.assign(m, 0.0);
  b.base_eq.assign(m, 0.0);
  b.base_l.assign(m, 0.0);
  b.is_base_bank.assign(m, 0);
  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto expo = banks.loan_exposure();
  const auto eq = banks.equity();
  b.loan_frac.resize(banks.loan_count());
  for (std::size_t e = 0; e < banks.loan_count(); ++e) {
    b.loan_frac[e] = expo[e] / eq[bank[e]];
  }
  for (FirmId i = 0; i < n; ++i) {
    b.eq0[i] = equity_default(fin, i, 0.0) ? 1 : 0;
    b.l0[i] = liquidity_default(fin, i, 0.0) ? 1 : 0;
    b.chi0[i] = b.eq0[i] | b.l0[i];
    if (!b.chi0[i] && !b.eq0[i] && !b.l0[i]) continue;
    for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
      const double f = lgd * b.loan_frac[e];
      if (b.chi0[i]) b.base_tot[bank[e]] += f;
      if (b.eq0[i]) b.base_eq[bank[e]] += f;
      if (b.l0[i]) b.base_l[bank[e]] += f;
      b.is_base_bank[bank[e]] = 1;
    }
  }
  for (BankId k = 0; k < m; ++k) {
    if (b.is_base_bank[k]) b.base_banks.push_back(k);
  }
  const double total = banks.total_equity();
  b.weight.resize(m);
  for (BankId k = 0; k < m; ++k) b.weight[k] = eq[k] / total;
  return b;
}

struct SweepBankScratch {
  std::vector<double> tot, dir, eqv, liq;
  std::vector<BankId> touched_banks;
  std::vector<std::uint8_t> seen;

  void ensure(BankId m) {
    if (tot.size() != m) {
      tot.assign(m, 0.0);
      dir.assign(m, 0.0);
      eqv.assign(m, 0.0);
      liq.assign(m, 0.0);
      seen.assign(m, 0);
    }
  }
  void mark(BankId k) {
    if (!seen[k]) {
      seen[k] = 1;
      touched_banks.push_back(k);
    }
  }
  void reset() {
    for (BankId k : touched_banks) {
      tot[k] = dir[k] = eqv[k] = liq[k] = 0.0;
      seen[k] = 0;
    }
    touched_banks.clear();
  }
};

}  // namespace detail

/// Runs the full single-firm sweep: for every firm j, propagate its failure,
/// re-evaluate solvency of affected firms, aggregate bank write-offs, and
/// record FSRI (with all decompositions) plus ESRI from the same cascade.
inline SweepResult fsri_all(const ProductionEngine& engine,
                            const FirmFinancials& fin, const BankLayer& banks,
                            const SweepOptions& opts = {}) {
  const FirmId n = engine.network().firm_count();
  if (fin.size() != n) {
    throw ValidationError("financials do not match network size");
  }
  const BankId m = banks.bank_count();
  const detail::SweepBaseline base = detail::make_baseline(fin, banks, opts.lgd);

  SweepResult out;
  out.records.assign(n, FsriRecord{});
  const bool track_defaults = opts.collect_critical || opts.accumulate_adjusted_pd;
  std::vector<std::vector<FirmId>> newly(track_defaults ? n : 0);
  std::vector<std::vector<FirmId>> undef(track_defaults ? n : 0);

  const auto ptr = banks.firm_ptr();
  const auto bank = banks.loan_bank();
  const auto s_out = engine.out_strength();
  const double total_out = engine.total_out_strength();
  std::atomic<std::size_t> bad{0};

  std::vector<detail::SweepBankScratch> bank_scratch(
      ProductionEngine::effective_threads(opts.threads, n));

  engine.for_each_firm(n, opts.threads, [&](unsigned worker, CascadeScratch& ws,
                                            FirmId j) {
    detail::SweepBankScratch* bs = &bank_scratch[worker];
    bs->ensure(m);

    const CascadeStats st =
        engine.cascade(ws, ShockVector::single_firm(n, j), opts.eps, opts.max_iter);
    if (!st.converged) bad.fetch_add(1, std::memory_order_relaxed);

    FsriRecord rec;
    rec.converged = st.converged;
    double esri = 0.0;
    for (FirmId i : ws.touched) {
      if (total_out > 0.0) esri += (s_out[i] / total_out) * (1.0 - ws.h[i]);
      const double dp = (1.0 - ws.h[i]) * fin.operating_margin(i);
      const bool de = equity_default(fin, i, dp);
      const bool dl = liquidity_default(fin, i, dp);
      const bool dchi = de || dl;
      if (track_defaults) {
        if (dchi && !base.chi0[i]) newly[j].push_back(i);
        if (!dchi && base.chi0[i]) undef[j].push_back(i);
      }
      if (!banks.has_loans(i)) continue;
      const bool shocked = ws.psi[i] < 1.0;
      const double d_tot = (dchi ? 1.0 : 0.0) - (base.chi0[i] ? 1.0 : 0.0);
      const double d_eq = (de ? 1.0 : 0.0) - (base.eq0[i] ? 1.0 : 0.0);
      const double d_l = (dl ? 1.0 : 0.0) - (base.l0[i] ? 1.0 : 0.0);
      const bool any = d_tot != 0.0 || d_eq != 0.0 || d_l != 0.0 || (dchi && shocked);
      if (!any) continue;
      for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
        const BankId k = bank[e];
        const double f = opts.lgd * base.loan_frac[e];
        bs->mark(k);
        bs->tot[k] += d_tot * f;
        bs->eqv[k] += d_eq * f;
        bs->liq[k] += d_l * f;
        if (dchi && shocked) bs->dir[k] += f;
      }
    }
    rec.esri = esri;

    double fs = 0.0, fd = 0.0, fe = 0.0, fl = 0.0;
    for (BankId k : base.base_banks) {
      fs += base.weight[k] * std::min(1.0, base.base_tot[k] + bs->tot[k]);
      fd += base.weight[k] * std::min(1.0, bs->dir[k]);
      fe += base.weight[k] * std::min(1.0, base.base_eq[k] + bs->eqv[k]);
      fl += base.weight[k] * std::min(1.0, base.base_l[k] + bs->liq[k]);
    }
    for (BankId k : bs->touched_banks) {
      if (base.is_base_bank[k]) continue;
      fs += base.weight[k] * std::min(1.0, bs->tot[k]);
      fd += base.weight[k] * std::min(1.0, bs->dir[k]);
      fe += base.weight[k] * std::min(1.0, bs->eqv[k]);
      fl += base.weight[k] * std::min(1.0, bs->liq[k]);
    }
    rec.fsri = fs;
    rec.fsri_dir = fd;
    rec.fsri_indir = fs - fd;
    rec.fsri_eq = fe;
    rec.fsri_l = fl;
    out.records[j] = rec;

    bs->reset();
    engine.reset_scratch(ws);
  });
  out.nonconverged = bad.load();

  if (track_defaults) {
    out.survival_other.assign(n, 1.0);
    out.critical_count.assign(n, 0);
    if (opts.collect_critical) out.critical_sets.assign(n, {});
    // Baseline defaulters trip the insolvency test in every scenario, so
    // every other firm belongs to their critical set unless the scenario
    // explicitly rescued them.
    std::vector<std::uint8_t> is_base(n, 0);
    for (FirmId i = 0; i < n; ++i) {
      is_base[i] = equity_default(fin, i, 0.0) || liquidity_default(fin, i, 0.0);
    }
    for (FirmId j = 0; j < n; ++j) {
      for (FirmId i : newly[j]) {
        if (i == j) continue;
        out.survival_other[i] *= 1.0 - fin.pd[j];
        ++out.critical_count[i];
        if (opts.collect_critical) out.critical_sets[i].push_back(j);
      }
    }
    for (FirmId i = 0; i < n; ++i) {
      if (!is_base[i]) continue;
      std::vector<std::uint8_t> resc(n, 0);
      for (FirmId j = 0; j < n; ++j) {
        // j rescued i if i un-defaulted in scenario j.
        for (FirmId u : undef[j]) {
          if (u == i) resc[j] = 1;
        }
      }
      double surv = 1.0;
      for (FirmId j = 0; j < n; ++j) {
        if (j == i || resc[j]) continue;
        surv *= 1.0 - fin.pd[j];
        ++out.critical_count[i];
        if (opts.collect_critical) out.critical_sets[i].push_back(j);
      }
      out.survival_other[i] = surv;
    }
  }
  return out;
}

}  // namespace scnsim
