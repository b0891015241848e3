#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "scnsim/network.hpp"
#include "scnsim/production.hpp"

namespace scnsim {

/// Profit shortfall per firm: (1 - h_i) * (r_i - c_i). Applied verbatim, so
/// firms with negative operating margin gain when production stops.
inline std::vector<double> profit_delta(std::span<const double> h,
                                        const FirmFinancials& fin) {
  std::vector<double> dp(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    dp[i] = (1.0 - h[i]) * fin.operating_margin(static_cast<FirmId>(i));
  }
  return dp;
}

inline bool equity_default(const FirmFinancials& fin, FirmId i, double dp) {
  return fin.equity[i] - dp <= 0.0;
}

inline bool liquidity_default(const FirmFinancials& fin, FirmId i, double dp) {
  return fin.liquidity(i) - dp <= 0.0;
}

struct DefaultVectors {
  std::vector<std::uint8_t> chi;     // union of the two criteria
  std::vector<std::uint8_t> chi_eq;  // equity exhausted
  std::vector<std::uint8_t> chi_l;   // liquidity exhausted
};

/// Insolvency test per firm. Boundary equality counts as default.
inline DefaultVectors evaluate_defaults(std::span<const double> dp,
                                        const FirmFinancials& fin) {
  DefaultVectors d;
  const std::size_t n = dp.size();
  d.chi.resize(n);
  d.chi_eq.resize(n);
  d.chi_l.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const FirmId f = static_cast<FirmId>(i);
    d.chi_eq[i] = equity_default(fin, f, dp[i]) ? 1 : 0;
    d.chi_l[i] = liquidity_default(fin, f, dp[i]) ? 1 : 0;
    d.chi[i] = (d.chi_eq[i] | d.chi_l[i]);
  }
  return d;
}

struct DefaultSplit {
  std::vector<std::uint8_t> dir;    // defaulted and initially shocked
  std::vector<std::uint8_t> indir;  // defaulted with psi_i = 1
};

/// Splits defaults into the contagion-free and contagion-caused parts. A
/// direct default requires chi_i = 1 and psi_i < 1; the two supports are
/// disjoint and sum to chi.
inline DefaultSplit split_defaults(std::span<const std::uint8_t> chi,
                                   const ShockVector& psi) {
  DefaultSplit s;
  const std::size_t n = chi.size();
  s.dir.assign(n, 0);
  s.indir.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) s.indir[i] = chi[i];
  for (const auto& [i, v] : psi.entries()) {
    if (v < 1.0 && chi[i]) {
      s.dir[i] = 1;
      s.indir[i] = 0;
    }
  }
  return s;
}

}  // namespace scnsim
