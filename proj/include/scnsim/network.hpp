#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "scnsim/types.hpp"

namespace scnsim {

/// One supplier->buyer edge as it appears in an input file, before
/// aggregation.
struct EdgeInput {
  FirmId supplier = 0;
  FirmId buyer = 0;
  double weight = 0.0;  // money / year
};

/// What build_network dropped or merged while constructing the graph.
struct NetworkBuildReport {
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_merged = 0;
};

/// Weighted directed firm-firm trade network in CSR form, indexable from
/// both ends: out-adjacency (firm as supplier) and in-adjacency (firm as
/// buyer) enumerate the same aggregated edge set.
class SupplyChainNetwork {
 public:
  SupplyChainNetwork() = default;

  FirmId firm_count() const { return n_; }
  std::size_t edge_count() const { return out_col_.size(); }
  ProductCode product_of(FirmId i) const { return product_[i]; }
  std::span<const ProductCode> products() const { return product_; }

  std::span<const std::uint64_t> out_ptr() const { return out_ptr_; }
  std::span<const FirmId> out_col() const { return out_col_; }
  std::span<const double> out_weight() const { return out_w_; }

  std::span<const std::uint64_t> in_ptr() const { return in_ptr_; }
  std::span<const FirmId> in_col() const { return in_col_; }
  std::span<const double> in_weight() const { return in_w_; }

  std::size_t out_degree(FirmId i) const { return out_ptr_[i + 1] - out_ptr_[i]; }
  std::size_t in_degree(FirmId i) const { return in_ptr_[i + 1] - in_ptr_[i]; }

  const NetworkBuildReport& build_report() const { return report_; }

  friend SupplyChainNetwork build_network(std::span<const EdgeInput>,
                                          std::vector<ProductCode>);

 private:
  FirmId n_ = 0;
  std::vector<ProductCode> product_;
  // supplier -> buyers
  std::vector<std::uint64_t> out_ptr_;
  std::vector<FirmId> out_col_;
  std::vector<double> out_w_;
  // buyer -> suppliers
  std::vector<std::uint64_t> in_ptr_;
  std::vector<FirmId> in_col_;
  std::vector<double> in_w_;
  NetworkBuildReport report_;
};

/// Builds the validated network. Duplicate (supplier, buyer) rows are summed
/// (annual aggregation), self-loops are dropped and counted, dangling firm
/// references and non-positive weights are rejected.
inline SupplyChainNetwork build_network(std::span<const EdgeInput> edges,
                                        std::vector<ProductCode> product_of) {
  SupplyChainNetwork net;
  const std::size_t n = product_of.size();
  net.n_ = static_cast<FirmId>(n);
  net.product_ = std::move(product_of);

  std::vector<EdgeInput> kept;
  kept.reserve(edges.size());
  for (std::size_t row = 0; row < edges.size(); ++row) {
    const EdgeInput& e = edges[row];
    if (e.supplier >= n || e.buyer >= n) {
      throw ValidationError("edge row " + std::to_string(row) +
                            " references unknown firm id " +
                            std::to_string(e.supplier >= n ? e.supplier : e.buyer));
    }
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw ValidationError("edge row " + std::to_string(row) +
                            " has non-positive weight");
    }
    if (e.supplier == e.buyer) {
      ++net.report_.self_loops_dropped;
      continue;
    }
    kept.push_back(e);
  }

  std::sort(kept.begin(), kept.end(), [](const EdgeInput& a, const EdgeInput& b) {
    return a.supplier != b.supplier ? a.supplier < b.supplier : a.buyer < b.buyer;
  });

  // Aggregate duplicates in sorted order.
  std::size_t m = 0;
  for (std::size_t i = 0; i < kept.size();) {
    std::size_t j = i + 1;
    double w = kept[i].weight;
    while (j < kept.size() && kept[j].supplier == kept[i].supplier &&
           kept[j].buyer == kept[i].buyer) {
      w += kept[j].weight;
      ++j;
      ++net.report_.duplicates_merged;
    }
    kept[m] = EdgeInput{kept[i].supplier, kept[i].buyer, w};
    ++m;
    i = j;
  }
  kept.resize(m);

  net.out_ptr_.assign(n + 1, 0);
  net.in_ptr_.assign(n + 1, 0);
  for (const EdgeInput& e : kept) {
    ++net.out_ptr_[e.supplier + 1];
    ++net.in_ptr_[e.buyer + 1];
  }
  std::partial_sum(net.out_ptr_.begin(), net.out_ptr_.end(), net.out_ptr_.begin());
  std::partial_sum(net.in_ptr_.begin(), net.in_ptr_.end(), net.in_ptr_.begin());

  net.out_col_.resize(m);
  net.out_w_.resize(m);
  net.in_col_.resize(m);
  net.in_w_.resize(m);
  std::vector<std::uint64_t> out_fill(net.out_ptr_.begin(), net.out_ptr_.end() - 1);
  std::vector<std::uint64_t> in_fill(net.in_ptr_.begin(), net.in_ptr_.end() - 1);
  for (const EdgeInput& e : kept) {
    const auto o = out_fill[e.supplier]++;
    net.out_col_[o] = e.buyer;
    net.out_w_[o] = e.weight;
    const auto p = in_fill[e.buyer]++;
    net.in_col_[p] = e.supplier;
    net.in_w_[p] = e.weight;
  }
  return net;
}

/// Per-firm total sales (s_out) and purchases (s_in), money / year.
struct Strengths {
  std::vector<double> s_in;
  std::vector<double> s_out;

  double total_out() const {
    double t = 0.0;
    for (double v : s_out) t += v;
    return t;
  }
  double total_in() const {
    double t = 0.0;
    for (double v : s_in) t += v;
    return t;
  }
};

inline Strengths compute_strengths(const SupplyChainNetwork& net) {
  const FirmId n = net.firm_count();
  Strengths s;
  s.s_in.assign(n, 0.0);
  s.s_out.assign(n, 0.0);
  const auto ptr = net.out_ptr();
  const auto col = net.out_col();
  const auto w = net.out_weight();
  for (FirmId i = 0; i < n; ++i) {
    for (std::uint64_t e = ptr[i]; e < ptr[i + 1]; ++e) {
      s.s_out[i] += w[e];
      s.s_in[col[e]] += w[e];
    }
  }
  return s;
}

/// Per-firm income statement and balance sheet slice. Net profit is
/// r - c + o by construction and is not stored.
struct FirmFinancials {
  std::vector<double> revenue;                 // r, money / year
  std::vector<double> material_costs;          // c, money / year
  std::vector<double> other_profit;            // o, may be negative
  std::vector<double> equity;                  // z, may be negative
  std::vector<double> short_term_assets;       // a
  std::vector<double> short_term_liabilities;  // s
  std::vector<double> pd;                      // default probability in [0,1]

  std::size_t size() const { return revenue.size(); }
  double net_profit(FirmId i) const {
    return revenue[i] - material_costs[i] + other_profit[i];
  }
  double operating_margin(FirmId i) const {
    return revenue[i] - material_costs[i];
  }
  double liquidity(FirmId i) const {
    return short_term_assets[i] - short_term_liabilities[i];
  }

  void validate() const {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!(pd[i] >= 0.0 && pd[i] <= 1.0)) {
        throw ValidationError("firm " + std::to_string(i) +
                              ": pd outside [0,1]");
      }
      if (revenue[i] < 0.0 || material_costs[i] < 0.0 ||
          short_term_assets[i] < 0.0 || short_term_liabilities[i] < 0.0) {
        throw ValidationError("firm " + std::to_string(i) +
                              ": negative revenue/costs/assets/liabilities");
      }
    }
  }
};

struct LoanInput {
  FirmId firm = 0;
  BankId bank = 0;
  double exposure = 0.0;
};

/// Firm->bank exposure layer. Loans are stored grouped by firm so that a
/// defaulted firm's write-offs can be walked in one pass. The interbank
/// matrix is identically zero and not represented.
class BankLayer {
 public:
  BankLayer() = default;

  static BankLayer build(FirmId firm_count, std::vector<double> equity,
                         std::span<const LoanInput> loans) {
    BankLayer b;
    b.m_ = static_cast<BankId>(equity.size());
    b.equity_ = std::move(equity);
    for (BankId k = 0; k < b.m_; ++k) {
      if (!(b.equity_[k] > 0.0)) {
        throw ValidationError("bank " + std::to_string(k) +
                              ": equity must be positive");
      }
    }
    std::vector<LoanInput> sorted(loans.begin(), loans.end());
    for (std::size_t row = 0; row < sorted.size(); ++row) {
      if (sorted[row].firm >= firm_count) {
        throw ValidationError("loan row " + std::to_string(row) +
                              " references unknown firm id " +
                              std::to_string(sorted[row].firm));
      }
      if (sorted[row].bank >= b.m_) {
        throw ValidationError("loan row " + std::to_string(row) +
                              " references unknown bank id " +
                              std::to_string(sorted[row].bank));
      }
      if (sorted[row].exposure < 0.0 || !std::isfinite(sorted[row].exposure)) {
        throw ValidationError("loan row " + std::to_string(row) +
                              " has negative exposure");
      }
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const LoanInput& a, const LoanInput& b2) {
                return a.firm != b2.firm ? a.firm < b2.firm : a.bank < b2.bank;
              });
    // Merge duplicate (firm, bank) rows; at most one entry per pair remains.
    std::size_t w = 0;
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i + 1;
      double x = sorted[i].exposure;
      while (j < sorted.size() && sorted[j].firm == sorted[i].firm &&
             sorted[j].bank == sorted[i].bank) {
        x += sorted[j].exposure;
        ++j;
        ++b.duplicates_merged_;
      }
      sorted[w++] = LoanInput{sorted[i].firm, sorted[i].bank, x};
      i = j;
    }
    sorted.resize(w);

    b.firm_ptr_.assign(firm_count + 1, 0);
    for (const LoanInput& l : sorted) ++b.firm_ptr_[l.firm + 1];
    std::partial_sum(b.firm_ptr_.begin(), b.firm_ptr_.end(), b.firm_ptr_.begin());
    b.loan_bank_.resize(sorted.size());
    b.loan_exposure_.resize(sorted.size());
    b.clients_.assign(b.m_, 0);
    std::vector<std::uint64_t> fill(b.firm_ptr_.begin(), b.firm_ptr_.end() - 1);
    for (const LoanInput& l : sorted) {
      const auto o = fill[l.firm]++;
      b.loan_bank_[o] = l.bank;
      b.loan_exposure_[o] = l.exposure;
    }
    for (FirmId i = 0; i < firm_count; ++i) {
      for (std::uint64_t e = b.firm_ptr_[i]; e < b.firm_ptr_[i + 1]; ++e) {
        ++b.clients_[b.loan_bank_[e]];
      }
    }
    return b;
  }

  BankId bank_count() const { return m_; }
  std::size_t loan_count() const { return loan_bank_.size(); }
  std::span<const double> equity() const { return equity_; }
  std::span<const std::uint64_t> firm_ptr() const { return firm_ptr_; }
  std::span<const BankId> loan_bank() const { return loan_bank_; }
  std::span<const double> loan_exposure() const { return loan_exposure_; }
  std::span<const std::uint32_t> clients() const { return clients_; }
  std::size_t duplicates_merged() const { return duplicates_merged_; }

  bool has_loans(FirmId i) const { return firm_ptr_[i + 1] > firm_ptr_[i]; }
  double total_equity() const {
    double t = 0.0;
    for (double v : equity_) t += v;
    return t;
  }
  double loan_total(FirmId i) const {
    double t = 0.0;
    for (std::uint64_t e = firm_ptr_[i]; e < firm_ptr_[i + 1]; ++e) {
      t += loan_exposure_[e];
    }
    return t;
  }

 private:
  BankId m_ = 0;
  std::vector<double> equity_;
  std::vector<std::uint64_t> firm_ptr_;  // firm -> loan range
  std::vector<BankId> loan_bank_;
  std::vector<double> loan_exposure_;
  std::vector<std::uint32_t> clients_;
  std::size_t duplicates_merged_ = 0;
};

/// Cross-layer consistency summary. Fatal problems throw from
/// validate_layers; everything else is reported here.
struct ValidationReport {
  FirmId firms = 0;
  BankId banks = 0;
  std::size_t edges = 0;
  std::size_t loans = 0;
  std::size_t firms_with_loans = 0;
  double loan_coverage = 0.0;  // fraction of firms with >= 1 loan
  double total_bank_equity = 0.0;
  double total_traded_volume = 0.0;
  std::size_t self_loops_dropped = 0;
  std::size_t pre_shock_insolvent = 0;  // z <= 0 or a - s <= 0 already unshocked
  std::vector<std::string> warnings;
};

inline ValidationReport validate_layers(const SupplyChainNetwork& net,
                                        const FirmFinancials& fin,
                                        const BankLayer& banks) {
  if (fin.size() != net.firm_count()) {
    throw ValidationError("firm count mismatch: network has " +
                          std::to_string(net.firm_count()) +
                          " firms, financials cover " +
                          std::to_string(fin.size()));
  }
  fin.validate();
  ValidationReport rep;
  rep.firms = net.firm_count();
  rep.banks = banks.bank_count();
  rep.edges = net.edge_count();
  rep.loans = banks.loan_count();
  rep.self_loops_dropped = net.build_report().self_loops_dropped;
  for (FirmId i = 0; i < net.firm_count(); ++i) {
    if (banks.has_loans(i)) ++rep.firms_with_loans;
    if (fin.equity[i] <= 0.0 || fin.liquidity(i) <= 0.0) {
      ++rep.pre_shock_insolvent;
    }
  }
  rep.loan_coverage = net.firm_count() == 0
                          ? 0.0
                          : static_cast<double>(rep.firms_with_loans) /
                                static_cast<double>(net.firm_count());
  rep.total_bank_equity = banks.total_equity();
  for (double w : net.out_weight()) rep.total_traded_volume += w;
  if (rep.self_loops_dropped > 0) {
    rep.warnings.push_back(std::to_string(rep.self_loops_dropped) +
                           " self-loop edge(s) dropped");
  }
  if (rep.pre_shock_insolvent > 0) {
    rep.warnings.push_back(
        std::to_string(rep.pre_shock_insolvent) +
        " firm(s) insolvent before any shock; they default in every scenario");
  }
  return rep;
}

}  // namespace scnsim
