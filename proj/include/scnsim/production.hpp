#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <span>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "scnsim/network.hpp"
#include "scnsim/types.hpp"

namespace scnsim {

/// Classification of a (supplier product, buyer product) pair. Pairs absent
/// from the table are non-essential.
enum class InputClass : std::uint8_t { non_essential = 0, essential = 1 };

class EssentialityTable {
 public:
  void set(ProductCode supplier_product, ProductCode buyer_product,
           InputClass cls) {
    const std::uint64_t k = key(supplier_product, buyer_product);
    if (cls == InputClass::essential) {
      essential_.insert(k);
    } else {
      essential_.erase(k);
    }
  }

  bool essential(ProductCode supplier_product, ProductCode buyer_product) const {
    return essential_.contains(key(supplier_product, buyer_product));
  }

  std::size_t essential_pair_count() const { return essential_.size(); }

  /// Essential supplier products declared for a given buyer product.
  std::vector<ProductCode> essential_suppliers_of(ProductCode buyer) const {
    std::vector<ProductCode> out;
    for (std::uint64_t k : essential_) {
      if (static_cast<ProductCode>(k & 0xffffffffu) == buyer) {
        out.push_back(static_cast<ProductCode>(k >> 32));
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static std::uint64_t key(ProductCode s, ProductCode b) {
    return (static_cast<std::uint64_t>(s) << 32) | b;
  }
  std::unordered_set<std::uint64_t> essential_;
};

/// Initial shock: remaining production levels in [0,1]. Only entries below 1
/// are stored.
class ShockVector {
 public:
  ShockVector() = default;
  explicit ShockVector(FirmId n) : n_(n) {}

  static ShockVector single_firm(FirmId n, FirmId j) {
    ShockVector psi(n);
    psi.set(j, 0.0);
    return psi;
  }

  static ShockVector failures(FirmId n, std::span<const FirmId> failed) {
    ShockVector psi(n);
    for (FirmId j : failed) psi.set(j, 0.0);
    return psi;
  }

  void set(FirmId i, double level) {
    if (i >= n_) throw ValidationError("shock index out of range");
    if (!(level >= 0.0 && level <= 1.0)) {
      throw ValidationError("shock level outside [0,1]");
    }
    if (level < 1.0) entries_.emplace_back(i, level);
  }

  FirmId size() const { return n_; }
  std::span<const std::pair<FirmId, double>> entries() const { return entries_; }

  double value(FirmId i) const {
    for (const auto& [j, v] : entries_) {
      if (j == i) return v;
    }
    return 1.0;
  }

  std::vector<double> dense() const {
    std::vector<double> d(n_, 1.0);
    for (const auto& [i, v] : entries_) d[i] = v;
    return d;
  }

 private:
  FirmId n_ = 0;
  std::vector<std::pair<FirmId, double>> entries_;
};

struct CascadeResult {
  std::vector<double> h;  // final remaining production levels
  int iterations = 0;
  bool converged = false;
  std::vector<std::vector<double>> trace;  // per-step levels when requested
};

struct CascadeStats {
  int iterations = 0;
  bool converged = false;
  std::uint64_t evaluations = 0;  // firm re-evaluations across all iterations
};

/// Reusable per-worker cascade state. All arrays stay at their rest value
/// (production 1.0, no shock) between runs; reset_scratch restores it by
/// walking only the touched firms.
struct CascadeScratch {
  std::vector<double> h;
  std::vector<double> psi;
  std::vector<std::uint64_t> stamp;
  std::uint64_t epoch = 0;
  std::vector<FirmId> changed;
  std::vector<FirmId> next_changed;
  std::vector<FirmId> recompute;
  std::vector<FirmId> touched;
  std::vector<std::pair<FirmId, double>> updates;

  void ensure(std::size_t n) {
    if (h.size() != n) {
      h.assign(n, 1.0);
      psi.assign(n, 1.0);
      stamp.assign(n, 0);
      epoch = 0;
    }
  }
};

struct CalibrationReport {
  std::size_t essential_groups = 0;
  std::size_t firms_with_essential_inputs = 0;
  std::size_t missing_essential_inputs = 0;
  std::size_t sink_firms = 0;   // baseline output taken from purchases
  std::size_t inert_firms = 0;  // no in-network trade at all
};

/// Per-firm generalized Leontief production functions calibrated from the
/// network, plus the synchronous upstream/downstream fixed-point iteration.
///
/// Calibration: baseline output is the firm's total sales (total purchases
/// for pure sinks). Each essential input product constrains output in
/// proportion to its delivered share; non-essential inputs enter a linear
/// term interpolating between the floor (floor_share of baseline) and full
/// output. Candidates are evaluated relative to baseline, so an undisturbed
/// neighborhood reproduces a firm's shock level exactly.
class ProductionEngine {
 public:
  enum class Direction { downstream, upstream };

  ProductionEngine(const SupplyChainNetwork& net, const EssentialityTable& ess,
                   double floor_share)
      : net_(&net), floor_share_(floor_share) {
    if (!(floor_share >= 0.0 && floor_share <= 1.0)) {
      throw ValidationError("floor_share must lie in [0,1]");
    }
    calibrate(ess);
  }

  const SupplyChainNetwork& network() const { return *net_; }
  const CalibrationReport& calibration_report() const { return report_; }
  double floor_share() const { return floor_share_; }
  std::span<const double> baseline_output() const { return x0_; }
  std::span<const double> out_strength() const { return s_out_; }
  double total_out_strength() const { return total_out_; }

  /// One synchronous directional update, money units: the feasible output of
  /// every firm given current neighbor levels, capped at psi_i * x_i(0).
  std::vector<double> cascade_step(std::span<const double> h,
                                   const ShockVector& psi,
                                   Direction dir) const {
    const FirmId n = net_->firm_count();
    std::vector<double> psi_d = psi.dense();
    std::vector<double> out(n);
    for (FirmId i = 0; i < n; ++i) {
      const double rel = dir == Direction::downstream
                             ? downstream_rel(i, h, psi_d[i])
                             : upstream_rel(i, h, psi_d[i]);
      out[i] = x0_[i] * rel;
    }
    return out;
  }

  /// Runs the joint cascade to its fixed point. Per-firm adjustments smaller
  /// than eps are not applied; the cascade stops once no firm adjusts.
  CascadeResult propagate(const ShockVector& psi, double eps, int max_iter,
                          bool with_trace = false) const {
    if (!(eps > 0.0)) throw ValidationError("eps must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
    CascadeResult res;
    if (with_trace) {
      dense_iterate(psi, eps, max_iter, res);
      return res;
    }
    CascadeScratch ws;
    ws.ensure(net_->firm_count());
    const CascadeStats st = cascade(ws, psi, eps, max_iter);
    res.h.assign(ws.h.begin(), ws.h.end());
    res.iterations = st.iterations;
    res.converged = st.converged;
    reset_scratch(ws);
    return res;
  }

  /// Worklist cascade over reusable scratch. ws.h and ws.touched describe the
  /// fixed point until reset_scratch is called. Equivalent, value for value,
  /// to the dense synchronous iteration.
  CascadeStats cascade(CascadeScratch& ws, const ShockVector& psi, double eps,
                       int max_iter) const {
    const FirmId n = net_->firm_count();
    ws.ensure(n);
    ws.changed.clear();
    ws.touched.clear();
    for (const auto& [i, v] : psi.entries()) {
      ws.psi[i] = v;
      if (ws.h[i] == 1.0) ws.touched.push_back(i);
      ws.h[i] = v;
      ws.changed.push_back(i);
    }

    CascadeStats st;
    const auto out_ptr = net_->out_ptr();
    const auto out_col = net_->out_col();
    while (st.iterations < max_iter) {
      ++st.iterations;
      ws.recompute.clear();
      ++ws.epoch;
      for (FirmId j : ws.changed) {
        for (std::uint64_t e = out_ptr[j]; e < out_ptr[j + 1]; ++e) {
          const FirmId b = out_col[e];
          if (ws.stamp[b] != ws.epoch) {
            ws.stamp[b] = ws.epoch;
            ws.recompute.push_back(b);
          }
        }
        for (std::uint64_t e = in_ptr_[j]; e < in_ptr_[j + 1]; ++e) {
          const FirmId s = in_src_[e];
          if (ws.stamp[s] != ws.epoch) {
            ws.stamp[s] = ws.epoch;
            ws.recompute.push_back(s);
          }
        }
      }
      ws.updates.clear();
      st.evaluations += ws.recompute.size();
      for (FirmId i : ws.recompute) {
        const double fresh = eval_rel(i, ws.h, ws.psi[i]);
        if (ws.h[i] - fresh >= eps) ws.updates.emplace_back(i, fresh);
      }
      if (ws.updates.empty()) {
        st.converged = true;
        break;
      }
      ws.next_changed.clear();
      for (const auto& [i, v] : ws.updates) {
        if (ws.h[i] == 1.0) ws.touched.push_back(i);
        ws.h[i] = v;
        ws.next_changed.push_back(i);
      }
      ws.changed.swap(ws.next_changed);
    }
    return st;
  }

  void reset_scratch(CascadeScratch& ws) const {
    for (FirmId i : ws.touched) {
      ws.h[i] = 1.0;
      ws.psi[i] = 1.0;
    }
    ws.touched.clear();
    ws.changed.clear();
  }

  /// Relative production candidate of firm i given levels h: the minimum over
  /// essential-input shares, the non-essential interpolation, the demand
  /// share, and the shock cap.
  double eval_rel(FirmId i, std::span<const double> h, double psi_i) const {
    double rel = psi_i;
    std::uint64_t e = in_ptr_[i];
    for (std::uint64_t g = grp_ptr_[i]; g < grp_ptr_[i + 1]; ++g) {
      double s = 0.0;
      const std::uint64_t end = grp_edge_end_[g];
      for (; e < end; ++e) s += in_w_[e] * h[in_src_[e]];
      const double u = s / grp_base_[g];
      if (u < rel) rel = u;
    }
    if (ne_base_[i] > 0.0) {
      double s = 0.0;
      const std::uint64_t end = in_ptr_[i + 1];
      for (; e < end; ++e) s += in_w_[e] * h[in_src_[e]];
      const double v = 1.0 - ne_drop_ * (1.0 - s / ne_base_[i]);
      if (v < rel) rel = v;
    }
    if (up_base_[i] > 0.0) {
      double s = 0.0;
      const auto out_ptr = net_->out_ptr();
      const auto out_col = net_->out_col();
      const auto out_w = net_->out_weight();
      for (std::uint64_t k = out_ptr[i]; k < out_ptr[i + 1]; ++k) {
        s += out_w[k] * h[out_col[k]];
      }
      const double u = s / up_base_[i];
      if (u < rel) rel = u;
    }
    return rel < 0.0 ? 0.0 : rel;
  }

  /// Economic systemic risk: for every firm, the sales-weighted fraction of
  /// network production lost after its own full failure.
  std::vector<double> esri_all(double eps, int max_iter, unsigned threads,
                               std::size_t* nonconverged = nullptr) const {
    const FirmId n = net_->firm_count();
    std::vector<double> esri(n, 0.0);
    std::atomic<std::size_t> bad{0};
    for_each_firm(n, threads, [&](unsigned, CascadeScratch& ws, FirmId j) {
      const CascadeStats st =
          cascade(ws, ShockVector::single_firm(n, j), eps, max_iter);
      if (!st.converged) bad.fetch_add(1, std::memory_order_relaxed);
      double v = 0.0;
      if (total_out_ > 0.0) {
        for (FirmId i : ws.touched) {
          v += (s_out_[i] / total_out_) * (1.0 - ws.h[i]);
        }
      }
      esri[j] = v;
      reset_scratch(ws);
    });
    if (nonconverged) *nonconverged = bad.load();
    return esri;
  }

  /// Parallel map over firms with one CascadeScratch per worker. Work is
  /// handed out in blocks through an atomic cursor; every firm writes only
  /// its own slot, so results do not depend on the worker count. The callback
  /// receives (worker_id, scratch, firm).
  template <typename Fn>
  void for_each_firm(FirmId n, unsigned threads, Fn&& fn) const {
    const unsigned t = effective_threads(threads, n);
    if (t <= 1) {
      CascadeScratch ws;
      ws.ensure(n);
      for (FirmId j = 0; j < n; ++j) fn(0u, ws, j);
      return;
    }
    std::atomic<FirmId> cursor{0};
    constexpr FirmId kBlock = 32;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (unsigned w = 0; w < t; ++w) {
      pool.emplace_back([&, n, w]() {
        CascadeScratch ws;
        ws.ensure(n);
        for (;;) {
          const FirmId begin = cursor.fetch_add(kBlock);
          if (begin >= n) break;
          const FirmId end = std::min<FirmId>(begin + kBlock, n);
          for (FirmId j = begin; j < end; ++j) fn(w, ws, j);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  static unsigned effective_threads(unsigned requested, std::size_t items) {
    unsigned t = requested == 0 ? std::thread::hardware_concurrency() : requested;
    if (t == 0) t = 1;
    if (items < 64) t = 1;
    return t;
  }

 private:
  double downstream_rel(FirmId i, std::span<const double> h, double psi_i) const {
    double rel = psi_i;
    std::uint64_t e = in_ptr_[i];
    for (std::uint64_t g = grp_ptr_[i]; g < grp_ptr_[i + 1]; ++g) {
      double s = 0.0;
      const std::uint64_t end = grp_edge_end_[g];
      for (; e < end; ++e) s += in_w_[e] * h[in_src_[e]];
      rel = std::min(rel, s / grp_base_[g]);
    }
    if (ne_base_[i] > 0.0) {
      double s = 0.0;
      const std::uint64_t end = in_ptr_[i + 1];
      for (; e < end; ++e) s += in_w_[e] * h[in_src_[e]];
      rel = std::min(rel, 1.0 - ne_drop_ * (1.0 - s / ne_base_[i]));
    }
    return rel < 0.0 ? 0.0 : rel;
  }

  double upstream_rel(FirmId i, std::span<const double> h, double psi_i) const {
    double rel = psi_i;
    if (up_base_[i] > 0.0) {
      double s = 0.0;
      const auto out_ptr = net_->out_ptr();
      const auto out_col = net_->out_col();
      const auto out_w = net_->out_weight();
      for (std::uint64_t k = out_ptr[i]; k < out_ptr[i + 1]; ++k) {
        s += out_w[k] * h[out_col[k]];
      }
      rel = std::min(rel, s / up_base_[i]);
    }
    return rel < 0.0 ? 0.0 : rel;
  }

  void dense_iterate(const ShockVector& psi, double eps, int max_iter,
                     CascadeResult& res) const {
    const FirmId n = net_->firm_count();
    std::vector<double> psi_d = psi.dense();
    res.h = psi_d;
    res.trace.push_back(res.h);
    std::vector<double> next(n);
    while (res.iterations < max_iter) {
      ++res.iterations;
      bool any = false;
      for (FirmId i = 0; i < n; ++i) {
        const double fresh = eval_rel(i, res.h, psi_d[i]);
        if (res.h[i] - fresh >= eps) {
          next[i] = fresh;
          any = true;
        } else {
          next[i] = res.h[i];
        }
      }
      if (!any) {
        res.converged = true;
        break;
      }
      res.h = next;
      res.trace.push_back(res.h);
    }
  }

  void calibrate(const EssentialityTable& ess) {
    const FirmId n = net_->firm_count();
    const Strengths st = compute_strengths(*net_);
    s_out_ = st.s_out;
    total_out_ = 0.0;
    for (double v : s_out_) total_out_ += v;

    x0_.resize(n);
    up_base_.assign(n, 0.0);
    ne_base_.assign(n, 0.0);
    ne_drop_ = 1.0 - floor_share_;
    const bool ne_active = ne_drop_ > 0.0;

    // Upstream denominator summed in out-CSR order so a full-demand
    // evaluation reproduces it bit for bit.
    const auto out_ptr = net_->out_ptr();
    const auto out_w = net_->out_weight();
    for (FirmId i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::uint64_t e = out_ptr[i]; e < out_ptr[i + 1]; ++e) s += out_w[e];
      up_base_[i] = s;
      if (s > 0.0) {
        x0_[i] = s;
      } else if (st.s_in[i] > 0.0) {
        x0_[i] = st.s_in[i];
        ++report_.sink_firms;
      } else {
        x0_[i] = 0.0;
        ++report_.inert_firms;
      }
    }

    // Reorder every firm's in-edges: essential product groups first (by
    // product code), then the non-essential block.
    const auto src_ptr = net_->in_ptr();
    const auto src_col = net_->in_col();
    const auto src_w = net_->in_weight();
    in_ptr_.assign(src_ptr.begin(), src_ptr.end());
    in_src_.resize(net_->edge_count());
    in_w_.resize(net_->edge_count());
    grp_ptr_.assign(n + 1, 0);

    std::vector<std::pair<ProductCode, std::uint32_t>> es_edges;  // product, local idx
    std::vector<std::uint32_t> ne_edges;
    for (FirmId i = 0; i < n; ++i) {
      const ProductCode mine = net_->product_of(i);
      es_edges.clear();
      ne_edges.clear();
      const std::uint64_t begin = src_ptr[i];
      const std::uint32_t deg = static_cast<std::uint32_t>(src_ptr[i + 1] - begin);
      for (std::uint32_t k = 0; k < deg; ++k) {
        const ProductCode sup = net_->product_of(src_col[begin + k]);
        if (ess.essential(sup, mine)) {
          es_edges.emplace_back(sup, k);
        } else {
          ne_edges.push_back(k);
        }
      }
      std::stable_sort(es_edges.begin(), es_edges.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      std::uint64_t e = begin;
      std::size_t gi = 0;
      while (gi < es_edges.size()) {
        const ProductCode prod = es_edges[gi].first;
        double base = 0.0;
        while (gi < es_edges.size() && es_edges[gi].first == prod) {
          const std::uint32_t k = es_edges[gi].second;
          in_src_[e] = src_col[begin + k];
          in_w_[e] = src_w[begin + k];
          base += in_w_[e];
          ++e;
          ++gi;
        }
        grp_edge_end_.push_back(e);
        grp_base_.push_back(base);
        ++report_.essential_groups;
      }
      grp_ptr_[i + 1] = grp_edge_end_.size();
      if (grp_ptr_[i + 1] > grp_ptr_[i]) ++report_.firms_with_essential_inputs;

      double ne_total = 0.0;
      for (std::uint32_t k : ne_edges) {
        in_src_[e] = src_col[begin + k];
        in_w_[e] = src_w[begin + k];
        ne_total += in_w_[e];
        ++e;
      }
      if (ne_active && ne_total > 0.0) ne_base_[i] = ne_total;

      // Declared essential inputs the firm does not actually buy.
      const auto declared = ess.essential_suppliers_of(mine);
      if (!declared.empty()) {
        std::size_t present = 0;
        for (std::uint64_t g = grp_ptr_[i]; g < grp_ptr_[i + 1]; ++g) ++present;
        if (present < declared.size()) {
          std::unordered_set<ProductCode> have;
          for (std::uint64_t k2 = begin; k2 < src_ptr[i + 1]; ++k2) {
            have.insert(net_->product_of(src_col[k2]));
          }
          for (ProductCode p : declared) {
            if (!have.contains(p)) ++report_.missing_essential_inputs;
          }
        }
      }
    }
  }

  const SupplyChainNetwork* net_ = nullptr;
  double floor_share_ = 0.5;
  double ne_drop_ = 0.5;
  CalibrationReport report_;
  std::vector<double> x0_;
  std::vector<double> s_out_;
  double total_out_ = 0.0;
  std::vector<double> up_base_;
  std::vector<std::uint64_t> in_ptr_;
  std::vector<FirmId> in_src_;
  std::vector<double> in_w_;
  std::vector<std::uint64_t> grp_ptr_;
  std::vector<std::uint64_t> grp_edge_end_;
  std::vector<double> grp_base_;
  std::vector<double> ne_base_;
};

}  // namespace scnsim
