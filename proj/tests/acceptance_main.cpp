// Acceptance suite: one pass/fail line per criterion, non-zero exit on any
// failure. Criteria can be cherry-picked by number on the command line.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "scnsim/bank.hpp"
#include "scnsim/defaults.hpp"
#include "scnsim/io.hpp"
#include "scnsim/network.hpp"
#include "scnsim/production.hpp"
#include "scnsim/stress.hpp"
#include "scnsim/synth.hpp"
#include "support/fixtures.hpp"
#include "support/reference_cascade.hpp"

using namespace scnsim;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
std::vector<std::string> g_notes;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int number, const char* title, bool pass, const std::string& detail) {
  std::printf("%s  criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", number,
              title, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

// --------------------------------------------------------------------------
// 1. Toy golden test
// --------------------------------------------------------------------------
void criterion_1() {
  const auto t0 = Clock::now();
  Check c;

  Dataset ds = fig1_dataset();
  ProductionEngine engine(ds.net, ds.ess, /*floor_share=*/1.0);
  const auto cascade = engine.propagate(ShockVector::single_firm(6, 5), 1e-6, 1000);
  c.expect(cascade.converged, "toy cascade did not converge");
  c.expect(cascade.h[3] == 0.0 && cascade.h[5] == 0.0, "d and f must stop");
  c.expect(cascade.h[0] == 1.0 && cascade.h[1] == 1.0 && cascade.h[2] == 1.0 &&
               cascade.h[4] == 1.0,
           "a, b, c, e must keep producing");

  const auto defaults =
      evaluate_defaults(profit_delta(cascade.h, ds.fin), ds.fin);
  const auto split =
      split_defaults(defaults.chi, ShockVector::single_firm(6, 5));
  c.expect(split.indir == std::vector<std::uint8_t>{0, 0, 0, 1, 0, 0},
           "chi_indir must single out d");
  c.expect(split.dir == std::vector<std::uint8_t>{0, 0, 0, 0, 0, 1},
           "chi_dir must single out f");

  const auto losses = bank_losses(split.dir, split.indir, ds.banks, 1.0);
  c.expect(losses.total[2] == 0.4, "bank 3 loses 2/5");
  c.expect(losses.total[3] == 0.2, "bank 4 loses 1/5");

  const double expected_system = (0.4 * 5.0 + 0.2 * 5.0 + 0.0 + 0.0) / 20.0;
  c.expect(system_loss(losses.total, ds.banks.equity()) == expected_system,
           "system loss must equal 3/20");
  c.expect(std::abs(expected_system - 0.15) < 1e-15, "3/20 is 0.15");

  const auto sweep = fsri_all(engine, ds.fin, ds.banks, {});
  const double expected_fsri =
      0.25 * std::min(1.0, 0.4) + 0.25 * std::min(1.0, 0.2);
  c.expect(sweep.records[5].fsri == expected_fsri, "FSRI_f must equal 0.15");
  c.expect(std::abs(expected_fsri - 0.15) < 1e-15, "expected FSRI is 0.15");

  const double dt = seconds_since(t0);
  c.expect(dt < 1.0, "runtime exceeded 1 s");
  report(1, "toy golden test", c.ok,
         c.ok ? "exact values, " + std::to_string(dt) + " s" : c.why);
}

// --------------------------------------------------------------------------
// 2. Joint-probability identity
// --------------------------------------------------------------------------
void criterion_2() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(20240);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int rep = 0; rep < 1000 && c.ok; ++rep) {
    const std::size_t eta = rng() % 11;  // critical set size
    std::vector<double> ps(eta + 1);
    for (auto& p : ps) p = uni(rng);
    double surv = 1.0;
    for (double p : ps) surv *= 1.0 - p;
    const double product_form = 1.0 - surv;
    const double enumeration = exact_adjusted_pd(ps);
    c.expect(std::abs(enumeration - product_form) < 1e-12,
             "enumeration vs product form diverged at rep " + std::to_string(rep));
    c.expect(product_form >= ps[0] - 1e-15,
             "adjusted pd fell below the firm's own pd");
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 5.0, "runtime exceeded 5 s");
  report(2, "joint-probability identity", c.ok,
         c.ok ? "1000 random sets, " + std::to_string(dt) + " s" : c.why);
}

// --------------------------------------------------------------------------
// 3. Oracle equivalence
// --------------------------------------------------------------------------
void criterion_3() {
  const auto t0 = Clock::now();
  Check c;
  std::mt19937_64 rng(20241);
  for (int rep = 0; rep < 200 && c.ok; ++rep) {
    auto ds = fixtures::random_economy(rng);
    const double floor = (rep % 5 == 0) ? 1.0 : 0.25 + 0.5 * (rep % 3);
    ProductionEngine engine(ds.net, ds.ess, std::min(floor, 1.0));
    const auto ref = refmodel::DenseReference::from(ds.net, ds.ess,
                                                    std::min(floor, 1.0));
    const auto psi = fixtures::random_shock(rng, ds.net.firm_count());
    const auto mine = engine.propagate(psi, 1e-6, 1000);
    bool conv = false;
    const auto theirs = ref.run(psi.dense(), 1e-6, 1000, &conv);
    c.expect(conv == mine.converged, "convergence flags differ");
    for (std::size_t i = 0; i < theirs.size() && c.ok; ++i) {
      c.expect(std::abs(mine.h[i] - theirs[i]) <= 1e-6,
               "levels diverged beyond 1e-6 at rep " + std::to_string(rep));
    }
  }
  const double dt = seconds_since(t0);
  c.expect(dt < 30.0, "runtime exceeded 30 s");
  report(3, "oracle equivalence on random networks", c.ok,
         c.ok ? "200 networks, " + std::to_string(dt) + " s" : c.why);
}

// --------------------------------------------------------------------------
// 4 & 5. Monotonicity suite and decomposition identities
// --------------------------------------------------------------------------
void criteria_4_and_5() {
  Check mono;
  Check decomp;
  std::mt19937_64 rng(20242);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double eps = 1e-6;
  int instances = 0;
  int rho_checked = 0;

  for (int rep = 0; rep < 520; ++rep) {
    fixtures::RandomEconomyOptions opt;
    opt.n_min = 4;
    opt.n_max = 14;
    auto ds = fixtures::random_economy(rng, opt);
    const FirmId n = ds.net.firm_count();
    ProductionEngine engine(ds.net, ds.ess, 0.5);
    ++instances;

    // Cap dominance and monotonicity in the shock.
    const auto psi = fixtures::random_shock(rng, n);
    const auto res = engine.propagate(psi, eps, 1000);
    const auto psi_d = psi.dense();
    ShockVector harsher(n);
    for (FirmId i = 0; i < n; ++i) {
      mono.expect(res.h[i] <= psi_d[i], "h exceeded the shock cap");
      mono.expect(res.h[i] >= 0.0 && res.h[i] <= 1.0, "h left [0,1]");
      const double level = psi_d[i] * uni(rng);
      if (level < 1.0) harsher.set(i, level);
    }
    const auto res2 = engine.propagate(harsher, eps, 1000);
    for (FirmId i = 0; i < n; ++i) {
      // Adjustments below eps are never applied, so order is preserved up
      // to a few eps of quantization.
      mono.expect(res2.h[i] <= res.h[i] + 32.0 * eps,
                  "harsher shock produced higher output");
    }

    // Scenario-wise loss dominance and amplification floor.
    const auto scen = sample_scenarios(ds.fin.pd, 8, 5000 + rep);
    const auto dist = run_stress(scen, engine, ds.fin, ds.banks, {});
    for (BankId k = 0; k < ds.banks.bank_count(); ++k) {
      for (std::uint32_t l = 0; l < scen.count; ++l) {
        mono.expect(dist.bank_adjusted[k][l] >= dist.bank_direct[k][l],
                    "direct loss exceeded contagion-adjusted loss");
      }
      const auto md = risk_measures(dist.bank_direct[k], 0.95);
      const auto ma = risk_measures(dist.bank_adjusted[k], 0.95);
      if (md.el > 0.0) {
        mono.expect(ma.el / md.el >= 1.0, "rho EL below one");
        ++rho_checked;
      }
      if (md.var > 0.0) mono.expect(ma.var / md.var >= 1.0, "rho VaR below one");
      if (md.es > 0.0) mono.expect(ma.es / md.es >= 1.0, "rho ES below one");
    }

    // Decomposition identities on the same instance.
    const auto binary = fixtures::random_shock(rng, n, /*binary_only=*/true);
    const auto bres = engine.propagate(binary, eps, 1000);
    const auto d = evaluate_defaults(profit_delta(bres.h, ds.fin), ds.fin);
    const auto split = split_defaults(d.chi, binary);
    for (FirmId i = 0; i < n; ++i) {
      decomp.expect(d.chi[i] == std::max(d.chi_eq[i], d.chi_l[i]),
                    "chi is not the union of the two criteria");
      decomp.expect(split.dir[i] + split.indir[i] == d.chi[i],
                    "direct/indirect do not sum to chi");
      decomp.expect(split.dir[i] * split.indir[i] == 0,
                    "direct and indirect overlap");
    }
    const auto sweep = fsri_all(engine, ds.fin, ds.banks, {});
    for (const auto& rec : sweep.records) {
      decomp.expect(rec.fsri_indir == rec.fsri - rec.fsri_dir,
                    "FSRI direct + indirect != FSRI");
      decomp.expect(rec.fsri_eq <= rec.fsri + 1e-12 &&
                        rec.fsri_l <= rec.fsri + 1e-12,
                    "single-criterion FSRI exceeded the union FSRI");
    }
  }
  mono.expect(instances >= 500, "fewer than 500 instances");
  mono.expect(rho_checked > 100, "too few defined amplification factors");
  report(4, "monotonicity suite", mono.ok,
         mono.ok ? std::to_string(instances) + " instances" : mono.why);
  report(5, "decomposition identities", decomp.ok,
         decomp.ok ? std::to_string(instances) + " instances" : decomp.why);
}

// --------------------------------------------------------------------------
// 6. Analytic Monte Carlo check
// --------------------------------------------------------------------------
void criterion_6() {
  Check c;
  std::mt19937_64 rng(20243);
  auto ds = fixtures::no_contagion_fixture(rng, 60, 4);
  ProductionEngine engine(ds.net, ds.ess, 0.5);
  const std::uint32_t n_scen = 10000;
  const auto scen = sample_scenarios(ds.fin.pd, n_scen, 424242);
  const auto dist = run_stress(scen, engine, ds.fin, ds.banks, {});
  for (BankId k = 0; k < ds.banks.bank_count(); ++k) {
    double expected = 0.0, variance = 0.0;
    for (FirmId i = 0; i < ds.net.firm_count(); ++i) {
      for (auto e = ds.banks.firm_ptr()[i]; e < ds.banks.firm_ptr()[i + 1]; ++e) {
        if (ds.banks.loan_bank()[e] != k) continue;
        const double f = ds.banks.loan_exposure()[e] / ds.banks.equity()[k];
        expected += ds.fin.pd[i] * f;
        variance += ds.fin.pd[i] * (1.0 - ds.fin.pd[i]) * f * f;
      }
    }
    const double se = std::sqrt(variance / n_scen);
    const auto m = risk_measures(dist.bank_direct[k], 0.95);
    c.expect(std::abs(m.el - expected) <= 3.0 * se,
             "bank " + std::to_string(k) + " EL off by more than 3 standard errors");
  }
  report(6, "analytic Monte Carlo expected loss", c.ok,
         c.ok ? "4 banks within 3 sigma at N=10000" : c.why);
}

// --------------------------------------------------------------------------
// 7. Risk-measure convention
// --------------------------------------------------------------------------
void criterion_7() {
  Check c;
  c.expect(var_index(10000, 0.95) == 9500, "VaR index at N=10000 is not 9500");
  c.expect(10000 - var_index(10000, 0.95) == 500,
           "ES tail at N=10000, q=0.95 is not exactly 500 values");

  std::mt19937_64 rng(20244);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> sample(10000);
  for (auto& v : sample) v = uni(rng);
  const auto m = risk_measures(sample, 0.95);

  // Independent sorted-sample oracle.
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  const double var_oracle = sorted[9499];
  double tail = 0.0;
  for (std::size_t i = 9500; i < sorted.size(); ++i) tail += sorted[i];
  const double es_oracle = tail / 500.0;
  c.expect(m.var == var_oracle, "VaR does not match the sorted-sample oracle");
  c.expect(m.es == es_oracle, "ES does not match the sorted-sample oracle");

  std::vector<double> ladder(100);
  for (int i = 0; i < 100; ++i) ladder[i] = i + 1;
  const auto lm = risk_measures(ladder, 0.95);
  c.expect(lm.var == 95.0 && lm.es == 98.0, "1..100 convention values");
  report(7, "risk-measure convention", c.ok,
         c.ok ? "VaR/ES match the sorted-sample oracle exactly" : c.why);
}

// --------------------------------------------------------------------------
// 8. Scale test
// --------------------------------------------------------------------------
void criterion_8() {
  Check c;
  SynthSpec spec;
  spec.firms = 100000;
  spec.banks = 30;
  spec.edges_per_firm = 10.0;
  spec.core_size = 40;
  spec.products = 30;
  spec.pd_scale = 0.01;
  spec.seed = 77;

  auto t0 = Clock::now();
  Dataset ds = synthesize(spec);
  const double synth_s = seconds_since(t0);
  c.expect(ds.net.edge_count() > 900000 && ds.net.edge_count() < 1200000,
           "edge count " + std::to_string(ds.net.edge_count()) +
               " misses the 1M target");

  ProductionEngine engine(ds.net, ds.ess, 0.5);
  SweepOptions sweep_opts;
  sweep_opts.threads = 0;

  t0 = Clock::now();
  const SweepResult sweep = fsri_all(engine, ds.fin, ds.banks, sweep_opts);
  const double sweep_s = seconds_since(t0);
  c.expect(sweep_s < 1800.0, "FSRI sweep took " + std::to_string(sweep_s) + " s");

  t0 = Clock::now();
  const auto scen = sample_scenarios(ds.fin.pd, 10000, 7878);
  const auto dist = run_stress(scen, engine, ds.fin, ds.banks, {});
  const double stress_s = seconds_since(t0);
  c.expect(stress_s < 600.0,
           "stress run took " + std::to_string(stress_s) + " s");
  c.expect(dist.scenarios == 10000, "scenario count");

  // Determinism across worker counts: a same-family sweep at reduced size,
  // plus a stress slice on the full model.
  {
    SynthSpec small = spec;
    small.firms = 20000;
    small.banks = 10;
    small.core_size = 20;
    small.seed = 78;
    Dataset ds_small = synthesize(small);
    ProductionEngine engine_small(ds_small.net, ds_small.ess, 0.5);
    SweepOptions o1;
    o1.threads = 1;
    SweepOptions o3;
    o3.threads = 3;
    const auto sweep1 = fsri_all(engine_small, ds_small.fin, ds_small.banks, o1);
    const auto sweep3 = fsri_all(engine_small, ds_small.fin, ds_small.banks, o3);
    bool same = sweep1.records.size() == sweep3.records.size();
    for (std::size_t j = 0; j < sweep1.records.size() && same; ++j) {
      same = sweep1.records[j].fsri == sweep3.records[j].fsri &&
             sweep1.records[j].fsri_dir == sweep3.records[j].fsri_dir &&
             sweep1.records[j].fsri_eq == sweep3.records[j].fsri_eq &&
             sweep1.records[j].fsri_l == sweep3.records[j].fsri_l &&
             sweep1.records[j].esri == sweep3.records[j].esri;
    }
    c.expect(same, "sweep results differ across worker counts");

    ScenarioSet sub;
    sub.seed = scen.seed;
    sub.count = 200;
    sub.generator = scen.generator;
    sub.failures.assign(scen.failures.begin(), scen.failures.begin() + 200);
    StressOptions st1;
    st1.threads = 1;
    StressOptions st3;
    st3.threads = 3;
    const auto d1 = run_stress(sub, engine, ds.fin, ds.banks, st1);
    const auto d3 = run_stress(sub, engine, ds.fin, ds.banks, st3);
    bool det = true;
    for (BankId k = 0; k < ds.banks.bank_count() && det; ++k) {
      for (std::uint32_t l = 0; l < sub.count && det; ++l) {
        det = d1.bank_adjusted[k][l] == d3.bank_adjusted[k][l] &&
              d1.bank_direct[k][l] == d3.bank_direct[k][l];
      }
    }
    c.expect(det, "stress results differ across worker counts");
  }

  char detail[256];
  std::snprintf(detail, sizeof(detail),
                "n=%u, edges=%zu, synth %.1f s, sweep %.1f s, stress %.1f s",
                ds.net.firm_count(), ds.net.edge_count(), synth_s, sweep_s,
                stress_s);
  report(8, "scale test (100k firms / 1M edges)", c.ok,
         c.ok ? detail : c.why + " [" + detail + "]");
}

// --------------------------------------------------------------------------
// 9. Qualitative shape on the bundled preset
// --------------------------------------------------------------------------
void criterion_9() {
  Check c;
  SynthSpec spec;  // bundled default preset
  spec.seed = 7;
  Dataset ds = synthesize(spec);
  ProductionEngine engine(ds.net, ds.ess, 0.5);
  const SweepResult sweep = fsri_all(engine, ds.fin, ds.banks, {});

  std::vector<double> fsri;
  fsri.reserve(sweep.records.size());
  for (const auto& r : sweep.records) fsri.push_back(r.fsri);
  std::sort(fsri.rbegin(), fsri.rend());

  const std::size_t plateau_n = spec.core_size;
  const double plateau = fsri[plateau_n / 2];
  c.expect(plateau > 0.02, "plateau level too small to be meaningful");
  c.expect(fsri[0] <= 2.0 * plateau && fsri[plateau_n - 1] >= 0.5 * plateau,
           "top firms do not form a plateau");
  c.expect(fsri[3 * plateau_n] <= 0.5 * plateau,
           "no sharp drop after the plateau");
  c.expect(fsri[0] >= 5.0 * std::max(fsri[99], 1e-12),
           "rank curve is not heavy-tailed");

  const auto scen = sample_scenarios(ds.fin.pd, 2000, 909);
  const auto dist = run_stress(scen, engine, ds.fin, ds.banks, {});
  std::size_t low = 0, mid = 0, high = 0;
  for (double v : dist.system_adjusted) {
    if (v < 0.3 * plateau) ++low;
    if (v >= 0.4 * plateau && v <= 0.6 * plateau) ++mid;
    if (v >= 0.7 * plateau) ++high;
  }
  const auto total = static_cast<double>(dist.system_adjusted.size());
  c.expect(low / total >= 0.2, "no mass at small losses");
  c.expect(high / total >= 0.02, "no second mode near the plateau loss");
  c.expect(mid < high, "no dip between the two modes");

  char detail[192];
  std::snprintf(detail, sizeof(detail),
                "plateau %.3f, low/mid/high = %zu/%zu/%zu of %u", plateau, low,
                mid, high, dist.scenarios);
  report(9, "qualitative shape on the bundled preset", c.ok,
         c.ok ? detail : c.why + std::string(" [") + detail + "]");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int a = 1; a < argc; ++a) only.push_back(std::atoi(argv[a]));
  auto wanted = [&](int k) {
    return only.empty() || std::find(only.begin(), only.end(), k) != only.end();
  };

  if (wanted(1)) criterion_1();
  if (wanted(2)) criterion_2();
  if (wanted(3)) criterion_3();
  if (wanted(4) || wanted(5)) criteria_4_and_5();
  if (wanted(6)) criterion_6();
  if (wanted(7)) criterion_7();
  if (wanted(8)) criterion_8();
  if (wanted(9)) criterion_9();

  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
  } else {
    std::printf("%d criterion(s) failed\n", g_failures);
  }
  return g_failures == 0 ? 0 : 1;
}
