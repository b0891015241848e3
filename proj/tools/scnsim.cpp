// Command line front end: validate | synth | esri | fsri | stress |
// pd-adjust | report. Progress goes to stderr; results are files (plus the
// validation summary on stdout). Exit codes: 0 ok, 1 usage, 2 validation,
// 3 runtime.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "scnsim/bank.hpp"
#include "scnsim/io.hpp"
#include "scnsim/stress.hpp"
#include "scnsim/synth.hpp"
#include "scnsim/version.hpp"

namespace fs = std::filesystem;
using namespace scnsim;

namespace {

bool g_quiet = false;

void log(const std::string& msg) {
  if (!g_quiet) std::cerr << "[scnsim] " << msg << "\n";
}

struct CommonFlags {
  std::string config_path;
  RunConfig overrides;  // staging area
  bool has_edges = false, has_tx = false, has_firms = false, has_loans = false,
       has_banks = false, has_ess = false, has_eps = false, has_iter = false,
       has_floor = false, has_scen = false, has_q = false, has_seed = false,
       has_lgd = false, has_thresh = false, has_threads = false, has_out = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "run configuration (JSON)");
    app->add_option("--edges", overrides.edges, "edges.csv path")
        ->each([this](const std::string&) { has_edges = true; });
    app->add_option("--transactions", overrides.transactions,
                    "transactions.csv path (stable-link filtered)")
        ->each([this](const std::string&) { has_tx = true; });
    app->add_option("--firms", overrides.firms, "firms.csv path")
        ->each([this](const std::string&) { has_firms = true; });
    app->add_option("--loans", overrides.loans, "loans.csv path")
        ->each([this](const std::string&) { has_loans = true; });
    app->add_option("--banks", overrides.banks, "banks.csv path")
        ->each([this](const std::string&) { has_banks = true; });
    app->add_option("--essentiality", overrides.essentiality,
                    "essentiality.csv path")
        ->each([this](const std::string&) { has_ess = true; });
    app->add_option("--epsilon", overrides.epsilon, "cascade adjustment floor")
        ->each([this](const std::string&) { has_eps = true; });
    app->add_option("--max-iter", overrides.max_iter, "cascade iteration cap")
        ->each([this](const std::string&) { has_iter = true; });
    app->add_option("--floor-share", overrides.floor_share,
                    "production floor without non-essential inputs")
        ->each([this](const std::string&) { has_floor = true; });
    app->add_option("--scenarios", overrides.scenarios, "Monte Carlo scenarios")
        ->check(CLI::Range(1u, 100000000u))
        ->each([this](const std::string&) { has_scen = true; });
    app->add_option("--quantile", overrides.quantile, "VaR/ES quantile")
        ->each([this](const std::string&) { has_q = true; });
    app->add_option("--seed", overrides.seed, "scenario seed")
        ->each([this](const std::string&) { has_seed = true; });
    app->add_option("--lgd", overrides.lgd, "loss given default factor")
        ->each([this](const std::string&) { has_lgd = true; });
    app->add_option("--client-threshold", overrides.client_threshold,
                    "small-portfolio flag threshold")
        ->each([this](const std::string&) { has_thresh = true; });
    app->add_option("--threads", overrides.threads, "worker threads (0 = auto)")
        ->each([this](const std::string&) { has_threads = true; });
    app->add_option("--out", overrides.output_dir, "output directory")
        ->each([this](const std::string&) { has_out = true; });
    app->add_flag("--quiet", g_quiet, "suppress progress logging");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    if (has_edges) cfg.edges = overrides.edges;
    if (has_tx) cfg.transactions = overrides.transactions;
    if (has_firms) cfg.firms = overrides.firms;
    if (has_loans) cfg.loans = overrides.loans;
    if (has_banks) cfg.banks = overrides.banks;
    if (has_ess) cfg.essentiality = overrides.essentiality;
    if (has_eps) cfg.epsilon = overrides.epsilon;
    if (has_iter) cfg.max_iter = overrides.max_iter;
    if (has_floor) cfg.floor_share = overrides.floor_share;
    if (has_scen) cfg.scenarios = overrides.scenarios;
    if (has_q) cfg.quantile = overrides.quantile;
    if (has_seed) cfg.seed = overrides.seed;
    if (has_lgd) cfg.lgd = overrides.lgd;
    if (has_thresh) cfg.client_threshold = overrides.client_threshold;
    if (has_threads) cfg.threads = overrides.threads;
    if (has_out) cfg.output_dir = overrides.output_dir;
    cfg.validate();
    return cfg;
  }
};

struct LoadedModel {
  Dataset ds;
  IngestSummary summary;
};

LoadedModel load_model(const RunConfig& cfg) {
  LoadedModel m;
  log("ingesting data");
  m.ds = ingest(cfg, &m.summary);
  log("network: " + std::to_string(m.summary.validation.firms) + " firms, " +
      std::to_string(m.summary.validation.edges) + " edges, " +
      std::to_string(m.summary.validation.banks) + " banks, " +
      std::to_string(m.summary.validation.loans) + " loans");
  return m;
}

void print_summary(const IngestSummary& s, const EssentialityTable& ess) {
  std::cout << "firms: " << s.validation.firms << "\n"
            << "edges: " << s.validation.edges << "\n"
            << "traded volume: " << s.validation.total_traded_volume << "\n"
            << "banks: " << s.validation.banks << "\n"
            << "loans: " << s.validation.loans << "\n"
            << "firms with loans: " << s.validation.firms_with_loans << " ("
            << 100.0 * s.validation.loan_coverage << "%)\n"
            << "total bank equity: " << s.validation.total_bank_equity << "\n"
            << "essential pairs: " << ess.essential_pair_count() << "\n"
            << "pre-shock insolvent firms: " << s.validation.pre_shock_insolvent
            << "\n";
  if (s.stable_links) {
    std::cout << "stable links kept: " << s.stable_links->pairs_kept << " of "
              << s.stable_links->pairs_total << " pairs, volume "
              << s.stable_links->volume_kept << " of "
              << s.stable_links->volume_total << "\n";
  }
  for (const auto& w : s.validation.warnings) std::cout << "warning: " << w << "\n";
}

struct MeasureSet {
  std::vector<RiskMeasures> direct, adjusted;
  RiskMeasures system_direct, system_adjusted;
  AmplificationReport amp;
};

template <typename DirectLike, typename AdjustedLike>
MeasureSet measures_from(const DirectLike& direct_bank,
                         std::span<const double> direct_system,
                         const AdjustedLike& adjusted_bank,
                         std::span<const double> adjusted_system, double q) {
  MeasureSet ms;
  const std::size_t m = direct_bank.size();
  ms.direct.resize(m);
  ms.adjusted.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    ms.direct[k] = risk_measures(direct_bank[k], q);
    ms.adjusted[k] = risk_measures(adjusted_bank[k], q);
  }
  ms.system_direct = risk_measures(direct_system, q);
  ms.system_adjusted = risk_measures(adjusted_system, q);
  ms.amp = amplification(ms.direct, ms.adjusted, ms.system_direct,
                         ms.system_adjusted);
  return ms;
}

int cmd_validate(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  print_summary(m.summary, m.ds.ess);
  const auto& cal = engine.calibration_report();
  std::cout << "essential input groups: " << cal.essential_groups << "\n"
            << "firms with essential inputs: " << cal.firms_with_essential_inputs
            << "\n"
            << "declared essential inputs not purchased: "
            << cal.missing_essential_inputs << "\n"
            << "pure sink firms: " << cal.sink_firms << "\n"
            << "isolated firms: " << cal.inert_firms << "\n";
  return 0;
}

int cmd_esri(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  log("running single-firm production sweep");
  std::size_t bad = 0;
  const std::vector<double> esri =
      engine.esri_all(cfg.epsilon, cfg.max_iter, cfg.threads, &bad);
  if (bad > 0) log(std::to_string(bad) + " cascades did not converge");
  fs::create_directories(cfg.output_dir);
  write_esri_rank(fs::path(cfg.output_dir) / "esri_rank.csv", cfg, esri,
                  engine.out_strength());
  log("wrote esri_rank.csv");
  return 0;
}

SweepResult run_sweep(const RunConfig& cfg, const LoadedModel& m,
                      const ProductionEngine& engine, bool adjusted_pd_too) {
  SweepOptions opts;
  opts.eps = cfg.epsilon;
  opts.max_iter = cfg.max_iter;
  opts.lgd = cfg.lgd;
  opts.threads = cfg.threads;
  opts.accumulate_adjusted_pd = adjusted_pd_too;
  log("running single-firm failure sweep over " +
      std::to_string(m.ds.net.firm_count()) + " firms");
  SweepResult sweep = fsri_all(engine, m.ds.fin, m.ds.banks, opts);
  if (sweep.nonconverged > 0) {
    log(std::to_string(sweep.nonconverged) + " cascades did not converge");
  }
  return sweep;
}

int cmd_fsri(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  const SweepResult sweep = run_sweep(cfg, m, engine, false);
  fs::create_directories(cfg.output_dir);
  write_fsri_rank(fs::path(cfg.output_dir) / "fsri_rank.csv", cfg, sweep.records,
                  engine.out_strength(), m.ds.banks);
  log("wrote fsri_rank.csv");
  return 0;
}

int cmd_pd_adjust(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  const SweepResult sweep = run_sweep(cfg, m, engine, true);
  const AdjustedPd adj = adjusted_pd_from_sweep(sweep, m.ds.fin.pd);
  fs::create_directories(cfg.output_dir);
  write_adjusted_pd(fs::path(cfg.output_dir) / "adjusted_pd.csv", cfg,
                    m.ds.fin.pd, adj);
  log("wrote adjusted_pd.csv");
  return 0;
}

int cmd_stress(const RunConfig& cfg, const std::string& pd_file) {
  LoadedModel m = load_model(cfg);
  StressOptions opts;
  opts.eps = cfg.epsilon;
  opts.max_iter = cfg.max_iter;
  opts.lgd = cfg.lgd;
  opts.threads = cfg.threads;
  fs::create_directories(cfg.output_dir);

  if (!pd_file.empty()) {
    // Contagion folded into adjusted PDs: direct vs PD-adjusted comparison.
    std::vector<double> q = read_adjusted_pd(pd_file);
    if (q.size() != m.ds.net.firm_count()) {
      throw ValidationError(pd_file + ": covers " + std::to_string(q.size()) +
                            " firms, dataset has " +
                            std::to_string(m.ds.net.firm_count()));
    }
    log("sampling " + std::to_string(cfg.scenarios) + " scenarios");
    const ScenarioSet pd_scen =
        sample_scenarios(m.ds.fin.pd, cfg.scenarios, cfg.seed);
    const DirectDistribution direct =
        run_direct_stress(pd_scen, m.ds.fin, m.ds.banks, opts);
    const PdAdjustedDistribution padj = pd_adjusted_stress(
        q, cfg.scenarios, cfg.seed, m.ds.banks, cfg.lgd, cfg.threads);
    const MeasureSet ms = measures_from(direct.bank, direct.system, padj.bank,
                                        padj.system, cfg.quantile);
    write_bank_risk(fs::path(cfg.output_dir) / "bank_risk_pd_adjusted.csv", cfg,
                    m.ds.banks, ms.direct, ms.adjusted, ms.system_direct,
                    ms.system_adjusted, ms.amp, "pd_adjusted");
    const HistogramSeries series[] = {{"direct", direct.system},
                                      {"pd_adjusted", padj.system}};
    write_loss_histograms(
        fs::path(cfg.output_dir) / "loss_histograms_pd_adjusted.csv", cfg, series);
    write_loss_samples(fs::path(cfg.output_dir) / "loss_samples_pd_adjusted.csv",
                       cfg, direct.system, padj.system);
    log("wrote bank_risk_pd_adjusted.csv, loss_histograms_pd_adjusted.csv, "
        "loss_samples_pd_adjusted.csv");
    return 0;
  }

  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  log("sampling " + std::to_string(cfg.scenarios) + " scenarios");
  const ScenarioSet scen = sample_scenarios(m.ds.fin.pd, cfg.scenarios, cfg.seed);
  log("running stress scenarios");
  const LossDistribution dist = run_stress(scen, engine, m.ds.fin, m.ds.banks, opts);
  if (dist.nonconverged > 0) {
    log(std::to_string(dist.nonconverged) + " scenarios did not converge");
  }
  const MeasureSet ms = measures_from(dist.bank_direct, dist.system_direct,
                                      dist.bank_adjusted, dist.system_adjusted,
                                      cfg.quantile);
  write_bank_risk(fs::path(cfg.output_dir) / "bank_risk.csv", cfg, m.ds.banks,
                  ms.direct, ms.adjusted, ms.system_direct, ms.system_adjusted,
                  ms.amp);
  const HistogramSeries series[] = {{"direct", dist.system_direct},
                                    {"adjusted", dist.system_adjusted}};
  write_loss_histograms(fs::path(cfg.output_dir) / "loss_histograms.csv", cfg,
                        series);
  write_loss_samples(fs::path(cfg.output_dir) / "loss_samples.csv", cfg,
                     dist.system_direct, dist.system_adjusted);
  if (cfg.emit_bank_samples) {
    write_bank_loss_samples(fs::path(cfg.output_dir) / "bank_loss_samples.csv",
                            cfg, dist);
  }
  log("wrote bank_risk.csv, loss_histograms.csv, loss_samples.csv");
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  LoadedModel m = load_model(cfg);
  ProductionEngine engine(m.ds.net, m.ds.ess, cfg.floor_share);
  fs::create_directories(cfg.output_dir);

  const SweepResult sweep = run_sweep(cfg, m, engine, true);
  write_fsri_rank(fs::path(cfg.output_dir) / "fsri_rank.csv", cfg, sweep.records,
                  engine.out_strength(), m.ds.banks);
  const AdjustedPd adj = adjusted_pd_from_sweep(sweep, m.ds.fin.pd);
  write_adjusted_pd(fs::path(cfg.output_dir) / "adjusted_pd.csv", cfg,
                    m.ds.fin.pd, adj);

  StressOptions opts;
  opts.eps = cfg.epsilon;
  opts.max_iter = cfg.max_iter;
  opts.lgd = cfg.lgd;
  opts.threads = cfg.threads;
  log("sampling " + std::to_string(cfg.scenarios) + " scenarios");
  const ScenarioSet scen = sample_scenarios(m.ds.fin.pd, cfg.scenarios, cfg.seed);
  log("running stress scenarios");
  const LossDistribution dist = run_stress(scen, engine, m.ds.fin, m.ds.banks, opts);
  const MeasureSet ms = measures_from(dist.bank_direct, dist.system_direct,
                                      dist.bank_adjusted, dist.system_adjusted,
                                      cfg.quantile);
  write_bank_risk(fs::path(cfg.output_dir) / "bank_risk.csv", cfg, m.ds.banks,
                  ms.direct, ms.adjusted, ms.system_direct, ms.system_adjusted,
                  ms.amp);
  const PdAdjustedDistribution padj = pd_adjusted_stress(
      adj.q, cfg.scenarios, cfg.seed, m.ds.banks, cfg.lgd, cfg.threads);
  const HistogramSeries series[] = {{"direct", dist.system_direct},
                                    {"adjusted", dist.system_adjusted},
                                    {"pd_adjusted", padj.system}};
  write_loss_histograms(fs::path(cfg.output_dir) / "loss_histograms.csv", cfg,
                        series);
  write_loss_samples(fs::path(cfg.output_dir) / "loss_samples.csv", cfg,
                     dist.system_direct, dist.system_adjusted, padj.system);
  if (cfg.emit_bank_samples) {
    write_bank_loss_samples(fs::path(cfg.output_dir) / "bank_loss_samples.csv",
                            cfg, dist);
  }
  log("report complete");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supply chain contagion and bank stress simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonFlags common;

  auto* validate = app.add_subcommand("validate", "check input data consistency");
  common.attach(validate);

  auto* synth = app.add_subcommand("synth", "generate a synthetic economy");
  SynthSpec spec;
  std::string synth_out = "data";
  synth->add_option("--preset", spec.preset, "core-periphery | fig1");
  synth->add_option("--n", spec.firms, "firm count")->check(CLI::Range(1u, 10000000u));
  synth->add_option("--banks", spec.banks, "bank count");
  synth->add_option("--edges-per-firm", spec.edges_per_firm, "average out-degree");
  synth->add_option("--degree-exponent", spec.degree_exponent, "out-degree tail");
  synth->add_option("--coverage", spec.loan_coverage, "share of firms with loans");
  synth->add_option("--products", spec.products, "product codes");
  synth->add_option("--core", spec.core_size, "core firm count");
  synth->add_option("--core-dependence", spec.core_dependence,
                    "essential dependence on core products");
  synth->add_option("--essential-share", spec.essential_share,
                    "essential density among periphery pairs");
  synth->add_option("--thin-buffers", spec.thin_buffer_share,
                    "share of firms with thin buffers");
  synth->add_option("--pd-scale", spec.pd_scale, "default probability scale");
  synth->add_option("--leverage", spec.bank_leverage, "bank book over equity");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory");
  synth->add_flag("--quiet", g_quiet, "suppress progress logging");

  auto* esri = app.add_subcommand("esri", "production-loss systemic risk per firm");
  common.attach(esri);
  auto* fsri = app.add_subcommand("fsri", "financial systemic risk per firm");
  common.attach(fsri);
  auto* stress = app.add_subcommand("stress", "Monte Carlo loss distributions");
  common.attach(stress);
  std::string pd_file;
  stress->add_option("--pd-file", pd_file,
                     "adjusted_pd.csv; sample defaults from q with no propagation");
  auto* pd_adjust =
      app.add_subcommand("pd-adjust", "contagion-adjusted default probabilities");
  common.attach(pd_adjust);
  auto* report = app.add_subcommand("report", "full pipeline, all report files");
  common.attach(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      const Dataset ds = synthesize(spec);
      write_dataset(synth_out, ds);
      log("wrote dataset to " + synth_out);
      return 0;
    }
    const RunConfig cfg = common.resolve();
    if (validate->parsed()) return cmd_validate(cfg);
    if (esri->parsed()) return cmd_esri(cfg);
    if (fsri->parsed()) return cmd_fsri(cfg);
    if (stress->parsed()) return cmd_stress(cfg, pd_file);
    if (pd_adjust->parsed()) return cmd_pd_adjust(cfg);
    if (report->parsed()) return cmd_report(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
