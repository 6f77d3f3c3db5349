// Command-line front end: analytic filtering-penalty evaluation, sweeps,
// time-domain simulation and transceiver model fitting.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "filtpen/config.hpp"
#include "filtpen/equalizers.hpp"
#include "filtpen/sweep.hpp"
#include "filtpen/timesim.hpp"
#include "filtpen/trxmodel.hpp"
#include "filtpen/units.hpp"

namespace {

void print_table(const filtpen::ResultTable& table) { filtpen::emit_csv(table, std::cout); }

int write_output(const filtpen::ResultTable& table, const std::string& out, const std::string& format) {
  if (out.empty()) {
    print_table(table);
  } else {
    filtpen::emit(table, format, out);
    std::cerr << "wrote " << table.rows.size() << " rows to " << out << "\n";
  }
  if (!table.ok()) {
    for (const auto& r : table.rows)
      if (!r.error.empty())
        std::cerr << "error at " << r.sweep_var << "=" << r.sweep_value << " (" << r.equalizer
                  << "): " << r.error << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Filtering penalty models for ASE-limited coherent optical links"};
  app.require_subcommand(1);

  filtpen::GridOptions grid_opt;
  std::uint64_t global_seed = 1;
  app.add_option("--grid-points", grid_opt.n_points, "frequency grid points")->capture_default_str();
  app.add_option("--aliases", grid_opt.n_aliases, "folded aliases per side")->capture_default_str();
  app.add_option("--seed", global_seed, "base RNG seed")->capture_default_str();

  std::string config_path, out_path, format = "csv";
  std::vector<std::string> equalizers = {"bound", "zfe", "mmse", "fse"};
  int taps = 0;
  bool all_pass = false;

  auto* analyze = app.add_subcommand("analyze", "evaluate every requested equalizer at one operating point");
  analyze->add_option("--config", config_path, "link description JSON")->required();
  analyze->add_option("--equalizers", equalizers, "subset of bound,zfe,zfe_disagg,mmse,fse,fle")
      ->delimiter(',')
      ->capture_default_str();
  analyze->add_option("--taps", taps, "FIR length for the fle model");
  analyze->add_flag("--all-pass", all_pass, "replace all filters with flat responses");
  analyze->add_option("--out", out_path, "output file (stdout when omitted)");
  analyze->add_option("--format", format, "csv or json")->capture_default_str();

  std::string variable = "filter_bandwidth";
  std::vector<double> values;
  bool with_sim = false;
  filtpen::SimConfig sim;
  std::vector<std::uint64_t> seeds;

  auto* sweep = app.add_subcommand("sweep", "evaluate equalizers across a swept link parameter");
  sweep->add_option("--config", config_path, "link description JSON")->required();
  sweep->add_option("--variable", variable, "filter_bandwidth | taps | snr_ase | p_rx")
      ->capture_default_str();
  sweep->add_option("--values", values, "sweep values (GHz / taps / dB / dBm)")->delimiter(',')->required();
  sweep->add_option("--equalizers", equalizers, "subset of bound,zfe,zfe_disagg,mmse,fse,fle")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--taps", taps, "FIR length for fle and simulation");
  sweep->add_flag("--with-sim", with_sim, "run the time-domain simulator at each point");
  sweep->add_option("--n-symbols", sim.n_symbols, "simulated symbols per run")->capture_default_str();
  sweep->add_option("--sps", sim.sps, "simulator samples per symbol")->capture_default_str();
  sweep->add_option("--mu", sim.mu, "LMS step size")->capture_default_str();
  sweep->add_option("--train-fraction", sim.train_fraction, "training fraction")->capture_default_str();
  sweep->add_option("--seeds", seeds, "simulation seeds")->delimiter(',');
  sweep->add_option("--out", out_path, "output file (stdout when omitted)");
  sweep->add_option("--format", format, "csv or json")->capture_default_str();

  auto* simulate = app.add_subcommand("simulate", "single time-domain Monte Carlo run");
  simulate->add_option("--config", config_path, "link description JSON")->required();
  simulate->add_option("--taps", sim.taps, "FIR length")->capture_default_str();
  simulate->add_option("--n-symbols", sim.n_symbols, "symbols")->capture_default_str();
  simulate->add_option("--sps", sim.sps, "samples per symbol")->capture_default_str();
  simulate->add_option("--mu", sim.mu, "LMS step size")->capture_default_str();
  simulate->add_option("--train-fraction", sim.train_fraction, "training fraction")->capture_default_str();

  std::string fit_data;
  auto* fit = app.add_subcommand("fit-trx", "fit the transceiver saturation model to sensitivity data");
  fit->add_option("--data", fit_data, "CSV with header p_rx_dbm,ber")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      auto link = filtpen::load_link_spec(config_path);
      if (all_pass) link = filtpen::all_pass_override(link);
      filtpen::SweepDef def;
      def.variable = filtpen::SweepVariable::taps;  // single-point: value is informational only
      def.values = {static_cast<double>(taps)};
      def.equalizers = equalizers;
      def.fle_taps = taps;
      auto table = filtpen::run_sweep(link, def, grid_opt);
      for (auto& r : table.rows) r.sweep_var = "analysis";
      return write_output(table, out_path, format);
    }
    if (*sweep) {
      const auto link = filtpen::load_link_spec(config_path);
      filtpen::SweepDef def;
      def.variable = filtpen::sweep_variable_from_string(variable);
      def.values = values;
      def.equalizers = equalizers;
      def.fle_taps = taps;
      def.with_sim = with_sim;
      sim.taps = taps > 0 ? taps : sim.taps;
      sim.seed = global_seed;
      def.sim = sim;
      def.seeds = seeds.empty() ? std::vector<std::uint64_t>{global_seed} : seeds;
      const auto table = filtpen::run_sweep(link, def, grid_opt);
      return write_output(table, out_path, format);
    }
    if (*simulate) {
      const auto link = filtpen::load_link_spec(config_path);
      sim.seed = global_seed;
      sim.modulation = link.modulation;
      const auto res = filtpen::run_simulation(link, sim);
      std::printf("snr_db=%.4f ber=%.3e converged=%d diverged=%d delay=%d\n", res.snr_db, res.ber,
                  res.converged ? 1 : 0, res.diverged ? 1 : 0, res.delay);
      return res.diverged ? 1 : 0;
    }
    if (*fit) {
      const auto samples = filtpen::load_trx_samples(fit_data);
      const auto model = filtpen::fit_trx_model(samples, filtpen::kDp16Qam);
      std::printf("n_db=%.6f d_dbm=%.6f\n", filtpen::lin_to_db(model.n_sat),
                  filtpen::watt_to_dbm(model.d_half));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
