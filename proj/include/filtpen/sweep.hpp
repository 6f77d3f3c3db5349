#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "filtpen/equalizers.hpp"
#include "filtpen/linkmodel.hpp"
#include "filtpen/timesim.hpp"
#include "filtpen/trxmodel.hpp"
#include "filtpen/units.hpp"

namespace filtpen {

struct GridOptions {
  std::size_t n_points = 18433;
  int n_aliases = 4;
  int pulse_window = 64;  // symbols each side for time-domain extraction
};

inline FrequencyGrid make_grid(double rs, const GridOptions& opt) {
  return default_grid(rs, opt.n_aliases, opt.n_points);
}

enum class SweepVariable { filter_bandwidth, taps, snr_ase, p_rx };

inline std::string to_string(SweepVariable v) {
  switch (v) {
    case SweepVariable::filter_bandwidth: return "filter_bandwidth";
    case SweepVariable::taps: return "taps";
    case SweepVariable::snr_ase: return "snr_ase";
    case SweepVariable::p_rx: return "p_rx";
  }
  return "?";
}

inline SweepVariable sweep_variable_from_string(const std::string& s) {
  if (s == "filter_bandwidth") return SweepVariable::filter_bandwidth;
  if (s == "taps") return SweepVariable::taps;
  if (s == "snr_ase") return SweepVariable::snr_ase;
  if (s == "p_rx") return SweepVariable::p_rx;
  throw std::invalid_argument("unknown sweep variable: " + s);
}

/// Sweep request. Values are in the table's engineering units per
/// variable: GHz channel bandwidth, tap count, dB target SNR, dBm power.
struct SweepDef {
  SweepVariable variable = SweepVariable::filter_bandwidth;
  std::vector<double> values;
  std::vector<std::string> equalizers;  // subset of bound/zfe/zfe_disagg/mmse/fse/fle
  int fle_taps = 0;                     // FIR length for fle rows; N_f = taps / sps
  bool with_sim = false;
  SimConfig sim{};
  std::vector<std::uint64_t> seeds{1};
};

struct ResultRow {
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string equalizer;
  double snr_db = std::numeric_limits<double>::quiet_NaN();
  double k_db = std::numeric_limits<double>::quiet_NaN();
  double q2_db = std::numeric_limits<double>::quiet_NaN();
  double ber = std::numeric_limits<double>::quiet_NaN();
  double sim_snr_db = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::uint64_t> seed;
  std::string error;  // nonempty marks a failed point
};

struct ResultTable {
  std::vector<ResultRow> rows;
  bool ok() const {
    for (const auto& r : rows)
      if (!r.error.empty()) return false;
    return true;
  }
};

inline unsigned worker_count() {
  if (const char* env = std::getenv("FILTPEN_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

inline void fill_quality(ResultRow& row, double snr_lin, const ModulationConstants& mc) {
  if (snr_lin <= 0.0) {
    row.snr_db = -std::numeric_limits<double>::infinity();
    row.ber = mc.k1;
  } else {
    row.snr_db = lin_to_db(snr_lin);
    row.ber = ber_from_snr(snr_lin, mc);
  }
  row.q2_db = row.ber > 0.0 && row.ber < 0.5 ? q2_db_from_ber(row.ber) : 60.0;
}

inline LinkSpec apply_sweep_value(LinkSpec link, SweepVariable var, double value) {
  switch (var) {
    case SweepVariable::filter_bandwidth:
      for (auto& f : link.filters) {
        auto* erf = std::get_if<ErfFilter>(&f);
        if (!erf) throw std::invalid_argument("filter_bandwidth sweep requires erf filter stages");
        erf->b_ch = ghz_to_hz(value);
      }
      break;
    case SweepVariable::taps:
      break;  // handled by the equalizer/simulation configuration
    case SweepVariable::snr_ase: {
      const double target = db_to_lin(value);
      const double current = snr_ase(link);
      const double scale = current / target;
      for (auto& group : link.amp_groups)
        for (auto& amp : group) amp.noise_figure *= scale;
      break;
    }
    case SweepVariable::p_rx:
      link.p_tx = dbm_to_watt(value);
      break;
  }
  return link;
}

}  // namespace detail

/// Evaluates one sweep point: analytic equalizers, optional finite-length
/// model and optional Monte Carlo runs, one ResultRow per output.
inline std::vector<ResultRow> evaluate_point(const LinkSpec& link, const SweepDef& def, double value,
                                             const GridOptions& grid_opt) {
  const int taps = def.variable == SweepVariable::taps ? static_cast<int>(value)
                   : def.fle_taps > 0                  ? def.fle_taps
                                                       : def.sim.taps;
  std::vector<ResultRow> rows;
  const auto want = [&](const std::string& name) {
    return std::find(def.equalizers.begin(), def.equalizers.end(), name) != def.equalizers.end();
  };

  const auto grid = make_grid(link.rs, grid_opt);
  const auto ch = white_equiv_channel(link, grid, grid_opt.n_aliases);
  const double e_x = link.e_x_bar();
  const double bound = snr_unfiltered(e_x, ch.h_norm_sq, ch.sigma_total_sq);

  const bool need_phases = want("fse") || want("fle") || def.with_sim;
  std::optional<PulsePhases> phases;
  if (need_phases) phases = pulse_phases(ch, def.sim.sps, grid_opt.pulse_window);

  const auto base_row = [&](const std::string& eq) {
    ResultRow r;
    r.sweep_var = to_string(def.variable);
    r.sweep_value = value;
    r.equalizer = eq;
    return r;
  };

  if (want("bound")) {
    auto r = base_row("bound");
    r.k_db = 0.0;
    detail::fill_quality(r, bound, link.modulation);
    rows.push_back(std::move(r));
  }
  if (want("zfe")) {
    auto r = base_row("zfe");
    const double k = k_zfe(ch.q_folded);
    r.k_db = lin_to_db(k);
    detail::fill_quality(r, std::isinf(k) ? 0.0 : bound / k, link.modulation);
    rows.push_back(std::move(r));
  }
  if (want("zfe_disagg")) {
    const auto ks = k_zfe_disaggregated(link, grid, grid_opt.n_aliases);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      auto r = base_row("zfe_src" + std::to_string(i + 1));
      r.k_db = lin_to_db(ks[i]);
      detail::fill_quality(r, std::isinf(ks[i]) ? 0.0 : bound / ks[i], link.modulation);
      rows.push_back(std::move(r));
    }
  }
  if (want("mmse")) {
    auto r = base_row("mmse");
    const auto m = k_mmse(ch.q_folded, bound);
    r.k_db = lin_to_db(m.k);
    detail::fill_quality(r, m.snr_unbiased, link.modulation);
    rows.push_back(std::move(r));
  }
  if (want("fse")) {
    auto r = base_row("fse");
    const auto m = k_fse(*phases, bound);
    r.k_db = lin_to_db(m.k);
    detail::fill_quality(r, m.snr_unbiased, link.modulation);
    rows.push_back(std::move(r));
  }

  std::optional<FleResult> fle;
  if (want("fle") || def.with_sim) {
    const int n_f = std::max(1, taps / def.sim.sps);
    auto problem = make_fle_problem(ch, *phases, n_f, e_x);
    fle = fle_mmse(problem);
    if (want("fle")) {
      auto r = base_row("fle");
      detail::fill_quality(r, fle->snr_unbiased, link.modulation);
      rows.push_back(std::move(r));
    }
  }

  if (def.with_sim) {
    for (const auto seed : def.seeds) {
      auto r = base_row("sim");
      SimConfig sim = def.sim;
      sim.seed = seed;
      sim.taps = taps;
      sim.modulation = link.modulation;
      const auto res = run_simulation(link, sim);
      detail::fill_quality(r, fle->snr_unbiased, link.modulation);
      r.sim_snr_db = res.snr_db;
      r.ber = res.ber;  // counted errors override the analytic mapping
      r.seed = seed;
      if (!res.converged && !res.diverged) r.error = "simulation did not converge";
      if (res.diverged) r.error = "lms diverged";
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

/// Runs every sweep point, dispatching points to a worker pool capped by
/// FILTPEN_THREADS. Row order is deterministic: sweep value major,
/// equalizer minor. Failing points become error rows, the sweep continues.
inline ResultTable run_sweep(const LinkSpec& link, const SweepDef& def,
                             const GridOptions& grid_opt = {}) {
  if (def.values.empty()) throw std::invalid_argument("run_sweep: no sweep values");
  if (def.equalizers.empty() && !def.with_sim)
    throw std::invalid_argument("run_sweep: empty equalizer set");
  static const std::vector<std::string> known = {"bound", "zfe", "zfe_disagg", "mmse", "fse", "fle"};
  for (const auto& e : def.equalizers)
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw std::invalid_argument("run_sweep: unknown equalizer '" + e + "'");
  const bool needs_taps =
      def.with_sim || std::find(def.equalizers.begin(), def.equalizers.end(), "fle") != def.equalizers.end();
  if (needs_taps && def.variable != SweepVariable::taps && def.fle_taps <= 0 && def.sim.taps <= 0)
    throw std::invalid_argument("run_sweep: fle/with_sim require a tap count");

  std::vector<std::vector<ResultRow>> slots(def.values.size());
  std::atomic<std::size_t> next{0};
  const unsigned n_workers =
      std::min<unsigned>(worker_count(), static_cast<unsigned>(def.values.size()));
  const auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= def.values.size()) return;
      try {
        slots[i] = evaluate_point(link, def, def.values[i], grid_opt);
      } catch (const std::exception& e) {
        ResultRow r;
        r.sweep_var = to_string(def.variable);
        r.sweep_value = def.values[i];
        r.equalizer = "error";
        r.error = e.what();
        slots[i] = {std::move(r)};
      }
    }
  };
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  ResultTable table;
  for (auto& s : slots)
    for (auto& r : s) table.rows.push_back(std::move(r));
  return table;
}

namespace detail {

inline std::string format_cell(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline double parse_cell(const std::string& s) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

}  // namespace detail

inline constexpr const char* kCsvHeader = "sweep_var,sweep_value,equalizer,snr_db,k_db,q2_db,ber,sim_snr_db,seed";

inline void emit_csv(const ResultTable& table, std::ostream& out) {
  out << kCsvHeader << "\n";
  for (const auto& r : table.rows) {
    out << r.sweep_var << ',' << detail::format_cell(r.sweep_value) << ',' << r.equalizer << ','
        << detail::format_cell(r.snr_db) << ',' << detail::format_cell(r.k_db) << ','
        << detail::format_cell(r.q2_db) << ',' << detail::format_cell(r.ber) << ','
        << detail::format_cell(r.sim_snr_db) << ',' << (r.seed ? std::to_string(*r.seed) : "") << "\n";
  }
}

inline nlohmann::ordered_json to_json(const ResultTable& table) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  const auto put = [](nlohmann::ordered_json& obj, const char* key, double v) {
    if (std::isnan(v))
      obj[key] = nullptr;
    else if (std::isinf(v))
      obj[key] = v > 0 ? "inf" : "-inf";
    else
      obj[key] = v;
  };
  for (const auto& r : table.rows) {
    nlohmann::ordered_json obj;
    obj["sweep_var"] = r.sweep_var;
    obj["sweep_value"] = r.sweep_value;
    obj["equalizer"] = r.equalizer;
    put(obj, "snr_db", r.snr_db);
    put(obj, "k_db", r.k_db);
    put(obj, "q2_db", r.q2_db);
    put(obj, "ber", r.ber);
    put(obj, "sim_snr_db", r.sim_snr_db);
    if (r.seed)
      obj["seed"] = *r.seed;
    else
      obj["seed"] = nullptr;
    if (!r.error.empty()) obj["error"] = r.error;
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void emit_json(const ResultTable& table, std::ostream& out) { out << to_json(table).dump(2) << "\n"; }

inline ResultTable parse_result_json(std::istream& in) {
  const auto doc = nlohmann::json::parse(in);
  ResultTable table;
  const auto get_num = [](const nlohmann::json& obj, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return std::numeric_limits<double>::quiet_NaN();
    if (obj[key].is_string()) return detail::parse_cell(obj[key].get<std::string>());
    return obj[key].get<double>();
  };
  for (const auto& obj : doc) {
    ResultRow r;
    r.sweep_var = obj.value("sweep_var", "");
    r.sweep_value = get_num(obj, "sweep_value");
    r.equalizer = obj.value("equalizer", "");
    r.snr_db = get_num(obj, "snr_db");
    r.k_db = get_num(obj, "k_db");
    r.q2_db = get_num(obj, "q2_db");
    r.ber = get_num(obj, "ber");
    r.sim_snr_db = get_num(obj, "sim_snr_db");
    if (obj.contains("seed") && !obj["seed"].is_null()) r.seed = obj["seed"].get<std::uint64_t>();
    if (obj.contains("error")) r.error = obj["error"].get<std::string>();
    table.rows.push_back(std::move(r));
  }
  return table;
}

inline void emit(const ResultTable& table, const std::string& format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit: cannot open for writing: " + path.string());
  if (format == "csv")
    emit_csv(table, out);
  else if (format == "json")
    emit_json(table, out);
  else
    throw std::invalid_argument("emit: unknown format '" + format + "'");
}

}  // namespace filtpen
