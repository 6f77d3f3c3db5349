#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "filtpen/linkmodel.hpp"
#include "filtpen/trxmodel.hpp"
#include "filtpen/units.hpp"

namespace filtpen {

/// Carries every validation problem found in a config, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors)
      : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  static std::string join(const std::vector<std::string>& errs) {
    std::string out = "invalid configuration:";
    for (const auto& e : errs) out += "\n  - " + e;
    return out;
  }
  std::vector<std::string> errors_;
};

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace detail

/// Two-column measured filter shape: header-free CSV of
/// (f_offset_ghz, attenuation_db), renormalized to unit peak.
inline TabulatedFilter load_tabulated_filter(const std::filesystem::path& path) {
  const auto rows = detail::read_csv(path);
  TabulatedFilter f;
  for (const auto& r : rows) {
    if (r.size() != 2) throw std::runtime_error("tabulated filter " + path.string() + ": expected 2 columns");
    if (f.freq.empty() && !std::isdigit(static_cast<unsigned char>(r[0].front())) &&
        r[0].front() != '-' && r[0].front() != '+')
      continue;  // optional header
    f.freq.push_back(ghz_to_hz(std::stod(r[0])));
    f.amplitude.push_back(std::pow(10.0, -std::stod(r[1]) / 20.0));
  }
  if (f.freq.size() < 2) throw std::runtime_error("tabulated filter " + path.string() + ": need at least 2 points");
  for (std::size_t i = 1; i < f.freq.size(); ++i)
    if (f.freq[i] <= f.freq[i - 1])
      throw std::runtime_error("tabulated filter " + path.string() + ": offsets must be strictly increasing");
  const double peak = *std::max_element(f.amplitude.begin(), f.amplitude.end());
  if (peak <= 0.0) throw std::runtime_error("tabulated filter " + path.string() + ": all-zero shape");
  for (auto& a : f.amplitude) a /= peak;
  return f;
}

/// Sensitivity measurements for the transceiver fit: CSV with mandatory
/// header `p_rx_dbm,ber`.
inline std::vector<TrxSample> load_trx_samples(const std::filesystem::path& path) {
  const auto rows = detail::read_csv(path);
  if (rows.empty() || rows[0].size() < 2 || rows[0][0] != "p_rx_dbm" || rows[0][1] != "ber")
    throw std::runtime_error("trx data " + path.string() + ": expected header 'p_rx_dbm,ber'");
  std::vector<TrxSample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() < 2) throw std::runtime_error("trx data " + path.string() + ": short row");
    out.push_back({dbm_to_watt(std::stod(rows[i][0])), std::stod(rows[i][1])});
  }
  return out;
}

/// Loads and validates a link description. Engineering units (GHz, dB,
/// dBm) at the boundary, SI inside. Semantic problems are listed
/// exhaustively in the thrown ConfigError.
inline LinkSpec load_link_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"cannot open config file: " + path.string()});
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError({std::string("JSON parse error in ") + path.string() + ": " + e.what()});
  }

  std::vector<std::string> errs;
  LinkSpec link;

  const auto require_num = [&](const nlohmann::json& obj, const char* section, const char* key,
                               double& out) {
    if (!obj.contains(key)) {
      errs.push_back(std::string(section) + "." + key + ": missing");
      return false;
    }
    if (!obj[key].is_number()) {
      errs.push_back(std::string(section) + "." + key + ": must be a number");
      return false;
    }
    out = obj[key].get<double>();
    return true;
  };

  if (!doc.contains("signal") || !doc["signal"].is_object()) {
    errs.push_back("signal: missing section");
  } else {
    const auto& sig = doc["signal"];
    double rs_ghz = 0, f0_thz = 0, p_dbm = 0;
    if (require_num(sig, "signal", "rs_ghz", rs_ghz)) {
      if (rs_ghz <= 0) errs.push_back("signal.rs_ghz: must be positive");
      link.rs = ghz_to_hz(rs_ghz);
    }
    if (require_num(sig, "signal", "rolloff", link.rolloff)) {
      if (link.rolloff < 0.0 || link.rolloff > 1.0)
        errs.push_back("signal.rolloff: must be within [0, 1], got " + std::to_string(link.rolloff));
    }
    if (require_num(sig, "signal", "f0_thz", f0_thz)) {
      if (f0_thz <= 0) errs.push_back("signal.f0_thz: must be positive");
      link.f0 = thz_to_hz(f0_thz);
    }
    if (require_num(sig, "signal", "p_tx_dbm", p_dbm)) link.p_tx = dbm_to_watt(p_dbm);
    const std::string mod = sig.value("modulation", "dp16qam");
    if (mod == "dp16qam") {
      link.modulation = kDp16Qam;
    } else {
      errs.push_back("signal.modulation: unknown modulation '" + mod + "'");
    }
  }

  link.amp_groups.emplace_back();
  if (!doc.contains("path") || !doc["path"].is_array()) {
    errs.push_back("path: missing stage list");
  } else {
    std::size_t idx = 0;
    for (const auto& stage : doc["path"]) {
      const std::string where = "path[" + std::to_string(idx++) + "]";
      if (stage.contains("amplifiers")) {
        if (!stage["amplifiers"].is_array()) {
          errs.push_back(where + ".amplifiers: must be a list");
          continue;
        }
        for (const auto& amp : stage["amplifiers"]) {
          double g_db = 0, nf_db = 0;
          const bool ok_g = require_num(amp, where.c_str(), "gain_db", g_db);
          const bool ok_nf = require_num(amp, where.c_str(), "nf_db", nf_db);
          const int count = amp.value("count", 1);
          if (count < 1) errs.push_back(where + ".count: must be >= 1");
          if (ok_g && g_db < 0) errs.push_back(where + ".gain_db: must be >= 0 (no attenuating stages)");
          if (ok_nf && nf_db < 0) errs.push_back(where + ".nf_db: must be >= 0");
          if (ok_g && ok_nf && g_db >= 0 && nf_db >= 0)
            for (int c = 0; c < count; ++c)
              link.amp_groups.back().push_back({db_to_lin(g_db), db_to_lin(nf_db)});
        }
      } else if (stage.contains("filter")) {
        const auto& f = stage["filter"];
        const std::string model = f.value("model", "");
        if (model == "erf") {
          double bw = 0, bch = 0;
          const bool ok1 = require_num(f, where.c_str(), "bw_otf_ghz", bw);
          const bool ok2 = require_num(f, where.c_str(), "b_ch_ghz", bch);
          if (ok1 && bw <= 0) errs.push_back(where + ".bw_otf_ghz: must be positive");
          if (ok2 && bch <= 0) errs.push_back(where + ".b_ch_ghz: must be positive");
          if (ok1 && ok2 && bw > 0 && bch > 0) {
            link.filters.push_back(ErfFilter{ghz_to_hz(bw), ghz_to_hz(bch)});
            link.amp_groups.emplace_back();
          }
        } else if (model == "tabulated") {
          if (!f.contains("file")) {
            errs.push_back(where + ".file: missing for tabulated filter");
          } else {
            try {
              auto file = path.parent_path() / f["file"].get<std::string>();
              link.filters.push_back(load_tabulated_filter(file));
              link.amp_groups.emplace_back();
            } catch (const std::exception& e) {
              errs.push_back(where + ": " + e.what());
            }
          }
        } else {
          errs.push_back(where + ".model: unknown filter model '" + model + "'");
        }
      } else {
        errs.push_back(where + ": stage must contain 'amplifiers' or 'filter'");
      }
    }
  }

  if (!doc.contains("trx") || !doc["trx"].is_object()) {
    errs.push_back("trx: missing section");
  } else {
    const auto& trx = doc["trx"];
    if (trx.contains("fit_file")) {
      try {
        const auto samples = load_trx_samples(path.parent_path() / trx["fit_file"].get<std::string>());
        link.trx = fit_trx_model(samples, link.modulation);
      } catch (const std::exception& e) {
        errs.push_back(std::string("trx.fit_file: ") + e.what());
      }
    } else {
      double n_db = 0, d_dbm = 0;
      if (require_num(trx, "trx", "n_db", n_db)) link.trx.n_sat = db_to_lin(n_db);
      if (require_num(trx, "trx", "d_dbm", d_dbm)) {
        link.trx.d_half = dbm_to_watt(d_dbm);
        if (link.trx.d_half <= 0) errs.push_back("trx.d_dbm: implied power must be positive");
      }
    }
  }

  if (!errs.empty()) throw ConfigError(std::move(errs));
  return link;
}

/// Replaces every optical filter with a flat unit response, keeping the
/// noise bookkeeping untouched.
inline LinkSpec all_pass_override(LinkSpec link) {
  for (auto& f : link.filters) f = CustomFilter{[](double) { return 1.0; }};
  return link;
}

}  // namespace filtpen
