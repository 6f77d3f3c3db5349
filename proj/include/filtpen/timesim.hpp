#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "filtpen/linkmodel.hpp"
#include "filtpen/trxmodel.hpp"
#include "filtpen/units.hpp"

namespace filtpen {

struct SimConfig {
  std::size_t n_symbols = 100000;
  int sps = 2;
  int taps = 32;
  double mu = 1e-3;
  double train_fraction = 0.2;
  // Adapt on sliced decisions after training instead of the known
  // sequence. Off by default: near the narrow-filter operating points the
  // symbol error rate is high enough that decision errors bias the taps
  // and the run stops measuring the equalizer itself.
  bool decision_directed = false;
  std::uint64_t seed = 1;
  ModulationConstants modulation = kDp16Qam;
};

struct SimResult {
  double snr_db = 0.0;  // error-vector SNR on the payload, unbiased convention
  double ber = 0.0;     // counted Gray-coded bit errors
  bool converged = false;
  bool diverged = false;
  int delay = 0;
  std::vector<std::complex<double>> taps;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place DFT; planning is serialized because the FFTW planner is not
// thread-safe, execution is.
inline void fft_inplace(std::vector<std::complex<double>>& x, int sign) {
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft_1d(static_cast<int>(x.size()), reinterpret_cast<fftw_complex*>(x.data()),
                            reinterpret_cast<fftw_complex*>(x.data()), sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Unit-energy 16QAM with per-axis Gray labels 00,01,11,10 -> -3,-1,+1,+3.
inline const std::array<double, 4>& qam16_levels() {
  static const std::array<double, 4> lv = {-3.0 / std::sqrt(10.0), -1.0 / std::sqrt(10.0),
                                           1.0 / std::sqrt(10.0), 3.0 / std::sqrt(10.0)};
  return lv;
}

inline int gray_of_level_index(int idx) {
  static constexpr int gray[4] = {0b00, 0b01, 0b11, 0b10};
  return gray[idx];
}

inline int nearest_level_index(double v) {
  const auto& lv = qam16_levels();
  int best = 0;
  double bd = std::abs(v - lv[0]);
  for (int i = 1; i < 4; ++i) {
    const double d = std::abs(v - lv[static_cast<std::size_t>(i)]);
    if (d < bd) {
      bd = d;
      best = i;
    }
  }
  return best;
}

inline std::complex<double> slice_qam16(std::complex<double> z) {
  const auto& lv = qam16_levels();
  return {lv[static_cast<std::size_t>(nearest_level_index(z.real()))],
          lv[static_cast<std::size_t>(nearest_level_index(z.imag()))]};
}

inline int bit_errors_qam16(std::complex<double> a, std::complex<double> b) {
  int e = 0;
  for (int axis = 0; axis < 2; ++axis) {
    const double va = axis == 0 ? a.real() : a.imag();
    const double vb = axis == 0 ? b.real() : b.imag();
    const int ga = gray_of_level_index(nearest_level_index(va));
    const int gb = gray_of_level_index(nearest_level_index(vb));
    int d = ga ^ gb;
    while (d) {
      e += d & 1;
      d >>= 1;
    }
  }
  return e;
}

// Unit-energy square-root raised-cosine impulse response, symbol-time units.
inline double srrc_impulse(double u, double rolloff) {
  const double eps = 1e-10;
  if (std::abs(u) < eps) return 1.0 - rolloff + 4.0 * rolloff / std::numbers::pi;
  if (rolloff > 0.0 && std::abs(std::abs(4.0 * rolloff * u) - 1.0) < eps) {
    const double a = std::numbers::pi / (4.0 * rolloff);
    return rolloff / std::numbers::sqrt2 *
           ((1.0 + 2.0 / std::numbers::pi) * std::sin(a) + (1.0 - 2.0 / std::numbers::pi) * std::cos(a));
  }
  const double pu = std::numbers::pi * u;
  return (std::sin(pu * (1.0 - rolloff)) + 4.0 * rolloff * u * std::cos(pu * (1.0 + rolloff))) /
         (pu * (1.0 - 16.0 * rolloff * rolloff * u * u));
}

// Matched-filter tap initialization: starts the adaptive FIR at the
// shaping-matched response so the weakly excited out-of-band modes begin
// near their optimum instead of crawling there at the LMS rate.
inline std::vector<std::complex<double>> matched_filter_taps(int taps, int sps, double rolloff) {
  std::vector<std::complex<double>> w(static_cast<std::size_t>(taps));
  const int center = taps / 2;
  double energy = 0.0;
  for (int t = 0; t < taps; ++t) {
    const double p = srrc_impulse(static_cast<double>(t - center) / sps, rolloff);
    w[static_cast<std::size_t>(t)] = p;
    energy += p * p;
  }
  for (auto& v : w) v *= static_cast<double>(sps) / energy;
  return w;
}

}  // namespace detail

struct SnrEstimate {
  double snr_db = 0.0;
  int delay = 0;
  double corr = 0.0;
};

/// Aligns the decided sequence to the transmitted one by correlation
/// within +-delay_window, then reports Ex / MSE - 1 on the overlap,
/// capped to +-60 dB. Throws if no correlation peak above 0.5 exists.
inline SnrEstimate estimate_snr(std::span<const std::complex<double>> decided,
                                std::span<const std::complex<double>> transmitted, int delay_window) {
  if (decided.size() != transmitted.size() || decided.empty())
    throw std::invalid_argument("estimate_snr: sequences must be nonempty and of equal length");
  const int n = static_cast<int>(decided.size());
  if (delay_window >= n) delay_window = n - 1;

  int best_d = 0;
  double best_corr = -1.0;
  for (int d = -delay_window; d <= delay_window; ++d) {
    std::complex<double> num = 0.0;
    double pz = 0.0, px = 0.0;
    for (int k = std::max(0, d); k < n + std::min(0, d); ++k) {
      const auto& z = decided[static_cast<std::size_t>(k)];
      const auto& x = transmitted[static_cast<std::size_t>(k - d)];
      num += z * std::conj(x);
      pz += std::norm(z);
      px += std::norm(x);
    }
    if (pz <= 0.0 || px <= 0.0) continue;
    const double c = std::abs(num) / std::sqrt(pz * px);
    if (c > best_corr) {
      best_corr = c;
      best_d = d;
    }
  }
  if (best_corr < 0.5) throw std::runtime_error("estimate_snr: no correlation peak above 0.5; alignment failed");

  double mse = 0.0, ex = 0.0;
  int cnt = 0;
  for (int k = std::max(0, best_d); k < n + std::min(0, best_d); ++k) {
    const auto diff = decided[static_cast<std::size_t>(k)] - transmitted[static_cast<std::size_t>(k - best_d)];
    mse += std::norm(diff);
    ex += std::norm(transmitted[static_cast<std::size_t>(k - best_d)]);
    ++cnt;
  }
  mse /= cnt;
  ex /= cnt;
  double snr_lin = mse > 0.0 ? ex / mse - 1.0 : std::numeric_limits<double>::infinity();
  snr_lin = std::clamp(snr_lin, 1e-6, 1e6);
  return {lin_to_db(snr_lin), best_d, best_corr};
}

struct LmsOutput {
  std::vector<std::complex<double>> symbols;
  std::vector<std::complex<double>> taps;
  double mse_initial = 0.0;
  double mse_final = 0.0;
  bool diverged = false;
};

/// Fractionally spaced LMS FIR: trained on known symbols, then
/// decision-directed, step halved once at mid-training. The tap window
/// is centered on the current symbol and indexes the burst circularly,
/// matching the circular channel filtering. Starts from a center spike
/// unless an initial tap vector is supplied.
inline LmsOutput lms_equalize(std::span<const std::complex<double>> rx,
                              std::span<const std::complex<double>> reference, const SimConfig& cfg,
                              std::span<const std::complex<double>> init_taps = {}) {
  if (cfg.taps < 1) throw std::invalid_argument("lms_equalize: need at least one tap");
  if (!(cfg.mu > 0.0 && cfg.mu < 1.0)) throw std::invalid_argument("lms_equalize: step size outside (0, 1)");
  const std::size_t K = reference.size();
  const int sps = cfg.sps;
  if (rx.size() != K * static_cast<std::size_t>(sps))
    throw std::invalid_argument("lms_equalize: rx length must be n_symbols * sps");
  const std::size_t n_train = static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(K));
  if (n_train < 10 * static_cast<std::size_t>(cfg.taps))
    throw std::invalid_argument("lms_equalize: training length below 10x taps");
  if (!init_taps.empty() && init_taps.size() != static_cast<std::size_t>(cfg.taps))
    throw std::invalid_argument("lms_equalize: initial tap vector length mismatch");

  const std::size_t L = rx.size();
  const int T = cfg.taps;
  const int center = T / 2;
  LmsOutput out;
  out.symbols.resize(K);
  if (init_taps.empty()) {
    out.taps.assign(static_cast<std::size_t>(T), 0.0);
    out.taps[static_cast<std::size_t>(center)] = 1.0;
  } else {
    out.taps.assign(init_taps.begin(), init_taps.end());
  }

  double mu = cfg.mu;
  const std::size_t probe = std::max<std::size_t>(200, n_train / 10);
  double mse_head = 0.0, mse_tail = 0.0;
  std::vector<std::complex<double>> win(static_cast<std::size_t>(T));

  for (std::size_t k = 0; k < K; ++k) {
    if (k == n_train / 2) mu *= 0.5;
    const std::size_t base = k * static_cast<std::size_t>(sps) + static_cast<std::size_t>(center);
    for (int t = 0; t < T; ++t)
      win[static_cast<std::size_t>(t)] = rx[(base + L - static_cast<std::size_t>(t)) % L];
    std::complex<double> z = 0.0;
    for (int t = 0; t < T; ++t) z += out.taps[static_cast<std::size_t>(t)] * win[static_cast<std::size_t>(t)];
    out.symbols[k] = z;

    const std::complex<double> desired =
        (k < n_train || !cfg.decision_directed) ? reference[k] : detail::slice_qam16(z);
    const std::complex<double> err = desired - z;
    for (int t = 0; t < T; ++t)
      out.taps[static_cast<std::size_t>(t)] += mu * err * std::conj(win[static_cast<std::size_t>(t)]);

    if (k < probe) mse_head += std::norm(err) / static_cast<double>(probe);
    if (k >= n_train - probe && k < n_train) mse_tail += std::norm(err) / static_cast<double>(probe);

    if ((k & 0xFF) == 0) {
      double norm = 0.0;
      for (const auto& w : out.taps) norm += std::norm(w);
      if (norm > 1e6) {
        out.diverged = true;
        break;
      }
    }
  }
  out.mse_initial = mse_head;
  out.mse_final = mse_tail;
  return out;
}

/// End-to-end Monte Carlo run: random 16QAM symbols, root-raised-cosine
/// shaping, the link's filter cascade with per-stage AWGN injection (all
/// applied as circular frequency-domain products on the burst), receiver
/// AWGN sized from the transceiver model, LMS equalization and payload
/// statistics. Deterministic per seed, one RNG stream per noise source.
inline SimResult run_simulation(const LinkSpec& link, const SimConfig& cfg) {
  if (cfg.n_symbols < 1000) throw std::invalid_argument("run_simulation: need at least 1000 symbols");
  if (cfg.sps < 1) throw std::invalid_argument("run_simulation: sps must be >= 1");
  const std::size_t K = cfg.n_symbols;
  const std::size_t L = K * static_cast<std::size_t>(cfg.sps);
  const double fs = static_cast<double>(cfg.sps) * link.rs;

  std::mt19937_64 sym_rng(detail::mix_seed(cfg.seed, 0));
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<std::complex<double>> symbols(K);
  const auto& lv = detail::qam16_levels();
  for (auto& s : symbols)
    s = {lv[static_cast<std::size_t>(pick(sym_rng))], lv[static_cast<std::size_t>(pick(sym_rng))]};

  // Zero-stuffed spectrum is the symbol spectrum tiled sps times.
  std::vector<std::complex<double>> sym_spec(symbols);
  detail::fft_inplace(sym_spec, FFTW_FORWARD);
  std::vector<std::complex<double>> spec(L);
  for (std::size_t b = 0; b < L; ++b) spec[b] = sym_spec[b % K];

  std::vector<double> bin_freq(L);
  for (std::size_t b = 0; b < L; ++b) {
    const double idx = b <= L / 2 ? static_cast<double>(b) : static_cast<double>(b) - static_cast<double>(L);
    bin_freq[b] = idx * fs / static_cast<double>(L);
  }
  for (std::size_t b = 0; b < L; ++b)
    spec[b] *= std::sqrt(link.rs * raised_cosine_psd(bin_freq[b], link.rolloff, link.rs));

  // Per-sample noise variance that lands source i at SNR_i = e_x_bar/sigma_i^2
  // after ideal matched filtering (E|x|^2 = 1 in simulation units).
  const auto sigmas = noise_sigmas(link);
  const double e_x = link.e_x_bar();
  const auto add_noise = [&](std::size_t source_idx, double sigma_sq) {
    if (sigma_sq <= 0.0) return;
    const double v = sigma_sq / e_x / static_cast<double>(cfg.sps);
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, 1 + source_idx));
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * v * static_cast<double>(L)));
    for (std::size_t b = 0; b < L; ++b) spec[b] += std::complex<double>(gauss(rng), gauss(rng));
  };

  for (std::size_t i = 0; i < link.filters.size(); ++i) {
    add_noise(i, sigmas[i]);
    for (std::size_t b = 0; b < L; ++b) spec[b] *= filter_amplitude(link.filters[i], bin_freq[b]);
  }
  add_noise(link.filters.size(), sigmas.back());

  detail::fft_inplace(spec, FFTW_BACKWARD);
  for (auto& s : spec) s /= static_cast<double>(L);

  const auto init = detail::matched_filter_taps(cfg.taps, cfg.sps, link.rolloff);
  const auto lms = lms_equalize(spec, symbols, cfg, init);

  SimResult res;
  res.taps = lms.taps;
  res.diverged = lms.diverged;
  if (lms.diverged) {
    res.snr_db = -60.0;
    res.ber = 0.5;
    res.converged = false;
    return res;
  }

  const std::size_t n_train = static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(K));
  const std::size_t edge = (4 * static_cast<std::size_t>(cfg.taps) + cfg.sps - 1) / cfg.sps;
  const std::size_t lo = n_train + edge;
  const std::size_t hi = K > edge ? K - edge : 0;
  if (lo + 100 > hi) throw std::invalid_argument("run_simulation: burst too short for payload statistics");

  const std::span<const std::complex<double>> z(lms.symbols.data() + lo, hi - lo);
  const std::span<const std::complex<double>> x(symbols.data() + lo, hi - lo);
  const int window = std::max(8, cfg.taps / cfg.sps + 4);
  const auto est = estimate_snr(z, x, window);
  res.snr_db = est.snr_db;
  res.delay = est.delay;

  double ex = 0.0;
  for (const auto& s : x) ex += std::norm(s);
  ex /= static_cast<double>(x.size());
  res.converged = lms.mse_final <= 0.5 * lms.mse_initial || lms.mse_final <= 0.05 * ex;

  std::size_t bit_err = 0, bits = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const auto idx = static_cast<std::ptrdiff_t>(k) - est.delay;
    if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(x.size())) continue;
    bit_err += static_cast<std::size_t>(
        detail::bit_errors_qam16(detail::slice_qam16(z[k]), x[static_cast<std::size_t>(idx)]));
    bits += 4;
  }
  res.ber = bits > 0 ? static_cast<double>(bit_err) / static_cast<double>(bits) : 0.0;
  return res;
}

}  // namespace filtpen
