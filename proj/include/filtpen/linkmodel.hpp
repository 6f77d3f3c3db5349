#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <variant>
#include <vector>

#include "filtpen/spectral.hpp"
#include "filtpen/trxmodel.hpp"
#include "filtpen/units.hpp"

namespace filtpen {

/// One optical amplifier, linear power ratios.
struct AmplifierSpec {
  double gain = 1.0;
  double noise_figure = 1.0;
};

struct ErfFilter {
  double bw_otf = 0.0;  // Hz
  double b_ch = 0.0;    // Hz
};

/// Measured magnitude shape at frequency offsets from the carrier,
/// linearly interpolated; offsets must be sorted. The end values are
/// held outside the measured range.
struct TabulatedFilter {
  std::vector<double> freq;       // Hz
  std::vector<double> amplitude;  // linear, unit peak
};

struct CustomFilter {
  std::function<double(double)> amplitude;
};

using FilterStage = std::variant<ErfFilter, TabulatedFilter, CustomFilter>;

inline double filter_amplitude(const FilterStage& stage, double f) {
  if (const auto* e = std::get_if<ErfFilter>(&stage)) return erf_filter_amplitude(f, e->bw_otf, e->b_ch);
  if (const auto* t = std::get_if<TabulatedFilter>(&stage)) {
    if (t->freq.size() < 2) throw std::invalid_argument("TabulatedFilter: need at least 2 points");
    if (f <= t->freq.front()) return t->amplitude.front();
    if (f >= t->freq.back()) return t->amplitude.back();
    const auto it = std::upper_bound(t->freq.begin(), t->freq.end(), f);
    const std::size_t i = static_cast<std::size_t>(it - t->freq.begin()) - 1;
    const double u = (f - t->freq[i]) / (t->freq[i + 1] - t->freq[i]);
    return t->amplitude[i] + u * (t->amplitude[i + 1] - t->amplitude[i]);
  }
  return std::get<CustomFilter>(stage).amplitude(f);
}

inline SampledSpectrum filter_response(const FilterStage& stage, const FrequencyGrid& grid) {
  std::vector<double> v(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) v[i] = filter_amplitude(stage, grid.freq(i));
  return {grid, std::move(v), SpectrumKind::magnitude};
}

/// Declarative optical path: filters in transmitter-to-receiver order and
/// the amplifier group injected ahead of each of them. amp_groups has one
/// more entry than filters; the last group sits at the receiver and its
/// noise (plus the transceiver's) traverses no filter.
struct LinkSpec {
  double rs = 0.0;       // Hz
  double rolloff = 0.0;
  double f0 = 0.0;       // Hz carrier
  double p_tx = 0.0;     // W, dual-polarization launch = received power (transparent link)
  std::vector<FilterStage> filters;
  std::vector<std::vector<AmplifierSpec>> amp_groups;
  TrxModel trx{};
  ModulationConstants modulation = kDp16Qam;

  /// Per-dimension symbol energy (one quadrature of one polarization).
  double e_x_bar() const { return p_tx / (4.0 * rs); }
  double snr_trx_lin() const { return snr_trx(p_tx, trx); }
  double sigma_trx_sq() const {
    const double s = snr_trx_lin();
    return s > 0.0 ? e_x_bar() / s : 0.0;
  }
};

/// Per-dimension ASE power spectral density of an amplifier group.
/// The 1/4 spreads the dual-polarization, two-quadrature total over one
/// noise dimension.
inline double ase_sigma_sq(std::span<const AmplifierSpec> group, double f0) {
  if (f0 <= 0.0) throw std::invalid_argument("ase_sigma_sq: carrier frequency must be positive");
  double acc = 0.0;
  for (const auto& a : group) acc += kPlanck * f0 * (a.gain - 1.0) * a.noise_figure;
  return 0.25 * acc;
}

/// Per-dimension noise PSD of every injection point, indexed 0..N where
/// entry i is injected ahead of filter i and entry N (receiver side)
/// additionally carries the transceiver noise.
inline std::vector<double> noise_sigmas(const LinkSpec& link) {
  if (link.amp_groups.size() != link.filters.size() + 1)
    throw std::invalid_argument("noise_sigmas: need one amplifier group per filter gap plus the receiver stage");
  std::vector<double> s(link.amp_groups.size());
  for (std::size_t i = 0; i < link.amp_groups.size(); ++i) s[i] = ase_sigma_sq(link.amp_groups[i], link.f0);
  s.back() += link.sigma_trx_sq();
  return s;
}

inline double snr_ase(const LinkSpec& link) {
  const auto sig = noise_sigmas(link);
  const double ase = std::accumulate(sig.begin(), sig.end(), 0.0) - link.sigma_trx_sq();
  if (ase <= 0.0) throw std::domain_error("snr_ase: no ASE noise in link");
  return link.e_x_bar() / ase;
}

struct ColoredNoise {
  SampledSpectrum psd;    // normalized: identically 1 when every filter is all-pass
  double sigma_total_sq;  // per-dimension normalization constant
};

/// Receiver-side equivalent noise PSD: each source's flat PSD shaped by
/// the squared magnitudes of every filter it subsequently traverses,
/// summed and normalized by the total per-dimension PSD.
inline ColoredNoise colored_noise_psd(const LinkSpec& link, const FrequencyGrid& grid) {
  const auto sigma = noise_sigmas(link);
  const double total = std::accumulate(sigma.begin(), sigma.end(), 0.0);
  if (total <= 0.0) throw std::domain_error("colored_noise_psd: all noise sources are zero; SNR undefined");

  const std::size_t n = link.filters.size();
  // Suffix filter products: after[i](f) = prod_{m >= i} |H_m(f)|^2.
  std::vector<double> suffix(grid.n_points, 0.0);
  std::vector<double> acc(grid.n_points, 0.0);
  for (std::size_t i = 0; i < grid.n_points; ++i) suffix[i] = 1.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) acc[i] = sigma[n];  // receiver source, unfiltered
  for (std::size_t rev = n; rev-- > 0;) {
    const auto resp = filter_response(link.filters[rev], grid);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      suffix[i] *= resp.values[i] * resp.values[i];
      acc[i] += sigma[rev] * suffix[i];
    }
  }
  for (std::size_t i = 0; i < grid.n_points; ++i) acc[i] /= total;
  return {SampledSpectrum(grid, std::move(acc), SpectrumKind::psd), total};
}

/// White-noise-equivalent channel: shaping and filter cascade divided by
/// the square root of the normalized colored-noise PSD.
struct ChannelResponse {
  double rs = 0.0;
  SampledSpectrum h_freq;     // real, >= 0 for magnitude-only filter models
  double h_norm_sq = 0.0;     // integral of |H|^2 (dimensionless pulse energy)
  SampledSpectrum q_freq;     // |H|^2 / ||h||^2
  FoldedSpectrum q_folded;
  double sigma_total_sq = 0.0;
};

inline ChannelResponse white_equiv_channel(const LinkSpec& link, const FrequencyGrid& grid, int n_aliases = 4) {
  const auto shaping = srrc_spectrum(link.rolloff, link.rs, grid);
  std::vector<double> num(shaping.values);
  for (const auto& stage : link.filters) {
    const auto resp = filter_response(stage, grid);
    for (std::size_t i = 0; i < grid.n_points; ++i) num[i] *= resp.values[i];
  }
  const auto noise = colored_noise_psd(link, grid);

  std::vector<double> h(grid.n_points, 0.0);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    if (num[i] == 0.0) continue;
    if (noise.psd.values[i] <= 0.0)
      throw std::domain_error("white_equiv_channel: noise PSD vanishes inside the signal band; whitening impossible");
    h[i] = num[i] / std::sqrt(noise.psd.values[i]);
  }

  ChannelResponse ch;
  ch.rs = link.rs;
  ch.sigma_total_sq = noise.sigma_total_sq;
  ch.h_freq = SampledSpectrum(grid, std::move(h), SpectrumKind::complex_response);
  std::vector<double> q(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) q[i] = ch.h_freq.values[i] * ch.h_freq.values[i];
  auto q_spec = SampledSpectrum(grid, std::move(q), SpectrumKind::magnitude_squared);
  ch.h_norm_sq = integrate_band(q_spec, grid.f_min, grid.f_max);
  if (ch.h_norm_sq <= 0.0) throw std::domain_error("white_equiv_channel: channel carries no signal energy");
  for (auto& v : q_spec.values) v /= ch.h_norm_sq;
  q_spec.kind = SpectrumKind::magnitude_squared;
  ch.q_freq = std::move(q_spec);
  ch.q_folded = fold_spectrum(ch.q_freq, link.rs, n_aliases);
  return ch;
}

/// Symbol-spaced sample phases of the channel pulse h(t): phase i holds
/// h(kT - i*T/l) for k in [-window, window].
struct PulsePhases {
  double rs = 0.0;
  int oversampling = 1;
  int window = 0;
  std::vector<std::vector<std::complex<double>>> phases;
  double sampled_energy = 0.0;  // sum |h|^2 * T/l, converges to ||h||^2

  std::complex<double> sample(int phase, int k) const {
    return phases[static_cast<std::size_t>(phase)][static_cast<std::size_t>(k + window)];
  }
};

/// Extracts the time-domain phases by inverse-transforming H(f). The
/// outermost quarter of the window must hold no more than tail_tol of
/// the sampled energy, otherwise the window is rejected as too small.
inline PulsePhases pulse_phases(const ChannelResponse& ch, int oversampling, int window = 64,
                                double tail_tol = 1e-5) {
  if (oversampling < 1) throw std::invalid_argument("pulse_phases: oversampling must be >= 1");
  if (window < 4) throw std::invalid_argument("pulse_phases: window must span at least 4 symbols");
  const double T = 1.0 / ch.rs;
  PulsePhases pp;
  pp.rs = ch.rs;
  pp.oversampling = oversampling;
  pp.window = window;
  pp.phases.assign(static_cast<std::size_t>(oversampling),
                   std::vector<std::complex<double>>(static_cast<std::size_t>(2 * window + 1)));
  double total = 0.0, outer = 0.0;
  for (int i = 0; i < oversampling; ++i) {
    for (int k = -window; k <= window; ++k) {
      const double t = (static_cast<double>(k) - static_cast<double>(i) / oversampling) * T;
      const auto v = inverse_fourier_at(ch.h_freq, t);
      pp.phases[static_cast<std::size_t>(i)][static_cast<std::size_t>(k + window)] = v;
      const double e = std::norm(v);
      total += e;
      if (std::abs(k) > (3 * window) / 4) outer += e;
    }
  }
  pp.sampled_energy = total * T / oversampling;
  if (total <= 0.0) throw std::domain_error("pulse_phases: channel pulse has no energy");
  if (outer > tail_tol * total)
    throw std::runtime_error("pulse_phases: window too small, pulse tail energy above tolerance");
  return pp;
}

}  // namespace filtpen
