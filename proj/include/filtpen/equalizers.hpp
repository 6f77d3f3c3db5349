#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "filtpen/linkmodel.hpp"
#include "filtpen/spectral.hpp"

namespace filtpen {

enum class EqualizerKind { bound, zfe, mmse, fse, fle };

inline std::string to_string(EqualizerKind k) {
  switch (k) {
    case EqualizerKind::bound: return "bound";
    case EqualizerKind::zfe: return "zfe";
    case EqualizerKind::mmse: return "mmse";
    case EqualizerKind::fse: return "fse";
    case EqualizerKind::fle: return "fle";
  }
  return "?";
}

/// Outcome of one equalizer evaluation. k_penalty is the linear SNR
/// degradation factor relative to the unfiltered bound; it stays NaN for
/// the finite-length model, which has no closed-form penalty.
struct EqualizerResult {
  EqualizerKind equalizer = EqualizerKind::bound;
  double k_penalty = std::numeric_limits<double>::quiet_NaN();
  double snr = 0.0;     // linear, unbiased where the model is biased
  double snr_db = 0.0;
  std::vector<double> k_sources;  // per-source penalties (disaggregated zfe)
  int oversampling = 0;
  int n_f = 0;
  int nu = 0;
  int delta = -1;
};

/// Matched-filter-style SNR ceiling: signal energy through the channel
/// against the total whitened noise PSD, bandwidth terms cancelled.
inline double snr_unfiltered(double e_x_bar, double h_norm_sq, double sigma_total_sq) {
  if (sigma_total_sq <= 0.0) throw std::domain_error("snr_unfiltered: total noise must be positive");
  return e_x_bar * h_norm_sq / sigma_total_sq;
}

/// Zero-forcing penalty: mean of 1/Q over one folded period. Divergent
/// (strictly band-limited) channels report +inf rather than throwing.
inline double k_zfe(const FoldedSpectrum& q_folded) {
  const std::size_t n = q_folded.n_points();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = q_folded.values[i];
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    acc += w / q;
  }
  return acc * q_folded.df() / q_folded.rs;
}

/// MMSE penalty and the unbiased SNR it implies. snr_bound is the
/// unfiltered bound of the same link; the regularizer 1/snr_bound keeps
/// the integrand finite through spectral nulls.
struct MmseResult {
  double k = 0.0;
  double snr_unbiased = 0.0;
};

inline MmseResult k_mmse(const FoldedSpectrum& q_folded, double snr_bound) {
  if (snr_bound <= 0.0) throw std::domain_error("k_mmse: bound SNR must be positive");
  const std::size_t n = q_folded.n_points();
  const double inv_snr = 1.0 / snr_bound;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    acc += w / (std::max(q_folded.values[i], 0.0) + inv_snr);
  }
  const double k = acc * q_folded.df() / q_folded.rs;
  return {k, snr_bound / k - 1.0};
}

/// Per-source zero-forcing penalties. Each source's share of the output
/// noise is traced through the one receiver built for the aggregate link
/// (whitener, matched filter and ZFE stay fixed; the other sources are
/// muted). The sigma^2-weighted mean of the k_i then reproduces the
/// aggregate k_zfe identically, which is what makes the split usable as
/// a disaggregation.
inline std::vector<double> k_zfe_disaggregated(const LinkSpec& link, const FrequencyGrid& grid,
                                               int n_aliases = 4) {
  const auto sigma = noise_sigmas(link);
  const auto noise = colored_noise_psd(link, grid);
  const auto ch = white_equiv_channel(link, grid, n_aliases);

  const std::size_t n_filters = link.filters.size();
  const std::size_t n_sources = sigma.size();

  // Suffix products per source: traversed[i](f) = prod_{m >= i} |H_m(f)|^2.
  std::vector<std::vector<double>> traversed(n_sources, std::vector<double>(grid.n_points, 1.0));
  for (std::size_t rev = n_filters; rev-- > 0;) {
    const auto resp = filter_response(link.filters[rev], grid);
    traversed[rev] = traversed[rev + 1];
    for (std::size_t i = 0; i < grid.n_points; ++i)
      traversed[rev][i] *= resp.values[i] * resp.values[i];
  }

  const bool divergent = k_zfe(ch.q_folded) == std::numeric_limits<double>::infinity();
  std::vector<double> out(n_sources, std::numeric_limits<double>::infinity());
  if (divergent) return out;

  for (std::size_t src = 0; src < n_sources; ++src) {
    // Whitened share of source src inside the channel's Q, folded with it.
    std::vector<double> share(grid.n_points, 0.0);
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      const double s = noise.psd.values[i];
      if (s > 0.0) share[i] = traversed[src][i] / s * ch.q_freq.values[i];
    }
    const auto folded = fold_spectrum(SampledSpectrum(grid, std::move(share), SpectrumKind::psd),
                                      link.rs, n_aliases);
    double acc = 0.0;
    for (std::size_t i = 0; i < folded.n_points(); ++i) {
      const double q = ch.q_folded.values[i];
      const double w = (i == 0 || i + 1 == folded.n_points()) ? 0.5 : 1.0;
      acc += w * folded.values[i] / (q * q);
    }
    out[src] = acc * folded.df() / link.rs;
  }
  return out;
}

/// Fractionally spaced MMSE penalty evaluated from the sampled pulse
/// phases. The phases are rescaled so their folded power sums to the
/// oversampling factor, which makes the result coincide with k_mmse of
/// the same channel whenever the sampling rate clears the pulse band.
inline MmseResult k_fse(const PulsePhases& pp, double snr_bound, std::size_t n_eval = 4097) {
  if (snr_bound <= 0.0) throw std::domain_error("k_fse: bound SNR must be positive");
  if (pp.sampled_energy <= 0.0) throw std::domain_error("k_fse: pulse phases carry no energy");
  const int l = pp.oversampling;
  const double T = 1.0 / pp.rs;
  const double scale = std::sqrt(T / pp.sampled_energy);
  const int w = pp.window;
  const double inv_snr = static_cast<double>(l) / snr_bound;

  const std::size_t m = n_eval - 1;
  const double dff = pp.rs / static_cast<double>(m);
  double acc = 0.0;
  for (std::size_t j = 0; j <= m; ++j) {
    const double f = -0.5 * pp.rs + dff * static_cast<double>(j);
    const std::complex<double> step = std::polar(1.0, -2.0 * std::numbers::pi * f * T);
    std::complex<double> phasor = std::polar(1.0, -2.0 * std::numbers::pi * f * T * static_cast<double>(-w));
    std::vector<std::complex<double>> g(static_cast<std::size_t>(l), 0.0);
    for (int k = -w; k <= w; ++k) {
      for (int i = 0; i < l; ++i) g[static_cast<std::size_t>(i)] += pp.sample(i, k) * phasor;
      phasor *= step;
    }
    double power = 0.0;
    for (int i = 0; i < l; ++i) power += std::norm(g[static_cast<std::size_t>(i)]);
    power *= scale * scale;
    const double weight = (j == 0 || j == m) ? 0.5 : 1.0;
    acc += weight * static_cast<double>(l) / (power + inv_snr);
  }
  const double k = acc * dff / pp.rs;
  return {k, snr_bound / k - 1.0};
}

/// Finite-length MMSE equalization problem: l tap vectors per symbol
/// over channel memory nu, an N_f-symbol observation span, per-dimension
/// symbol energy and whitened-noise PSD. delta is the decision delay; when
/// unset every admissible delay is tried and the best one is returned.
struct FleProblem {
  std::vector<std::vector<std::complex<double>>> taps_per_phase;  // [l][nu + 1]
  int nu = 0;
  int n_f = 0;
  std::optional<int> delta;
  double e_x_bar = 0.0;
  double noise_psd = 0.0;
};

struct FleResult {
  double sigma_sq_mmse = 0.0;
  double snr_unbiased = 0.0;
  int delta = 0;
  Eigen::RowVectorXcd w;
};

inline FleResult fle_mmse(const FleProblem& p) {
  const int l = static_cast<int>(p.taps_per_phase.size());
  if (l < 1) throw std::invalid_argument("fle_mmse: need at least one sample phase");
  if (p.n_f < 1) throw std::invalid_argument("fle_mmse: N_f must be >= 1");
  if (p.nu < 0) throw std::invalid_argument("fle_mmse: nu must be >= 0");
  if (p.noise_psd <= 0.0) throw std::domain_error("fle_mmse: zero noise makes the system singular");
  if (p.e_x_bar <= 0.0) throw std::invalid_argument("fle_mmse: symbol energy must be positive");
  for (const auto& ph : p.taps_per_phase)
    if (ph.size() != static_cast<std::size_t>(p.nu + 1))
      throw std::invalid_argument("fle_mmse: each phase needs nu + 1 taps");

  const int rows = p.n_f * l;
  const int cols = p.n_f + p.nu;
  if (p.delta && (*p.delta < 0 || *p.delta >= cols))
    throw std::invalid_argument("fle_mmse: delta outside [0, N_f + nu - 1]");

  // Shifted block structure: row block r holds taps h_0..h_nu starting at column r.
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(rows, cols);
  for (int r = 0; r < p.n_f; ++r)
    for (int j = 0; j <= p.nu; ++j)
      for (int i = 0; i < l; ++i)
        H(r * l + i, r + j) = p.taps_per_phase[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];

  Eigen::MatrixXcd ryy = p.e_x_bar * (H * H.adjoint());
  ryy += static_cast<double>(l) * p.noise_psd * Eigen::MatrixXcd::Identity(rows, rows);
  Eigen::LLT<Eigen::MatrixXcd> llt(ryy);
  if (llt.info() != Eigen::Success) throw std::runtime_error("fle_mmse: R_YY factorization failed");

  const auto evaluate = [&](int delta) {
    const Eigen::VectorXcd ryx = p.e_x_bar * H.col(delta);
    Eigen::VectorXcd u = llt.solve(ryx);
    double rel = (ryy * u - ryx).norm() / ryx.norm();
    if (rel > 1e-10) {
      u += llt.solve(ryx - ryy * u);
      rel = (ryy * u - ryx).norm() / ryx.norm();
      if (rel > 1e-10) throw std::runtime_error("fle_mmse: linear solve residual above tolerance");
    }
    const double sigma = p.e_x_bar - std::real(u.dot(ryx));
    return std::make_pair(sigma, u);
  };

  int best_delta;
  if (p.delta) {
    best_delta = *p.delta;
  } else {
    best_delta = 0;
    double best_sigma = std::numeric_limits<double>::infinity();
    const Eigen::MatrixXcd all = llt.solve(H);
    for (int d = 0; d < cols; ++d) {
      const double sigma = p.e_x_bar - p.e_x_bar * p.e_x_bar * std::real(all.col(d).dot(H.col(d)));
      if (sigma < best_sigma) {
        best_sigma = sigma;
        best_delta = d;
      }
    }
  }

  const auto [sigma, u] = evaluate(best_delta);
  if (!(sigma > 0.0)) throw std::runtime_error("fle_mmse: nonpositive error variance (ill-conditioned problem)");
  FleResult res;
  res.sigma_sq_mmse = sigma;
  res.snr_unbiased = p.e_x_bar / sigma - 1.0;
  res.delta = best_delta;
  res.w = u.adjoint();
  return res;
}

/// Default decision delay used when a caller wants the nominal centered
/// value instead of the searched optimum.
inline int fle_default_delta(int nu, int n_f) { return (nu + n_f) / 2; }

/// Builds an FleProblem from a link channel, re-centering the pulse so
/// the taps are causal. By default the channel memory nu spans the whole
/// extraction window: trimming the pulse tails (tail_fraction > 0)
/// discards tail ISI and can push the finite-length result marginally
/// above the infinite-length one, breaking the expected ordering.
inline FleProblem make_fle_problem(const ChannelResponse& ch, const PulsePhases& pp, int n_f,
                                   double e_x_bar, std::optional<int> delta = std::nullopt,
                                   double tail_fraction = 0.0) {
  const int l = pp.oversampling;
  const int w = pp.window;
  int m = w;
  if (tail_fraction > 0.0) {
    double total = 0.0;
    for (const auto& ph : pp.phases)
      for (const auto& v : ph) total += std::norm(v);
    for (int cand = 1; cand <= w; ++cand) {
      double e = 0.0;
      for (int i = 0; i < l; ++i)
        for (int k = -cand; k <= cand; ++k) e += std::norm(pp.sample(i, k));
      if (e >= (1.0 - tail_fraction) * total) {
        m = cand;
        break;
      }
    }
  }

  const double scale = std::sqrt(1.0 / ch.rs);  // sqrt(T), makes the taps dimensionless
  FleProblem p;
  p.nu = 2 * m;
  p.n_f = n_f;
  p.delta = delta;
  p.e_x_bar = e_x_bar;
  p.noise_psd = ch.sigma_total_sq;
  p.taps_per_phase.assign(static_cast<std::size_t>(l),
                          std::vector<std::complex<double>>(static_cast<std::size_t>(p.nu + 1)));
  for (int i = 0; i < l; ++i)
    for (int j = 0; j <= p.nu; ++j)
      p.taps_per_phase[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          scale * pp.sample(i, j - m);
  return p;
}

}  // namespace filtpen
