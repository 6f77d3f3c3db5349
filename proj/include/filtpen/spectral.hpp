#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace filtpen {

/// Uniformly spaced frequency axis in Hz, endpoints inclusive.
struct FrequencyGrid {
  double f_min = 0.0;
  double f_max = 0.0;
  std::size_t n_points = 0;

  FrequencyGrid() = default;
  FrequencyGrid(double fmin, double fmax, std::size_t n) : f_min(fmin), f_max(fmax), n_points(n) {
    if (!(f_min < f_max)) throw std::invalid_argument("FrequencyGrid: f_min must be < f_max");
    if (n_points < 2) throw std::invalid_argument("FrequencyGrid: need at least 2 points");
  }

  double df() const { return (f_max - f_min) / static_cast<double>(n_points - 1); }
  double freq(std::size_t i) const { return f_min + df() * static_cast<double>(i); }
  bool operator==(const FrequencyGrid&) const = default;
};

/// Symmetric baseband grid wide enough that folding with `n_aliases`
/// shifted copies per side never leaves the support. The default point
/// count makes the symbol rate an exact whole number of grid cells, so
/// alias shifts land on nodes and folding needs no interpolation; f = 0
/// is a node.
inline FrequencyGrid default_grid(double rs, int n_aliases = 4, std::size_t n_points = 18433) {
  if (rs <= 0.0) throw std::invalid_argument("default_grid: symbol rate must be positive");
  const double half_span = (static_cast<double>(n_aliases) + 0.5) * rs;
  return FrequencyGrid(-half_span, half_span, n_points);
}

enum class SpectrumKind { magnitude, magnitude_squared, psd, complex_response };

/// Real-valued function of frequency sampled on a FrequencyGrid. The
/// piecewise-linear interpolant between nodes is the authoritative
/// representation: folding and band integrals are exact for it.
struct SampledSpectrum {
  FrequencyGrid grid;
  std::vector<double> values;
  SpectrumKind kind = SpectrumKind::magnitude;

  SampledSpectrum() = default;
  SampledSpectrum(FrequencyGrid g, std::vector<double> v, SpectrumKind k)
      : grid(g), values(std::move(v)), kind(k) {
    if (values.size() != grid.n_points)
      throw std::invalid_argument("SampledSpectrum: value count does not match grid");
  }

  bool in_support(double f) const { return f >= grid.f_min && f <= grid.f_max; }

  /// Linear interpolation; throws outside the support.
  double value_at(double f) const {
    if (!in_support(f)) throw std::domain_error("SampledSpectrum::value_at: frequency outside support");
    return interp(f);
  }

  /// Linear interpolation, zero outside the support.
  double value_or_zero(double f) const { return in_support(f) ? interp(f) : 0.0; }

 private:
  double interp(double f) const {
    const double x = (f - grid.f_min) / grid.df();
    const auto i = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(grid.n_points - 2)));
    const double t = x - static_cast<double>(i);
    return values[i] + t * (values[i + 1] - values[i]);
  }
};

/// One period of a symbol-rate-periodic spectrum, sampled endpoint
/// inclusive over [-rs/2, +rs/2]. values.front() == values.back() up to
/// floating-point summation order.
struct FoldedSpectrum {
  double rs = 0.0;
  int n_aliases = 0;
  std::vector<double> values;

  std::size_t n_points() const { return values.size(); }
  double df() const { return rs / static_cast<double>(values.size() - 1); }
  double freq(std::size_t i) const { return -0.5 * rs + df() * static_cast<double>(i); }

  /// Trapezoidal mean over the period; equals the lag-0 autocorrelation
  /// of the underlying pulse when built from a normalized spectrum.
  double mean() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double w = (i == 0 || i + 1 == values.size()) ? 0.5 : 1.0;
      acc += w * values[i];
    }
    return acc * df() / rs;
  }
};

/// Pointwise filter shape used by ROADM-style wavelength-selective
/// switches: a Gaussian-blurred rectangle of width b_ch, expressed with
/// erf edges. The blur width sigma = bw_otf / (2*sqrt(2 ln 2)).
/// Normalized to unit peak gain (flat-loss is SNR-neutral and is dropped).
inline double erf_filter_amplitude(double f, double bw_otf, double b_ch) {
  if (bw_otf <= 0.0 || b_ch <= 0.0)
    throw std::invalid_argument("erf_filter_amplitude: bandwidths must be positive");
  const double sigma = bw_otf / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double s = 1.0 / (sigma * std::numbers::sqrt2);
  const double raw = std::erf((0.5 * b_ch - f) * s) + std::erf((0.5 * b_ch + f) * s);
  const double peak = 2.0 * std::erf(0.5 * b_ch * s);
  return raw / peak;
}

inline SampledSpectrum erf_filter_response(double bw_otf, double b_ch, const FrequencyGrid& grid) {
  std::vector<double> v(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) v[i] = erf_filter_amplitude(grid.freq(i), bw_otf, b_ch);
  return {grid, std::move(v), SpectrumKind::magnitude};
}

/// Raised-cosine power spectrum with unit-energy scaling 1/rs at f = 0.
inline double raised_cosine_psd(double f, double rolloff, double rs) {
  if (rolloff < 0.0 || rolloff > 1.0) throw std::invalid_argument("raised_cosine_psd: rolloff outside [0, 1]");
  if (rs <= 0.0) throw std::invalid_argument("raised_cosine_psd: symbol rate must be positive");
  const double af = std::abs(f);
  const double f1 = 0.5 * (1.0 - rolloff) * rs;
  const double f2 = 0.5 * (1.0 + rolloff) * rs;
  if (af <= f1) return 1.0 / rs;
  if (af >= f2) return 0.0;
  return 0.5 / rs * (1.0 + std::cos(std::numbers::pi / (rolloff * rs) * (af - f1)));
}

/// Square-root raised-cosine shaping magnitude |Phi(f)|. The squared
/// magnitude is renormalized to unit trapezoidal energy on the grid, so
/// downstream energy identities hold to machine precision even for the
/// discontinuous rolloff = 0 limit.
inline SampledSpectrum srrc_spectrum(double rolloff, double rs, const FrequencyGrid& grid) {
  std::vector<double> psd(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) psd[i] = raised_cosine_psd(grid.freq(i), rolloff, rs);
  double energy = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double w = (i == 0 || i + 1 == grid.n_points) ? 0.5 : 1.0;
    energy += w * psd[i];
  }
  energy *= grid.df();
  if (energy <= 0.0) throw std::domain_error("srrc_spectrum: grid does not cover the pulse band");
  std::vector<double> mag(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) mag[i] = std::sqrt(psd[i] / energy);
  return {grid, std::move(mag), SpectrumKind::magnitude};
}

/// Pointwise product of the squared magnitudes of a filter chain.
/// An empty chain is the all-pass identity.
inline SampledSpectrum cascade_magnitude_sq(std::span<const SampledSpectrum> stages, const FrequencyGrid& grid) {
  std::vector<double> v(grid.n_points, 1.0);
  for (const auto& s : stages) {
    if (!(s.grid == grid)) throw std::invalid_argument("cascade_magnitude_sq: stage grid mismatch");
    const bool squared = s.kind == SpectrumKind::magnitude_squared || s.kind == SpectrumKind::psd;
    for (std::size_t i = 0; i < grid.n_points; ++i) {
      const double x = s.values[i];
      v[i] *= squared ? x : x * x;
    }
  }
  return {grid, std::move(v), SpectrumKind::magnitude_squared};
}

inline SampledSpectrum cascade_magnitude_sq(const std::vector<SampledSpectrum>& stages, const FrequencyGrid& grid) {
  return cascade_magnitude_sq(std::span<const SampledSpectrum>(stages), grid);
}

/// Symbol-rate periodization: out(f) = rs * sum_n q(f + n*rs) over
/// n in [-n_aliases, n_aliases], sampled on its own uniform grid over
/// one period. The shifted copies are read through the piecewise-linear
/// interpolant of q. Support must cover +-(n_aliases + 1/2)*rs unless
/// zero extension is requested explicitly.
inline FoldedSpectrum fold_spectrum(const SampledSpectrum& q, double rs, int n_aliases,
                                    bool zero_extend = false) {
  if (rs <= 0.0) throw std::invalid_argument("fold_spectrum: symbol rate must be positive");
  if (n_aliases < 0) throw std::invalid_argument("fold_spectrum: alias count must be >= 0");
  const double need = (static_cast<double>(n_aliases) + 0.5) * rs;
  const double tol = 1e-9 * rs;
  if (!zero_extend && (q.grid.f_min > -need + tol || q.grid.f_max < need - tol))
    throw std::domain_error("fold_spectrum: grid support too small; pass zero_extend to pad");

  std::size_t m = static_cast<std::size_t>(std::lround(rs / q.grid.df()));
  m = std::clamp<std::size_t>(m, 1024, 16384);
  if (m % 2 != 0) ++m;  // keep f = 0 on a node

  FoldedSpectrum out;
  out.rs = rs;
  out.n_aliases = n_aliases;
  out.values.resize(m + 1);
  const double dff = rs / static_cast<double>(m);
  for (std::size_t j = 0; j <= m; ++j) {
    const double f = -0.5 * rs + dff * static_cast<double>(j);
    double acc = 0.0;
    for (int n = -n_aliases; n <= n_aliases; ++n)
      acc += q.value_or_zero(f + static_cast<double>(n) * rs);
    out.values[j] = rs * acc;
  }
  return out;
}

/// Exact integral of the piecewise-linear interpolant over [f_lo, f_hi].
inline double integrate_band(const SampledSpectrum& s, double f_lo, double f_hi) {
  if (!(f_lo < f_hi)) throw std::invalid_argument("integrate_band: empty or reversed range");
  if (!s.in_support(f_lo) || !s.in_support(f_hi))
    throw std::domain_error("integrate_band: range outside spectrum support");
  const double df = s.grid.df();
  const auto cell_of = [&](double f) {
    return static_cast<std::size_t>(
        std::clamp((f - s.grid.f_min) / df, 0.0, static_cast<double>(s.grid.n_points - 2)));
  };
  const auto lin = [&](std::size_t i, double f) {
    const double t = (f - s.grid.freq(i)) / df;
    return s.values[i] + t * (s.values[i + 1] - s.values[i]);
  };
  const std::size_t c0 = cell_of(f_lo), c1 = cell_of(f_hi);
  double acc = 0.0;
  for (std::size_t c = c0; c <= c1; ++c) {
    const double a = std::max(f_lo, s.grid.freq(c));
    const double b = std::min(f_hi, s.grid.freq(c + 1));
    if (b > a) acc += 0.5 * (lin(c, a) + lin(c, b)) * (b - a);
  }
  return acc;
}

/// Trapezoidal integral of a folded spectrum over [f_lo, f_hi] within one period.
inline double integrate_band(const FoldedSpectrum& s, double f_lo, double f_hi) {
  if (!(f_lo < f_hi)) throw std::invalid_argument("integrate_band: empty or reversed range");
  if (f_lo < -0.5 * s.rs - 1e-9 * s.rs || f_hi > 0.5 * s.rs + 1e-9 * s.rs)
    throw std::domain_error("integrate_band: range outside one folded period");
  const double df = s.df();
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < s.values.size(); ++i) {
    const double a = std::max(f_lo, s.freq(i));
    const double b = std::min(f_hi, s.freq(i + 1));
    if (b > a) {
      const auto lin = [&](double f) {
        const double t = (f - s.freq(i)) / df;
        return s.values[i] + t * (s.values[i + 1] - s.values[i]);
      };
      acc += 0.5 * (lin(a) + lin(b)) * (b - a);
    }
  }
  return acc;
}

/// Trapezoidal inverse Fourier transform of a real spectrum at time t,
/// evaluated with a phasor recurrence over the grid.
inline std::complex<double> inverse_fourier_at(const SampledSpectrum& s, double t) {
  const double df = s.grid.df();
  const std::complex<double> step = std::polar(1.0, 2.0 * std::numbers::pi * df * t);
  std::complex<double> phasor = std::polar(1.0, 2.0 * std::numbers::pi * s.grid.f_min * t);
  std::complex<double> acc = 0.0;
  const std::size_t n = s.grid.n_points;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
    acc += (w * s.values[i]) * phasor;
    phasor *= step;
  }
  return acc * df;
}

}  // namespace filtpen
