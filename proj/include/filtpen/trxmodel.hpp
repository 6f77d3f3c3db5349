#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "filtpen/units.hpp"

namespace filtpen {

/// Saturating receiver SNR model: SNR_TRX(P) = n_sat * P / (P + d_half).
/// n_sat is the asymptotic SNR (linear), d_half the received power (W)
/// at which half of it is reached.
struct TrxModel {
  double n_sat = 0.0;
  double d_half = 0.0;
};

struct ModulationConstants {
  double k1 = 0.0;
  double k2 = 0.0;
  std::string name;
};

inline const ModulationConstants kDp16Qam{3.0 / 8.0, 0.1, "dp16qam"};

inline double snr_trx(double p_rx, const TrxModel& m) {
  if (p_rx < 0.0) throw std::invalid_argument("snr_trx: received power must be >= 0");
  return m.n_sat * p_rx / (p_rx + m.d_half);
}

/// Inverse sum of independent linear SNR contributions.
inline double combine_snr(std::span<const double> parts) {
  if (parts.empty()) throw std::invalid_argument("combine_snr: no contributions");
  double inv = 0.0;
  for (double p : parts) {
    if (p <= 0.0) throw std::invalid_argument("combine_snr: contributions must be positive");
    inv += 1.0 / p;
  }
  return 1.0 / inv;
}

inline double combine_snr(std::initializer_list<double> parts) {
  return combine_snr(std::span<const double>(parts.begin(), parts.size()));
}

/// Inverse complementary error function on (0, 2), solved by bisection
/// on std::erfc with a Newton polish. Monotone and accurate to ~1e-14
/// relative over the bit error rates handled here.
inline double erfc_inv(double y) {
  if (!(y > 0.0 && y < 2.0)) throw std::domain_error("erfc_inv: argument outside (0, 2)");
  if (y == 1.0) return 0.0;
  if (y > 1.0) return -erfc_inv(2.0 - y);
  double lo = 0.0, hi = 27.5;  // erfc(27.5) underflows below any representable y
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (std::erfc(mid) > y ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 3; ++i) {
    const double d = -2.0 / std::sqrt(std::numbers::pi) * std::exp(-x * x);
    if (d == 0.0) break;
    x -= (std::erfc(x) - y) / d;
  }
  return x;
}

inline double ber_from_snr(double snr, const ModulationConstants& mc) {
  if (snr < 0.0) throw std::invalid_argument("ber_from_snr: SNR must be >= 0");
  return mc.k1 * std::erfc(std::sqrt(mc.k2 * snr));
}

inline double snr_from_ber(double ber, const ModulationConstants& mc) {
  if (!(ber > 0.0 && ber < mc.k1)) throw std::domain_error("snr_from_ber: BER outside invertible range (0, k1)");
  const double x = erfc_inv(ber / mc.k1);
  return x * x / mc.k2;
}

/// Gaussian-equivalent Q^2 in dB from a bit error rate. Floored at
/// -30 dB near BER = 1/2 to keep tabulated output finite.
inline double q2_db_from_ber(double ber) {
  if (!(ber > 0.0 && ber < 0.5)) throw std::domain_error("q2_db_from_ber: BER outside (0, 0.5)");
  if (ber >= 0.499) return -30.0;
  const double q = std::numbers::sqrt2 * erfc_inv(2.0 * ber);
  return std::max(-30.0, lin_to_db(q * q));
}

struct TrxSample {
  double p_rx = 0.0;  // W
  double ber = 0.0;
};

/// Fits (n_sat, d_half) to sensitivity measurements. BER samples are
/// mapped to SNR first; the squared residuals are minimized in the dB
/// domain, where measurement jitter is roughly uniform.
inline TrxModel fit_trx_model(std::span<const TrxSample> points, const ModulationConstants& mc) {
  if (points.size() < 3) throw std::invalid_argument("fit_trx_model: need at least 3 points");
  double p_min = points[0].p_rx, p_max = points[0].p_rx;
  for (const auto& pt : points) {
    if (pt.p_rx <= 0.0) throw std::invalid_argument("fit_trx_model: received power must be positive");
    p_min = std::min(p_min, pt.p_rx);
    p_max = std::max(p_max, pt.p_rx);
  }
  if (p_max < 10.0 * p_min)
    throw std::invalid_argument("fit_trx_model: points must span at least a decade of received power");

  std::vector<double> snr(points.size());
  double s_min = 0.0, s_max = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    snr[i] = snr_from_ber(points[i].ber, mc);
    s_min = i == 0 ? snr[i] : std::min(s_min, snr[i]);
    s_max = i == 0 ? snr[i] : std::max(s_max, snr[i]);
  }
  if (s_max <= s_min * (1.0 + 1e-9))
    throw std::invalid_argument("fit_trx_model: degenerate point set (no SNR variation)");

  // Initial guess from the linear form 1/SNR = 1/N + (D/N)/P.
  double sxx = 0.0, sx = 0.0, sy = 0.0, sxy = 0.0;
  const double n = static_cast<double>(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double x = 1.0 / points[i].p_rx, y = 1.0 / snr[i];
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  double a = (sy * sxx - sx * sxy) / det;   // 1/N
  double b = (n * sxy - sx * sy) / det;     // D/N
  double N = a > 0.0 ? 1.0 / a : 1.05 * s_max;
  double D = (a > 0.0 && b > 0.0) ? b / a : 0.1 * p_min;

  // Gauss-Newton in (ln N, ln D) on log-SNR residuals, with damping.
  const auto cost = [&](double nn, double dd) {
    double c = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double r = std::log(nn * points[i].p_rx / (points[i].p_rx + dd)) - std::log(snr[i]);
      c += r * r;
    }
    return c;
  };
  double lambda = 1e-12;
  double c_cur = cost(N, D);
  for (int iter = 0; iter < 200; ++iter) {
    double j11 = 0.0, j12 = 0.0, j22 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double r = std::log(N * points[i].p_rx / (points[i].p_rx + D)) - std::log(snr[i]);
      const double dlnD = -D / (points[i].p_rx + D);
      j11 += 1.0; j12 += dlnD; j22 += dlnD * dlnD;
      g1 += r; g2 += r * dlnD;
    }
    const double d2 = (j11 + lambda) * (j22 + lambda) - j12 * j12;
    if (std::abs(d2) < 1e-300) break;
    const double step_n = (-g1 * (j22 + lambda) + g2 * j12) / d2;
    const double step_d = (-g2 * (j11 + lambda) + g1 * j12) / d2;
    const double N_try = N * std::exp(std::clamp(step_n, -2.0, 2.0));
    const double D_try = D * std::exp(std::clamp(step_d, -2.0, 2.0));
    const double c_try = cost(N_try, D_try);
    if (c_try < c_cur) {
      N = N_try; D = D_try; c_cur = c_try;
      lambda = std::max(lambda * 0.25, 1e-14);
      if (std::abs(step_n) + std::abs(step_d) < 1e-13) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e8) break;
    }
  }
  return {N, D};
}

}  // namespace filtpen
