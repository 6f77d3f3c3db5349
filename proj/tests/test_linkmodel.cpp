#include "filtpen/linkmodel.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "filtpen/equalizers.hpp"
#include "filtpen/units.hpp"
#include "test_util.hpp"

using namespace filtpen;
using namespace filtpen::test;

TEST(AseSigma, EmptyAndTransparentGroups) {
  EXPECT_DOUBLE_EQ(ase_sigma_sq(std::vector<AmplifierSpec>{}, 193.9e12), 0.0);
  const std::vector<AmplifierSpec> transparent{{1.0, db_to_lin(6.0)}};
  EXPECT_DOUBLE_EQ(ase_sigma_sq(transparent, 193.9e12), 0.0);
  EXPECT_THROW(ase_sigma_sq(transparent, 0.0), std::invalid_argument);
}

TEST(AseSigma, Metro8ReceiverSnr) {
  const auto link = metro8();
  EXPECT_NEAR(lin_to_db(snr_ase(link)), 19.43, 0.02);
}

TEST(ColoredPsd, SingleReceiverSourceIsFlat) {
  const auto link = simple_link(63.1e9, 0.15, {ErfFilter{8e9, 75e9}}, {0.0, 1e-17});
  const auto grid = default_grid(link.rs);
  const auto noise = colored_noise_psd(link, grid);
  for (std::size_t i = 0; i < grid.n_points; i += 331)
    ASSERT_NEAR(noise.psd.values[i], 1.0, 1e-12);
}

TEST(ColoredPsd, TwoEqualSourcesOneFilter) {
  const double s = 2e-17;
  const auto link = simple_link(63.1e9, 0.15, {ErfFilter{8e9, 75e9}}, {s, s});
  const auto grid = default_grid(link.rs);
  const auto noise = colored_noise_psd(link, grid);
  for (std::size_t i = 0; i < grid.n_points; i += 331) {
    const double h1 = erf_filter_amplitude(grid.freq(i), 8e9, 75e9);
    ASSERT_NEAR(noise.psd.values[i], 0.5 * (h1 * h1 + 1.0), 1e-9);
  }
}

TEST(ColoredPsd, AllSourcesAheadOfAllFilters) {
  const auto link = simple_link(63.1e9, 0.15, {ErfFilter{8e9, 75e9}, ErfFilter{8e9, 60e9}},
                                {3e-17, 0.0, 0.0});
  const auto grid = default_grid(link.rs);
  const auto noise = colored_noise_psd(link, grid);
  for (std::size_t i = 0; i < grid.n_points; i += 331) {
    const double f = grid.freq(i);
    const double h1 = erf_filter_amplitude(f, 8e9, 75e9);
    const double h2 = erf_filter_amplitude(f, 8e9, 60e9);
    ASSERT_NEAR(noise.psd.values[i], h1 * h1 * h2 * h2, 1e-9);
  }
}

TEST(ColoredPsd, AllZeroNoiseRejected) {
  auto link = simple_link(63.1e9, 0.15, {ErfFilter{8e9, 75e9}}, {0.0, 0.0});
  link.trx = TrxModel{1e30, 1e-15};  // effectively no transceiver noise either
  link.trx.n_sat = std::numeric_limits<double>::infinity();
  const auto grid = default_grid(link.rs);
  EXPECT_THROW(colored_noise_psd(link, grid), std::domain_error);
}

TEST(WhiteEquivChannel, UnfilteredNyquist) {
  const auto link = rx_noise_link(63.1e9, 0.15, {}, 19.43);
  const auto grid = default_grid(link.rs);
  const auto ch = white_equiv_channel(link, grid);
  EXPECT_NEAR(ch.h_norm_sq, 1.0, 1e-9);
  for (std::size_t i = 0; i < ch.q_folded.n_points(); i += 17)
    ASSERT_NEAR(ch.q_folded.values[i], 1.0, 1e-6);
}

TEST(WhiteEquivChannel, BrickWallEnergyAndFold) {
  const double rs = 63.1e9, b = 0.8 * rs;
  const auto link = rx_noise_link(rs, 0.0, {brick_filter(b)}, 20.0);
  const auto grid = default_grid(rs);
  const auto ch = white_equiv_channel(link, grid);
  EXPECT_NEAR(ch.h_norm_sq, b / rs, 3e-3);
  // inside the surviving band the fold is rs/b, outside zero
  EXPECT_NEAR(ch.q_folded.values[ch.q_folded.n_points() / 2], rs / b, 3e-2);
  EXPECT_NEAR(ch.q_folded.values.front(), 0.0, 1e-9);
  EXPECT_NEAR(integrate_band(ch.q_folded, -0.5 * rs, 0.5 * rs) / rs, 1.0, 1e-6);
}

TEST(WhiteEquivChannel, Metro8FoldedMeanIsUnity) {
  const auto link = metro8();
  const auto ch = white_equiv_channel(link, default_grid(link.rs));
  EXPECT_NEAR(ch.q_folded.mean(), 1.0, 1e-6);
}

TEST(WhiteEquivChannel, AutocorrelationSamplesHermitianWithUnitCenter) {
  const auto link = metro8();
  const auto ch = white_equiv_channel(link, default_grid(link.rs));
  const double T = 1.0 / link.rs;
  EXPECT_NEAR(inverse_fourier_at(ch.q_freq, 0.0).real(), 1.0, 1e-4);
  for (int k = 1; k <= 8; ++k) {
    const auto qp = inverse_fourier_at(ch.q_freq, k * T);
    const auto qm = inverse_fourier_at(ch.q_freq, -k * T);
    EXPECT_NEAR(std::abs(qp - std::conj(qm)), 0.0, 1e-10);
  }
}

TEST(WhiteEquivChannel, WhiteningPathMatchesPrewhitenedAllPass) {
  // With all-pass filters the colored path degenerates to a single flat
  // source of the same total PSD; both constructions must agree exactly.
  const auto link = all_pass_override(metro8());
  const auto grid = default_grid(link.rs);
  const auto ch_colored = white_equiv_channel(link, grid);

  auto flat = rx_noise_link(link.rs, link.rolloff, {}, 10.0);
  flat.amp_groups.back().clear();
  flat.amp_groups.back().push_back(amp_for_sigma(
      ch_colored.sigma_total_sq - flat.sigma_trx_sq(), flat.f0));
  const auto ch_flat = white_equiv_channel(flat, grid);

  ASSERT_EQ(ch_colored.q_folded.n_points(), ch_flat.q_folded.n_points());
  for (std::size_t i = 0; i < ch_colored.q_folded.n_points(); i += 7)
    ASSERT_NEAR(ch_colored.q_folded.values[i], ch_flat.q_folded.values[i], 1e-9);
  EXPECT_NEAR(k_mmse(ch_colored.q_folded, 30.0).k, k_mmse(ch_flat.q_folded, 30.0).k, 1e-12);
}

TEST(WhiteEquivChannel, CommonFilterScaleMovesEnergyNotShape) {
  const double rs = 63.1e9, c = 0.5;
  const auto base = rx_noise_link(rs, 0.15, {ErfFilter{8e9, 62.5e9}}, 20.0);
  auto scaled = base;
  scaled.filters[0] = CustomFilter{[](double f) { return 0.5 * erf_filter_amplitude(f, 8e9, 62.5e9); }};
  const auto grid = default_grid(rs);
  const auto ch0 = white_equiv_channel(base, grid);
  const auto ch1 = white_equiv_channel(scaled, grid);
  EXPECT_NEAR(ch1.h_norm_sq, c * c * ch0.h_norm_sq, 1e-12 * ch0.h_norm_sq);
  for (std::size_t i = 0; i < ch0.q_folded.n_points(); i += 13)
    ASSERT_NEAR(ch1.q_folded.values[i], ch0.q_folded.values[i], 1e-9);
}

TEST(PulsePhases, BrickWallSymbolRateSamplesAreDelta) {
  // Conformant grid keeps the rectangle edges on nodes.
  const FrequencyGrid grid(-4.5 * 63.1e9, 4.5 * 63.1e9, 9001);
  const auto link = rx_noise_link(63.1e9, 0.0, {}, 20.0);
  const auto ch = white_equiv_channel(link, grid);
  const auto pp = pulse_phases(ch, 1, 32, 1.0);  // sinc tails: disable the tail gate
  const double h0 = std::abs(pp.sample(0, 0));
  for (int k = 1; k <= 32; ++k) EXPECT_LT(std::abs(pp.sample(0, k)), 5e-3 * h0) << "k=" << k;
  double norm = 0.0;
  for (int k = -32; k <= 32; ++k) norm += std::norm(pp.sample(0, k));
  EXPECT_GT(std::norm(pp.sample(0, 0)) / norm, 0.99);
}

TEST(PulsePhases, OversampledEnergyMatchesPulseNorm) {
  const auto link = metro8();
  const auto ch = white_equiv_channel(link, default_grid(link.rs));
  const auto pp = pulse_phases(ch, 2);
  EXPECT_NEAR(pp.sampled_energy, ch.h_norm_sq, 1e-6 * ch.h_norm_sq);
}

TEST(PulsePhases, PhaseSpectraReconstructTheFold) {
  // Summed squared phase spectra against the directly folded |H|^2.
  const auto link = metro8();
  const auto ch = white_equiv_channel(link, default_grid(link.rs));
  const auto pp = pulse_phases(ch, 2);
  const double rs = link.rs, T = 1.0 / rs;
  const auto h2_folded = fold_spectrum(ch.q_freq, rs, 4);  // = fold(|H|^2)/||h||^2
  double peak = 0.0;
  for (double v : h2_folded.values) peak = std::max(peak, v);
  for (std::size_t j = 0; j < h2_folded.n_points(); j += 11) {
    const double f = h2_folded.freq(j);
    double power = 0.0;
    for (int i = 0; i < 2; ++i) {
      std::complex<double> g = 0.0;
      for (int k = -pp.window; k <= pp.window; ++k)
        g += pp.sample(i, k) * std::polar(1.0, -2.0 * std::numbers::pi * f * k * T);
      power += std::norm(g);
    }
    const double expect = 2.0 * rs * h2_folded.values[j] * ch.h_norm_sq;
    ASSERT_NEAR(power / (2.0 * rs * ch.h_norm_sq), h2_folded.values[j], 5e-3 * peak) << "f=" << f;
  }
}

TEST(PulsePhases, WindowTooSmallRejected) {
  const auto link = all_pass_override(metro8());
  const auto ch = white_equiv_channel(link, default_grid(link.rs));
  EXPECT_THROW(pulse_phases(ch, 2, 8, 1e-5), std::runtime_error);
  EXPECT_NO_THROW(pulse_phases(ch, 2, 64, 1e-5));
  EXPECT_THROW(pulse_phases(ch, 0), std::invalid_argument);
}

TEST(GridConvergence, PenaltyStableUnderRefinement) {
  auto link = metro8();
  for (auto& f : link.filters) std::get<ErfFilter>(f).b_ch = 50e9;
  const auto coarse = white_equiv_channel(link, default_grid(link.rs, 4, 18433));
  const auto fine = white_equiv_channel(link, default_grid(link.rs, 4, 36865));
  const double bound = snr_unfiltered(link.e_x_bar(), coarse.h_norm_sq, coarse.sigma_total_sq);
  const double k0 = k_mmse(coarse.q_folded, bound).k;
  const double k1 = k_mmse(fine.q_folded, bound).k;
  EXPECT_NEAR(k1, k0, 1e-4 * k0);
  // Zero-forcing is only well conditioned under mild filtering; at the
  // strongly filtered point its integrand is dominated by near-zeros.
  auto mild = metro8();
  const auto mc = white_equiv_channel(mild, default_grid(mild.rs, 4, 18433));
  const auto mf = white_equiv_channel(mild, default_grid(mild.rs, 4, 36865));
  const double z0 = k_zfe(mc.q_folded), z1 = k_zfe(mf.q_folded);
  EXPECT_NEAR(z1, z0, 1e-4 * z0);
}
