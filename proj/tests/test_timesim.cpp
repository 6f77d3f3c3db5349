#include "filtpen/timesim.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include "filtpen/equalizers.hpp"
#include "filtpen/units.hpp"
#include "test_util.hpp"

using namespace filtpen;
using namespace filtpen::test;

namespace {

LinkSpec noiseless_link() {
  auto link = simple_link(63.1e9, 0.15, {}, {0.0});
  link.trx.n_sat = std::numeric_limits<double>::infinity();
  return link;
}

SimConfig quick_cfg(std::uint64_t seed = 1, int taps = 32, std::size_t n = 50000) {
  SimConfig cfg;
  cfg.n_symbols = n;
  cfg.taps = taps;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST(EstimateSnr, IdenticalSequencesHitTheCap) {
  std::vector<std::complex<double>> x(5000);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (auto& v : x) v = {g(rng), g(rng)};
  const auto est = estimate_snr(x, x, 16);
  EXPECT_DOUBLE_EQ(est.snr_db, 60.0);
  EXPECT_EQ(est.delay, 0);
}

TEST(EstimateSnr, KnownNoiseLevelRecovered) {
  const std::size_t n = 100000;
  std::vector<std::complex<double>> x(n), z(n);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5));
  const double noise_amp = 0.1;  // complex noise 20 dB below unit symbol energy
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = {g(rng), g(rng)};
    z[i] = x[i] + noise_amp * std::complex<double>(g(rng), g(rng));
  }
  const auto est = estimate_snr(z, x, 8);
  EXPECT_NEAR(est.snr_db, 20.0, 0.1);
}

TEST(EstimateSnr, RecoversIntegerDelay) {
  const std::size_t n = 20000;
  std::vector<std::complex<double>> x(n), z(n, 0.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (auto& v : x) v = {g(rng), g(rng)};
  for (std::size_t i = 7; i < n; ++i) z[i] = x[i - 7];
  const auto est = estimate_snr(z, x, 16);
  EXPECT_EQ(est.delay, 7);
}

TEST(EstimateSnr, UncorrelatedSequencesFailAlignment) {
  std::vector<std::complex<double>> x(10000), z(10000);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (auto& v : x) v = {g(rng), g(rng)};
  for (auto& v : z) v = {g(rng), g(rng)};
  EXPECT_THROW(estimate_snr(z, x, 8), std::runtime_error);
}

TEST(LmsEqualize, IdentityChannelKeepsSpikeTaps) {
  const std::size_t K = 20000;
  const int sps = 2;
  SimConfig cfg = quick_cfg(5, 15, K);
  cfg.sps = sps;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pick(0, 3);
  std::vector<std::complex<double>> x(K);
  std::vector<std::complex<double>> rx(K * sps, 0.0);
  const double lv[4] = {-3.0 / std::sqrt(10.0), -1.0 / std::sqrt(10.0), 1.0 / std::sqrt(10.0),
                        3.0 / std::sqrt(10.0)};
  for (std::size_t k = 0; k < K; ++k) {
    x[k] = {lv[pick(rng)], lv[pick(rng)]};
    rx[k * sps] = x[k];
  }
  const auto out = lms_equalize(rx, x, cfg);
  EXPECT_FALSE(out.diverged);
  double norm = 0.0, peak = 0.0;
  for (const auto& w : out.taps) {
    norm += std::norm(w);
    peak = std::max(peak, std::norm(w));
  }
  EXPECT_GT(peak / norm, 0.99);
  EXPECT_LT(out.mse_final, 1e-6);
}

TEST(LmsEqualize, TwoTapIsiChannelReachesZeroForcingFloor) {
  // y_k = x_k + 0.3 x_{k-1} at one sample per symbol; the truncated
  // geometric series w_n = (-0.3)^n is the direct zero-forcing solution.
  const std::size_t K = 60000;
  SimConfig cfg = quick_cfg(6, 12, K);
  cfg.sps = 1;
  cfg.mu = 2e-3;
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> pick(0, 3);
  const double lv[4] = {-3.0 / std::sqrt(10.0), -1.0 / std::sqrt(10.0), 1.0 / std::sqrt(10.0),
                        3.0 / std::sqrt(10.0)};
  std::vector<std::complex<double>> x(K), rx(K);
  for (std::size_t k = 0; k < K; ++k) x[k] = {lv[pick(rng)], lv[pick(rng)]};
  for (std::size_t k = 0; k < K; ++k) rx[k] = x[k] + 0.3 * x[(k + K - 1) % K];
  const auto out = lms_equalize(rx, x, cfg);
  EXPECT_FALSE(out.diverged);

  // Zero-forcing oracle residual with the same FIR length and circular data.
  std::vector<double> w_zf(static_cast<std::size_t>(cfg.taps), 0.0);
  for (int n = 0; n < cfg.taps; ++n) w_zf[static_cast<std::size_t>(n)] = std::pow(-0.3, n);
  double zf_mse = 0.0, ex = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    std::complex<double> z = 0.0;
    for (int n = 0; n < cfg.taps; ++n) z += w_zf[static_cast<std::size_t>(n)] * rx[(k + K - n) % K];
    zf_mse += std::norm(z - x[k]) / static_cast<double>(K);
    ex += std::norm(x[k]) / static_cast<double>(K);
  }
  EXPECT_LT(out.mse_final / ex, 1e-3);             // residual ISI below -30 dB
  EXPECT_LT(zf_mse / ex, 1e-3);                    // oracle agrees the floor exists
  EXPECT_LT(out.mse_final, 4.0 * (zf_mse + 1e-9) + 1e-4 * ex);
}

TEST(LmsEqualize, OversizedStepDiverges) {
  auto link = metro8();
  for (auto& f : link.filters) std::get<ErfFilter>(f).b_ch = 50e9;
  SimConfig cfg = quick_cfg(7, 32, 20000);
  cfg.mu = 0.5;
  const auto res = run_simulation(link, cfg);
  EXPECT_TRUE(res.diverged);
  EXPECT_FALSE(res.converged);
}

TEST(RunSimulation, NoiselessIdentityIsErrorFree) {
  // Error-free decisions; the residual MSE is the truncation floor of the
  // finite matched-filter span, so it keeps dropping as taps grow.
  const auto short_fir = run_simulation(noiseless_link(), quick_cfg(8, 16, 20000));
  EXPECT_FALSE(short_fir.diverged);
  EXPECT_TRUE(short_fir.converged);
  EXPECT_DOUBLE_EQ(short_fir.ber, 0.0);
  EXPECT_GE(short_fir.snr_db, 35.0);
  const auto long_fir = run_simulation(noiseless_link(), quick_cfg(8, 96, 20000));
  EXPECT_DOUBLE_EQ(long_fir.ber, 0.0);
  EXPECT_GE(long_fir.snr_db, 45.0);
  EXPECT_GE(long_fir.snr_db, short_fir.snr_db);
}

TEST(RunSimulation, AwgnCalibrationAtFifteenDb) {
  const auto link = rx_noise_link(63.1e9, 0.15, {}, 15.0);
  SimConfig cfg = quick_cfg(9, 32, 100000);
  const auto res = run_simulation(link, cfg);
  EXPECT_TRUE(res.converged);
  EXPECT_NEAR(res.snr_db, 15.0, 0.1);
}

TEST(RunSimulation, SameSeedBitIdentical) {
  auto link = metro8();
  const auto a = run_simulation(link, quick_cfg(42, 16, 20000));
  const auto b = run_simulation(link, quick_cfg(42, 16, 20000));
  EXPECT_EQ(a.snr_db, b.snr_db);
  EXPECT_EQ(a.ber, b.ber);
  ASSERT_EQ(a.taps.size(), b.taps.size());
  for (std::size_t i = 0; i < a.taps.size(); ++i) EXPECT_EQ(a.taps[i], b.taps[i]);
  const auto c = run_simulation(link, quick_cfg(43, 16, 20000));
  EXPECT_NE(a.snr_db, c.snr_db);
}

TEST(RunSimulation, NarrowerFiltersNeverHelp) {
  auto link = metro8();
  double prev = 1e9;
  for (double bw : {75.0, 62.5, 50.0}) {
    for (auto& f : link.filters) std::get<ErfFilter>(f).b_ch = ghz_to_hz(bw);
    const auto res = run_simulation(link, quick_cfg(10, 32, 50000));
    EXPECT_LE(res.snr_db, prev + 0.1) << "bw=" << bw;
    prev = res.snr_db;
  }
}

TEST(RunSimulation, MoreTapsNeverHurt) {
  auto link = metro8();
  for (auto& f : link.filters) std::get<ErfFilter>(f).b_ch = 62.5e9;
  double prev = -1e9;
  for (int taps : {8, 16, 32}) {
    const auto res = run_simulation(link, quick_cfg(11, taps, 50000));
    EXPECT_GE(res.snr_db, prev - 0.1) << "taps=" << taps;
    prev = res.snr_db;
  }
}

TEST(RunSimulation, AllPassAsymptoteMatchesCombinedSnr) {
  const auto link = all_pass_override(metro8());
  const auto res = run_simulation(link, quick_cfg(12, 32, 100000));
  const double expect = lin_to_db(combine_snr({snr_ase(link), link.snr_trx_lin()}));
  EXPECT_NEAR(res.snr_db, expect, 0.15);
}

TEST(RunSimulation, DecisionDirectedModeHoldsAtHighSnr) {
  // At the all-pass operating point decisions are almost always right,
  // so sliced-feedback adaptation stays close to the data-aided run.
  const auto link = all_pass_override(metro8());
  auto cfg = quick_cfg(14, 32, 50000);
  const auto aided = run_simulation(link, cfg);
  cfg.decision_directed = true;
  const auto dd = run_simulation(link, cfg);
  EXPECT_NEAR(dd.snr_db, aided.snr_db, 0.1);
}

TEST(RunSimulation, TracksFiniteLengthModel) {
  auto link = metro8();
  for (auto& f : link.filters) std::get<ErfFilter>(f).b_ch = 62.5e9;
  const auto grid = default_grid(link.rs);
  const auto ch = white_equiv_channel(link, grid);
  const auto pp = pulse_phases(ch, 2);
  const auto fle = fle_mmse(make_fle_problem(ch, pp, 32, link.e_x_bar()));
  const auto res = run_simulation(link, quick_cfg(13, 64, 100000));
  EXPECT_NEAR(res.snr_db, lin_to_db(fle.snr_unbiased), 0.3);
}
