#include <doctest.h>

#include "cddm/errors.hpp"
#include "cddm/schedule.hpp"
#include "support.hpp"

using namespace cddm;

namespace {

// Independent evaluation of the linear schedule.
std::vector<double> reference_alpha_bar(int steps, double a1, double aT) {
  std::vector<double> out;
  long double prod = 1.0L;
  for (int t = 1; t <= steps; ++t) {
    const long double a = a1 + (aT - a1) * static_cast<long double>(t - 1) / (steps - 1);
    prod *= a;
    out.push_back(static_cast<double>(prod));
  }
  return out;
}

int brute_force_m(double target, const std::vector<double>& abar, int t_max) {
  int best = 1;
  for (int m = 1; m <= static_cast<int>(abar.size()); ++m) {
    const double r = (1.0 - abar[static_cast<std::size_t>(m - 1)]) / abar[static_cast<std::size_t>(m - 1)];
    const double rb = (1.0 - abar[static_cast<std::size_t>(best - 1)]) / abar[static_cast<std::size_t>(best - 1)];
    if (std::abs(target - r) < std::abs(target - rb)) best = m;
  }
  return std::min(best, t_max);
}

}  // namespace

TEST_SUITE("schedule") {

TEST_CASE("default schedule values") {
  const DiffusionSchedule s = default_schedule();
  CHECK(s.steps() == 1000);
  CHECK(s.t_max() == 93);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9999).epsilon(1e-15));
  CHECK(s.alpha(1) == 0.9999);
  CHECK(s.alpha(1000) == doctest::Approx(0.98).epsilon(1e-15));
  // linear in t: alpha_500 sits 499/999 of the way down
  CHECK(s.alpha(500) == doctest::Approx(0.9999 - 0.0199 * 499.0 / 999.0).epsilon(1e-14));
  CHECK(s.alpha(500) == doctest::Approx(0.98996).epsilon(1e-5));
}

TEST_CASE("alpha_bar is the cumulative product and strictly decreasing") {
  const DiffusionSchedule s = default_schedule();
  const auto ref = reference_alpha_bar(1000, 0.9999, 0.98);
  for (int t = 1; t <= 1000; ++t) {
    CHECK(s.alpha_bar(t) == doctest::Approx(ref[static_cast<std::size_t>(t - 1)]).epsilon(1e-12));
    if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(build_schedule(1000, 0.98, 0.9999, 93), ParameterError);
  CHECK_THROWS_AS(build_schedule(1, 0.9999, 0.98, 1), ParameterError);
  CHECK_THROWS_AS(build_schedule(1000, 1.0, 0.98, 93), ParameterError);
  CHECK_THROWS_AS(build_schedule(1000, 0.9999, 0.0, 93), ParameterError);
  CHECK_THROWS_AS(build_schedule(1000, 0.9999, 0.98, 0), ParameterError);
  CHECK_THROWS_AS(build_schedule(1000, 0.9999, 0.98, 1001), ParameterError);
  const DiffusionSchedule s = default_schedule();
  CHECK_THROWS(s.alpha_bar(0));
  CHECK_THROWS(s.alpha_bar(1001));
}

TEST_CASE("forward_diffuse") {
  const DiffusionSchedule s = default_schedule();
  const RealSignalBlock x0({0.4, -0.2, 0.1, 0.3});
  const std::vector<double> w{1.0, 0.5, 0.0, 2.0};
  const std::vector<double> zero(4, 0.0);
  const RealSignalBlock clean = forward_diffuse(x0, 40, w, zero, s);
  for (std::size_t i = 0; i < 4; ++i) CHECK(clean[i] == doctest::Approx(std::sqrt(s.alpha_bar(40)) * x0[i]));

  const std::vector<double> eps{1.0, -1.0, 3.0, 0.5};
  const RealSignalBlock noisy = forward_diffuse(x0, 40, w, eps, s);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(noisy[i] == doctest::Approx(std::sqrt(s.alpha_bar(40)) * x0[i] +
                                      std::sqrt(1.0 - s.alpha_bar(40)) * w[i] * eps[i]));
  }
  CHECK_THROWS_AS(forward_diffuse(x0, 40, w, std::vector<double>(3, 0.0), s), DimensionError);
  CHECK_THROWS(forward_diffuse(x0, 0, w, eps, s));
}

TEST_CASE("single steps compose to the closed form") {
  // x_t = sqrt(alpha_t) x_{t-1} + sqrt(1 - alpha_t) w eps_t keeps the signal factor at
  // sqrt(abar_t) and the noise variance at (1 - abar_t) w^2
  const DiffusionSchedule s = default_schedule();
  double signal = 1.0;
  double noise_var = 0.0;
  for (int t = 1; t <= 300; ++t) {
    signal *= std::sqrt(s.alpha(t));
    noise_var = s.alpha(t) * noise_var + (1.0 - s.alpha(t));
    CHECK(signal == doctest::Approx(std::sqrt(s.alpha_bar(t))).epsilon(1e-10));
    CHECK(noise_var == doctest::Approx(1.0 - s.alpha_bar(t)).epsilon(1e-10));
  }
}

TEST_CASE("step coefficients") {
  const DiffusionSchedule s = default_schedule();
  const StepCoefficients c1 = step_coefficients(1, s);
  CHECK(c1.gamma_prev == 0.0);
  CHECK(c1.gamma == doctest::Approx(std::sqrt(1e-4)));
  for (int t : {2, 10, 93, 500, 1000}) {
    const StepCoefficients c = step_coefficients(t, s);
    CHECK(c.gamma >= 0.0);
    CHECK(c.gamma == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t))));
    CHECK(c.beta == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t)) / std::sqrt(s.alpha(t))));
    CHECK(c.gamma_prev == doctest::Approx(std::sqrt(1.0 - s.alpha_bar(t - 1))));
    // beta_t > gamma_{t-1}: the f_tau denominator is negative
    CHECK(c.beta > c.gamma_prev);
  }
}

TEST_CASE("select_m matches a brute-force search") {
  const DiffusionSchedule capped = default_schedule();
  const DiffusionSchedule open = build_schedule(1000, 0.9999, 0.98, 1000);
  const auto abar = reference_alpha_bar(1000, 0.9999, 0.98);
  Stream rng(17);
  for (int i = 0; i < 300; ++i) {
    const double sigma = std::exp(-5.0 + 6.0 * rng.uniform());
    CAPTURE(sigma);
    CHECK(select_m(open, sigma, MatchMode::kl_zero) == brute_force_m(sigma * sigma, abar, 1000));
    CHECK(select_m(open, sigma, MatchMode::two_sigma_sq) == brute_force_m(2 * sigma * sigma, abar, 1000));
    CHECK(select_m(capped, sigma) == brute_force_m(sigma * sigma, abar, 93));
  }
}

TEST_CASE("select_m reference points") {
  const DiffusionSchedule open = build_schedule(1000, 0.9999, 0.98, 1000);
  // 20 dB: sigma^2 = 0.005
  CHECK(select_m(open, sigma_from_snr_db(20.0)) == 18);
  // 5 dB: sigma^2 = 0.158, beyond the default cap of 93
  CHECK(select_m(open, sigma_from_snr_db(5.0)) == 117);
  CHECK(select_m(open, sigma_from_snr_db(10.0)) == 66);
  CHECK(select_m(default_schedule(), sigma_from_snr_db(5.0)) == 93);
  CHECK(select_m(open, 0.0) == 1);
  CHECK(select_m(open, 1e6) == 1000);
  CHECK_THROWS_AS(select_m(open, -1.0), ParameterError);
}

TEST_CASE("select_m is monotone in sigma and literal mode never picks fewer steps") {
  const DiffusionSchedule open = build_schedule(1000, 0.9999, 0.98, 1000);
  int prev = 0;
  for (double sigma = 0.001; sigma < 3.0; sigma *= 1.05) {
    const int m = select_m(open, sigma);
    CHECK(m >= prev);
    CHECK(select_m(open, sigma, MatchMode::two_sigma_sq) >= m);
    prev = m;
  }
}

TEST_CASE("selected step is at least as close as its neighbours") {
  const DiffusionSchedule open = build_schedule(1000, 0.9999, 0.98, 1000);
  for (double snr : {-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0}) {
    const double s2 = std::pow(sigma_from_snr_db(snr), 2);
    const int m = select_m(open, std::sqrt(s2));
    const double gap = std::abs(open.noise_ratio(m) - s2);
    if (m > 1) CHECK(gap <= std::abs(open.noise_ratio(m - 1) - s2));
    if (m < 1000) CHECK(gap <= std::abs(open.noise_ratio(m + 1) - s2));
  }
}

TEST_CASE("match mode strings") {
  CHECK(parse_match_mode("kl-zero") == MatchMode::kl_zero);
  CHECK(parse_match_mode("two-sigma-sq") == MatchMode::two_sigma_sq);
  CHECK(std::string(to_string(MatchMode::two_sigma_sq)) == "two-sigma-sq");
  CHECK_THROWS(parse_match_mode("eq20"));
}

}
