#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "fabtip/characterization.hpp"
#include "fabtip/errors.hpp"

using namespace fabtip;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> tone(double amp, double f, double fs, int n, double phase = 0.0, double dc = 0.0) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = dc + amp * std::sin(2 * kPi * f * i / fs + phase);
  return x;
}

double first_order_gain(double f, double tau) { return 1.0 / std::sqrt(1.0 + std::pow(2 * kPi * f * tau, 2)); }

}  // namespace

TEST_CASE("sweep frequencies") {
  auto f = sweep_frequencies({});
  REQUIRE(f.size() == 30);
  CHECK(f.front() == 1.0);
  CHECK(f.back() == 100.0);
  const double ratio = f[1] / f[0];
  for (std::size_t i = 1; i < f.size(); ++i) CHECK(std::abs(f[i] / f[i - 1] - ratio) < 1e-9);
  SweepPlan two;
  two.points = 2;
  CHECK(sweep_frequencies(two) == std::vector<double>{1.0, 100.0});
  SweepPlan bad;
  bad.fmin = 10;
  bad.fmax = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.cycles = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("lock-in amplitude") {
  for (double phase : {0.0, 0.3, 1.7, 3.0, -2.2}) {
    auto x = tone(2.0, 10.0, 1000.0, 1000, phase);
    CHECK(lockin_amplitude(x, 10.0, 1000.0) == doctest::Approx(2.0).epsilon(1e-9));
  }
  auto dc = tone(2.0, 10.0, 1000.0, 1000, 0.4, 5.0);
  CHECK(lockin_amplitude(dc, 10.0, 1000.0) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS_AS(lockin_amplitude(tone(1.0, 10.0, 1000.0, 1050), 10.0, 1000.0), DomainError);
  CHECK_THROWS_AS(lockin_amplitude(tone(1.0, 10.0, 15.0, 30), 10.0, 15.0), DomainError);

  // 20 dB SNR: noise power 1% of the signal power 0.5.
  const double sigma = std::sqrt(0.005);
  double mean = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    auto x = tone(1.0, 10.0, 1000.0, 1000, 0.1 * seed);
    for (auto& v : x) v += noise(rng);
    mean += lockin_amplitude(x, 10.0, 1000.0) / 100.0;
  }
  CHECK(std::abs(mean - 1.0) < 0.01);
}

TEST_CASE("bode and the -3 dB point") {
  std::vector<double> f{1, 2, 4, 8};
  auto flat = bode(f, std::vector<double>{3, 3, 3, 3});
  for (double g : flat.gains_db) CHECK(g == doctest::Approx(0.0));
  CHECK_FALSE(flat.bandwidth);

  auto half = bode(std::vector<double>{1, 2}, std::vector<double>{2, 1});
  CHECK(half.gains_db[0] == 0.0);
  CHECK(half.gains_db[1] == doctest::Approx(-6.0206).epsilon(1e-4));
  CHECK_THROWS_AS(bode(std::vector<double>{1, 2}, std::vector<double>{0, 1}), DomainError);

  auto at = minus3db(std::vector<double>{1, 5, 10}, std::vector<double>{0, -2, -4});
  REQUIRE(at);
  CHECK(std::abs(*at - 7.0711) < 0.01);
  CHECK_FALSE(minus3db(std::vector<double>{1, 5, 10}, std::vector<double>{0, -1, -2.9}));
  auto exact = minus3db(std::vector<double>{1, 5, 10}, std::vector<double>{0, -3, -5});
  REQUIRE(exact);
  CHECK(*exact == doctest::Approx(5.0));

  const double tau = 0.020, target = 1.0 / (2 * kPi * tau);
  auto error_for = [&](int n) {
    SweepPlan plan;
    plan.points = n;
    auto freqs = sweep_frequencies(plan);
    std::vector<double> amps;
    for (double x : freqs) amps.push_back(first_order_gain(x, tau));
    auto b = bode(freqs, amps);
    REQUIRE(b.bandwidth);
    return std::abs(*b.bandwidth - target);
  };
  CHECK(error_for(30) < 0.02 * target);
  CHECK(error_for(300) < 0.02 * target);

  // Refining the grid converges on the crossing of the 1 Hz-normalised curve,
  // which sits 1.3% above 1/(2 pi tau).
  const double w1 = 2 * kPi * tau;
  const double normalised = std::sqrt((1 + w1 * w1) * std::pow(10.0, 0.3) - 1) / w1;
  auto normalised_error = [&](int n) {
    SweepPlan plan;
    plan.points = n;
    auto freqs = sweep_frequencies(plan);
    std::vector<double> amps;
    for (double x : freqs) amps.push_back(first_order_gain(x, tau));
    return std::abs(*bode(freqs, amps).bandwidth - normalised);
  };
  CHECK(normalised_error(300) < normalised_error(30));
  CHECK(normalised_error(3000) < 1e-4 * normalised);
}

TEST_CASE("step metrics") {
  auto run = [](double tau_up, double tau_down, double fs) {
    std::vector<double> t, y;
    const double on = 0.1, off = 3.1;
    for (int i = 0; i <= static_cast<int>(3.6 * fs); ++i) {
      const double ti = i / fs;
      double v = 0.0;
      if (ti >= on && ti < off) v = 1.0 - std::exp(-(ti - on) / tau_up);
      if (ti >= off) v = (1.0 - std::exp(-(off - on) / tau_up)) * std::exp(-(ti - off) / tau_down);
      t.push_back(ti);
      y.push_back(v);
    }
    return step_metrics(t, y, on, off);
  };
  auto m = run(0.02913, 0.00501, 1000.0);
  CHECK(std::abs(m.rise - 0.064) < 0.5e-3);
  CHECK(std::abs(m.fall - 0.011) < 0.5e-3);
  auto fine = run(0.02913, 0.00501, 10000.0);
  CHECK(std::abs(fine.rise - m.rise) < 1e-3);
  CHECK(std::abs(fine.fall - m.fall) < 1e-3);

  auto instant = run(1e-9, 1e-9, 1000.0);
  CHECK(instant.rise <= 1e-3);
  CHECK(instant.fall <= 1e-3);

  std::vector<double> t{0, 1, 2, 3}, flat{0, 0, 0, 0};
  CHECK_THROWS_AS(step_metrics(t, flat, 0.5, 2.5), AnalysisError);
}

TEST_CASE("emulated step and sweep") {
  BenchSetup setup;
  auto s = run_step(setup);
  CHECK(std::abs(s.metrics.rise - 0.064) < 2e-3);
  CHECK(std::abs(s.metrics.fall - 0.011) < 2e-3);
  CHECK(s.metrics.steady == doctest::Approx(blocked_force(setup.supply, setup.height, setup.geometry)).epsilon(1e-3));

  SweepPlan plan;
  auto sweep = run_sweep(plan, setup);
  REQUIRE(sweep.bode.bandwidth);
  CHECK(*sweep.bode.bandwidth >= 5.0);
  CHECK(*sweep.bode.bandwidth <= 9.0);
  CHECK(sweep.bode.gains_db[0] == 0.0);

  setup.dynamics = DynamicsParams::bench_calibrated();
  auto bench = run_sweep(plan, setup);
  REQUIRE(bench.bode.bandwidth);
  CHECK(std::abs(*bench.bode.bandwidth - 7.1) <= 0.7);
}

TEST_CASE("durability") {
  BenchSetup setup;
  DurabilityPlan plan;
  plan.cycles = 50;
  auto clean = durability_run(plan, setup);
  CHECK(clean.peak_force.size() == 50);
  CHECK(clean.max_drift == 0.0);
  CHECK(clean.peak_pressure[10] == doctest::Approx(60e3).epsilon(0.01));

  plan.cycles = 1000;
  auto worn = durability_run(plan, setup, [](int cycle) { return std::pow(0.999, (cycle - 1) / 100.0); });
  CHECK(std::abs(worn.final_drift - 0.01) <= 0.0005);

  plan.cycles = 1;
  CHECK_THROWS_AS(durability_run(plan, setup), AnalysisError);
  CHECK_THROWS_AS(durability_from_peaks({1.0}, {1.0}), AnalysisError);
}

TEST_CASE("lab recordings") {
  auto dir = std::filesystem::temp_directory_path() / "fabtip_char_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "step.csv");
    out << "time_s,force_n\n";
    for (int i = 0; i <= 3600; ++i) {
      const double t = i / 1000.0;
      double v = 0.0;
      if (t >= 0.1 && t < 3.1) v = 10.0 * (1.0 - std::exp(-(t - 0.1) / 0.02913));
      if (t >= 3.1) v = 10.0 * std::exp(-(t - 3.1) / 0.00501);
      out << t << ',' << v << '\n';
    }
    std::ofstream tone_out(dir / "tone.csv");
    tone_out << "time_s,force_n,pressure_pa\n";
    for (int i = 0; i < 2000; ++i) tone_out << i / 1000.0 << ',' << 1.0 + 0.5 * std::sin(2 * kPi * 5 * i / 1000.0) << ",0\n";
    std::ofstream gaps(dir / "gaps.csv");
    gaps << "time_s,force_n\n0,0\n0.001,0\n0.003,0\n0.004,0\n";
  }
  auto step = LabRecording::from_csv(dir / "step.csv");
  CHECK(step.sample_rate == doctest::Approx(1000.0));
  auto m = step_metrics_from_recording(step);
  CHECK(std::abs(m.rise - 0.064) < 1e-3);
  CHECK(std::abs(m.fall - 0.011) < 1e-3);

  auto tone_rec = LabRecording::from_csv(dir / "tone.csv");
  CHECK(tone_rec.pressure.size() == 2000);
  CHECK(recording_amplitude(tone_rec, 5.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(recording_amplitude(tone_rec, 5.0, 4) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK_THROWS_AS(recording_amplitude(tone_rec, 5.0, 50), AnalysisError);
  auto dur = durability_from_recording(tone_rec, 0.2);
  CHECK(dur.peak_force.size() == 10);
  CHECK(dur.max_drift < 1e-9);

  CHECK_THROWS_AS(LabRecording::from_csv(dir / "gaps.csv"), ValidationError);
  CHECK_THROWS_AS(LabRecording::from_csv(dir / "missing.csv"), IoError);
  std::filesystem::remove_all(dir);
}
