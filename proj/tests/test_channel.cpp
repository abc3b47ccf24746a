#include <doctest.h>

#include <cmath>
#include <vector>

#include "pcho/channel.hpp"

using namespace pcho;

namespace {

bool rel_close(double a, double b, double tol = 1e-9) {
  return std::abs(a - b) <= tol * std::max(std::abs(b), 1e-300);
}

ApConfig ap(double pl0, double d0, double gamma, std::vector<double> losses) {
  ApConfig a;
  a.ref_pathloss_db = pl0;
  a.ref_distance_m = d0;
  a.indoor_exponent = gamma;
  a.obstacle_losses_db = std::move(losses);
  return a;
}

}  // namespace

TEST_CASE("cellular path loss") {
  CHECK(cellular_pathloss_gain(1.0, 1.0, 2.0) == 1.0);
  CHECK(rel_close(cellular_pathloss_gain(100.0, 1e-3, 3.5), 1e-10));
  CHECK(cellular_pathloss_gain(0.5, 1.0, 2.0) == cellular_pathloss_gain(1.0, 1.0, 2.0));
  CHECK(cellular_pathloss_gain(0.0, 1.0, 2.0) == 1.0);
  double prev = cellular_pathloss_gain(1.0, 2.0, 3.5);
  for (double d = 1.5; d < 1000.0; d *= 1.3) {
    const double g = cellular_pathloss_gain(d, 2.0, 3.5);
    CHECK(g < prev);
    prev = g;
  }
}

TEST_CASE("wifi path loss") {
  CHECK(wifi_pathloss_db(1.0, ap(40.05, 1.0, 3.0, {})) == doctest::Approx(40.05).epsilon(1e-12));
  CHECK(rel_close(wifi_pathloss_db(10.0, ap(40.0, 1.0, 3.0, {5.0})), 75.0));
  CHECK(wifi_pathloss_db(0.5, ap(40.05, 1.0, 3.0, {})) == doctest::Approx(40.05).epsilon(1e-12));
  CHECK(rel_close(wifi_pathloss_db(25.0, ap(40.05, 1.0, 3.0, {5.0})), 86.98820026016114));
  CHECK(rel_close(wifi_pathloss_db(7.3, ap(40.05, 1.0, 3.0, {5.0, 3.5})), 74.44968580361368));
  CHECK(rel_close(wifi_pathloss_db(8.0, ap(46.0, 2.0, 2.0, {})), 58.04119982655925));
  double prev = wifi_pathloss_db(1.0, ap(40.0, 1.0, 3.0, {}));
  for (double d = 1.2; d < 500.0; d *= 1.2) {
    const double pl = wifi_pathloss_db(d, ap(40.0, 1.0, 3.0, {}));
    CHECK(pl > prev);
    prev = pl;
  }
}

TEST_CASE("cellular sinr") {
  const NoiseModel n12{1e-12 / 1e6, 1e6};
  CHECK(rel_close(cellular_sinr(LinkBudget{1e-9, 1, 1}, {}, n12), 1000.0));
  const std::vector<LinkBudget> same{LinkBudget{1e-6, 1, 1}};
  CHECK(cellular_sinr(LinkBudget{1e-6, 1, 1}, same, NoiseModel{1e-30, 1.0}) == doctest::Approx(1.0));
  CHECK(cellular_sinr(LinkBudget{0.0, 1, 1}, same, n12) == 0.0);
  const std::vector<LinkBudget> two{LinkBudget{5e-10, 1, 1}, LinkBudget{5e-10, 1, 1}};
  CHECK(rel_close(cellular_sinr(LinkBudget{2e-9, 1, 1}, two, n12), 1.9980019980019978));
  const std::vector<LinkBudget> three{LinkBudget{1e-10, 1, 1}, LinkBudget{2e-10, 1, 1}, LinkBudget{3e-10, 1, 1}};
  CHECK(rel_close(cellular_sinr(LinkBudget{3e-10, 1, 1}, three, NoiseModel{4e-12 / 2e7, 2e7}), 0.49668874172185434));
  const NoiseModel thermal{std::pow(10.0, -17.4) * 1e-3, 2e7};
  CHECK(rel_close(thermal.power_w(), 7.96214341106997e-14));
  CHECK(rel_close(cellular_sinr(LinkBudget{1e-11, 1, 1}, {}, thermal), 125.5943215754786));
  const std::vector<LinkBudget> one{LinkBudget{2e-12, 1, 1}};
  CHECK(rel_close(cellular_sinr(LinkBudget{1e-11, 1, 1}, one, thermal), 4.808567480588725));
}

TEST_CASE("adding an interferer never raises sinr") {
  Rng rng(3);
  std::uniform_real_distribution<double> u(1e-13, 1e-8);
  for (int trial = 0; trial < 200; ++trial) {
    const LinkBudget s{u(rng), 1, 1};
    std::vector<LinkBudget> inter;
    const NoiseModel n{1e-20, 2e7};
    double prev = cellular_sinr(s, inter, n);
    for (int i = 0; i < 4; ++i) {
      inter.push_back({u(rng), 1, 1});
      const double v = cellular_sinr(s, inter, n);
      CHECK(v <= prev);
      prev = v;
    }
  }
}

TEST_CASE("wifi snr") {
  CHECK(rel_close(wifi_snr(LinkBudget{1e-10, 1, 1}, NoiseModel{1e-13 / 1e6, 1e6}), 1000.0));
  CHECK(wifi_snr(LinkBudget{0.0, 1, 1}, NoiseModel{1e-20, 1e6}) == 0.0);
  const NoiseModel a{1e-20, 1e6};
  const NoiseModel b{1e-20, 2e6};
  CHECK(rel_close(wifi_snr(LinkBudget{1e-10, 1, 1}, b), 0.5 * wifi_snr(LinkBudget{1e-10, 1, 1}, a)));
  const double n0 = std::pow(10.0, -17.4) * 1e-3;
  CHECK(rel_close(wifi_snr(LinkBudget{1e-10, 1, 1}, NoiseModel{n0, 2e7}), 1255.943215754786));
  CHECK(rel_close(wifi_snr(LinkBudget{1e-10, 1, 1}, NoiseModel{n0, 4e7}), 627.971607877393));
}

TEST_CASE("link budget composition") {
  const auto lb = LinkBudget::make(10.0, 1e-9, 0.7);
  CHECK(lb.rx_power_w == 10.0 * 1e-9 * 0.7);
  CHECK(lb.pathloss_gain == 1e-9);
  CHECK(lb.fading_power == 0.7);
}

TEST_CASE("rssi conversions") {
  CHECK(rssi_dbm(1e-3) == doctest::Approx(0.0));
  CHECK(rssi_dbm(1.0) == doctest::Approx(30.0));
  CHECK(rel_close(rssi_dbm(1e-10), -70.0));
  CHECK(rel_close(rssi_dbm(2.5e-7), -36.020599913279625));
  CHECK(rel_close(rssi_dbm(1.23e-12), -89.10094888560602));
  CHECK(rssi_dbm(0.0) == kRssiFloorDbm);
  for (double dbm = -150.0; dbm <= 50.0; dbm += 7.3) CHECK(std::abs(rssi_dbm(dbm_to_watts(dbm)) - dbm) < 1e-9);
  CHECK(linear_to_db(100.0) == doctest::Approx(20.0));
  CHECK(db_to_linear(-30.0) == doctest::Approx(1e-3));
}

TEST_CASE("rician normalization") {
  for (double k_db : {0.0, 3.0, 6.0, 10.0, 20.0}) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(k_db * 10)}));
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += draw_rician(k_db, rng).power();
    const double mean = sum / 1e5;
    CHECK(mean > 0.98);
    CHECK(mean < 1.02);
  }
}

TEST_CASE("rician limits and determinism") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    CHECK(std::abs(draw_rician(120.0, rng).power() - 1.0) < 1e-5);
    CHECK(std::abs(draw_rician(160.0, rng).power() - 1.0) < 1e-6);
  }
  Rng a(17), b(17);
  for (int i = 0; i < 50; ++i) CHECK(draw_rician(6.0, a).coefficient == draw_rician(6.0, b).coefficient);
  // LoS component mean: E[h] = sqrt(k/(k+1)).
  Rng c(23);
  std::complex<double> acc{0.0, 0.0};
  for (int i = 0; i < 100000; ++i) acc += draw_rician(6.0, c).coefficient;
  const double k = std::pow(10.0, 0.6);
  CHECK(std::abs(acc.real() / 1e5 - std::sqrt(k / (k + 1.0))) < 0.01);
  CHECK(std::abs(acc.imag() / 1e5) < 0.01);
}
