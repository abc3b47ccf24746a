#include "pcho/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace pcho {

double cellular_pathloss_gain(double distance_m, double scale_k, double exponent) {
  return scale_k * std::pow(std::max(distance_m, kCellularMinDistanceM), -exponent);
}

double wifi_pathloss_db(double distance_m, const ApConfig& cfg) {
  const double d = std::max(distance_m, cfg.ref_distance_m);
  double pl = cfg.ref_pathloss_db + 10.0 * cfg.indoor_exponent * std::log10(d / cfg.ref_distance_m);
  for (double loss : cfg.obstacle_losses_db) pl += loss;
  return pl;
}

FadingSample draw_rician(double k_factor_db, Rng& rng) {
  const double kappa = db_to_linear(k_factor_db);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double re = gauss(rng);
  const double im = gauss(rng);
  const std::complex<double> z(re / std::sqrt(2.0), im / std::sqrt(2.0));
  const double los = std::sqrt(kappa / (kappa + 1.0));
  const double scatter = std::sqrt(1.0 / (kappa + 1.0));
  return {los + scatter * z};
}

double cellular_sinr(const LinkBudget& serving, std::span<const LinkBudget> interferers, const NoiseModel& noise) {
  double interference = 0.0;
  for (const auto& i : interferers) interference += i.rx_power_w;
  return serving.rx_power_w / (interference + noise.power_w());
}

double wifi_snr(const LinkBudget& serving, const NoiseModel& noise) { return serving.rx_power_w / noise.power_w(); }

double rssi_dbm(double rx_power_w) {
  if (!(rx_power_w > 0.0)) return kRssiFloorDbm;
  return std::max(10.0 * std::log10(rx_power_w / 1e-3), kRssiFloorDbm);
}

double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

double linear_to_db(double ratio) { return 10.0 * std::log10(ratio); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace pcho
