#pragma once

#include <complex>
#include <span>

#include "pcho/rng.hpp"
#include "pcho/topology.hpp"

namespace pcho {

// Small-scale fading coefficient, normalized so that E[|h|^2] = 1.
struct FadingSample {
  std::complex<double> coefficient{1.0, 0.0};
  double power() const { return std::norm(coefficient); }
};

struct LinkBudget {
  double rx_power_w = 0.0;
  double pathloss_gain = 0.0;
  double fading_power = 1.0;

  // rx_power = tx_power * pathloss_gain * fading_power
  static LinkBudget make(double tx_power_w, double pathloss_gain, double fading_power = 1.0) {
    return {tx_power_w * pathloss_gain * fading_power, pathloss_gain, fading_power};
  }
};

struct NoiseModel {
  double spectral_density_w_per_hz = 0.0;
  double bandwidth_hz = 0.0;
  double power_w() const { return spectral_density_w_per_hz * bandwidth_hz; }
};

inline constexpr double kCellularMinDistanceM = 1.0;

// G(d) = K * max(d, 1 m)^-alpha
double cellular_pathloss_gain(double distance_m, double scale_k, double exponent);

// PL(d0) + 10 gamma log10(max(d, d0) / d0) + sum of obstacle losses, in dB.
double wifi_pathloss_db(double distance_m, const ApConfig& cfg);

// h = sqrt(k/(k+1)) + sqrt(1/(k+1)) z, z ~ CN(0, 1), k the linear K-factor.
FadingSample draw_rician(double k_factor_db, Rng& rng);

// Linear SINR: serving / (sum of interferers + N0 B).
double cellular_sinr(const LinkBudget& serving, std::span<const LinkBudget> interferers, const NoiseModel& noise);

// Linear SNR of a deterministic WiFi link.
double wifi_snr(const LinkBudget& serving, const NoiseModel& noise);

inline constexpr double kRssiFloorDbm = -200.0;

// 10 log10(P / 1 mW); kRssiFloorDbm for P = 0.
double rssi_dbm(double rx_power_w);
double dbm_to_watts(double dbm);

double linear_to_db(double ratio);
double db_to_linear(double db);

}  // namespace pcho
