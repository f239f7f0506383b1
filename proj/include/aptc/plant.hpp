#pragma once

// Simulated thermal plants used for pre-training and desk-scale training.
//
// The logarithmic plant evaluates T(x) = T_init + (2 + S/8) ln(2x), where S is
// the raw power sum over all CPUs (off=0, low=1, high=2). When S changes the
// virtual time is re-parameterized so the temperature stays continuous.
//
// The cooling plant is a first-order Newton-cooling model integrated with
// forward Euler; unlike the log plant it can hold a temperature indefinitely.

#include <cstdint>

namespace aptc::plant {

inline constexpr double kDefaultInitialTemperature = 46.0;
inline constexpr double kLogPlantOrigin = 0.5;
inline constexpr double kDefaultLogStep = 0.01;

/// Coefficient of ln(2x) for raw power sum S.
constexpr double log_coefficient(int raw_power) { return 2.0 + raw_power / 8.0; }

/// T_init + (2 + S/8) ln(2x). Throws DomainError for x < 0.5 or S < 0.
double log_temperature(double t_init, int raw_power, double x);

/// Virtual time x' at which the S_new curve passes through `temperature`.
/// Throws DomainError when temperature < t_init.
double reparameterize_time(double temperature, double t_init, int new_raw_power);

struct PlantState {
  double temperature = kDefaultInitialTemperature;
  double virtual_time = kLogPlantOrigin;
  double t_init = kDefaultInitialTemperature;
  int raw_power = 0;

  static PlantState at_origin(double t_init, int raw_power = 0);
};

/// Advance the log plant by dx at power S, re-parameterizing first if S changed.
/// `dx` must be > 0 (dx == 0 is accepted and performs only the switch).
PlantState log_plant_step(const PlantState& state, int raw_power, double dx);

struct CoolingParams {
  double t_ambient = 40.0;
  double alpha = 0.02;  // degC / s per unit S
  double beta = 0.01;   // 1 / s
  double dt = 5.0;      // s per step

  void validate() const;
  double equilibrium(int raw_power) const { return t_ambient + alpha * raw_power / beta; }
};

/// T' = T + dt (alpha S - beta (T - t_ambient)).
double cooling_plant_step(double temperature, int raw_power, const CoolingParams& params);

}  // namespace aptc::plant
