#include "aptc/plant.hpp"

#include <cmath>
#include <string>

#include "aptc/errors.hpp"

namespace aptc::plant {

double log_temperature(double t_init, int raw_power, double x) {
  if (!(x >= kLogPlantOrigin)) {
    throw DomainError("log_temperature: virtual time " + std::to_string(x) + " below 0.5");
  }
  if (raw_power < 0) throw DomainError("log_temperature: negative raw power");
  return t_init + log_coefficient(raw_power) * std::log(2.0 * x);
}

double reparameterize_time(double temperature, double t_init, int new_raw_power) {
  if (!(temperature >= t_init)) {
    throw DomainError("reparameterize_time: temperature below t_init");
  }
  if (new_raw_power < 0) throw DomainError("reparameterize_time: negative raw power");
  return std::exp((temperature - t_init) / log_coefficient(new_raw_power)) / 2.0;
}

PlantState PlantState::at_origin(double t_init, int raw_power) {
  return PlantState{t_init, kLogPlantOrigin, t_init, raw_power};
}

PlantState log_plant_step(const PlantState& state, int raw_power, double dx) {
  if (!(dx >= 0.0)) throw DomainError("log_plant_step: dx must be non-negative");
  PlantState next = state;
  if (raw_power != state.raw_power) {
    next.virtual_time = reparameterize_time(state.temperature, state.t_init, raw_power);
    next.raw_power = raw_power;
  }
  if (dx == 0.0) return next;  // switch only, temperature untouched
  next.virtual_time += dx;
  next.temperature = log_temperature(next.t_init, next.raw_power, next.virtual_time);
  return next;
}

void CoolingParams::validate() const {
  if (!(alpha > 0.0)) throw DomainError("cooling.alpha must be > 0");
  if (!(beta > 0.0)) throw DomainError("cooling.beta must be > 0");
  if (!(dt > 0.0)) throw DomainError("cooling.dt must be > 0");
  if (!std::isfinite(t_ambient)) throw DomainError("cooling.t_ambient must be finite");
}

double cooling_plant_step(double temperature, int raw_power, const CoolingParams& params) {
  return temperature + params.dt * (params.alpha * raw_power - params.beta * (temperature - params.t_ambient));
}

}  // namespace aptc::plant
