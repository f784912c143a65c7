#pragma once

#include "absorb/core.hpp"
#include "absorb/predictor.hpp"

namespace absorb {

/// u = clamp(k(Phi_N(z(jT_H), u~_{jT_H}))), held on [jT_H, (j+1)T_H).
/// `hist` is the open history ending at jT_H.
inline Vector hold_control(const Vector& z_at_hold, const InputHistory& hist,
                           int N, const PlantModel& plant,
                           const AssumptionData& assm) {
  const Vector predicted = euler_predict(z_at_hold, hist, N, plant);
  return clamp_input(assm.k_local(predicted), plant.input_box);
}

/// Delay-free law u = clamp(k(z(jT_H))).
inline Vector hold_control_delay_free(const Vector& z_at_hold,
                                      const PlantModel& plant,
                                      const AssumptionData& assm) {
  return clamp_input(assm.k_local(z_at_hold), plant.input_box);
}

}  // namespace absorb
