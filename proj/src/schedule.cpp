#include "entrosim/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace entrosim {

double schedule_target(const EntropySchedule& schedule, double progress) {
  if (progress < 0.0 || progress > 1.0) throw std::invalid_argument("progress outside [0,1]");
  switch (schedule.family) {
    case ScheduleFamily::Constant:
      return schedule.start_target;
    case ScheduleFamily::Linear:
      return schedule.start_target + (schedule.end_target - schedule.start_target) * progress;
    case ScheduleFamily::Cosine:
      return schedule.end_target + (schedule.start_target - schedule.end_target) *
                                       0.5 * (1.0 + std::cos(M_PI * progress));
  }
  return schedule.start_target;
}

EntropyBand target_band(const EntropySchedule& schedule, double progress, double max_entropy) {
  const double target = schedule_target(schedule, progress);
  EntropyBand band;
  band.low = std::clamp(target - schedule.band_halfwidth, 0.0, max_entropy);
  band.high = std::clamp(target + schedule.band_halfwidth, 0.0, max_entropy);
  return band;
}

std::string schedule_family_name(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::Constant: return "constant";
    case ScheduleFamily::Linear: return "linear";
    case ScheduleFamily::Cosine: return "cosine";
  }
  return "?";
}

}  // namespace entrosim
