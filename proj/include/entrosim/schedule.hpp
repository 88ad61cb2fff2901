#pragma once

// Time-indexed entropy target bands. Targets and half-widths are in nats;
// progress runs over [0, 1] in training samples.

#include <string>

namespace entrosim {

enum class ScheduleFamily { Constant, Linear, Cosine };

struct EntropyBand {
  double low = 0.0;
  double high = 0.0;
};

struct EntropySchedule {
  ScheduleFamily family = ScheduleFamily::Constant;
  double start_target = 0.0;
  double end_target = 0.0;
  double band_halfwidth = 0.05;
};

/// Target value at the given progress: constant holds the start, linear
/// interpolates, cosine eases from start to end.
double schedule_target(const EntropySchedule& schedule, double progress);

/// target(progress) +/- band_halfwidth, clamped to [0, max_entropy].
EntropyBand target_band(const EntropySchedule& schedule, double progress, double max_entropy);

std::string schedule_family_name(ScheduleFamily family);

}  // namespace entrosim
