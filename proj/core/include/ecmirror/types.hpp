#pragma once

#include <array>
#include <cstddef>

namespace ecmirror {

// Mirror drive range produced by the regulator stage.
inline constexpr double kDriveMinVolts = 1.49;
inline constexpr double kDriveMaxVolts = 3.79;

inline constexpr std::size_t kFeatureCount = 2;

// (incident, contrast) in volts, or their standardized counterparts.
using Features = std::array<double, kFeatureCount>;

struct TrainingSample {
  Features features{};
  double label = 0.0;  // target drive voltage
};

}  // namespace ecmirror
