#pragma once

// Glare quantification: sensor readings -> (incident, contrast) criteria ->
// TOPSIS severity score -> Schmidt-Clausen / Bindels 9-point rating.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ecmirror {

inline constexpr double kSensorMaxVolts = 5.0;

struct LightReading {
  double incident_v = 0.0;  // rear-facing sensor (trailing headlights)
  double ambient_v = 0.0;   // front-facing background sensor
  std::int64_t timestamp_ms = 0;
};

// Throws DomainError unless both voltages are within [0, 5] V.
void validate(const LightReading& reading);

struct GlareCriteria {
  double incident = 0.0;
  double contrast = 0.0;
};

struct CriterionBounds {
  double min = 0.0;
  double max = kSensorMaxVolts;
};

// Fixed min-max bounds and weights for the two criteria. Immutable once built.
class TopsisCalibration {
 public:
  // Equal weights, [0, 5] V bounds on both criteria.
  TopsisCalibration();
  TopsisCalibration(CriterionBounds incident, CriterionBounds contrast,
                    double incident_weight, double contrast_weight);

  // Key-value file: incident.min, incident.max, incident.weight, and the same
  // three keys for contrast. Missing keys keep their defaults.
  static TopsisCalibration load(const std::filesystem::path& path);

  const CriterionBounds& incident() const { return bounds_[0]; }
  const CriterionBounds& contrast() const { return bounds_[1]; }
  double incident_weight() const { return weights_[0]; }
  double contrast_weight() const { return weights_[1]; }

  // Criteria clamped into the calibration box.
  GlareCriteria clamp(const GlareCriteria& c) const;

 private:
  std::array<CriterionBounds, 2> bounds_;
  std::array<double, 2> weights_;
};

enum class GlareCategory { Unbearable, Disturbing, JustAdmissible, Acceptable, Noticeable };

std::string_view to_string(GlareCategory category);

struct GlareAssessment {
  double topsis_score = 0.0;
  int rating = 9;  // 1 (worst) .. 9
  GlareCategory category = GlareCategory::Noticeable;
};

// Band edges, worst first. A score equal to an edge takes the milder rating:
// rating 1 is (0.7671, 1], rating 2 is (0.6576, 0.7671], ..., rating 8 is
// (0, 0.0548] and rating 9 is exactly zero.
inline constexpr std::array<double, 7> kRatingCutPoints = {
    0.7671, 0.6576, 0.5207, 0.3015, 0.2192, 0.1644, 0.0548};

// Lowest rating the auto controller accepts as glare-free enough.
inline constexpr int kAcceptableRating = 7;

GlareCriteria compute_criteria(const LightReading& reading);

// Closeness toward the maximum-glare point: 1 at the calibration maxima, 0 at
// the minima. Inputs outside the bounds are clamped.
double topsis_score(const GlareCriteria& criteria, const TopsisCalibration& cal);

GlareCategory category_for_rating(int rating);

// Throws DomainError for scores outside [0, 1] (or NaN).
GlareAssessment score_to_rating(double score);

GlareAssessment assess(const LightReading& reading, const TopsisCalibration& cal);

// "timestamp,incident_v,ambient_v,topsis_score,rating,category"
std::string format_assessment_record(const LightReading& reading,
                                     const GlareAssessment& assessment);

}  // namespace ecmirror
