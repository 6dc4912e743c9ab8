#include "ecmirror/glare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ecmirror/config_file.hpp"
#include "ecmirror/errors.hpp"

namespace ecmirror {

void validate(const LightReading& reading) {
  auto in_range = [](double v) { return v >= 0.0 && v <= kSensorMaxVolts; };
  if (!in_range(reading.incident_v) || !in_range(reading.ambient_v)) {
    throw DomainError("light reading outside [0, 5] V");
  }
}

TopsisCalibration::TopsisCalibration()
    : TopsisCalibration({0.0, kSensorMaxVolts}, {0.0, kSensorMaxVolts}, 0.5, 0.5) {}

TopsisCalibration::TopsisCalibration(CriterionBounds incident, CriterionBounds contrast,
                                     double incident_weight, double contrast_weight)
    : bounds_{incident, contrast}, weights_{incident_weight, contrast_weight} {
  for (const auto& b : bounds_) {
    if (!(b.max > b.min)) throw DomainError("calibration bound max must exceed min");
  }
  for (double w : weights_) {
    if (!(w >= 0.0)) throw DomainError("calibration weights must be non-negative");
  }
  if (std::abs(weights_[0] + weights_[1] - 1.0) > 1e-9) {
    throw DomainError("calibration weights must sum to 1");
  }
}

TopsisCalibration TopsisCalibration::load(const std::filesystem::path& path) {
  const auto file = ConfigFile::load(path);
  const TopsisCalibration defaults;
  auto value = [&](const char* key, double fallback) {
    return file.get_double("", key).value_or(fallback);
  };
  return TopsisCalibration(
      {value("incident.min", defaults.incident().min), value("incident.max", defaults.incident().max)},
      {value("contrast.min", defaults.contrast().min), value("contrast.max", defaults.contrast().max)},
      value("incident.weight", defaults.incident_weight()),
      value("contrast.weight", defaults.contrast_weight()));
}

GlareCriteria TopsisCalibration::clamp(const GlareCriteria& c) const {
  return {std::clamp(c.incident, bounds_[0].min, bounds_[0].max),
          std::clamp(c.contrast, bounds_[1].min, bounds_[1].max)};
}

std::string_view to_string(GlareCategory category) {
  switch (category) {
    case GlareCategory::Unbearable: return "Unbearable";
    case GlareCategory::Disturbing: return "Disturbing";
    case GlareCategory::JustAdmissible: return "JustAdmissible";
    case GlareCategory::Acceptable: return "Acceptable";
    case GlareCategory::Noticeable: return "Noticeable";
  }
  return "?";
}

GlareCriteria compute_criteria(const LightReading& reading) {
  return {reading.incident_v, std::max(reading.incident_v - reading.ambient_v, 0.0)};
}

double topsis_score(const GlareCriteria& criteria, const TopsisCalibration& cal) {
  const GlareCriteria c = cal.clamp(criteria);
  const double r_inc = (c.incident - cal.incident().min) / (cal.incident().max - cal.incident().min);
  const double r_con = (c.contrast - cal.contrast().min) / (cal.contrast().max - cal.contrast().min);
  const double v_inc = cal.incident_weight() * r_inc;
  const double v_con = cal.contrast_weight() * r_con;
  // Distances to the weighted no-glare point (0, 0) and max-glare point (w1, w2).
  const double to_none = std::hypot(v_inc, v_con);
  const double to_worst =
      std::hypot(cal.incident_weight() - v_inc, cal.contrast_weight() - v_con);
  const double total = to_none + to_worst;
  return total > 0.0 ? to_none / total : 0.0;
}

GlareCategory category_for_rating(int rating) {
  if (rating < 1 || rating > 9) throw DomainError("rating must be within 1..9");
  if (rating <= 2) return GlareCategory::Unbearable;
  if (rating <= 4) return GlareCategory::Disturbing;
  if (rating <= 6) return GlareCategory::JustAdmissible;
  if (rating <= 8) return GlareCategory::Acceptable;
  return GlareCategory::Noticeable;
}

GlareAssessment score_to_rating(double score) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw DomainError("TOPSIS score outside [0, 1]");
  }
  int rating = 9;
  if (score > 0.0) {
    // Each cut point belongs to the milder band below it.
    rating = 1;
    for (double cut : kRatingCutPoints) rating += score <= cut ? 1 : 0;
  }
  return {score, rating, category_for_rating(rating)};
}

GlareAssessment assess(const LightReading& reading, const TopsisCalibration& cal) {
  validate(reading);
  return score_to_rating(topsis_score(compute_criteria(reading), cal));
}

std::string format_assessment_record(const LightReading& reading,
                                     const GlareAssessment& assessment) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%.2f,%.2f,%.6f,%d,%s",
                static_cast<long long>(reading.timestamp_ms), reading.incident_v,
                reading.ambient_v, assessment.topsis_score, assessment.rating,
                std::string(to_string(assessment.category)).c_str());
  return buf;
}

}  // namespace ecmirror
