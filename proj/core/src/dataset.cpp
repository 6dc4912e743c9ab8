#include "ecmirror/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ecmirror/config_file.hpp"
#include "ecmirror/edge.hpp"
#include "ecmirror/errors.hpp"

namespace ecmirror {

void SyntheticDatasetSpec::validate() const {
  if (samples < 2) throw DomainError("dataset: need at least 2 samples");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DomainError("dataset: train fraction must be in (0, 1)");
  }
  if (!(noise_sd >= 0.0)) throw DomainError("dataset: noise sd must be >= 0");
  if (truth != "logistic") throw DomainError("dataset: unknown ground truth '" + truth + "'");
  if (!(max_ambient_v >= 0.0 && max_ambient_v <= kSensorMaxVolts)) {
    throw DomainError("dataset: max ambient must be within [0, 5] V");
  }
}

double ground_truth_volts(const Features& features) {
  const double z = 1.2 * features[0] + 0.8 * features[1] - 3.0;
  return kDriveMinVolts + (kDriveMaxVolts - kDriveMinVolts) / (1.0 + std::exp(-z));
}

Dataset generate_dataset(const SyntheticDatasetSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> incident(0.0, kSensorMaxVolts);
  std::uniform_real_distribution<double> ambient(0.0, spec.max_ambient_v);
  std::normal_distribution<double> noise(0.0, spec.noise_sd > 0.0 ? spec.noise_sd : 1.0);

  std::vector<TrainingSample> rows;
  rows.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    LightReading r{adc_quantize(incident(rng)), adc_quantize(ambient(rng)), 0};
    const GlareCriteria c = compute_criteria(r);
    const Features x{c.incident, c.contrast};
    double label = ground_truth_volts(x);
    if (spec.noise_sd > 0.0) label += noise(rng);
    rows.push_back({x, std::clamp(label, kDriveMinVolts, kDriveMaxVolts)});
  }

  const auto n_train = static_cast<std::size_t>(
      std::lround(spec.train_fraction * static_cast<double>(spec.samples)));
  Dataset d;
  d.train.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.test.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  return d;
}

void write_samples_csv(const std::filesystem::path& path, const std::vector<TrainingSample>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << "incident_v,contrast_v,label_v\n";
  // Shortest round-trip text, so reading the file back is bit-exact.
  char buf[32];
  auto put = [&](double v, char end) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf) << end;
  };
  for (const auto& r : rows) {
    put(r.features[0], ',');
    put(r.features[1], ',');
    put(r.label, '\n');
  }
  if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<TrainingSample> read_samples_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<TrainingSample> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("incident_v", 0) == 0) continue;
    const auto values = parse_double_list(line, path.string() + ":" + std::to_string(line_no));
    if (values.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    }
    if (values[0] < 0.0 || values[1] < 0.0) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": negative feature");
    }
    rows.push_back({{values[0], values[1]}, values[2]});
  }
  return rows;
}

}  // namespace ecmirror
