#pragma once

// Synthetic stand-in for the driver-study data: sensor pairs labelled with
// the drive voltage a smooth monotone ground truth assigns them.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ecmirror/types.hpp"

namespace ecmirror {

struct SyntheticDatasetSpec {
  std::size_t samples = 1000;
  std::uint64_t seed = 7;
  std::string truth = "logistic";
  double noise_sd = 0.08;       // volts
  double train_fraction = 0.8;  // in (0, 1)
  double max_ambient_v = 2.5;

  void validate() const;
};

// 1.49 + 2.30 * sigmoid(1.2 * incident + 0.8 * contrast - 3)
double ground_truth_volts(const Features& features);

struct Dataset {
  std::vector<TrainingSample> train;
  std::vector<TrainingSample> test;
};

// Deterministic in the seed. Labels are clamped into the drive range.
Dataset generate_dataset(const SyntheticDatasetSpec& spec);

// "incident_v,contrast_v,label_v" with a header row.
void write_samples_csv(const std::filesystem::path& path, const std::vector<TrainingSample>& rows);
std::vector<TrainingSample> read_samples_csv(const std::filesystem::path& path);

}  // namespace ecmirror
