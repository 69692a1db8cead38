// Copyright 2026 The biofuse Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biofuse/corpus.hpp"

namespace biofuse {

// Window geometry: 0.1 s before the hit to 0.3 s after, on a 256 Hz grid.
constexpr double kWindowBefore = 0.1;
constexpr double kWindowAfter = 0.3;
constexpr double kGridRateHz = 256.0;
constexpr int kSampleLength = 102;  // floor(0.4 * 256)

struct Sample {
  std::string subject_id;
  int round_id = 0;
  int dot_index = 0;
  Modality modality = Modality::Brain;
  double t0 = 0;               // window start, seconds
  std::vector<double> data;    // row-major [n_channels x kSampleLength]
  std::string transform_scope; // scope of the standardizer applied, empty if raw

  int n_channels() const { return channel_count(modality); }
  std::span<const double> channel(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * kSampleLength, kSampleLength};
  }
};

// Raw rows of one modality falling inside an event window.
struct RawWindow {
  std::string subject_id;
  int round_id = 0;
  int dot_index = 0;
  Modality modality = Modality::Brain;
  double t0 = 0;
  std::vector<double> timestamps;
  std::vector<double> values;  // row-major [timestamps.size() x n_channels]

  int n_channels() const { return channel_count(modality); }
};

struct NanPolicy {
  double max_nan_fraction = 0.25;
  void validate() const;
};

// Rows with timestamp in [ev.t - 0.1, ev.t + 0.3). EyeNoPupil windows are
// cut from an EyeWithPupil stream when no dedicated stream exists.
// Throws WindowOutOfRange when the window leaves the stream's span.
RawWindow extract_window(const Recording& rec, const EventMarker& ev, Modality modality);

// Linear interpolation onto kSampleLength points t0 + j/256. Grid points
// outside the raw span take the nearest raw value. NaN propagates.
// Throws DegenerateWindow for fewer than two rows.
std::vector<double> resample_to_grid(const RawWindow& window);

// nullopt when the sample must be rejected (a channel is all NaN or its NaN
// fraction exceeds the policy). Otherwise NaNs are filled from within the
// sample only: interior runs linearly, edge runs by nearest value.
std::optional<std::vector<double>> screen_and_interpolate(std::span<const double> data, int n_channels,
                                                          const NanPolicy& policy);

// Per-channel z-scoring fitted on training samples.
struct Standardizer {
  Modality modality = Modality::Brain;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::string scope;  // fold id or other provenance tag

  // Throws ShapeError on modality mismatch, ValidationError when the sample
  // was already standardized.
  Sample apply(const Sample& s) const;
  void apply_in_place(std::vector<Sample>& samples) const;
};

// Population statistics over all samples and time points per channel.
// Throws FitError on an empty set or a zero-variance channel.
Standardizer fit_standardizer(std::span<const Sample> train, Modality modality, std::string scope);

struct RoundCounts {
  int extracted = 0;
  int rejected = 0;  // failed NaN screening
  int skipped = 0;   // window out of range or degenerate
};

struct PreprocessReport {
  Modality modality = Modality::Brain;
  NanPolicy policy;
  std::map<std::string, std::map<int, RoundCounts>> counts;  // subject -> round -> counts

  RoundCounts total() const;
  std::string to_json() const;
};

struct Dataset {
  std::vector<Sample> samples;  // sorted by subject, round, event time
  PreprocessReport report;
};

Dataset build_dataset(const std::vector<Recording>& recs, Modality modality, const NanPolicy& policy);

// Binary table "BIOFUSE-DS v1" (little-endian float32, [channels x 102] per
// sample) plus a text sidecar "<path>.idx".
void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path);
std::vector<Sample> read_dataset(const std::filesystem::path& path);

}  // namespace biofuse
