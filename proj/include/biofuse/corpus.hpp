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
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace biofuse {

enum class Modality { Brain, EyeNoPupil, EyeWithPupil };

// 14 EEG electrodes; 12 gaze/pupil coordinate series; those 12 plus 4
// pupil-diameter series.
constexpr int channel_count(Modality m) {
  switch (m) {
    case Modality::Brain: return 14;
    case Modality::EyeNoPupil: return 12;
    case Modality::EyeWithPupil: return 16;
  }
  return 0;
}

constexpr bool is_eye(Modality m) { return m != Modality::Brain; }

// Tags used in every file format and on the command line.
std::string_view modality_tag(Modality m);  // "brain", "eye", "eye-pupil"
Modality parse_modality(std::string_view tag);  // throws ValidationError

struct Stream {
  Modality modality = Modality::Brain;
  double nominal_rate_hz = 0;
  std::vector<double> timestamps;
  std::vector<double> values;  // row-major [timestamps.size() x n_channels]

  int n_channels() const { return channel_count(modality); }
  std::size_t n_rows() const { return timestamps.size(); }
  const double* row(std::size_t i) const { return values.data() + i * n_channels(); }

  bool operator==(const Stream&) const = default;
};

enum class EventKind { DotHit };

struct EventMarker {
  double t = 0;
  EventKind kind = EventKind::DotHit;
  int round_id = 0;
  int dot_index = 0;

  bool operator==(const EventMarker&) const = default;
};

struct Recording {
  std::string subject_id;
  std::vector<Stream> streams;
  std::vector<EventMarker> events;

  // First stream of the given modality, if any.
  const Stream* find_stream(Modality m) const;
};

// Structural equality that treats NaN == NaN and compares float bits.
bool bitwise_equal(const Recording& a, const Recording& b);
bool bitwise_equal(const std::vector<Recording>& a, const std::vector<Recording>& b);

// Checks every Recording invariant; throws ValidationError naming the breach.
void validate(const Recording& rec);

struct SynthConfig {
  int n_subjects = 8;
  int n_rounds = 4;
  int dots_per_round = 25;
  double eeg_rate_hz = 256;
  double eye_rate_hz = 200;
  double subject_separability = 0.5;
  double blink_rate_per_min = 6;
  double noise_sigma = 0.5;
  std::uint64_t seed = 1;

  // Task geometry.
  double dot_interval_s = 0.8;
  double round_lead_s = 0.6;
  double rest_interval_s = 15.0;

  void validate() const;  // throws ValidationError
};

// One Recording per subject carrying a Brain stream, an EyeWithPupil stream
// and dots_per_round DotHit markers per round. Pure function of cfg.
std::vector<Recording> generate_synthetic(const SynthConfig& cfg);

// Line-delimited text format, header "BIOFUSE-CORPUS v1". See docs/formats.md.
void write_corpus(const std::vector<Recording>& recs, std::ostream& out);
void write_corpus(const std::vector<Recording>& recs, const std::filesystem::path& path);
std::vector<Recording> read_corpus(std::istream& in);
std::vector<Recording> read_corpus(const std::filesystem::path& path);

}  // namespace biofuse
