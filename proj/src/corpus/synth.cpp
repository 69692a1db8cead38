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

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "biofuse/corpus.hpp"
#include "biofuse/error.hpp"

namespace biofuse {
namespace {

// Number of damped sinusoids in every event-response kernel.
constexpr int kComponents = 3;
// Event response support, relative to the hit time.
constexpr double kSupportBegin = -0.15;
constexpr double kSupportEnd = 0.45;
constexpr double kTaper = 0.05;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (a + 1)) ^ (b + 0x51ED2701ull));
}

// Damped-sinusoid response kernel over the channels of one modality.
struct ResponseKernel {
  int n_channels = 0;
  double freq[kComponents]{};
  double phase[kComponents]{};
  double decay[kComponents]{};
  // Channels from slow_from on replace the last component's frequency.
  int slow_from = 0;
  double slow_freq = 0;
  std::vector<double> weight;  // [n_channels x kComponents]

  double eval(int ch, double tau) const {
    if (tau <= kSupportBegin || tau >= kSupportEnd) return 0.0;
    double env = 1.0;
    const double rise = (tau - kSupportBegin) / kTaper;
    const double fall = (kSupportEnd - tau) / kTaper;
    if (rise < 1.0) env = std::sin(0.5 * std::numbers::pi * rise) * std::sin(0.5 * std::numbers::pi * rise);
    if (fall < 1.0) env = std::sin(0.5 * std::numbers::pi * fall) * std::sin(0.5 * std::numbers::pi * fall);
    double v = 0.0;
    for (int k = 0; k < kComponents; ++k) {
      const double damp = std::exp(-std::max(tau, 0.0) / decay[k]);
      const double f = (ch >= slow_from && k == kComponents - 1) ? slow_freq : freq[k];
      v += weight[ch * kComponents + k] * damp * std::sin(2.0 * std::numbers::pi * f * tau + phase[k]);
    }
    return env * v;
  }
};

struct FreqBand {
  double lo, hi;
};

ResponseKernel draw_kernel(std::mt19937_64& rng, int n_channels, FreqBand band, FreqBand slow_band,
                           int slow_from_channel) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ResponseKernel k;
  k.n_channels = n_channels;
  for (int c = 0; c < kComponents; ++c) {
    k.freq[c] = band.lo + (band.hi - band.lo) * unit(rng);
    k.phase[c] = 2.0 * std::numbers::pi * unit(rng);
    k.decay[c] = 0.05 + 0.25 * unit(rng);
  }
  k.weight.resize(static_cast<std::size_t>(n_channels) * kComponents);
  for (auto& w : k.weight) w = gauss(rng);
  // Pupil-diameter channels respond slowly: their last component moves into
  // the slow band and dominates the other two.
  k.slow_from = slow_from_channel;
  k.slow_freq = slow_band.lo + (slow_band.hi - slow_band.lo) * unit(rng);
  for (int ch = slow_from_channel; ch < n_channels; ++ch) {
    k.weight[ch * kComponents + 0] *= 0.3;
    k.weight[ch * kComponents + 1] *= 0.3;
  }
  return k;
}

// Blend of the subject's own kernel with the population kernel; the blend
// factor is the configured separability.
struct SubjectModel {
  ResponseKernel own;
  std::vector<double> background_gain;  // [n_channels x 3] per AR component
};

constexpr double kArCoeff[3] = {0.5, 0.9, 0.99};

struct ModalityLayout {
  Modality modality;
  FreqBand band;
  FreqBand slow_band;
  int slow_from_channel;
};

constexpr ModalityLayout kBrainLayout{Modality::Brain, {4.0, 30.0}, {4.0, 30.0}, 14};
constexpr ModalityLayout kEyeLayout{Modality::EyeWithPupil, {1.0, 12.0}, {0.5, 3.0}, 12};

SubjectModel draw_subject(std::mt19937_64& rng, const ModalityLayout& layout) {
  const int nc = channel_count(layout.modality);
  SubjectModel m;
  m.own = draw_kernel(rng, nc, layout.band, layout.slow_band, layout.slow_from_channel);
  std::uniform_real_distribution<double> gain(0.5, 1.5);
  m.background_gain.resize(static_cast<std::size_t>(nc) * 3);
  for (auto& g : m.background_gain) g = gain(rng);
  return m;
}

struct RoundGeometry {
  double start;
  double duration;
};

std::vector<RoundGeometry> round_layout(const SynthConfig& cfg) {
  const double duration = 2.0 * cfg.round_lead_s + cfg.dots_per_round * cfg.dot_interval_s;
  std::vector<RoundGeometry> rounds;
  for (int r = 0; r < cfg.n_rounds; ++r)
    rounds.push_back({r * (duration + cfg.rest_interval_s), duration});
  return rounds;
}

Stream render_stream(const SynthConfig& cfg, const ModalityLayout& layout, double rate,
                     const SubjectModel& subject, const ResponseKernel& population,
                     const std::vector<RoundGeometry>& rounds,
                     const std::vector<EventMarker>& events, const std::vector<double>& event_gain,
                     std::mt19937_64& rng) {
  const int nc = channel_count(layout.modality);
  const double sep = cfg.subject_separability;
  Stream s;
  s.modality = layout.modality;
  s.nominal_rate_hz = rate;

  // Pink-like background: per channel, three AR(1) processes with
  // subject-specific spectral gains, normalised to unit variance each.
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> ar(static_cast<std::size_t>(nc) * 3, 0.0);
  double ar_scale[3];
  for (int j = 0; j < 3; ++j) ar_scale[j] = std::sqrt(1.0 - kArCoeff[j] * kArCoeff[j]);
  std::vector<double> gain(static_cast<std::size_t>(nc) * 3);
  for (std::size_t i = 0; i < gain.size(); ++i)
    gain[i] = (sep * subject.background_gain[i] + (1.0 - sep)) / std::sqrt(3.0);

  std::size_t next_event = 0;
  for (const auto& round : rounds) {
    const auto n_rows = static_cast<std::size_t>(std::floor(round.duration * rate)) + 1;
    for (std::size_t k = 0; k < n_rows; ++k) {
      const double t = round.start + static_cast<double>(k) / rate;
      s.timestamps.push_back(t);
      while (next_event < events.size() && events[next_event].t + kSupportEnd < t) ++next_event;
      for (int ch = 0; ch < nc; ++ch) {
        double v = 0.0;
        for (int j = 0; j < 3; ++j) {
          double& state = ar[ch * 3 + j];
          state = kArCoeff[j] * state + ar_scale[j] * gauss(rng);
          v += gain[ch * 3 + j] * state;
        }
        v *= cfg.noise_sigma;
        for (std::size_t e = next_event; e < events.size() && events[e].t + kSupportBegin < t; ++e) {
          const double tau = t - events[e].t;
          v += event_gain[e] *
               (sep * subject.own.eval(ch, tau) + (1.0 - sep) * population.eval(ch, tau));
        }
        s.values.push_back(v);
      }
    }
  }
  return s;
}

void add_blinks(Stream& eye, const SynthConfig& cfg, const std::vector<RoundGeometry>& rounds,
                std::mt19937_64& rng) {
  if (cfg.blink_rate_per_min <= 0) return;
  const double rate_per_s = cfg.blink_rate_per_min / 60.0;
  std::exponential_distribution<double> gap(rate_per_s);
  std::uniform_real_distribution<double> length(0.05, 0.2);
  const int nc = eye.n_channels();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& round : rounds) {
    double t = round.start + gap(rng);
    while (t < round.start + round.duration) {
      const double len = length(rng);
      auto first = std::lower_bound(eye.timestamps.begin(), eye.timestamps.end(), t);
      auto last = std::lower_bound(first, eye.timestamps.end(), t + len);
      for (auto it = first; it != last; ++it) {
        const auto row = static_cast<std::size_t>(it - eye.timestamps.begin());
        std::fill_n(eye.values.begin() + static_cast<std::ptrdiff_t>(row * nc), nc, nan);
      }
      t += len + gap(rng);
    }
  }
}

std::string subject_name(int index, int n_subjects) {
  const int width = n_subjects >= 100 ? 3 : 2;
  std::string num = std::to_string(index + 1);
  if (static_cast<int>(num.size()) < width) num.insert(0, width - num.size(), '0');
  return "S" + num;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects < 1) throw ValidationError("synth: n_subjects must be >= 1");
  if (n_rounds < 1) throw ValidationError("synth: n_rounds must be >= 1");
  if (dots_per_round < 1 || dots_per_round > 25)
    throw ValidationError("synth: dots_per_round must lie in [1, 25]");
  if (!(eeg_rate_hz > 0) || !(eye_rate_hz > 0)) throw ValidationError("synth: rates must be > 0");
  if (!(subject_separability >= 0 && subject_separability <= 1))
    throw ValidationError("synth: subject_separability must lie in [0, 1]");
  if (!(blink_rate_per_min >= 0)) throw ValidationError("synth: blink_rate_per_min must be >= 0");
  if (!(noise_sigma >= 0)) throw ValidationError("synth: noise_sigma must be >= 0");
  if (!(dot_interval_s >= 0.5)) throw ValidationError("synth: dot_interval_s must be >= 0.5");
  if (!(round_lead_s >= 0.5)) throw ValidationError("synth: round_lead_s must be >= 0.5");
  if (!(rest_interval_s >= 0)) throw ValidationError("synth: rest_interval_s must be >= 0");
}

std::vector<Recording> generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const auto rounds = round_layout(cfg);

  std::mt19937_64 pop_rng(derive_seed(cfg.seed, 0xB10F05Eull));
  const ResponseKernel pop_brain = draw_kernel(pop_rng, 14, kBrainLayout.band, kBrainLayout.slow_band,
                                               kBrainLayout.slow_from_channel);
  const ResponseKernel pop_eye = draw_kernel(pop_rng, 16, kEyeLayout.band, kEyeLayout.slow_band,
                                             kEyeLayout.slow_from_channel);

  std::vector<Recording> out;
  out.reserve(static_cast<std::size_t>(cfg.n_subjects));
  for (int s = 0; s < cfg.n_subjects; ++s) {
    std::mt19937_64 sig_rng(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(s)));
    const SubjectModel brain = draw_subject(sig_rng, kBrainLayout);
    const SubjectModel eye = draw_subject(sig_rng, kEyeLayout);

    std::mt19937_64 ev_rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(s)));
    std::uniform_real_distribution<double> jitter(-0.1 * cfg.dot_interval_s, 0.1 * cfg.dot_interval_s);
    std::normal_distribution<double> amp(1.0, 0.1);
    Recording rec;
    rec.subject_id = subject_name(s, cfg.n_subjects);
    std::vector<double> event_gain;
    for (int r = 0; r < cfg.n_rounds; ++r) {
      for (int d = 0; d < cfg.dots_per_round; ++d) {
        const double t = rounds[r].start + cfg.round_lead_s + (d + 0.5) * cfg.dot_interval_s + jitter(ev_rng);
        rec.events.push_back({t, EventKind::DotHit, r, d});
        event_gain.push_back(amp(ev_rng));
      }
    }

    std::mt19937_64 brain_rng(derive_seed(cfg.seed, 3, static_cast<std::uint64_t>(s)));
    rec.streams.push_back(render_stream(cfg, kBrainLayout, cfg.eeg_rate_hz, brain, pop_brain, rounds,
                                        rec.events, event_gain, brain_rng));
    std::mt19937_64 eye_rng(derive_seed(cfg.seed, 4, static_cast<std::uint64_t>(s)));
    rec.streams.push_back(render_stream(cfg, kEyeLayout, cfg.eye_rate_hz, eye, pop_eye, rounds,
                                        rec.events, event_gain, eye_rng));
    std::mt19937_64 blink_rng(derive_seed(cfg.seed, 5, static_cast<std::uint64_t>(s)));
    add_blinks(rec.streams.back(), cfg, rounds, blink_rng);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace biofuse
