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
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "biofuse/error.hpp"
#include "biofuse/preprocess.hpp"

namespace biofuse {
namespace {

struct StreamView {
  const Stream* stream = nullptr;
  int stride = 0;    // channels per row in the source stream
  int channels = 0;  // channels taken from the front of each row
};

StreamView locate(const Recording& rec, Modality modality) {
  if (const Stream* s = rec.find_stream(modality)) return {s, s->n_channels(), s->n_channels()};
  if (modality == Modality::EyeNoPupil) {
    if (const Stream* s = rec.find_stream(Modality::EyeWithPupil))
      return {s, s->n_channels(), channel_count(Modality::EyeNoPupil)};
  }
  throw ValidationError("recording '" + rec.subject_id + "' has no " +
                        std::string(modality_tag(modality)) + " stream");
}

bool window_in_range(const Stream& s, double t) {
  return !s.timestamps.empty() && t - kWindowBefore >= s.timestamps.front() &&
         t + kWindowAfter <= s.timestamps.back();
}

}  // namespace

void NanPolicy::validate() const {
  if (!(max_nan_fraction >= 0 && max_nan_fraction <= 1))
    throw ValidationError("nan policy: max_nan_fraction must lie in [0, 1]");
}

RawWindow extract_window(const Recording& rec, const EventMarker& ev, Modality modality) {
  const StreamView view = locate(rec, modality);
  const Stream& s = *view.stream;
  if (!window_in_range(s, ev.t))
    throw WindowOutOfRange("event at t=" + std::to_string(ev.t) + " (subject " + rec.subject_id +
                           ", round " + std::to_string(ev.round_id) + ") exceeds the " +
                           std::string(modality_tag(modality)) + " stream bounds");
  RawWindow w;
  w.subject_id = rec.subject_id;
  w.round_id = ev.round_id;
  w.dot_index = ev.dot_index;
  w.modality = modality;
  w.t0 = ev.t - kWindowBefore;
  const double t1 = ev.t + kWindowAfter;
  const auto first = std::lower_bound(s.timestamps.begin(), s.timestamps.end(), w.t0);
  const auto last = std::lower_bound(first, s.timestamps.end(), t1);
  for (auto it = first; it != last; ++it) {
    const auto row = static_cast<std::size_t>(it - s.timestamps.begin());
    w.timestamps.push_back(*it);
    const double* src = s.values.data() + row * view.stride;
    w.values.insert(w.values.end(), src, src + view.channels);
  }
  return w;
}

std::vector<double> resample_to_grid(const RawWindow& w) {
  const std::size_t n = w.timestamps.size();
  if (n < 2) throw DegenerateWindow("window for subject " + w.subject_id + " has fewer than two rows");
  const int nc = w.n_channels();
  std::vector<double> out(static_cast<std::size_t>(nc) * kSampleLength);
  std::size_t i = 0;
  for (int j = 0; j < kSampleLength; ++j) {
    const double g = w.t0 + j / kGridRateHz;
    std::size_t lo = 0, hi = 0;
    double frac = 0;
    if (g <= w.timestamps.front()) {
      lo = hi = 0;
    } else if (g >= w.timestamps.back()) {
      lo = hi = n - 1;
    } else {
      while (i + 1 < n && w.timestamps[i + 1] <= g) ++i;
      lo = i;
      hi = i + 1;
      frac = (g - w.timestamps[lo]) / (w.timestamps[hi] - w.timestamps[lo]);
    }
    for (int c = 0; c < nc; ++c) {
      const double a = w.values[lo * nc + c];
      double v = a;
      if (frac != 0.0) {
        const double b = w.values[hi * nc + c];
        v = a + frac * (b - a);
      }
      out[static_cast<std::size_t>(c) * kSampleLength + j] = v;
    }
  }
  return out;
}

std::optional<std::vector<double>> screen_and_interpolate(std::span<const double> data, int n_channels,
                                                          const NanPolicy& policy) {
  if (data.size() != static_cast<std::size_t>(n_channels) * kSampleLength)
    throw ShapeError("screen_and_interpolate: expected " + std::to_string(n_channels) + " x " +
                     std::to_string(kSampleLength) + " values");
  std::vector<double> out(data.begin(), data.end());
  for (int c = 0; c < n_channels; ++c) {
    double* ch = out.data() + static_cast<std::size_t>(c) * kSampleLength;
    const auto n_nan = std::count_if(ch, ch + kSampleLength, [](double v) { return std::isnan(v); });
    if (n_nan == kSampleLength) return std::nullopt;
    if (static_cast<double>(n_nan) / kSampleLength > policy.max_nan_fraction) return std::nullopt;
    if (n_nan == 0) continue;

    int prev = -1;  // last finite index seen
    for (int k = 0; k <= kSampleLength; ++k) {
      if (k < kSampleLength && std::isnan(ch[k])) continue;
      // k is finite (or one past the end); fill the run (prev, k).
      if (k - prev > 1) {
        for (int m = prev + 1; m < k; ++m) {
          if (prev < 0) {
            ch[m] = ch[k];
          } else if (k == kSampleLength) {
            ch[m] = ch[prev];
          } else {
            const double frac = static_cast<double>(m - prev) / (k - prev);
            ch[m] = ch[prev] + frac * (ch[k] - ch[prev]);
          }
        }
      }
      prev = k;
    }
  }
  return out;
}

Sample Standardizer::apply(const Sample& s) const {
  if (s.modality != modality)
    throw ShapeError("standardizer for " + std::string(modality_tag(modality)) + " applied to a " +
                     std::string(modality_tag(s.modality)) + " sample");
  if (!s.transform_scope.empty())
    throw ValidationError("sample already standardized under scope '" + s.transform_scope + "'");
  Sample out = s;
  const int nc = s.n_channels();
  for (int c = 0; c < nc; ++c) {
    double* ch = out.data.data() + static_cast<std::size_t>(c) * kSampleLength;
    for (int k = 0; k < kSampleLength; ++k) ch[k] = (ch[k] - mean[c]) / stddev[c];
  }
  out.transform_scope = scope;
  return out;
}

void Standardizer::apply_in_place(std::vector<Sample>& samples) const {
  for (auto& s : samples) s = apply(s);
}

Standardizer fit_standardizer(std::span<const Sample> train, Modality modality, std::string scope) {
  if (train.empty()) throw FitError("fit_standardizer: empty training set");
  const int nc = channel_count(modality);
  Standardizer st;
  st.modality = modality;
  st.scope = std::move(scope);
  st.mean.assign(nc, 0.0);
  st.stddev.assign(nc, 0.0);
  for (const auto& s : train) {
    if (s.modality != modality || s.data.size() != static_cast<std::size_t>(nc) * kSampleLength)
      throw ShapeError("fit_standardizer: sample shape does not match modality " +
                       std::string(modality_tag(modality)));
  }
  const double count = static_cast<double>(train.size()) * kSampleLength;
  for (int c = 0; c < nc; ++c) {
    double sum = 0;
    for (const auto& s : train) {
      const auto ch = s.channel(c);
      sum = std::accumulate(ch.begin(), ch.end(), sum);
    }
    const double mu = sum / count;
    double ss = 0;
    for (const auto& s : train)
      for (double v : s.channel(c)) ss += (v - mu) * (v - mu);
    const double sd = std::sqrt(ss / count);
    if (!(sd > 0) || !std::isfinite(sd))
      throw FitError("fit_standardizer: channel " + std::to_string(c) + " of " +
                     std::string(modality_tag(modality)) + " has zero variance");
    st.mean[c] = mu;
    st.stddev[c] = sd;
  }
  return st;
}

RoundCounts PreprocessReport::total() const {
  RoundCounts t;
  for (const auto& [subject, rounds] : counts)
    for (const auto& [round, c] : rounds) {
      t.extracted += c.extracted;
      t.rejected += c.rejected;
      t.skipped += c.skipped;
    }
  return t;
}

std::string PreprocessReport::to_json() const {
  nlohmann::ordered_json j;
  j["modality"] = std::string(modality_tag(modality));
  j["max_nan_fraction"] = policy.max_nan_fraction;
  const RoundCounts t = total();
  j["total"] = {{"extracted", t.extracted}, {"rejected", t.rejected}, {"skipped", t.skipped}};
  nlohmann::ordered_json subjects = nlohmann::ordered_json::object();
  for (const auto& [subject, rounds] : counts) {
    nlohmann::ordered_json rj = nlohmann::ordered_json::object();
    for (const auto& [round, c] : rounds)
      rj[std::to_string(round)] = {{"extracted", c.extracted}, {"rejected", c.rejected}, {"skipped", c.skipped}};
    subjects[subject] = std::move(rj);
  }
  j["subjects"] = std::move(subjects);
  return j.dump(2) + "\n";
}

Dataset build_dataset(const std::vector<Recording>& recs, Modality modality, const NanPolicy& policy) {
  policy.validate();
  Dataset ds;
  ds.report.modality = modality;
  ds.report.policy = policy;

  std::vector<const Recording*> order;
  for (const auto& r : recs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const Recording* a, const Recording* b) { return a->subject_id < b->subject_id; });

  for (const Recording* rec : order) {
    const StreamView view = locate(*rec, modality);
    std::vector<EventMarker> events = rec->events;
    std::stable_sort(events.begin(), events.end(), [](const EventMarker& a, const EventMarker& b) {
      return a.round_id != b.round_id ? a.round_id < b.round_id : a.t < b.t;
    });
    auto& per_round = ds.report.counts[rec->subject_id];
    for (const auto& ev : events) {
      RoundCounts& rc = per_round[ev.round_id];
      if (!window_in_range(*view.stream, ev.t)) {
        ++rc.skipped;
        continue;
      }
      const RawWindow w = extract_window(*rec, ev, modality);
      if (w.timestamps.size() < 2) {
        ++rc.skipped;
        continue;
      }
      auto clean = screen_and_interpolate(resample_to_grid(w), w.n_channels(), policy);
      if (!clean) {
        ++rc.rejected;
        continue;
      }
      ++rc.extracted;
      Sample s;
      s.subject_id = rec->subject_id;
      s.round_id = ev.round_id;
      s.dot_index = ev.dot_index;
      s.modality = modality;
      s.t0 = w.t0;
      s.data = std::move(*clean);
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

namespace {
constexpr const char* kDsMagic = "BIOFUSE-DS";
constexpr const char* kIdxMagic = "BIOFUSE-DS-INDEX";
constexpr const char* kDsVersion = "v1";

std::filesystem::path index_path(const std::filesystem::path& p) {
  return std::filesystem::path(p.string() + ".idx");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

void write_dataset(const std::vector<Sample>& samples, const std::filesystem::path& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw Error("cannot open '" + path.string() + "' for writing");
  const std::string header = std::string(kDsMagic) + " " + kDsVersion + "\n";
  bin << header;
  std::ostringstream idx;
  idx << kIdxMagic << ' ' << kDsVersion << '\n';
  idx << "samples " << samples.size() << " length " << kSampleLength << '\n';
  std::uint64_t offset = header.size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.data.size() != static_cast<std::size_t>(s.n_channels()) * kSampleLength)
      throw ShapeError("write_dataset: sample " + std::to_string(i) + " has the wrong shape");
    idx << i << ' ' << s.subject_id << ' ' << s.round_id << ' ' << s.dot_index << ' '
        << modality_tag(s.modality) << ' ' << s.n_channels() << ' ' << offset << ' ' << fmt_double(s.t0)
        << ' ' << (s.transform_scope.empty() ? "-" : s.transform_scope) << '\n';
    for (double v : s.data) detail::put_f32(bin, static_cast<float>(v));
    offset += s.data.size() * 4;
  }
  if (!bin) throw Error("write_dataset: write failed for '" + path.string() + "'");
  std::ofstream idx_out(index_path(path), std::ios::binary);
  idx_out << idx.str();
  if (!idx_out) throw Error("write_dataset: cannot write index for '" + path.string() + "'");
}

std::vector<Sample> read_dataset(const std::filesystem::path& path) {
  const std::string what = "dataset '" + path.string() + "'";
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw Error("cannot open " + what);
  std::ifstream idx(index_path(path), std::ios::binary);
  if (!idx) throw Error("cannot open index for " + what);

  detail::expect_magic(detail::get_line(bin, what), kDsMagic, kDsVersion, what);
  const std::string iwhat = what + " index";
  detail::expect_magic(detail::get_line(idx, iwhat), kIdxMagic, kDsVersion, iwhat);
  std::size_t n = 0;
  int length = 0;
  {
    std::istringstream hs(detail::get_line(idx, iwhat));
    std::string k1, k2;
    if (!(hs >> k1 >> n >> k2 >> length) || k1 != "samples" || k2 != "length")
      throw ParseError(iwhat + " line 2: expected 'samples <n> length <len>'");
    if (length != kSampleLength) throw ParseError(iwhat + ": unsupported sample length");
  }
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::string line = detail::get_line(idx, iwhat);
    std::istringstream ls(line);
    std::size_t id = 0, channels = 0;
    std::uint64_t offset = 0;
    std::string tag, t0, scope;
    Sample s;
    if (!(ls >> id >> s.subject_id >> s.round_id >> s.dot_index >> tag >> channels >> offset >> t0 >> scope) ||
        id != i)
      throw ParseError(iwhat + " line " + std::to_string(i + 3) + ": malformed record");
    try {
      s.modality = parse_modality(tag);
      s.t0 = std::stod(t0);
    } catch (const std::exception& e) {
      throw ParseError(iwhat + " line " + std::to_string(i + 3) + ": " + e.what());
    }
    if (static_cast<int>(channels) != s.n_channels())
      throw ParseError(iwhat + " line " + std::to_string(i + 3) + ": channel count mismatch");
    if (scope != "-") s.transform_scope = scope;
    bin.seekg(static_cast<std::streamoff>(offset));
    s.data.resize(channels * kSampleLength);
    for (auto& v : s.data) v = detail::get_f32(bin, what);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace biofuse
