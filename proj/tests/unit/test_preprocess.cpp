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

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "biofuse/error.hpp"
#include "biofuse/preprocess.hpp"
#include "unit/common.hpp"

using namespace biofuse;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream sampled at `rate` over [0, duration) whose channel c holds f(t, c).
template <class F>
Stream make_stream(Modality m, double rate, double duration, F f) {
  Stream s;
  s.modality = m;
  s.nominal_rate_hz = rate;
  for (int k = 0; k / rate < duration; ++k) {
    const double t = k / rate;
    s.timestamps.push_back(t);
    for (int c = 0; c < s.n_channels(); ++c) s.values.push_back(f(t, c));
  }
  return s;
}

Recording one_stream(Stream s) {
  Recording r;
  r.subject_id = "S01";
  r.streams.push_back(std::move(s));
  return r;
}

// Independent linear interpolation: grid point g takes the first raw value
// at or before the span start, the last one at or after its end, and the
// straight line between the bracketing rows otherwise.
double interp_oracle(const std::vector<double>& t, const std::vector<double>& v, double g) {
  if (g <= t.front()) return v.front();
  if (g >= t.back()) return v.back();
  std::size_t k = 0;
  while (t[k + 1] <= g) ++k;
  if (t[k] == g) return v[k];
  const double w = (g - t[k]) / (t[k + 1] - t[k]);
  return (1 - w) * v[k] + w * v[k + 1];
}

std::vector<double> grid_channel(const std::vector<double>& data, int c) {
  return {data.begin() + c * kSampleLength, data.begin() + (c + 1) * kSampleLength};
}

Sample sample_with(Modality m, std::mt19937_64& rng, double mean, double sd) {
  Sample s;
  s.modality = m;
  s.subject_id = "S01";
  std::normal_distribution<double> d(mean, sd);
  s.data.resize(static_cast<std::size_t>(s.n_channels()) * kSampleLength);
  for (auto& v : s.data) v = d(rng);
  return s;
}

}  // namespace

TEST_CASE("window geometry") {
  const auto rec = one_stream(make_stream(Modality::Brain, 256, 20, [](double t, int) { return t; }));
  const EventMarker ev{10.0, EventKind::DotHit, 0, 0};
  const RawWindow w = extract_window(rec, ev, Modality::Brain);
  REQUIRE(!w.timestamps.empty());
  CHECK(w.t0 == doctest::Approx(9.9).epsilon(1e-15));
  for (double t : w.timestamps) {
    CHECK(t >= 9.9 - 1e-12);
    CHECK(t < 10.3);
  }
  // Nothing in range was dropped.
  const auto& all = rec.streams[0].timestamps;
  std::size_t inside = 0;
  for (double t : all) inside += (t >= w.t0 && t < ev.t + kWindowAfter);
  CHECK(w.timestamps.size() == inside);
  CHECK(w.values.size() == inside * 14);
}

TEST_CASE("window out of range") {
  const auto rec = one_stream(make_stream(Modality::Brain, 256, 20, [](double, int) { return 0.0; }));
  CHECK_THROWS_AS(extract_window(rec, {0.05, EventKind::DotHit, 0, 0}, Modality::Brain), WindowOutOfRange);
  CHECK_THROWS_AS(extract_window(rec, {19.9, EventKind::DotHit, 0, 0}, Modality::Brain), WindowOutOfRange);
  CHECK_THROWS_AS(extract_window(rec, {5.0, EventKind::DotHit, 0, 0}, Modality::EyeWithPupil), ValidationError);
}

TEST_CASE("200 Hz eye stream yields 80 raw rows") {
  const auto rec = one_stream(make_stream(Modality::EyeWithPupil, 200, 20, [](double t, int c) { return t + c; }));
  const RawWindow w = extract_window(rec, {10.0, EventKind::DotHit, 0, 0}, Modality::EyeWithPupil);
  CHECK(w.timestamps.size() == 80);
  // The pupil-free view is cut from the same stream.
  const RawWindow np = extract_window(rec, {10.0, EventKind::DotHit, 0, 0}, Modality::EyeNoPupil);
  CHECK(np.timestamps.size() == 80);
  CHECK(np.values.size() == 80 * 12);
  CHECK(np.values[13] == w.values[17]);
}

TEST_CASE("resampling constants and affine signals") {
  const auto cst = one_stream(make_stream(Modality::EyeNoPupil, 200, 5, [](double, int) { return 3.5; }));
  const auto g = resample_to_grid(extract_window(cst, {2.0, EventKind::DotHit, 0, 0}, Modality::EyeNoPupil));
  REQUIRE(g.size() == 12u * kSampleLength);
  for (double v : g) CHECK(v == 3.5);

  const auto ramp =
      one_stream(make_stream(Modality::EyeNoPupil, 200, 5, [](double t, int c) { return 2.0 * t - 0.5 * c + 1; }));
  const RawWindow w = extract_window(ramp, {2.0, EventKind::DotHit, 0, 0}, Modality::EyeNoPupil);
  const auto r = resample_to_grid(w);
  double worst = 0;
  for (int c = 0; c < 12; ++c)
    for (int j = 0; j < kSampleLength; ++j) {
      const double t = std::clamp(w.t0 + j / kGridRateHz, w.timestamps.front(), w.timestamps.back());
      worst = std::max(worst, std::abs(r[c * kSampleLength + j] - (2.0 * t - 0.5 * c + 1)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("resampling matches the interpolation oracle on random data") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    RawWindow w;
    w.modality = Modality::Brain;
    w.t0 = std::uniform_real_distribution<double>(0, 100)(rng);
    // 80 irregular rows covering the window.
    double t = w.t0 + std::uniform_real_distribution<double>(0, 0.004)(rng);
    for (int k = 0; k < 80; ++k) {
      w.timestamps.push_back(t);
      t += std::uniform_real_distribution<double>(0.002, 0.008)(rng);
    }
    const auto vals = testing::uniform(rng, 80 * 14, -5, 5);
    w.values = vals;
    const auto r = resample_to_grid(w);
    for (int c = 0; c < 14; ++c) {
      std::vector<double> ch(80);
      for (int k = 0; k < 80; ++k) ch[k] = vals[k * 14 + c];
      for (int j = 0; j < kSampleLength; ++j)
        REQUIRE(std::abs(r[c * kSampleLength + j] - interp_oracle(w.timestamps, ch, w.t0 + j / kGridRateHz)) <= 1e-12);
    }
  }
}

TEST_CASE("resampling propagates NaN and rejects degenerate windows") {
  RawWindow w;
  w.modality = Modality::EyeNoPupil;
  w.t0 = 0;
  w.timestamps = {0.0, 0.2, 0.4};
  w.values.assign(36, 1.0);
  w.values[12] = kNaN;  // row 1, channel 0
  const auto r = resample_to_grid(w);
  CHECK(std::isnan(r[1]));
  CHECK(std::isnan(r[100]));
  CHECK(!std::isnan(r[0]));
  CHECK(!std::isnan(r[kSampleLength + 50]));
  w.timestamps = {0.0};
  w.values.resize(12);
  CHECK_THROWS_AS(resample_to_grid(w), DegenerateWindow);
}

TEST_CASE("NaN screening and in-sample filling") {
  const NanPolicy policy;
  std::vector<double> data(12 * kSampleLength, 7.0);
  SUBCASE("midpoint") {
    data[0] = 1;
    data[1] = kNaN;
    data[2] = 3;
    const auto out = screen_and_interpolate(data, 12, policy);
    REQUIRE(out);
    CHECK((*out)[1] == 2.0);
  }
  SUBCASE("leading run takes the first finite value") {
    data[0] = kNaN;
    data[1] = kNaN;
    data[2] = 5;
    const auto out = screen_and_interpolate(data, 12, policy);
    REQUIRE(out);
    CHECK((*out)[0] == 5);
    CHECK((*out)[1] == 5);
    CHECK((*out)[2] == 5);
  }
  SUBCASE("trailing run takes the last finite value") {
    data[kSampleLength - 3] = 4;
    data[kSampleLength - 2] = kNaN;
    data[kSampleLength - 1] = kNaN;
    const auto out = screen_and_interpolate(data, 12, policy);
    REQUIRE(out);
    CHECK((*out)[kSampleLength - 1] == 4);
  }
  SUBCASE("30 percent NaN is rejected") {
    for (int k = 10; k < 10 + 31; ++k) data[kSampleLength * 3 + k] = kNaN;
    CHECK(!screen_and_interpolate(data, 12, policy));
  }
  SUBCASE("threshold boundary") {
    for (int k = 0; k < 25; ++k) data[k] = kNaN;  // 25/102 < 0.25
    CHECK(screen_and_interpolate(data, 12, policy));
    data[25] = kNaN;  // 26/102 > 0.25
    CHECK(!screen_and_interpolate(data, 12, policy));
    CHECK(screen_and_interpolate(data, 12, NanPolicy{0.3}));
  }
  SUBCASE("all-NaN channel is rejected under any policy") {
    for (int k = 0; k < kSampleLength; ++k) data[kSampleLength * 11 + k] = kNaN;
    CHECK(!screen_and_interpolate(data, 12, NanPolicy{1.0}));
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(screen_and_interpolate(data, 14, policy), ShapeError); }
  SUBCASE("random gaps: no NaN survives and finite values are untouched") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      auto d = testing::uniform(rng, 12 * kSampleLength, -1, 1);
      const auto orig = d;
      for (int c = 0; c < 12; ++c) {
        const int start = static_cast<int>(rng() % kSampleLength);
        const int len = static_cast<int>(rng() % 25);
        for (int k = start; k < std::min(kSampleLength, start + len); ++k) d[c * kSampleLength + k] = kNaN;
      }
      const auto out = screen_and_interpolate(d, 12, policy);
      REQUIRE(out);
      for (std::size_t i = 0; i < d.size(); ++i) {
        REQUIRE(std::isfinite((*out)[i]));
        if (!std::isnan(d[i])) REQUIRE((*out)[i] == orig[i]);
      }
    }
  }
}

TEST_CASE("NanPolicy validation") {
  CHECK_THROWS_AS(NanPolicy{-0.1}.validate(), ValidationError);
  CHECK_THROWS_AS(NanPolicy{1.1}.validate(), ValidationError);
  CHECK_NOTHROW(NanPolicy{0.0}.validate());
}

TEST_CASE("standardizer arithmetic") {
  Standardizer st;
  st.modality = Modality::EyeNoPupil;
  st.mean.assign(12, 5.0);
  st.stddev.assign(12, 2.0);
  st.scope = "fold-0";
  Sample s;
  s.modality = Modality::EyeNoPupil;
  s.data.assign(12 * kSampleLength, 9.0);
  const Sample z = st.apply(s);
  CHECK(z.data[0] == 2.0);
  CHECK(z.transform_scope == "fold-0");
  CHECK_THROWS_AS(st.apply(z), ValidationError);
  Sample b = s;
  b.modality = Modality::Brain;
  CHECK_THROWS_AS(st.apply(b), ShapeError);
}

TEST_CASE("standardizer fitted on training data yields unit statistics") {
  std::mt19937_64 rng(8);
  std::vector<Sample> train;
  for (int i = 0; i < 40; ++i) train.push_back(sample_with(Modality::Brain, rng, 123.0, 40.0));
  const Standardizer st = fit_standardizer(train, Modality::Brain, "fold-3");
  st.apply_in_place(train);
  for (int c = 0; c < 14; ++c) {
    double sum = 0, ss = 0;
    for (const auto& s : train)
      for (double v : s.channel(c)) sum += v;
    const double n = 40.0 * kSampleLength;
    const double mu = sum / n;
    for (const auto& s : train)
      for (double v : s.channel(c)) ss += (v - mu) * (v - mu);
    CHECK(std::abs(mu) < 1e-9);
    CHECK(std::abs(ss / n - 1) < 1e-6);
  }
  for (const auto& s : train) CHECK(s.transform_scope == "fold-3");
}

TEST_CASE("standardizer fit errors") {
  std::mt19937_64 rng(9);
  std::vector<Sample> train{sample_with(Modality::Brain, rng, 0, 1)};
  for (int k = 0; k < kSampleLength; ++k) train[0].data[5 * kSampleLength + k] = 1.25;
  CHECK_THROWS_AS(fit_standardizer(train, Modality::Brain, "x"), FitError);
  CHECK_THROWS_AS(fit_standardizer({}, Modality::Brain, "x"), FitError);
  CHECK_THROWS_AS(fit_standardizer(train, Modality::EyeNoPupil, "x"), ShapeError);
}

TEST_CASE("build_dataset counts and canonical order") {
  SynthConfig cfg;
  cfg.n_subjects = 3;
  cfg.n_rounds = 2;
  cfg.dots_per_round = 25;
  cfg.blink_rate_per_min = 0;
  const auto recs = generate_synthetic(cfg);
  for (Modality m : {Modality::Brain, Modality::EyeNoPupil, Modality::EyeWithPupil}) {
    const Dataset ds = build_dataset(recs, m, NanPolicy{});
    CHECK(ds.samples.size() == 150);
    CHECK(ds.report.total().extracted == 150);
    CHECK(ds.report.total().rejected == 0);
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const Sample& s = ds.samples[i];
      REQUIRE(s.data.size() == static_cast<std::size_t>(channel_count(m)) * kSampleLength);
      CHECK(s.transform_scope.empty());
      if (i > 0) {
        const Sample& p = ds.samples[i - 1];
        CHECK(std::tie(p.subject_id, p.round_id, p.t0) < std::tie(s.subject_id, s.round_id, s.t0));
      }
    }
  }
}

TEST_CASE("blink-heavy corpus: rejected count equals an independent recount") {
  SynthConfig cfg;
  cfg.n_subjects = 3;
  cfg.n_rounds = 2;
  cfg.dots_per_round = 25;
  cfg.blink_rate_per_min = 240;
  cfg.seed = 12;
  const auto recs = generate_synthetic(cfg);
  const NanPolicy policy;

  int expected_rejected = 0, expected_skipped = 0;
  for (const auto& r : recs) {
    const Stream& s = *r.find_stream(Modality::EyeWithPupil);
    for (const auto& ev : r.events) {
      const double t0 = ev.t - 0.1, t1 = ev.t + 0.3;
      if (t0 < s.timestamps.front() || t1 > s.timestamps.back()) {
        ++expected_skipped;
        continue;
      }
      std::vector<double> ts, v;
      for (std::size_t k = 0; k < s.n_rows(); ++k)
        if (s.timestamps[k] >= t0 && s.timestamps[k] < t1) {
          ts.push_back(s.timestamps[k]);
          v.push_back(s.row(k)[0]);  // blinks blank every channel together
        }
      int nan = 0;
      for (int j = 0; j < kSampleLength; ++j) nan += std::isnan(interp_oracle(ts, v, t0 + j / 256.0));
      if (nan == kSampleLength || static_cast<double>(nan) / kSampleLength > policy.max_nan_fraction)
        ++expected_rejected;
    }
  }
  REQUIRE(expected_rejected > 0);
  const Dataset eye = build_dataset(recs, Modality::EyeWithPupil, policy);
  CHECK(eye.report.total().rejected == expected_rejected);
  CHECK(eye.report.total().skipped == expected_skipped);
  for (const auto& s : eye.samples)
    for (double x : s.data) REQUIRE(std::isfinite(x));

  const Dataset brain = build_dataset(recs, Modality::Brain, policy);
  CHECK(brain.report.total().rejected == 0);
  CHECK(brain.samples.size() == 150u - static_cast<std::size_t>(brain.report.total().skipped));
  CHECK(eye.report.to_json().find("\"rejected\": " + std::to_string(expected_rejected)) != std::string::npos);
}

TEST_CASE("samples do not depend on data outside their window") {
  SynthConfig cfg;
  cfg.n_subjects = 1;
  cfg.n_rounds = 1;
  cfg.dots_per_round = 6;
  auto recs = generate_synthetic(cfg);
  const Dataset before = build_dataset(recs, Modality::Brain, NanPolicy{});
  const EventMarker ev = recs[0].events[3];
  Stream& s = recs[0].streams[0];
  for (std::size_t k = 0; k < s.n_rows(); ++k)
    if (s.timestamps[k] < ev.t - 0.1 || s.timestamps[k] >= ev.t + 0.3)
      for (int c = 0; c < 14; ++c) s.values[k * 14 + c] += 100.0;
  const Dataset after = build_dataset(recs, Modality::Brain, NanPolicy{});
  CHECK(before.samples[3].data == after.samples[3].data);
  CHECK(before.samples[2].data != after.samples[2].data);
}

TEST_CASE("dataset file round trip") {
  testing::TempDir dir("ds");
  std::mt19937_64 rng(2);
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) {
    Sample s = sample_with(i % 2 ? Modality::Brain : Modality::EyeWithPupil, rng, 0, 1);
    s.subject_id = "S0" + std::to_string(i);
    s.round_id = i;
    s.dot_index = 24 - i;
    s.t0 = 0.1 * i + 1.0 / 3.0;
    if (i == 3) s.transform_scope = "fold-1";
    samples.push_back(s);
  }
  const auto path = dir / "x.ds";
  write_dataset(samples, path);
  const auto back = read_dataset(path);
  REQUIRE(back.size() == samples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].subject_id == samples[i].subject_id);
    CHECK(back[i].round_id == samples[i].round_id);
    CHECK(back[i].dot_index == samples[i].dot_index);
    CHECK(back[i].modality == samples[i].modality);
    CHECK(back[i].t0 == samples[i].t0);
    CHECK(back[i].transform_scope == samples[i].transform_scope);
    REQUIRE(back[i].data.size() == samples[i].data.size());
    for (std::size_t k = 0; k < back[i].data.size(); ++k)
      REQUIRE(back[i].data[k] == static_cast<double>(static_cast<float>(samples[i].data[k])));
  }
  // Writing the read-back samples reproduces the files byte for byte.
  const auto again = dir / "y.ds";
  write_dataset(back, again);
  CHECK(testing::slurp(path) == testing::slurp(again));

  const std::string idx = testing::slurp(dir / "x.ds.idx");
  CHECK(idx.rfind("BIOFUSE-DS-INDEX v1\nsamples 5 length 102\n", 0) == 0);

  {
    std::string bin = testing::slurp(path);
    std::ofstream(dir / "v2.ds", std::ios::binary) << "BIOFUSE-DS v2\n" << bin.substr(14);
    std::ofstream(dir / "v2.ds.idx", std::ios::binary) << idx;
    CHECK_THROWS_AS(read_dataset(dir / "v2.ds"), VersionError);
    std::ofstream(dir / "cut.ds", std::ios::binary) << bin.substr(0, bin.size() - 10);
    std::ofstream(dir / "cut.ds.idx", std::ios::binary) << idx;
    CHECK_THROWS_AS(read_dataset(dir / "cut.ds"), ParseError);
  }
  CHECK_THROWS_AS(read_dataset(dir / "missing.ds"), Error);
}
