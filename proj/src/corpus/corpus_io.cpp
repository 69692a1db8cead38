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

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "biofuse/corpus.hpp"
#include "biofuse/error.hpp"

namespace biofuse {
namespace {

constexpr std::string_view kMagic = "BIOFUSE-CORPUS";
constexpr std::string_view kVersion = "v1";

void append_double(std::string& out, double v) {
  if (std::isnan(v)) {
    out += "nan";
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

bool same_bits(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-empty line; false at EOF.
  bool next() {
    while (std::getline(in_, line_)) {
      ++line_no_;
      tokens_ = split(line_);
      if (!tokens_.empty()) return true;
    }
    return false;
  }

  void expect_next(std::string_view what) {
    if (!next()) fail("unexpected end of file, expected " + std::string(what));
  }

  const std::vector<std::string_view>& tokens() const { return tokens_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("corpus line " + std::to_string(line_no_) + ": " + msg);
  }

  double to_double(std::string_view tok) const {
    if (tok == "nan") return std::numeric_limits<double>::quiet_NaN();
    double v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail("invalid number '" + std::string(tok) + "'");
    return v;
  }

  long long to_int(std::string_view tok) const {
    long long v = 0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail("invalid integer '" + std::string(tok) + "'");
    return v;
  }

  std::size_t line_no() const { return line_no_; }

 private:
  std::istream& in_;
  std::string line_;
  std::vector<std::string_view> tokens_;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string_view modality_tag(Modality m) {
  switch (m) {
    case Modality::Brain: return "brain";
    case Modality::EyeNoPupil: return "eye";
    case Modality::EyeWithPupil: return "eye-pupil";
  }
  return "?";
}

Modality parse_modality(std::string_view tag) {
  if (tag == "brain") return Modality::Brain;
  if (tag == "eye") return Modality::EyeNoPupil;
  if (tag == "eye-pupil") return Modality::EyeWithPupil;
  throw ValidationError("unknown modality '" + std::string(tag) + "'");
}

const Stream* Recording::find_stream(Modality m) const {
  for (const auto& s : streams)
    if (s.modality == m) return &s;
  return nullptr;
}

bool bitwise_equal(const Recording& a, const Recording& b) {
  if (a.subject_id != b.subject_id || a.events != b.events || a.streams.size() != b.streams.size())
    return false;
  for (std::size_t i = 0; i < a.streams.size(); ++i) {
    const Stream& x = a.streams[i];
    const Stream& y = b.streams[i];
    if (x.modality != y.modality || !same_bits(x.nominal_rate_hz, y.nominal_rate_hz) ||
        x.timestamps.size() != y.timestamps.size() || x.values.size() != y.values.size())
      return false;
    for (std::size_t k = 0; k < x.timestamps.size(); ++k)
      if (!same_bits(x.timestamps[k], y.timestamps[k])) return false;
    for (std::size_t k = 0; k < x.values.size(); ++k)
      if (!same_bits(x.values[k], y.values[k])) return false;
  }
  return true;
}

bool bitwise_equal(const std::vector<Recording>& a, const std::vector<Recording>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bitwise_equal(a[i], b[i])) return false;
  return true;
}

void validate(const Recording& rec) {
  const std::string who = "recording '" + rec.subject_id + "': ";
  if (rec.subject_id.empty() || split(rec.subject_id).size() != 1 ||
      split(rec.subject_id)[0].size() != rec.subject_id.size())
    throw ValidationError(who + "subject id must be a non-empty token without whitespace");
  if (rec.streams.empty()) throw ValidationError(who + "recording has no streams");
  for (const auto& s : rec.streams) {
    if (!(s.nominal_rate_hz > 0)) throw ValidationError(who + "stream rate must be > 0");
    if (s.values.size() != s.timestamps.size() * static_cast<std::size_t>(s.n_channels()))
      throw ValidationError(who + "stream '" + std::string(modality_tag(s.modality)) +
                            "' value count does not match channel count");
    for (std::size_t i = 0; i < s.timestamps.size(); ++i) {
      if (!std::isfinite(s.timestamps[i]))
        throw ValidationError(who + "non-finite timestamp");
      if (i > 0 && !(s.timestamps[i] > s.timestamps[i - 1]))
        throw ValidationError(who + "timestamps not strictly increasing at row " + std::to_string(i));
    }
    if (s.modality == Modality::Brain) {
      for (double v : s.values)
        if (std::isnan(v)) throw ValidationError(who + "NaN in brain stream");
    }
  }
  std::map<int, double> last_in_round;
  for (const auto& e : rec.events) {
    if (e.round_id < 0) throw ValidationError(who + "negative round id");
    if (e.dot_index < 0 || e.dot_index > 24) throw ValidationError(who + "dot index out of [0, 24]");
    if (!std::isfinite(e.t)) throw ValidationError(who + "non-finite event time");
    auto [it, fresh] = last_in_round.try_emplace(e.round_id, e.t);
    if (!fresh) {
      if (!(it->second < e.t))
        throw ValidationError(who + "event markers within round " + std::to_string(e.round_id) +
                              " are not strictly increasing");
      it->second = e.t;
    }
  }
}

void write_corpus(const std::vector<Recording>& recs, std::ostream& out) {
  std::string buf;
  buf += kMagic;
  buf += ' ';
  buf += kVersion;
  buf += '\n';
  for (Modality m : {Modality::Brain, Modality::EyeNoPupil, Modality::EyeWithPupil}) {
    buf += "modality ";
    buf += modality_tag(m);
    buf += ' ' + std::to_string(channel_count(m)) + '\n';
  }
  buf += "recordings " + std::to_string(recs.size()) + '\n';
  out << buf;
  for (const auto& rec : recs) {
    validate(rec);
    buf.clear();
    buf += "recording " + rec.subject_id + ' ' + std::to_string(rec.streams.size()) + ' ' +
           std::to_string(rec.events.size()) + '\n';
    for (const auto& s : rec.streams) {
      buf += "stream ";
      buf += modality_tag(s.modality);
      buf += ' ';
      append_double(buf, s.nominal_rate_hz);
      buf += ' ' + std::to_string(s.n_rows()) + '\n';
      const int nc = s.n_channels();
      for (std::size_t r = 0; r < s.n_rows(); ++r) {
        append_double(buf, s.timestamps[r]);
        const double* row = s.row(r);
        for (int c = 0; c < nc; ++c) {
          buf += ' ';
          append_double(buf, row[c]);
        }
        buf += '\n';
      }
      out << buf;
      buf.clear();
    }
    for (const auto& e : rec.events) {
      buf += "event DotHit ";
      append_double(buf, e.t);
      buf += ' ' + std::to_string(e.round_id) + ' ' + std::to_string(e.dot_index) + '\n';
    }
    buf += "end\n";
    out << buf;
  }
  if (!out) throw Error("corpus: write failed");
}

void write_corpus(const std::vector<Recording>& recs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_corpus(recs, out);
}

std::vector<Recording> read_corpus(std::istream& in) {
  LineReader lr(in);
  if (!lr.next()) throw ParseError("corpus line 1: empty file");
  {
    const auto& t = lr.tokens();
    if (t.size() != 2 || t[0] != kMagic) lr.fail("missing 'BIOFUSE-CORPUS' header");
    if (t[1] != kVersion)
      throw VersionError("corpus line 1: unsupported format version '" + std::string(t[1]) +
                         "' (expected " + std::string(kVersion) + ")");
  }
  // Modality declarations must agree with the compiled-in channel counts.
  for (int i = 0; i < 3; ++i) {
    lr.expect_next("modality declaration");
    const auto& t = lr.tokens();
    if (t.size() != 3 || t[0] != "modality") lr.fail("expected 'modality <tag> <channels>'");
    Modality m{};
    try {
      m = parse_modality(t[1]);
    } catch (const ValidationError& e) {
      lr.fail(e.what());
    }
    if (lr.to_int(t[2]) != channel_count(m)) lr.fail("channel count mismatch for modality " + std::string(t[1]));
  }
  lr.expect_next("recordings count");
  if (lr.tokens().size() != 2 || lr.tokens()[0] != "recordings") lr.fail("expected 'recordings <n>'");
  const long long n_recs = lr.to_int(lr.tokens()[1]);
  if (n_recs < 0) lr.fail("negative recording count");

  std::vector<Recording> recs;
  for (long long r = 0; r < n_recs; ++r) {
    lr.expect_next("recording record");
    {
      const auto& t = lr.tokens();
      if (t.size() != 4 || t[0] != "recording") lr.fail("expected 'recording <subject> <streams> <events>'");
    }
    const std::size_t rec_line = lr.line_no();
    Recording rec;
    rec.subject_id = std::string(lr.tokens()[1]);
    const long long n_streams = lr.to_int(lr.tokens()[2]);
    const long long n_events = lr.to_int(lr.tokens()[3]);
    if (n_streams == 0) lr.fail("recording has no streams");
    if (n_streams < 0 || n_events < 0) lr.fail("negative count");
    for (long long s = 0; s < n_streams; ++s) {
      lr.expect_next("stream record");
      const auto& t = lr.tokens();
      if (t.size() != 4 || t[0] != "stream") lr.fail("expected 'stream <modality> <rate> <rows>'");
      Stream st;
      try {
        st.modality = parse_modality(t[1]);
      } catch (const ValidationError& e) {
        lr.fail(e.what());
      }
      st.nominal_rate_hz = lr.to_double(t[2]);
      if (!(st.nominal_rate_hz > 0)) lr.fail("stream rate must be > 0");
      const long long rows = lr.to_int(t[3]);
      if (rows < 0) lr.fail("negative row count");
      const int nc = st.n_channels();
      st.timestamps.reserve(static_cast<std::size_t>(rows));
      st.values.reserve(static_cast<std::size_t>(rows) * nc);
      for (long long k = 0; k < rows; ++k) {
        lr.expect_next("stream row");
        const auto& row = lr.tokens();
        if (static_cast<int>(row.size()) != nc + 1)
          lr.fail("expected " + std::to_string(nc + 1) + " fields, got " + std::to_string(row.size()));
        const double ts = lr.to_double(row[0]);
        if (!std::isfinite(ts)) lr.fail("non-finite timestamp");
        if (!st.timestamps.empty() && !(ts > st.timestamps.back()))
          lr.fail("timestamps not strictly increasing");
        st.timestamps.push_back(ts);
        for (int c = 0; c < nc; ++c) {
          const double v = lr.to_double(row[c + 1]);
          if (std::isnan(v) && st.modality == Modality::Brain) lr.fail("NaN in brain stream");
          st.values.push_back(v);
        }
      }
      rec.streams.push_back(std::move(st));
    }
    for (long long e = 0; e < n_events; ++e) {
      lr.expect_next("event record");
      const auto& t = lr.tokens();
      if (t.size() != 5 || t[0] != "event") lr.fail("expected 'event DotHit <t> <round> <dot>'");
      if (t[1] != "DotHit") lr.fail("unknown event kind '" + std::string(t[1]) + "'");
      EventMarker ev;
      ev.t = lr.to_double(t[2]);
      ev.round_id = static_cast<int>(lr.to_int(t[3]));
      ev.dot_index = static_cast<int>(lr.to_int(t[4]));
      rec.events.push_back(ev);
    }
    lr.expect_next("'end'");
    if (lr.tokens().size() != 1 || lr.tokens()[0] != "end") lr.fail("expected 'end'");
    try {
      validate(rec);
    } catch (const ValidationError& e) {
      throw ParseError("corpus record at line " + std::to_string(rec_line) + ": " + e.what());
    }
    recs.push_back(std::move(rec));
  }
  if (lr.next()) lr.fail("trailing data after last recording");
  return recs;
}

std::vector<Recording> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus '" + path.string() + "'");
  return read_corpus(in);
}

}  // namespace biofuse
