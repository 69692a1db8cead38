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

// Little-endian helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "biofuse/error.hpp"

namespace biofuse::detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

inline std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError(what + ": truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline float get_f32(std::istream& in, const std::string& what) {
  return std::bit_cast<float>(get_u32(in, what));
}

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& what) {
  const std::uint32_t n = get_u32(in, what);
  if (n > (1u << 20)) throw ParseError(what + ": implausible string length");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw ParseError(what + ": truncated file");
  return s;
}

// Reads a '\n'-terminated header line; throws ParseError on EOF.
inline std::string get_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(what + ": truncated file");
  return line;
}

// Checks "<magic> v<N>" and raises VersionError for a known magic with the
// wrong version.
inline void expect_magic(const std::string& line, const std::string& magic, const std::string& version,
                         const std::string& what) {
  const auto sp = line.find(' ');
  if (sp == std::string::npos || line.substr(0, sp) != magic)
    throw ParseError(what + ": bad magic, expected '" + magic + "'");
  if (line.substr(sp + 1) != version)
    throw VersionError(what + ": unsupported version '" + line.substr(sp + 1) + "', expected " + version);
}

}  // namespace biofuse::detail
