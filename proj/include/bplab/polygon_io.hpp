/*
 * Copyright (C) 2026 The bplab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Scored polygon text format shared by proposal dumps and prediction files:
// one polygon per line, "score;x1,y1,...,xk,yk".

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bplab/geometry.hpp"

namespace bplab {

struct ScoredPolygon {
  Polygon points;
  double score = 0.0;
};

namespace detail {

inline double parse_double(std::string_view tok) {
  while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
  while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r'))
    tok.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || tok.empty())
    throw std::invalid_argument("bad number '" + std::string(tok) + "'");
  return v;
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace detail

inline std::string format_scored_line(const ScoredPolygon& p) {
  std::string s = detail::fmt(p.score) + ';';
  for (std::size_t i = 0; i < p.points.size(); ++i) {
    if (i) s += ',';
    s += detail::fmt(p.points[i].x) + ',' + detail::fmt(p.points[i].y);
  }
  return s;
}

inline ScoredPolygon parse_scored_line(std::string_view line) {
  const std::size_t semi = line.find(';');
  if (semi == std::string_view::npos) throw std::invalid_argument("missing ';' after score");
  ScoredPolygon out;
  out.score = detail::parse_double(line.substr(0, semi));
  std::vector<double> values;
  std::string_view rest = line.substr(semi + 1);
  std::size_t pos = 0;
  while (pos <= rest.size()) {
    std::size_t next = rest.find(',', pos);
    if (next == std::string_view::npos) next = rest.size();
    values.push_back(detail::parse_double(rest.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (values.size() % 2 != 0 || values.size() < 6)
    throw std::invalid_argument("polygon needs an even number of coordinates, at least 6");
  for (std::size_t i = 0; i < values.size(); i += 2) out.points.push_back({values[i], values[i + 1]});
  return out;
}

inline std::vector<ScoredPolygon> read_scored_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<ScoredPolygon> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_scored_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_scored_file(const std::string& path, std::span<const ScoredPolygon> polys) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : polys) out << format_scored_line(p) << '\n';
}

}  // namespace bplab
