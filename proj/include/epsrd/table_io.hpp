#pragma once

// CSV and JSON forms of a CurveTable. The CSV header is fixed; numbers are
// printed with 12 significant digits, empty fields mean "not computed" and
// the flags column is a ';'-separated list.

#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "epsrd/sweep.hpp"

namespace epsrd {

inline constexpr std::string_view kCsvHeader = "s,D,R_slb,R_u,R_au,R_ge,R_trivial,R_ba,flags";

namespace detail {

inline constexpr std::string_view kRawSuffix = "_clamped_raw=";

inline std::string join_flags(const CurveRow& row) {
  std::string out;
  const auto add = [&](const std::string& f) {
    if (!out.empty()) out += ';';
    out += f;
  };
  for (std::size_t b = 0; b < kBoundCount; ++b) {
    if (row.raw[b]) add(std::string(kBoundNames[b]) + std::string(kRawSuffix) + format_number(*row.raw[b]));
  }
  for (const auto& f : row.flags) add(f);
  return out;
}

inline double parse_number(const std::string& text, std::size_t line_no) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw std::invalid_argument("curve CSV line " + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return v;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const CurveTable& table) {
  out << kCsvHeader << '\n';
  for (const auto& row : table.rows) {
    out << format_number(row.s) << ',' << format_number(row.d);
    for (const auto& v : row.rate) {
      out << ',';
      if (v) out << format_number(*v);
    }
    out << ',' << detail::join_flags(row) << '\n';
  }
}

inline std::string to_csv(const CurveTable& table) {
  std::ostringstream out;
  write_csv(out, table);
  return out.str();
}

/// Inverse of write_csv. The unit is not stored in CSV and is supplied by the
/// caller.
inline CurveTable parse_csv(std::istream& in, Units units = Units::nats) {
  CurveTable table;
  table.units = units;
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw std::invalid_argument("curve CSV: expected header '" + std::string(kCsvHeader) + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      if (comma == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    if (fields.size() != 3 + kBoundCount) {
      throw std::invalid_argument("curve CSV line " + std::to_string(line_no) + ": expected 9 fields");
    }
    CurveRow row;
    row.s = detail::parse_number(fields[0], line_no);
    row.d = detail::parse_number(fields[1], line_no);
    for (std::size_t b = 0; b < kBoundCount; ++b) {
      if (!fields[2 + b].empty()) row.rate[b] = detail::parse_number(fields[2 + b], line_no);
    }
    const std::string& flags = fields.back();
    std::size_t pos = 0;
    while (pos < flags.size()) {
      const auto semi = std::min(flags.find(';', pos), flags.size());
      const std::string token = flags.substr(pos, semi - pos);
      pos = semi + 1;
      if (token.empty()) continue;
      bool is_raw = false;
      for (std::size_t b = 0; b < kBoundCount; ++b) {
        const std::string prefix = std::string(kBoundNames[b]) + std::string(detail::kRawSuffix);
        if (token.rfind(prefix, 0) == 0) {
          row.raw[b] = detail::parse_number(token.substr(prefix.size()), line_no);
          is_raw = true;
          break;
        }
      }
      if (!is_raw) row.flags.push_back(token);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline nlohmann::json to_json(const CurveTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json j;
    j["s"] = row.s;
    j["D"] = row.d;
    for (std::size_t b = 0; b < kBoundCount; ++b) {
      const std::string key(kRateColumns[b]);
      j[key] = row.rate[b] ? nlohmann::json(*row.rate[b]) : nlohmann::json(nullptr);
      if (row.raw[b]) j["raw"][key] = *row.raw[b];
    }
    j["flags"] = row.flags;
    rows.push_back(std::move(j));
  }
  return {{"units", std::string(to_string(table.units))}, {"rows", std::move(rows)}};
}

inline CurveTable from_json(const nlohmann::json& doc) {
  CurveTable table;
  table.units = doc.at("units").get<std::string>() == "bits" ? Units::bits : Units::nats;
  for (const auto& j : doc.at("rows")) {
    CurveRow row;
    row.s = j.at("s").get<double>();
    row.d = j.at("D").get<double>();
    for (std::size_t b = 0; b < kBoundCount; ++b) {
      const std::string key(kRateColumns[b]);
      if (!j.at(key).is_null()) row.rate[b] = j.at(key).get<double>();
      if (j.contains("raw") && j["raw"].contains(key)) row.raw[b] = j["raw"][key].get<double>();
    }
    row.flags = j.at("flags").get<std::vector<std::string>>();
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace epsrd
