#include "dbwave/report.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace dbwave {

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_from_columns(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size())
    throw std::invalid_argument("csv: one name per column required");
  if (names.empty()) throw std::invalid_argument("csv: at least one column required");
  const std::size_t rows = columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw std::invalid_argument("csv: ragged columns");
  std::string out;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) out += ',';
    out += names[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (j) out += ',';
      out += format_g17(columns[j][i]);
    }
    out += '\n';
  }
  return out;
}

std::string trajectory_csv(const TrajectoryRecord& rec) {
  return csv_from_columns({"t", "E", "h0_norm", "diss_bulk", "diss_surf", "energy_residual"},
                          {rec.times, rec.energy, rec.h0, rec.diss_bulk, rec.diss_surf,
                           rec.energy_residual});
}

std::string series_csv(const std::map<std::string, std::vector<double>>& series) {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  if (series.count("t")) {
    names.push_back("t");
    columns.push_back(series.at("t"));
  }
  for (const auto& [name, values] : series) {
    if (name == "t") continue;
    names.push_back(name);
    columns.push_back(values);
  }
  return csv_from_columns(names, columns);
}

nlohmann::json probe_summary(const ProbeReport& rep) {
  nlohmann::json j;
  j["claim"] = rep.claim;
  j["pass"] = rep.pass;
  j["scalars"] = rep.scalars;
  j["notes"] = rep.notes;
  return j;
}

nlohmann::json scan_summary(const ScanReport& rep) {
  nlohmann::json j;
  j["claim"] = rep.claim;
  j["method"] = rep.method;
  j["grid"] = rep.grid;
  j["values"] = rep.values;
  j["slope"] = rep.slope;
  j["constant"] = rep.constant;
  j["window_lo"] = rep.window_lo;
  j["window_hi"] = rep.window_hi;
  j["sup_value"] = rep.sup_value;
  j["pass"] = rep.pass;
  j["extra"] = rep.extra;
  return j;
}

std::string hash_hex(const std::string& content) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : content) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace dbwave
