#pragma once

#include "dbwave/experiments.hpp"

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

namespace dbwave {

/// Shortest exact decimal form of x at 17 significant digits ('.' decimal
/// separator, C locale), the fixed cell format of every emitted CSV.
std::string format_g17(double x);

/// Comma-separated table: header row from names, one row per index, '\n'
/// line endings.  Throws std::invalid_argument on ragged columns.
std::string csv_from_columns(const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& columns);

/// The standard trajectory table: t, E, h0_norm, diss_bulk, diss_surf,
/// energy_residual.
std::string trajectory_csv(const TrajectoryRecord& rec);

/// Probe series as a table: the "t" column first when present, the rest in
/// sorted key order.
std::string series_csv(const std::map<std::string, std::vector<double>>& series);

/// JSON summary of a probe outcome: claim, pass, scalars, notes.
nlohmann::json probe_summary(const ProbeReport& rep);

/// JSON summary of a scan outcome: claim, method, grid/values, fit, extra.
nlohmann::json scan_summary(const ScanReport& rep);

/// FNV-1a 64-bit hash as 16 hex digits.
std::string hash_hex(const std::string& content);

/// Write content byte-for-byte (binary stream, so '\n' stays '\n').
void write_file(const std::string& path, const std::string& content);

}  // namespace dbwave
