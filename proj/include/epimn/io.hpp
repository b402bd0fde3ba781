#pragma once

// File formats: observation / trajectory / trace CSVs and JSON run configs.
// Compartment indices in files are 1-based.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "epimn/filter.hpp"
#include "epimn/simulate.hpp"
#include "epimn/smooth.hpp"

namespace epimn::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

/// Comma-separated rows with a header; blank lines skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const fs::path& path);

/// Rows t,i,y,q for entries with q > 0.
void write_obs_x(const fs::path& path, const ObservationsX& obs);
/// Rows t,i,j,y,q for entries with q > 0.
void write_obs_z(const fs::path& path, const ObservationsZ& obs);
/// horizon < 0 means the largest t in the file.
ObservationsX read_obs_x(const fs::path& path, int m, int horizon = -1);
ObservationsZ read_obs_z(const fs::path& path, int m, int horizon = -1);

/// t then one column per compartment.
void write_latent(const fs::path& path, const LatentTrajectory& traj, const std::vector<std::string>& names);
/// Nonzero transition counts as t,i,j,z.
void write_transitions(const fs::path& path, const LatentTrajectory& traj);

void write_filter_trace(const fs::path& path, const FilterTraceX& trace);
void write_filter_trace(const fs::path& path, const FilterTraceZ& trace);
void write_smooth_trace(const fs::path& path, const SmoothTraceX& trace);
void write_smooth_trace(const fs::path& path, const SmoothTraceZ& trace);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

/// {"family", "n", "pi0" | "x0", "theta": {...}, "schedules": {...}}. x0 sets pi0 = x0 / n.
ModelSpec model_from_json(const json& j);
json model_to_json(const ModelSpec& spec);

/// Reporting description: {"form": "x", "q": [...]} or {"form": "z", "entries": [{"i","j","q"}]}.
struct ReportingSpec {
  bool z_form = true;
  Vec q_x;
  Mat q_z;
};
ReportingSpec reporting_from_json(const json& j, int m);

}  // namespace epimn::io
