// Data ingestion and artifact serialization: discharge CSVs, cell-parameter
// documents, chain files, and the shared artifact conventions (embedded
// config and seed, no timestamps).
#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "dfnid/bayes.hpp"
#include "dfnid/degrade.hpp"
#include "dfnid/identify.hpp"

namespace dfnid {

using json = nlohmann::json;

// One measured RPT discharge, as stored on disk.
struct DischargeCurve {
  std::string cell_id;
  int cycle = 0;
  std::string c_rate_tag;  // canonical C/5 | 1C | 2C, or numeric text
  double c_rate = 1.0;
  double soh = 1.0;
  std::vector<double> t_s, current_a, voltage_v;

  FitSeries to_fit_series() const;
};

// Canonicalizes a rate tag ("C/5", "1C", "0.2", "2C") and returns its value.
std::string canonical_c_rate_tag(const std::string& raw, double* value);

struct ParseIssue {
  int line = 0;
  std::string message;
};

struct DischargeParse {
  std::vector<DischargeCurve> curves;
  std::vector<ParseIssue> rejected;
};

// Header: cell_id,cycle,c_rate,soh,t_s,current_A,voltage_V (any column
// order). Rows are grouped by (cell, cycle, rate), sorted by time; malformed
// rows are rejected with their line numbers. Throws on missing columns or an
// empty file.
DischargeParse parse_discharge_csv(const std::string& path);

void write_discharge_csv(const std::string& path,
                         const std::vector<DischargeCurve>& curves,
                         const json& config);

// Cell parameter documents: unit-annotated keys, one document per cell;
// missing keys fall back to the tabulated defaults and are logged.
Materials materials_from_json(const json& doc);
Materials load_materials(const std::string& path);
json materials_to_json(const Materials& mat);

// Chain files: `# meta {json}` header plus one row per stored iteration.
struct ChainMeta {
  std::string cell_id;
  int cycle = 0;
  std::string c_rate_tag;
  double c_rate = 1.0;
  double soh = 1.0;
  double sigma_v = 0.01;
};

void write_chain_csv(const std::string& path, const PosteriorChain& chain,
                     const ChainMeta& meta, const json& config);
std::pair<PosteriorChain, ChainMeta> read_chain_csv(const std::string& path);

void write_histogram_csv(const std::string& path,
                         const MarginalHistogram& hist, const json& config);

// Table-shaped verdict rows.
struct VerdictRow {
  std::string c_rate_tag;
  double soh = 1.0;
  int cycle = 0;
  std::string param;
  IdentifiabilityVerdict verdict;
};

// Header: c_rate,soh_pct,cycle,param,map_log10,lower_log10,upper_log10,class
// with the unbounded sentinel serialized as "+inf".
void write_verdicts_csv(const std::string& path,
                        const std::vector<VerdictRow>& rows,
                        const json& config);

void write_region_csvs(const std::string& dir, const std::string& stem,
                       const ConfidenceRegion2D& region, const json& config);

// Trajectory points: param,c_rate,soh,map_log10,var_log10 (+cell/cycle).
void write_trajectory_csv(const std::string& path,
                          const std::vector<TrajectoryPoint>& pts,
                          const json& config);
std::vector<TrajectoryPoint> read_trajectory_csv(const std::string& path);

void write_band_csv(const std::string& path,
                    const std::vector<BandPoint>& band, const json& config);

void write_json_doc(const std::string& path, const json& doc);
json read_json_doc(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace dfnid
