#pragma once

#include <optional>
#include <string>
#include <vector>

#include "skembed/law.hpp"
#include "skembed/simulate.hpp"

namespace skembed {

struct MeasureConfig {
  std::vector<Atom> atoms;  // direct atoms, or
  std::optional<PiecewiseConstantDensity> density;
  std::size_t n_atoms = 0;  // quantization count for the density route
};

struct CurveConfig {
  CurvePreset preset = CurvePreset::custom;
  double x = 0.0;
  std::vector<CurveBreakpoint> custom;
  std::string label() const;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool json = true;
};

struct CompareConfig {
  std::vector<CurveConfig> curves;
  std::string psi_name = "square";
  double psi_exponent = 2.0;
  double level_x = 0.0;
};

/// One reproducible experiment: a measure source, a curve source, grid and
/// simulation controls, output destinations. Parsed from a single JSON file
/// ("schema": 1); unknown fields are rejected.
struct RunConfig {
  int schema = 1;
  MeasureConfig measure;
  CurveConfig curve;
  GridControl grid;
  SimConfig sim;
  OutputConfig outputs;
  std::optional<CompareConfig> compare;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

CenteredAtomicMeasure make_measure(const MeasureConfig& mc);
EmbeddingCurve make_curve(const CurveConfig& cc, const CenteredAtomicMeasure& mu);

struct BuiltPipeline {
  CenteredAtomicMeasure mu;
  PotentialFunction c;
  EmbeddingCurve curve;
  TangentProfile profile;
  AdmissibilityReport adm;
  EmbeddingSpec spec;
};

BuiltPipeline build_pipeline(const RunConfig& cfg);

// File formats: floating point is serialized with 17 significant digits so
// that a written table reads back bit-identically.
void write_profile_csv(const std::string& path, const TangentProfile& profile);
void write_spec_csv(const std::string& path, const EmbeddingSpec& spec);
EmbeddingSpec read_spec_csv(const std::string& path);
void write_exitlaw_csv(const std::string& path, const ExitLaw& law);
std::string admissibility_json(const AdmissibilityReport& rep, ProfileEnd end_reason);
std::string summary_json(const StatsReport& rep, const RunConfig& cfg);
void write_ecdf_csv(const std::string& path, std::vector<double> values, std::size_t max_rows);

// Subcommands; exit codes: 0 ok, 2 validation failure, 3 numerical failure.
int cmd_build(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);
int cmd_compare(const RunConfig& cfg);
int cmd_verify(const RunConfig& cfg);

/// Exit-code bucket for a typed error.
int exit_code_for(Errc code);

}  // namespace skembed
