// Run configuration, CSV/manifest serialization and experiment dispatch.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nhqlif/experiments.hpp"

namespace nhqlif {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment { scissors, gamma_scan, xi_scan, sublattice, lightcone, oscillation, tables, spectrum };

std::string to_string(Experiment e);
std::optional<Experiment> parse_experiment(const std::string& name);

/// Bad configuration; the message names the offending line or flag.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output path could not be written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Experiment experiment = Experiment::scissors;
  ModelParams params;
  int j0 = 20;
  int d = 6;
  double dt = 0.05;
  double t_max = 20.0;
  double epsilon = 1e-6;
  std::string out_dir = "out";

  [[nodiscard]] ExperimentSetup setup(unsigned jobs) const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// One `key value` setting with a human-readable origin ("run.cfg:3", "--dt").
struct Setting {
  std::string key;
  std::string value;
  std::string origin;
};

/// Parses `key = value` lines; blank lines and `#` comments are skipped.
std::vector<Setting> parse_config_text(const std::string& text, const std::string& source);

/// Defaults, then the file (if any), then the flag overrides, then validation.
RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const std::vector<Setting>& overrides = {});

/// Applies settings on top of `base` and validates the result.
RunConfig apply_settings(RunConfig base, const std::vector<Setting>& settings);

/// Throws ConfigError when the geometry or numerics are out of range.
void validate(const RunConfig& config);

/// Config file text that parses back into an equal RunConfig.
std::string render_config(const RunConfig& config);

/// Key/value pairs of the effective configuration (shared by the renderer and the manifest).
std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig& config);

/// 12 significant digits, "nan"/"inf" spelled out.
std::string format_number(double x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  [[nodiscard]] std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// A residual observed while computing one task; >= kBiorthTolerance means
/// the Taylor oracle was used.
struct ResidualRecord {
  std::string task;
  double residual = 0.0;
};

/// CSV contents keyed by file name plus diagnostics; nothing touches disk.
struct RunResult {
  std::map<std::string, std::string> files;
  std::vector<ResidualRecord> residuals;
  std::map<std::string, double> metadata;  // scalar summaries echoed into the manifest
};

std::map<std::string, std::string> scissors_csv(const std::vector<ScissorsPair>& pairs);
std::string gamma_scan_csv(const GammaScanResult& scan);
std::string xi_scan_csv(const XiScanResult& scan);
std::map<std::string, std::string> sublattice_csv(const SublatticeComparison& cmp);
std::string lightcone_csv(const std::vector<OnsetCurve>& curves);
std::string oscillation_csv(const std::vector<OscillationReport>& reports);
std::string table1_csv(const std::vector<Table1Row>& rows);
std::string table2_csv(const std::vector<Table2Row>& rows);
std::string spectrum_csv(const Spectrum& spectrum);

/// Runs the configured experiment and renders its CSV files.
RunResult run_experiment(const RunConfig& config, unsigned jobs = 0);

struct EmittedFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

std::string sha256_hex(const std::string& content);

/// Writes every file of `result` into config.out_dir; single writer.
std::vector<EmittedFile> emit_csv(const RunConfig& config, const RunResult& result);

/// Writes manifest.json next to the CSVs and returns its path.
std::filesystem::path emit_json_manifest(const RunConfig& config, const RunResult& result,
                                         const std::vector<EmittedFile>& files,
                                         double wall_seconds);

/// Rebuilds the RunConfig echoed in a manifest.
RunConfig config_from_manifest(const std::filesystem::path& manifest);

}  // namespace nhqlif
