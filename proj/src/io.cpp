#include "nhqlif/io.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nhqlif {

namespace {

std::string gamma_tag(double gamma) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.2f", gamma);
  return buf;
}

std::string time_tag(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "delta_t%g", t);
  return buf;
}

void record(RunResult& out, const std::string& task, double residual) {
  out.residuals.push_back({task, residual});
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw std::invalid_argument("CSV row has " + std::to_string(cells.size()) + " cells, expected " +
                                std::to_string(header_.size()));
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& row : rows_) line(row);
  return out;
}

std::map<std::string, std::string> scissors_csv(const std::vector<ScissorsPair>& pairs) {
  std::map<std::string, std::string> files;
  for (const auto& pair : pairs) {
    CsvTable table({"time", "T_RL", "T_LR", "delta"});
    const auto delta = pair.delta();
    for (std::size_t k = 0; k < pair.t_rl.times.size(); ++k) {
      table.add_row({format_number(pair.t_rl.times[k]), format_number(pair.t_rl.values[k]),
                     format_number(pair.t_lr.values[k]), format_number(delta[k])});
    }
    files["scissors_gamma" + gamma_tag(pair.gamma) + ".csv"] = table.str();
  }
  return files;
}

std::string gamma_scan_csv(const GammaScanResult& scan) {
  std::vector<std::string> header{"gamma"};
  for (const auto& [t, values] : scan.delta_at_t) header.push_back(time_tag(t));
  CsvTable table(header);
  for (std::size_t i = 0; i < scan.gammas.size(); ++i) {
    std::vector<std::string> row{format_number(scan.gammas[i])};
    for (const auto& [t, values] : scan.delta_at_t) row.push_back(format_number(values[i]));
    table.add_row(std::move(row));
  }
  return table.str();
}

std::string xi_scan_csv(const XiScanResult& scan) {
  CsvTable table({"xi", "gamma", time_tag(scan.sample_time)});
  for (std::size_t i = 0; i < scan.xis.size(); ++i) {
    table.add_row({format_number(scan.xis[i]), format_number(scan.gammas[i]),
                   format_number(scan.delta_T[i])});
  }
  return table.str();
}

std::map<std::string, std::string> sublattice_csv(const SublatticeComparison& cmp) {
  std::map<std::string, std::string> files;
  for (const auto& curve : cmp.curves) {
    CsvTable table({"gamma", time_tag(cmp.sample_time)});
    for (std::size_t i = 0; i < cmp.gammas.size(); ++i) {
      table.add_row({format_number(cmp.gammas[i]), format_number(curve.delta[i])});
    }
    files["sublattice_" + curve.config.label + ".csv"] = table.str();
  }
  return files;
}

std::string lightcone_csv(const std::vector<OnsetCurve>& curves) {
  CsvTable table({"gamma", "d", "t_star", "v_eff_fit"});
  for (const auto& curve : curves) {
    for (std::size_t i = 0; i < curve.distances.size(); ++i) {
      const auto& t = curve.onset_times[i];
      table.add_row({format_number(curve.gamma), std::to_string(curve.distances[i]),
                     t ? format_number(*t) : std::string{}, format_number(curve.v_eff)});
    }
  }
  return table.str();
}

std::string oscillation_csv(const std::vector<OscillationReport>& reports) {
  CsvTable table({"L", "gamma", "period", "amplitude"});
  for (const auto& r : reports) {
    table.add_row({std::to_string(r.n_sites), format_number(r.gamma), format_number(r.period),
                   format_number(r.amplitude)});
  }
  return table.str();
}

std::string table1_csv(const std::vector<Table1Row>& rows) {
  CsvTable table({"gamma", "r", "xi", "direction", "ipr_theory", "ipr_numeric"});
  for (const auto& row : rows) {
    table.add_row({format_number(row.gamma), format_number(row.skin.r), format_number(row.skin.xi),
                   to_string(row.skin.direction), format_number(row.skin.ipr_th),
                   format_number(row.mean_ipr)});
  }
  return table.str();
}

std::string table2_csv(const std::vector<Table2Row>& rows) {
  CsvTable table({"t2", "phase", "v_max_numeric", "v_max_formula"});
  for (const auto& row : rows) {
    table.add_row({format_number(row.t2), to_string(row.phase), format_number(row.v_max_numeric),
                   format_number(row.v_max_formula)});
  }
  return table.str();
}

std::string spectrum_csv(const Spectrum& spectrum) {
  CsvTable table({"index", "re_E", "im_E", "ipr"});
  for (Eigen::Index i = 0; i < spectrum.eigenvalues.size(); ++i) {
    table.add_row({std::to_string(i), format_number(spectrum.eigenvalues(i).real()),
                   format_number(spectrum.eigenvalues(i).imag()),
                   format_number(ipr_numeric(spectrum.right.col(i)))});
  }
  return table.str();
}

RunResult run_experiment(const RunConfig& config, unsigned jobs) {
  validate(config);
  const ExperimentSetup setup = config.setup(jobs);
  RunResult out;

  switch (config.experiment) {
    case Experiment::scissors: {
      const auto pairs = run_scissors(setup);
      out.files = scissors_csv(pairs);
      for (const auto& p : pairs) {
        record(out, "scissors gamma=" + format_number(p.gamma),
               std::max(p.t_rl.max_biorth_residual, p.t_lr.max_biorth_residual));
      }
      break;
    }
    case Experiment::gamma_scan: {
      const auto scan = run_gamma_scan(setup, gamma_grid());
      out.files["gamma_scan.csv"] = gamma_scan_csv(scan);
      for (std::size_t i = 0; i < scan.gammas.size(); ++i) {
        record(out, "gamma-scan gamma=" + format_number(scan.gammas[i]), scan.biorth_residuals[i]);
      }
      for (const auto& [t, g] : scan.peak_gamma_pos) {
        out.metadata["peak_gamma_pos_t" + format_number(t)] = g;
      }
      for (const auto& [t, g] : scan.peak_gamma_neg) {
        out.metadata["peak_gamma_neg_t" + format_number(t)] = g;
      }
      break;
    }
    case Experiment::xi_scan: {
      for (auto branch : {SkinDirection::left, SkinDirection::right}) {
        const auto scan = run_xi_scan(setup, branch, default_xi_targets());
        const std::string tag = branch == SkinDirection::left ? "pos" : "neg";
        out.files["xi_scan_" + tag + ".csv"] = xi_scan_csv(scan);
        out.metadata["xi_opt_" + tag] = scan.xi_opt;
        for (std::size_t i = 0; i < scan.xis.size(); ++i) {
          record(out, "xi-scan " + tag + " xi=" + format_number(scan.xis[i]),
                 scan.biorth_residuals[i]);
        }
      }
      break;
    }
    case Experiment::sublattice: {
      const auto cmp = run_sublattice_comparison(
          setup, gamma_grid(), default_sublattice_configs(config.j0, config.d, config.params.sites()));
      out.files = sublattice_csv(cmp);
      for (const auto& curve : cmp.curves) {
        out.metadata["offset_at_zero_" + curve.config.label] = curve.offset_at_zero;
        double worst = 0.0;
        for (double r : curve.biorth_residuals) worst = std::max(worst, r);
        record(out, "sublattice " + curve.config.label, worst);
      }
      break;
    }
    case Experiment::lightcone: {
      const auto curves = run_lightcone(setup);
      out.files["lightcone.csv"] = lightcone_csv(curves);
      for (const auto& c : curves) {
        const std::string g = format_number(c.gamma);
        out.metadata["v_eff_sites_gamma" + g] = c.v_eff;
        out.metadata["v_eff_cells_gamma" + g] = c.v_eff_cells;
        out.metadata["blocking_gamma" + g] = c.blocking ? 1.0 : 0.0;
        record(out, "lightcone gamma=" + g, c.max_biorth_residual);
      }
      break;
    }
    case Experiment::oscillation: {
      const auto reports = run_oscillation(setup);
      out.files["oscillation.csv"] = oscillation_csv(reports);
      for (const auto& r : reports) {
        const std::string task =
            "oscillation L=" + std::to_string(r.n_sites) + " gamma=" + format_number(r.gamma);
        out.metadata["delta_e_implied L=" + std::to_string(r.n_sites) +
                     " gamma=" + format_number(r.gamma)] = r.delta_e_implied;
        record(out, task, r.max_biorth_residual);
      }
      break;
    }
    case Experiment::tables: {
      out.files["table1.csv"] = table1_csv(build_table1(config.params));
      out.files["table2.csv"] = table2_csv(build_table2(config.params.t1));
      break;
    }
    case Experiment::spectrum: {
      const Spectrum s = diagonalize_unchecked(build_hamiltonian(config.params));
      out.files["spectrum.csv"] = spectrum_csv(s);
      record(out, "spectrum gamma=" + format_number(config.params.gamma), s.biorth_residual);
      break;
    }
  }
  return out;
}

std::string sha256_hex(const std::string& content) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(content.data(), content.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw IoError("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

std::vector<EmittedFile> emit_csv(const RunConfig& config, const RunResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir(config.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string() +
                  (ec ? ": " + ec.message() : std::string{}));
  }
  std::vector<EmittedFile> emitted;
  for (const auto& [name, content] : result.files) {
    const fs::path path = dir / name;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os << content;
    os.close();
    if (!os) throw IoError("failed writing " + path.string());
    emitted.push_back({name, sha256_hex(content), content.size()});
  }
  return emitted;
}

std::filesystem::path emit_json_manifest(const RunConfig& config, const RunResult& result,
                                         const std::vector<EmittedFile>& files,
                                         double wall_seconds) {
  using nlohmann::json;
  json m;
  m["tool"] = "nhqlif";
  m["version"] = kVersion;
  m["experiment"] = to_string(config.experiment);
  json cfg = json::object();
  for (const auto& [key, value] : config_entries(config)) cfg[key] = value;
  m["config"] = cfg;
  m["wall_seconds"] = wall_seconds;

  json residuals = json::array();
  for (const auto& r : result.residuals) {
    json entry{{"task", r.task}, {"oracle_fallback", !(r.residual < kBiorthTolerance)}};
    entry["residual"] = std::isfinite(r.residual) ? json(r.residual) : json(nullptr);
    residuals.push_back(entry);
  }
  m["biorth_residuals"] = residuals;

  json meta = json::object();
  for (const auto& [key, value] : result.metadata) {
    meta[key] = std::isfinite(value) ? json(value) : json(nullptr);
  }
  m["metadata"] = meta;

  json list = json::array();
  for (const auto& f : files) list.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  m["files"] = list;

  const auto path = std::filesystem::path(config.out_dir) / "manifest.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << m.dump(2) << '\n';
  os.close();
  if (!os) throw IoError("failed writing " + path.string());
  return path;
}

RunConfig config_from_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open manifest " + manifest.string());
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(manifest.string() + ": malformed manifest: " + e.what());
  }
  if (!m.contains("config") || !m["config"].is_object()) {
    throw ConfigError(manifest.string() + ": manifest has no config object");
  }
  std::vector<Setting> settings;
  for (const auto& [key, value] : m["config"].items()) {
    if (!value.is_string()) throw ConfigError(manifest.string() + ": config value for " + key + " is not a string");
    settings.push_back({key, value.get<std::string>(), manifest.string() + ":config." + key});
  }
  return apply_settings(RunConfig{}, settings);
}

}  // namespace nhqlif
