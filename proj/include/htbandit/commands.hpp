#pragma once

// Subcommand implementations behind tools/htbandit. Each returns the process exit code:
// 0 pass, 1 domain or assumption failure, 2 I/O or schema failure.

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "htbandit/config.hpp"
#include "htbandit/environment.hpp"
#include "htbandit/errors.hpp"
#include "htbandit/ftrl.hpp"
#include "htbandit/harness.hpp"
#include "htbandit/uniinf.hpp"

namespace htbandit {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitIo = 2;

inline constexpr const char* kRegretHeader = "T,rep,seed,pseudo_regret,final_S,skip_count";
inline constexpr const char* kRoundsHeader = "t,arm,x_opt,S,C,raw_loss,skip_loss,clip_loss,div,shift,skiperr";
inline constexpr const char* kScalingHeader = "T,mean_regret,stderr";

/// Command-line values that take precedence over the config file.
struct Overrides {
  std::optional<std::string> output_dir;
  std::optional<std::size_t> reps;
  std::optional<std::uint64_t> seed;
  bool diagnostics = false;
};

/// Shortest decimal form that still reloads to the same double (17 significant digits).
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline void apply(const Overrides& o, ExperimentConfig& c) {
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (o.reps) c.reps = *o.reps;
  if (o.seed) c.seed = *o.seed;
  if (o.diagnostics) c.diagnostics = true;
}

// ---------------------------------------------------------------------------------------
// check-env

namespace detail {

/// Writes the assumption report for one horizon; returns whether every gate passed.
inline bool report_environment(const EnvironmentConfig& config, std::size_t horizon, std::ostream& out) {
  EnvironmentSpec env;
  try {
    env = materialize(config, horizon);
  } catch (const Error& e) {
    out << "horizon T=" << horizon << ": cannot build environment: " << e.what() << "\n";
    return false;
  }
  const auto a = assess_environment(env, horizon);
  out << "horizon T=" << horizon << ": " << (env.is_stochastic() ? "stochastic" : "adversarial")
      << " environment, K=" << env.arms() << ", alpha=" << format_double(env.alpha)
      << ", sigma=" << format_double(env.sigma) << "\n";
  out << "  moment bound E|X|^alpha <= sigma^alpha = " << format_double(std::pow(env.sigma, env.alpha)) << ": "
      << (a.moments.all_ok ? "ok" : "VIOLATED") << "\n";
  for (const auto& e : a.moments.entries) {
    out << "    phase " << e.phase << " arm " << e.arm << ": moment " << format_double(e.moment) << ", margin "
        << format_double(e.margin) << (e.ok ? "" : "  <-- violation") << "\n";
  }
  if (env.is_stochastic()) {
    if (a.gap_error.empty()) {
      out << "  unique best arm: arm " << a.gaps->best_arm << ", min gap " << format_double(a.gaps->min_gap)
          << ", gaps (";
      for (std::size_t i = 0; i < a.gaps->gaps.size(); ++i) {
        out << (i ? ", " : "") << format_double(a.gaps->gaps[i]);
      }
      out << ")\n";
    } else {
      out << "  unique best arm: VIOLATED (" << a.gap_error << ")\n";
    }
  } else {
    out << "  benchmark arm (best fixed arm over mean losses): " << a.benchmark << "\n";
  }
  for (std::size_t p = 0; p < a.benchmark_truncation.size(); ++p) {
    const auto& c = a.benchmark_truncation[p];
    out << "  truncated non-negativity, arm " << a.benchmark << " phase " << p << ": ";
    if (c.non_negative) {
      out << "ok\n";
    } else {
      out << "VIOLATED (E[X 1[|X|>M]] = " << format_double(c.value_at_witness)
          << " at M = " << format_double(*c.witness) << ")\n";
    }
  }
  if (!a.covers_horizon) out << "  schedule length " << env.length() << " is shorter than the horizon\n";
  return a.passes();
}

}  // namespace detail

inline int cmd_check_env(const std::string& config_path, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  out << "config digest: " << config_digest(config) << "\n";
  bool ok = true;
  for (std::size_t T : config.horizons) ok = detail::report_environment(config.environment, T, out) && ok;
  out << "result: " << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitDomain;
}

// ---------------------------------------------------------------------------------------
// run

namespace detail {

class OutputSet {
 public:
  ~OutputSet() {
    if (!committed_) {
      std::error_code ec;
      for (const auto& p : paths_) std::filesystem::remove(p, ec);
    }
  }
  std::ofstream open(const std::filesystem::path& path) {
    paths_.push_back(path);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::ios_base::failure("cannot open '" + path.string() + "' for writing");
    return f;
  }
  void commit() { committed_ = true; }

 private:
  std::vector<std::filesystem::path> paths_;
  bool committed_ = false;
};

inline void write_rounds(std::ostream& f, const RunResult& r, std::size_t arms, const std::string& digest) {
  f << "# config_digest=" << digest << " arms=" << arms << " horizon=" << r.horizon
    << " benchmark=" << r.benchmark << "\n";
  f << kRoundsHeader << "\n";
  for (const auto& rec : r.records) {
    f << rec.t << ',' << rec.arm << ',' << format_double(rec.x[r.benchmark]) << ',' << format_double(rec.scale)
      << ',' << format_double(rec.threshold) << ',' << format_double(rec.raw_loss) << ','
      << format_double(rec.skipped_loss) << ',' << format_double(rec.clipped_loss) << ','
      << format_double(rec.div) << ',' << format_double(rec.shift) << ',' << format_double(rec.skip_error)
      << "\n";
  }
}

inline bool check_gates(const ExperimentConfig& config, std::ostream& err) {
  bool ok = true;
  for (std::size_t T : config.horizons) {
    std::ostringstream report;
    if (!report_environment(config.environment, T, report)) {
      err << report.str();
      ok = false;
    }
  }
  return ok;
}

}  // namespace detail

inline int cmd_run(const std::string& config_path, const Overrides& overrides, std::ostream& out,
                   std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  apply(overrides, config);
  if (!detail::check_gates(config, err)) {
    err << "error: environment fails the run preconditions\n";
    return kExitDomain;
  }
  const std::string digest = config_digest(config);
  const std::filesystem::path dir(config.output_dir);

  detail::OutputSet outputs;
  try {
    std::filesystem::create_directories(dir);
    std::ostringstream regret_rows;
    RunOptions options;
    options.diagnostics = config.diagnostics;
    const bool keep_rounds = config.diagnostics && std::holds_alternative<UniInfPolicy>(config.policy);
    if (config.diagnostics && !keep_rounds) err << "note: diagnostics are recorded for uniinf only\n";

    for (std::size_t T : config.horizons) {
      const EnvironmentSpec env = materialize(config.environment, T);
      const auto mc = monte_carlo(config.policy, env, T, config.reps, config.seed, options);
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const auto& r = mc.runs[rep];
        regret_rows << T << ',' << rep << ',' << r.seed << ',' << format_double(r.pseudo_regret) << ','
                    << format_double(r.final_scale) << ',' << r.skip_count << "\n";
        if (keep_rounds) {
          auto f = outputs.open(dir / ("rounds_" + std::to_string(T) + "_" + std::to_string(rep) + ".csv"));
          detail::write_rounds(f, r, env.arms(), digest);
          if (!f) throw std::ios_base::failure("write failed for rounds file");
        }
      }
      out << "T=" << T << ": mean pseudo-regret " << format_double(mc.mean) << " (stderr "
          << format_double(mc.std_error) << ", " << config.reps << " reps)\n";
    }

    auto f = outputs.open(dir / "regret.csv");
    f << "# config_digest=" << digest << "\n" << kRegretHeader << "\n" << regret_rows.str();
    if (!f) throw std::ios_base::failure("write failed for regret.csv");
    f.close();
    outputs.commit();
    return kExitOk;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

// ---------------------------------------------------------------------------------------
// audit

struct RoundsRow {
  std::size_t t = 0;
  std::size_t arm = 0;
  double x_opt = 0.0;
  double scale = 0.0;
  double threshold = 0.0;
  double raw_loss = 0.0;
  double skipped_loss = 0.0;
  double clipped_loss = 0.0;
  double div = 0.0;
  double shift = 0.0;
  double skip_error = 0.0;
};

struct RoundsFile {
  std::optional<std::string> digest;
  std::optional<std::size_t> arms;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> benchmark;
  std::vector<RoundsRow> rows;
};

namespace detail {

inline bool parse_size(std::string_view s, std::size_t& out) {
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

inline bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && errno != ERANGE;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

/// Parses a rounds file; throws ConfigError on any schema problem.
inline RoundsFile read_rounds(std::istream& in) {
  RoundsFile file;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("rounds file is empty");
  if (line.rfind("#", 0) == 0) {
    std::istringstream ss(line.substr(1));
    std::string token;
    while (ss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const auto key = token.substr(0, eq);
      const auto value = token.substr(eq + 1);
      std::size_t n = 0;
      if (key == "config_digest") file.digest = value;
      if (key == "arms" && detail::parse_size(value, n)) file.arms = n;
      if (key == "horizon" && detail::parse_size(value, n)) file.horizon = n;
      if (key == "benchmark" && detail::parse_size(value, n)) file.benchmark = n;
    }
    if (!std::getline(in, line)) throw ConfigError("rounds file has no header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRoundsHeader) throw ConfigError("unexpected rounds header '" + line + "'");

  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    RoundsRow r;
    bool ok = f.size() == 11 && detail::parse_size(f[0], r.t) && detail::parse_size(f[1], r.arm);
    double* reals[] = {&r.x_opt,        &r.scale,        &r.threshold, &r.raw_loss, &r.skipped_loss,
                       &r.clipped_loss, &r.div,          &r.shift,     &r.skip_error};
    for (std::size_t i = 0; ok && i < 9; ++i) ok = detail::parse_real(f[i + 2], *reals[i]);
    if (!ok) throw ConfigError("malformed rounds row at line " + std::to_string(lineno));
    file.rows.push_back(r);
  }
  return file;
}

namespace audit_names {
inline constexpr const char* kDivRecomputed = "div_recomputed";
inline constexpr const char* kShiftRecomputed = "shift_recomputed";
inline constexpr const char* kScaleRecomputed = "next_scale_recomputed";
}  // namespace audit_names

/// Rebuilds round records from a rounds file and audits them. The played-arm probability
/// comes from C = S / (4 (1 - x)); with two arms this pins down x completely, so z, Div and
/// Shift are also recomputed and compared against the file.
inline AuditReport replay_audit(const RoundsFile& file, std::size_t arms, std::size_t horizon,
                                const AuditOptions& options = {}) {
  namespace n = audit_names;
  const double log_t = std::log(static_cast<double>(horizon));
  const std::size_t count = file.rows.size();
  const bool full = arms == 2;

  auto played_gap = [](const RoundsRow& r) { return r.scale / (4.0 * r.threshold); };  // 1 - x_{i_t}
  auto point_of = [&](const RoundsRow& r) {
    SimplexPoint x{std::vector<double>(arms, 0.0)};
    const double gap = played_gap(r);
    x.probs[r.arm] = 1.0 - gap;
    if (full) x.probs[1 - r.arm] = gap;
    return x;
  };
  auto formula_next_scale = [&](const RoundsRow& r) {
    const bool skipped = !(std::abs(r.raw_loss) < r.threshold);
    if (skipped) return r.scale * std::sqrt(skip_growth_factor(arms, log_t));
    const double w = r.clipped_loss * played_gap(r);
    return std::sqrt(r.scale * r.scale + w * w / (static_cast<double>(arms) * log_t));
  };

  std::vector<RoundRecord> records;
  records.reserve(count);
  AuditReport consistency;
  consistency.at(n::kScaleRecomputed);
  if (full) {
    consistency.at(n::kDivRecomputed);
    if (file.benchmark) consistency.at(n::kShiftRecomputed);
  }
  auto mismatch = [](double a, double b) {
    return std::abs(a - b) > 1e-6 * std::max(std::abs(a), std::abs(b)) + 1e-12;
  };
  std::optional<SimplexPoint> y_tilde;
  if (full && file.benchmark && *file.benchmark < arms) y_tilde = adjusted_benchmark(arms, horizon, *file.benchmark);

  for (std::size_t i = 0; i < count; ++i) {
    const auto& row = file.rows[i];
    RoundRecord rec;
    rec.t = row.t;
    rec.arm = row.arm;
    rec.x = point_of(row);
    rec.scale = row.scale;
    rec.threshold = row.threshold;
    rec.raw_loss = row.raw_loss;
    rec.skipped_loss = row.skipped_loss;
    rec.clipped_loss = row.clipped_loss;
    rec.div = row.div;
    rec.shift = row.shift;
    rec.skip_error = row.skip_error;
    rec.was_skipped = !(std::abs(row.raw_loss) < row.threshold);

    const double formula = formula_next_scale(row);
    rec.next_scale = (i + 1 < count) ? file.rows[i + 1].scale : formula;
    consistency.at(n::kScaleRecomputed)
        .observe(row.t, rec.next_scale, formula,
                 std::abs(rec.next_scale - formula) > 1e-9 * formula);

    if (full) {
      std::vector<double> losses(arms);
      for (std::size_t a = 0; a < arms; ++a) losses[a] = row.scale / rec.x[a];  // L_a - Z
      losses[row.arm] += row.skipped_loss / rec.x[row.arm];
      rec.z = solve_log_barrier(losses, row.scale).point;
      const double div = bregman_divergence_log_barrier(row.scale, rec.x, *rec.z);
      consistency.at(n::kDivRecomputed).observe(row.t, row.div, div, mismatch(row.div, div));
      if (y_tilde && i + 1 < count) {
        const SimplexPoint x_next = point_of(file.rows[i + 1]);
        const double shift = psi_shift(row.scale, rec.next_scale, *y_tilde, x_next);
        consistency.at(n::kShiftRecomputed).observe(row.t, row.shift, shift, mismatch(row.shift, shift));
      }
    }
    records.push_back(std::move(rec));
  }

  AuditReport report = decomposition_audit(records, arms, horizon, options);
  for (auto& c : consistency.checks) report.checks.push_back(std::move(c));
  return report;
}

inline void print_audit(const AuditReport& report, std::ostream& out) {
  for (const auto& c : report.checks) {
    out << "  " << c.name << (c.advisory ? " (advisory)" : "") << ": " << c.checked << " checked, "
        << c.violations << " violations, max ratio " << format_double(c.max_ratio) << " at t=" << c.worst_round
        << "\n";
    if (c.violations > 0) {
      out << "    violating t:";
      for (auto t : c.violating_rounds) out << ' ' << t;
      if (c.violations > c.violating_rounds.size()) out << " ...";
      out << "\n";
    }
  }
  out << "result: " << (report.passed() ? "PASS" : "FAIL") << " (" << report.violations() << " violations)\n";
}

inline int cmd_audit(const std::string& rounds_path, std::optional<std::size_t> arms,
                     std::optional<std::size_t> horizon, const std::optional<std::string>& config_path,
                     std::ostream& out, std::ostream& err) {
  RoundsFile file;
  try {
    std::ifstream in(rounds_path);
    if (!in) throw ConfigError("cannot read rounds file '" + rounds_path + "'");
    file = read_rounds(in);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  const auto k = arms ? arms : file.arms;
  const auto T = horizon ? horizon : file.horizon;
  if (!k || !T || *k < 2 || *T < 2) {
    err << "error: arm count and horizon are required (flags or file comment)\n";
    return kExitIo;
  }
  if (file.rows.size() != *T) {
    err << "error: rounds file has " << file.rows.size() << " rows, expected " << *T << "\n";
    return kExitIo;
  }
  for (std::size_t i = 0; i < file.rows.size(); ++i) {
    const auto& r = file.rows[i];
    if (r.t != i + 1 || r.arm >= *k || !(r.scale > 0.0) || !(r.threshold > 0.0)) {
      err << "error: rounds row " << i + 1 << " is out of sequence or out of range\n";
      return kExitIo;
    }
  }
  if (config_path) {
    try {
      const auto digest = config_digest(load_config(*config_path));
      if (!file.digest || *file.digest != digest) {
        err << "warning: config digest " << digest << " does not match the rounds file ("
            << file.digest.value_or("none") << ")\n";
      }
    } catch (const Error& e) {
      err << "warning: cannot compare digests: " << e.what() << "\n";
    }
  }

  try {
    const auto report = replay_audit(file, *k, *T);
    out << "audit of " << rounds_path << " (K=" << *k << ", T=" << *T << ")\n";
    if (*k != 2) out << "  note: z_t, Div_t and Shift_t are recomputed only for two-arm files\n";
    print_audit(report, out);
    return report.passed() ? kExitOk : kExitDomain;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

// ---------------------------------------------------------------------------------------
// sweep

inline int cmd_sweep(const std::string& config_path, const Overrides& overrides, std::ostream& out,
                     std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  apply(overrides, config);
  if (config.horizons.size() < 3) {
    err << "error: need >= 3 horizons for a scaling sweep\n";
    return kExitDomain;
  }
  if (!config.synthetic_power_law && !detail::check_gates(config, err)) {
    err << "error: environment fails the run preconditions\n";
    return kExitDomain;
  }
  const std::string digest = config_digest(config);
  const std::filesystem::path dir(config.output_dir);

  detail::OutputSet outputs;
  try {
    std::filesystem::create_directories(dir);
    std::vector<double> horizons, means, errors;
    std::vector<std::size_t> floored;
    for (std::size_t T : config.horizons) {
      double mean, se;
      if (config.synthetic_power_law) {
        mean = config.synthetic_power_law->scale * std::pow(static_cast<double>(T), config.synthetic_power_law->exponent);
        se = 0.0;
      } else {
        const auto mc = monte_carlo(config.policy, materialize(config.environment, T), T, config.reps, config.seed);
        mean = mc.mean;
        se = mc.std_error;
      }
      horizons.push_back(static_cast<double>(T));
      means.push_back(mean);
      errors.push_back(se);
      out << "T=" << T << ": mean pseudo-regret " << format_double(mean) << " (stderr " << format_double(se) << ")\n";
    }

    auto scaling = outputs.open(dir / "scaling.csv");
    scaling << "# config_digest=" << digest << "\n" << kScalingHeader << "\n";
    for (std::size_t i = 0; i < horizons.size(); ++i) {
      scaling << config.horizons[i] << ',' << format_double(means[i]) << ',' << format_double(errors[i]) << "\n";
    }

    // The log-log fit needs positive regrets; non-positive means are floored and listed.
    constexpr double kFloor = 1e-9;
    std::vector<double> fit_means = means;
    for (std::size_t i = 0; i < fit_means.size(); ++i) {
      if (!(fit_means[i] > 0.0)) {
        fit_means[i] = kFloor;
        floored.push_back(config.horizons[i]);
      }
    }
    const auto fit = fit_scaling(horizons, fit_means, errors);
    nlohmann::json j;
    j["config_digest"] = digest;
    j["loglog_slope"] = fit.loglog.slope;
    j["loglog_intercept"] = fit.loglog.intercept;
    j["loglog_r2"] = fit.loglog.r2;
    j["logt_slope"] = fit.logt.slope;
    j["logt_intercept"] = fit.logt.intercept;
    j["logt_r2"] = fit.logt.r2;
    j["floored_horizons"] = floored;
    auto fjson = outputs.open(dir / "fit.json");
    fjson << j.dump(2) << "\n";
    if (!scaling || !fjson) throw std::ios_base::failure("write failed for sweep outputs");
    out << "log-log slope " << format_double(fit.loglog.slope) << ", log-T fit R^2 " << format_double(fit.logt.r2)
        << "\n";
    if (!floored.empty()) out << "warning: " << floored.size() << " non-positive mean regrets floored for the fit\n";
    outputs.commit();
    return kExitOk;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace htbandit
