#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "tcfbm/coupling.hpp"
#include "tcfbm/fbm.hpp"
#include "tcfbm/harnack.hpp"
#include "tcfbm/io.hpp"
#include "tcfbm/sde.hpp"
#include "tcfbm/stats.hpp"
#include "tcfbm/timechange.hpp"

namespace tcfbm {

enum ExitCode : int { exit_ok = 0, exit_error = 1, exit_fail = 2, exit_divergence = 3 };

struct TaskResult {
  int code = exit_ok;
  std::string summary;
  json report;
};

namespace detail {

inline json header(const ExperimentConfig& cfg) {
  return json{{"task", cfg.task}, {"config_hash", hex64(cfg.hash())}, {"seed", cfg.run.seed}};
}

inline HarnackOptions harnack_options(const ExperimentConfig& cfg, std::size_t threads) {
  HarnackOptions o;
  o.n_paths = cfg.run.n_paths;
  o.n_z_samples = cfg.run.n_z_samples;
  o.steps = cfg.run.steps;
  o.z_cells = cfg.run.z_cells;
  o.threads = threads;
  o.seed = cfg.run.seed;
  o.fd_step = cfg.run.fd_step;
  return o;
}

/// Regime index of a clock: explicit, or read off a pure stable / pure drift Bernstein function.
inline double regime_index(const ExperimentConfig& cfg, const ClockSpec& c) {
  if (cfg.run.regime_index) return *cfg.run.regime_index;
  const auto& b = c.bernstein;
  if (b.gamma_shape == 0.0 && b.cp_rate == 0.0) {
    if (b.stable_scale > 0.0 && b.drift == 0.0) return b.stable_alpha;
    if (b.stable_scale == 0.0 && b.drift > 0.0) return 1.0;
  }
  throw ConfigError("run.regime_index: required unless the clock is purely stable or a pure drift");
}

/// sup_r φ(r) r^{−σ} on a log grid.
inline double power_constant(const BernsteinSpec& b, double sigma) {
  double c = 0.0;
  for (int i = -1200; i <= 1200; ++i) {
    const double r = std::pow(10.0, i / 100.0);
    c = std::max(c, phi_eval(b, r) * std::pow(r, -sigma));
  }
  return c;
}

inline void require_one_clock_per_group(const NoiseModel& m, bool anisotropic) {
  if (!anisotropic && !m.shared_clock()) throw ConfigError("model: isotropic tasks need a single clock");
}

inline TimeChangePath sample_clock_path(const ClockSpec& c, double horizon, std::size_t cells, std::uint64_t seed,
                                        Stream stream, std::uint64_t index) {
  Rng rng(seed, stream, index);
  return c.sample(TimeGrid::uniform(horizon, cells), rng);
}

}  // namespace detail

inline TaskResult task_simulate_fbm(const ExperimentConfig& cfg, const std::string& out, std::size_t) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  const TimeGrid grid = TimeGrid::uniform(r.T, r.steps);
  const std::size_t d = m.dim;
  std::vector<std::string> cols{"path", "time"};
  for (std::size_t k = 0; k < d; ++k) cols.push_back("w" + std::to_string(k + 1));
  CsvWriter csv(out + "/paths.csv", cols, cfg.hash(), r.seed);
  std::vector<std::vector<double>> terminal(d, std::vector<double>(r.n_paths));
  std::vector<FbmVolterraSampler> vs;
  std::vector<FbmCholeskySampler> cs;
  for (std::size_t k = 0; k < d; ++k) {
    if (r.method == "volterra")
      vs.emplace_back(HurstExponent(m.H(k)), grid, m.scale);
    else
      cs.emplace_back(m.H(k), grid.points(), m.scale_factor(k));
  }
  std::vector<double> col(grid.size()), row(d + 2);
  std::vector<double> vals(grid.size() * d);
  for (std::size_t i = 0; i < r.n_paths; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      Rng rng(r.seed, coord_stream(r.method == "volterra" ? Stream::brownian : Stream::fbm_coord, k), i);
      if (r.method == "volterra")
        vs[k].sample(rng, col.data());
      else
        cs[k].sample(rng, col.data());
      for (std::size_t j = 0; j < grid.size(); ++j) vals[j * d + k] = col[j];
      terminal[k][i] = col.back();
    }
    for (std::size_t j = 0; j < grid.size(); ++j) {
      row[0] = static_cast<double>(i);
      row[1] = grid[j];
      for (std::size_t k = 0; k < d; ++k) row[k + 2] = vals[j * d + k];
      csv.row(row);
    }
  }
  TaskResult res;
  res.report = detail::header(cfg);
  json coords = json::array();
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<double> sq(r.n_paths);
    for (std::size_t i = 0; i < r.n_paths; ++i) sq[i] = terminal[k][i] * terminal[k][i];
    const auto e = mean_se(sq);
    const double s = m.scale_factor(k);
    coords.push_back(json{{"hurst", num(m.H(k))},
                          {"terminal_second_moment", to_json(e)},
                          {"expected", num(s * s * std::pow(r.T, 2.0 * m.H(k)))}});
  }
  res.report["method"] = r.method;
  res.report["coordinates"] = coords;
  res.summary = "simulate-fbm: " + std::to_string(r.n_paths) + " paths written";
  return res;
}

inline TaskResult task_simulate_clock(const ExperimentConfig& cfg, const std::string& out, std::size_t) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  const TimeGrid grid = TimeGrid::uniform(r.T, r.steps);
  const std::size_t nc = m.clocks.size();
  std::vector<std::string> cols{"path", "time"};
  for (std::size_t c = 0; c < nc; ++c) cols.push_back("z" + std::to_string(c + 1));
  CsvWriter csv(out + "/paths.csv", cols, cfg.hash(), r.seed);
  std::vector<std::vector<double>> terminal(nc, std::vector<double>(r.n_paths));
  std::vector<double> row(nc + 2);
  for (std::size_t i = 0; i < r.n_paths; ++i) {
    std::vector<TimeChangePath> z;
    for (std::size_t c = 0; c < nc; ++c) {
      Rng rng(r.seed, clock_stream(m, c), i);
      z.push_back(m.clocks[c].sample(grid, rng));
      terminal[c][i] = z.back().values.back();
    }
    for (std::size_t j = 0; j < grid.size(); ++j) {
      row[0] = static_cast<double>(i);
      row[1] = grid[j];
      for (std::size_t c = 0; c < nc; ++c) row[c + 2] = z[c].values[j];
      csv.row(row);
    }
  }
  TaskResult res;
  res.report = detail::header(cfg);
  json t = json::array();
  for (std::size_t c = 0; c < nc; ++c) t.push_back(to_json(mean_se(terminal[c])));
  res.report["terminal"] = t;
  res.summary = "simulate-clock: " + std::to_string(r.n_paths) + " paths written";
  return res;
}

inline TaskResult task_solve_sde(const ExperimentConfig& cfg, const std::string& out, std::size_t threads) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  const std::size_t d = m.dim;
  cfg.drift.validate(r.T);
  NoiseSampler sampler(m, TimeGrid::uniform(r.T, r.steps));
  std::vector<SolutionPath> sols(r.n_paths);
  SolverOptions so;
  parallel_for(r.n_paths, threads, [&](std::size_t i) { sols[i] = solve_sde(r.x, cfg.drift, sampler.sample(r.seed, i), so); });
  std::vector<std::string> cols{"path", "time"};
  for (std::size_t k = 0; k < d; ++k) cols.push_back("x" + std::to_string(k + 1));
  CsvWriter csv(out + "/paths.csv", cols, cfg.hash(), r.seed);
  std::vector<double> row(d + 2);
  std::vector<std::vector<double>> terminal(d, std::vector<double>(r.n_paths));
  double err = 0.0;
  for (std::size_t i = 0; i < r.n_paths; ++i) {
    const auto& s = sols[i];
    for (std::size_t j = 0; j < s.grid.size(); ++j) {
      row[0] = static_cast<double>(i);
      row[1] = s.grid[j];
      for (std::size_t k = 0; k < d; ++k) row[k + 2] = s.X(j, k);
      csv.row(row);
    }
    for (std::size_t k = 0; k < d; ++k) terminal[k][i] = s.X(s.grid.size() - 1, k);
    err = std::max(err, s.richardson_error);
  }
  TaskResult res;
  res.report = detail::header(cfg);
  json t = json::array();
  for (std::size_t k = 0; k < d; ++k) t.push_back(to_json(mean_se(terminal[k])));
  res.report["terminal_mean"] = t;
  res.report["max_richardson_error"] = num(err);
  res.summary = "solve-sde: " + std::to_string(r.n_paths) + " paths written";
  return res;
}

inline TaskResult task_couple(const ExperimentConfig& cfg, const std::string& out, std::size_t threads) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  const std::size_t d = m.dim;
  const bool aniso = cfg.drift.yw() != nullptr;
  detail::require_one_clock_per_group(m, aniso);
  cfg.drift.validate(r.T);
  if (r.x == r.y) throw ConfigError("run.x/run.y: coupling needs x != y");
  CouplingOptions co;
  co.cells = r.coupling_cells;
  co.tolerance = r.coupling_tolerance;
  co.delta = r.delta;
  const double horizon = r.T + r.epsilon;
  const std::size_t clock_cells = std::max<std::size_t>(r.steps, 16);
  struct Outcome {
    bool failed = false;
    std::string why;
    double tau = 0.0, gap = 0.0, R = 1.0, compensator = 0.0, bound = 0.0;
    bool warning = false;
  };
  std::vector<Outcome> o(r.n_paths);
  CouplingResult first;
  parallel_for(r.n_paths, threads, [&](std::size_t i) {
    std::vector<RegularizedClock> clocks;
    for (std::size_t c = 0; c < m.clocks.size(); ++c)
      clocks.emplace_back(detail::sample_clock_path(m.clocks[c], horizon, clock_cells, r.seed, clock_stream(m, c), i),
                          r.epsilon);
    SampledFunction v;
    if (m.v.kind != VSpec::Kind::zero) {
      v = SampledFunction(TimeGrid::uniform(r.T, r.steps), d);
      Rng vr(r.seed, Stream::v_process, i);
      m.v.add_to(v.grid, d, vr, v.values.data());
    }
    try {
      CouplingResult c;
      if (aniso) {
        std::vector<RegularizedClock> per;
        for (std::size_t k = 0; k < d; ++k) per.push_back(clocks[m.shared_clock() ? 0 : k]);
        std::vector<double> h(d);
        for (std::size_t k = 0; k < d; ++k) h[k] = m.H(k);
        c = couple_anisotropic(r.x, r.y, cfg.drift, per, v, r.T, h, r.seed, i, co);
      } else {
        c = couple(r.x, r.y, cfg.drift, clocks[0], v, r.T, HurstExponent(m.H(0)), r.seed, i, co);
      }
      auto& w = o[i];
      w.tau = c.tau_max();
      w.gap = c.l1_gap.back();
      w.R = c.R;
      w.compensator = c.compensator;
      w.bound = c.bound;
      w.warning = c.compensator_warning;
      if (i == 0) first = std::move(c);
    } catch (const CouplingFailure& e) {
      o[i].failed = true;
      o[i].why = e.what();
    }
  });
  std::size_t failures = 0, violations = 0, warnings = 0;
  double tau_max = 0.0, gap_max = 0.0;
  std::vector<double> R, RlogR, bound;
  for (const auto& w : o) {
    if (w.failed) {
      ++failures;
      continue;
    }
    if (!(w.tau <= r.T)) ++violations;
    if (w.warning) ++warnings;
    tau_max = std::max(tau_max, w.tau);
    gap_max = std::max(gap_max, w.gap);
    R.push_back(w.R);
    RlogR.push_back(w.R > 0.0 ? w.R * std::log(w.R) : 0.0);
    bound.push_back(w.bound);
  }
  if (!first.grid.points().empty()) {
    std::vector<std::string> cols{"time"};
    for (std::size_t k = 0; k < d; ++k) cols.push_back("x" + std::to_string(k + 1));
    for (std::size_t k = 0; k < d; ++k) cols.push_back("y" + std::to_string(k + 1));
    CsvWriter csv(out + "/paths.csv", cols, cfg.hash(), r.seed);
    std::vector<double> row(2 * d + 1);
    for (std::size_t j = 0; j < first.grid.size(); ++j) {
      row[0] = first.grid[j];
      for (std::size_t k = 0; k < d; ++k) {
        row[1 + k] = first.X(j, k);
        row[1 + d + k] = first.Y(j, k);
      }
      csv.row(row);
    }
  }
  TaskResult res;
  res.report = detail::header(cfg);
  res.report["anisotropic"] = aniso;
  res.report["n_paths"] = r.n_paths;
  res.report["coupling_failures"] = failures;
  res.report["tau_violations"] = violations;
  res.report["compensator_warnings"] = warnings;
  res.report["tau_max"] = num(tau_max);
  res.report["terminal_gap_max"] = num(gap_max);
  res.report["R"] = to_json(mean_se(R));
  res.report["R_log_R"] = to_json(mean_se(RlogR));
  res.report["half_bound_mean"] = num(0.5 * mean_se(bound).mean);
  const bool ok = failures == 0 && violations == 0 && gap_max == 0.0;
  res.report["pass"] = ok;
  res.code = ok ? exit_ok : exit_fail;
  res.summary = std::string("couple: ") + (ok ? "pass" : "fail") + " (tau_max " + fmt12(tau_max) + ", failures " +
                std::to_string(failures) + ")";
  return res;
}

inline TaskResult task_verify_harnack(const ExperimentConfig& cfg, const std::string&, std::size_t threads) {
  const auto& r = cfg.run;
  cfg.drift.validate(r.T);
  const auto rep = verify_inequality(r.inequality, r.f, r.x, r.y, r.T, r.p, cfg.model, cfg.drift,
                                     detail::harnack_options(cfg, threads));
  TaskResult res;
  res.report = detail::header(cfg);
  res.report["report"] = to_json(rep);
  if (rep.diverged) {
    res.code = exit_divergence;
    res.summary = std::string("verify-harnack ") + to_string(rep.kind) + ": divergence flag (" + rep.message + ")";
    return res;
  }
  res.code = rep.pass ? exit_ok : exit_fail;
  res.summary = std::string("verify-harnack ") + to_string(rep.kind) + ": " + (rep.pass ? "pass" : "FAIL") + " (lhs " +
                fmt12(rep.lhs.mean) + ", rhs " + fmt12(rep.rhs) + ", 3se " + fmt12(3.0 * rep.combined_se) + ")";
  return res;
}

inline TaskResult task_moment_bounds(const ExperimentConfig& cfg, const std::string& out, std::size_t threads) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  if (m.clocks.size() != 1 || m.clocks[0].kind != ClockKind::inverse_subordinator)
    throw ConfigError("moment-bounds needs a single inverse_subordinator clock");
  const auto& b = m.clocks[0].bernstein;
  const double sigma = detail::regime_index(cfg, m.clocks[0]);
  if (!limsup_at_zero(b, sigma).holds || !limsup_at_infinity(b, sigma).holds)
    throw HypothesisViolation("phi(r) r^-sigma is not bounded at 0 and infinity for sigma = " + fmt12(sigma));
  const double c = detail::power_constant(b, sigma);
  std::vector<double> ts = r.T_values;
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<double> q{0.0};
  q.insert(q.end(), ts.begin(), ts.end());
  const TimeGrid grid(q);
  std::vector<double> z(r.n_paths * ts.size());
  parallel_for(r.n_paths, threads, [&](std::size_t i) {
    Rng rng(r.seed, Stream::clock, i);
    const auto p = m.clocks[0].sample(grid, rng);
    for (std::size_t j = 0; j < ts.size(); ++j) z[i * ts.size() + j] = p.values[j + 1];
  });
  CsvWriter csv(out + "/sweep.csv", {"t", "theta", "empirical", "se", "bound"}, cfg.hash(), r.seed);
  bool ok = true;
  json rows = json::array(), slopes = json::array();
  for (double th : r.theta) {
    std::vector<double> lx, ly;
    for (std::size_t j = 0; j < ts.size(); ++j) {
      std::vector<double> v(r.n_paths);
      for (std::size_t i = 0; i < r.n_paths; ++i) v[i] = std::pow(z[i * ts.size() + j], -th);
      const auto e = mean_se(v);
      const double bound = inverse_moment_bound(sigma, th, c, ts[j]);
      const bool within = e.mean <= bound + 4.0 * e.se;
      ok = ok && within;
      csv.row({ts[j], th, e.mean, e.se, bound});
      rows.push_back(json{{"t", num(ts[j])}, {"theta", num(th)}, {"empirical", to_json(e)}, {"bound", num(bound)}, {"within", within}});
      lx.push_back(std::log(ts[j]));
      ly.push_back(std::log(e.mean));
    }
    if (ts.size() >= 2) {
      const double s = least_squares(lx, ly).slope;
      const bool within = std::abs(s + sigma * th) <= r.slope_tolerance;
      ok = ok && within;
      slopes.push_back(json{{"theta", num(th)}, {"fitted", num(s)}, {"predicted", num(-sigma * th)}, {"within", within}});
    }
  }
  TaskResult res;
  res.report = detail::header(cfg);
  res.report["sigma"] = num(sigma);
  res.report["c"] = num(c);
  res.report["rows"] = rows;
  res.report["slopes"] = slopes;
  res.report["pass"] = ok;
  res.code = ok ? exit_ok : exit_fail;
  res.summary = std::string("moment-bounds: ") + (ok ? "pass" : "FAIL");
  return res;
}

inline TaskResult task_exponent_sweep(const ExperimentConfig& cfg, const std::string& out, std::size_t threads) {
  const auto& m = cfg.model;
  const auto& r = cfg.run;
  const bool aniso = cfg.drift.yw() != nullptr;
  detail::require_one_clock_per_group(m, aniso);
  if (r.T_values.size() < 2) throw ConfigError("run.T_values: need at least two horizons");
  const double Tmax = *std::max_element(r.T_values.begin(), r.T_values.end());
  cfg.drift.validate(Tmax);
  const std::size_t d = m.dim;

  double lo = 0.0, hi = 0.0;
  bool global = true;
  if (m.deterministic_clocks()) {
    lo = hi = 2.0 * m.H(0);
    for (std::size_t k = 0; k < d; ++k) {
      lo = std::min(lo, 2.0 * m.H(k));
      hi = std::max(hi, 2.0 * m.H(k));
    }
  } else {
    bool inv = false, sub = false;
    std::vector<BernsteinSpec> specs;
    std::vector<double> hs, idx;
    for (std::size_t k = 0; k < (aniso ? d : 1); ++k) {
      const auto& c = m.clock(k);
      if (c.kind == ClockKind::deterministic) throw ConfigError("exponent-sweep: mixed deterministic and random clocks");
      (c.kind == ClockKind::inverse_subordinator ? inv : sub) = true;
      specs.push_back(c.bernstein);
      hs.push_back(m.H(k));
      idx.push_back(detail::regime_index(cfg, c));
    }
    if (inv && sub) throw ConfigError("exponent-sweep: mixed subordinator and inverse clocks");
    const auto s = corollary_exponents(specs, hs, idx, inv ? ClockFamily::inverse_subordinator : ClockFamily::subordinator);
    lo = s.large_time;
    hi = s.small_time;
    global = s.global;
  }

  const auto opt = detail::harnack_options(cfg, threads);
  CsvWriter csv(out + "/sweep.csv", {"T", "factor", "se"}, cfg.hash(), r.seed);
  std::vector<double> lx, ly;
  bool diverged = false;
  json rows = json::array();
  for (double T : r.T_values) {
    Estimate e;
    bool div = false;
    if (aniso) {
      const auto ab = anisotropic_bounds(m, cfg.drift, T, r.x, r.y, std::nullopt, opt);
      e = ab.log.expectation;
      div = ab.log.diverged;
    } else {
      const auto f = expectation_factor(m, cfg.drift, T, opt);
      e = f.value;
      div = f.divergence.diverged;
    }
    diverged = diverged || div;
    csv.row({T, e.mean, e.se});
    rows.push_back(json{{"T", num(T)}, {"factor", to_json(e)}, {"diverged", div}});
    lx.push_back(std::log(T));
    ly.push_back(std::log(e.mean));
  }
  const double slope = least_squares(lx, ly).slope;
  const bool within = -slope >= lo - r.slope_tolerance && -slope <= hi + r.slope_tolerance;
  TaskResult res;
  res.report = detail::header(cfg);
  res.report["rows"] = rows;
  res.report["fitted_slope"] = num(slope);
  res.report["predicted_slope"] = lo == hi ? json(num(-lo)) : json::array({num(-hi), num(-lo)});
  res.report["global"] = global;
  res.report["within_tolerance"] = within;
  if (diverged) {
    res.code = exit_divergence;
    res.summary = "exponent-sweep: divergence flag";
    return res;
  }
  res.code = within ? exit_ok : exit_fail;
  res.summary = "exponent-sweep: fitted " + fmt12(slope) + ", predicted " + (lo == hi ? fmt12(-lo) : fmt12(-hi) + ".." + fmt12(-lo)) +
                (within ? " (within tolerance)" : " (outside tolerance)");
  return res;
}

/**
 * @brief Runs cfg.task, writing report.json and task CSVs under out_dir.
 *
 * Exceptions other than divergence are left to the caller (exit 1).
 */
inline TaskResult run_task(const ExperimentConfig& cfg, const std::string& out_dir, std::size_t threads) {
  std::filesystem::create_directories(out_dir);
  TaskResult res;
  try {
    if (cfg.task == "simulate-fbm") res = task_simulate_fbm(cfg, out_dir, threads);
    else if (cfg.task == "simulate-clock") res = task_simulate_clock(cfg, out_dir, threads);
    else if (cfg.task == "solve-sde") res = task_solve_sde(cfg, out_dir, threads);
    else if (cfg.task == "couple") res = task_couple(cfg, out_dir, threads);
    else if (cfg.task == "verify-harnack") res = task_verify_harnack(cfg, out_dir, threads);
    else if (cfg.task == "moment-bounds") res = task_moment_bounds(cfg, out_dir, threads);
    else if (cfg.task == "exponent-sweep") res = task_exponent_sweep(cfg, out_dir, threads);
    else throw ConfigError("unknown task " + cfg.task);
  } catch (const DivergenceError& e) {
    res.report = detail::header(cfg);
    res.report["diverged"] = true;
    res.report["message"] = e.what();
    res.code = exit_divergence;
    res.summary = cfg.task + ": divergence flag (" + e.what() + ")";
  }
  res.report["exit_code"] = res.code;
  write_json(out_dir + "/report.json", res.report);
  return res;
}

}  // namespace tcfbm
