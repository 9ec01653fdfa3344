// Copyright 2026 The qfilter Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfilter/csv.hpp"
#include "qfilter/ensemble.hpp"
#include "qfilter/observability.hpp"
#include "qfilter/operators.hpp"
#include "qfilter/particle_filter.hpp"
#include "qfilter/qubit.hpp"
#include "qfilter/rng.hpp"
#include "qfilter/sme.hpp"

namespace qfilter {

using json = nlohmann::json;

// Configuration problems: unknown scenario, missing or out-of-range fields.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario {
  kKnownField,      // single filter with known b; record + Bloch trajectory
  kFiniteSet,       // finite-set Bayesian ensemble, weight trajectories
  kConvergenceRate, // posterior concentration statistics over many runs
  kParticleFilter,  // Liu-West particle filter over a continuous prior
  kObservability,   // algebraic observability analysis (no trajectories)
};

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "known_field") return Scenario::kKnownField;
  if (s == "finite_set") return Scenario::kFiniteSet;
  if (s == "convergence_rate") return Scenario::kConvergenceRate;
  if (s == "particle_filter") return Scenario::kParticleFilter;
  if (s == "observability") return Scenario::kObservability;
  throw config_error(
      "unknown scenario '" + s +
      "' (expected known_field, finite_set, convergence_rate, "
      "particle_filter or observability)");
}

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::kKnownField: return "known_field";
    case Scenario::kFiniteSet: return "finite_set";
    case Scenario::kConvergenceRate: return "convergence_rate";
    case Scenario::kParticleFilter: return "particle_filter";
    case Scenario::kObservability: return "observability";
  }
  return "?";
}

struct KdeConfig {
  int grid_points = 150;
  double bandwidth = 0.0;  // <= 0 selects the automatic bandwidth
};

// Complete description of one experiment. Field values b are given in units
// of kappa and converted to absolute rates (b * kappa) when models are built.
struct ExperimentConfig {
  Scenario scenario = Scenario::kKnownField;
  double kappa = 1.0;
  double b_truth = 0.0;            // ignored when sample_truth is set
  bool sample_truth = false;       // draw the truth uniformly from b_values
  std::vector<double> b_values;    // candidate set (finite-set scenarios)
  std::vector<double> initial_weights;  // empty = uniform
  double prior_lo = 0.0;           // continuous prior (particle filter)
  double prior_hi = 10.0;
  double dt = 1e-4;
  double duration = 10.0;
  int n_runs = 1;
  int n_particles = 1000;
  ResampleConfig resample;
  double alpha = 0.95;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = ".";
  int snapshot_stride = 100;       // trajectory CSV row spacing, in steps
  int n_snapshots = 50;            // particle-filter snapshot count
  bool dump_theta = false;         // add member angles to ensemble CSVs
  std::string atomic_basis = "xz"; // "xz" or "full" (observability)
  KdeConfig kde;
};

namespace detail {

inline double get_number(const json& j, const char* key, double fallback,
                         bool* present = nullptr) {
  if (!j.contains(key)) {
    if (present) *present = false;
    return fallback;
  }
  if (present) *present = true;
  if (!j.at(key).is_number())
    throw config_error(std::string("config field '") + key +
                       "' must be a number");
  return j.at(key).get<double>();
}

inline void require_finite(double v, const char* key) {
  if (!std::isfinite(v))
    throw config_error(std::string("config field '") + key +
                       "' must be finite");
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw config_error("config root must be a JSON object");

  static const std::vector<std::string> known_keys = {
      "scenario",    "kappa",        "b_truth",       "b_values",
      "initial_weights", "prior",    "dt",            "duration",
      "n_runs",      "n_particles",  "resample",      "alpha",
      "seed",        "out",          "snapshot_stride", "n_snapshots",
      "dump_theta",  "atomic_basis", "kde"};
  for (const auto& [key, _] : j.items())
    if (std::find(known_keys.begin(), known_keys.end(), key) ==
        known_keys.end())
      throw config_error("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  try {
    if (!j.contains("scenario"))
      throw config_error("config is missing required field 'scenario'");
    cfg.scenario = scenario_from_string(j.at("scenario").get<std::string>());

    cfg.kappa = detail::get_number(j, "kappa", cfg.kappa);
    cfg.dt = detail::get_number(j, "dt", cfg.dt);
    cfg.duration = detail::get_number(j, "duration", cfg.duration);
    cfg.alpha = detail::get_number(j, "alpha", cfg.alpha);
    cfg.n_runs = static_cast<int>(
        detail::get_number(j, "n_runs", cfg.n_runs));
    cfg.n_particles = static_cast<int>(
        detail::get_number(j, "n_particles", cfg.n_particles));
    cfg.snapshot_stride = static_cast<int>(
        detail::get_number(j, "snapshot_stride", cfg.snapshot_stride));
    cfg.n_snapshots = static_cast<int>(
        detail::get_number(j, "n_snapshots", cfg.n_snapshots));

    if (j.contains("b_truth")) {
      const json& bt = j.at("b_truth");
      if (bt.is_string()) {
        if (bt.get<std::string>() != "sample")
          throw config_error(
              "b_truth must be a number or the string \"sample\"");
        cfg.sample_truth = true;
      } else if (bt.is_number()) {
        cfg.b_truth = bt.get<double>();
      } else {
        throw config_error(
            "b_truth must be a number or the string \"sample\"");
      }
    }

    if (j.contains("b_values")) {
      if (!j.at("b_values").is_array())
        throw config_error("b_values must be an array of numbers");
      for (const json& v : j.at("b_values")) {
        if (!v.is_number())
          throw config_error("b_values must be an array of numbers");
        cfg.b_values.push_back(v.get<double>());
      }
    }

    if (j.contains("initial_weights")) {
      if (!j.at("initial_weights").is_array())
        throw config_error("initial_weights must be an array of numbers");
      for (const json& v : j.at("initial_weights")) {
        if (!v.is_number())
          throw config_error("initial_weights must be an array of numbers");
        cfg.initial_weights.push_back(v.get<double>());
      }
    }

    if (j.contains("prior")) {
      const json& p = j.at("prior");
      if (!p.is_object())
        throw config_error("prior must be an object with 'lo' and 'hi'");
      cfg.prior_lo = detail::get_number(p, "lo", cfg.prior_lo);
      cfg.prior_hi = detail::get_number(p, "hi", cfg.prior_hi);
    }

    if (j.contains("resample")) {
      const json& r = j.at("resample");
      if (!r.is_object()) throw config_error("resample must be an object");
      cfg.resample.a = detail::get_number(r, "a", cfg.resample.a);
      cfg.resample.h = detail::get_number(r, "h", cfg.resample.h);
      cfg.resample.threshold =
          detail::get_number(r, "threshold", cfg.resample.threshold);
      if (r.contains("link_a_h")) {
        if (!r.at("link_a_h").is_boolean())
          throw config_error("resample.link_a_h must be a boolean");
        cfg.resample.link_a_h = r.at("link_a_h").get<bool>();
      }
    }

    if (j.contains("seed")) {
      if (!j.at("seed").is_number_integer() &&
          !j.at("seed").is_number_unsigned())
        throw config_error("seed must be an unsigned integer");
      cfg.seed = j.at("seed").get<std::uint64_t>();
      cfg.seed_given = true;
    }
    if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
    if (j.contains("dump_theta")) {
      if (!j.at("dump_theta").is_boolean())
        throw config_error("dump_theta must be a boolean");
      cfg.dump_theta = j.at("dump_theta").get<bool>();
    }
    if (j.contains("atomic_basis"))
      cfg.atomic_basis = j.at("atomic_basis").get<std::string>();
    if (j.contains("kde")) {
      const json& k = j.at("kde");
      if (!k.is_object()) throw config_error("kde must be an object");
      cfg.kde.grid_points = static_cast<int>(
          detail::get_number(k, "grid_points", cfg.kde.grid_points));
      cfg.kde.bandwidth =
          detail::get_number(k, "bandwidth", cfg.kde.bandwidth);
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("malformed config: ") + e.what());
  }
  return cfg;
}

inline void validate(const ExperimentConfig& cfg) {
  detail::require_finite(cfg.kappa, "kappa");
  if (!(cfg.kappa > 0.0)) throw config_error("kappa must be > 0");
  detail::require_finite(cfg.dt, "dt");
  if (!(cfg.dt > 0.0)) throw config_error("dt must be > 0");
  detail::require_finite(cfg.duration, "duration");
  if (!(cfg.duration >= cfg.dt))
    throw config_error("duration must cover at least one step");
  if (cfg.n_runs < 1) throw config_error("n_runs must be >= 1");
  if (cfg.snapshot_stride < 1)
    throw config_error("snapshot_stride must be >= 1");
  if (cfg.n_snapshots < 1) throw config_error("n_snapshots must be >= 1");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw config_error("alpha must lie in (0, 1)");
  if (cfg.n_runs > 1 && !cfg.seed_given)
    throw config_error("batch runs (n_runs > 1) require an explicit seed");

  for (double b : cfg.b_values) detail::require_finite(b, "b_values");
  if (!cfg.initial_weights.empty()) {
    if (cfg.initial_weights.size() != cfg.b_values.size())
      throw config_error("initial_weights must match b_values in length");
    double sum = 0.0;
    for (double w : cfg.initial_weights) {
      detail::require_finite(w, "initial_weights");
      if (w < 0.0) throw config_error("initial_weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw config_error("initial_weights must sum to 1");
  }

  const bool needs_set = cfg.scenario == Scenario::kFiniteSet ||
                         cfg.scenario == Scenario::kConvergenceRate ||
                         cfg.scenario == Scenario::kObservability;
  if (needs_set) {
    if (cfg.b_values.empty())
      throw config_error("this scenario requires a non-empty b_values set");
    for (std::size_t i = 0; i < cfg.b_values.size(); ++i)
      for (std::size_t k = i + 1; k < cfg.b_values.size(); ++k)
        if (cfg.b_values[i] == cfg.b_values[k])
          throw config_error("b_values must be pairwise distinct");
  }
  if (cfg.scenario == Scenario::kKnownField ||
      cfg.scenario == Scenario::kParticleFilter) {
    if (cfg.sample_truth)
      throw config_error(
          "b_truth = \"sample\" is only supported for finite_set and "
          "convergence_rate scenarios");
    detail::require_finite(cfg.b_truth, "b_truth");
  }
  if (cfg.scenario == Scenario::kParticleFilter) {
    detail::require_finite(cfg.prior_lo, "prior.lo");
    detail::require_finite(cfg.prior_hi, "prior.hi");
    if (!(cfg.prior_hi > cfg.prior_lo))
      throw config_error("prior interval must have hi > lo");
    if (cfg.n_particles < 1) throw config_error("n_particles must be >= 1");
    if (!(cfg.resample.a >= 0.0 && cfg.resample.a <= 1.0))
      throw config_error("resample.a must lie in [0, 1]");
    if (!(cfg.resample.h >= 0.0) || !std::isfinite(cfg.resample.h))
      throw config_error("resample.h must be >= 0");
    if (!(cfg.resample.threshold >= 0.0 && cfg.resample.threshold <= 1.0))
      throw config_error("resample.threshold must lie in [0, 1]");
    if (cfg.kde.grid_points < 2)
      throw config_error("kde.grid_points must be >= 2");
    if (!(cfg.kde.bandwidth >= 0.0) || !std::isfinite(cfg.kde.bandwidth))
      throw config_error("kde.bandwidth must be >= 0");
  }
  if (cfg.scenario == Scenario::kObservability) {
    if (cfg.atomic_basis != "xz" && cfg.atomic_basis != "full")
      throw config_error("atomic_basis must be \"xz\" or \"full\"");
  }
  if ((cfg.scenario == Scenario::kFiniteSet ||
       cfg.scenario == Scenario::kConvergenceRate) &&
      !cfg.sample_truth) {
    detail::require_finite(cfg.b_truth, "b_truth");
    // The truth statistics (p_truth, favors_truth, I_alpha_truth) are only
    // meaningful when the true value is one of the candidates.
    bool found = false;
    for (double b : cfg.b_values) found = found || b == cfg.b_truth;
    if (!found)
      throw config_error(
          "this scenario needs b_truth inside b_values (or "
          "b_truth = \"sample\")");
  }
}

inline ExperimentConfig config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

// -----------------------------------------------------------------------------
// weighted kernel density estimation
// -----------------------------------------------------------------------------

// Midpoint grid: points cells of width (hi - lo) / points, evaluated at the
// cell centers, so masses on the grid tile the interval exactly.
inline std::vector<double> kde_grid(double lo, double hi, int points) {
  if (points < 1) throw std::invalid_argument("kde_grid: need points >= 1");
  if (!(hi > lo)) throw std::invalid_argument("kde_grid: need hi > lo");
  const double db = (hi - lo) / static_cast<double>(points);
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        lo + (static_cast<double>(i) + 0.5) * db;
  return grid;
}

// Weighted Gaussian KDE evaluated as probability mass per grid cell.
// bandwidth <= 0 selects 1.06 * sigma_w * n_eff^(-1/5) (Silverman's rule with
// the effective sample size), floored at 1e-3 of the grid span so degenerate
// posteriors still produce a valid density. With a support interval given,
// each kernel is renormalized to the support so no mass leaks past the
// boundaries.
inline std::vector<double> weighted_kde(std::span<const double> samples,
                                        std::span<const double> weights,
                                        std::span<const double> grid,
                                        double bandwidth = 0.0,
                                        std::optional<Support> support = {}) {
  if (samples.size() != weights.size())
    throw std::invalid_argument("weighted_kde: samples/weights mismatch");
  if (samples.empty())
    throw std::invalid_argument("weighted_kde: empty sample set");
  if (grid.size() < 2)
    throw std::invalid_argument("weighted_kde: need at least 2 grid points");

  const double span = grid.back() - grid.front();
  double bw = bandwidth;
  if (!(bw > 0.0)) {
    double mean = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      mean += weights[i] * samples[i];
      wsum += weights[i];
    }
    if (!(wsum > 0.0))
      throw std::invalid_argument("weighted_kde: all weights are zero");
    mean /= wsum;
    double var = 0.0, w2 = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      var += weights[i] * (samples[i] - mean) * (samples[i] - mean);
      w2 += weights[i] * weights[i];
    }
    var /= wsum;
    const double neff = wsum * wsum / w2;
    bw = 1.06 * std::sqrt(var) * std::pow(neff, -0.2);
    const double floor = 1e-3 * span;
    if (!(bw > floor)) bw = floor;
  }

  const double db = (grid.back() - grid.front()) /
                    static_cast<double>(grid.size() - 1);
  const double inv_bw = 1.0 / bw;
  const double norm = db * inv_bw / std::sqrt(2.0 * kPi);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

  std::vector<double> mass(grid.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (weights[i] == 0.0) continue;
    double scale = weights[i];
    if (support) {
      // Renormalize the kernel to the support interval.
      const double zlo = (support->lo - samples[i]) * inv_bw * inv_sqrt2;
      const double zhi = (support->hi - samples[i]) * inv_bw * inv_sqrt2;
      const double cover = 0.5 * (std::erf(zhi) - std::erf(zlo));
      if (cover > 1e-300) scale /= cover;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double z = (grid[g] - samples[i]) * inv_bw;
      mass[g] += scale * norm * std::exp(-0.5 * z * z);
    }
  }
  return mass;
}

// Posterior density snapshots on a fixed parameter grid.
struct DensityGrid {
  std::vector<double> grid;                // parameter values (cell centers)
  std::vector<double> times;               // snapshot times
  std::vector<std::vector<double>> mass;   // [time][grid] cell masses

  // Long-format CSV: one (t, b, mass) row per snapshot and grid cell.
  void to_csv(std::ostream& out) const {
    out << "t,b,mass\n";
    for (std::size_t s = 0; s < times.size(); ++s)
      for (std::size_t g = 0; g < grid.size(); ++g)
        out << format_double(times[s]) << ',' << format_double(grid[g]) << ','
            << format_double(mass[s][g]) << '\n';
  }
};

// -----------------------------------------------------------------------------
// experiment drivers
// -----------------------------------------------------------------------------

namespace detail {

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& cfg) {
  std::filesystem::path dir(cfg.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec && !std::filesystem::is_directory(dir))
    throw std::runtime_error("cannot create output directory: " +
                             dir.string());
  return dir;
}

// Qubit magnetometer model pieces shared by the trajectory scenarios.
struct QubitModel {
  Operator h0;
  Operator l;
  DensityMatrix rho0;

  explicit QubitModel(double kappa)
      : h0(pauli_y()), l(std::sqrt(kappa) * pauli_z()), rho0(theta_to_rho(0.0)) {}
};

// Truth value for one run, honoring the sampled-truth option.
inline double pick_truth(const ExperimentConfig& cfg, std::uint64_t run_seed) {
  if (!cfg.sample_truth) return cfg.b_truth * cfg.kappa;
  Rng rng(derive_seed(run_seed, kStreamChoice));
  const auto n = cfg.b_values.size();
  auto idx = static_cast<std::size_t>(rng.uniform() *
                                      static_cast<double>(n));
  idx = std::min(idx, n - 1);
  return cfg.b_values[idx] * cfg.kappa;
}

inline std::vector<QubitMember> initial_qubit_ensemble(
    const ExperimentConfig& cfg) {
  const std::size_t n = cfg.b_values.size();
  std::vector<QubitMember> members(n);
  for (std::size_t i = 0; i < n; ++i) {
    members[i].theta = 0.0;
    members[i].b = cfg.b_values[i] * cfg.kappa;
    members[i].weight = cfg.initial_weights.empty()
                            ? 1.0 / static_cast<double>(n)
                            : cfg.initial_weights[i];
  }
  return members;
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Known-field filter: simulate the truth and dump the measurement record
// together with the Bloch-plane trajectory (t, sx, sz, theta).
inline json run_known_field(const ExperimentConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg);
  const detail::QubitModel model(cfg.kappa);
  const auto n = static_cast<std::int64_t>(
      std::llround(cfg.duration / cfg.dt));

  json runs = json::array();
  int n_plus_z = 0;
  for (int run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const double b_abs = cfg.b_truth * cfg.kappa;
    SdeConfig sde{cfg.dt, derive_seed(run_seed, kStreamTruth), true, true};
    const TruthTrajectory traj =
        simulate_truth(model.rho0, b_abs * model.h0, model.l, cfg.duration,
                       sde, cfg.snapshot_stride);

    {
      auto out = open_output_file(
          (dir / ("record_" + std::to_string(run) + ".csv")).string());
      traj.record.to_csv(out);
    }
    {
      auto out = open_output_file(
          (dir / ("run_" + std::to_string(run) + ".csv")).string());
      out << "t,sx,sz,theta\n";
      for (std::size_t s = 0; s < traj.states.size(); ++s) {
        const double t =
            std::min(traj.path_dt * static_cast<double>(s), cfg.duration);
        const BlochXZ b = bloch_xz(traj.states[s]);
        const double row[] = {t, b.sx, b.sz, std::atan2(b.sz, b.sx)};
        write_csv_row(out, row);
      }
    }

    const BlochXZ fin = bloch_xz(traj.states.back());
    const double pole_dist = std::sqrt(
        fin.sx * fin.sx + (1.0 - std::abs(fin.sz)) * (1.0 - std::abs(fin.sz)));
    if (fin.sz > 0.0) ++n_plus_z;
    runs.push_back({{"idx", run},
                    {"b_truth", cfg.b_truth},
                    {"final_sx", fin.sx},
                    {"final_sz", fin.sz},
                    {"final_theta", std::atan2(fin.sz, fin.sx)},
                    {"pole_distance", pole_dist},
                    {"collapsed_to", fin.sz > 0.0 ? "+z" : "-z"}});
    (void)n;
  }

  json summary = {{"scenario", "known_field"},
                  {"kappa", cfg.kappa},
                  {"b_truth", cfg.b_truth},
                  {"dt", cfg.dt},
                  {"duration", cfg.duration},
                  {"n_runs", cfg.n_runs},
                  {"seed", cfg.seed},
                  {"runs", runs},
                  {"n_plus_z", n_plus_z},
                  {"fraction_plus_z",
                   static_cast<double>(n_plus_z) /
                       static_cast<double>(cfg.n_runs)}};
  auto out = open_output_file((dir / "summary.json").string());
  out << summary.dump(2) << '\n';
  return summary;
}

// Finite-set Bayesian ensemble: per-run weight trajectories and the
// statistics of the final posterior across runs.
inline json run_finite_set(const ExperimentConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg);
  const detail::QubitModel model(cfg.kappa);
  const auto n = static_cast<std::int64_t>(
      std::llround(cfg.duration / cfg.dt));
  const std::size_t nb = cfg.b_values.size();

  json runs = json::array();
  int n_favors_truth = 0;
  int n_truth_argmax = 0;
  std::vector<double> p_truth_finals;

  for (int run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const double b_truth_abs = detail::pick_truth(cfg, run_seed);
    SdeConfig sde{cfg.dt, derive_seed(run_seed, kStreamTruth), true, true};
    const TruthTrajectory traj = simulate_truth(
        model.rho0, b_truth_abs * model.h0, model.l, cfg.duration, sde, n);

    std::vector<QubitMember> members = detail::initial_qubit_ensemble(cfg);

    auto out = open_output_file(
        (dir / ("run_" + std::to_string(run) + ".csv")).string());
    std::vector<std::string> header{"t"};
    if (cfg.dump_theta) {
      for (std::size_t i = 1; i <= nb; ++i)
        header.push_back("theta_" + std::to_string(i));
      for (std::size_t i = 1; i <= nb; ++i)
        header.push_back("b_" + std::to_string(i));
    }
    for (std::size_t i = 1; i <= nb; ++i)
      header.push_back("p_" + std::to_string(i));
    write_csv_header(out, header);

    const auto dump_row = [&](std::int64_t k) {
      std::vector<double> row{static_cast<double>(k) * cfg.dt};
      if (cfg.dump_theta) {
        for (const QubitMember& m : members) row.push_back(m.theta);
        for (const QubitMember& m : members) row.push_back(m.b);
      }
      for (const QubitMember& m : members) row.push_back(m.weight);
      write_csv_row(out, row);
    };

    dump_row(0);
    for (std::int64_t k = 1; k <= n; ++k) {
      members = qubit_ensemble_step(std::move(members), cfg.kappa,
                                    traj.record.increments
                                        [static_cast<std::size_t>(k - 1)],
                                    cfg.dt);
      if (k % cfg.snapshot_stride == 0 || k == n) dump_row(k);
    }

    std::size_t truth_idx = 0, argmax_idx = 0;
    for (std::size_t i = 0; i < nb; ++i) {
      if (cfg.b_values[i] * cfg.kappa == b_truth_abs) truth_idx = i;
      if (members[i].weight > members[argmax_idx].weight) argmax_idx = i;
    }
    const double p_truth = members[truth_idx].weight;
    const bool favors = p_truth > 0.5;
    const bool is_map = argmax_idx == truth_idx;
    n_favors_truth += favors;
    n_truth_argmax += is_map;
    p_truth_finals.push_back(p_truth);

    json final_weights = json::array();
    for (const QubitMember& m : members) final_weights.push_back(m.weight);
    runs.push_back({{"idx", run},
                    {"b_truth", b_truth_abs / cfg.kappa},
                    {"final_weights", final_weights},
                    {"map_value", cfg.b_values[argmax_idx]},
                    {"p_truth_final", p_truth},
                    {"favors_truth", favors},
                    {"truth_is_map", is_map}});
  }

  json summary = {{"scenario", "finite_set"},
                  {"kappa", cfg.kappa},
                  {"b_values", cfg.b_values},
                  {"b_truth", cfg.sample_truth ? json("sample")
                                               : json(cfg.b_truth)},
                  {"dt", cfg.dt},
                  {"duration", cfg.duration},
                  {"n_runs", cfg.n_runs},
                  {"seed", cfg.seed},
                  {"runs", runs},
                  {"n_favors_truth", n_favors_truth},
                  {"n_truth_argmax", n_truth_argmax},
                  {"fraction_favors_truth",
                   static_cast<double>(n_favors_truth) /
                       static_cast<double>(cfg.n_runs)},
                  {"median_final_p_truth", detail::median(p_truth_finals)}};
  auto out = open_output_file((dir / "summary.json").string());
  out << summary.dump(2) << '\n';
  return summary;
}

// Posterior concentration statistics: per-step averages over many runs of
// the indicators 1[max_i p_i > alpha] and 1[p_truth > alpha].
inline json run_convergence_rate(const ExperimentConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg);
  const detail::QubitModel model(cfg.kappa);
  const auto n = static_cast<std::int64_t>(
      std::llround(cfg.duration / cfg.dt));
  const std::size_t nb = cfg.b_values.size();

  std::vector<double> acc_any(static_cast<std::size_t>(n), 0.0);
  std::vector<double> acc_truth(static_cast<std::size_t>(n), 0.0);

  for (int run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const double b_truth_abs = detail::pick_truth(cfg, run_seed);
    SdeConfig sde{cfg.dt, derive_seed(run_seed, kStreamTruth), true, true};
    const TruthTrajectory traj = simulate_truth(
        model.rho0, b_truth_abs * model.h0, model.l, cfg.duration, sde, n);

    std::vector<QubitMember> members = detail::initial_qubit_ensemble(cfg);
    std::size_t truth_idx = 0;
    for (std::size_t i = 0; i < nb; ++i)
      if (cfg.b_values[i] * cfg.kappa == b_truth_abs) truth_idx = i;

    for (std::int64_t k = 1; k <= n; ++k) {
      members = qubit_ensemble_step(std::move(members), cfg.kappa,
                                    traj.record.increments
                                        [static_cast<std::size_t>(k - 1)],
                                    cfg.dt);
      double wmax = 0.0;
      for (const QubitMember& m : members) wmax = std::max(wmax, m.weight);
      acc_any[static_cast<std::size_t>(k - 1)] += wmax > cfg.alpha;
      acc_truth[static_cast<std::size_t>(k - 1)] +=
          members[truth_idx].weight > cfg.alpha;
    }
  }

  const double inv_runs = 1.0 / static_cast<double>(cfg.n_runs);
  {
    auto out = open_output_file((dir / "ialpha.csv").string());
    out << "t,mean_I_alpha,mean_I_alpha_truth\n";
    for (std::int64_t k = 1; k <= n; ++k) {
      const double row[] = {static_cast<double>(k) * cfg.dt,
                            acc_any[static_cast<std::size_t>(k - 1)] *
                                inv_runs,
                            acc_truth[static_cast<std::size_t>(k - 1)] *
                                inv_runs};
      write_csv_row(out, row);
    }
  }

  json summary = {{"scenario", "convergence_rate"},
                  {"kappa", cfg.kappa},
                  {"b_values", cfg.b_values},
                  {"b_truth", cfg.sample_truth ? json("sample")
                                               : json(cfg.b_truth)},
                  {"alpha", cfg.alpha},
                  {"dt", cfg.dt},
                  {"duration", cfg.duration},
                  {"n_runs", cfg.n_runs},
                  {"seed", cfg.seed},
                  {"final_mean_I_alpha", acc_any.back() * inv_runs},
                  {"final_mean_I_alpha_truth", acc_truth.back() * inv_runs}};
  auto out = open_output_file((dir / "summary.json").string());
  out << summary.dump(2) << '\n';
  return summary;
}

// Liu-West particle filter over a continuous prior: posterior snapshots,
// kernel density estimates and the final parameter estimate.
inline json run_particle_filter(const ExperimentConfig& cfg) {
  const auto dir = detail::prepare_out_dir(cfg);
  const detail::QubitModel model(cfg.kappa);
  const auto n = static_cast<std::int64_t>(
      std::llround(cfg.duration / cfg.dt));
  const double lo = cfg.prior_lo * cfg.kappa;
  const double hi = cfg.prior_hi * cfg.kappa;

  // Snapshot step indices: n_snapshots equally spaced times plus t = 0.
  std::vector<std::int64_t> snaps{0};
  for (int s = 1; s <= cfg.n_snapshots; ++s) {
    const auto k = static_cast<std::int64_t>(std::llround(
        static_cast<double>(s) * static_cast<double>(n) /
        static_cast<double>(cfg.n_snapshots)));
    if (k > snaps.back()) snaps.push_back(k);
  }

  json runs = json::array();
  std::vector<double> abs_errors;
  for (int run = 0; run < cfg.n_runs; ++run) {
    const std::uint64_t run_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const double b_truth_abs = cfg.b_truth * cfg.kappa;
    SdeConfig sde{cfg.dt, derive_seed(run_seed, kStreamTruth), true, true};
    const TruthTrajectory traj = simulate_truth(
        model.rho0, b_truth_abs * model.h0, model.l, cfg.duration, sde, n);

    QubitParticleSet ps = init_qubit_particles(
        cfg.n_particles, lo, hi, 0.0, cfg.kappa,
        derive_seed(run_seed, kStreamFilter));

    DensityGrid density;
    density.grid = kde_grid(lo, hi, cfg.kde.grid_points);
    const Support support{lo, hi};

    auto out = open_output_file(
        (dir / ("run_" + std::to_string(run) + ".csv")).string());
    {
      std::vector<std::string> header{"t", "resample_count"};
      for (int i = 1; i <= cfg.n_particles; ++i)
        header.push_back("theta_" + std::to_string(i));
      for (int i = 1; i <= cfg.n_particles; ++i)
        header.push_back("b_" + std::to_string(i));
      for (int i = 1; i <= cfg.n_particles; ++i)
        header.push_back("w_" + std::to_string(i));
      write_csv_header(out, header);
    }
    const auto snapshot = [&](std::int64_t k) {
      const double t = static_cast<double>(k) * cfg.dt;
      std::vector<double> row{t, static_cast<double>(ps.resample_count)};
      for (const QubitMember& m : ps.members) row.push_back(m.theta);
      for (const QubitMember& m : ps.members) row.push_back(m.b);
      for (const QubitMember& m : ps.members) row.push_back(m.weight);
      write_csv_row(out, row);

      std::vector<double> b(ps.members.size()), w(ps.members.size());
      for (std::size_t i = 0; i < ps.members.size(); ++i) {
        b[i] = ps.members[i].b;
        w[i] = ps.members[i].weight;
      }
      density.times.push_back(t);
      density.mass.push_back(
          weighted_kde(b, w, density.grid, cfg.kde.bandwidth, support));
    };

    std::size_t next_snap = 0;
    if (snaps[next_snap] == 0) {
      snapshot(0);
      ++next_snap;
    }
    for (std::int64_t k = 1; k <= n; ++k) {
      ps = qubit_pf_step(ps, traj.record.increments
                                 [static_cast<std::size_t>(k - 1)],
                         cfg.dt, cfg.resample);
      if (next_snap < snaps.size() && snaps[next_snap] == k) {
        snapshot(k);
        ++next_snap;
      }
    }

    const double b_hat = qubit_posterior_mean_b(ps.members);
    const double sigma_b = qubit_posterior_sd_b(ps.members);
    const double abs_err = std::abs(b_hat - b_truth_abs) / cfg.kappa;
    abs_errors.push_back(abs_err);

    const std::string density_name =
        run == 0 ? "density.csv" : "density_" + std::to_string(run) + ".csv";
    auto dens_out = open_output_file((dir / density_name).string());
    density.to_csv(dens_out);

    runs.push_back({{"idx", run},
                    {"b_hat", b_hat / cfg.kappa},
                    {"sigma_b_hat", sigma_b / cfg.kappa},
                    {"resample_count", ps.resample_count},
                    {"abs_error", abs_err}});
  }

  json summary = {{"scenario", "particle_filter"},
                  {"kappa", cfg.kappa},
                  {"b_truth", cfg.b_truth},
                  {"prior", {{"lo", cfg.prior_lo}, {"hi", cfg.prior_hi}}},
                  {"n_particles", cfg.n_particles},
                  {"resample",
                   {{"a", cfg.resample.a},
                    {"h", cfg.resample.h},
                    {"threshold", cfg.resample.threshold},
                    {"link_a_h", cfg.resample.link_a_h}}},
                  {"dt", cfg.dt},
                  {"duration", cfg.duration},
                  {"n_runs", cfg.n_runs},
                  {"seed", cfg.seed},
                  {"runs", runs},
                  {"median_abs_error", detail::median(abs_errors)}};
  auto out = open_output_file((dir / "summary.json").string());
  out << summary.dump(2) << '\n';
  return summary;
}

// Algebraic observability analysis of the extended parameter-estimation
// model; no trajectories are integrated.
inline json run_observability(const ExperimentConfig& cfg) {
  std::vector<Operator> atomic{identity(2), pauli_x(), pauli_z()};
  if (cfg.atomic_basis == "full") atomic.push_back(pauli_y());

  const Operator h0 = pauli_y();
  const Operator l = std::sqrt(cfg.kappa) * pauli_z();

  // Base check: the filter with a known, generic field (b = kappa). Any
  // nonzero field gives the same observable space for this model family.
  const ObservabilityReport base =
      observable_space(cfg.kappa * h0, l, atomic);

  std::vector<double> values_abs;
  values_abs.reserve(cfg.b_values.size());
  for (double b : cfg.b_values) values_abs.push_back(b * cfg.kappa);
  const ExtendedModel ext = extend_model(h0, l, values_abs, atomic);
  const ObservabilityReport report =
      observable_space(ext.h_ext, ext.l_ext, ext.ambient);

  const CorollaryVerdict verdict =
      corollary_check(values_abs, base.observable);

  json weights_ok;
  if (!cfg.initial_weights.empty())
    weights_ok = absolute_continuity_check(cfg.initial_weights);
  else
    weights_ok = true;  // uniform prior is strictly positive

  const auto report_json = [](const ObservabilityReport& r) {
    return json{{"dim_observable", r.dim_observable},
                {"dim_ambient", r.dim_ambient},
                {"observable", r.observable},
                {"iterations", r.iterations}};
  };

  json summary = {{"scenario", "observability"},
                  {"kappa", cfg.kappa},
                  {"b_values", cfg.b_values},
                  {"atomic_basis", cfg.atomic_basis},
                  {"base", report_json(base)},
                  {"report", report_json(report)},
                  {"corollary", to_string(verdict)},
                  {"absolute_continuity", weights_ok}};
  if (cfg.out_dir != ".") {
    const auto dir = detail::prepare_out_dir(cfg);
    auto out = open_output_file((dir / "summary.json").string());
    out << summary.dump(2) << '\n';
  }
  return summary;
}

inline json run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  switch (cfg.scenario) {
    case Scenario::kKnownField: return run_known_field(cfg);
    case Scenario::kFiniteSet: return run_finite_set(cfg);
    case Scenario::kConvergenceRate: return run_convergence_rate(cfg);
    case Scenario::kParticleFilter: return run_particle_filter(cfg);
    case Scenario::kObservability: return run_observability(cfg);
  }
  throw std::logic_error("run_experiment: unhandled scenario");
}

}  // namespace qfilter
