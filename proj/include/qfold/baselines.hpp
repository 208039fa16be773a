// Copyright 2026 The qfold Authors.
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

// Classical optimisers over the same contact energy the agent sees:
// gradient descent with backtracking, Metropolis Monte Carlo, and simulated
// annealing (a CNS-style stand-in).

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qfold/environment.hpp"
#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/pdb_io.hpp"
#include "qfold/restraints.hpp"

namespace qfold {

enum class OptimizerVariant { GD, MC, SA };

struct OptimizerConfig {
  OptimizerVariant variant = OptimizerVariant::GD;
  int max_iterations = 20000;
  int restarts = 8;
  // gradient descent
  double learning_rate = 0.05;
  double backtracking = 0.5;
  double gradient_stop = 1e-6;
  double cb_upper_bound = 8.0;  // ub used while descending on CB distances
  // Monte Carlo
  double temperature = 1.0;
  double translation_sigma = 0.5;  // Å
  double rotation_sigma = 2.0;     // degrees
  // simulated annealing
  double t_start = 10.0;
  double t_end = 1e-3;

  InitialPoseSampler sampler = InitialPoseSampler::RandomShell;
  double shell_margin = 10.0;
  bool probability_weight = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iterations < 1 || restarts < 1) fail(ErrorCode::Config, "max_iterations and restarts must be positive");
    if (!(learning_rate > 0.0) || !(backtracking > 0.0 && backtracking < 1.0) || gradient_stop < 0.0)
      fail(ErrorCode::Config, "need learning_rate > 0, 0 < backtracking < 1, gradient_stop >= 0");
    if (!(temperature > 0.0) || !(translation_sigma > 0.0) || !(rotation_sigma > 0.0))
      fail(ErrorCode::Config, "temperature and proposal scales must be positive");
    if (!(t_end > 0.0 && t_end < t_start)) fail(ErrorCode::Config, "need 0 < t_end < t_start");
    if (!(cb_upper_bound > 0.0)) fail(ErrorCode::Config, "cb_upper_bound must be positive");
  }
};

/// Metropolis criterion: downhill always, uphill with probability exp(-dE/T).
template <class Rng>
bool metropolis_accept(double delta_e, double temperature, Rng& rng) {
  if (!(temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be positive");
  if (delta_e <= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng) < std::exp(-delta_e / temperature);
}

struct OptimizerTraceEntry {
  int iteration = 0;
  double energy = 0.0;
  bool accepted = false;
};

struct RestartSummary {
  std::uint64_t start_seed = 0;
  double initial_energy = 0.0;
  double final_energy = 0.0;  // energy of the last state, not the best one
  double best_energy = 0.0;
  Pose best_pose;
  int iterations = 0;
  bool converged = false;  // GD: gradient norm fell to gradient_stop
  bool stalled = false;    // GD: line search found no decrease before convergence
  bool hit_cap = false;    // iteration budget exhausted
  double final_gradient_norm = 0.0;
  std::vector<OptimizerTraceEntry> trace;
};

struct OptimizeResult {
  Pose best_pose;
  double best_energy = std::numeric_limits<double>::infinity();
  int best_restart = 0;
  std::vector<RestartSummary> restarts;
};

/// "restart iteration energy accepted" per line, restarts in order.
inline void write_optimizer_trace(std::ostream& out, const OptimizeResult& result) {
  for (std::size_t r = 0; r < result.restarts.size(); ++r)
    for (const auto& e : result.restarts[r].trace)
      out << r << ' ' << e.iteration << ' ' << detail::format_real(e.energy) << ' ' << (e.accepted ? 1 : 0) << '\n';
}

namespace detail {

inline void check_energy(double e) {
  if (!std::isfinite(e)) fail(ErrorCode::NonFinite, "contact energy became non-finite during optimisation");
}

// Descent on one objective; `report` is the shared objective logged in the trace.
inline void gradient_descent_stage(const ContactEnergy& objective, const ContactEnergy& report,
                                   const OptimizerConfig& cfg, double rotation_scale, int budget,
                                   RestartSummary& rs, Pose& pose) {
  double e = objective.energy(pose);
  check_energy(e);
  double alpha = cfg.learning_rate;
  const double s2 = rotation_scale * rotation_scale;
  for (int it = 0; it < budget; ++it) {
    const PoseParams g = objective.gradient(pose);
    // Rotations are measured as arc length at the ligand's radius of gyration.
    PoseParams dir = g;
    dir.tail<3>() /= s2;
    const double gnorm2 = g.head<3>().squaredNorm() + g.tail<3>().squaredNorm() / s2;
    rs.final_gradient_norm = g.norm();
    if (e == 0.0 || rs.final_gradient_norm <= cfg.gradient_stop) {
      rs.converged = true;
      return;
    }
    double step = alpha;
    bool accepted = false;
    Pose candidate;
    double ec = e;
    for (int k = 0; k < 60; ++k) {
      candidate = perturb_pose(pose, -step * dir);
      ec = objective.energy(candidate);
      check_energy(ec);
      if (ec <= e - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= cfg.backtracking;
    }
    ++rs.iterations;
    if (accepted) {
      pose = candidate;
      e = ec;
      alpha = step / cfg.backtracking;
    }
    const double shared = report.energy(pose);
    check_energy(shared);
    rs.trace.push_back({rs.iterations, shared, accepted});
    rs.final_energy = shared;
    if (shared < rs.best_energy) {
      rs.best_energy = shared;
      rs.best_pose = pose;
    }
    if (!accepted) {  // kink of the MIN_HEAVY subgradient or round-off floor
      rs.stalled = true;
      return;
    }
  }
}

inline double radius_of_gyration(const Structure& s) {
  const auto pts = heavy_atom_coords(s);
  const Vec3 c = centroid(pts);
  double sum = 0.0;
  for (const auto& p : pts) sum += (p - c).squaredNorm();
  return std::max(1.0, std::sqrt(sum / static_cast<double>(std::max<std::size_t>(pts.size(), 1))));
}

}  // namespace detail

/// Runs every restart of the configured optimiser and keeps the pose with
/// the lowest energy (earliest restart on ties). Restart r starts from the
/// sampler's pose for seed + r.
inline OptimizeResult optimize(const OptimizerConfig& cfg, const Structure& receptor, const Structure& ligand,
                               const ContactSet& contacts, std::optional<Pose> start = std::nullopt) {
  cfg.validate();
  if (contacts.empty()) fail(ErrorCode::EmptyContacts, "optimisation needs at least one contact restraint");
  const ContactEnergy shared(receptor, ligand, contacts, DistanceKind::MinHeavy, cfg.probability_weight);
  std::optional<ContactEnergy> cb_energy;
  if (cfg.variant == OptimizerVariant::GD) {
    ContactSet loose = contacts;
    for (auto& r : loose.restraints) r.ub = std::max(r.ub, cfg.cb_upper_bound);
    cb_energy.emplace(receptor, ligand, loose, DistanceKind::CB, cfg.probability_weight);
  }
  const double rotation_scale = detail::radius_of_gyration(ligand);

  OptimizeResult result;
  for (int r = 0; r < cfg.restarts; ++r) {
    RestartSummary rs;
    rs.start_seed = cfg.seed + static_cast<std::uint64_t>(r);
    Pose pose = start ? *start : sample_initial_pose(receptor, ligand, cfg.sampler, rs.start_seed, cfg.shell_margin);
    double e = shared.energy(pose);
    detail::check_energy(e);
    rs.initial_energy = rs.final_energy = rs.best_energy = e;
    rs.best_pose = pose;
    rs.trace.push_back({0, e, true});

    switch (cfg.variant) {
      case OptimizerVariant::GD: {
        const int first = cfg.max_iterations / 2;
        detail::gradient_descent_stage(*cb_energy, shared, cfg, rotation_scale, first, rs, pose);
        rs.converged = rs.stalled = false;
        detail::gradient_descent_stage(shared, shared, cfg, rotation_scale, cfg.max_iterations - rs.iterations, rs,
                                       pose);
        rs.hit_cap = !rs.converged && !rs.stalled;
        break;
      }
      case OptimizerVariant::MC:
      case OptimizerVariant::SA: {
        std::mt19937_64 rng(rs.start_seed * 0x2545F4914F6CDD1DULL + 1);
        std::normal_distribution<double> tn(0.0, cfg.translation_sigma);
        std::normal_distribution<double> rn(0.0, deg2rad(cfg.rotation_sigma));
        const double n = static_cast<double>(std::max(cfg.max_iterations - 1, 1));
        for (int it = 0; it < cfg.max_iterations; ++it) {
          const double temperature = cfg.variant == OptimizerVariant::MC
                                         ? cfg.temperature
                                         : cfg.t_start * std::pow(cfg.t_end / cfg.t_start, it / n);
          PoseParams delta;
          delta << tn(rng), tn(rng), tn(rng), rn(rng), rn(rng), rn(rng);
          const Pose candidate = perturb_pose(pose, delta);
          const double ec = shared.energy(candidate);
          detail::check_energy(ec);
          const bool accept = metropolis_accept(ec - e, temperature, rng);
          if (accept) {
            pose = candidate;
            e = ec;
          }
          ++rs.iterations;
          rs.trace.push_back({rs.iterations, e, accept});
          if (e < rs.best_energy) {
            rs.best_energy = e;
            rs.best_pose = pose;
          }
        }
        rs.final_energy = e;
        rs.hit_cap = true;
        break;
      }
    }
    if (rs.best_energy < result.best_energy) {
      result.best_energy = rs.best_energy;
      result.best_pose = rs.best_pose;
      result.best_restart = r;
    }
    result.restarts.push_back(std::move(rs));
  }
  return result;
}

}  // namespace qfold
