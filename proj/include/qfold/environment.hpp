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

// Docking environment: the receptor stays fixed while discrete translations
// and rotations move the ligand. Observations are inter-chain CB distance
// maps resampled to a fixed square image.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/metrics.hpp"
#include "qfold/pdb_io.hpp"
#include "qfold/restraints.hpp"

namespace qfold {

enum class ActionKind { Translate, Rotate };
enum class ActionMode { Six, Twelve };

struct ActionSpec {
  ActionKind kind = ActionKind::Translate;
  Axis axis = Axis::X;
  int direction = +1;
  double translation_step = 1.0;  // Å
  double rotation_step = 1.0;     // degrees
};

/// Fixed ordering: translations along X, Y, Z, then rotations about X, Y, Z.
/// In Twelve mode each axis lists the + move before the - move, so index 0
/// is always "translate +X".
inline std::vector<ActionSpec> action_set(ActionMode mode, double translation_step = 1.0,
                                          double rotation_step = 1.0) {
  if (!(translation_step > 0.0) || !(rotation_step > 0.0))
    fail(ErrorCode::InvalidArgument, "action step sizes must be positive");
  std::vector<ActionSpec> out;
  for (auto kind : {ActionKind::Translate, ActionKind::Rotate}) {
    for (auto axis : {Axis::X, Axis::Y, Axis::Z}) {
      out.push_back({kind, axis, +1, translation_step, rotation_step});
      if (mode == ActionMode::Twelve) out.push_back({kind, axis, -1, translation_step, rotation_step});
    }
  }
  return out;
}

inline Pose apply_action(const Pose& pose, const ActionSpec& a) {
  Pose out = pose;
  if (a.kind == ActionKind::Translate) {
    out.transform.translation[static_cast<int>(a.axis)] += a.direction * a.translation_step;
  } else {
    out.transform.rotation =
        rotation_about_axis(a.axis, a.direction * a.rotation_step).rotation * pose.transform.rotation;
  }
  return out;
}

using Observation = Eigen::MatrixXf;

inline constexpr double kDistanceClamp = 100.0;

/// Bilinear resampling with corner pixels aligned, so equal sizes are an
/// exact copy.
inline Eigen::MatrixXd resample_bilinear(const Eigen::MatrixXd& src, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  auto coord = [](Eigen::Index i, Eigen::Index n_out, Eigen::Index n_in) {
    return n_out > 1 ? static_cast<double>(i) * static_cast<double>(n_in - 1) / static_cast<double>(n_out - 1)
                     : 0.0;
  };
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double y = coord(r, rows, src.rows());
    const auto y0 = static_cast<Eigen::Index>(std::floor(y));
    const auto y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
    const double fy = y - static_cast<double>(y0);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double x = coord(c, cols, src.cols());
      const auto x0 = static_cast<Eigen::Index>(std::floor(x));
      const auto x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = src(y0, x0) * (1.0 - fx) + src(y0, x1) * fx;
      const double bottom = src(y1, x0) * (1.0 - fx) + src(y1, x1) * fx;
      out(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

/// Clamp to [0, 100] Å, scale to [0, 1] and resample to size x size.
inline Observation distance_map_image(const Eigen::MatrixXd& distances, int size) {
  if (size < 1) fail(ErrorCode::InvalidArgument, "observation size must be positive");
  const Eigen::MatrixXd scaled = distances.cwiseMax(0.0).cwiseMin(kDistanceClamp) / kDistanceClamp;
  return resample_bilinear(scaled, size, size).cast<float>();
}

inline Observation encode_observation(const Pose& pose, const Structure& receptor, const Structure& ligand,
                                      int size = 64) {
  if (size < 8) fail(ErrorCode::InvalidArgument, "observation size must be at least 8");
  return distance_map_image(distance_map(receptor, ligand, pose).matrix, size);
}

enum class RewardKind { ContactEnergy, RmsdToNative };

struct RewardStrategy {
  RewardKind kind = RewardKind::ContactEnergy;
  std::optional<Dimer> native;  // required for RmsdToNative

  static RewardStrategy contact_energy() { return {}; }
  static RewardStrategy rmsd_to_native(Dimer native) { return {RewardKind::RmsdToNative, std::move(native)}; }
};

enum class InitialPoseSampler { RandomShell, SeparatedAxis, Identity };

struct EpisodeConfig {
  int max_steps = 2000;
  double success_energy = 0.0;
  InitialPoseSampler sampler = InitialPoseSampler::RandomShell;
  int observation_size = 64;
  ActionMode action_mode = ActionMode::Twelve;
  double translation_step = 1.0;
  double rotation_step = 1.0;
  DistanceKind distance_kind = DistanceKind::MinHeavy;
  bool probability_weight = false;
  double shell_margin = 10.0;  // Å added to the two bounding radii
};

/// Start pose of the ligand. RandomShell draws a uniform rotation and puts
/// the ligand centroid uniformly on a sphere about the receptor centroid
/// whose radius is the sum of both bounding radii plus `margin`.
inline Pose sample_initial_pose(const Structure& receptor, const Structure& ligand, InitialPoseSampler sampler,
                                std::uint64_t seed, double margin = 10.0) {
  const auto rh = heavy_atom_coords(receptor);
  const auto lh = heavy_atom_coords(ligand);
  const Vec3 rc = centroid(rh);
  const Vec3 lc = centroid(lh);
  const double radius = bounding_radius(rh, rc) + bounding_radius(lh, lc) + margin;
  Pose pose = Pose::identity(lc);
  switch (sampler) {
    case InitialPoseSampler::Identity:
      break;
    case InitialPoseSampler::SeparatedAxis:
      pose.transform.translation = rc + radius * Vec3::UnitX() - lc;
      break;
    case InitialPoseSampler::RandomShell: {
      std::mt19937_64 rng(seed);
      pose.transform.rotation = random_rotation(rng);
      pose.transform.translation = rc + radius * random_unit_vector(rng) - lc;
      break;
    }
  }
  return pose;
}

struct EnvState {
  Pose pose;
  Observation observation;
  double energy = 0.0;
  double quality = 0.0;  // the value whose decrease is rewarded
  int step_count = 0;
  bool done = false;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;  // goal reached, as opposed to running out of steps
};

/// One line of an exported episode trace.
struct TraceRecord {
  int step = 0;
  int action = 0;
  double reward = 0.0;
  double energy = 0.0;
};

inline void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const auto& r : trace)
    out << r.step << ' ' << r.action << ' ' << detail::format_real(r.reward) << ' '
        << detail::format_real(r.energy) << '\n';
}

class DockingEnv {
 public:
  using State = EnvState;

  DockingEnv(Structure receptor, Structure ligand, ContactSet contacts,
             RewardStrategy reward = RewardStrategy::contact_energy(), EpisodeConfig config = {})
      : receptor_(std::move(receptor)),
        ligand_(std::move(ligand)),
        contacts_(std::move(contacts)),
        reward_(std::move(reward)),
        config_(config),
        energy_(init_energy()),
        actions_(action_set(config_.action_mode, config_.translation_step, config_.rotation_step)) {
    if (config_.max_steps < 1) fail(ErrorCode::Config, "max_steps must be at least 1");
    if (config_.observation_size < 8) fail(ErrorCode::Config, "observation size must be at least 8");
    if (reward_.kind == RewardKind::RmsdToNative && !reward_.native)
      fail(ErrorCode::Config, "RMSD reward needs a native structure");
    if (reward_.native) {
      const auto& n = *reward_.native;
      if (n.receptor.length() != receptor_.length() || n.ligand.length() != ligand_.length())
        fail(ErrorCode::DimensionMismatch, "native chains differ in length from the inputs");
      native_ca_ = ca_coords(n.receptor);
      const auto nl = ca_coords(n.ligand);
      native_ca_.insert(native_ca_.end(), nl.begin(), nl.end());
    }
    const auto rh = heavy_atom_coords(receptor_);
    const auto lh = heavy_atom_coords(ligand_);
    receptor_center_ = centroid(rh);
    rotation_center_ = centroid(lh);
    shell_radius_ = bounding_radius(rh, receptor_center_) + bounding_radius(lh, rotation_center_) + config_.shell_margin;
    receptor_cb_ = cb_coords(receptor_);
    ligand_cb_ = cb_coords(ligand_);
    receptor_ca_ = ca_coords(receptor_);
    ligand_ca_ = ca_coords(ligand_);
  }

  const Structure& receptor() const { return receptor_; }
  const Structure& ligand() const { return ligand_; }
  const ContactSet& contacts() const { return contacts_; }
  const EpisodeConfig& config() const { return config_; }
  const ContactEnergy& energy_function() const { return energy_; }
  const std::vector<ActionSpec>& actions() const { return actions_; }
  int action_count() const { return static_cast<int>(actions_.size()); }
  int observation_size() const { return config_.observation_size; }
  const Vec3& rotation_center() const { return rotation_center_; }
  const Vec3& receptor_center() const { return receptor_center_; }
  double shell_radius() const { return shell_radius_; }
  bool has_native() const { return reward_.native.has_value(); }

  double energy(const Pose& pose) const { return energy_.energy(pose); }

  /// Complex CA RMSD against the native structure, if one was supplied.
  std::optional<double> native_rmsd(const Pose& pose) const {
    if (!reward_.native) return std::nullopt;
    std::vector<Vec3> model = receptor_ca_;
    for (const auto& p : ligand_ca_) model.push_back(pose.apply(p));
    return kabsch_superpose(model, native_ca_).rmsd;
  }

  std::optional<double> native_rmsd(const EnvState& s) const { return native_rmsd(s.pose); }

  Observation observe(const Pose& pose) const {
    Eigen::MatrixXd d(static_cast<Eigen::Index>(ligand_cb_.size()), static_cast<Eigen::Index>(receptor_cb_.size()));
    const RigidTransform t = pose.as_transform();
    for (std::size_t i = 0; i < ligand_cb_.size(); ++i) {
      const Vec3 p = t.apply(ligand_cb_[i]);
      for (std::size_t j = 0; j < receptor_cb_.size(); ++j)
        d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (p - receptor_cb_[j]).norm();
    }
    return distance_map_image(d, config_.observation_size);
  }

  EnvState make_state(const Pose& pose, int step_count = 0) const {
    EnvState s;
    s.pose = pose;
    s.observation = observe(pose);
    s.energy = energy_.energy(pose);
    if (!std::isfinite(s.energy)) fail(ErrorCode::NonFinite, "contact energy is not finite");
    s.quality = reward_.kind == RewardKind::ContactEnergy ? s.energy : *native_rmsd(pose);
    s.step_count = step_count;
    s.done = s.energy <= config_.success_energy;
    return s;
  }

  Pose initial_pose(std::uint64_t seed) const {
    return sample_initial_pose(receptor_, ligand_, config_.sampler, seed, config_.shell_margin);
  }

  /// Deterministic in `seed`. A start that already satisfies every restraint
  /// is returned with done = true.
  EnvState reset(std::uint64_t seed) const { return make_state(initial_pose(seed)); }

  StepResult step(const EnvState& state, int action) const {
    if (action < 0 || action >= action_count())
      fail(ErrorCode::InvalidArgument, "action index " + std::to_string(action) + " out of range");
    return step(state, actions_[static_cast<std::size_t>(action)]);
  }

  StepResult step(const EnvState& state, const ActionSpec& action) const {
    if (state.done) fail(ErrorCode::InvalidState, "step called on a finished episode");
    if (state.step_count >= config_.max_steps) fail(ErrorCode::InvalidState, "step budget exhausted");
    StepResult out;
    out.next = make_state(apply_action(state.pose, action), state.step_count + 1);
    out.reward = state.quality - out.next.quality;
    out.terminal = out.next.energy <= config_.success_energy;
    out.done = out.terminal || out.next.step_count >= config_.max_steps;
    out.next.done = out.done;
    return out;
  }

 private:
  ContactEnergy init_energy() const {
    if (contacts_.empty()) fail(ErrorCode::EmptyContacts, "environment needs at least one contact restraint");
    return ContactEnergy(receptor_, ligand_, contacts_, config_.distance_kind, config_.probability_weight);
  }

  Structure receptor_;
  Structure ligand_;
  ContactSet contacts_;
  RewardStrategy reward_;
  EpisodeConfig config_;
  ContactEnergy energy_;
  std::vector<ActionSpec> actions_;
  Vec3 receptor_center_ = Vec3::Zero();
  Vec3 rotation_center_ = Vec3::Zero();
  double shell_radius_ = 0.0;
  std::vector<Vec3> receptor_cb_, ligand_cb_, receptor_ca_, ligand_ca_, native_ca_;
};

}  // namespace qfold
