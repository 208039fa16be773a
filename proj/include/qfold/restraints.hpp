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

// Inter-chain contact restraints and the contact-energy objective.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/pdb_io.hpp"

namespace qfold {

inline constexpr double kContactThreshold = 6.0;
inline constexpr double kDefaultSd = 0.1;

struct ContactRestraint {
  int ligand_res = 0;    // 1-based ordinal in the ligand chain
  int receptor_res = 0;  // 1-based ordinal in the receptor chain
  double lb = 0.0;
  double ub = kContactThreshold;
  double sd = kDefaultSd;
  std::optional<double> probability;

  bool operator==(const ContactRestraint&) const = default;
};

struct ContactSet {
  std::vector<ContactRestraint> restraints;
  int ligand_len = 0;
  int receptor_len = 0;

  bool empty() const { return restraints.empty(); }
  std::size_t size() const { return restraints.size(); }

  /// Throws unless bounds, softness and ordinals are sane and pairs are unique.
  /// Zero lengths skip the ordinal range check.
  void validate() const {
    std::set<std::pair<int, int>> seen;
    for (const auto& r : restraints) {
      const std::string where = "contact (" + std::to_string(r.ligand_res) + ", " +
                                std::to_string(r.receptor_res) + ")";
      if (!(r.lb <= r.ub)) fail(ErrorCode::InvalidArgument, where + ": lb > ub");
      if (!(r.sd > 0.0)) fail(ErrorCode::InvalidArgument, where + ": sd must be positive");
      if (r.ligand_res < 1 || r.receptor_res < 1 || (ligand_len > 0 && r.ligand_res > ligand_len) ||
          (receptor_len > 0 && r.receptor_res > receptor_len))
        fail(ErrorCode::InvalidArgument, where + ": residue ordinal out of range");
      if (r.probability && (*r.probability < 0.0 || *r.probability > 1.0))
        fail(ErrorCode::InvalidArgument, where + ": probability outside [0, 1]");
      if (!seen.emplace(r.ligand_res, r.receptor_res).second)
        fail(ErrorCode::DuplicateContact, where + " listed twice");
    }
  }
};

/// Contact penalty for one restraint at distance x. Zero on [lb, ub],
/// quadratic in units of sd just outside, and linear beyond ub + sd. The
/// linear branch is offset by 1 so the function is continuous at ub + sd.
inline double restraint_energy(double x, const ContactRestraint& r) {
  if (x < r.lb) {
    const double z = (x - r.lb) / r.sd;
    return z * z;
  }
  if (x <= r.ub) return 0.0;
  if (x <= r.ub + r.sd) {
    const double z = (x - r.ub) / r.sd;
    return z * z;
  }
  return 1.0 + (x - (r.ub + r.sd)) / r.sd;
}

/// d restraint_energy / dx. At ub + sd the linear slope is returned.
inline double restraint_energy_derivative(double x, const ContactRestraint& r) {
  if (x < r.lb) return 2.0 * (x - r.lb) / (r.sd * r.sd);
  if (x <= r.ub) return 0.0;
  if (x < r.ub + r.sd) return 2.0 * (x - r.ub) / (r.sd * r.sd);
  return 1.0 / r.sd;
}

inline double min_heavy_atom_distance(const Residue& a, const Residue& b) {
  auto has_heavy = [](const Residue& r) {
    return std::any_of(r.atoms.begin(), r.atoms.end(), [](const Atom& x) { return x.is_heavy; });
  };
  if (!has_heavy(a)) fail(ErrorCode::InvalidArgument, "residue " + std::to_string(a.index) + " has no heavy atoms");
  if (!has_heavy(b)) fail(ErrorCode::InvalidArgument, "residue " + std::to_string(b.index) + " has no heavy atoms");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& x : a.atoms) {
    if (!x.is_heavy) continue;
    for (const auto& y : b.atoms)
      if (y.is_heavy) best = std::min(best, (x.coord - y.coord).squaredNorm());
  }
  return std::sqrt(best);
}

namespace detail {

struct ResidueSphere {
  Vec3 center;
  double radius;
};

inline std::vector<ResidueSphere> residue_spheres(const Structure& s) {
  std::vector<ResidueSphere> out;
  out.reserve(s.residues.size());
  for (const auto& r : s.residues) {
    std::vector<Vec3> pts;
    for (const auto& a : r.atoms)
      if (a.is_heavy) pts.push_back(a.coord);
    const Vec3 c = centroid(pts);
    out.push_back({c, bounding_radius(pts, c)});
  }
  return out;
}

}  // namespace detail

/// Residue pairs (ligand i, receptor j) whose closest heavy atoms are within
/// `threshold`. Each gets lb = 0, ub = threshold, sd = 0.1, probability 1.
inline ContactSet extract_true_contacts(const Structure& receptor, const Structure& ligand,
                                        double threshold = kContactThreshold) {
  ContactSet set;
  set.ligand_len = static_cast<int>(ligand.length());
  set.receptor_len = static_cast<int>(receptor.length());
  const auto ls = detail::residue_spheres(ligand);
  const auto rs = detail::residue_spheres(receptor);
  for (std::size_t i = 0; i < ligand.residues.size(); ++i) {
    for (std::size_t j = 0; j < receptor.residues.size(); ++j) {
      if ((ls[i].center - rs[j].center).norm() - ls[i].radius - rs[j].radius > threshold) continue;
      if (min_heavy_atom_distance(ligand.residues[i], receptor.residues[j]) <= threshold) {
        ContactRestraint r;
        r.ligand_res = static_cast<int>(i) + 1;
        r.receptor_res = static_cast<int>(j) + 1;
        r.lb = 0.0;
        r.ub = threshold;
        r.sd = kDefaultSd;
        r.probability = 1.0;
        set.restraints.push_back(r);
      }
    }
  }
  return set;
}

/// Ligand-by-receptor matrix of CB (CA for glycine) distances.
struct DistanceMap {
  Eigen::MatrixXd matrix;  // (ligand residue i, receptor residue j)
};

inline DistanceMap distance_map(const Structure& receptor, const Structure& ligand, const Pose& ligand_pose) {
  const auto rc = cb_coords(receptor);
  const auto lc = cb_coords(ligand);
  DistanceMap m;
  m.matrix.resize(static_cast<Eigen::Index>(lc.size()), static_cast<Eigen::Index>(rc.size()));
  for (std::size_t i = 0; i < lc.size(); ++i) {
    const Vec3 p = ligand_pose.apply(lc[i]);
    for (std::size_t j = 0; j < rc.size(); ++j)
      m.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (p - rc[j]).norm();
  }
  return m;
}

enum class DistanceKind { CB, MinHeavy };

/// Contact energy bound to one receptor/ligand pair. Evaluation only moves
/// the ligand atoms that take part in some restraint.
///
/// For MinHeavy the gradient follows the closest atom pair of each
/// restraint, which is a subgradient where two pairs tie.
class ContactEnergy {
 public:
  ContactEnergy(const Structure& receptor, const Structure& ligand, const ContactSet& contacts,
                DistanceKind kind = DistanceKind::MinHeavy, bool probability_weight = false)
      : kind_(kind) {
    if (contacts.empty()) fail(ErrorCode::EmptyContacts, "contact energy needs at least one restraint");
    ContactSet bound = contacts;
    bound.ligand_len = static_cast<int>(ligand.length());
    bound.receptor_len = static_cast<int>(receptor.length());
    bound.validate();

    std::vector<int> group_of(ligand.length(), -1);
    for (const auto& r : contacts.restraints) {
      Term t;
      t.restraint = r;
      t.weight = probability_weight ? r.probability.value_or(1.0) : 1.0;
      const auto& rres = receptor.residues[static_cast<std::size_t>(r.receptor_res - 1)];
      t.receptor_points = points_of(rres);
      auto& g = group_of[static_cast<std::size_t>(r.ligand_res - 1)];
      if (g < 0) {
        g = static_cast<int>(group_offsets_.size());
        group_offsets_.push_back(ligand_points_.size());
        for (const auto& p : points_of(ligand.residues[static_cast<std::size_t>(r.ligand_res - 1)]))
          ligand_points_.push_back(p);
      }
      t.ligand_group = g;
      terms_.push_back(std::move(t));
    }
    group_offsets_.push_back(ligand_points_.size());
  }

  std::size_t size() const { return terms_.size(); }
  DistanceKind kind() const { return kind_; }

  double operator()(const Pose& pose) const { return energy(pose); }

  double energy(const Pose& pose) const {
    const auto moved = move_ligand(pose);
    double e = 0.0;
    for (const auto& t : terms_) e += t.weight * restraint_energy(closest(t, moved).distance, t.restraint);
    return e;
  }

  /// Restraint distances at `pose`, in restraint order.
  std::vector<double> distances(const Pose& pose) const {
    const auto moved = move_ligand(pose);
    std::vector<double> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(closest(t, moved).distance);
    return out;
  }

  /// Gradient of the energy of perturb_pose(base, delta) with respect to delta.
  PoseParams gradient(const Pose& base, const PoseParams& delta = PoseParams::Zero()) const {
    const Pose pose = perturb_pose(base, delta);
    const auto moved = move_ligand(pose);
    const auto dr = euler_rotation_derivatives(delta[3], delta[4], delta[5]);
    PoseParams g = PoseParams::Zero();
    for (const auto& t : terms_) {
      const auto c = closest(t, moved);
      const double de = t.weight * restraint_energy_derivative(c.distance, t.restraint);
      if (de == 0.0 || c.distance == 0.0) continue;
      const Vec3 dir = (moved[c.ligand_index] - t.receptor_points[c.receptor_index]) / c.distance;
      const Vec3 u = base.transform.rotation * (ligand_points_[c.ligand_index] - pose.rotation_center);
      g.head<3>() += de * dir;
      for (int k = 0; k < 3; ++k) g[3 + k] += de * dir.dot(dr[static_cast<std::size_t>(k)] * u);
    }
    return g;
  }

 private:
  struct Term {
    ContactRestraint restraint;
    double weight = 1.0;
    std::vector<Vec3> receptor_points;
    int ligand_group = 0;
  };
  struct Closest {
    double distance;
    std::size_t ligand_index;
    std::size_t receptor_index;
  };

  std::vector<Vec3> points_of(const Residue& r) const {
    std::vector<Vec3> pts;
    if (kind_ == DistanceKind::CB) {
      pts.push_back(cb_coordinate(r));
      return pts;
    }
    for (const auto& a : r.atoms)
      if (a.is_heavy) pts.push_back(a.coord);
    if (pts.empty()) fail(ErrorCode::InvalidArgument, "residue " + std::to_string(r.index) + " has no heavy atoms");
    return pts;
  }

  std::vector<Vec3> move_ligand(const Pose& pose) const {
    const RigidTransform t = pose.as_transform();
    std::vector<Vec3> moved(ligand_points_.size());
    for (std::size_t i = 0; i < ligand_points_.size(); ++i) moved[i] = t.apply(ligand_points_[i]);
    return moved;
  }

  Closest closest(const Term& t, const std::vector<Vec3>& moved) const {
    const auto g = static_cast<std::size_t>(t.ligand_group);
    Closest best{std::numeric_limits<double>::infinity(), 0, 0};
    for (std::size_t i = group_offsets_[g]; i < group_offsets_[g + 1]; ++i) {
      for (std::size_t j = 0; j < t.receptor_points.size(); ++j) {
        const double d2 = (moved[i] - t.receptor_points[j]).squaredNorm();
        if (d2 < best.distance) best = {d2, i, j};
      }
    }
    best.distance = std::sqrt(best.distance);
    return best;
  }

  DistanceKind kind_;
  std::vector<Term> terms_;
  std::vector<Vec3> ligand_points_;
  std::vector<std::size_t> group_offsets_;
};

inline double contact_energy(const Pose& pose, const Structure& receptor, const Structure& ligand,
                             const ContactSet& contacts, DistanceKind kind = DistanceKind::MinHeavy) {
  return ContactEnergy(receptor, ligand, contacts, kind).energy(pose);
}

/// Gradient with respect to `params`, interpreted as a perturbation of `base`.
inline PoseParams contact_energy_gradient(const PoseParams& params, const Pose& base, const Structure& receptor,
                                          const Structure& ligand, const ContactSet& contacts,
                                          DistanceKind kind = DistanceKind::CB) {
  return ContactEnergy(receptor, ligand, contacts, kind).gradient(base, params);
}

// ---------------------------------------------------------------------------
// Contact files: one restraint per line, "i j lb ub [p [sd]]" with i the
// ligand ordinal and j the receptor ordinal (both 1-based). '#' starts a
// comment. A probability of "-" means none was given.

namespace detail {

inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  return s;
}

inline double parse_real(const std::string& tok, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
    fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  return v;
}

inline int parse_ordinal(const std::string& tok, std::size_t line_no) {
  int v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 1)
    fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": bad residue ordinal '" + tok + "'");
  return v;
}

}  // namespace detail

inline ContactSet read_contact_file(std::istream& in) {
  ContactSet set;
  std::set<std::pair<int, int>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok.size() < 4 || tok.size() > 6)
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": expected 'i j lb ub [p [sd]]'");
    ContactRestraint r;
    r.ligand_res = detail::parse_ordinal(tok[0], line_no);
    r.receptor_res = detail::parse_ordinal(tok[1], line_no);
    r.lb = detail::parse_real(tok[2], line_no);
    r.ub = detail::parse_real(tok[3], line_no);
    if (tok.size() >= 5 && tok[4] != "-") r.probability = detail::parse_real(tok[4], line_no);
    if (tok.size() == 6) r.sd = detail::parse_real(tok[5], line_no);
    if (r.lb > r.ub || r.sd <= 0.0)
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": need lb <= ub and sd > 0");
    if (r.probability && (*r.probability < 0.0 || *r.probability > 1.0))
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": probability outside [0, 1]");
    if (!seen.emplace(r.ligand_res, r.receptor_res).second)
      fail(ErrorCode::DuplicateContact, "line " + std::to_string(line_no) + ": pair (" + tok[0] + ", " +
                                            tok[1] + ") already listed");
    set.restraints.push_back(r);
  }
  return set;
}

inline ContactSet read_contact_file(const std::string& path) {
  std::istringstream in(read_text_file(path));
  return read_contact_file(in);
}

inline void write_contact_file(const ContactSet& set, std::ostream& out) {
  for (const auto& r : set.restraints) {
    out << r.ligand_res << ' ' << r.receptor_res << ' ' << detail::format_real(r.lb) << ' '
        << detail::format_real(r.ub);
    if (r.probability || r.sd != kDefaultSd) out << ' ' << (r.probability ? detail::format_real(*r.probability) : "-");
    if (r.sd != kDefaultSd) out << ' ' << detail::format_real(r.sd);
    out << '\n';
  }
  if (!out) fail(ErrorCode::Io, "failed writing contact file");
}

struct ContactAccuracy {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Set-overlap accuracy of predicted residue pairs against native ones.
inline ContactAccuracy contact_prf(const ContactSet& predicted, const ContactSet& native) {
  std::set<std::pair<int, int>> truth;
  for (const auto& r : native.restraints) truth.emplace(r.ligand_res, r.receptor_res);
  std::set<std::pair<int, int>> pred;
  for (const auto& r : predicted.restraints) pred.emplace(r.ligand_res, r.receptor_res);
  std::size_t hit = 0;
  for (const auto& p : pred) hit += truth.count(p);
  ContactAccuracy acc;
  if (!pred.empty()) acc.precision = static_cast<double>(hit) / static_cast<double>(pred.size());
  if (!truth.empty()) acc.recall = static_cast<double>(hit) / static_cast<double>(truth.size());
  if (acc.precision + acc.recall > 0.0) acc.f1 = 2.0 * acc.precision * acc.recall / (acc.precision + acc.recall);
  return acc;
}

/// Adds randomly chosen non-native pairs to `native` until the fraction of
/// true pairs drops to `precision`. Deterministic for a given seed.
inline ContactSet degrade_contacts(const ContactSet& native, double precision, std::uint64_t seed) {
  if (!(precision > 0.0 && precision <= 1.0)) fail(ErrorCode::InvalidArgument, "precision must lie in (0, 1]");
  if (native.ligand_len <= 0 || native.receptor_len <= 0)
    fail(ErrorCode::InvalidArgument, "degrade_contacts needs chain lengths");
  ContactSet out = native;
  const auto n_true = static_cast<double>(native.size());
  const auto n_false = static_cast<std::size_t>(std::llround(n_true / precision - n_true));
  std::set<std::pair<int, int>> used;
  for (const auto& r : native.restraints) used.emplace(r.ligand_res, r.receptor_res);
  const auto capacity = static_cast<std::size_t>(native.ligand_len) * static_cast<std::size_t>(native.receptor_len);
  if (used.size() + n_false > capacity) fail(ErrorCode::InvalidArgument, "not enough residue pairs to degrade");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> li(1, native.ligand_len), rj(1, native.receptor_len);
  std::size_t added = 0;
  while (added < n_false) {
    const int i = li(rng), j = rj(rng);
    if (!used.emplace(i, j).second) continue;
    ContactRestraint r;
    r.ligand_res = i;
    r.receptor_res = j;
    r.probability = 0.5;
    out.restraints.push_back(r);
    ++added;
  }
  return out;
}

}  // namespace qfold
