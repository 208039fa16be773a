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

// Idealised helical chains and dimers for fixtures and the bundled suite.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/pdb_io.hpp"

namespace qfold::synthetic {

/// Places atom d from a, b, c given |cd|, angle bcd and torsion abcd (degrees).
inline Vec3 place_atom(const Vec3& a, const Vec3& b, const Vec3& c, double bond, double angle_deg,
                       double torsion_deg) {
  const double angle = deg2rad(angle_deg), torsion = deg2rad(torsion_deg);
  const Vec3 bc = (c - b).normalized();
  const Vec3 n = (b - a).cross(bc).normalized();
  const Vec3 m = n.cross(bc);
  const Vec3 d2(-bond * std::cos(angle), bond * std::sin(angle) * std::cos(torsion),
                bond * std::sin(angle) * std::sin(torsion));
  return c + d2.x() * bc + d2.y() * m + d2.z() * n;
}

inline std::string three_letter(char one) {
  switch (one) {
    case 'A': return "ALA";
    case 'L': return "LEU";
    case 'G': return "GLY";
    case 'S': return "SER";
    case 'K': return "LYS";
    case 'E': return "GLU";
    case 'V': return "VAL";
    default: return "ALA";
  }
}

namespace detail {

inline void add_side_chain(Residue& r, char aa, const Vec3& n, const Vec3& ca, const Vec3& c) {
  if (aa == 'G') return;
  const Vec3 cb = place_atom(c, n, ca, 1.53, 110.5, -122.6);
  r.atoms.push_back({"CB", "C", cb, true});
  auto add = [&](const char* name, const char* el, const Vec3& p) { r.atoms.push_back({name, el, p, true}); };
  switch (aa) {
    case 'S': add("OG", "O", place_atom(n, ca, cb, 1.42, 110.8, -60.0)); break;
    case 'V':
      add("CG1", "C", place_atom(n, ca, cb, 1.53, 110.5, 180.0));
      add("CG2", "C", place_atom(n, ca, cb, 1.53, 110.5, -60.0));
      break;
    case 'L': {
      const Vec3 cg = place_atom(n, ca, cb, 1.53, 116.3, -60.0);
      add("CG", "C", cg);
      add("CD1", "C", place_atom(ca, cb, cg, 1.52, 110.5, 180.0));
      add("CD2", "C", place_atom(ca, cb, cg, 1.52, 110.5, 60.0));
      break;
    }
    case 'K': {
      const Vec3 cg = place_atom(n, ca, cb, 1.52, 114.1, -60.0);
      const Vec3 cd = place_atom(ca, cb, cg, 1.52, 111.3, 180.0);
      const Vec3 ce = place_atom(cb, cg, cd, 1.52, 111.3, 180.0);
      add("CG", "C", cg);
      add("CD", "C", cd);
      add("CE", "C", ce);
      add("NZ", "N", place_atom(cg, cd, ce, 1.49, 111.9, 180.0));
      break;
    }
    case 'E': {
      const Vec3 cg = place_atom(n, ca, cb, 1.52, 114.1, -60.0);
      const Vec3 cd = place_atom(ca, cb, cg, 1.52, 113.3, 180.0);
      add("CG", "C", cg);
      add("CD", "C", cd);
      add("OE1", "O", place_atom(cb, cg, cd, 1.25, 118.4, 0.0));
      add("OE2", "O", place_atom(cb, cg, cd, 1.25, 118.4, 180.0));
      break;
    }
    default: break;
  }
}

}  // namespace detail

/// Ideal alpha helix (phi -57.8, psi -47.0) for a one-letter sequence,
/// aligned with +z, axis through the origin, first residue near z = 0.
inline std::vector<Residue> ideal_helix(std::string_view sequence) {
  constexpr double phi = -57.8, psi = -47.0, omega = 180.0;
  std::vector<Vec3> n_at, ca_at, c_at;
  n_at.push_back(Vec3(0.0, 1.458 * std::cos(deg2rad(20.0)), 1.458 * std::sin(deg2rad(20.0))));
  ca_at.push_back(Vec3::Zero());
  c_at.push_back(Vec3(1.525, 0.0, 0.0));
  for (std::size_t i = 1; i < sequence.size(); ++i) {
    n_at.push_back(place_atom(n_at[i - 1], ca_at[i - 1], c_at[i - 1], 1.329, 116.2, psi));
    ca_at.push_back(place_atom(ca_at[i - 1], c_at[i - 1], n_at[i], 1.458, 121.7, omega));
    c_at.push_back(place_atom(c_at[i - 1], n_at[i], ca_at[i], 1.525, 111.2, phi));
  }
  std::vector<Residue> out;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    Residue r;
    r.index = static_cast<int>(i) + 1;
    r.name = three_letter(sequence[i]);
    r.atoms.push_back({"N", "N", n_at[i], true});
    r.atoms.push_back({"CA", "C", ca_at[i], true});
    r.atoms.push_back({"C", "C", c_at[i], true});
    const Vec3 o = i + 1 < sequence.size()
                       ? place_atom(ca_at[i + 1], n_at[i + 1], c_at[i], 1.231, 122.7, 0.0)
                       : place_atom(n_at[i], ca_at[i], c_at[i], 1.231, 120.5, psi + 180.0);
    r.atoms.push_back({"O", "O", o, true});
    detail::add_side_chain(r, sequence[i], n_at[i], ca_at[i], c_at[i]);
    out.push_back(std::move(r));
  }

  // Align the helix axis (principal axis of the CA trace) with +z.
  const Vec3 c = centroid(ca_at);
  Mat3 cov = Mat3::Zero();
  for (const auto& p : ca_at) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  Vec3 axis = eig.eigenvectors().col(2);
  if (axis.dot(ca_at.back() - ca_at.front()) < 0) axis = -axis;
  const Mat3 rot = Eigen::Quaterniond::FromTwoVectors(axis, Vec3::UnitZ()).toRotationMatrix();
  // Project the first CA onto the axis to start near z = 0.
  const double z0 = (rot * (ca_at.front() - c)).z();
  for (auto& r : out)
    for (auto& a : r.atoms) {
      a.coord = rot * (a.coord - c);
      a.coord.z() -= z0;
    }
  return out;
}

/// Placement of one helix inside a chain.
struct HelixPlacement {
  std::string sequence;
  double x = 0.0, y = 0.0;  // axis position
  bool up = true;           // runs along +z if true
  double phase = 0.0;       // spin about its own axis, degrees
  double z_offset = 0.0;
};

inline Structure build_chain(char chain_id, const std::vector<HelixPlacement>& helices) {
  Structure s;
  s.chain_id = chain_id;
  for (const auto& h : helices) {
    auto residues = ideal_helix(h.sequence);
    const Mat3 spin = rotation_about_axis(Axis::Z, h.phase).rotation;
    const Mat3 flip = h.up ? Mat3::Identity() : rotation_about_axis(Axis::X, 180.0).rotation;
    const double length = residues.empty() ? 0.0 : 1.5 * static_cast<double>(residues.size() - 1);
    for (auto& r : residues) {
      for (auto& a : r.atoms) {
        Vec3 p = flip * (spin * a.coord);
        if (!h.up) p.z() += length;
        a.coord = p + Vec3(h.x, h.y, h.z_offset);
      }
      r.index = static_cast<int>(s.residues.size()) + 1;
      s.residues.push_back(std::move(r));
    }
  }
  return s;
}

inline double min_interchain_distance(const Structure& a, const Structure& b) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : heavy_atom_coords(a))
    for (const auto& q : heavy_atom_coords(b)) best = std::min(best, (p - q).squaredNorm());
  return std::sqrt(best);
}

struct SuiteTarget {
  std::string name;
  Dimer native;
};

namespace detail {

// Grows the inter-chain part of a layout until no heavy atoms clash.
template <class Layout>
Dimer separate(Layout layout, double min_gap) {
  for (double spacing = 7.0; spacing < 30.0; spacing += 0.25) {
    Dimer d = layout(spacing);
    if (min_interchain_distance(d.receptor, d.ligand) >= min_gap) return d;
  }
  fail(ErrorCode::InvalidState, "synthetic layout never separated");
}

inline Structure rotated_copy(const Structure& s, char chain_id, const Mat3& rot) {
  Structure out = s;
  out.chain_id = chain_id;
  for (auto& r : out.residues)
    for (auto& a : r.atoms) a.coord = rot * a.coord;
  return out;
}

}  // namespace detail

/// Minimum heavy-atom gap between the chains of every suite target.
inline constexpr double kSuiteMinGap = 3.2;

/// Five helical dimers: two C2 homodimers and three heterodimers.
inline std::vector<SuiteTarget> standard_suite() {
  const std::string h1 = "SLEELKKKAEELLKKVAEL";
  const std::string h2 = "GKVAELLKEAEKLAKELGS";
  const std::string h3 = "ELLKKAEELVKKLEELAKK";
  const std::string h4 = "SKAELLEKVAKELEKLLGE";
  const std::string h5 = "AEEALKKLVELAKKAEELS";
  const Mat3 c2 = rotation_about_axis(Axis::Z, 180.0).rotation;
  std::vector<SuiteTarget> suite;

  suite.push_back({"bundle_homo", detail::separate(
                                      [&](double s) {
                                        const double h = s / 2.0;
                                        Structure a = build_chain('A', {{h1, h, h, true, 0.0, 0.0},
                                                                        {h2, -h, h, false, 200.0, 0.0}});
                                        return Dimer{a, detail::rotated_copy(a, 'B', c2)};
                                      },
                                      kSuiteMinGap)});
  suite.push_back({"coil_homo", detail::separate(
                                    [&](double s) {
                                      Structure a = build_chain('A', {{h3 + h1, s / 2.0, 0.0, true, 160.0, 0.0}});
                                      return Dimer{a, detail::rotated_copy(a, 'B', c2)};
                                    },
                                    kSuiteMinGap)});
  const Structure tri = build_chain('A', {{h1, 0.0, 5.8, true, 0.0, 0.0},
                                          {h2, -5.0, -2.9, false, 120.0, 0.0},
                                          {h3, 5.0, -2.9, true, 240.0, 0.0}});
  suite.push_back({"hetero_3_1", detail::separate(
                                     [&](double s) {
                                       return Dimer{tri, build_chain('B', {{h4, 0.0, -2.9 - s, false, 90.0, 1.5}})};
                                     },
                                     kSuiteMinGap)});
  suite.push_back({"hetero_2_2", detail::separate(
                                     [&](double s) {
                                       Structure a = build_chain('A', {{h5, -5.0, 0.0, true, 30.0, 0.0},
                                                                       {h2, 5.0, 0.0, false, 300.0, 0.0}});
                                       Structure b = build_chain('B', {{h4 + "GS", -5.0, s, false, 0.0, -1.5},
                                                                       {h3, 5.0, s, true, 180.0, 0.0}});
                                       return Dimer{a, b};
                                     },
                                     kSuiteMinGap)});
  suite.push_back({"hetero_3_2", detail::separate(
                                     [&](double s) {
                                       Structure b = build_chain('B', {{h5, -5.0, -2.9 - s, true, 45.0, 0.0},
                                                                       {h1, 5.0, -2.9 - s, false, 270.0, 3.0}});
                                       return Dimer{tri, b};
                                     },
                                     kSuiteMinGap)});
  return suite;
}

}  // namespace qfold::synthetic
