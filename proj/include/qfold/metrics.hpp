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

// Structural quality of a reconstructed dimer against its native structure.
// Model and native must hold the same residues in the same order, chain by
// chain; no sequence alignment is attempted.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/pdb_io.hpp"
#include "qfold/restraints.hpp"

namespace qfold {

struct QualityReport {
  double tm_score = 0.0;
  double rmsd = 0.0;
  double fnat = 0.0;
  double i_rmsd = 0.0;
  double l_rmsd = 0.0;
};

inline constexpr std::string_view kReportCsvHeader = "target,scenario,method,tm_score,rmsd,fnat,i_rmsd,l_rmsd";

inline std::string report_csv_row(std::string_view target, std::string_view scenario, std::string_view method,
                                  const QualityReport& q) {
  std::string row;
  row.append(target).append(",").append(scenario).append(",").append(method);
  for (double v : {q.tm_score, q.rmsd, q.fnat, q.i_rmsd, q.l_rmsd}) row += "," + detail::format_real(v);
  return row;
}

struct MetricOptions {
  double contact_threshold = kContactThreshold;  // fnat contact cutoff
  double interface_cutoff = 10.0;
  bool all_heavy_rmsd = false;  // complex RMSD over all heavy atoms instead of CA
  bool homodimer_swap = true;
};

namespace detail {

inline void check_same_lengths(const Dimer& model, const Dimer& native) {
  if (model.receptor.length() != native.receptor.length() || model.ligand.length() != native.ligand.length())
    fail(ErrorCode::DimensionMismatch,
         "model chains have " + std::to_string(model.receptor.length()) + "/" +
             std::to_string(model.ligand.length()) + " residues, native " +
             std::to_string(native.receptor.length()) + "/" + std::to_string(native.ligand.length()));
}

// Atoms with the same name in residue pairs of two equal-length chains.
inline void matched_atoms(const Structure& model, const Structure& native, std::span<const std::string_view> names,
                          const std::vector<bool>* mask, std::vector<Vec3>& out_model, std::vector<Vec3>& out_native) {
  for (std::size_t i = 0; i < native.residues.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    const auto& mr = model.residues[i];
    const auto& nr = native.residues[i];
    if (names.empty()) {
      for (const auto& a : nr.atoms) {
        if (!a.is_heavy) continue;
        if (const Atom* b = mr.find(a.name)) {
          out_model.push_back(b->coord);
          out_native.push_back(a.coord);
        }
      }
      continue;
    }
    for (auto n : names) {
      const Atom* a = mr.find(n);
      const Atom* b = nr.find(n);
      if (a && b) {
        out_model.push_back(a->coord);
        out_native.push_back(b->coord);
      }
    }
  }
}

inline constexpr std::array<std::string_view, 4> kBackbone{"N", "CA", "C", "O"};
inline constexpr std::array<std::string_view, 1> kCalpha{"CA"};

inline bool same_sequence(const Structure& a, const Structure& b) {
  if (a.length() != b.length()) return false;
  for (std::size_t i = 0; i < a.residues.size(); ++i)
    if (a.residues[i].name != b.residues[i].name) return false;
  return true;
}

}  // namespace detail

/// CA RMSD over both chains after superposing the whole complex.
inline double complex_rmsd(const Dimer& model, const Dimer& native, bool all_heavy = false) {
  detail::check_same_lengths(model, native);
  std::vector<Vec3> m, n;
  const std::span<const std::string_view> names =
      all_heavy ? std::span<const std::string_view>{} : std::span<const std::string_view>(detail::kCalpha);
  detail::matched_atoms(model.receptor, native.receptor, names, nullptr, m, n);
  detail::matched_atoms(model.ligand, native.ligand, names, nullptr, m, n);
  return kabsch_superpose(m, n).rmsd;
}

/// TM-score length scale.
inline double tm_d0(std::size_t length) {
  return std::max(0.5, 1.24 * std::cbrt(static_cast<double>(length) - 15.0) - 1.8);
}

namespace detail {

inline double tm_sum(const std::vector<Vec3>& model, const std::vector<Vec3>& native, const RigidTransform& t,
                     double d0, std::vector<double>& dist) {
  double s = 0.0;
  for (std::size_t i = 0; i < model.size(); ++i) {
    dist[i] = (t.apply(model[i]) - native[i]).norm();
    const double r = dist[i] / d0;
    s += 1.0 / (1.0 + r * r);
  }
  return s;
}

}  // namespace detail

/// TM-score under the identity residue correspondence, normalised by the
/// native complex length. Superpositions are refined iteratively on the
/// residues closer than d0, starting from the full complex and from each
/// chain alone; the best score is kept.
inline double tm_score(const Dimer& model, const Dimer& native) {
  detail::check_same_lengths(model, native);
  std::vector<Vec3> m, n;
  detail::matched_atoms(model.receptor, native.receptor, detail::kCalpha, nullptr, m, n);
  const std::size_t n_receptor = m.size();
  detail::matched_atoms(model.ligand, native.ligand, detail::kCalpha, nullptr, m, n);
  const std::size_t length = native.receptor.length() + native.ligand.length();
  if (length < 3 || m.size() < 3) fail(ErrorCode::InvalidArgument, "TM-score needs at least 3 residues");
  const double d0 = tm_d0(length);

  std::vector<std::vector<std::size_t>> seeds(3);
  for (std::size_t i = 0; i < m.size(); ++i) {
    seeds[0].push_back(i);
    seeds[i < n_receptor ? 1 : 2].push_back(i);
  }

  double best = 0.0;
  std::vector<double> dist(m.size());
  for (auto subset : seeds) {
    for (int iter = 0; iter < 50 && subset.size() >= 3; ++iter) {
      std::vector<Vec3> sm, sn;
      for (auto i : subset) {
        sm.push_back(m[i]);
        sn.push_back(n[i]);
      }
      const auto sup = kabsch_superpose(sm, sn);
      best = std::max(best, detail::tm_sum(m, n, sup.transform, d0, dist) / static_cast<double>(length));
      std::vector<std::size_t> next;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (dist[i] < d0) next.push_back(i);
      if (next == subset) break;
      subset = std::move(next);
    }
  }
  return best;
}

/// Fraction of native inter-chain contacts (closest heavy atoms within
/// `threshold`) that are also in contact in the model.
inline double fnat(const Dimer& model, const Dimer& native, double threshold = kContactThreshold) {
  detail::check_same_lengths(model, native);
  const auto contacts = extract_true_contacts(native.receptor, native.ligand, threshold);
  if (contacts.empty()) fail(ErrorCode::EmptyContacts, "native structure has no inter-chain contacts");
  std::size_t kept = 0;
  for (const auto& c : contacts.restraints) {
    const auto& l = model.ligand.residues[static_cast<std::size_t>(c.ligand_res - 1)];
    const auto& r = model.receptor.residues[static_cast<std::size_t>(c.receptor_res - 1)];
    if (min_heavy_atom_distance(l, r) <= threshold) ++kept;
  }
  return static_cast<double>(kept) / static_cast<double>(contacts.size());
}

namespace detail {

// Residues of `chain` with any heavy atom within `cutoff` of `other`.
inline std::vector<bool> interface_mask(const Structure& chain, const Structure& other, double cutoff) {
  const auto other_atoms = heavy_atom_coords(other);
  const double c2 = cutoff * cutoff;
  std::vector<bool> mask(chain.length(), false);
  for (std::size_t i = 0; i < chain.residues.size(); ++i) {
    for (const auto& a : chain.residues[i].atoms) {
      if (!a.is_heavy) continue;
      if (std::any_of(other_atoms.begin(), other_atoms.end(),
                      [&](const Vec3& b) { return (a.coord - b).squaredNorm() <= c2; })) {
        mask[i] = true;
        break;
      }
    }
  }
  return mask;
}

}  // namespace detail

/// Backbone RMSD of the native interface residues after superposing them.
inline double interface_rmsd(const Dimer& model, const Dimer& native, double interface_cutoff = 10.0) {
  detail::check_same_lengths(model, native);
  const auto rmask = detail::interface_mask(native.receptor, native.ligand, interface_cutoff);
  const auto lmask = detail::interface_mask(native.ligand, native.receptor, interface_cutoff);
  std::vector<Vec3> m, n;
  detail::matched_atoms(model.receptor, native.receptor, detail::kBackbone, &rmask, m, n);
  detail::matched_atoms(model.ligand, native.ligand, detail::kBackbone, &lmask, m, n);
  if (m.size() < 3) fail(ErrorCode::EmptyContacts, "native structure has no interface");
  return kabsch_superpose(m, n).rmsd;
}

/// Ligand backbone RMSD after superposing the receptor backbones only.
inline double ligand_rmsd(const Dimer& model, const Dimer& native) {
  detail::check_same_lengths(model, native);
  std::vector<Vec3> mr, nr, ml, nl;
  detail::matched_atoms(model.receptor, native.receptor, detail::kBackbone, nullptr, mr, nr);
  detail::matched_atoms(model.ligand, native.ligand, detail::kBackbone, nullptr, ml, nl);
  if (ml.empty()) fail(ErrorCode::InvalidArgument, "ligand has no backbone atoms");
  const auto sup = kabsch_superpose(mr, nr);
  return rmsd(apply_transform(sup.transform, ml), nl);
}

inline QualityReport evaluate_direct(const Dimer& model, const Dimer& native, const MetricOptions& opt = {}) {
  QualityReport q;
  q.tm_score = tm_score(model, native);
  q.rmsd = complex_rmsd(model, native, opt.all_heavy_rmsd);
  q.fnat = fnat(model, native, opt.contact_threshold);
  q.i_rmsd = interface_rmsd(model, native, opt.interface_cutoff);
  q.l_rmsd = ligand_rmsd(model, native);
  return q;
}

/// All five metrics. For homodimers the chain assignment is arbitrary, so
/// both are tried and each metric keeps its better value.
inline QualityReport evaluate(const Dimer& model, const Dimer& native, const MetricOptions& opt = {}) {
  QualityReport q = evaluate_direct(model, native, opt);
  if (opt.homodimer_swap && detail::same_sequence(native.receptor, native.ligand) &&
      detail::same_sequence(model.receptor, model.ligand)) {
    const Dimer swapped{model.ligand, model.receptor};
    const QualityReport s = evaluate_direct(swapped, native, opt);
    q.tm_score = std::max(q.tm_score, s.tm_score);
    q.rmsd = std::min(q.rmsd, s.rmsd);
    q.fnat = std::max(q.fnat, s.fnat);
    q.i_rmsd = std::min(q.i_rmsd, s.i_rmsd);
    q.l_rmsd = std::min(q.l_rmsd, s.l_rmsd);
  }
  return q;
}

}  // namespace qfold
