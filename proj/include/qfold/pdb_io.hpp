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

// Reading and writing the fixed-column PDB subset needed for dimers.

#pragma once

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "qfold/error.hpp"
#include "qfold/geometry.hpp"

namespace qfold {

struct Atom {
  std::string name;
  std::string element;
  Vec3 coord = Vec3::Zero();
  bool is_heavy = true;
};

struct Residue {
  int index = 0;  // 1-based ordinal within the chain
  std::string name;
  std::vector<Atom> atoms;

  const Atom* find(std::string_view atom_name) const {
    for (const auto& a : atoms)
      if (a.name == atom_name) return &a;
    return nullptr;
  }
};

struct Structure {
  char chain_id = 'A';
  std::vector<Residue> residues;

  std::size_t length() const { return residues.size(); }
};

struct PdbReadOptions {
  std::optional<char> chain;
  bool include_hetatm = false;
  bool keep_hydrogens = false;
  bool keep_waters = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// 1-based inclusive column range; short lines yield an empty field.
inline std::string_view columns(std::string_view line, std::size_t first, std::size_t last) {
  if (line.size() < first) return {};
  return line.substr(first - 1, std::min(last, line.size()) - (first - 1));
}

inline double parse_coordinate(std::string_view field, std::size_t line_no, const char* what) {
  const auto f = trim(field);
  double value = 0.0;
  const auto res = std::from_chars(f.data(), f.data() + f.size(), value);
  if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(value))
    fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": malformed " + what +
                               " coordinate '" + std::string(field) + "'");
  return value;
}

inline std::string infer_element(std::string_view raw_name, std::string_view element_field) {
  auto e = trim(element_field);
  std::string out;
  for (char c : e)
    if (std::isalpha(static_cast<unsigned char>(c))) out += static_cast<char>(std::toupper(c));
  if (!out.empty()) return out;
  // Columns 13-14 hold the right-justified element symbol in the standard layout.
  for (char c : raw_name) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      out += static_cast<char>(std::toupper(c));
      break;
    }
  }
  return out;
}

inline bool is_hydrogen(std::string_view element) { return element == "H" || element == "D"; }

}  // namespace detail

/// Parses ATOM (and optionally HETATM) records. Returns one Structure per
/// chain in order of first appearance, or only `options.chain`.
inline std::vector<Structure> parse_pdb(std::istream& in, const PdbReadOptions& options = {}) {
  struct ResidueKey {
    std::string seq;  // residue number + insertion code
    bool operator==(const ResidueKey&) const = default;
  };
  std::vector<Structure> chains;
  std::vector<ResidueKey> last_key;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv(line);
    const auto record = detail::columns(sv, 1, 6);
    if (record.starts_with("ENDMDL")) break;  // first model only
    const bool is_atom = record == "ATOM  " || record == "ATOM";
    const bool is_het = record == "HETATM";
    if (!is_atom && !(is_het && options.include_hetatm)) continue;
    if (sv.size() < 54)
      fail(ErrorCode::Parse, "line " + std::to_string(line_no) + ": coordinate record too short");

    const std::string res_name(detail::trim(detail::columns(sv, 18, 20)));
    if (!options.keep_waters && (res_name == "HOH" || res_name == "WAT")) continue;
    const auto chain_field = detail::columns(sv, 22, 22);
    const char chain_id = chain_field.empty() ? ' ' : chain_field[0];
    if (options.chain && *options.chain != chain_id) continue;

    const auto raw_name = detail::columns(sv, 13, 16);
    Atom atom;
    atom.name = std::string(detail::trim(raw_name));
    atom.element = detail::infer_element(detail::columns(sv, 13, 14), detail::columns(sv, 77, 78));
    atom.is_heavy = !detail::is_hydrogen(atom.element);
    if (!atom.is_heavy && !options.keep_hydrogens) continue;
    atom.coord = Vec3(detail::parse_coordinate(detail::columns(sv, 31, 38), line_no, "x"),
                      detail::parse_coordinate(detail::columns(sv, 39, 46), line_no, "y"),
                      detail::parse_coordinate(detail::columns(sv, 47, 54), line_no, "z"));

    auto it = std::find_if(chains.begin(), chains.end(),
                           [&](const Structure& s) { return s.chain_id == chain_id; });
    if (it == chains.end()) {
      chains.push_back(Structure{chain_id, {}});
      last_key.push_back({});
      it = chains.end() - 1;
    }
    auto& chain = *it;
    auto& key = last_key[static_cast<std::size_t>(it - chains.begin())];
    ResidueKey k{std::string(detail::columns(sv, 23, 27))};
    if (chain.residues.empty() || !(k == key)) {
      Residue r;
      r.index = static_cast<int>(chain.residues.size()) + 1;
      r.name = res_name;
      chain.residues.push_back(std::move(r));
      key = k;
    }
    auto& residue = chain.residues.back();
    // Alternate locations: the first occurrence of an atom name wins.
    if (residue.find(atom.name) != nullptr) continue;
    residue.atoms.push_back(std::move(atom));
  }

  for (auto& chain : chains) {
    std::erase_if(chain.residues, [](const Residue& r) {
      return std::none_of(r.atoms.begin(), r.atoms.end(), [](const Atom& a) { return a.is_heavy; });
    });
    for (std::size_t i = 0; i < chain.residues.size(); ++i) chain.residues[i].index = static_cast<int>(i) + 1;
  }
  std::erase_if(chains, [](const Structure& s) { return s.residues.empty(); });

  if (options.chain && chains.empty())
    fail(ErrorCode::MissingChain, std::string("chain '") + *options.chain + "' not found");
  if (chains.empty()) fail(ErrorCode::EmptyStructure, "no atoms parsed");
  return chains;
}

inline std::vector<Structure> parse_pdb_string(const std::string& text, const PdbReadOptions& options = {}) {
  std::istringstream in(text);
  return parse_pdb(in, options);
}

/// Reads a file from disk; names ending in ".gz" are decompressed.
inline std::string read_text_file(const std::string& path) {
  if (path.size() > 3 && path.ends_with(".gz")) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) fail(ErrorCode::Io, "cannot open " + path);
    std::string out;
    char buf[1 << 15];
    int n = 0;
    while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    const bool bad = n < 0;
    gzclose(f);
    if (bad) fail(ErrorCode::Io, "corrupt gzip stream in " + path);
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Structure> read_pdb_file(const std::string& path, const PdbReadOptions& options = {}) {
  return parse_pdb_string(read_text_file(path), options);
}

/// Single chain from a file: `chain` if given, otherwise the first one.
inline Structure read_chain(const std::string& path, std::optional<char> chain = std::nullopt) {
  PdbReadOptions opts;
  opts.chain = chain;
  return read_pdb_file(path, opts).front();
}

/// CB coordinate, or CA for glycine and any residue lacking CB.
inline Vec3 cb_coordinate(const Residue& residue) {
  if (const Atom* cb = residue.find("CB")) return cb->coord;
  if (const Atom* ca = residue.find("CA")) return ca->coord;
  fail(ErrorCode::InvalidArgument, "residue " + std::to_string(residue.index) + " (" + residue.name +
                                       ") has neither CB nor CA");
}

inline Vec3 ca_coordinate(const Residue& residue) {
  if (const Atom* ca = residue.find("CA")) return ca->coord;
  fail(ErrorCode::InvalidArgument, "residue " + std::to_string(residue.index) + " has no CA");
}

inline std::vector<Vec3> heavy_atom_coords(const Structure& s) {
  std::vector<Vec3> out;
  for (const auto& r : s.residues)
    for (const auto& a : r.atoms)
      if (a.is_heavy) out.push_back(a.coord);
  return out;
}

inline std::vector<Vec3> ca_coords(const Structure& s) {
  std::vector<Vec3> out;
  out.reserve(s.residues.size());
  for (const auto& r : s.residues) out.push_back(ca_coordinate(r));
  return out;
}

inline std::vector<Vec3> cb_coords(const Structure& s) {
  std::vector<Vec3> out;
  out.reserve(s.residues.size());
  for (const auto& r : s.residues) out.push_back(cb_coordinate(r));
  return out;
}

/// Copy of `s` with every atom moved by `pose`.
inline Structure posed(const Structure& s, const Pose& pose) {
  Structure out = s;
  for (auto& r : out.residues)
    for (auto& a : r.atoms) a.coord = pose.apply(a.coord);
  return out;
}

inline Structure transformed(const Structure& s, const RigidTransform& t) {
  Structure out = s;
  for (auto& r : out.residues)
    for (auto& a : r.atoms) a.coord = t.apply(a.coord);
  return out;
}

namespace detail {

inline std::string pdb_atom_name(const Atom& atom) {
  // Four-character names and two-letter elements start in column 13.
  if (atom.name.size() >= 4 || atom.element.size() == 2) {
    std::string n = atom.name.substr(0, 4);
    n.resize(4, ' ');
    return n;
  }
  std::string n = " " + atom.name;
  n.resize(4, ' ');
  return n;
}

inline void write_chain(std::ostream& out, const Structure& s, char chain_id, int& serial) {
  char buf[96];
  for (const auto& r : s.residues) {
    for (const auto& a : r.atoms) {
      std::snprintf(buf, sizeof buf, "ATOM  %5d %4s %3.3s %c%4d    %8.3f%8.3f%8.3f%6.2f%6.2f          %2.2s\n",
                    serial % 100000, pdb_atom_name(a).c_str(), r.name.c_str(), chain_id, r.index % 10000,
                    a.coord.x(), a.coord.y(), a.coord.z(), 1.0, 0.0, a.element.c_str());
      out << buf;
      ++serial;
    }
  }
  std::snprintf(buf, sizeof buf, "TER   %5d      %3.3s %c%4d\n", serial % 100000,
                s.residues.empty() ? "UNK" : s.residues.back().name.c_str(), chain_id,
                s.residues.empty() ? 0 : s.residues.back().index % 10000);
  out << buf;
  ++serial;
}

}  // namespace detail

/// Chain identifiers used when writing a receptor/ligand pair.
inline std::pair<char, char> output_chain_ids(const Structure& receptor, const Structure& ligand) {
  char r = receptor.chain_id == ' ' ? 'A' : receptor.chain_id;
  char l = ligand.chain_id == ' ' ? 'B' : ligand.chain_id;
  if (r == l) {
    r = 'A';
    l = 'B';
  }
  return {r, l};
}

/// Writes the receptor unchanged and the ligand moved by `ligand_pose`.
/// Occupancy is always 1.00 and the B-factor 0.00.
inline void write_pdb(const Structure& receptor, const Structure& ligand, const Pose& ligand_pose,
                      std::ostream& sink) {
  const auto [rc, lc] = output_chain_ids(receptor, ligand);
  int serial = 1;
  detail::write_chain(sink, receptor, rc, serial);
  detail::write_chain(sink, posed(ligand, ligand_pose), lc, serial);
  sink << "END\n";
  if (!sink) fail(ErrorCode::Io, "failed writing PDB output");
}

inline void write_pdb_file(const std::string& path, const Structure& receptor, const Structure& ligand,
                           const Pose& ligand_pose) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot open " + path + " for writing");
  write_pdb(receptor, ligand, ligand_pose, out);
}

/// The two chains of a dimer file, in file order unless chain ids are given.
struct Dimer {
  Structure receptor;
  Structure ligand;
};

inline Dimer read_dimer(const std::string& path, std::optional<char> receptor_chain = std::nullopt,
                        std::optional<char> ligand_chain = std::nullopt) {
  const auto chains = read_pdb_file(path);
  auto by_id = [&](char id) -> const Structure& {
    for (const auto& c : chains)
      if (c.chain_id == id) return c;
    fail(ErrorCode::MissingChain, std::string("chain '") + id + "' not found in " + path);
  };
  // First chain whose id differs from `other`, if any.
  auto first_except = [&](std::optional<char> other) -> const Structure& {
    for (const auto& c : chains)
      if (!other || c.chain_id != *other) return c;
    fail(ErrorCode::MissingChain, path + " holds a single chain; a dimer needs two");
  };
  Dimer d;
  d.receptor = receptor_chain ? by_id(*receptor_chain) : first_except(ligand_chain);
  d.ligand = ligand_chain ? by_id(*ligand_chain) : first_except(d.receptor.chain_id);
  if (d.receptor.chain_id == d.ligand.chain_id)
    fail(ErrorCode::MissingChain, "receptor and ligand resolve to the same chain in " + path);
  return d;
}

}  // namespace qfold
