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

// Independent reference implementations used as test oracles. Nothing here
// calls the routine it checks: superposition is brute-forced over a rotation
// grid, the network forward pass is plain nested loops, gradients come from
// central differences, and the toy MDP is solved by value iteration.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "qfold.hpp"

namespace qfold::oracle {

// ---------------------------------------------------------------------------
// Superposition

inline Mat3 zyz(double a_deg, double b_deg, double c_deg) {
  const auto rz = [](double d) { return rotation_about_axis(Axis::Z, d).rotation; };
  return rz(a_deg) * rotation_about_axis(Axis::Y, b_deg).rotation * rz(c_deg);
}

inline double centered_rmsd(const std::vector<Vec3>& m, const std::vector<Vec3>& f, const Mat3& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += (r * m[i] - f[i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(m.size()));
}

/// Minimum RMSD over rotations found by a ZYZ Euler grid: 5 degree global
/// scan, then 0.5 and 0.05 degree local scans around the best candidates.
/// Translation is removed by centring, which is optimal for any rotation.
inline double grid_superpose_rmsd(std::vector<Vec3> mobile, std::vector<Vec3> fixed) {
  const Vec3 cm = centroid(mobile), cf = centroid(fixed);
  for (auto& p : mobile) p -= cm;
  for (auto& p : fixed) p -= cf;
  struct Cand {
    double rmsd, a, b, c;
  };
  std::vector<Cand> coarse;
  for (int a = 0; a < 360; a += 5)
    for (int b = 0; b <= 180; b += 5)
      for (int c = 0; c < 360; c += 5) coarse.push_back({centered_rmsd(mobile, fixed, zyz(a, b, c)), double(a), double(b), double(c)});
  std::partial_sort(coarse.begin(), coarse.begin() + 8, coarse.end(),
                    [](const Cand& x, const Cand& y) { return x.rmsd < y.rmsd; });
  double best = coarse.front().rmsd;
  for (int k = 0; k < 8; ++k) {
    Cand cur = coarse[static_cast<std::size_t>(k)];
    for (double step : {0.5, 0.05}) {
      const Cand centre = cur;
      for (int i = -10; i <= 10; ++i)
        for (int j = -10; j <= 10; ++j)
          for (int l = -10; l <= 10; ++l) {
            const double a = centre.a + i * step, b = centre.b + j * step, c = centre.c + l * step;
            const double r = centered_rmsd(mobile, fixed, zyz(a, b, c));
            if (r < cur.rmsd) cur = {r, a, b, c};
          }
    }
    best = std::min(best, cur.rmsd);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Finite differences

inline double central_difference(const std::function<double(double)>& f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double relative_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Relative error of two parameter vectors measured on their norms.
inline double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric, double floor = 1e-8) {
  return (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), floor});
}

// ---------------------------------------------------------------------------
// Network forward pass with explicit loops.
//
// Conventions shared with the library: activations are channel-fastest
// (y, x, c); convolution weights are (out, ky, kx, in) with "same" padding
// of floor(total / 2) before the first row and column; flatten order is
// (y, x, c).

template <class Scalar>
std::vector<double> naive_forward(const QNetwork<Scalar>& net, const Eigen::MatrixXf& image) {
  const auto& p = net.parameters();
  int size = net.input_size(), channels = 1;
  std::vector<double> act(static_cast<std::size_t>(size * size));
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) act[static_cast<std::size_t>(y * size + x)] = static_cast<Scalar>(image(y, x));
  for (std::size_t l = 0; l < 3; ++l) {
    const auto& spec = kConvSpecs[l];
    const int out = (size + spec.stride - 1) / spec.stride;
    const int pad = std::max((out - 1) * spec.stride + spec.kernel - size, 0) / 2;
    std::vector<double> next(static_cast<std::size_t>(out * out * spec.out_channels));
    for (int oy = 0; oy < out; ++oy)
      for (int ox = 0; ox < out; ++ox)
        for (int oc = 0; oc < spec.out_channels; ++oc) {
          double s = static_cast<double>(p[l].bias(oc));
          for (int ky = 0; ky < spec.kernel; ++ky)
            for (int kx = 0; kx < spec.kernel; ++kx) {
              const int iy = oy * spec.stride + ky - pad, ix = ox * spec.stride + kx - pad;
              if (iy < 0 || ix < 0 || iy >= size || ix >= size) continue;
              for (int ic = 0; ic < channels; ++ic)
                s += static_cast<double>(p[l].weight(oc, (ky * spec.kernel + kx) * channels + ic)) *
                     act[static_cast<std::size_t>((iy * size + ix) * channels + ic)];
            }
          next[static_cast<std::size_t>((oy * out + ox) * spec.out_channels + oc)] = std::max(s, 0.0);
        }
    act = std::move(next);
    size = out;
    channels = spec.out_channels;
  }
  std::vector<double> hidden(static_cast<std::size_t>(net.hidden_units()));
  for (int h = 0; h < net.hidden_units(); ++h) {
    double s = static_cast<double>(p[3].bias(h));
    for (std::size_t k = 0; k < act.size(); ++k) s += static_cast<double>(p[3].weight(h, static_cast<Eigen::Index>(k))) * act[k];
    hidden[static_cast<std::size_t>(h)] = std::max(s, 0.0);
  }
  std::vector<double> q(static_cast<std::size_t>(net.action_count()));
  for (int a = 0; a < net.action_count(); ++a) {
    double s = static_cast<double>(p[4].bias(a));
    for (int h = 0; h < net.hidden_units(); ++h) s += static_cast<double>(p[4].weight(a, h)) * hidden[static_cast<std::size_t>(h)];
    q[static_cast<std::size_t>(a)] = s;
  }
  return q;
}

// ---------------------------------------------------------------------------
// 1-D alignment MDP: position x in [-50, 50] Å, actions -1 / +1 Å, energy
// |x|, reward = energy decrease, terminal at x = 0, walls clamp.

struct LineState {
  int x = 0;
  Observation observation;
  double energy = 0.0;
  int step_count = 0;
  bool done = false;
};

struct LineStep {
  LineState next;
  double reward = 0.0;
  bool done = false;
  bool terminal = false;
};

class LineEnv {
 public:
  using State = LineState;
  static constexpr int kHalfWidth = 50;

  explicit LineEnv(int max_steps = 150, int image_size = 8) : max_steps_(max_steps), size_(image_size) {}

  int action_count() const { return 2; }
  int observation_size() const { return size_; }
  std::optional<double> native_rmsd(const LineState& s) const { return std::abs(s.x); }

  /// Top half of the image encodes the positive offset, bottom half the negative one.
  Observation observe(int x) const {
    Observation o(size_, size_);
    const float pos = static_cast<float>(std::max(x, 0)) / kHalfWidth;
    const float neg = static_cast<float>(std::max(-x, 0)) / kHalfWidth;
    o.topRows(size_ / 2).setConstant(pos);
    o.bottomRows(size_ - size_ / 2).setConstant(neg);
    return o;
  }

  LineState make(int x, int steps) const {
    return {x, observe(x), static_cast<double>(std::abs(x)), steps, x == 0};
  }

  LineState reset(std::uint64_t seed) const {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 3);
    int x = 0;
    while (x == 0) x = static_cast<int>(rng() % (2 * kHalfWidth + 1)) - kHalfWidth;
    return make(x, 0);
  }

  LineStep step(const LineState& s, int action) const {
    if (s.done) fail(ErrorCode::InvalidState, "episode finished");
    const int x = std::clamp(s.x + (action == 0 ? -1 : 1), -kHalfWidth, kHalfWidth);
    LineStep out;
    out.next = make(x, s.step_count + 1);
    out.reward = s.energy - out.next.energy;
    out.terminal = x == 0;
    out.done = out.terminal || out.next.step_count >= max_steps_;
    out.next.done = out.done;
    return out;
  }

 private:
  int max_steps_;
  int size_;
};

/// Optimal Q-values of the line MDP by value iteration; row x + 50.
inline std::vector<std::array<double, 2>> line_value_iteration(double gamma, int sweeps = 5000) {
  const int n = 2 * LineEnv::kHalfWidth + 1;
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  std::vector<std::array<double, 2>> q(static_cast<std::size_t>(n), {0.0, 0.0});
  for (int it = 0; it < sweeps; ++it) {
    double change = 0.0;
    for (int i = 0; i < n; ++i) {
      const int x = i - LineEnv::kHalfWidth;
      if (x == 0) continue;
      for (int a = 0; a < 2; ++a) {
        const int nx = std::clamp(x + (a == 0 ? -1 : 1), -LineEnv::kHalfWidth, LineEnv::kHalfWidth);
        const double r = std::abs(x) - std::abs(nx);
        q[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] =
            r + (nx == 0 ? 0.0 : gamma * v[static_cast<std::size_t>(nx + LineEnv::kHalfWidth)]);
      }
      const double nv = std::max(q[static_cast<std::size_t>(i)][0], q[static_cast<std::size_t>(i)][1]);
      change = std::max(change, std::abs(nv - v[static_cast<std::size_t>(i)]));
      v[static_cast<std::size_t>(i)] = nv;
    }
    if (change < 1e-12) break;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Structure fixtures

inline Residue single_atom_residue(int index, const Vec3& at, const char* name = "CA", const char* resname = "ALA") {
  Residue r;
  r.index = index;
  r.name = resname;
  r.atoms.push_back({name, "C", at, true});
  return r;
}

inline Structure chain_of(char id, const std::vector<Vec3>& ca) {
  Structure s;
  s.chain_id = id;
  for (std::size_t i = 0; i < ca.size(); ++i) s.residues.push_back(single_atom_residue(static_cast<int>(i) + 1, ca[i]));
  return s;
}

/// Residue pairs within `threshold` by scanning every heavy-atom pair.
inline std::vector<std::pair<int, int>> brute_force_contacts(const Structure& receptor, const Structure& ligand,
                                                             double threshold = kContactThreshold) {
  std::vector<std::pair<int, int>> out;
  for (std::size_t i = 0; i < ligand.residues.size(); ++i)
    for (std::size_t j = 0; j < receptor.residues.size(); ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : ligand.residues[i].atoms)
        for (const auto& b : receptor.residues[j].atoms)
          if (a.is_heavy && b.is_heavy) best = std::min(best, (a.coord - b.coord).norm());
      if (best <= threshold) out.emplace_back(static_cast<int>(i) + 1, static_cast<int>(j) + 1);
    }
  return out;
}

inline RigidTransform random_rigid(std::mt19937_64& rng, double spread = 20.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return {random_rotation(rng), Vec3(u(rng), u(rng), u(rng))};
}

inline Structure moved(const Structure& s, const RigidTransform& t) {
  Structure out = s;
  for (auto& r : out.residues)
    for (auto& a : r.atoms) a.coord = t.apply(a.coord);
  return out;
}

inline Dimer moved(const Dimer& d, const RigidTransform& t) { return {moved(d.receptor, t), moved(d.ligand, t)}; }

}  // namespace qfold::oracle
