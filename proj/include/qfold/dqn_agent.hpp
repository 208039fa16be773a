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

// Deep Q-learning agent: experience replay, epsilon-greedy exploration,
// a periodically synchronised target network and the per-target
// self-training loop.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "qfold/environment.hpp"
#include "qfold/error.hpp"
#include "qfold/qnetwork.hpp"
#include "qfold/restraints.hpp"

namespace qfold {

/// Observations are shared between consecutive transitions: s' of one step
/// is s of the next.
struct Experience {
  std::shared_ptr<const Observation> s;
  int a = 0;
  double r = 0.0;
  std::shared_ptr<const Observation> s_next;
  bool done = false;  // terminal: no bootstrapping from s_next
};

/// Fixed-capacity FIFO ring; the oldest experience is overwritten first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000) : capacity_(capacity) {
    if (capacity == 0) fail(ErrorCode::InvalidArgument, "replay capacity must be positive");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }

  void push(Experience e) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(e));
    } else {
      items_[head_] = std::move(e);
      head_ = (head_ + 1) % capacity_;
    }
  }

  /// i-th item from the oldest.
  const Experience& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  /// Uniform sample with replacement.
  template <class Rng>
  std::vector<const Experience*> sample(std::size_t k, Rng& rng) const {
    if (items_.empty()) fail(ErrorCode::InvalidState, "cannot sample from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<const Experience*> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(&items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Experience> items_;
};

enum class EpsilonDecay { PerEpisode, PerStep };

struct TrainConfig {
  double gamma = 0.99;
  int batch_size = 64;
  int target_sync_interval = 500;
  int total_steps = 100000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  double epsilon_decay = 0.99;
  EpsilonDecay decay_mode = EpsilonDecay::PerEpisode;
  double learning_rate = 1e-3;
  std::size_t replay_capacity = 50000;
  int train_every = 1;         // environment steps per SGD update
  double reward_scale = 1.0;   // applied to stored rewards before clipping
  double reward_clip = 0.0;    // > 0 clips stored rewards to [-clip, clip]
  double max_grad_norm = 0.0;  // > 0 rescales larger gradients
  bool fixed_start = true;     // every episode restarts from reset(seed)
  int hidden_units = kDefaultHiddenUnits;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) fail(ErrorCode::Config, "gamma must lie in (0, 1]");
    if (batch_size < 1) fail(ErrorCode::Config, "batch_size must be at least 1");
    if (target_sync_interval < 1) fail(ErrorCode::Config, "target_sync_interval must be at least 1");
    if (total_steps < batch_size)
      fail(ErrorCode::Config, "total_steps (" + std::to_string(total_steps) +
                                  ") must cover the replay warm-up of batch_size steps");
    if (!(0.0 <= epsilon_end && epsilon_end <= epsilon_start && epsilon_start <= 1.0))
      fail(ErrorCode::Config, "need 0 <= epsilon_end <= epsilon_start <= 1");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) fail(ErrorCode::Config, "epsilon_decay must lie in (0, 1]");
    if (!(learning_rate > 0.0)) fail(ErrorCode::Config, "learning_rate must be positive");
    if (replay_capacity < static_cast<std::size_t>(batch_size)) fail(ErrorCode::Config, "replay_capacity below batch_size");
    if (train_every < 1) fail(ErrorCode::Config, "train_every must be at least 1");
    if (!(reward_scale > 0.0) || reward_clip < 0.0 || max_grad_norm < 0.0)
      fail(ErrorCode::Config, "reward_scale must be positive, reward_clip and max_grad_norm non-negative");
    if (hidden_units < 1) fail(ErrorCode::Config, "hidden_units must be positive");
  }
};

/// Exploration rate after `count` decay events (episodes or steps).
inline double epsilon_at(const TrainConfig& c, long long count) {
  return std::max(c.epsilon_end, c.epsilon_start * std::pow(c.epsilon_decay, static_cast<double>(count)));
}

/// r if done, otherwise r + gamma * max_a' Q_target(s', a').
template <class Scalar>
double q_reference(double r, const Observation& s_next, bool done, const QNetwork<Scalar>& target_net, double gamma) {
  if (done) return r;
  return r + gamma * static_cast<double>(q_forward(target_net, s_next).maxCoeff());
}

/// Index of the largest value; ties go to the lowest index.
template <class Vec>
int argmax_lowest(const Vec& q) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(q.size()); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

/// Greedy with probability 1 - epsilon, uniform otherwise.
template <class Scalar, class Rng>
int select_action(const QNetwork<Scalar>& net, const Observation& obs, double epsilon, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < epsilon) {
    std::uniform_int_distribution<int> pick(0, net.action_count() - 1);
    return pick(rng);
  }
  return argmax_lowest(q_forward(net, obs));
}

/// What train_self_play needs from an environment.
template <class E>
concept QEnvironment = requires(const E& env, const typename E::State& s, int a, std::uint64_t seed) {
  { env.reset(seed) } -> std::same_as<typename E::State>;
  { env.step(s, a).next } -> std::convertible_to<typename E::State>;
  { env.step(s, a).reward } -> std::convertible_to<double>;
  { env.step(s, a).done } -> std::convertible_to<bool>;
  { env.step(s, a).terminal } -> std::convertible_to<bool>;
  { env.action_count() } -> std::convertible_to<int>;
  { env.observation_size() } -> std::convertible_to<int>;
  { env.native_rmsd(s) } -> std::convertible_to<std::optional<double>>;
  { s.observation } -> std::convertible_to<Observation>;
  { s.energy } -> std::convertible_to<double>;
  { s.done } -> std::convertible_to<bool>;
};

struct EpisodeLogEntry {
  int episode = 0;
  int steps = 0;
  double total_reward = 0.0;
  double final_energy = 0.0;
  double final_rmsd = std::numeric_limits<double>::quiet_NaN();
};

inline void write_episode_log(std::ostream& out, const std::vector<EpisodeLogEntry>& log) {
  for (const auto& e : log)
    out << e.episode << ' ' << e.steps << ' ' << detail::format_real(e.total_reward) << ' '
        << detail::format_real(e.final_energy) << ' '
        << (std::isnan(e.final_rmsd) ? std::string("nan") : detail::format_real(e.final_rmsd)) << '\n';
}

template <class Scalar, class Env>
struct TrainResult {
  QNetwork<Scalar> net;
  std::vector<EpisodeLogEntry> episodes;
  typename Env::State best;  // lowest-energy state visited while training
  long long steps = 0;
  long long updates = 0;
  double last_loss = 0.0;
};

/// Self-training on one environment. Each step picks an epsilon-greedy
/// action, stores the transition, and (every `train_every` steps once the
/// buffer holds a batch) takes one SGD step on the mean squared error
/// against targets bootstrapped from the target network, which is
/// re-synchronised every `target_sync_interval` steps.
template <class Scalar, QEnvironment Env>
TrainResult<Scalar, Env> train_self_play(const Env& env, const TrainConfig& config) {
  using Matrix = typename QNetwork<Scalar>::Matrix;
  using State = typename Env::State;
  config.validate();

  const int size = env.observation_size();
  QNetwork<Scalar> net(size, env.action_count(), config.hidden_units);
  net.initialize(config.seed ^ 0x9E3779B97F4A7C15ULL);
  QNetwork<Scalar> target = net;
  ReplayBuffer buffer(config.replay_capacity);
  std::mt19937_64 rng(config.seed);

  TrainResult<Scalar, Env> result{net, {}, env.reset(config.seed), 0, 0, 0.0};

  int episode = 0;
  State state = env.reset(config.seed);
  auto obs = std::make_shared<const Observation>(state.observation);
  EpisodeLogEntry entry;
  bool episode_open = true;
  auto start_episode = [&]() {
    const std::uint64_t s = config.fixed_start ? config.seed : config.seed + static_cast<std::uint64_t>(episode);
    state = env.reset(s);
    obs = std::make_shared<const Observation>(state.observation);
    entry = EpisodeLogEntry{episode, 0, 0.0, state.energy};
    episode_open = true;
  };
  auto close_episode = [&]() {
    entry.final_energy = state.energy;
    entry.final_rmsd = env.native_rmsd(state).value_or(std::numeric_limits<double>::quiet_NaN());
    result.episodes.push_back(entry);
    episode_open = false;
    ++episode;
  };
  start_episode();
  if (state.energy < result.best.energy) result.best = state;

  std::vector<int> actions(static_cast<std::size_t>(config.batch_size));
  std::vector<double> targets(static_cast<std::size_t>(config.batch_size));
  std::vector<const Observation*> s_batch(static_cast<std::size_t>(config.batch_size));
  std::vector<const Observation*> next_batch(static_cast<std::size_t>(config.batch_size));
  Matrix packed;
  typename QNetwork<Scalar>::Cache target_cache, online_cache;
  BackwardResult<Scalar> grads;

  for (long long step = 0; step < config.total_steps; ++step) {
    if (state.done) {
      close_episode();
      start_episode();
      if (state.done) {  // start already satisfies every restraint
        close_episode();
        break;
      }
    }
    const long long decay_count = config.decay_mode == EpsilonDecay::PerEpisode ? episode : step;
    const double eps = epsilon_at(config, decay_count);
    const int a = select_action(net, state.observation, eps, rng);
    auto out = env.step(state, a);
    auto next_obs = std::make_shared<const Observation>(out.next.observation);

    double stored = out.reward * config.reward_scale;
    if (config.reward_clip > 0.0) stored = std::clamp(stored, -config.reward_clip, config.reward_clip);
    buffer.push(Experience{obs, a, stored, next_obs, out.terminal});

    entry.total_reward += out.reward;
    entry.steps += 1;
    state = std::move(out.next);
    obs = std::move(next_obs);
    if (state.energy < result.best.energy) result.best = state;
    ++result.steps;

    if (buffer.size() >= static_cast<std::size_t>(config.batch_size) && step % config.train_every == 0) {
      const auto batch = buffer.sample(static_cast<std::size_t>(config.batch_size), rng);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        s_batch[i] = batch[i]->s.get();
        next_batch[i] = batch[i]->s_next.get();
        actions[i] = batch[i]->a;
      }
      pack_observations<Scalar, Observation>(next_batch, size, packed);
      const Matrix& next_q = target.forward(packed, target_cache);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        targets[i] = batch[i]->r;
        if (!batch[i]->done)
          targets[i] += config.gamma * static_cast<double>(next_q.col(static_cast<Eigen::Index>(i)).maxCoeff());
      }
      pack_observations<Scalar, Observation>(s_batch, size, packed);
      q_backward<Scalar>(net, packed, actions, targets, online_cache, grads);
      if (!std::isfinite(grads.loss))
        fail(ErrorCode::NonFinite, "training loss became non-finite at step " + std::to_string(step));
      sgd_step(net, grads.gradients, config.learning_rate, config.max_grad_norm);
      result.last_loss = grads.loss;
      ++result.updates;
    }
    if ((step + 1) % config.target_sync_interval == 0) sync_target(net, target);
  }
  if (episode_open) close_episode();
  result.net = std::move(net);
  return result;
}

template <class Env>
struct Rollout {
  typename Env::State best;   // lowest energy seen, including the start
  typename Env::State final;
  std::vector<TraceRecord> trajectory;
};

/// Epsilon = 0 rollout from reset(seed) for at most `max_steps` steps.
template <class Scalar, QEnvironment Env>
Rollout<Env> greedy_rollout(const QNetwork<Scalar>& net, const Env& env, std::uint64_t seed, int max_steps) {
  auto state = env.reset(seed);
  Rollout<Env> r{state, state, {}};
  for (int i = 0; i < max_steps && !state.done; ++i) {
    const int a = argmax_lowest(q_forward(net, state.observation));
    auto out = env.step(state, a);
    r.trajectory.push_back({i + 1, a, out.reward, out.next.energy});
    state = std::move(out.next);
    if (state.energy < r.best.energy) r.best = state;
  }
  r.final = state;
  return r;
}

}  // namespace qfold
