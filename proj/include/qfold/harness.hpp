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

// Scenario orchestration: run configuration, the benchmark manifest, job
// scheduling and the CSV reports written by the command-line tool.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "qfold/baselines.hpp"
#include "qfold/dqn_agent.hpp"
#include "qfold/environment.hpp"
#include "qfold/error.hpp"
#include "qfold/metrics.hpp"
#include "qfold/pdb_io.hpp"
#include "qfold/restraints.hpp"

namespace qfold {

enum class Scenario { Optimal, Suboptimal, Realistic };
enum class Method { DRL, GD, MC, SA };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Optimal: return "optimal";
    case Scenario::Suboptimal: return "suboptimal";
    case Scenario::Realistic: return "realistic";
  }
  return "?";
}

inline std::string to_string(Method m) {
  switch (m) {
    case Method::DRL: return "drl";
    case Method::GD: return "gd";
    case Method::MC: return "mc";
    case Method::SA: return "sa";
  }
  return "?";
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_words(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace detail

inline Scenario parse_scenario(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "optimal") return Scenario::Optimal;
  if (v == "suboptimal") return Scenario::Suboptimal;
  if (v == "realistic") return Scenario::Realistic;
  fail(ErrorCode::Config, "unknown scenario '" + std::string(s) + "'");
}

inline Method parse_method(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "drl") return Method::DRL;
  if (v == "gd") return Method::GD;
  if (v == "mc") return Method::MC;
  if (v == "sa") return Method::SA;
  fail(ErrorCode::Config, "unknown method '" + std::string(s) + "'");
}

inline ActionMode parse_action_mode(std::string_view s) {
  const auto v = detail::lower(s);
  if (v == "six" || v == "6") return ActionMode::Six;
  if (v == "twelve" || v == "12") return ActionMode::Twelve;
  fail(ErrorCode::Config, "unknown action mode '" + std::string(s) + "'");
}

/// Process exit status for an error raised anywhere in the library.
inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse:
    case ErrorCode::MissingChain:
    case ErrorCode::EmptyStructure:
    case ErrorCode::DuplicateContact:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::Io: return 2;
    case ErrorCode::EmptyContacts: return 3;
    case ErrorCode::NonFinite: return 4;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidState:
    case ErrorCode::Config: return 1;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Run configuration

/// Every tunable of a reconstruction. Loaded from JSON with unknown keys
/// rejected; CLI flags are applied on top by the caller.
struct RunConfig {
  Method method = Method::GD;
  Scenario scenario = Scenario::Optimal;
  std::uint64_t seed = 0;
  std::optional<int> threads;  // unset: QFOLD_THREADS, then hardware concurrency
  RewardKind reward = RewardKind::ContactEnergy;
  EpisodeConfig episode;
  TrainConfig agent;
  int rollout_steps = 0;  // greedy evaluation steps after training; 0 = episode.max_steps
  OptimizerConfig optimizer;
  MetricOptions metrics;

  int effective_rollout_steps() const { return rollout_steps > 0 ? rollout_steps : episode.max_steps; }

  /// Optimiser settings with the fields shared with the environment filled in.
  OptimizerConfig optimizer_for(Method m, std::uint64_t run_seed) const {
    OptimizerConfig o = optimizer;
    o.variant = m == Method::MC ? OptimizerVariant::MC : m == Method::SA ? OptimizerVariant::SA : OptimizerVariant::GD;
    o.sampler = episode.sampler;
    o.shell_margin = episode.shell_margin;
    o.probability_weight = episode.probability_weight;
    o.seed = run_seed;
    return o;
  }

  TrainConfig agent_for(std::uint64_t run_seed) const {
    TrainConfig t = agent;
    t.seed = run_seed;
    return t;
  }

  void validate() const {
    if (threads && *threads < 1) fail(ErrorCode::Config, "threads must be at least 1");
    if (episode.max_steps < 1) fail(ErrorCode::Config, "environment.max_steps must be at least 1");
    if (episode.observation_size < 8) fail(ErrorCode::Config, "environment.observation_size must be at least 8");
    if (!(episode.translation_step > 0.0) || !(episode.rotation_step > 0.0))
      fail(ErrorCode::Config, "environment step sizes must be positive");
    if (rollout_steps < 0) fail(ErrorCode::Config, "agent.rollout_steps must be non-negative");
    agent.validate();
    optimizer.validate();
  }
};

inline int default_threads() {
  if (const char* env = std::getenv("QFOLD_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
    fail(ErrorCode::Config, "QFOLD_THREADS must be a positive integer");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace detail {

// Reads the keys of one JSON object into fields, rejecting unknown keys.
class JsonSection {
 public:
  JsonSection(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) fail(ErrorCode::Config, "config section '" + name_ + "' must be an object");
  }

  template <class T>
  void read(const char* key, T& field) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw std::invalid_argument("expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw std::invalid_argument("expected an integer");
        if constexpr (std::is_unsigned_v<T>)
          if (it->is_number_integer() && !it->is_number_unsigned() && it->template get<long long>() < 0)
            throw std::invalid_argument("expected a non-negative integer");
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw std::invalid_argument("expected a number");
      }
      field = it->template get<T>();
    } catch (const std::exception& e) {
      fail(ErrorCode::Config, name_ + "." + key + ": " + e.what());
    }
  }

  template <class F>
  void read_with(const char* key, F&& parse) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) fail(ErrorCode::Config, name_ + "." + key + ": expected a string");
    parse(it->template get<std::string>());
  }

  std::optional<nlohmann::json> sub(const char* key) {
    seen_.push_back(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return std::nullopt;
    return *it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (std::find(seen_.begin(), seen_.end(), k) == seen_.end())
        fail(ErrorCode::Config, "unknown config key '" + name_ + "." + k + "'");
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

inline InitialPoseSampler parse_sampler(std::string_view s) {
  const auto v = lower(s);
  if (v == "random_shell") return InitialPoseSampler::RandomShell;
  if (v == "separated_axis") return InitialPoseSampler::SeparatedAxis;
  if (v == "identity") return InitialPoseSampler::Identity;
  fail(ErrorCode::Config, "unknown initial pose sampler '" + std::string(s) + "'");
}

inline std::string to_string(InitialPoseSampler s) {
  switch (s) {
    case InitialPoseSampler::RandomShell: return "random_shell";
    case InitialPoseSampler::SeparatedAxis: return "separated_axis";
    case InitialPoseSampler::Identity: return "identity";
  }
  return "?";
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j, RunConfig c = {}) {
  detail::JsonSection top(j, "config");
  top.read_with("method", [&](const std::string& s) { c.method = parse_method(s); });
  top.read_with("scenario", [&](const std::string& s) { c.scenario = parse_scenario(s); });
  top.read("seed", c.seed);
  if (j.contains("threads")) {
    int t = 0;
    top.read("threads", t);
    c.threads = t;
  }
  top.read_with("reward", [&](const std::string& s) {
    const auto v = detail::lower(s);
    if (v == "contact_energy") c.reward = RewardKind::ContactEnergy;
    else if (v == "rmsd") c.reward = RewardKind::RmsdToNative;
    else fail(ErrorCode::Config, "unknown reward '" + s + "'");
  });
  if (auto e = top.sub("environment")) {
    detail::JsonSection s(*e, "environment");
    auto& ep = c.episode;
    s.read("max_steps", ep.max_steps);
    s.read("success_energy", ep.success_energy);
    s.read_with("sampler", [&](const std::string& v) { ep.sampler = detail::parse_sampler(v); });
    s.read("observation_size", ep.observation_size);
    s.read_with("action_mode", [&](const std::string& v) { ep.action_mode = parse_action_mode(v); });
    s.read("translation_step", ep.translation_step);
    s.read("rotation_step", ep.rotation_step);
    s.read_with("distance", [&](const std::string& v) {
      const auto l = detail::lower(v);
      if (l == "min_heavy") ep.distance_kind = DistanceKind::MinHeavy;
      else if (l == "cb") ep.distance_kind = DistanceKind::CB;
      else fail(ErrorCode::Config, "unknown distance '" + v + "'");
    });
    s.read("probability_weight", ep.probability_weight);
    s.read("shell_margin", ep.shell_margin);
    s.finish();
  }
  if (auto a = top.sub("agent")) {
    detail::JsonSection s(*a, "agent");
    auto& t = c.agent;
    s.read("gamma", t.gamma);
    s.read("batch_size", t.batch_size);
    s.read("target_sync_interval", t.target_sync_interval);
    s.read("total_steps", t.total_steps);
    s.read("epsilon_start", t.epsilon_start);
    s.read("epsilon_end", t.epsilon_end);
    s.read("epsilon_decay", t.epsilon_decay);
    s.read_with("decay_mode", [&](const std::string& v) {
      const auto l = detail::lower(v);
      if (l == "episode") t.decay_mode = EpsilonDecay::PerEpisode;
      else if (l == "step") t.decay_mode = EpsilonDecay::PerStep;
      else fail(ErrorCode::Config, "unknown decay_mode '" + v + "'");
    });
    s.read("learning_rate", t.learning_rate);
    s.read("replay_capacity", t.replay_capacity);
    s.read("train_every", t.train_every);
    s.read("reward_scale", t.reward_scale);
    s.read("reward_clip", t.reward_clip);
    s.read("max_grad_norm", t.max_grad_norm);
    s.read("fixed_start", t.fixed_start);
    s.read("hidden_units", t.hidden_units);
    s.read("rollout_steps", c.rollout_steps);
    s.finish();
  }
  if (auto o = top.sub("optimizer")) {
    detail::JsonSection s(*o, "optimizer");
    auto& p = c.optimizer;
    s.read("max_iterations", p.max_iterations);
    s.read("restarts", p.restarts);
    s.read("learning_rate", p.learning_rate);
    s.read("backtracking", p.backtracking);
    s.read("gradient_stop", p.gradient_stop);
    s.read("cb_upper_bound", p.cb_upper_bound);
    s.read("temperature", p.temperature);
    s.read("translation_sigma", p.translation_sigma);
    s.read("rotation_sigma", p.rotation_sigma);
    s.read("t_start", p.t_start);
    s.read("t_end", p.t_end);
    s.finish();
  }
  if (auto m = top.sub("metrics")) {
    detail::JsonSection s(*m, "metrics");
    s.read("contact_threshold", c.metrics.contact_threshold);
    s.read("interface_cutoff", c.metrics.interface_cutoff);
    s.read("all_heavy_rmsd", c.metrics.all_heavy_rmsd);
    s.read("homodimer_swap", c.metrics.homodimer_swap);
    s.finish();
  }
  top.finish();
  return c;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, "config " + path + ": " + e.what());
  }
  return parse_run_config(j, std::move(base));
}

/// Effective configuration as JSON; keys are sorted so the dump is stable.
inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["method"] = to_string(c.method);
  j["scenario"] = to_string(c.scenario);
  j["seed"] = c.seed;
  if (c.threads) j["threads"] = *c.threads;
  j["reward"] = c.reward == RewardKind::ContactEnergy ? "contact_energy" : "rmsd";
  const auto& ep = c.episode;
  j["environment"] = {{"max_steps", ep.max_steps},
                      {"success_energy", ep.success_energy},
                      {"sampler", detail::to_string(ep.sampler)},
                      {"observation_size", ep.observation_size},
                      {"action_mode", ep.action_mode == ActionMode::Six ? "six" : "twelve"},
                      {"translation_step", ep.translation_step},
                      {"rotation_step", ep.rotation_step},
                      {"distance", ep.distance_kind == DistanceKind::MinHeavy ? "min_heavy" : "cb"},
                      {"probability_weight", ep.probability_weight},
                      {"shell_margin", ep.shell_margin}};
  const auto& t = c.agent;
  j["agent"] = {{"gamma", t.gamma},
                {"batch_size", t.batch_size},
                {"target_sync_interval", t.target_sync_interval},
                {"total_steps", t.total_steps},
                {"epsilon_start", t.epsilon_start},
                {"epsilon_end", t.epsilon_end},
                {"epsilon_decay", t.epsilon_decay},
                {"decay_mode", t.decay_mode == EpsilonDecay::PerEpisode ? "episode" : "step"},
                {"learning_rate", t.learning_rate},
                {"replay_capacity", t.replay_capacity},
                {"train_every", t.train_every},
                {"reward_scale", t.reward_scale},
                {"reward_clip", t.reward_clip},
                {"max_grad_norm", t.max_grad_norm},
                {"fixed_start", t.fixed_start},
                {"hidden_units", t.hidden_units},
                {"rollout_steps", c.rollout_steps}};
  const auto& p = c.optimizer;
  j["optimizer"] = {{"max_iterations", p.max_iterations}, {"restarts", p.restarts},
                    {"learning_rate", p.learning_rate},   {"backtracking", p.backtracking},
                    {"gradient_stop", p.gradient_stop},   {"cb_upper_bound", p.cb_upper_bound},
                    {"temperature", p.temperature},       {"translation_sigma", p.translation_sigma},
                    {"rotation_sigma", p.rotation_sigma}, {"t_start", p.t_start},
                    {"t_end", p.t_end}};
  j["metrics"] = {{"contact_threshold", c.metrics.contact_threshold},
                  {"interface_cutoff", c.metrics.interface_cutoff},
                  {"all_heavy_rmsd", c.metrics.all_heavy_rmsd},
                  {"homodimer_swap", c.metrics.homodimer_swap}};
  return j;
}

// ---------------------------------------------------------------------------
// Single reconstruction

struct ReconstructionInput {
  Structure receptor;
  Structure ligand;
  ContactSet contacts;
  std::optional<Dimer> native;
};

struct ReconstructionOutput {
  Pose pose;
  double energy = 0.0;
  long long steps = 0;
  double wall_seconds = 0.0;
  std::optional<QualityReport> quality;
};

/// Runs one method with one seed. The log receives the method's trace and
/// nothing time-dependent, so equal inputs give byte-identical logs.
inline ReconstructionOutput reconstruct(const ReconstructionInput& in, Method method, const RunConfig& cfg,
                                        std::uint64_t seed, std::ostream* log = nullptr) {
  cfg.validate();
  if (in.contacts.empty()) fail(ErrorCode::EmptyContacts, "no contact restraints to reconstruct from");
  const auto t0 = std::chrono::steady_clock::now();
  ReconstructionOutput out;
  if (method == Method::DRL) {
    RewardStrategy reward = RewardStrategy::contact_energy();
    if (cfg.reward == RewardKind::RmsdToNative) {
      if (!in.native) fail(ErrorCode::Config, "the rmsd reward needs a native structure");
      reward = RewardStrategy::rmsd_to_native(*in.native);
    }
    const DockingEnv env(in.receptor, in.ligand, in.contacts, reward, cfg.episode);
    const auto trained = train_self_play<float>(env, cfg.agent_for(seed));
    const auto rollout = greedy_rollout(trained.net, env, seed, cfg.effective_rollout_steps());
    const bool use_rollout = rollout.best.energy < trained.best.energy;
    const auto& best = use_rollout ? rollout.best : trained.best;
    out.pose = best.pose;
    out.energy = best.energy;
    out.steps = trained.steps + static_cast<long long>(rollout.trajectory.size());
    if (log) {
      *log << "# episodes: episode steps total_reward final_energy final_rmsd\n";
      write_episode_log(*log, trained.episodes);
      *log << "# greedy rollout: step action reward energy\n";
      write_trace(*log, rollout.trajectory);
      *log << "# training best energy " << detail::format_real(trained.best.energy) << "\n";
      *log << "# greedy best energy " << detail::format_real(rollout.best.energy) << "\n";
    }
  } else {
    const auto result = optimize(cfg.optimizer_for(method, seed), in.receptor, in.ligand, in.contacts);
    out.pose = result.best_pose;
    out.energy = result.best_energy;
    for (const auto& r : result.restarts) out.steps += r.iterations;
    if (log) {
      *log << "# trace: restart iteration energy accepted\n";
      write_optimizer_trace(*log, result);
      *log << "# best restart " << result.best_restart << "\n";
    }
  }
  if (!std::isfinite(out.energy)) fail(ErrorCode::NonFinite, "final energy is not finite");
  if (log) *log << "# final energy " << detail::format_real(out.energy) << " steps " << out.steps << "\n";
  if (in.native) out.quality = evaluate(Dimer{in.receptor, posed(in.ligand, out.pose)}, *in.native, cfg.metrics);
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

/// Where a target's restraints come from.
struct ContactSource {
  enum class Kind { ExtractTrue, File, Degraded } kind = Kind::ExtractTrue;
  std::string path;            // File
  double precision = 1.0;      // Degraded
  std::uint64_t seed = 0;      // Degraded
};

struct ScenarioSpec {
  std::string target;
  Scenario scenario = Scenario::Optimal;
  std::string receptor_path, ligand_path, native_path;  // empty when unset
  std::optional<char> receptor_chain, ligand_chain;
  ContactSource contacts;
  std::vector<Method> methods;
  std::vector<std::uint64_t> seeds;

  void validate() const {
    if (target.empty()) fail(ErrorCode::Config, "target id must be non-empty");
    const std::string where = "target '" + target + "': ";
    if (scenario == Scenario::Optimal && native_path.empty())
      fail(ErrorCode::Config, where + "the optimal scenario needs a native structure");
    if (contacts.kind != ContactSource::Kind::File && native_path.empty())
      fail(ErrorCode::Config, where + "extracted or degraded contacts need a native structure");
    if (native_path.empty() && (receptor_path.empty() || ligand_path.empty()))
      fail(ErrorCode::Config, where + "needs receptor and ligand paths or a native structure");
    if (methods.empty()) fail(ErrorCode::Config, where + "lists no methods");
    if (seeds.empty()) fail(ErrorCode::Config, where + "lists no seeds");
  }
};

inline constexpr std::string_view kManifestHeader = "# qfold-manifest v1";

namespace detail {

inline std::uint64_t parse_seed(const std::string& tok, std::size_t line_no) {
  std::uint64_t v = 0;
  const auto* end = tok.data() + tok.size();
  const auto r = std::from_chars(tok.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end)
    fail(ErrorCode::Config, "manifest line " + std::to_string(line_no) + ": bad seed '" + tok + "'");
  return v;
}

inline std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).lexically_normal().string();
}

}  // namespace detail

/// Sections "[target-id]" followed by "key = value" lines. Relative paths
/// are resolved against `base_dir`. A method listed twice runs once.
inline std::vector<ScenarioSpec> parse_manifest(std::istream& in, const std::string& base_dir = {}) {
  std::vector<ScenarioSpec> specs;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  auto where = [&] { return "manifest line " + std::to_string(line_no) + ": "; };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trimmed(line);
    if (!header) {
      if (t.empty()) continue;
      if (t != kManifestHeader) fail(ErrorCode::Config, where() + "expected header '" + std::string(kManifestHeader) + "'");
      header = true;
      continue;
    }
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) fail(ErrorCode::Config, where() + "malformed section header");
      ScenarioSpec s;
      s.target = detail::trimmed(std::string_view(t).substr(1, t.size() - 2));
      for (const auto& other : specs)
        if (other.target == s.target) fail(ErrorCode::Config, where() + "duplicate target '" + s.target + "'");
      specs.push_back(std::move(s));
      continue;
    }
    if (specs.empty()) fail(ErrorCode::Config, where() + "key outside a [target] section");
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Config, where() + "expected 'key = value'");
    const std::string key = detail::lower(detail::trimmed(std::string_view(t).substr(0, eq)));
    const std::string value = detail::trimmed(std::string_view(t).substr(eq + 1));
    auto& s = specs.back();
    auto chain = [&]() -> char {
      if (value.size() != 1) fail(ErrorCode::Config, where() + key + " must be one character");
      return value[0];
    };
    if (key == "scenario") {
      s.scenario = parse_scenario(value);
    } else if (key == "receptor") {
      s.receptor_path = detail::resolve(base_dir, value);
    } else if (key == "ligand") {
      s.ligand_path = detail::resolve(base_dir, value);
    } else if (key == "native") {
      s.native_path = detail::resolve(base_dir, value);
    } else if (key == "receptor_chain") {
      s.receptor_chain = chain();
    } else if (key == "ligand_chain") {
      s.ligand_chain = chain();
    } else if (key == "contacts") {
      const auto words = detail::split_words(value);
      if (words.size() == 1 && detail::lower(words[0]) == "extract") {
        s.contacts = {};
      } else if (words.size() == 3 && detail::lower(words[0]) == "degrade") {
        s.contacts.kind = ContactSource::Kind::Degraded;
        s.contacts.precision = detail::parse_real(words[1], line_no);
        s.contacts.seed = detail::parse_seed(words[2], line_no);
        if (!(s.contacts.precision > 0.0 && s.contacts.precision <= 1.0))
          fail(ErrorCode::Config, where() + "degrade precision must lie in (0, 1]");
      } else if (words.size() == 1) {
        s.contacts.kind = ContactSource::Kind::File;
        s.contacts.path = detail::resolve(base_dir, words[0]);
      } else {
        fail(ErrorCode::Config, where() + "contacts must be 'extract', 'degrade P SEED' or a path");
      }
    } else if (key == "methods") {
      s.methods.clear();
      for (const auto& w : detail::split_words(value)) {
        const Method m = parse_method(w);
        if (std::find(s.methods.begin(), s.methods.end(), m) == s.methods.end()) s.methods.push_back(m);
      }
    } else if (key == "seeds") {
      s.seeds.clear();
      for (const auto& w : detail::split_words(value)) s.seeds.push_back(detail::parse_seed(w, line_no));
    } else {
      fail(ErrorCode::Config, where() + "unknown key '" + key + "'");
    }
  }
  if (!header) fail(ErrorCode::Config, "manifest is empty");
  if (specs.empty()) fail(ErrorCode::Config, "manifest lists no targets");
  for (const auto& s : specs) s.validate();
  return specs;
}

inline std::vector<ScenarioSpec> read_manifest(const std::string& path) {
  std::istringstream in(read_text_file(path));
  return parse_manifest(in, std::filesystem::path(path).parent_path().string());
}

/// Structures and restraints of one manifest target.
struct LoadedTarget {
  ReconstructionInput input;
  std::optional<ContactSet> native_contacts;
};

inline LoadedTarget load_target(const ScenarioSpec& spec) {
  LoadedTarget t;
  if (!spec.native_path.empty()) {
    t.input.native = read_dimer(spec.native_path, spec.receptor_chain, spec.ligand_chain);
    t.native_contacts = extract_true_contacts(t.input.native->receptor, t.input.native->ligand);
  }
  t.input.receptor = spec.receptor_path.empty() ? t.input.native->receptor
                                                : read_chain(spec.receptor_path, spec.receptor_chain);
  t.input.ligand =
      spec.ligand_path.empty() ? t.input.native->ligand : read_chain(spec.ligand_path, spec.ligand_chain);
  switch (spec.contacts.kind) {
    case ContactSource::Kind::ExtractTrue: t.input.contacts = *t.native_contacts; break;
    case ContactSource::Kind::Degraded:
      t.input.contacts = degrade_contacts(*t.native_contacts, spec.contacts.precision, spec.contacts.seed);
      break;
    case ContactSource::Kind::File: t.input.contacts = read_contact_file(spec.contacts.path); break;
  }
  if (t.input.contacts.empty()) fail(ErrorCode::EmptyContacts, "target '" + spec.target + "' has no contacts");
  t.input.contacts.ligand_len = t.input.ligand.length();
  t.input.contacts.receptor_len = t.input.receptor.length();
  t.input.contacts.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Benchmark

struct RunRecord {
  std::string target;
  Scenario scenario = Scenario::Optimal;
  Method method = Method::GD;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when !ok
  std::optional<QualityReport> quality;
  std::optional<ContactAccuracy> contact_accuracy;  // of the restraints used, against the native contacts
  double energy = 0.0;
  long long steps = 0;
  double wall_seconds = 0.0;
  Pose pose;
};

struct SummaryRow {
  Scenario scenario = Scenario::Optimal;
  Method method = Method::GD;
  int n = 0;
  QualityReport mean;
  std::vector<std::string> best_in;  // metric names on which this method is best in its scenario
};

inline constexpr std::string_view kSummaryCsvHeader = "scenario,method,n,tm_score,rmsd,fnat,i_rmsd,l_rmsd,best_in";
inline constexpr std::string_view kRunsCsvHeader =
    "target,scenario,method,seed,status,energy,steps,tm_score,rmsd,fnat,i_rmsd,l_rmsd";

/// One row of per_target.csv.
struct TargetRow {
  std::string target;
  Scenario scenario = Scenario::Optimal;
  Method method = Method::GD;
  QualityReport quality;
};

/// Arithmetic means per (scenario, method), in first-seen order of
/// (scenario, method) sorted by enum value.
inline std::vector<SummaryRow> summarize(const std::vector<TargetRow>& rows) {
  std::map<std::pair<Scenario, Method>, std::vector<const TargetRow*>> groups;
  for (const auto& r : rows) groups[{r.scenario, r.method}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, members] : groups) {
    SummaryRow s;
    s.scenario = key.first;
    s.method = key.second;
    s.n = static_cast<int>(members.size());
    double sum[5] = {0, 0, 0, 0, 0};
    for (const auto* m : members) {
      sum[0] += m->quality.tm_score;
      sum[1] += m->quality.rmsd;
      sum[2] += m->quality.fnat;
      sum[3] += m->quality.i_rmsd;
      sum[4] += m->quality.l_rmsd;
    }
    const double n = static_cast<double>(s.n);
    s.mean = {sum[0] / n, sum[1] / n, sum[2] / n, sum[3] / n, sum[4] / n};
    out.push_back(s);
  }
  struct Metric {
    const char* name;
    double QualityReport::*field;
    bool higher_better;
  };
  const Metric metrics[] = {{"tm_score", &QualityReport::tm_score, true},
                            {"rmsd", &QualityReport::rmsd, false},
                            {"fnat", &QualityReport::fnat, true},
                            {"i_rmsd", &QualityReport::i_rmsd, false},
                            {"l_rmsd", &QualityReport::l_rmsd, false}};
  for (const auto& m : metrics) {
    std::map<Scenario, double> best;
    for (const auto& s : out) {
      const double v = s.mean.*m.field;
      auto [it, fresh] = best.emplace(s.scenario, v);
      if (!fresh) it->second = m.higher_better ? std::max(it->second, v) : std::min(it->second, v);
    }
    for (auto& s : out)
      if (s.mean.*m.field == best[s.scenario]) s.best_in.push_back(m.name);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << kSummaryCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.scenario) << ',' << to_string(r.method) << ',' << r.n;
    for (double v : {r.mean.tm_score, r.mean.rmsd, r.mean.fnat, r.mean.i_rmsd, r.mean.l_rmsd})
      out << ',' << detail::format_real(v);
    out << ',';
    if (r.best_in.empty()) out << '-';
    for (std::size_t i = 0; i < r.best_in.size(); ++i) out << (i ? ";" : "") << r.best_in[i];
    out << '\n';
  }
}

inline void write_per_target_csv(std::ostream& out, const std::vector<TargetRow>& rows) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : rows) out << report_csv_row(r.target, to_string(r.scenario), to_string(r.method), r.quality) << '\n';
}

/// Parses per_target.csv back into rows.
inline std::vector<TargetRow> read_per_target_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trimmed(line) != kReportCsvHeader)
    fail(ErrorCode::Parse, "per-target table must start with '" + std::string(kReportCsvHeader) + "'");
  std::vector<TargetRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trimmed(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(detail::trimmed(line));
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 8) fail(ErrorCode::Parse, "per-target line " + std::to_string(line_no) + ": expected 8 fields");
    TargetRow r;
    r.target = f[0];
    try {
      r.scenario = parse_scenario(f[1]);
      r.method = parse_method(f[2]);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, "per-target line " + std::to_string(line_no) + ": " + e.what());
    }
    r.quality = {detail::parse_real(f[3], line_no), detail::parse_real(f[4], line_no), detail::parse_real(f[5], line_no),
                 detail::parse_real(f[6], line_no), detail::parse_real(f[7], line_no)};
    rows.push_back(std::move(r));
  }
  return rows;
}

struct BenchmarkResult {
  std::vector<RunRecord> runs;       // sorted by (target, method, seed)
  std::vector<TargetRow> per_target;  // lowest-energy seed of each (target, method)
  std::vector<SummaryRow> summary;
};

namespace detail {

inline std::string csv_safe(std::string s) {
  for (auto& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  return s;
}

template <class Job>
void run_parallel(std::size_t count, int threads, Job&& job) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) job(i);
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace detail

/// Runs every (target, method, seed) job of the manifest and writes
/// runs.csv, per_target.csv, summary.csv, the metric-vs-contact-accuracy
/// plot tables, one model PDB per per-target row, benchmark.log and
/// timings.txt (the only file holding wall-clock times) into `out_dir`.
/// A failing job is reported in runs.csv and never stops the batch.
inline BenchmarkResult run_benchmark(const std::vector<ScenarioSpec>& specs, const RunConfig& cfg,
                                     const std::string& out_dir, std::ostream* progress = nullptr) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "models");

  struct Job {
    std::size_t spec;
    Method method;
    std::uint64_t seed;
  };
  std::vector<std::size_t> order(specs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return specs[a].target < specs[b].target; });
  std::vector<Job> jobs;
  for (auto i : order) {
    std::vector<Method> methods = specs[i].methods;
    std::sort(methods.begin(), methods.end());
    std::vector<std::uint64_t> seeds = specs[i].seeds;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    for (auto m : methods)
      for (auto s : seeds) jobs.push_back({i, m, s});
  }

  // Targets load once, lazily, under a lock; a load failure fails its jobs.
  std::vector<std::optional<LoadedTarget>> loaded(specs.size());
  std::vector<std::string> load_error(specs.size());
  std::vector<bool> attempted(specs.size(), false);
  std::mutex load_mutex, progress_mutex;
  auto target_of = [&](std::size_t i) -> const LoadedTarget& {
    std::lock_guard<std::mutex> lock(load_mutex);
    if (!attempted[i]) {
      attempted[i] = true;
      try {
        loaded[i] = load_target(specs[i]);
      } catch (const Error& e) {
        load_error[i] = std::string(to_string(e.code())) + ": " + e.what();
      }
    }
    if (!loaded[i]) throw std::runtime_error(load_error[i]);
    return *loaded[i];
  };

  BenchmarkResult result;
  result.runs.resize(jobs.size());
  detail::run_parallel(jobs.size(), cfg.threads.value_or(default_threads()), [&](std::size_t k) {
    const Job& job = jobs[k];
    const ScenarioSpec& spec = specs[job.spec];
    RunRecord& rec = result.runs[k];
    rec.target = spec.target;
    rec.scenario = spec.scenario;
    rec.method = job.method;
    rec.seed = job.seed;
    try {
      const LoadedTarget& t = target_of(job.spec);
      const auto out = reconstruct(t.input, job.method, cfg, job.seed);
      rec.ok = true;
      rec.pose = out.pose;
      rec.energy = out.energy;
      rec.steps = out.steps;
      rec.wall_seconds = out.wall_seconds;
      rec.quality = out.quality;
      if (t.native_contacts) rec.contact_accuracy = contact_prf(t.input.contacts, *t.native_contacts);
    } catch (const Error& e) {
      rec.error = std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      *progress << rec.target << ' ' << to_string(rec.method) << " seed " << rec.seed << ' '
                << (rec.ok ? "energy " + detail::format_real(rec.energy) : "failed: " + rec.error) << '\n';
    }
  });

  // Per (target, method): the lowest-energy successful seed, lowest seed on ties.
  std::vector<const RunRecord*> chosen;
  for (std::size_t k = 0; k < result.runs.size(); ++k) {
    const auto& r = result.runs[k];
    if (!r.ok || !r.quality) continue;
    if (!chosen.empty() && chosen.back()->target == r.target && chosen.back()->method == r.method) {
      if (r.energy < chosen.back()->energy) chosen.back() = &r;
    } else {
      chosen.push_back(&r);
    }
  }
  auto open = [&](const std::string& name) {
    std::ofstream f(fs::path(out_dir) / name, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot write " + (fs::path(out_dir) / name).string());
    return f;
  };
  for (const auto* r : chosen) {
    result.per_target.push_back({r->target, r->scenario, r->method, *r->quality});
    const auto& t = *loaded[std::find_if(specs.begin(), specs.end(), [&](const auto& s) { return s.target == r->target; }) -
                            specs.begin()];
    write_pdb_file((fs::path(out_dir) / "models" / (r->target + "_" + to_string(r->method) + ".pdb")).string(),
                   t.input.receptor, t.input.ligand, r->pose);
  }
  result.summary = summarize(result.per_target);

  {
    auto f = open("runs.csv");
    f << kRunsCsvHeader << '\n';
    for (const auto& r : result.runs) {
      f << r.target << ',' << to_string(r.scenario) << ',' << to_string(r.method) << ',' << r.seed << ','
        << (r.ok ? std::string("ok") : "error: " + detail::csv_safe(r.error)) << ',';
      if (r.ok) f << detail::format_real(r.energy) << ',' << r.steps;
      else f << ',';
      if (r.quality)
        for (double v : {r.quality->tm_score, r.quality->rmsd, r.quality->fnat, r.quality->i_rmsd, r.quality->l_rmsd})
          f << ',' << detail::format_real(v);
      else
        f << ",,,,,";
      f << '\n';
    }
  }
  {
    auto f = open("per_target.csv");
    write_per_target_csv(f, result.per_target);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(f, result.summary);
  }
  const std::pair<const char*, double QualityReport::*> ys[] = {{"tm", &QualityReport::tm_score},
                                                                 {"fnat", &QualityReport::fnat}};
  const std::pair<const char*, double ContactAccuracy::*> xs[] = {{"precision", &ContactAccuracy::precision},
                                                                   {"recall", &ContactAccuracy::recall},
                                                                   {"f1", &ContactAccuracy::f1}};
  for (const auto& [yname, yfield] : ys)
    for (const auto& [xname, xfield] : xs) {
      auto f = open(std::string(yname) + "_vs_" + xname + ".csv");
      f << "target,scenario,method," << xname << ',' << (std::string(yname) == "tm" ? "tm_score" : "fnat") << '\n';
      for (const auto* r : chosen)
        if (r->contact_accuracy)
          f << r->target << ',' << to_string(r->scenario) << ',' << to_string(r->method) << ','
            << detail::format_real((*r->contact_accuracy).*xfield) << ',' << detail::format_real((*r->quality).*yfield)
            << '\n';
    }
  {
    auto f = open("benchmark.log");
    f << "# qfold benchmark\n# config " << to_json(cfg).dump() << '\n';
    f << "# jobs " << jobs.size() << " ok "
      << std::count_if(result.runs.begin(), result.runs.end(), [](const auto& r) { return r.ok; }) << '\n';
    for (const auto& r : result.runs)
      f << r.target << ' ' << to_string(r.method) << ' ' << r.seed << ' '
        << (r.ok ? "energy " + detail::format_real(r.energy) + " steps " + std::to_string(r.steps)
                 : "failed " + detail::csv_safe(r.error))
        << '\n';
  }
  {
    auto f = open("timings.txt");
    f << "# target method seed wall_seconds\n";
    for (const auto& r : result.runs)
      f << r.target << ' ' << to_string(r.method) << ' ' << r.seed << ' ' << r.wall_seconds << '\n';
  }
  return result;
}

}  // namespace qfold
