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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "oracles.hpp"

namespace qfold {
namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qfold_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

/// Writes the first `count` suite natives as <name>.pdb into `dir`.
void write_suite(const fs::path& dir, std::size_t count) {
  const auto suite = synthetic::standard_suite();
  for (std::size_t i = 0; i < count; ++i)
    write_pdb_file((dir / (suite[i].name + ".pdb")).string(), suite[i].native.receptor, suite[i].native.ligand,
                   Pose::identity());
}

RunConfig fast_config() {
  RunConfig c;
  c.threads = 2;
  c.optimizer.max_iterations = 200;
  c.optimizer.restarts = 1;
  return c;
}

std::vector<ScenarioSpec> parse(const std::string& text, const std::string& base = {}) {
  std::istringstream in(text);
  return parse_manifest(in, base);
}

TEST(Manifest, ParsesSectionsAndResolvesPaths) {
  const auto specs = parse(
      "# qfold-manifest v1\n"
      "# comment\n"
      "[t1]\n"
      "scenario = optimal\n"
      "native = a/t1.pdb\n"
      "methods = gd drl gd\n"
      "seeds = 0 1 2\n"
      "\n"
      "[t2]\n"
      "scenario = realistic\n"
      "receptor = /abs/r.pdb\n"
      "ligand = l.pdb\n"
      "receptor_chain = A\n"
      "ligand_chain = C\n"
      "contacts = pred.contacts\n"
      "methods = SA\n"
      "seeds = 4\n"
      "[t3]\n"
      "scenario = suboptimal\n"
      "native = t3.pdb\n"
      "contacts = degrade 0.7 9\n"
      "methods = mc\n"
      "seeds = 1\n",
      "/base");
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].native_path, "/base/a/t1.pdb");
  EXPECT_EQ(specs[0].methods, (std::vector<Method>{Method::GD, Method::DRL}));
  EXPECT_EQ(specs[0].seeds, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(specs[0].contacts.kind, ContactSource::Kind::ExtractTrue);
  EXPECT_EQ(specs[1].scenario, Scenario::Realistic);
  EXPECT_EQ(specs[1].receptor_path, "/abs/r.pdb");
  EXPECT_EQ(specs[1].ligand_path, "/base/l.pdb");
  EXPECT_EQ(specs[1].ligand_chain, 'C');
  EXPECT_EQ(specs[1].contacts.kind, ContactSource::Kind::File);
  EXPECT_EQ(specs[1].contacts.path, "/base/pred.contacts");
  EXPECT_EQ(specs[2].contacts.kind, ContactSource::Kind::Degraded);
  EXPECT_EQ(specs[2].contacts.precision, 0.7);
  EXPECT_EQ(specs[2].contacts.seed, 9u);
}

TEST(Manifest, RejectsMalformedInput) {
  const std::string head = "# qfold-manifest v1\n";
  const std::string ok_body = "native = x.pdb\nmethods = gd\nseeds = 0\n";
  const char* bad[] = {
      "",
      "[t]\nnative = x.pdb\nmethods = gd\nseeds = 0\n",  // no header
      "# qfold-manifest v1\nnative = x.pdb\n",           // key outside section
      "# qfold-manifest v1\n[t]\nmystery = 1\n",
      "# qfold-manifest v1\n[t]\nnative = x.pdb\nmethods = gd\nseeds = -1\n",
      "# qfold-manifest v1\n[t]\nnative = x.pdb\nmethods = qlearn\nseeds = 0\n",
      "# qfold-manifest v1\n[t]\nnative = x.pdb\nmethods = gd\n",                         // no seeds
      "# qfold-manifest v1\n[t]\nscenario = optimal\nreceptor = r.pdb\nligand = l.pdb\n"  // optimal without native
      "contacts = c.txt\nmethods = gd\nseeds = 0\n",
      "# qfold-manifest v1\n[t]\nnative = x.pdb\ncontacts = degrade 1.5 3\nmethods = gd\nseeds = 0\n",
      "# qfold-manifest v1\n[t]\nnative = x.pdb\nmethods = gd\nseeds = 0\n[t]\nnative = y.pdb\nmethods = gd\nseeds = 0\n",
      "# qfold-manifest v1\n[t\n",
  };
  for (const char* text : bad) {
    try {
      parse(text);
      ADD_FAILURE() << "accepted:\n" << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Config) << e.what();
    }
  }
  EXPECT_NO_THROW(parse(head + "[t]\n" + ok_body));
}

TEST(RunConfigJson, ReadsSectionsAndRejectsUnknownKeys) {
  const auto c = parse_run_config(nlohmann::json::parse(R"({
    "method": "drl", "seed": 7, "threads": 3, "reward": "rmsd",
    "environment": {"max_steps": 500, "observation_size": 32, "action_mode": "six", "sampler": "separated_axis"},
    "agent": {"total_steps": 1000, "batch_size": 16, "decay_mode": "step", "rollout_steps": 50},
    "optimizer": {"restarts": 2, "t_end": 0.01},
    "metrics": {"homodimer_swap": false}
  })"));
  EXPECT_EQ(c.method, Method::DRL);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.threads, 3);
  EXPECT_EQ(c.reward, RewardKind::RmsdToNative);
  EXPECT_EQ(c.episode.max_steps, 500);
  EXPECT_EQ(c.episode.observation_size, 32);
  EXPECT_EQ(c.episode.action_mode, ActionMode::Six);
  EXPECT_EQ(c.episode.sampler, InitialPoseSampler::SeparatedAxis);
  EXPECT_EQ(c.agent.total_steps, 1000);
  EXPECT_EQ(c.agent.batch_size, 16);
  EXPECT_EQ(c.agent.decay_mode, EpsilonDecay::PerStep);
  EXPECT_EQ(c.rollout_steps, 50);
  EXPECT_EQ(c.optimizer.restarts, 2);
  EXPECT_EQ(c.optimizer.t_end, 0.01);
  EXPECT_FALSE(c.metrics.homodimer_swap);
  EXPECT_EQ(c.agent.gamma, TrainConfig{}.gamma);

  const char* bad[] = {R"({"agent": {"totl_steps": 5}})", R"({"colour": 1})", R"({"agent": {"total_steps": "many"}})",
                       R"({"method": "qlearn"})", R"({"environment": []})", R"({"seed": -3})"};
  for (const char* text : bad) {
    try {
      parse_run_config(nlohmann::json::parse(text));
      ADD_FAILURE() << "accepted " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::Config) << e.what();
    }
  }
}

TEST(RunConfigJson, RoundTripsThroughToJson) {
  auto c = parse_run_config(nlohmann::json::parse(R"({"agent": {"total_steps": 1234}, "optimizer": {"restarts": 3}})"));
  const auto back = parse_run_config(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(back.agent.total_steps, 1234);
}

TEST(RunConfigJson, ConfigOverridesDefaultsAndLaterLayersWin) {
  RunConfig base;
  base.optimizer.restarts = 5;
  const auto layered = parse_run_config(nlohmann::json::parse(R"({"optimizer": {"max_iterations": 10}})"), base);
  EXPECT_EQ(layered.optimizer.restarts, 5);
  EXPECT_EQ(layered.optimizer.max_iterations, 10);
  RunConfig bad;
  bad.agent.total_steps = 0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(ExitCodes, MapErrorFamilies) {
  EXPECT_EQ(exit_code(ErrorCode::Config), 1);
  EXPECT_EQ(exit_code(ErrorCode::InvalidArgument), 1);
  EXPECT_EQ(exit_code(ErrorCode::Parse), 2);
  EXPECT_EQ(exit_code(ErrorCode::MissingChain), 2);
  EXPECT_EQ(exit_code(ErrorCode::DimensionMismatch), 2);
  EXPECT_EQ(exit_code(ErrorCode::EmptyContacts), 3);
  EXPECT_EQ(exit_code(ErrorCode::NonFinite), 4);
}

TEST(Reconstruct, GdOnTrueContactsRecoversTheInterface) {
  const auto t = synthetic::standard_suite()[3];
  ReconstructionInput in{t.native.receptor, t.native.ligand,
                         extract_true_contacts(t.native.receptor, t.native.ligand), t.native};
  RunConfig c;
  c.optimizer.restarts = 2;
  std::ostringstream log1, log2;
  const auto a = reconstruct(in, Method::GD, c, 0, &log1);
  const auto b = reconstruct(in, Method::GD, c, 0, &log2);
  EXPECT_EQ(a.energy, 0.0);
  EXPECT_EQ(b.energy, a.energy);
  ASSERT_TRUE(a.quality);
  EXPECT_EQ(a.quality->fnat, 1.0);
  EXPECT_EQ(log1.str(), log2.str());
  EXPECT_NE(log1.str().find("# final energy 0"), std::string::npos);
  in.contacts = {};
  EXPECT_THROW(reconstruct(in, Method::GD, c, 0), Error);
}

TEST(Summary, MeansAndBestColumn) {
  const std::vector<TargetRow> rows{{"a", Scenario::Optimal, Method::GD, {0.5, 2.0, 1.0, 1.0, 3.0}},
                                    {"b", Scenario::Optimal, Method::GD, {0.7, 4.0, 0.5, 2.0, 5.0}},
                                    {"a", Scenario::Optimal, Method::DRL, {0.9, 1.0, 0.5, 1.5, 2.0}}};
  const auto s = summarize(rows);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].method, Method::DRL);
  EXPECT_EQ(s[1].n, 2);
  EXPECT_DOUBLE_EQ(s[1].mean.tm_score, 0.6);
  EXPECT_DOUBLE_EQ(s[1].mean.fnat, 0.75);
  EXPECT_EQ(s[0].best_in, (std::vector<std::string>{"tm_score", "rmsd", "i_rmsd", "l_rmsd"}));
  EXPECT_EQ(s[1].best_in, (std::vector<std::string>{"fnat", "i_rmsd"}));
  std::ostringstream out;
  write_summary_csv(out, s);
  EXPECT_EQ(out.str(),
            "scenario,method,n,tm_score,rmsd,fnat,i_rmsd,l_rmsd,best_in\n"
            "optimal,drl,1,0.9,1,0.5,1.5,2,tm_score;rmsd;i_rmsd;l_rmsd\n"
            "optimal,gd,2,0.6,3,0.75,1.5,4,fnat;i_rmsd\n");
}

TEST(PerTargetCsv, RoundTrips) {
  const std::vector<TargetRow> rows{{"a", Scenario::Suboptimal, Method::SA, {0.25, 2.5, 1.0, 1.125, 3.0}}};
  std::stringstream buf;
  write_per_target_csv(buf, rows);
  const auto back = read_per_target_csv(buf);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].target, "a");
  EXPECT_EQ(back[0].scenario, Scenario::Suboptimal);
  EXPECT_EQ(back[0].method, Method::SA);
  EXPECT_EQ(back[0].quality.i_rmsd, 1.125);
  std::istringstream wrong("target,method\n");
  EXPECT_THROW(read_per_target_csv(wrong), Error);
}

class BenchmarkTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fresh_dir("bench");
    write_suite(dir_, 2);
    std::ofstream(dir_ / "manifest.txt") << "# qfold-manifest v1\n"
                                            "[coil_homo]\nnative = coil_homo.pdb\nmethods = gd mc\nseeds = 0\n"
                                            "[bundle_homo]\nnative = bundle_homo.pdb\nmethods = mc gd mc\nseeds = 0\n"
                                            "[broken]\nnative = missing.pdb\nmethods = gd\nseeds = 0\n";
    specs_ = read_manifest((dir_ / "manifest.txt").string());
    result_ = run_benchmark(specs_, fast_config(), (dir_ / "out").string());
  }

  static inline fs::path dir_;
  static inline std::vector<ScenarioSpec> specs_;
  static inline BenchmarkResult result_;
};

TEST_F(BenchmarkTest, CountsRowsPerTargetAndMethod) {
  ASSERT_EQ(result_.runs.size(), 5u);
  EXPECT_EQ(result_.per_target.size(), 4u);
  EXPECT_EQ(result_.summary.size(), 2u);
  EXPECT_EQ(result_.runs.front().target, "broken");
  EXPECT_FALSE(result_.runs.front().ok);
  EXPECT_NE(result_.runs.front().error.find("i/o"), std::string::npos) << result_.runs.front().error;
  for (std::size_t k = 1; k < result_.runs.size(); ++k) EXPECT_TRUE(result_.runs[k].ok) << result_.runs[k].error;
}

TEST_F(BenchmarkTest, SummaryMeansMatchPerTargetRows) {
  std::ifstream pt(dir_ / "out" / "per_target.csv");
  const auto rows = read_per_target_csv(pt);
  ASSERT_EQ(rows.size(), 4u);
  std::map<Method, std::vector<double>> tm;
  for (const auto& r : rows) tm[r.method].push_back(r.quality.tm_score);
  for (const auto& s : result_.summary) {
    const auto& v = tm[s.method];
    double mean = 0.0;
    for (double x : v) mean += x / static_cast<double>(v.size());
    EXPECT_NEAR(s.mean.tm_score, mean, 1e-9);
  }
  const std::string summary = slurp(dir_ / "out" / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), kSummaryCsvHeader);
}

TEST_F(BenchmarkTest, EveryPerTargetRowHasAModel) {
  for (const auto& r : result_.per_target) {
    const fs::path model = dir_ / "out" / "models" / (r.target + "_" + to_string(r.method) + ".pdb");
    ASSERT_TRUE(fs::exists(model)) << model;
    const Dimer d = read_dimer(model.string());
    const auto spec = std::find_if(specs_.begin(), specs_.end(), [&](const auto& s) { return s.target == r.target; });
    const Dimer native = read_dimer(spec->native_path);
    const auto q = evaluate(d, native);
    EXPECT_NEAR(q.tm_score, r.quality.tm_score, 1e-3);
  }
}

TEST_F(BenchmarkTest, PlotTablesAndLogsAreWritten) {
  for (const char* y : {"tm", "fnat"})
    for (const char* x : {"precision", "recall", "f1"}) {
      const std::string text = slurp(dir_ / "out" / (std::string(y) + "_vs_" + x + ".csv"));
      EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5) << y << "_vs_" << x;
    }
  const std::string runs = slurp(dir_ / "out" / "runs.csv");
  EXPECT_EQ(runs.substr(0, runs.find('\n')), kRunsCsvHeader);
  EXPECT_NE(slurp(dir_ / "out" / "timings.txt").find("wall_seconds"), std::string::npos);
}

TEST_F(BenchmarkTest, RerunIsByteIdentical) {
  auto cfg = fast_config();
  cfg.threads = 1;
  run_benchmark(specs_, cfg, (dir_ / "again").string());
  for (const char* f : {"runs.csv", "per_target.csv", "summary.csv", "tm_vs_precision.csv", "fnat_vs_f1.csv"})
    EXPECT_EQ(slurp(dir_ / "out" / f), slurp(dir_ / "again" / f)) << f;
}

TEST(Benchmark, DuplicateMethodsGiveIdenticalSummaries) {
  const fs::path dir = fresh_dir("dup");
  write_suite(dir, 1);
  std::ofstream(dir / "once.txt") << "# qfold-manifest v1\n[bundle_homo]\nnative = bundle_homo.pdb\nmethods = gd\nseeds = 1\n";
  std::ofstream(dir / "twice.txt")
      << "# qfold-manifest v1\n[bundle_homo]\nnative = bundle_homo.pdb\nmethods = gd gd\nseeds = 1\n";
  run_benchmark(read_manifest((dir / "once.txt").string()), fast_config(), (dir / "a").string());
  run_benchmark(read_manifest((dir / "twice.txt").string()), fast_config(), (dir / "b").string());
  EXPECT_EQ(slurp(dir / "a" / "summary.csv"), slurp(dir / "b" / "summary.csv"));
}

TEST(Benchmark, DegradedContactsReportTheirAccuracy) {
  const fs::path dir = fresh_dir("degrade");
  write_suite(dir, 3);
  std::ofstream(dir / "m.txt") << "# qfold-manifest v1\n[hetero_3_1]\nscenario = suboptimal\nnative = hetero_3_1.pdb\n"
                                  "contacts = degrade 0.4 7\nmethods = gd\nseeds = 0\n";
  const auto r = run_benchmark(read_manifest((dir / "m.txt").string()), fast_config(), (dir / "out").string());
  ASSERT_EQ(r.runs.size(), 1u);
  ASSERT_TRUE(r.runs[0].contact_accuracy);
  EXPECT_NEAR(r.runs[0].contact_accuracy->precision, 0.4, 0.02);
  EXPECT_EQ(r.runs[0].contact_accuracy->recall, 1.0);
}

}  // namespace
}  // namespace qfold
