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

// qfold: reconstruct dimer structures from inter-chain contacts.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "qfold.hpp"

namespace {

using qfold::ErrorCode;
using qfold::fail;

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string method, scenario, action_mode;
  std::optional<int> obs_size;
  bool prob_weight = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--threads", f.threads, "Worker threads (default: QFOLD_THREADS or all cores)");
  cmd->add_option("--method", f.method, "drl, gd, mc or sa");
  cmd->add_option("--scenario", f.scenario, "optimal, suboptimal or realistic");
  cmd->add_option("--obs-size", f.obs_size, "Observation side length D");
  cmd->add_option("--action-mode", f.action_mode, "six or twelve");
  cmd->add_flag("--prob-weight", f.prob_weight, "Weight each restraint by its contact probability");
}

// Flag > config file > built-in default.
qfold::RunConfig effective_config(const CommonFlags& f) {
  qfold::RunConfig c;
  if (!f.config_path.empty()) c = qfold::load_run_config(f.config_path);
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (!c.threads) c.threads = qfold::default_threads();
  if (!f.method.empty()) c.method = qfold::parse_method(f.method);
  if (!f.scenario.empty()) c.scenario = qfold::parse_scenario(f.scenario);
  if (f.obs_size) c.episode.observation_size = *f.obs_size;
  if (!f.action_mode.empty()) c.episode.action_mode = qfold::parse_action_mode(f.action_mode);
  if (f.prob_weight) c.episode.probability_weight = true;
  c.validate();
  return c;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path);
  return out;
}

std::optional<char> chain_flag(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s.size() != 1) fail(ErrorCode::Config, "chain ids are single characters, got '" + s + "'");
  return s[0];
}

struct ExtractArgs {
  std::string pdb, out, receptor_chain, ligand_chain;
  double threshold = qfold::kContactThreshold;
};

int run_extract(const ExtractArgs& a) {
  if (!(a.threshold > 0.0)) fail(ErrorCode::Config, "--threshold must be positive");
  const auto dimer = qfold::read_dimer(a.pdb, chain_flag(a.receptor_chain), chain_flag(a.ligand_chain));
  const auto contacts = qfold::extract_true_contacts(dimer.receptor, dimer.ligand, a.threshold);
  if (contacts.empty())
    fail(ErrorCode::EmptyContacts, "no inter-chain residue pairs within " + qfold::detail::format_real(a.threshold) +
                                       " A; a complex without inter-chain contacts cannot be reconstructed and is "
                                       "excluded from benchmarks");
  if (a.out.empty()) {
    qfold::write_contact_file(contacts, std::cout);
  } else {
    auto f = open_output(a.out);
    qfold::write_contact_file(contacts, f);
  }
  std::cerr << contacts.size() << " contacts\n";
  return 0;
}

struct ReconstructArgs {
  std::string complex, receptor, ligand, receptor_chain, ligand_chain, contacts, native, out, log, summary;
};

int run_reconstruct(const ReconstructArgs& a, const CommonFlags& flags) {
  const auto cfg = effective_config(flags);
  qfold::ReconstructionInput in;
  if (!a.complex.empty()) {
    auto d = qfold::read_dimer(a.complex, chain_flag(a.receptor_chain), chain_flag(a.ligand_chain));
    in.receptor = std::move(d.receptor);
    in.ligand = std::move(d.ligand);
  } else {
    if (a.receptor.empty() || a.ligand.empty()) fail(ErrorCode::Config, "give --complex or both --receptor and --ligand");
    in.receptor = qfold::read_chain(a.receptor, chain_flag(a.receptor_chain));
    in.ligand = qfold::read_chain(a.ligand, chain_flag(a.ligand_chain));
  }
  in.contacts = qfold::read_contact_file(a.contacts);
  in.contacts.ligand_len = in.ligand.length();
  in.contacts.receptor_len = in.receptor.length();
  if (in.contacts.empty()) fail(ErrorCode::EmptyContacts, "contact file " + a.contacts + " lists no contacts");
  in.contacts.validate();
  if (!a.native.empty()) in.native = qfold::read_dimer(a.native, chain_flag(a.receptor_chain), chain_flag(a.ligand_chain));

  std::ostringstream log;
  log << "# qfold reconstruct\n# config " << qfold::to_json(cfg).dump() << '\n'
      << "# residues receptor " << in.receptor.length() << " ligand " << in.ligand.length() << " contacts "
      << in.contacts.size() << '\n';
  const auto out = qfold::reconstruct(in, cfg.method, cfg, cfg.seed, &log);

  if (!a.out.empty()) qfold::write_pdb_file(a.out, in.receptor, in.ligand, out.pose);
  if (!a.log.empty()) {
    auto f = open_output(a.log);
    f << log.str();
  }
  nlohmann::json summary = {{"method", qfold::to_string(cfg.method)},
                            {"seed", cfg.seed},
                            {"final_energy", out.energy},
                            {"steps", out.steps},
                            {"wall_seconds", out.wall_seconds}};
  if (out.quality)
    summary["quality"] = {{"tm_score", out.quality->tm_score}, {"rmsd", out.quality->rmsd},
                          {"fnat", out.quality->fnat},         {"i_rmsd", out.quality->i_rmsd},
                          {"l_rmsd", out.quality->l_rmsd}};
  if (!a.summary.empty()) {
    auto f = open_output(a.summary);
    f << summary.dump(2) << '\n';
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct EvaluateArgs {
  std::string model, native, out, receptor_chain, ligand_chain, target = "model", method = "-";
};

int run_evaluate(const EvaluateArgs& a, const CommonFlags& flags) {
  const auto cfg = effective_config(flags);
  const auto model = qfold::read_dimer(a.model, chain_flag(a.receptor_chain), chain_flag(a.ligand_chain));
  const auto native = qfold::read_dimer(a.native, chain_flag(a.receptor_chain), chain_flag(a.ligand_chain));
  const auto q = qfold::evaluate(model, native, cfg.metrics);
  const std::string method = flags.method.empty() ? a.method : qfold::to_string(cfg.method);
  const std::string row = qfold::report_csv_row(a.target, qfold::to_string(cfg.scenario), method, q);
  std::cout << qfold::kReportCsvHeader << '\n' << row << '\n';
  if (!a.out.empty()) {
    auto f = open_output(a.out);
    f << qfold::kReportCsvHeader << '\n' << row << '\n';
  }
  return 0;
}

struct BenchmarkArgs {
  std::string manifest, out_dir;
  bool quiet = false;
};

int run_benchmark(const BenchmarkArgs& a, const CommonFlags& flags) {
  const auto cfg = effective_config(flags);
  auto specs = qfold::read_manifest(a.manifest);
  if (!flags.scenario.empty())
    std::erase_if(specs, [&](const auto& s) { return s.scenario != cfg.scenario; });
  if (specs.empty()) fail(ErrorCode::Config, "no manifest target matches --scenario " + flags.scenario);
  for (auto& s : specs) {
    if (!flags.method.empty()) s.methods = {cfg.method};
    if (flags.seed) s.seeds = {*flags.seed};
  }
  std::cerr << "# threads " << *cfg.threads << '\n';
  const auto result = qfold::run_benchmark(specs, cfg, a.out_dir, a.quiet ? nullptr : &std::cerr);
  qfold::write_summary_csv(std::cout, result.summary);
  const auto failed = std::count_if(result.runs.begin(), result.runs.end(), [](const auto& r) { return !r.ok; });
  if (failed) std::cerr << failed << " of " << result.runs.size() << " jobs failed; see runs.csv\n";
  return 0;
}

struct ReportArgs {
  std::string input, out;
};

int run_report(const ReportArgs& a) {
  std::string path = a.input;
  if (std::filesystem::is_directory(path)) path = (std::filesystem::path(path) / "per_target.csv").string();
  std::istringstream in(qfold::read_text_file(path));
  const auto summary = qfold::summarize(qfold::read_per_target_csv(in));
  qfold::write_summary_csv(std::cout, summary);
  if (!a.out.empty()) {
    auto f = open_output(a.out);
    qfold::write_summary_csv(f, summary);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rigid-body reconstruction of protein dimers from inter-chain contacts"};
  app.require_subcommand(1);

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract-contacts", "Write the true inter-chain contacts of a complex");
  extract->add_option("pdb", ex.pdb, "Complex PDB (.pdb or .pdb.gz)")->required();
  extract->add_option("--receptor-chain", ex.receptor_chain, "Receptor chain id");
  extract->add_option("--ligand-chain", ex.ligand_chain, "Ligand chain id");
  extract->add_option("-o,--out", ex.out, "Contact file (default: stdout)");
  extract->add_option("--threshold", ex.threshold, "Heavy-atom contact cutoff in A");

  CommonFlags rflags;
  ReconstructArgs rc;
  auto* recon = app.add_subcommand("reconstruct", "Place the ligand so the contacts are satisfied");
  recon->add_option("--complex", rc.complex, "PDB holding both chains");
  recon->add_option("--receptor", rc.receptor, "Receptor PDB");
  recon->add_option("--ligand", rc.ligand, "Ligand PDB");
  recon->add_option("--receptor-chain", rc.receptor_chain, "Receptor chain id");
  recon->add_option("--ligand-chain", rc.ligand_chain, "Ligand chain id");
  recon->add_option("--contacts", rc.contacts, "Contact file")->required();
  recon->add_option("--native", rc.native, "Native complex for the quality report");
  recon->add_option("-o,--out", rc.out, "Output complex PDB");
  recon->add_option("--log", rc.log, "Trace log");
  recon->add_option("--summary", rc.summary, "JSON summary file");
  add_common(recon, rflags);

  CommonFlags eflags;
  EvaluateArgs ev;
  auto* eval = app.add_subcommand("evaluate", "Score a model complex against the native one");
  eval->add_option("model", ev.model, "Model complex PDB")->required();
  eval->add_option("native", ev.native, "Native complex PDB")->required();
  eval->add_option("-o,--out", ev.out, "CSV output");
  eval->add_option("--receptor-chain", ev.receptor_chain, "Receptor chain id");
  eval->add_option("--ligand-chain", ev.ligand_chain, "Ligand chain id");
  eval->add_option("--target", ev.target, "Target column value");
  add_common(eval, eflags);

  CommonFlags bflags;
  BenchmarkArgs bm;
  auto* bench = app.add_subcommand("benchmark", "Run every job of a manifest and write the report tables");
  bench->add_option("manifest", bm.manifest, "Manifest file")->required();
  bench->add_option("-o,--out", bm.out_dir, "Output directory")->required();
  bench->add_flag("-q,--quiet", bm.quiet, "No per-job progress");
  add_common(bench, bflags);

  ReportArgs rp;
  auto* report = app.add_subcommand("report", "Recompute summary.csv from per_target.csv");
  report->add_option("input", rp.input, "per_target.csv or a benchmark output directory")->required();
  report->add_option("-o,--out", rp.out, "Summary CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*extract) return run_extract(ex);
    if (*recon) return run_reconstruct(rc, rflags);
    if (*eval) return run_evaluate(ev, eflags);
    if (*bench) return run_benchmark(bm, bflags);
    if (*report) return run_report(rp);
  } catch (const qfold::Error& e) {
    std::cerr << "error (" << qfold::to_string(e.code()) << "): " << e.what() << '\n';
    return qfold::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
