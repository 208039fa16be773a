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

// Minimal library use: take a bundled dimer, extract its true contacts,
// dock the ligand from a random start with gradient descent and score it.
//
//   quickstart [complex.pdb]

#include <iostream>

#include "qfold.hpp"

int main(int argc, char** argv) {
  try {
    const qfold::Dimer native = argc > 1 ? qfold::read_dimer(argv[1])
                                         : qfold::synthetic::standard_suite().front().native;
    const auto contacts = qfold::extract_true_contacts(native.receptor, native.ligand);
    std::cout << contacts.size() << " true contacts\n";

    qfold::OptimizerConfig cfg;
    cfg.restarts = 4;
    cfg.seed = 1;
    const auto fit = qfold::optimize(cfg, native.receptor, native.ligand, contacts);

    const qfold::Dimer model{native.receptor, qfold::posed(native.ligand, fit.best_pose)};
    const auto q = qfold::evaluate(model, native);
    std::cout << "energy " << fit.best_energy << "\n"
              << qfold::kReportCsvHeader << "\n"
              << qfold::report_csv_row("quickstart", "optimal", "gd", q) << "\n";
  } catch (const qfold::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qfold::exit_code(e.code());
  }
  return 0;
}
