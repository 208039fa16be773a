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

// Writes the bundled synthetic dimer suite: one native complex PDB and one
// golden contact file per target, plus the benchmark manifests.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "qfold.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("data/suite");
  try {
    fs::create_directories(dir);
    const auto suite = qfold::synthetic::standard_suite();
    std::ofstream manifest(dir / "manifest.txt", std::ios::binary);
    manifest << qfold::kManifestHeader << "\n# Optimal scenario over the bundled suite.\n";
    for (const auto& t : suite) {
      const auto pdb = t.name + ".pdb";
      qfold::write_pdb_file((dir / pdb).string(), t.native.receptor, t.native.ligand,
                            qfold::Pose::identity(qfold::Vec3::Zero()));
      const auto contacts = qfold::extract_true_contacts(t.native.receptor, t.native.ligand);
      std::ofstream c(dir / (t.name + ".contacts"), std::ios::binary);
      qfold::write_contact_file(contacts, c);
      manifest << "\n[" << t.name << "]\nscenario = optimal\nnative = " << pdb
               << "\ncontacts = extract\nmethods = drl gd\nseeds = 0 1 2\n";
      std::cout << t.name << ": " << t.native.receptor.length() << " + " << t.native.ligand.length()
                << " residues, " << contacts.size() << " contacts\n";
    }
    std::ofstream precision(dir / "precision_manifest.txt", std::ios::binary);
    precision << qfold::kManifestHeader << "\n# hetero_3_1 with true contacts diluted by false pairs.\n";
    for (const char* p : {"1.0", "0.7", "0.4"}) {
      std::string id = std::string("hetero_3_1_p") + p;
      precision << "\n[" << id << "]\nscenario = suboptimal\nnative = hetero_3_1.pdb\ncontacts = degrade " << p
                << " 7\nmethods = gd\nseeds = 0 1 2\n";
    }
  } catch (const qfold::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return qfold::exit_code(e.code());
  }
  return 0;
}
