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

// Umbrella header for the whole library.

#pragma once

#include "qfold/baselines.hpp"
#include "qfold/dqn_agent.hpp"
#include "qfold/environment.hpp"
#include "qfold/error.hpp"
#include "qfold/geometry.hpp"
#include "qfold/harness.hpp"
#include "qfold/metrics.hpp"
#include "qfold/pdb_io.hpp"
#include "qfold/qnetwork.hpp"
#include "qfold/restraints.hpp"
#include "qfold/synthetic.hpp"
