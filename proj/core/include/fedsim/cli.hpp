// Copyright 2026 The fedsim Authors
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

#pragma once

#include <string>
#include <vector>

namespace fedsim {

// Entry point behind the `fedsim` binary: `run <config> [--seed N]
// [--strategy NAME] [--out DIR]` executes a simulation and writes its
// outputs; `validate <config>` checks a config (including dataset
// feasibility) without running. Returns the process exit code; errors and
// usage go to stderr.
int cli_run(const std::vector<std::string>& args);

}  // namespace fedsim
