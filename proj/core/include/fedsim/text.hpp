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
#include <string_view>

namespace fedsim {

// Shortest round-trip decimal form of a double (std::to_chars). Locale-free,
// so emitted files are byte-identical across runs and environments.
std::string format_double(double value);

// Strict full-string parses built on std::from_chars. Return false if the
// text is not exactly one value (surrounding whitespace already trimmed).
bool parse_double(std::string_view text, double& out);
bool parse_int64(std::string_view text, long long& out);
bool parse_uint64(std::string_view text, unsigned long long& out);

std::string trim(std::string_view text);

}  // namespace fedsim
