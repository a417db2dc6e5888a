// Copyright 2026 the vcx authors
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

#ifndef VCX_HARNESS_ERRORS_HPP_
#define VCX_HARNESS_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vcx::harness {

// Process exit codes used by the command line tool. Library code throws the
// typed errors below; main() maps them onto these values.
enum ExitCode {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
};

/// Malformed or inconsistent configuration (bad key, bad value, missing file
/// referenced by the config).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Unreadable or structurally invalid dataset or image input.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vcx::harness

#endif  // VCX_HARNESS_ERRORS_HPP_
