// Copyright 2026 The HFLGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hflgen {

// Range, domain and argument errors use the standard exception types
// (std::out_of_range, std::domain_error, std::invalid_argument). The types
// below cover the failure classes the CLI maps onto distinct exit codes.

// Inconsistent or malformed configuration (kernel depth vs topology, bad
// JSON, missing sections).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A well-formed request the estimators cannot honor, e.g. a discrete-metric
// Wasserstein estimate on a continuous hypothesis.
class UnsupportedConfiguration : public std::runtime_error {
 public:
  explicit UnsupportedConfiguration(const std::string& what)
      : std::runtime_error(what) {}
};

// A precondition on a bound's assumptions is violated (unbounded loss for a
// bounded-loss bound, epsilon == 0 for a DP mechanism).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hflgen
