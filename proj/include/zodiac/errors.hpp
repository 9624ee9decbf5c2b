// Copyright 2026 The zodiac-pb Authors
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

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace zodiac {

// Argument-level failures use std::invalid_argument / std::domain_error.
// The types below carry extra data a caller may want to act on.

class DisconnectedGraphError : public std::runtime_error {
 public:
  explicit DisconnectedGraphError(const std::string& what)
      : std::runtime_error("disconnected graph: " + what) {}
};

class HorizonTooShortError : public std::invalid_argument {
 public:
  HorizonTooShortError(std::int64_t horizon, std::int64_t min_horizon)
      : std::invalid_argument("horizon too short: T=" + std::to_string(horizon) +
                              " must exceed n^3/p; minimal admissible T is " +
                              std::to_string(min_horizon)),
        horizon_(horizon),
        min_horizon_(min_horizon) {}

  std::int64_t horizon() const noexcept { return horizon_; }
  std::int64_t min_horizon() const noexcept { return min_horizon_; }

 private:
  std::int64_t horizon_;
  std::int64_t min_horizon_;
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t agent, std::int64_t round)
      : NumericError("divergence: agent " + std::to_string(agent) + " at round " +
                     std::to_string(round)),
        agent_(agent),
        round_(round) {}

  std::size_t agent() const noexcept { return agent_; }
  std::int64_t round() const noexcept { return round_; }

 private:
  std::size_t agent_;
  std::int64_t round_;
};

}  // namespace zodiac
