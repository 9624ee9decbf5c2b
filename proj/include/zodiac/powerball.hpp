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

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

#include "zodiac/errors.hpp"

namespace zodiac {

/// Powerball exponent, restricted to [1/2, 1].
class PowerballGamma {
 public:
  explicit PowerballGamma(double gamma) : gamma_(gamma) {
    if (!(gamma >= 0.5 && gamma <= 1.0)) {
      throw std::invalid_argument("powerball gamma must lie in [0.5, 1], got " +
                                  std::to_string(gamma));
    }
  }
  double value() const noexcept { return gamma_; }

 private:
  double gamma_;
};

namespace detail {

// Composition tests need exponents below 1/2, so the kernel is unchecked.
inline double signed_power(double v, double exponent) {
  if (v == 0.0) return 0.0;
  if (exponent == 1.0) return v;
  return std::copysign(std::pow(std::abs(v), exponent), v);
}

}  // namespace detail

// sgn(v_j)|v_j|^gamma elementwise. gamma == 1 returns the input unchanged.
inline Eigen::VectorXd powerball(const Eigen::Ref<const Eigen::VectorXd>& v, PowerballGamma gamma) {
  if (!v.allFinite()) throw NumericError("powerball: non-finite input");
  Eigen::VectorXd out(v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j) out(j) = detail::signed_power(v(j), gamma.value());
  return out;
}

// (sum_j |v_j|^(1+gamma))^(2/(1+gamma))
inline double norm_1_plus_gamma_sq(const Eigen::Ref<const Eigen::VectorXd>& v, PowerballGamma gamma) {
  const double q = 1.0 + gamma.value();
  if (q == 2.0) return v.squaredNorm();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < v.size(); ++j) acc += std::pow(std::abs(v(j)), q);
  return std::pow(acc, 2.0 / q);
}

}  // namespace zodiac
