// Copyright 2026 The medtab Authors. All Rights Reserved.
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

#include <cstdint>
#include <optional>
#include <span>

namespace medtab {

double sigmoid(double s);

struct GradHess {
  double g = 0.0;
  double h = 0.0;
};

/// First and second derivative of the logistic loss at log-odds `s`.
/// The hessian is clamped below at 1e-16.
GradHess logistic_grad_hess(double s, std::uint8_t y);

/// Rank-based AUROC with average ranks for ties. Empty when only one class
/// is present.
std::optional<double> auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Mean logistic loss of log-odds `scores`, probabilities clamped to
/// [1e-12, 1 - 1e-12].
double logloss(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace medtab
