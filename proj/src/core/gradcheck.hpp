// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "losses.hpp"

namespace metriccam {

inline constexpr double kGradCheckTolerance = 1e-4;
inline constexpr double kGradCheckStep = 1e-4;       // relative step for depth inputs
inline constexpr double kGradCheckParamStep = 1e-5;  // absolute step for net parameters
inline constexpr double kGradCheckFloor = 1e-8;      // entries below this are not compared

struct GradCheckCase {
  std::string name;
  std::uint64_t seed = 0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  bool passed = true;
};

// |a - n| / max(|a|, |n|) over entries where max(|a|, |n|) > floor.
struct RelErr {
  double max_rel = 0.0;
  std::size_t checked = 0;
};
RelErr relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                      double floor = kGradCheckFloor);

// A loss evaluated on a prediction; must be deterministic for repeated calls.
using LossFn = std::function<LossResult(const DepthMap& pred)>;

// Central differences with step h * pred_i at every valid pixel of pred.
GradCheckCase check_loss_gradient(const std::string& name, const LossFn& fn, const DepthMap& pred,
                                  double rel_step = kGradCheckStep);

// Random 12x9 frame: gt and pred in [1, 5] m with a few invalid gt pixels,
// two plane regions, random camera-facing gt normals.
struct RandomFrame {
  DepthMap pred;
  DepthMap gt;
  Grid<Vec3> normals;
  Grid<int> plane_id;
  CameraIntrinsics intrinsics;
};
RandomFrame random_frame(std::uint64_t seed, int width = 12, int height = 9);

// Every loss on random frames for each seed.
GradCheckReport check_losses(const std::vector<std::uint64_t>& seeds);
// Every network parameter, plus the input Jacobian, on a 6x6 input per seed.
GradCheckReport check_network(const std::vector<std::uint64_t>& seeds);
// Both of the above.
GradCheckReport run_gradcheck(const std::vector<std::uint64_t>& seeds = {0, 1, 2});

nlohmann::json to_json(const GradCheckReport& r);

}  // namespace metriccam
