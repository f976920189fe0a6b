// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <vector>

#include "grid.hpp"
#include "rng.hpp"

namespace metriccam {

// Multi-channel activation: one column per channel, pixels in row-major order
// down each column.
using Activation = Eigen::MatrixXd;

struct ConvSpec {
  int in_channels;
  int out_channels;
  int kernel;  // odd; zero padding keeps the spatial size
};

// Activations recorded by a forward pass, consumed by backward.
struct Tape {
  int width = 0;
  int height = 0;
  std::vector<Activation> inputs;  // input to each layer, unfolded for k > 1
  std::vector<Activation> pre;     // pre-activation output of each layer
  bool valid = false;
};

// conv3x3(C->16) relu conv3x3(16->32) relu conv3x3(32->16) relu conv1x1(16->1)
// softplus. All parameters live in one flat vector; layer l owns
// [weight_offset(l), weight_offset(l) + weights(l)) followed by its biases.
// Weight layout is [out][in][ky][kx].
class TinyDepthNet {
 public:
  static constexpr int kLayers = 4;

  explicit TinyDepthNet(int in_channels = 1);

  int in_channels() const { return specs_[0].in_channels; }
  const std::array<ConvSpec, kLayers>& specs() const { return specs_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const;
  std::size_t layer_size(int layer) const;

  // He-normal weights, zero biases.
  void init(Rng& rng);
  // Sets the output bias so the initial prediction is about `depth`.
  void set_output_level(double depth);

  void set_frozen(int layer, bool frozen);
  bool frozen(int layer) const { return frozen_[layer]; }

  // Stateless forms, safe to call concurrently on a shared net. A null tape
  // skips recording.
  Grid<double> forward(const std::vector<Grid<double>>& input, Tape* tape) const;
  // Accumulates dL/dparams into `param_grad` (resized if empty). Frozen layers
  // receive zero. Optionally returns dL/dinput.
  void backward(const Tape& tape, const Grid<double>& upstream, std::vector<double>* param_grad,
                std::vector<Grid<double>>* input_grad = nullptr) const;

  // Convenience forms using an internal tape.
  Grid<double> forward(const std::vector<Grid<double>>& input);
  void backward(const Grid<double>& upstream, std::vector<double>* param_grad,
                std::vector<Grid<double>>* input_grad = nullptr);

  nlohmann::json layer_spec_json() const;

 private:
  std::array<ConvSpec, kLayers> specs_;
  std::array<std::size_t, kLayers> offsets_{};
  std::array<bool, kLayers> frozen_{};
  std::vector<double> params_;
  Tape tape_;
};

double softplus(double x);
double softplus_inverse(double y);

struct AdamState {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One Adam update of `params` in place.
void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad);

// JSON header line followed by the parameters as little-endian float64.
void save_checkpoint(const std::filesystem::path& path, const TinyDepthNet& net, long step,
                     const nlohmann::json& extra);
struct Checkpoint {
  TinyDepthNet net;
  long step = 0;
  nlohmann::json header;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace metriccam
