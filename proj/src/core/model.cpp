// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace metriccam {

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unfolds x (pixels x channels) into pixels x (channels * k * k), column
// (c, ky, kx) holding channel c shifted by (ky - k/2, kx - k/2), zero padded.
Eigen::MatrixXd im2col(const Activation& x, int w, int h, int k) {
  const int c = static_cast<int>(x.cols());
  const int r = k / 2;
  Eigen::MatrixXd col = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(w) * h,
                                              static_cast<Eigen::Index>(c) * k * k);
  for (int ch = 0; ch < c; ++ch) {
    const double* src = x.col(ch).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.col((static_cast<Eigen::Index>(ch) * k + ky) * k + kx).data();
        const int dy = ky - r, dx = kx - r;
        const int x_lo = std::max(0, -dx), x_hi = std::min(w, w - dx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          const double* s_row = src + static_cast<std::ptrdiff_t>(y + dy) * w + dx;
          double* d_row = dst + static_cast<std::ptrdiff_t>(y) * w;
          for (int xx = x_lo; xx < x_hi; ++xx) d_row[xx] = s_row[xx];
        }
      }
    }
  }
  return col;
}

void col2im_add(const Eigen::MatrixXd& col, int c, int w, int h, int k, Activation* dx) {
  const int r = k / 2;
  for (int ch = 0; ch < c; ++ch) {
    double* dst = dx->col(ch).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col.col((static_cast<Eigen::Index>(ch) * k + ky) * k + kx).data();
        const int dy = ky - r, ddx = kx - r;
        const int x_lo = std::max(0, -ddx), x_hi = std::min(w, w - ddx);
        for (int y = std::max(0, -dy); y < std::min(h, h - dy); ++y) {
          double* d_row = dst + static_cast<std::ptrdiff_t>(y + dy) * w + ddx;
          const double* s_row = src + static_cast<std::ptrdiff_t>(y) * w;
          for (int xx = x_lo; xx < x_hi; ++xx) d_row[xx] += s_row[xx];
        }
      }
    }
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw DomainError("softplus_inverse: argument must be > 0");
  return y > 30.0 ? y + std::log1p(-std::exp(-y)) : std::log(std::expm1(y));
}

TinyDepthNet::TinyDepthNet(int in_channels) {
  if (in_channels < 1) throw DomainError("net: in_channels must be >= 1");
  specs_ = {{{in_channels, 16, 3}, {16, 32, 3}, {32, 16, 3}, {16, 1, 1}}};
  std::size_t off = 0;
  for (int l = 0; l < kLayers; ++l) {
    offsets_[l] = off;
    off += layer_size(l);
  }
  params_.assign(off, 0.0);
}

std::size_t TinyDepthNet::bias_offset(int layer) const {
  const auto& s = specs_[layer];
  return offsets_[layer] + static_cast<std::size_t>(s.out_channels) * s.in_channels * s.kernel * s.kernel;
}

std::size_t TinyDepthNet::layer_size(int layer) const {
  const auto& s = specs_[layer];
  return static_cast<std::size_t>(s.out_channels) * (s.in_channels * s.kernel * s.kernel + 1);
}

void TinyDepthNet::init(Rng& rng) {
  for (int l = 0; l < kLayers; ++l) {
    const auto& s = specs_[l];
    const double std_dev = std::sqrt(2.0 / (s.in_channels * s.kernel * s.kernel));
    for (std::size_t i = offsets_[l]; i < bias_offset(l); ++i) params_[i] = std_dev * rng.normal();
    for (std::size_t i = bias_offset(l); i < offsets_[l] + layer_size(l); ++i) params_[i] = 0.0;
  }
}

void TinyDepthNet::set_output_level(double depth) {
  params_[bias_offset(kLayers - 1)] = softplus_inverse(depth);
}

void TinyDepthNet::set_frozen(int layer, bool frozen) {
  if (layer < 0 || layer >= kLayers) throw DomainError("net: layer index out of range");
  frozen_[layer] = frozen;
}

Grid<double> TinyDepthNet::forward(const std::vector<Grid<double>>& input, Tape* tape) const {
  if (static_cast<int>(input.size()) != in_channels())
    throw DomainError("net: expected " + std::to_string(in_channels()) + " input channels, got " +
                      std::to_string(input.size()));
  const int w = input[0].width(), h = input[0].height();
  if (w < 1 || h < 1) throw DomainError("net: empty input");
  for (const auto& g : input)
    if (!g.same_shape(w, h)) throw DomainError("net: input channel shapes differ");
  const Eigen::Index p = static_cast<Eigen::Index>(w) * h;

  Tape scratch;
  if (tape == nullptr) tape = &scratch;
  tape->width = w;
  tape->height = h;
  tape->inputs.assign(kLayers, Activation());
  tape->pre.assign(kLayers, Activation());
  Activation x(p, in_channels());
  for (int c = 0; c < in_channels(); ++c)
    for (Eigen::Index i = 0; i < p; ++i) x(i, c) = input[c][i];

  for (int l = 0; l < kLayers; ++l) {
    const auto& s = specs_[l];
    Eigen::Map<const RowMajorMatrix> wm(params_.data() + offsets_[l], s.out_channels,
                                        static_cast<Eigen::Index>(s.in_channels) * s.kernel * s.kernel);
    Eigen::Map<const Eigen::RowVectorXd> b(params_.data() + bias_offset(l), s.out_channels);
    if (s.kernel > 1) x = im2col(x, w, h, s.kernel);
    Activation z = x * wm.transpose();
    z.rowwise() += b;
    tape->inputs[l] = std::move(x);
    if (l + 1 < kLayers) x = z.cwiseMax(0.0);
    tape->pre[l] = std::move(z);
  }
  Grid<double> out(w, h);
  const Activation& z = tape->pre[kLayers - 1];
  for (Eigen::Index i = 0; i < p; ++i) out[i] = softplus(z(i, 0));
  tape->valid = true;
  return out;
}

void TinyDepthNet::backward(const Tape& tape, const Grid<double>& upstream,
                            std::vector<double>* param_grad,
                            std::vector<Grid<double>>* input_grad) const {
  if (!tape.valid) throw StateError("net: backward called without a forward pass");
  const int w = tape.width, h = tape.height;
  if (!upstream.same_shape(w, h)) throw DomainError("net: upstream gradient shape differs from output");
  if (param_grad->empty()) param_grad->assign(params_.size(), 0.0);
  if (param_grad->size() != params_.size()) throw DomainError("net: gradient buffer size mismatch");
  const Eigen::Index p = static_cast<Eigen::Index>(w) * h;

  Activation d(p, 1);
  const Activation& z_out = tape.pre[kLayers - 1];
  for (Eigen::Index i = 0; i < p; ++i) d(i, 0) = upstream[i] * sigmoid(z_out(i, 0));

  for (int l = kLayers - 1; l >= 0; --l) {
    const auto& s = specs_[l];
    const Eigen::Index kk = static_cast<Eigen::Index>(s.in_channels) * s.kernel * s.kernel;
    Eigen::Map<const RowMajorMatrix> wm(params_.data() + offsets_[l], s.out_channels, kk);
    const bool need_input = l > 0 || input_grad != nullptr;
    if (!frozen_[l]) {
      Eigen::Map<RowMajorMatrix> gw(param_grad->data() + offsets_[l], s.out_channels, kk);
      Eigen::Map<Eigen::VectorXd> gb(param_grad->data() + bias_offset(l), s.out_channels);
      gw.noalias() += d.transpose() * tape.inputs[l];
      gb += d.colwise().sum().transpose();
    }
    if (!need_input) break;
    Activation dx;
    if (s.kernel == 1) {
      dx = d * wm;
    } else {
      const Eigen::MatrixXd dcol = d * wm;
      dx = Activation::Zero(p, s.in_channels);
      col2im_add(dcol, s.in_channels, w, h, s.kernel, &dx);
    }
    if (l > 0) {
      const Activation& z = tape.pre[l - 1];
      d = dx.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    } else {
      input_grad->assign(s.in_channels, Grid<double>(w, h));
      for (int c = 0; c < s.in_channels; ++c)
        for (Eigen::Index i = 0; i < p; ++i) (*input_grad)[c][i] = dx(i, c);
    }
  }
}

Grid<double> TinyDepthNet::forward(const std::vector<Grid<double>>& input) {
  tape_.valid = false;
  return forward(input, &tape_);
}

void TinyDepthNet::backward(const Grid<double>& upstream, std::vector<double>* param_grad,
                            std::vector<Grid<double>>* input_grad) {
  backward(tape_, upstream, param_grad, input_grad);
}

nlohmann::json TinyDepthNet::layer_spec_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < kLayers; ++l) {
    layers.push_back({{"type", "conv"},
                      {"in", specs_[l].in_channels},
                      {"out", specs_[l].out_channels},
                      {"kernel", specs_[l].kernel},
                      {"activation", l + 1 < kLayers ? "relu" : "softplus"}});
  }
  return layers;
}

void adam_step(AdamState& s, std::vector<double>& params, const std::vector<double>& grad) {
  if (grad.size() != params.size()) throw DomainError("adam: gradient size mismatch");
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw StateError("adam: state sized for a different net");
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
    const double mh = s.m[i] / bc1;
    const double vh = s.v[i] / bc2;
    params[i] -= s.lr * mh / (std::sqrt(vh) + s.eps);
  }
}

void save_checkpoint(const std::filesystem::path& path, const TinyDepthNet& net, long step,
                     const nlohmann::json& extra) {
  nlohmann::json header = extra;
  header["format"] = "metriccam-checkpoint";
  header["layers"] = net.layer_spec_json();
  header["in_channels"] = net.in_channels();
  header["num_parameters"] = net.num_parameters();
  header["step"] = step;
  header["dtype"] = "float64-le";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << header.dump() << '\n';
  for (double v : net.parameters()) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::error_code ec;
  if (std::filesystem::is_directory(path, ec)) throw IoError("is a directory: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": missing checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (header.value("format", "") != "metriccam-checkpoint")
    throw ParseError(path.string() + ": not a metriccam checkpoint");
  Checkpoint ck{TinyDepthNet(header.at("in_channels").get<int>()), header.value("step", 0L), header};
  if (header.at("layers") != ck.net.layer_spec_json() ||
      header.at("num_parameters").get<std::size_t>() != ck.net.num_parameters())
    throw ParseError(path.string() + ": layer spec does not match this build");
  for (double& v : ck.net.parameters()) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ParseError(path.string() + ": truncated parameter block");
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
    v = std::bit_cast<double>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes after parameters");
  return ck;
}

}  // namespace metriccam
