// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradcheck.hpp"

#include <cmath>

#include "model.hpp"

namespace metriccam {

RelErr relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                      double floor) {
  RelErr r;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    if (!(scale > floor)) continue;
    ++r.checked;
    r.max_rel = std::max(r.max_rel, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return r;
}

GradCheckCase check_loss_gradient(const std::string& name, const LossFn& fn, const DepthMap& pred,
                                  double rel_step) {
  GradCheckCase c;
  c.name = name;
  const LossResult base = fn(pred);
  std::vector<double> analytic, numeric;
  DepthMap p = pred;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    if (!p.valid(i)) continue;
    const double x = p.values[i];
    const double h = rel_step * x;
    p.values[i] = x + h;
    const double up = fn(p).value;
    p.values[i] = x - h;
    const double dn = fn(p).value;
    p.values[i] = x;
    analytic.push_back(base.grad[i]);
    numeric.push_back((up - dn) / (2.0 * h));
  }
  const RelErr e = relative_error(analytic, numeric);
  c.checked = e.checked;
  c.max_rel_error = e.max_rel;
  c.passed = std::isfinite(e.max_rel) && e.max_rel < kGradCheckTolerance;
  return c;
}

RandomFrame random_frame(std::uint64_t seed, int width, int height) {
  Rng rng = Rng(seed).substream("gradcheck-frame");
  RandomFrame f;
  f.intrinsics = {10.0, 10.5, 0.5 * (width - 1) + 0.3, 0.5 * (height - 1) - 0.2, width, height};
  f.pred = DepthMap(width, height);
  f.gt = DepthMap(width, height);
  f.normals = Grid<Vec3>(width, height, Vec3::Zero());
  f.plane_id = Grid<int>(width, height, -1);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      f.pred.set(x, y, rng.uniform(1.0, 5.0));
      const double g = rng.uniform(1.0, 5.0);
      if (rng.bernoulli(0.08)) {
        f.gt.invalidate(x, y);
      } else {
        f.gt.set(x, y, g);
      }
      Vec3 n(rng.normal(), rng.normal(), -std::abs(rng.normal()) - 0.5);
      f.normals(x, y) = n.normalized();
      f.plane_id(x, y) = x < width / 2 ? 0 : 1;
    }
  }
  return f;
}

namespace {

void add_case(GradCheckReport* r, GradCheckCase c, std::uint64_t seed) {
  c.seed = seed;
  r->passed = r->passed && c.passed;
  r->cases.push_back(std::move(c));
}

}  // namespace

GradCheckReport check_losses(const std::vector<std::uint64_t>& seeds) {
  GradCheckReport report;
  for (std::uint64_t seed : seeds) {
    const RandomFrame f = random_frame(seed);
    const Rng streams(seed);
    // Every evaluation starts from the same stream state, so the sampled
    // patches, triplets and pairs are frozen across the +-h evaluations.
    add_case(&report,
             check_loss_gradient("silog", [&](const DepthMap& p) { return silog(p, f.gt, kSilogLambda); }, f.pred),
             seed);
    add_case(&report, check_loss_gradient("rpnl", [&](const DepthMap& p) {
               Rng r = streams.substream("patch");
               return rpnl(p, f.gt, kRpnlPatches, r, false);
             }, f.pred), seed);
    add_case(&report, check_loss_gradient("vnl", [&](const DepthMap& p) {
               Rng r = streams.substream("triplet");
               return vnl(p, f.gt, f.intrinsics, kVnlTriplets, r);
             }, f.pred), seed);
    add_case(&report, check_loss_gradient("pwn", [&](const DepthMap& p) {
               Rng r = streams.substream("pair");
               return pwn(p, f.normals, f.plane_id, f.intrinsics, kPwnPairs, r, false);
             }, f.pred), seed);
    add_case(&report, check_loss_gradient("total", [&](const DepthMap& p) {
               Rng r = streams.substream("total");
               FrameAux aux;
               aux.intrinsics = f.intrinsics;
               aux.normals = &f.normals;
               aux.plane_id = &f.plane_id;
               return total_loss(p, f.gt, aux, LossWeights{0.7, 1.3, 0.9, 1.1}, r).total;
             }, f.pred), seed);
  }
  return report;
}

GradCheckReport check_network(const std::vector<std::uint64_t>& seeds) {
  GradCheckReport report;
  for (std::uint64_t seed : seeds) {
    for (int channels : {1, 5}) {
      Rng rng = Rng(seed).substream("gradcheck-net", static_cast<std::uint64_t>(channels));
      TinyDepthNet net(channels);
      net.init(rng);
      for (double& p : net.parameters()) p += 0.05 * rng.normal();  // nonzero biases too
      const int w = 6, h = 6;
      std::vector<Grid<double>> input(channels, Grid<double>(w, h));
      for (auto& g : input)
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = rng.uniform(-1.0, 1.0);
      Grid<double> weights(w, h);
      for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = rng.uniform(-1.0, 1.0);
      auto objective = [&](const TinyDepthNet& n, const std::vector<Grid<double>>& in) {
        Tape t;
        const Grid<double> out = n.forward(in, &t);
        double s = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) s += weights[i] * out[i];
        return s;
      };

      Tape tape;
      net.forward(input, &tape);
      std::vector<double> grad;
      std::vector<Grid<double>> input_grad;
      net.backward(tape, weights, &grad, &input_grad);

      const std::string tag = channels == 1 ? "" : "/camconvs";
      for (int l = 0; l < TinyDepthNet::kLayers; ++l) {
        std::vector<double> analytic, numeric;
        TinyDepthNet probe = net;
        for (std::size_t i = net.weight_offset(l); i < net.weight_offset(l) + net.layer_size(l); ++i) {
          const double x = probe.parameters()[i];
          probe.parameters()[i] = x + kGradCheckParamStep;
          const double up = objective(probe, input);
          probe.parameters()[i] = x - kGradCheckParamStep;
          const double dn = objective(probe, input);
          probe.parameters()[i] = x;
          analytic.push_back(grad[i]);
          numeric.push_back((up - dn) / (2.0 * kGradCheckParamStep));
        }
        const RelErr e = relative_error(analytic, numeric);
        GradCheckCase c;
        c.name = "net/layer" + std::to_string(l) + tag;
        c.checked = e.checked;
        c.max_rel_error = e.max_rel;
        c.passed = e.max_rel < kGradCheckTolerance && e.checked > 0;
        add_case(&report, c, seed);
      }

      // Jacobian-vector product along a random input direction.
      std::vector<Grid<double>> dir(channels, Grid<double>(w, h));
      double jvp = 0.0;
      for (int c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < dir[c].size(); ++i) {
          dir[c][i] = rng.uniform(-1.0, 1.0);
          jvp += input_grad[c][i] * dir[c][i];
        }
      auto shifted = [&](double t) {
        auto in = input;
        for (int c = 0; c < channels; ++c)
          for (std::size_t i = 0; i < in[c].size(); ++i) in[c][i] += t * dir[c][i];
        return objective(net, in);
      };
      const double fd = (shifted(kGradCheckParamStep) - shifted(-kGradCheckParamStep)) / (2.0 * kGradCheckParamStep);
      const RelErr e = relative_error({jvp}, {fd});
      GradCheckCase c;
      c.name = "net/input-jvp" + tag;
      c.checked = e.checked;
      c.max_rel_error = e.max_rel;
      c.passed = e.max_rel < kGradCheckTolerance;
      add_case(&report, c, seed);
    }
  }
  return report;
}

GradCheckReport run_gradcheck(const std::vector<std::uint64_t>& seeds) {
  GradCheckReport r = check_losses(seeds);
  GradCheckReport n = check_network(seeds);
  r.passed = r.passed && n.passed;
  for (auto& c : n.cases) r.cases.push_back(std::move(c));
  return r;
}

nlohmann::json to_json(const GradCheckReport& r) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : r.cases)
    cases.push_back({{"name", c.name},
                     {"seed", c.seed},
                     {"checked", c.checked},
                     {"max_rel_error", c.max_rel_error},
                     {"passed", c.passed}});
  return {{"passed", r.passed}, {"tolerance", kGradCheckTolerance}, {"cases", cases}};
}

}  // namespace metriccam
