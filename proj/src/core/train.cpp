// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "train.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "error.hpp"
#include "io.hpp"

namespace metriccam {

Variant parse_variant(const std::string& name) {
  if (name == "cstm_label") return Variant::kCstmLabel;
  if (name == "cstm_image") return Variant::kCstmImage;
  if (name == "none") return Variant::kNone;
  if (name == "camconvs") return Variant::kCamConvs;
  throw DomainError("unknown variant '" + name + "' (expected cstm_label, cstm_image, none, camconvs)");
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCstmLabel: return "cstm_label";
    case Variant::kCstmImage: return "cstm_image";
    case Variant::kNone: return "none";
    case Variant::kCamConvs: return "camconvs";
  }
  throw DomainError("unknown variant");
}

int input_channels(Variant v, int image_channels) {
  return image_channels + (v == Variant::kCamConvs ? 4 : 0);
}

void TrainConfig::validate() const {
  if (!(canonical_focal > 0.0) || !std::isfinite(canonical_focal))
    throw DomainError("train: canonical focal must be > 0");
  if (batch_size < 1) throw DomainError("train: batch_size must be >= 1");
  if (iters < 0) throw DomainError("train: iters must be >= 0");
  if (!(lr > 0.0)) throw DomainError("train: lr must be > 0");
  if (crop_width < 3 || crop_height < 3) throw DomainError("train: crop must be at least 3x3");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw DomainError("train: flip_probability outside [0,1]");
  for (double w : {weights.pwn, weights.vnl, weights.silog, weights.rpnl})
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("train: loss weights must be finite and >= 0");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"variant", variant_name(variant)},
          {"canonical_focal", canonical_focal},
          {"batch_size", batch_size},
          {"iters", iters},
          {"lr", lr},
          {"seed", seed},
          {"weights", {{"pwn", weights.pwn}, {"vnl", weights.vnl}, {"silog", weights.silog}, {"rpnl", weights.rpnl}}},
          {"silog_lambda", loss.silog_lambda},
          {"rpnl_patches", loss.rpnl_patches},
          {"vnl_triplets", loss.vnl_triplets},
          {"pwn_pairs", loss.pwn_pairs},
          {"crop", {crop_width, crop_height}},
          {"flip_probability", flip_probability},
          {"init_output_level", init_output_level}};
}

std::string TrainConfig::hash() const {
  const std::string s = to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    c.canonical_focal = j.value("canonical_focal", c.canonical_focal);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.iters = j.value("iters", c.iters);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      c.weights.pwn = w.value("pwn", c.weights.pwn);
      c.weights.vnl = w.value("vnl", c.weights.vnl);
      c.weights.silog = w.value("silog", c.weights.silog);
      c.weights.rpnl = w.value("rpnl", c.weights.rpnl);
    }
    c.loss.silog_lambda = j.value("silog_lambda", c.loss.silog_lambda);
    c.loss.rpnl_patches = j.value("rpnl_patches", c.loss.rpnl_patches);
    c.loss.vnl_triplets = j.value("vnl_triplets", c.loss.vnl_triplets);
    c.loss.pwn_pairs = j.value("pwn_pairs", c.loss.pwn_pairs);
    if (j.contains("crop")) {
      c.crop_width = j.at("crop").at(0).get<int>();
      c.crop_height = j.at("crop").at(1).get<int>();
    }
    c.flip_probability = j.value("flip_probability", c.flip_probability);
    c.init_output_level = j.value("init_output_level", c.init_output_level);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainingSample prepare_sample(const LoadedFrame& frame, Variant variant, double canonical_focal) {
  TrainingSample s;
  s.metric_loss = frame.metric_loss;
  switch (variant) {
    case Variant::kCstmLabel: {
      LabelCanonical lc = cstm_label_forward(frame.depth, frame.intrinsics, canonical_focal);
      s.image = frame.image;
      s.depth = std::move(lc.depth);
      s.intrinsics = lc.intrinsics;
      // Depth scaling stretches geometry along z; normals follow the inverse
      // transpose diag(1, 1, 1/omega).
      s.normals = frame.normals;
      for (std::size_t i = 0; i < s.normals.size(); ++i) {
        Vec3& n = s.normals[i];
        if (n.squaredNorm() == 0.0) continue;
        n(2) /= lc.omega;
        n.normalize();
      }
      s.plane_id = frame.plane_id;
      break;
    }
    case Variant::kCstmImage: {
      ImageCanonical ic = cstm_image_forward(frame.image, frame.depth, frame.intrinsics, canonical_focal);
      const int w = ic.intrinsics.width, h = ic.intrinsics.height;
      s.normals = resize_nearest_grid(frame.normals, w, h, ic.omega, ic.omega);
      s.plane_id = resize_nearest_grid(frame.plane_id, w, h, ic.omega, ic.omega);
      s.image = std::move(ic.image);
      s.depth = std::move(ic.depth);
      s.intrinsics = ic.intrinsics;
      break;
    }
    case Variant::kNone:
    case Variant::kCamConvs:
      s.image = frame.image;
      s.depth = frame.depth;
      s.normals = frame.normals;
      s.plane_id = frame.plane_id;
      s.intrinsics = frame.intrinsics;
      break;
  }
  return s;
}

TrainingSample crop_and_flip(const TrainingSample& s, const PixelRect& rect, bool flip) {
  TrainingSample out;
  out.metric_loss = s.metric_loss;
  CropResult c = crop(s.image, s.depth, s.intrinsics, rect);
  out.image = std::move(c.image);
  out.depth = std::move(c.depth);
  out.intrinsics = c.intrinsics;
  out.normals = crop_grid(s.normals, rect);
  out.plane_id = crop_grid(s.plane_id, rect);
  if (flip) {
    for (auto& ch : out.image.channels) ch = flip_grid(ch);
    out.depth.values = flip_grid(out.depth.values);
    out.depth.mask = flip_grid(out.depth.mask);
    out.normals = flip_grid(out.normals);
    for (std::size_t i = 0; i < out.normals.size(); ++i) out.normals[i](0) = -out.normals[i](0);
    out.plane_id = flip_grid(out.plane_id);
    out.intrinsics = flip_intrinsics(out.intrinsics);
  }
  return out;
}

std::vector<Grid<double>> network_input(const ImageMap& image, const CameraIntrinsics& k,
                                        Variant variant) {
  std::vector<Grid<double>> in = image.channels;
  if (variant == Variant::kCamConvs) {
    auto enc = camconvs_encoding(k);
    for (auto& g : enc) in.push_back(std::move(g));
  }
  return in;
}

namespace {

struct SampleJob {
  const TrainingSample* source = nullptr;
  PixelRect rect;
  bool flip = false;
  std::uint64_t loss_seed = 0;
};

struct SampleOut {
  bool used = false;
  TotalLoss loss;
  std::vector<double> grad;
};

void run_job(const TinyDepthNet& net, const TrainConfig& cfg, const SampleJob& job, SampleOut* out) {
  const TrainingSample s = crop_and_flip(*job.source, job.rect, job.flip);
  Tape tape;
  const Grid<double> raw = net.forward(network_input(s.image, s.intrinsics, cfg.variant), &tape);
  DepthMap pred;
  pred.values = raw;
  pred.mask = Grid<std::uint8_t>(raw.width(), raw.height(), 1);
  FrameAux aux;
  aux.intrinsics = s.intrinsics;
  aux.normals = &s.normals;
  aux.plane_id = &s.plane_id;
  aux.metric_loss = s.metric_loss;
  Rng loss_rng(job.loss_seed);
  try {
    out->loss = total_loss(pred, s.depth, aux, cfg.weights, loss_rng, cfg.loss);
  } catch (const DegenerateInputError&) {
    out->used = false;
    return;
  }
  out->used = true;
  out->grad.assign(net.num_parameters(), 0.0);
  if (std::isfinite(out->loss.total.value)) net.backward(tape, out->loss.total.grad, &out->grad);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Manifest& manifest, const ProgressFn& progress) {
  cfg.validate();
  if (manifest.entries.empty()) throw DomainError("train: manifest is empty");

  std::map<double, std::vector<TrainingSample>> groups;
  int image_channels = -1;
  std::vector<double> targets;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const LoadedFrame f = load_frame(manifest, i);
    if (image_channels < 0) image_channels = f.image.num_channels();
    if (f.image.num_channels() != image_channels) throw DomainError("train: mixed channel counts in manifest");
    TrainingSample s = prepare_sample(f, cfg.variant, cfg.canonical_focal);
    for (std::size_t p = 0; p < s.depth.values.size(); ++p)
      if (s.depth.valid(p)) targets.push_back(s.depth.values[p]);
    groups[f.focal_group].push_back(std::move(s));
  }
  const int n_groups = static_cast<int>(groups.size());
  if (cfg.batch_size % n_groups != 0)
    throw DomainError("train: batch_size " + std::to_string(cfg.batch_size) + " not divisible by " +
                      std::to_string(n_groups) + " focal groups");
  const int per_group = cfg.batch_size / n_groups;

  const Rng root(cfg.seed);
  Rng init_rng = root.substream("init");
  Rng batch_rng = root.substream("batch");
  Rng loss_rng = root.substream("loss");

  TrainResult result{TinyDepthNet(input_channels(cfg.variant, image_channels)), {}, {}};
  TinyDepthNet& net = result.net;
  net.init(init_rng);
  if (cfg.init_output_level && !targets.empty()) net.set_output_level(lower_median(targets));

  AdamState adam;
  adam.lr = cfg.lr;
  std::vector<double> grad(net.num_parameters());
  std::vector<SampleJob> jobs(cfg.batch_size);
  std::vector<SampleOut> outs(cfg.batch_size);
  result.history.reserve(cfg.iters);

  for (long it = 0; it < cfg.iters; ++it) {
    int j = 0;
    for (auto& [focal, frames] : groups) {
      for (int k = 0; k < per_group; ++k, ++j) {
        SampleJob& job = jobs[j];
        job.source = &frames[batch_rng.below(frames.size())];
        const int w = job.source->intrinsics.width, h = job.source->intrinsics.height;
        job.rect.w = std::min(cfg.crop_width, w);
        job.rect.h = std::min(cfg.crop_height, h);
        job.rect.x0 = batch_rng.uniform_int(0, w - job.rect.w);
        job.rect.y0 = batch_rng.uniform_int(0, h - job.rect.h);
        job.flip = batch_rng.bernoulli(cfg.flip_probability);
        job.loss_seed = loss_rng.next_u64();
      }
      result.group_draws[focal] += per_group;
    }
    const int n_threads = std::clamp(cfg.threads, 1, cfg.batch_size);
    if (n_threads == 1) {
      for (int b = 0; b < cfg.batch_size; ++b) run_job(net, cfg, jobs[b], &outs[b]);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
          for (int b = t; b < cfg.batch_size; b += n_threads) run_job(net, cfg, jobs[b], &outs[b]);
        });
      for (auto& th : pool) th.join();
    }

    HistoryRow row;
    row.iter = it;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const SampleOut& o = outs[b];
      if (!o.used) continue;
      ++row.samples;
      row.pwn += o.loss.pwn;
      row.vnl += o.loss.vnl;
      row.silog += o.loss.silog;
      row.rpnl += o.loss.rpnl;
      row.total += o.loss.total.value;
      for (std::size_t p = 0; p < grad.size(); ++p) grad[p] += o.grad[p];
    }
    if (row.samples > 0) {
      const double inv = 1.0 / row.samples;
      row.pwn *= inv;
      row.vnl *= inv;
      row.silog *= inv;
      row.rpnl *= inv;
      row.total *= inv;
      if (!std::isfinite(row.total))
        throw DivergenceError("train: non-finite loss at iteration " + std::to_string(it), it);
      for (double& g : grad) g *= inv;
      adam_step(adam, net.parameters(), grad);
      for (double p : net.parameters())
        if (!std::isfinite(p))
          throw DivergenceError("train: non-finite parameters at iteration " + std::to_string(it), it);
    }
    result.history.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

DepthMap predict_metric(const TinyDepthNet& net, const ImageMap& image, const CameraIntrinsics& k,
                        Variant variant, double canonical_focal) {
  k.validate();
  if (image.width() != k.width || image.height() != k.height)
    throw DomainError("predict_metric: image size does not match intrinsics");
  Tape tape;
  auto wrap = [](Grid<double> g) {
    DepthMap d;
    d.mask = Grid<std::uint8_t>(g.width(), g.height(), 1);
    d.values = std::move(g);
    return d;
  };
  switch (variant) {
    case Variant::kCstmLabel: {
      const double omega = canonical_focal / effective_focal(k);
      if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("predict_metric: canonical focal must be > 0");
      return cstm_label_inverse(wrap(net.forward(image.channels, &tape)), omega);
    }
    case Variant::kCstmImage: {
      CameraIntrinsics kc;
      double omega = 1.0;
      const ImageMap in = cstm_image_resize_input(image, k, canonical_focal, &kc, &omega);
      return cstm_image_inverse(wrap(net.forward(in.channels, &tape)), omega, k.width, k.height);
    }
    case Variant::kNone:
    case Variant::kCamConvs:
      return wrap(net.forward(network_input(image, k, variant), &tape));
  }
  throw DomainError("predict_metric: unknown variant");
}

EvalReport evaluate(const TinyDepthNet& net, const Manifest& manifest, Variant variant,
                    double canonical_focal) {
  std::map<double, std::vector<DepthMetrics>> per_group;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const LoadedFrame f = load_frame(manifest, i);
    const DepthMap pred = predict_metric(net, f.image, f.intrinsics, variant, canonical_focal);
    per_group[f.focal_group].push_back(depth_metrics(pred, f.depth));
  }
  EvalReport r;
  for (const auto& [focal, ms] : per_group) {
    GroupEval g;
    g.focal = focal;
    g.frames = ms.size();
    const double inv = 1.0 / static_cast<double>(ms.size());
    for (const auto& m : ms) {
      g.metrics.absrel += m.absrel * inv;
      g.metrics.rms += m.rms * inv;
      g.metrics.rms_log += m.rms_log * inv;
      g.metrics.log10 += m.log10 * inv;
      g.metrics.delta1 += m.delta1 * inv;
      g.metrics.delta2 += m.delta2 * inv;
      g.metrics.delta3 += m.delta3 * inv;
      g.metrics.valid_pixels += m.valid_pixels;
    }
    r.mean_absrel += g.metrics.absrel / static_cast<double>(per_group.size());
    r.groups.push_back(g);
  }
  return r;
}

nlohmann::json to_json(const DepthMetrics& m) {
  return {{"absrel", m.absrel}, {"rms", m.rms},       {"rms_log", m.rms_log},
          {"log10", m.log10},   {"delta1", m.delta1}, {"delta2", m.delta2},
          {"delta3", m.delta3}, {"valid_pixels", m.valid_pixels}};
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) {
    nlohmann::json j = to_json(g.metrics);
    j["focal"] = g.focal;
    j["frames"] = g.frames;
    groups.push_back(j);
  }
  return {{"groups", groups}, {"mean_absrel", r.mean_absrel}};
}

void write_history_csv(const std::filesystem::path& path, const std::vector<HistoryRow>& history) {
  std::string s = "iter,pwn,vnl,silog,rpnl,total,samples\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.iter, r.pwn, r.vnl,
                  r.silog, r.rpnl, r.total, r.samples);
    s += buf;
  }
  io::write_text(path, s);
}

std::vector<AblationRow> ablate(const TrainConfig& base, const std::vector<Variant>& variants,
                                const Manifest& train_set, const Manifest& test_set,
                                const ProgressFn& progress) {
  if (variants.empty()) throw DomainError("ablate: no variants given");
  std::vector<AblationRow> rows;
  for (Variant v : variants) {
    TrainConfig cfg = base;
    cfg.variant = v;
    TrainResult tr = train(cfg, train_set, progress);
    EvalReport rep = evaluate(tr.net, test_set, v, cfg.canonical_focal);
    rows.push_back({v, std::move(rep), std::move(tr.history), std::move(tr.net)});
  }
  return rows;
}

}  // namespace metriccam
