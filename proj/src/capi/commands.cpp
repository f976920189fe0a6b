// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>

#include "camera.hpp"
#include "error.hpp"
#include "evalmetrics.hpp"
#include "gradcheck.hpp"
#include "io.hpp"
#include "model.hpp"
#include "recon.hpp"
#include "synthscene.hpp"
#include "train.hpp"

namespace metriccam::cmd {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& cfg, const char* command, std::initializer_list<const char*> allowed) {
  if (!cfg.is_object()) throw ParseError(std::string(command) + ": config must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : cfg.items())
    if (!ok.count(key)) throw ParseError(std::string(command) + ": unknown config key '" + key + "'");
}

template <typename T>
T get(const Json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
T require(const Json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg.at(key).is_null())
    throw ParseError(std::string("missing required config key '") + key + "'");
  return get<T>(cfg, key, T{});
}

Json envelope(const char* command, const Json& config) {
  return {{"tool", "metriccam"}, {"version", kVersion}, {"command", command}, {"config", config}};
}

std::string focal_key(double f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", f);
  return buf;
}

CameraIntrinsics resolve_intrinsics(const Json& j) {
  Json k = j;
  if (k.is_string()) k = io::read_json(k.get<std::string>());
  if (!k.is_object()) throw ParseError("intrinsics must be an object or a path to a JSON file");
  if ((!k.contains("fx") || !k.contains("fy")) && k.contains("focal_um")) {
    const auto meta = io::physical_meta_from_json(k);
    const double f = pixel_focal(*meta);
    if (!k.contains("fx")) k["fx"] = f;
    if (!k.contains("fy")) k["fy"] = f;
  }
  return io::intrinsics_from_json(k);
}

const char* kTrainKeys[] = {"variant", "canonical_focal", "batch_size", "iters", "lr", "seed",
                            "weights", "silog_lambda", "rpnl_patches", "vnl_triplets", "pwn_pairs",
                            "crop", "flip_probability", "init_output_level"};

TrainConfig train_config(const Json& cfg, int threads) {
  Json sub = Json::object();
  for (const char* k : kTrainKeys)
    if (cfg.contains(k)) sub[k] = cfg.at(k);
  TrainConfig c = train_config_from_json(sub);
  c.threads = threads;
  return c;
}

Json synth_config_json(const DatasetConfig& c, const std::string& out) {
  return {{"out", out},
          {"focals", c.focal_set},
          {"per_focal", c.scenes_per_focal},
          {"seed", c.seed},
          {"width", c.base_width},
          {"height", c.base_height},
          {"channels", c.channels},
          {"split", c.split}};
}

Manifest generate(const DatasetConfig& c, const fs::path& out, int threads) {
  return make_dataset(c, out, threads);
}

}  // namespace

int resolve_threads(const Json& cfg) {
  int threads = 1;
  if (cfg.is_object() && cfg.contains("threads")) threads = std::max(1, get<int>(cfg, "threads", 1));
  if (const char* env = std::getenv("METRICCAM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) threads = std::min<long>(threads, cap);
  }
  return threads;
}

Json synth(const Json& cfg) {
  check_keys(cfg, "synth", {"out", "focals", "per_focal", "seed", "width", "height", "channels", "split", "threads"});
  const std::string out = require<std::string>(cfg, "out");
  DatasetConfig c;
  c.focal_set = get(cfg, "focals", c.focal_set);
  c.scenes_per_focal = get(cfg, "per_focal", c.scenes_per_focal);
  c.seed = get(cfg, "seed", c.seed);
  c.base_width = get(cfg, "width", c.base_width);
  c.base_height = get(cfg, "height", c.base_height);
  c.channels = get(cfg, "channels", c.channels);
  c.split = get(cfg, "split", c.split);
  const Manifest m = generate(c, out, resolve_threads(cfg));
  Json r = envelope("synth", synth_config_json(c, out));
  std::map<std::string, int> groups;
  for (const auto& e : m.entries) ++groups[focal_key(e.focal_group)];
  r["frames"] = m.entries.size();
  r["groups"] = groups;
  r["manifest"] = (fs::path(out) / "manifest.json").string();
  return r;
}

namespace {

Json history_summary(const std::vector<HistoryRow>& h) {
  if (h.empty()) return nullptr;
  const HistoryRow& last = h.back();
  return {{"iter", last.iter}, {"pwn", last.pwn}, {"vnl", last.vnl}, {"silog", last.silog},
          {"rpnl", last.rpnl}, {"total", last.total}};
}

Json checkpoint_header(const TrainConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"canonical_focal", c.canonical_focal},
          {"config_hash", c.hash()},
          {"config", c.to_json()}};
}

ProgressFn bind_progress(const Progress& p, Variant v) {
  if (!p) return {};
  const std::string name = variant_name(v);
  return [p, name](const HistoryRow& row) { p(name, row.iter, row.total); };
}

}  // namespace

Json train(const Json& cfg, const Progress& progress) {
  std::vector<const char*> allowed = {"manifest", "out", "eval_manifest", "threads"};
  for (const char* k : kTrainKeys) allowed.push_back(k);
  if (!cfg.is_object()) throw ParseError("train: config must be a JSON object");
  for (const auto& [key, value] : cfg.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ParseError("train: unknown config key '" + key + "'");
  const std::string manifest_path = require<std::string>(cfg, "manifest");
  const fs::path out = require<std::string>(cfg, "out");
  const TrainConfig tc = train_config(cfg, resolve_threads(cfg));
  const Manifest manifest = load_manifest(manifest_path);

  TrainResult result = metriccam::train(tc, manifest, bind_progress(progress, tc.variant));
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  save_checkpoint(out / "checkpoint.mcc", result.net, tc.iters, checkpoint_header(tc));
  write_history_csv(out / "history.csv", result.history);

  Json config = tc.to_json();
  config["manifest"] = manifest_path;
  config["out"] = out.string();
  Json r = envelope("train", config);
  r["config_hash"] = tc.hash();
  r["input_channels"] = result.net.in_channels();
  r["num_parameters"] = result.net.num_parameters();
  r["final"] = history_summary(result.history);
  r["checkpoint"] = (out / "checkpoint.mcc").string();
  r["history"] = (out / "history.csv").string();
  if (cfg.contains("eval_manifest")) {
    const std::string em = require<std::string>(cfg, "eval_manifest");
    config["eval_manifest"] = em;
    r["config"] = config;
    r["eval"] = to_json(evaluate(result.net, load_manifest(em), tc.variant, tc.canonical_focal));
  }
  io::write_text(out / "train.json", r.dump(2) + "\n");
  return r;
}

Json ablate(const Json& cfg, const Progress& progress) {
  std::vector<const char*> allowed = {"train_manifest", "test_manifest", "variants", "out", "threads",
                                      "train_focals", "test_focals", "train_per_focal", "test_per_focal"};
  for (const char* k : kTrainKeys) allowed.push_back(k);
  if (!cfg.is_object()) throw ParseError("ablate: config must be a JSON object");
  for (const auto& [key, value] : cfg.items())
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end())
      throw ParseError("ablate: unknown config key '" + key + "'");
  const fs::path out = require<std::string>(cfg, "out");
  const int threads = resolve_threads(cfg);
  const TrainConfig base = train_config(cfg, threads);

  std::vector<std::string> names =
      get<std::vector<std::string>>(cfg, "variants", {"cstm_label", "cstm_image", "none", "camconvs"});
  std::vector<Variant> variants;
  for (const auto& n : names) variants.push_back(parse_variant(n));

  Json config = base.to_json();
  config.erase("variant");
  config["variants"] = names;
  config["out"] = out.string();

  Manifest train_set, test_set;
  if (cfg.contains("train_manifest") || cfg.contains("test_manifest")) {
    const std::string trp = require<std::string>(cfg, "train_manifest");
    const std::string tep = require<std::string>(cfg, "test_manifest");
    train_set = load_manifest(trp);
    test_set = load_manifest(tep);
    config["train_manifest"] = trp;
    config["test_manifest"] = tep;
  } else {
    DatasetConfig tr;
    tr.focal_set = get(cfg, "train_focals", std::vector<double>{400.0, 700.0, 1000.0, 1300.0});
    tr.scenes_per_focal = get(cfg, "train_per_focal", 40);
    tr.seed = base.seed;
    tr.split = "train";
    DatasetConfig te = tr;
    te.focal_set = get(cfg, "test_focals", std::vector<double>{550.0, 1600.0});
    te.scenes_per_focal = get(cfg, "test_per_focal", 20);
    te.split = "test";
    train_set = generate(tr, out / "data" / "train", threads);
    test_set = generate(te, out / "data" / "test", threads);
    config["train_data"] = synth_config_json(tr, (out / "data" / "train").string());
    config["test_data"] = synth_config_json(te, (out / "data" / "test").string());
  }

  Json rows = Json::array();
  for (Variant v : variants) {
    TrainConfig tc = base;
    tc.variant = v;
    TrainResult tr = metriccam::train(tc, train_set, bind_progress(progress, v));
    const EvalReport rep = evaluate(tr.net, test_set, v, tc.canonical_focal);
    const fs::path vdir = out / variant_name(v);
    std::error_code ec;
    fs::create_directories(vdir, ec);
    if (ec) throw IoError("cannot create " + vdir.string() + ": " + ec.message());
    save_checkpoint(vdir / "checkpoint.mcc", tr.net, tc.iters, checkpoint_header(tc));
    write_history_csv(vdir / "history.csv", tr.history);
    Json absrel = Json::object();
    for (const auto& g : rep.groups) absrel[focal_key(g.focal)] = g.metrics.absrel;
    rows.push_back({{"variant", variant_name(v)},
                    {"absrel", absrel},
                    {"mean_absrel", rep.mean_absrel},
                    {"final", history_summary(tr.history)},
                    {"eval", to_json(rep)}});
  }
  Json r = envelope("ablate", config);
  r["rows"] = rows;
  io::write_text(out / "ablation.json", r.dump(2) + "\n");
  return r;
}

Json eval_depth(const Json& cfg) {
  check_keys(cfg, "eval-depth", {"pred", "gt", "align", "checkpoint", "manifest"});
  const bool align = get(cfg, "align", false);
  Json config = cfg;
  config["align"] = align;
  Json r = envelope("eval-depth", config);
  if (cfg.contains("checkpoint") || cfg.contains("manifest")) {
    if (cfg.contains("pred") || cfg.contains("gt"))
      throw ParseError("eval-depth: use either pred/gt files or checkpoint/manifest");
    if (align) throw ParseError("eval-depth: align applies to pred/gt files only");
    const Checkpoint ck = load_checkpoint(require<std::string>(cfg, "checkpoint"));
    const Variant v = parse_variant(ck.header.value("variant", "cstm_label"));
    const double fc = ck.header.value("canonical_focal", kDefaultCanonicalFocal);
    const EvalReport rep = evaluate(ck.net, load_manifest(require<std::string>(cfg, "manifest")), v, fc);
    r["variant"] = variant_name(v);
    r["report"] = to_json(rep);
    return r;
  }
  const DepthMap pred = io::read_pfm_depth(require<std::string>(cfg, "pred"));
  const DepthMap gt = io::read_pfm_depth(require<std::string>(cfg, "gt"));
  if (!pred.values.same_shape(gt.values)) throw DomainError("eval-depth: pred and gt sizes differ");
  if (align) {
    const ScaleShift ss = align_scale_shift(pred, gt);
    r["alignment"] = {{"scale", ss.scale}, {"shift", ss.shift}, {"nonpositive", ss.nonpositive}};
    r["metrics"] = to_json(depth_metrics(ss.aligned, gt));
  } else {
    r["metrics"] = to_json(depth_metrics(pred, gt));
  }
  return r;
}

Json reconstruct(const Json& cfg) {
  check_keys(cfg, "reconstruct", {"manifest", "checkpoint", "out", "voxel", "reference", "tau",
                                  "icp", "max_iters", "tol", "trim", "frames"});
  const std::string mpath = require<std::string>(cfg, "manifest");
  const Manifest m = load_manifest(mpath);
  const double voxel = get(cfg, "voxel", 0.0);
  const double tau = get(cfg, "tau", 0.05);
  if (voxel < 0.0) throw DomainError("reconstruct: voxel must be >= 0");
  if (!(tau > 0.0)) throw DomainError("reconstruct: tau must be > 0");
  std::vector<std::size_t> frames = get(cfg, "frames", std::vector<std::size_t>{});
  if (frames.empty())
    for (std::size_t i = 0; i < m.entries.size(); ++i) frames.push_back(i);

  std::optional<Checkpoint> ck;
  Variant v = Variant::kCstmLabel;
  double fc = kDefaultCanonicalFocal;
  if (cfg.contains("checkpoint")) {
    ck = load_checkpoint(require<std::string>(cfg, "checkpoint"));
    v = parse_variant(ck->header.value("variant", "cstm_label"));
    fc = ck->header.value("canonical_focal", kDefaultCanonicalFocal);
  }
  std::vector<std::pair<PointCloud, Pose>> parts;
  for (std::size_t i : frames) {
    const LoadedFrame f = load_frame(m, i);
    DepthMap d = ck ? predict_metric(ck->net, f.image, f.intrinsics, v, fc) : f.depth;
    if (ck) {
      // Keep the prediction where the frame has valid geometry.
      for (std::size_t p = 0; p < d.values.size(); ++p)
        if (!f.depth.valid(p)) {
          d.values[p] = 0.0;
          d.mask[p] = 0;
        }
    }
    parts.emplace_back(unproject(d, f.intrinsics, static_cast<int>(i)), f.pose);
  }
  PointCloud fused = transform_fuse(parts, voxel);
  if (fused.empty()) throw DegenerateInputError("reconstruct: fused cloud is empty");

  Json config = cfg;
  config["voxel"] = voxel;
  config["tau"] = tau;
  config["source"] = ck ? "prediction" : "ground_truth";
  Json r = envelope("reconstruct", config);
  r["points"] = fused.size();

  if (cfg.contains("reference")) {
    const PointCloud ref = io::read_ply(require<std::string>(cfg, "reference"));
    PointCloud aligned = fused;
    if (get(cfg, "icp", true)) {
      IcpOptions opts;
      opts.max_iters = get(cfg, "max_iters", opts.max_iters);
      opts.tol = get(cfg, "tol", opts.tol);
      opts.trim_fraction = get(cfg, "trim", opts.trim_fraction);
      const IcpResult ir = icp(fused, ref, opts);
      for (auto& p : aligned.points) p = ir.transform.apply(p);
      r["icp"] = {{"pose", io::to_json(ir.transform)}, {"rms", ir.rms}, {"iterations", ir.iterations}};
    }
    const FScore fsc = fscore(aligned, ref, tau);
    r["chamfer_l1"] = chamfer_l1(aligned, ref);
    r["fscore"] = fsc.fscore;
    r["precision"] = fsc.precision;
    r["recall"] = fsc.recall;
  }
  if (cfg.contains("out")) {
    const std::string out = require<std::string>(cfg, "out");
    io::write_ply(out, fused);
    r["ply"] = out;
  }
  return r;
}

Json measure(const Json& cfg) {
  check_keys(cfg, "measure", {"depth", "intrinsics", "pairs"});
  const DepthMap depth = io::read_pfm_depth(require<std::string>(cfg, "depth"));
  if (!cfg.contains("intrinsics")) throw ParseError("missing required config key 'intrinsics'");
  const CameraIntrinsics k = resolve_intrinsics(cfg.at("intrinsics"));
  const auto pairs = require<std::vector<std::array<int, 4>>>(cfg, "pairs");
  if (pairs.empty()) throw ParseError("measure: no pixel pairs given");
  Json dist = Json::array();
  for (const auto& p : pairs) dist.push_back(metriccam::measure(depth, k, p[0], p[1], p[2], p[3]));
  Json config = cfg;
  config["intrinsics"] = io::to_json(k);
  Json r = envelope("measure", config);
  r["distances_m"] = dist;
  return r;
}

Json gradcheck(const Json& cfg) {
  check_keys(cfg, "gradcheck", {"seeds"});
  const auto seeds = get(cfg, "seeds", std::vector<std::uint64_t>{0, 1, 2});
  if (seeds.empty()) throw ParseError("gradcheck: seeds must be non-empty");
  Json r = envelope("gradcheck", {{"seeds", seeds}});
  const Json rep = to_json(run_gradcheck(seeds));
  r["passed"] = rep.at("passed");
  r["tolerance"] = rep.at("tolerance");
  r["cases"] = rep.at("cases");
  return r;
}

}  // namespace metriccam::cmd
