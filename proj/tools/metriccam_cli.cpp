// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <stdexcept>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "metriccam/metriccam.h"

namespace {

using Json = nlohmann::json;

enum ExitCode { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitIo = 3, kExitDiverged = 4, kExitDegenerate = 5 };

int exit_code_for(mc_status s) {
  switch (s) {
    case MC_OK: return kExitOk;
    case MC_ERR_PARSE:
    case MC_ERR_INVALID_ARGUMENT:
    case MC_ERR_DOMAIN: return kExitConfig;
    case MC_ERR_IO: return kExitIo;
    case MC_ERR_DIVERGED: return kExitDiverged;
    case MC_ERR_DEGENERATE:
    case MC_ERR_SINGULAR: return kExitDegenerate;
    default: return kExitFailure;
  }
}

// Flags that were given on the command line, folded over an optional config
// file. Precedence: flags > config file > built-in defaults.
struct ConfigUnreadable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Layered {
  std::string config_path;
  Json flags = Json::object();
  std::vector<std::function<void()>> collectors;

  Json resolve() {
    for (auto& collect : collectors) collect();
    Json cfg = Json::object();
    if (!config_path.empty()) {
      std::error_code ec;
      if (std::filesystem::is_directory(config_path, ec)) throw ConfigUnreadable("config path is a directory: " + config_path);
      std::ifstream in(config_path);
      if (!in) throw ConfigUnreadable("cannot open config file " + config_path);
      try {
        cfg = Json::parse(in);
      } catch (const Json::exception& e) {
        throw std::runtime_error("config file " + config_path + ": " + e.what());
      }
      if (!cfg.is_object()) throw std::runtime_error("config file must hold a JSON object");
    }
    for (const auto& [k, v] : flags.items()) cfg[k] = v;
    return cfg;
  }
};

template <typename T>
void bind(CLI::App* app, Layered* layered, const std::string& flag, const std::string& key, const std::string& help,
          const std::string& delimiter = "") {
  auto value = std::make_shared<T>();
  CLI::Option* opt = app->add_option(flag, *value, help);
  if (!delimiter.empty()) opt->delimiter(delimiter[0]);
  layered->collectors.push_back([=]() {
    if (opt->count() > 0) layered->flags[key] = *value;
  });
}

struct Command {
  CLI::App* app = nullptr;
  Layered layered;
  int log_every = 500;
};

void progress_printer(const char* variant, long iter, double total, void* user) {
  const int every = *static_cast<int*>(user);
  if (every > 0 && (iter % every == 0))
    std::fprintf(stderr, "[%s] iter %ld loss %.6f\n", variant, iter, total);
}

void add_train_flags(Command* c) {
  bind<std::string>(c->app, &c->layered, "--variant", "variant", "cstm_label | cstm_image | none | camconvs");
  bind<double>(c->app, &c->layered, "--canonical-focal", "canonical_focal", "Canonical focal length in pixels");
  bind<int>(c->app, &c->layered, "--iters", "iters", "Training iterations");
  bind<double>(c->app, &c->layered, "--lr", "lr", "Adam learning rate");
  bind<int>(c->app, &c->layered, "--batch-size", "batch_size", "Samples per batch, divisible by the focal groups");
  bind<std::uint64_t>(c->app, &c->layered, "--seed", "seed", "Seed for every random stream");
  bind<std::vector<int>>(c->app, &c->layered, "--crop", "crop", "Crop width,height", ",");
  bind<double>(c->app, &c->layered, "--silog-lambda", "silog_lambda", "Variance weight of the silog loss");
  bind<int>(c->app, &c->layered, "--threads", "threads", "Worker threads (capped by METRICCAM_THREADS)");
  auto weights = std::make_shared<std::vector<double>>();
  CLI::Option* w = c->app->add_option("--weights", *weights, "Loss weights pwn,vnl,silog,rpnl")->delimiter(',')->expected(4);
  Layered* layered = &c->layered;
  layered->collectors.push_back([=]() {
    if (w->count() > 0)
      layered->flags["weights"] = {{"pwn", (*weights)[0]}, {"vnl", (*weights)[1]}, {"silog", (*weights)[2]}, {"rpnl", (*weights)[3]}};
  });
  c->app->add_option("--log-every", c->log_every, "Print the loss every N iterations to stderr (0: quiet)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metriccam: canonical camera transforms, metric depth training and evaluation"};
  app.set_version_flag("--version", std::string(mc_version()));
  app.require_subcommand(1);

  std::vector<Command> cmds(7);
  auto make = [&](int i, const char* name, const char* help) {
    cmds[i].app = app.add_subcommand(name, help);
    cmds[i].app->add_option("--config", cmds[i].layered.config_path, "JSON config file (flags override it)");
    return &cmds[i];
  };

  Command* synth = make(0, "synth", "Render a synthetic mixed-focal dataset");
  bind<std::vector<double>>(synth->app, &synth->layered, "--focals", "focals", "Focal lengths in pixels, comma separated", ",");
  bind<int>(synth->app, &synth->layered, "--per-focal", "per_focal", "Scenes per focal length");
  bind<std::uint64_t>(synth->app, &synth->layered, "--seed", "seed", "Scene seed");
  bind<std::string>(synth->app, &synth->layered, "--out", "out", "Output directory");
  bind<int>(synth->app, &synth->layered, "--width", "width", "Frame width");
  bind<int>(synth->app, &synth->layered, "--height", "height", "Frame height");
  bind<int>(synth->app, &synth->layered, "--channels", "channels", "1 (gray) or 3 (RGB)");
  bind<std::string>(synth->app, &synth->layered, "--split", "split", "Split name; separates scene streams");
  bind<int>(synth->app, &synth->layered, "--threads", "threads", "Worker threads (capped by METRICCAM_THREADS)");

  Command* train = make(1, "train", "Train one variant on a dataset manifest");
  bind<std::string>(train->app, &train->layered, "--manifest", "manifest", "Training manifest.json");
  bind<std::string>(train->app, &train->layered, "--out", "out", "Output directory");
  bind<std::string>(train->app, &train->layered, "--eval-manifest", "eval_manifest", "Held-out manifest to evaluate after training");
  add_train_flags(train);

  Command* ablate = make(2, "ablate", "Train and evaluate several variants with one config");
  bind<std::string>(ablate->app, &ablate->layered, "--train-manifest", "train_manifest", "Training manifest (default: synthesize)");
  bind<std::string>(ablate->app, &ablate->layered, "--test-manifest", "test_manifest", "Held-out manifest (default: synthesize)");
  bind<std::vector<std::string>>(ablate->app, &ablate->layered, "--variants", "variants", "Variants, comma separated", ",");
  bind<std::string>(ablate->app, &ablate->layered, "--out", "out", "Output directory");
  bind<std::vector<double>>(ablate->app, &ablate->layered, "--train-focals", "train_focals", "Synthesized training focals", ",");
  bind<std::vector<double>>(ablate->app, &ablate->layered, "--test-focals", "test_focals", "Synthesized held-out focals", ",");
  bind<int>(ablate->app, &ablate->layered, "--train-per-focal", "train_per_focal", "Synthesized training scenes per focal");
  bind<int>(ablate->app, &ablate->layered, "--test-per-focal", "test_per_focal", "Synthesized held-out scenes per focal");
  add_train_flags(ablate);

  Command* eval = make(3, "eval-depth", "Depth metrics for a prediction, or a checkpoint on a manifest");
  bind<std::string>(eval->app, &eval->layered, "--pred", "pred", "Predicted depth PFM");
  bind<std::string>(eval->app, &eval->layered, "--gt", "gt", "Ground-truth depth PFM");
  auto align = std::make_shared<bool>(false);
  CLI::Option* align_opt = eval->app->add_flag("--align", *align, "Least-squares scale and shift before scoring");
  eval->layered.collectors.push_back([layered = &eval->layered, align_opt, align]() {
    if (align_opt->count() > 0) layered->flags["align"] = *align;
  });
  bind<std::string>(eval->app, &eval->layered, "--checkpoint", "checkpoint", "Trained checkpoint");
  bind<std::string>(eval->app, &eval->layered, "--manifest", "manifest", "Manifest to evaluate the checkpoint on");

  Command* recon = make(4, "reconstruct", "Fuse depths into a point cloud and score it");
  bind<std::string>(recon->app, &recon->layered, "--manifest", "manifest", "Frames with intrinsics and poses");
  bind<std::string>(recon->app, &recon->layered, "--checkpoint", "checkpoint", "Use predicted depth from this checkpoint");
  bind<std::string>(recon->app, &recon->layered, "--out", "out", "Output PLY");
  bind<double>(recon->app, &recon->layered, "--voxel", "voxel", "Voxel size in meters (0: off)");
  bind<std::string>(recon->app, &recon->layered, "--reference", "reference", "Reference PLY for Chamfer and F-score");
  bind<double>(recon->app, &recon->layered, "--tau", "tau", "F-score threshold in meters");
  bind<int>(recon->app, &recon->layered, "--max-iters", "max_iters", "ICP iteration cap");
  bind<double>(recon->app, &recon->layered, "--trim", "trim", "ICP trimming fraction");
  auto no_icp = std::make_shared<bool>(false);
  CLI::Option* no_icp_opt = recon->app->add_flag("--no-icp", *no_icp, "Score without ICP alignment");
  recon->layered.collectors.push_back([layered = &recon->layered, no_icp_opt]() {
    if (no_icp_opt->count() > 0) layered->flags["icp"] = false;
  });

  Command* measure = make(5, "measure", "Distances between pixel pairs of a depth map");
  bind<std::string>(measure->app, &measure->layered, "--depth", "depth", "Depth PFM");
  bind<std::string>(measure->app, &measure->layered, "--intrinsics", "intrinsics", "Intrinsics JSON file");
  auto pairs = std::make_shared<std::vector<std::vector<int>>>();
  CLI::Option* pair_opt = measure->app->add_option("--pair", *pairs, "ua,va,ub,vb (repeatable)")->delimiter(',')->expected(4)->allow_extra_args(false);
  measure->layered.collectors.push_back([layered = &measure->layered, pair_opt, pairs]() {
    if (pair_opt->count() > 0) layered->flags["pairs"] = *pairs;
  });

  Command* grad = make(6, "gradcheck", "Finite-difference checks of every loss and layer");
  bind<std::vector<std::uint64_t>>(grad->app, &grad->layered, "--seeds", "seeds", "Seeds, comma separated", ",");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  for (auto& c : cmds) {
    if (!c.app->parsed()) continue;
    Json cfg;
    try {
      cfg = c.layered.resolve();
    } catch (const ConfigUnreadable& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitIo;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return kExitConfig;
    }
    const std::string text = cfg.dump();
    char* result = nullptr;
    mc_status s = MC_ERR_INTERNAL;
    const std::string name = c.app->get_name();
    if (name == "synth") s = mc_run_synth(text.c_str(), &result);
    else if (name == "train") s = mc_run_train(text.c_str(), progress_printer, &c.log_every, &result);
    else if (name == "ablate") s = mc_run_ablate(text.c_str(), progress_printer, &c.log_every, &result);
    else if (name == "eval-depth") s = mc_run_eval_depth(text.c_str(), &result);
    else if (name == "reconstruct") s = mc_run_reconstruct(text.c_str(), &result);
    else if (name == "measure") s = mc_run_measure(text.c_str(), &result);
    else if (name == "gradcheck") s = mc_run_gradcheck(text.c_str(), &result);
    if (s != MC_OK) {
      std::fprintf(stderr, "error (%s): %s\n", mc_status_name(s), mc_last_error());
      if (s == MC_ERR_PARSE || s == MC_ERR_INVALID_ARGUMENT) std::cerr << c.app->help();
      return exit_code_for(s);
    }
    std::printf("%s\n", result);
    int code = kExitOk;
    if (name == "gradcheck" && !Json::parse(result).value("passed", false)) code = kExitFailure;
    mc_string_free(result);
    return code;
  }
  return kExitConfig;
}
