// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "metriccam/metriccam.h"

#include <cstring>
#include <new>
#include <string>

#include "camera.hpp"
#include "commands.hpp"
#include "error.hpp"
#include "evalmetrics.hpp"
#include "io.hpp"
#include "model.hpp"
#include "recon.hpp"

struct mc_depth {
  metriccam::DepthMap map;
};
struct mc_cloud {
  metriccam::PointCloud cloud;
};
struct mc_net {
  metriccam::TinyDepthNet net;
  nlohmann::json header;
};

namespace {

thread_local std::string g_last_error;

mc_status from_code(metriccam::ErrorCode c) {
  using metriccam::ErrorCode;
  switch (c) {
    case ErrorCode::kOk: return MC_OK;
    case ErrorCode::kDomain: return MC_ERR_DOMAIN;
    case ErrorCode::kDegenerate: return MC_ERR_DEGENERATE;
    case ErrorCode::kIo: return MC_ERR_IO;
    case ErrorCode::kParse: return MC_ERR_PARSE;
    case ErrorCode::kState: return MC_ERR_STATE;
    case ErrorCode::kSingular: return MC_ERR_SINGULAR;
    case ErrorCode::kDiverged: return MC_ERR_DIVERGED;
    case ErrorCode::kInvalidArgument: return MC_ERR_INVALID_ARGUMENT;
  }
  return MC_ERR_INTERNAL;
}

mc_status fail(mc_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Runs `fn`, mapping exceptions to status codes.
template <typename F>
mc_status guard(F&& fn) {
  try {
    fn();
    return MC_OK;
  } catch (const metriccam::DivergenceError& e) {
    return fail(MC_ERR_DIVERGED, e.what());
  } catch (const metriccam::Error& e) {
    return fail(from_code(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(MC_ERR_PARSE, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MC_ERR_INTERNAL, "unknown error");
  }
}

#define MC_REQUIRE(cond, what) \
  if (!(cond)) return fail(MC_ERR_INVALID_ARGUMENT, what)

metriccam::CameraIntrinsics to_cpp(const mc_intrinsics& k) {
  metriccam::CameraIntrinsics c{k.fx, k.fy, k.u0, k.v0, k.width, k.height};
  c.validate();
  return c;
}

mc_intrinsics to_c(const metriccam::CameraIntrinsics& k) {
  return {k.fx, k.fy, k.u0, k.v0, k.width, k.height};
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

using CommandFn = metriccam::cmd::Json (*)(const metriccam::cmd::Json&);

mc_status run_command(CommandFn fn, const char* config_json, char** result_json) {
  MC_REQUIRE(config_json && result_json, "null argument");
  *result_json = nullptr;
  return guard([&] {
    metriccam::cmd::Json cfg;
    try {
      cfg = metriccam::cmd::Json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw metriccam::ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    *result_json = dup_string(fn(cfg).dump(2));
  });
}

metriccam::cmd::Progress wrap_progress(mc_progress_fn progress, void* user) {
  if (!progress) return {};
  return [progress, user](const std::string& v, long iter, double total) {
    progress(v.c_str(), iter, total, user);
  };
}

}  // namespace

extern "C" {

const char* mc_version(void) { return metriccam::cmd::kVersion; }

const char* mc_last_error(void) { return g_last_error.c_str(); }

const char* mc_status_name(mc_status status) {
  switch (status) {
    case MC_OK: return "ok";
    case MC_ERR_DOMAIN: return "domain";
    case MC_ERR_DEGENERATE: return "degenerate";
    case MC_ERR_IO: return "io";
    case MC_ERR_PARSE: return "parse";
    case MC_ERR_STATE: return "state";
    case MC_ERR_SINGULAR: return "singular";
    case MC_ERR_DIVERGED: return "diverged";
    case MC_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case MC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void mc_string_free(char* s) { std::free(s); }

mc_status mc_depth_create(int width, int height, const double* values, mc_depth** out) {
  MC_REQUIRE(out, "null output");
  MC_REQUIRE(width >= 1 && height >= 1, "depth size must be at least 1x1");
  return guard([&] {
    metriccam::Grid<double> g(width, height, 0.0);
    if (values) std::copy(values, values + g.size(), g.data());
    *out = new mc_depth{metriccam::DepthMap::from_values(std::move(g))};
  });
}

mc_status mc_depth_read_pfm(const char* path, mc_depth** out) {
  MC_REQUIRE(path && out, "null argument");
  return guard([&] { *out = new mc_depth{metriccam::io::read_pfm_depth(path)}; });
}

mc_status mc_depth_write_pfm(const mc_depth* depth, const char* path) {
  MC_REQUIRE(depth && path, "null argument");
  return guard([&] { metriccam::io::write_pfm(path, depth->map); });
}

int mc_depth_width(const mc_depth* depth) { return depth ? depth->map.width() : 0; }
int mc_depth_height(const mc_depth* depth) { return depth ? depth->map.height() : 0; }

mc_status mc_depth_values(const mc_depth* depth, double* values) {
  MC_REQUIRE(depth && values, "null argument");
  std::copy(depth->map.values.data(), depth->map.values.data() + depth->map.values.size(), values);
  return MC_OK;
}

void mc_depth_free(mc_depth* depth) { delete depth; }

mc_status mc_pixel_focal(double focal_um, double pixel_size_um, double* out) {
  MC_REQUIRE(out, "null output");
  return guard([&] { *out = metriccam::pixel_focal({focal_um, pixel_size_um}); });
}

mc_status mc_cstm_label_forward(const mc_depth* depth, const mc_intrinsics* k, double canonical_focal,
                                mc_depth** depth_c, mc_intrinsics* k_c, double* omega) {
  MC_REQUIRE(depth && k && depth_c, "null argument");
  return guard([&] {
    auto r = metriccam::cstm_label_forward(depth->map, to_cpp(*k), canonical_focal);
    if (k_c) *k_c = to_c(r.intrinsics);
    if (omega) *omega = r.omega;
    *depth_c = new mc_depth{std::move(r.depth)};
  });
}

mc_status mc_cstm_label_inverse(const mc_depth* depth_c, double omega, mc_depth** out) {
  MC_REQUIRE(depth_c && out, "null argument");
  return guard([&] { *out = new mc_depth{metriccam::cstm_label_inverse(depth_c->map, omega)}; });
}

mc_status mc_cstm_image_inverse(const mc_depth* depth_c, double omega, int width, int height,
                                mc_depth** out) {
  MC_REQUIRE(depth_c && out, "null argument");
  return guard([&] {
    *out = new mc_depth{metriccam::cstm_image_inverse(depth_c->map, omega, width, height)};
  });
}

mc_status mc_depth_metrics(const mc_depth* pred, const mc_depth* gt, mc_metrics* out) {
  MC_REQUIRE(pred && gt && out, "null argument");
  return guard([&] {
    const auto m = metriccam::depth_metrics(pred->map, gt->map);
    *out = {m.absrel, m.rms, m.rms_log, m.log10, m.delta1, m.delta2, m.delta3, m.valid_pixels};
  });
}

mc_status mc_align_scale_shift(const mc_depth* pred, const mc_depth* gt, double* scale, double* shift,
                               mc_depth** aligned) {
  MC_REQUIRE(pred && gt && scale && shift, "null argument");
  return guard([&] {
    auto r = metriccam::align_scale_shift(pred->map, gt->map);
    *scale = r.scale;
    *shift = r.shift;
    if (aligned) *aligned = new mc_depth{std::move(r.aligned)};
  });
}

mc_status mc_measure(const mc_depth* depth, const mc_intrinsics* k, int ua, int va, int ub, int vb,
                     double* meters) {
  MC_REQUIRE(depth && k && meters, "null argument");
  return guard([&] { *meters = metriccam::measure(depth->map, to_cpp(*k), ua, va, ub, vb); });
}

mc_status mc_cloud_create(const double* xyz, size_t count, mc_cloud** out) {
  MC_REQUIRE(out && (xyz || count == 0), "null argument");
  return guard([&] {
    metriccam::PointCloud c;
    c.points.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      const metriccam::Vec3 p(xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]);
      if (!p.allFinite()) throw metriccam::DomainError("cloud: non-finite coordinate");
      c.points.push_back(p);
    }
    *out = new mc_cloud{std::move(c)};
  });
}

mc_status mc_cloud_read_ply(const char* path, mc_cloud** out) {
  MC_REQUIRE(path && out, "null argument");
  return guard([&] { *out = new mc_cloud{metriccam::io::read_ply(path)}; });
}

mc_status mc_cloud_write_ply(const mc_cloud* cloud, const char* path) {
  MC_REQUIRE(cloud && path, "null argument");
  return guard([&] { metriccam::io::write_ply(path, cloud->cloud); });
}

size_t mc_cloud_size(const mc_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

mc_status mc_cloud_points(const mc_cloud* cloud, double* xyz) {
  MC_REQUIRE(cloud && xyz, "null argument");
  for (size_t i = 0; i < cloud->cloud.size(); ++i)
    for (int a = 0; a < 3; ++a) xyz[3 * i + a] = cloud->cloud.points[i](a);
  return MC_OK;
}

void mc_cloud_free(mc_cloud* cloud) { delete cloud; }

mc_status mc_unproject(const mc_depth* depth, const mc_intrinsics* k, mc_cloud** out) {
  MC_REQUIRE(depth && k && out, "null argument");
  return guard([&] { *out = new mc_cloud{metriccam::unproject(depth->map, to_cpp(*k))}; });
}

mc_status mc_chamfer_l1(const mc_cloud* a, const mc_cloud* b, double* out) {
  MC_REQUIRE(a && b && out, "null argument");
  return guard([&] { *out = metriccam::chamfer_l1(a->cloud, b->cloud); });
}

mc_status mc_fscore(const mc_cloud* a, const mc_cloud* b, double tau, double* precision, double* recall,
                    double* fscore) {
  MC_REQUIRE(a && b && fscore, "null argument");
  return guard([&] {
    const auto f = metriccam::fscore(a->cloud, b->cloud, tau);
    if (precision) *precision = f.precision;
    if (recall) *recall = f.recall;
    *fscore = f.fscore;
  });
}

mc_status mc_icp(const mc_cloud* a, const mc_cloud* b, int max_iters, double tol, double rotation[9],
                 double translation[3], double* rms) {
  MC_REQUIRE(a && b && rotation && translation, "null argument");
  return guard([&] {
    metriccam::IcpOptions o;
    o.max_iters = max_iters;
    o.tol = tol;
    const auto r = metriccam::icp(a->cloud, b->cloud, o);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) rotation[3 * i + j] = r.transform.rotation(i, j);
      translation[i] = r.transform.translation(i);
    }
    if (rms) *rms = r.rms;
  });
}

mc_status mc_net_load(const char* checkpoint_path, mc_net** out) {
  MC_REQUIRE(checkpoint_path && out, "null argument");
  return guard([&] {
    auto ck = metriccam::load_checkpoint(checkpoint_path);
    *out = new mc_net{std::move(ck.net), std::move(ck.header)};
  });
}

int mc_net_in_channels(const mc_net* net) { return net ? net->net.in_channels() : 0; }
size_t mc_net_num_parameters(const mc_net* net) { return net ? net->net.num_parameters() : 0; }
void mc_net_free(mc_net* net) { delete net; }

mc_status mc_run_synth(const char* config_json, char** result_json) {
  return run_command(&metriccam::cmd::synth, config_json, result_json);
}

mc_status mc_run_train(const char* config_json, mc_progress_fn progress, void* user, char** result_json) {
  MC_REQUIRE(config_json && result_json, "null argument");
  *result_json = nullptr;
  return guard([&] {
    metriccam::cmd::Json cfg;
    try {
      cfg = metriccam::cmd::Json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw metriccam::ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    *result_json = dup_string(metriccam::cmd::train(cfg, wrap_progress(progress, user)).dump(2));
  });
}

mc_status mc_run_ablate(const char* config_json, mc_progress_fn progress, void* user, char** result_json) {
  MC_REQUIRE(config_json && result_json, "null argument");
  *result_json = nullptr;
  return guard([&] {
    metriccam::cmd::Json cfg;
    try {
      cfg = metriccam::cmd::Json::parse(config_json);
    } catch (const nlohmann::json::exception& e) {
      throw metriccam::ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    *result_json = dup_string(metriccam::cmd::ablate(cfg, wrap_progress(progress, user)).dump(2));
  });
}

mc_status mc_run_eval_depth(const char* config_json, char** result_json) {
  return run_command(&metriccam::cmd::eval_depth, config_json, result_json);
}

mc_status mc_run_reconstruct(const char* config_json, char** result_json) {
  return run_command(&metriccam::cmd::reconstruct, config_json, result_json);
}

mc_status mc_run_measure(const char* config_json, char** result_json) {
  return run_command(&metriccam::cmd::measure, config_json, result_json);
}

mc_status mc_run_gradcheck(const char* config_json, char** result_json) {
  return run_command(&metriccam::cmd::gradcheck, config_json, result_json);
}

}  // extern "C"
