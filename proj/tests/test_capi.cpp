// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

// Exercises the shared library through its C header only.

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "metriccam/metriccam.h"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Owns a string returned by the library.
struct Result {
  char* s = nullptr;
  ~Result() { mc_string_free(s); }
  json parse() const { return json::parse(s); }
};

struct Depth {
  mc_depth* d = nullptr;
  ~Depth() { mc_depth_free(d); }
};

struct Cloud {
  mc_cloud* c = nullptr;
  ~Cloud() { mc_cloud_free(c); }
};

class CApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("metriccam_capi_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

mc_intrinsics make_k(double f, int w, int h) { return {f, f, 0.5 * (w - 1), 0.5 * (h - 1), w, h}; }

TEST(CApi, VersionAndStatusNames) {
  EXPECT_STREQ(mc_version(), "0.1.0");
  EXPECT_STREQ(mc_status_name(MC_OK), "ok");
  EXPECT_STRNE(mc_status_name(MC_ERR_IO), mc_status_name(MC_ERR_PARSE));
}

TEST(CApi, DepthCreateMarksInvalidPixels) {
  const double v[6] = {1.0, 0.0, -2.0, NAN, 3.0, 4.5};
  Depth d;
  ASSERT_EQ(mc_depth_create(3, 2, v, &d.d), MC_OK);
  EXPECT_EQ(mc_depth_width(d.d), 3);
  EXPECT_EQ(mc_depth_height(d.d), 2);
  double out[6];
  ASSERT_EQ(mc_depth_values(d.d, out), MC_OK);
  const double expect[6] = {1.0, 0.0, 0.0, 0.0, 3.0, 4.5};
  for (int i = 0; i < 6; ++i) EXPECT_EQ(out[i], expect[i]);
  mc_depth* bad = nullptr;
  EXPECT_EQ(mc_depth_create(0, 2, v, &bad), MC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(bad, nullptr);
}

TEST(CApi, NullArgumentsAreRejected) {
  EXPECT_EQ(mc_depth_create(2, 2, nullptr, nullptr), MC_ERR_INVALID_ARGUMENT);
  EXPECT_NE(std::strlen(mc_last_error()), 0u);
  EXPECT_EQ(mc_depth_metrics(nullptr, nullptr, nullptr), MC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(mc_run_synth(nullptr, nullptr), MC_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(mc_depth_width(nullptr), 0);
  mc_depth_free(nullptr);
  mc_cloud_free(nullptr);
  mc_net_free(nullptr);
  mc_string_free(nullptr);
}

TEST(CApi, PixelFocal) {
  double f = 0.0;
  ASSERT_EQ(mc_pixel_focal(4000.0, 8.0, &f), MC_OK);
  EXPECT_DOUBLE_EQ(f, 500.0);
  EXPECT_EQ(mc_pixel_focal(-1.0, 8.0, &f), MC_ERR_DOMAIN);
  EXPECT_NE(std::string(mc_last_error()).find("focal"), std::string::npos);
}

TEST(CApi, LabelTransformRoundTrip) {
  std::vector<double> v(640 * 480, 5.0);
  Depth d, dc, back;
  ASSERT_EQ(mc_depth_create(640, 480, v.data(), &d.d), MC_OK);
  const mc_intrinsics k{500, 500, 320, 240, 640, 480};
  mc_intrinsics kc{};
  double omega = 0.0;
  ASSERT_EQ(mc_cstm_label_forward(d.d, &k, 1000.0, &dc.d, &kc, &omega), MC_OK);
  EXPECT_DOUBLE_EQ(omega, 2.0);
  EXPECT_DOUBLE_EQ(kc.fx, 1000.0);
  EXPECT_DOUBLE_EQ(kc.u0, 320.0);
  double px[1];
  std::vector<double> all(640 * 480);
  ASSERT_EQ(mc_depth_values(dc.d, all.data()), MC_OK);
  px[0] = all[1234];
  EXPECT_DOUBLE_EQ(px[0], 10.0);
  ASSERT_EQ(mc_cstm_label_inverse(dc.d, omega, &back.d), MC_OK);
  ASSERT_EQ(mc_depth_values(back.d, all.data()), MC_OK);
  EXPECT_DOUBLE_EQ(all[99], 5.0);

  Depth small;
  ASSERT_EQ(mc_cstm_image_inverse(d.d, 2.0, 320, 240, &small.d), MC_OK);
  EXPECT_EQ(mc_depth_width(small.d), 320);
}

TEST(CApi, MetricsAndAlignment) {
  std::vector<double> gt(64), pred(64), scaled(64);
  for (int i = 0; i < 64; ++i) {
    gt[i] = 1.0 + 0.1 * i;
    scaled[i] = 1.1 * gt[i];
    pred[i] = (gt[i] - 0.5) / 2.0;
  }
  Depth g, p, s, aligned;
  ASSERT_EQ(mc_depth_create(8, 8, gt.data(), &g.d), MC_OK);
  ASSERT_EQ(mc_depth_create(8, 8, scaled.data(), &s.d), MC_OK);
  ASSERT_EQ(mc_depth_create(8, 8, pred.data(), &p.d), MC_OK);
  mc_metrics m{};
  ASSERT_EQ(mc_depth_metrics(s.d, g.d, &m), MC_OK);
  EXPECT_NEAR(m.absrel, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(m.delta1, 1.0);
  EXPECT_EQ(m.valid_pixels, 64u);

  double a = 0, b = 0;
  ASSERT_EQ(mc_align_scale_shift(p.d, g.d, &a, &b, &aligned.d), MC_OK);
  EXPECT_NEAR(a, 2.0, 1e-9);
  EXPECT_NEAR(b, 0.5, 1e-9);
  ASSERT_EQ(mc_depth_metrics(aligned.d, g.d, &m), MC_OK);
  EXPECT_NEAR(m.absrel, 0.0, 1e-12);

  Depth empty;
  ASSERT_EQ(mc_depth_create(8, 8, nullptr, &empty.d), MC_OK);
  EXPECT_EQ(mc_depth_metrics(empty.d, g.d, &m), MC_ERR_DEGENERATE);
}

TEST(CApi, MeasureFrontoPlane) {
  std::vector<double> v(100 * 80, 4.0);
  Depth d;
  ASSERT_EQ(mc_depth_create(100, 80, v.data(), &d.d), MC_OK);
  const mc_intrinsics k = make_k(200.0, 100, 80);
  double m = 0.0;
  ASSERT_EQ(mc_measure(d.d, &k, 10, 40, 60, 40, &m), MC_OK);
  EXPECT_NEAR(m, 50.0 * 4.0 / 200.0, 1e-12);
  EXPECT_EQ(mc_measure(d.d, &k, -1, 40, 60, 40, &m), MC_ERR_DOMAIN);
}

TEST(CApi, CloudsChamferFscoreIcp) {
  std::vector<double> a;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      for (int l = 0; l < 3; ++l) {
        a.push_back(0.2 * i);
        a.push_back(0.3 * j + 0.05 * i * i);
        a.push_back(0.25 * l + 0.02 * j * j);
      }
  std::vector<double> b = a;
  for (std::size_t i = 0; i < b.size(); i += 3) {
    b[i] += 0.05;
    b[i + 1] -= 0.02;
  }
  Cloud ca, cb;
  ASSERT_EQ(mc_cloud_create(a.data(), a.size() / 3, &ca.c), MC_OK);
  ASSERT_EQ(mc_cloud_create(b.data(), b.size() / 3, &cb.c), MC_OK);
  EXPECT_EQ(mc_cloud_size(ca.c), 108u);

  double ch = -1;
  ASSERT_EQ(mc_chamfer_l1(ca.c, ca.c, &ch), MC_OK);
  EXPECT_EQ(ch, 0.0);
  double p, r, f;
  ASSERT_EQ(mc_fscore(ca.c, ca.c, 0.01, &p, &r, &f), MC_OK);
  EXPECT_EQ(f, 1.0);

  double rot[9], t[3], rms;
  ASSERT_EQ(mc_icp(ca.c, cb.c, 50, 1e-12, rot, t, &rms), MC_OK);
  EXPECT_NEAR(t[0], 0.05, 1e-6);
  EXPECT_NEAR(t[1], -0.02, 1e-6);
  EXPECT_NEAR(rot[0], 1.0, 1e-6);
  EXPECT_LT(rms, 1e-6);

  Cloud empty;
  EXPECT_EQ(mc_cloud_create(nullptr, 0, &empty.c), MC_OK);
  EXPECT_EQ(mc_chamfer_l1(ca.c, empty.c, &ch), MC_ERR_DOMAIN);
}

TEST_F(CApiTest, FileRoundTrips) {
  const double v[4] = {1.5, 0.0, 2.5, 3.5};
  Depth d, back;
  ASSERT_EQ(mc_depth_create(2, 2, v, &d.d), MC_OK);
  ASSERT_EQ(mc_depth_write_pfm(d.d, path("d.pfm").c_str()), MC_OK);
  ASSERT_EQ(mc_depth_read_pfm(path("d.pfm").c_str(), &back.d), MC_OK);
  double out[4];
  mc_depth_values(back.d, out);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(out[i], v[i]);

  const double xyz[6] = {0, 0, 1, 1, 2, 3};
  Cloud c, cback;
  ASSERT_EQ(mc_cloud_create(xyz, 2, &c.c), MC_OK);
  ASSERT_EQ(mc_cloud_write_ply(c.c, path("c.ply").c_str()), MC_OK);
  ASSERT_EQ(mc_cloud_read_ply(path("c.ply").c_str(), &cback.c), MC_OK);
  double pts[6];
  mc_cloud_points(cback.c, pts);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(pts[i], xyz[i]);

  Depth missing;
  EXPECT_EQ(mc_depth_read_pfm(path("nope.pfm").c_str(), &missing.d), MC_ERR_IO);
  mc_net* net = nullptr;
  EXPECT_EQ(mc_net_load(path("nope.mcc").c_str(), &net), MC_ERR_IO);
}

TEST_F(CApiTest, UnprojectFrontoPlane) {
  std::vector<double> v(4 * 3, 2.0);
  v[5] = 0.0;
  Depth d;
  ASSERT_EQ(mc_depth_create(4, 3, v.data(), &d.d), MC_OK);
  const mc_intrinsics k = make_k(2.0, 4, 3);
  Cloud c;
  ASSERT_EQ(mc_unproject(d.d, &k, &c.c), MC_OK);
  ASSERT_EQ(mc_cloud_size(c.c), 11u);
  std::vector<double> pts(33);
  mc_cloud_points(c.c, pts.data());
  EXPECT_DOUBLE_EQ(pts[0], (0 - 1.5) * 2.0 / 2.0);
  EXPECT_DOUBLE_EQ(pts[2], 2.0);
}

int progress_calls = 0;
void count_progress(const char*, long, double total, void* user) {
  ++progress_calls;
  EXPECT_TRUE(std::isfinite(total));
  *static_cast<int*>(user) += 1;
}

TEST_F(CApiTest, SynthTrainLoadPipeline) {
  const std::string data = path("data");
  Result synth;
  const json scfg = {{"out", data}, {"focals", {500, 1000}}, {"per_focal", 3}, {"seed", 0}};
  ASSERT_EQ(mc_run_synth(scfg.dump().c_str(), &synth.s), MC_OK) << mc_last_error();
  const json sj = synth.parse();
  EXPECT_EQ(sj.at("frames"), 6);
  EXPECT_EQ(sj.at("command"), "synth");
  EXPECT_TRUE(fs::exists(sj.at("manifest").get<std::string>()));

  int calls = 0;
  progress_calls = 0;
  Result tr;
  const json tcfg = {{"manifest", sj.at("manifest")}, {"out", path("run")}, {"iters", 3}, {"batch_size", 2},
                     {"variant", "camconvs"}};
  ASSERT_EQ(mc_run_train(tcfg.dump().c_str(), count_progress, &calls, &tr.s), MC_OK) << mc_last_error();
  EXPECT_EQ(calls, 3);
  const json tj = tr.parse();
  EXPECT_EQ(tj.at("input_channels"), 5);

  mc_net* net = nullptr;
  ASSERT_EQ(mc_net_load(tj.at("checkpoint").get<std::string>().c_str(), &net), MC_OK);
  EXPECT_EQ(mc_net_in_channels(net), 5);
  EXPECT_EQ(mc_net_num_parameters(net), tj.at("num_parameters").get<std::size_t>());
  mc_net_free(net);

  Result ev;
  const json ecfg = {{"checkpoint", tj.at("checkpoint")}, {"manifest", sj.at("manifest")}};
  ASSERT_EQ(mc_run_eval_depth(ecfg.dump().c_str(), &ev.s), MC_OK) << mc_last_error();
  EXPECT_EQ(ev.parse().at("variant"), "camconvs");
}

TEST_F(CApiTest, CommandConfigErrors) {
  Result r;
  EXPECT_EQ(mc_run_synth("{not json", &r.s), MC_ERR_PARSE);
  EXPECT_EQ(r.s, nullptr);
  EXPECT_EQ(mc_run_synth(R"({"out": "x", "bogus": 1})", &r.s), MC_ERR_PARSE);
  EXPECT_NE(std::string(mc_last_error()).find("bogus"), std::string::npos);
  EXPECT_EQ(mc_run_synth(R"({"focals": [500]})", &r.s), MC_ERR_PARSE);
  const json neg = {{"out", path("neg")}, {"focals", {-5}}};
  EXPECT_EQ(mc_run_synth(neg.dump().c_str(), &r.s), MC_ERR_DOMAIN);
  const json none = {{"manifest", path("missing.json")}, {"out", path("o")}};
  EXPECT_EQ(mc_run_train(none.dump().c_str(), nullptr, nullptr, &r.s), MC_ERR_IO);
}

TEST(CApi, GradcheckPasses) {
  Result r;
  ASSERT_EQ(mc_run_gradcheck(R"({"seeds": [0]})", &r.s), MC_OK) << mc_last_error();
  const json j = r.parse();
  EXPECT_TRUE(j.at("passed").get<bool>());
  EXPECT_FALSE(j.at("cases").empty());
}

}  // namespace
