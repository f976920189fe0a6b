// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "losses.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "error.hpp"

namespace metriccam {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_pair(const DepthMap& pred, const DepthMap& gt, const char* what) {
  if (!pred.values.same_shape(gt.values))
    throw DomainError(std::string(what) + ": pred and gt shapes differ");
}

bool joint(const DepthMap& pred, const DepthMap& gt, std::size_t i) {
  return pred.valid(i) && gt.valid(i);
}

double sgn(double x) { return (x > 0.0) - (x < 0.0); }

Vec3 ray(const CameraIntrinsics& k, std::size_t idx, int width) {
  const int u = static_cast<int>(idx % width);
  const int v = static_cast<int>(idx / width);
  return Vec3((u - k.u0) / k.fx, (v - k.v0) / k.fy, 1.0);
}

LossResult zero_result(int w, int h) {
  LossResult r;
  r.grad = Grid<double>(w, h, 0.0);
  return r;
}

}  // namespace

LossResult silog(const DepthMap& pred, const DepthMap& gt, double lambda) {
  check_pair(pred, gt, "silog");
  if (lambda < 0.0 || lambda > 1.0) throw DomainError("silog: lambda outside [0,1]");
  LossResult r = zero_result(pred.width(), pred.height());
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    if (joint(pred, gt, i)) idx.push_back(i);
  if (idx.size() < 2) throw DegenerateInputError("silog: fewer than 2 valid pixels");
  const double n = static_cast<double>(idx.size());
  double s1 = 0.0, s2 = 0.0;
  std::vector<double> e(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) {
    e[j] = std::log(pred.values[idx[j]]) - std::log(gt.values[idx[j]]);
    s1 += e[j];
    s2 += e[j] * e[j];
  }
  const double var = s2 / n - lambda * s1 * s1 / (n * n);
  if (!(var > 0.0)) return r;
  r.value = std::sqrt(var);
  const double c = 0.5 / r.value;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const double dv = 2.0 * e[j] / n - 2.0 * lambda * s1 / (n * n);
    r.grad[idx[j]] = c * dv / pred.values[idx[j]];
  }
  return r;
}

double lower_median(std::vector<double> v) {
  if (v.empty()) throw DegenerateInputError("median of empty sample");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

std::vector<PixelRect> sample_patches(int width, int height, int count, Rng& rng) {
  if (width < 1 || height < 1) throw DomainError("sample_patches: empty image");
  if (count < 1) throw DomainError("sample_patches: count must be >= 1");
  std::vector<PixelRect> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    PixelRect r;
    r.w = std::clamp(round_half_up(rng.uniform(kRpnlMinSide, kRpnlMaxSide) * width), 1, width);
    r.h = std::clamp(round_half_up(rng.uniform(kRpnlMinSide, kRpnlMaxSide) * height), 1, height);
    r.x0 = rng.uniform_int(0, width - r.w);
    r.y0 = rng.uniform_int(0, height - r.h);
    out.push_back(r);
  }
  return out;
}

namespace {

// Median element of `vals` by position, ties broken by position so the choice
// is deterministic.
std::size_t median_index(const std::vector<double>& vals) {
  std::vector<std::size_t> order(vals.size());
  std::iota(order.begin(), order.end(), 0);
  const auto mid = order.begin() + static_cast<std::ptrdiff_t>((order.size() - 1) / 2);
  std::nth_element(order.begin(), mid, order.end(), [&](std::size_t a, std::size_t b) {
    return vals[a] < vals[b] || (vals[a] == vals[b] && a < b);
  });
  return *mid;
}

struct Normalized {
  std::vector<double> n;
  std::size_t med = 0;
  double m = 0.0;
  double s = 0.0;
};

Normalized normalize(const std::vector<double>& d) {
  Normalized out;
  out.med = median_index(d);
  out.m = d[out.med];
  double dev = 0.0;
  for (double x : d) dev += std::abs(x - out.m);
  out.s = dev / static_cast<double>(d.size()) + kRpnlEps;
  out.n.resize(d.size());
  for (std::size_t j = 0; j < d.size(); ++j) out.n[j] = (d[j] - out.m) / out.s;
  return out;
}

}  // namespace

LossResult rpnl_patches(const DepthMap& pred, const DepthMap& gt,
                        const std::vector<PixelRect>& patches, bool warn_degenerate) {
  check_pair(pred, gt, "rpnl");
  LossResult r = zero_result(pred.width(), pred.height());
  std::size_t used = 0;
  std::vector<std::size_t> idx;
  std::vector<double> p, g, r_j, grad_local;
  for (const auto& rect : patches) {
    if (rect.w < 1 || rect.h < 1 || rect.x0 < 0 || rect.y0 < 0 || rect.x0 + rect.w > pred.width() ||
        rect.y0 + rect.h > pred.height())
      throw DomainError("rpnl: patch outside the image");
    idx.clear();
    p.clear();
    g.clear();
    for (int y = rect.y0; y < rect.y0 + rect.h; ++y) {
      for (int x = rect.x0; x < rect.x0 + rect.w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * pred.width() + x;
        if (!joint(pred, gt, i)) continue;
        idx.push_back(i);
        p.push_back(pred.values[i]);
        g.push_back(gt.values[i]);
      }
    }
    if (idx.empty()) continue;
    ++used;
    const Normalized np = normalize(p);
    const Normalized ng = normalize(g);
    const double n = static_cast<double>(idx.size());
    double patch_loss = 0.0;
    r_j.assign(idx.size(), 0.0);
    double sum_r = 0.0, sum_rd = 0.0, sum_sign = 0.0;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      patch_loss += std::abs(ng.n[j] - np.n[j]);
      r_j[j] = sgn(np.n[j] - ng.n[j]) / n;
      sum_r += r_j[j];
      sum_rd += r_j[j] * (p[j] - np.m);
      sum_sign += sgn(p[j] - np.m);
    }
    r.value += patch_loss / n;
    // Backprop through (p - m) / s, with m = p[med] and
    // s = mean |p - m| + eps.
    const double a = sum_rd / (np.s * np.s * n);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      double gj = r_j[j] / np.s - a * sgn(p[j] - np.m);
      if (j == np.med) gj += -sum_r / np.s + a * sum_sign;
      r.grad[idx[j]] += gj;
    }
  }
  if (used == 0) {
    r.degenerate = true;
    if (warn_degenerate) warn("rpnl: no patch contains valid pixels; loss is 0");
    return r;
  }
  const double inv = 1.0 / static_cast<double>(used);
  r.value *= inv;
  for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] *= inv;
  return r;
}

LossResult rpnl(const DepthMap& pred, const DepthMap& gt, int count, Rng& rng,
                bool warn_degenerate) {
  check_pair(pred, gt, "rpnl");
  return rpnl_patches(pred, gt, sample_patches(pred.width(), pred.height(), count, rng),
                      warn_degenerate);
}

std::vector<Triplet> sample_triplets(const DepthMap& pred, const DepthMap& gt, int count,
                                     Rng& rng) {
  check_pair(pred, gt, "vnl");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < pred.values.size(); ++i)
    if (joint(pred, gt, i)) valid.push_back(i);
  if (valid.size() < 3) throw DegenerateInputError("vnl: fewer than 3 valid pixels");
  std::vector<Triplet> out;
  out.reserve(count);
  for (int t = 0; t < count; ++t) {
    Triplet tr;
    for (auto& v : tr) v = valid[rng.below(valid.size())];
    out.push_back(tr);
  }
  return out;
}

double vnl_min_side(double median_depth, const CameraIntrinsics& k, int width, int height) {
  const double extent = std::hypot(static_cast<double>(width), static_cast<double>(height)) /
                        effective_focal(k);
  return kVnlMinSideRatio * median_depth * std::min(1.0, extent);
}

bool accept_triplet(const DepthMap& gt, const CameraIntrinsics& k, const Triplet& t,
                    double min_side) {
  const int w = gt.width();
  std::array<Vec3, 3> p;
  for (int i = 0; i < 3; ++i) p[i] = gt.values[t[i]] * ray(k, t[i], w);
  const double cos_max = std::cos(kVnlMinAngleDeg * kPi / 180.0);
  for (int i = 0; i < 3; ++i) {
    const Vec3 a = p[(i + 1) % 3] - p[i];
    const Vec3 b = p[(i + 2) % 3] - p[i];
    const double la = a.norm(), lb = b.norm();
    if (la < min_side || lb < min_side) return false;
    if (a.dot(b) / (la * lb) > cos_max) return false;
  }
  return true;
}

LossResult vnl_triplets(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
                        const std::vector<Triplet>& triplets) {
  check_pair(pred, gt, "vnl");
  const int w = pred.width();
  std::vector<double> gv;
  for (std::size_t i = 0; i < gt.values.size(); ++i)
    if (joint(pred, gt, i)) gv.push_back(gt.values[i]);
  if (gv.size() < 3) throw DegenerateInputError("vnl: fewer than 3 valid pixels");
  const double min_side = vnl_min_side(lower_median(gv), k, pred.width(), pred.height());

  LossResult r = zero_result(pred.width(), pred.height());
  std::size_t accepted = 0;
  for (const auto& t : triplets) {
    for (auto i : t)
      if (i >= pred.values.size() || !joint(pred, gt, i)) throw DomainError("vnl: triplet on invalid pixel");
    if (!accept_triplet(gt, k, t, min_side)) continue;
    std::array<Vec3, 3> rays, q, pg;
    for (int i = 0; i < 3; ++i) {
      rays[i] = ray(k, t[i], w);
      q[i] = pred.values[t[i]] * rays[i];
      pg[i] = gt.values[t[i]] * rays[i];
    }
    const Vec3 ng = (pg[1] - pg[0]).cross(pg[2] - pg[0]).normalized();
    const Vec3 a = q[1] - q[0];
    const Vec3 b = q[2] - q[0];
    const Vec3 c = a.cross(b);
    const double cn = c.norm();
    ++accepted;
    if (!(cn > 1e-300)) continue;
    const Vec3 np = c / cn;
    const Vec3 diff = np - ng;
    r.value += diff.cwiseAbs().sum();
    const Vec3 g_n(sgn(diff(0)), sgn(diff(1)), sgn(diff(2)));
    const Vec3 g_c = (g_n - np * np.dot(g_n)) / cn;
    const Vec3 g_a = b.cross(g_c);
    const Vec3 g_b = g_c.cross(a);
    r.grad[t[0]] += rays[0].dot(-g_a - g_b);
    r.grad[t[1]] += rays[1].dot(g_a);
    r.grad[t[2]] += rays[2].dot(g_b);
  }
  if (accepted == 0) throw DegenerateInputError("vnl: no triplet passed the side/angle thresholds");
  const double inv = 1.0 / static_cast<double>(accepted);
  r.value *= inv;
  for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] *= inv;
  return r;
}

LossResult vnl(const DepthMap& pred, const DepthMap& gt, const CameraIntrinsics& k,
               int n_triplets, Rng& rng) {
  if (n_triplets < 1) throw DomainError("vnl: n_triplets must be >= 1");
  return vnl_triplets(pred, gt, k, sample_triplets(pred, gt, n_triplets, rng));
}

namespace {

struct PlaneFit {
  Vec3 a;        // a . X = 1
  Mat3 g_inv;
  std::array<Vec3, 9> x;
  std::array<Vec3, 9> rays;
  std::array<std::size_t, 9> idx;
};

bool fit_plane(const DepthMap& depth, const CameraIntrinsics& k, int x, int y, PlaneFit* fit) {
  if (x < 1 || y < 1 || x + 1 >= depth.width() || y + 1 >= depth.height()) return false;
  Mat3 g = Mat3::Zero();
  Vec3 s = Vec3::Zero();
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const std::size_t i = static_cast<std::size_t>(y + dy) * depth.width() + (x + dx);
      if (!depth.valid(i)) return false;
      fit->idx[n] = i;
      fit->rays[n] = ray(k, i, depth.width());
      fit->x[n] = depth.values[i] * fit->rays[n];
      g += fit->x[n] * fit->x[n].transpose();
      s += fit->x[n];
      ++n;
    }
  }
  Eigen::FullPivLU<Mat3> lu(g);
  if (!lu.isInvertible()) return false;
  fit->g_inv = lu.inverse();
  fit->a = fit->g_inv * s;
  return fit->a.norm() > 0.0 && std::isfinite(fit->a.norm());
}

}  // namespace

bool fit_normal(const DepthMap& depth, const CameraIntrinsics& k, int x, int y, Vec3* normal) {
  PlaneFit fit;
  if (!fit_plane(depth, k, x, y, &fit)) return false;
  *normal = -fit.a.normalized();
  return true;
}

std::vector<std::array<std::size_t, 2>> sample_plane_pairs(const DepthMap& pred,
                                                           const Grid<int>& plane_id,
                                                           int count, Rng& rng) {
  if (!pred.values.same_shape(plane_id)) throw DomainError("pwn: plane_id shape differs");
  const int w = pred.width(), h = pred.height();
  std::vector<std::size_t> interior;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const int id = plane_id(x, y);
      if (id < 0) continue;
      bool ok = true;
      for (int dy = -1; dy <= 1 && ok; ++dy)
        for (int dx = -1; dx <= 1 && ok; ++dx)
          ok = plane_id(x + dx, y + dy) == id && pred.valid(x + dx, y + dy);
      if (ok) interior.push_back(static_cast<std::size_t>(y) * w + x);
    }
  }
  std::vector<std::array<std::size_t, 2>> out;
  if (interior.empty()) return out;
  // Group members by plane id, keeping scan order.
  std::vector<std::pair<int, std::size_t>> keyed;
  keyed.reserve(interior.size());
  for (auto i : interior) keyed.emplace_back(plane_id[i], i);
  std::stable_sort(keyed.begin(), keyed.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  out.reserve(count);
  for (int c = 0; c < count; ++c) {
    const std::size_t first = rng.below(keyed.size());
    const int id = keyed[first].first;
    const auto lo = std::lower_bound(keyed.begin(), keyed.end(), id,
                                     [](const auto& e, int v) { return e.first < v; });
    const auto hi = std::upper_bound(keyed.begin(), keyed.end(), id,
                                     [](int v, const auto& e) { return v < e.first; });
    const std::size_t second = (lo - keyed.begin()) + rng.below(static_cast<std::size_t>(hi - lo));
    out.push_back({keyed[first].second, keyed[second].second});
  }
  return out;
}

LossResult pwn_pairs(const DepthMap& pred, const Grid<Vec3>& gt_normals,
                     const CameraIntrinsics& k,
                     const std::vector<std::array<std::size_t, 2>>& pairs,
                     bool warn_degenerate) {
  if (!pred.values.same_shape(gt_normals)) throw DomainError("pwn: normal grid shape differs");
  LossResult r = zero_result(pred.width(), pred.height());
  std::size_t terms = 0;
  const int w = pred.width();
  for (const auto& pr : pairs) {
    for (auto i : pr) {
      PlaneFit fit;
      if (!fit_plane(pred, k, static_cast<int>(i % w), static_cast<int>(i / w), &fit)) continue;
      ++terms;
      const Vec3& m = gt_normals[i];
      const double an = fit.a.norm();
      const Vec3 ahat = fit.a / an;
      // 1 - n.m with n = -a/|a|.
      r.value += 1.0 + ahat.dot(m);
      const Vec3 hvec = (m - ahat * ahat.dot(m)) / an;
      const Vec3 lam = fit.g_inv * hvec;
      for (int q = 0; q < 9; ++q) {
        const Vec3& xq = fit.x[q];
        const Vec3 dx = lam * (1.0 - xq.dot(fit.a)) - fit.a * xq.dot(lam);
        r.grad[fit.idx[q]] += fit.rays[q].dot(dx);
      }
    }
  }
  if (terms == 0) {
    r.degenerate = true;
    if (warn_degenerate) warn("pwn: no plane interior pixels; loss is 0");
    return r;
  }
  const double inv = 1.0 / static_cast<double>(terms);
  r.value *= inv;
  for (std::size_t i = 0; i < r.grad.size(); ++i) r.grad[i] *= inv;
  return r;
}

LossResult pwn(const DepthMap& pred, const Grid<Vec3>& gt_normals, const Grid<int>& plane_id,
               const CameraIntrinsics& k, int n_pairs, Rng& rng, bool warn_degenerate) {
  if (n_pairs < 1) throw DomainError("pwn: n_pairs must be >= 1");
  return pwn_pairs(pred, gt_normals, k, sample_plane_pairs(pred, plane_id, n_pairs, rng),
                   warn_degenerate);
}

TotalLoss total_loss(const DepthMap& pred, const DepthMap& gt, const FrameAux& aux,
                     const LossWeights& weights, Rng& rng, const LossOptions& opts) {
  check_pair(pred, gt, "total_loss");
  Rng patch_rng(rng.next_u64());
  Rng triplet_rng(rng.next_u64());
  Rng pair_rng(rng.next_u64());
  TotalLoss t;
  t.total = zero_result(pred.width(), pred.height());
  auto add = [&](const LossResult& r, double weight, double* slot) {
    *slot = r.value;
    t.total.value += weight * r.value;
    for (std::size_t i = 0; i < r.grad.size(); ++i) t.total.grad[i] += weight * r.grad[i];
  };
  if (weights.pwn != 0.0 && aux.normals && aux.plane_id) {
    // Plane fits only see pixels where gt is valid too.
    DepthMap fit_depth = pred;
    for (std::size_t i = 0; i < fit_depth.mask.size(); ++i)
      if (!gt.valid(i)) fit_depth.mask[i] = 0;
    add(pwn(fit_depth, *aux.normals, *aux.plane_id, aux.intrinsics, opts.pwn_pairs, pair_rng, false),
        weights.pwn, &t.pwn);
  }
  if (weights.vnl != 0.0)
    add(vnl(pred, gt, aux.intrinsics, opts.vnl_triplets, triplet_rng), weights.vnl, &t.vnl);
  if (weights.silog != 0.0 && aux.metric_loss)
    add(silog(pred, gt, opts.silog_lambda), weights.silog, &t.silog);
  if (weights.rpnl != 0.0)
    add(rpnl(pred, gt, opts.rpnl_patches, patch_rng, false), weights.rpnl, &t.rpnl);
  return t;
}

}  // namespace metriccam
