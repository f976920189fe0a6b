// Copyright 2026 The metriccam Authors
// SPDX-License-Identifier: Apache-2.0

#include "io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace metriccam::io {
namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::error_code ec;
  if (fs::is_directory(path, ec)) throw IoError("is a directory: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in, const fs::path& path) {
  std::string tok;
  for (;;) {
    int c = in.get();
    if (c == EOF) throw ParseError("truncated header: " + path.string());
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int parse_dim(const std::string& s, const fs::path& path) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size() || v < 1) throw ParseError("");
    return v;
  } catch (...) {
    throw ParseError("bad image dimension '" + s + "' in " + path.string());
  }
}

float to_le(float v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u = __builtin_bswap32(u);
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace

void write_pfm(const fs::path& path, const std::vector<Grid<double>>& channels) {
  if (channels.size() != 1 && channels.size() != 3)
    throw DomainError("pfm: channel count must be 1 or 3");
  const int w = channels[0].width();
  const int h = channels[0].height();
  auto out = open_out(path);
  out << (channels.size() == 1 ? "Pf" : "PF") << "\n" << w << " " << h << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(w) * channels.size());
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels.size(); ++c)
        row[x * channels.size() + c] = to_le(static_cast<float>(channels[c](x, y)));
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  finish(out, path);
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
  Grid<double> v = depth.values;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!depth.mask[i]) v[i] = 0.0;
  write_pfm(path, std::vector<Grid<double>>{std::move(v)});
}

std::vector<Grid<double>> read_pfm(const fs::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  std::size_t nc = 0;
  if (magic == "Pf") nc = 1;
  else if (magic == "PF") nc = 3;
  else throw ParseError("not a PFM file: " + path.string());
  const int w = parse_dim(header_token(in, path), path);
  const int h = parse_dim(header_token(in, path), path);
  double scale = 0.0;
  try {
    scale = std::stod(header_token(in, path));
  } catch (const std::exception&) {
    throw ParseError("bad PFM scale in " + path.string());
  }
  if (scale == 0.0) throw ParseError("bad PFM scale in " + path.string());
  const bool little = scale < 0.0;
  std::vector<Grid<double>> channels(nc, Grid<double>(w, h));
  std::vector<float> row(static_cast<std::size_t>(w) * nc);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));
    if (!in) throw ParseError("truncated PFM data: " + path.string());
    for (int x = 0; x < w; ++x)
      for (std::size_t c = 0; c < nc; ++c) {
        float v = row[x * nc + c];
        const bool swap = (std::endian::native == std::endian::little) != little;
        if (swap) {
          std::uint32_t u;
          std::memcpy(&u, &v, 4);
          u = __builtin_bswap32(u);
          std::memcpy(&v, &u, 4);
        }
        channels[c](x, y) = v;
      }
  }
  return channels;
}

DepthMap read_pfm_depth(const fs::path& path) {
  auto ch = read_pfm(path);
  if (ch.size() != 1) throw ParseError("depth PFM must have one channel: " + path.string());
  return DepthMap::from_values(std::move(ch[0]));
}

void write_ppm(const fs::path& path, const ImageMap& image) {
  const int nc = image.num_channels();
  if (nc != 1 && nc != 3) throw DomainError("ppm: channel count must be 1 or 3");
  auto out = open_out(path);
  out << (nc == 1 ? "P5" : "P6") << "\n" << image.width() << " " << image.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(image.width()) * nc);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < nc; ++c) {
        const double v = std::clamp(image.channels[c](x, y), 0.0, 1.0);
        row[x * nc + c] = static_cast<unsigned char>(std::lround(v * 255.0));
      }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  finish(out, path);
}

ImageMap read_ppm(const fs::path& path) {
  auto in = open_in(path);
  const std::string magic = header_token(in, path);
  int nc = 0;
  if (magic == "P5") nc = 1;
  else if (magic == "P6") nc = 3;
  else throw ParseError("not a binary PGM/PPM file: " + path.string());
  const int w = parse_dim(header_token(in, path), path);
  const int h = parse_dim(header_token(in, path), path);
  const int maxval = parse_dim(header_token(in, path), path);
  if (maxval > 255) throw ParseError("only 8-bit PPM is supported: " + path.string());
  ImageMap img(w, h, nc);
  std::vector<unsigned char> row(static_cast<std::size_t>(w) * nc);
  for (int y = 0; y < h; ++y) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!in) throw ParseError("truncated PPM data: " + path.string());
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < nc; ++c) img.channels[c](x, y) = row[x * nc + c] / double(maxval);
  }
  return img;
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  auto out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", static_cast<float>(p.x()),
                  static_cast<float>(p.y()), static_cast<float>(p.z()));
    out << buf;
  }
  finish(out, path);
}

PointCloud read_ply(const fs::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
    throw ParseError("not a PLY file: " + path.string());
  std::size_t count = 0;
  bool in_vertex = false;
  bool ascii = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = fmt == "ascii";
    } else if (kw == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (kw == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (kw == "end_header") {
      break;
    }
  }
  if (!ascii) throw ParseError("only ASCII PLY is supported: " + path.string());
  const auto idx = [&](const char* n) {
    auto it = std::find(props.begin(), props.end(), n);
    if (it == props.end()) throw ParseError(std::string("PLY missing property ") + n);
    return static_cast<std::size_t>(it - props.begin());
  };
  const std::size_t ix = idx("x"), iy = idx("y"), iz = idx("z");
  PointCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> vals(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : vals)
      if (!(in >> v)) throw ParseError("truncated PLY vertex data: " + path.string());
    Vec3 p(vals[ix], vals[iy], vals[iz]);
    if (!p.allFinite()) throw ParseError("non-finite PLY vertex: " + path.string());
    cloud.points.push_back(p);
  }
  return cloud;
}

nlohmann::json to_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"u0", k.u0}, {"v0", k.v0},
          {"width", k.width}, {"height", k.height}};
}

CameraIntrinsics intrinsics_from_json(const nlohmann::json& j) {
  try {
    CameraIntrinsics k;
    k.fx = j.at("fx").get<double>();
    k.fy = j.at("fy").get<double>();
    k.u0 = j.at("u0").get<double>();
    k.v0 = j.at("v0").get<double>();
    k.width = j.at("width").get<int>();
    k.height = j.at("height").get<int>();
    k.validate();
    return k;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("intrinsics: ") + e.what());
  }
}

std::optional<PhysicalCameraMeta> physical_meta_from_json(const nlohmann::json& j) {
  if (!j.contains("focal_um") && !j.contains("pixel_size_um")) return std::nullopt;
  try {
    return PhysicalCameraMeta{j.at("focal_um").get<double>(), j.at("pixel_size_um").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("intrinsics metadata: ") + e.what());
  }
}

nlohmann::json to_json(const RigidTransform& pose) {
  nlohmann::json r = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.push_back(pose.rotation(i, j));
  return {{"R", r},
          {"t", {pose.translation.x(), pose.translation.y(), pose.translation.z()}}};
}

RigidTransform pose_from_json(const nlohmann::json& j) {
  try {
    const auto& r = j.at("R");
    const auto& t = j.at("t");
    if (r.size() != 9 || t.size() != 3) throw ParseError("pose: R needs 9 and t needs 3 values");
    RigidTransform pose;
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) pose.rotation(i, k) = r.at(i * 3 + k).get<double>();
    for (int i = 0; i < 3; ++i) pose.translation(i) = t.at(i).get<double>();
    pose.validate(1e-6);
    return pose;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pose: ") + e.what());
  }
}

nlohmann::json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  finish(out, path);
}

}  // namespace metriccam::io
