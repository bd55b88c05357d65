#include "pslam/scene.hpp"

#include "pslam/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace pslam {

Pose SceneSpec::pose_at(double t) const {
  if (trajectory.empty()) throw std::invalid_argument("scene: no trajectory");
  if (t <= trajectory.front().t) return trajectory.front().pose;
  if (t >= trajectory.back().t) return trajectory.back().pose;
  auto hi = std::upper_bound(
      trajectory.begin(), trajectory.end(), t,
      [](double v, const Waypoint& w) { return v < w.t; });
  auto lo = hi - 1;
  double s = (t - lo->t) / (hi->t - lo->t);
  Vec6 twist = se3_log(pose_compose(pose_inverse(lo->pose), hi->pose));
  return pose_compose(lo->pose, se3_exp(s * twist));
}

void SceneSpec::validate() const {
  if (!intrinsics.valid()) throw std::invalid_argument("scene: bad intrinsics");
  if (trajectory.empty()) throw std::invalid_argument("scene: no trajectory");
  for (std::size_t i = 1; i < trajectory.size(); ++i)
    if (trajectory[i].t <= trajectory[i - 1].t)
      throw std::invalid_argument("scene: waypoint times must increase");
  for (const ScenePlane& p : planes)
    if (p.extent_u <= 0.0 || p.extent_v <= 0.0)
      throw std::invalid_argument("scene: plane extents must be positive");
  if (dropout < 0.0 || dropout > 1.0)
    throw std::invalid_argument("scene: dropout outside [0, 1]");
}

DepthImage render_depth(const SceneSpec& spec, double t, std::uint64_t seed) {
  const CameraIntrinsics& intr = spec.intrinsics;
  Pose cam = spec.pose_at(t);
  Pose world_to_cam = pose_inverse(cam);

  // Plane geometry in the camera frame.
  struct CamPlane {
    Vec3 n;
    double d;
    Vec3 origin, u, v;
    double half_u, half_v;
  };
  std::vector<CamPlane> cps;
  cps.reserve(spec.planes.size());
  for (const ScenePlane& p : spec.planes) {
    CamPlane cp;
    Vec3 u = p.u_axis.normalized();
    Vec3 v = (p.v_axis - p.v_axis.dot(u) * u).normalized();
    Vec3 n = u.cross(v);
    cp.origin = world_to_cam.apply(p.origin);
    cp.u = world_to_cam.rotation() * u;
    cp.v = world_to_cam.rotation() * v;
    cp.n = world_to_cam.rotation() * n;
    cp.d = -cp.n.dot(cp.origin);
    cp.half_u = 0.5 * p.extent_u;
    cp.half_v = 0.5 * p.extent_v;
    cps.push_back(cp);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  DepthImage img(intr.width, intr.height);
  for (int y = 0; y < intr.height; ++y) {
    double ty = intr.tan_y(y);
    float* dst = img.depths.data() + std::size_t(y) * intr.width;
    for (int x = 0; x < intr.width; ++x) {
      Vec3 dir(intr.tan_x(x), ty, 1.0);
      double best_z = std::numeric_limits<double>::infinity();
      for (const CamPlane& cp : cps) {
        double denom = cp.n.dot(dir);
        if (std::abs(denom) < 1e-12) continue;
        double z = -cp.d / denom;  // ray point z * dir has depth z
        if (z <= 0.0 || z >= best_z) continue;
        Vec3 hit = z * dir - cp.origin;
        if (std::abs(hit.dot(cp.u)) > cp.half_u ||
            std::abs(hit.dot(cp.v)) > cp.half_v)
          continue;
        best_z = z;
      }
      double z = best_z;
      bool valid = std::isfinite(z) && z <= spec.z_max;
      // Draw per-pixel randomness unconditionally so the noise field does
      // not depend on scene content.
      double g = gauss(rng);
      double drop = uni(rng);
      if (valid && spec.sigma0 > 0.0) {
        z += spec.sigma0 * z * z * g;
        valid = z > 0.0 && z <= spec.z_max;
      }
      if (spec.dropout > 0.0 && drop < spec.dropout) valid = false;
      dst[x] = valid ? float(z) : 0.0f;
    }
  }
  return img;
}

namespace {

std::vector<double> parse_numbers(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Pose pose_from_pos_rpy_deg(const Vec3& pos, const Vec3& rpy_deg) {
  const double k = M_PI / 180.0;
  Eigen::AngleAxisd yaw(rpy_deg.z() * k, Vec3::UnitZ());
  Eigen::AngleAxisd pitch(rpy_deg.y() * k, Vec3::UnitY());
  Eigen::AngleAxisd roll(rpy_deg.x() * k, Vec3::UnitX());
  return Pose(Eigen::Quaterniond(yaw * pitch * roll), pos);
}

}  // namespace

SceneSpec parse_scene(const std::string& text) {
  SceneSpec spec;
  spec.intrinsics = CameraIntrinsics{525.0, 525.0, 320.0, 240.0, 0.5, 0.5,
                                     640, 480};

  std::string section;
  ScenePlane plane;
  bool plane_open = false;
  Vec3 wp_pos = Vec3::Zero(), wp_rpy = Vec3::Zero();
  double wp_t = 0.0;
  bool wp_open = false;

  auto close_section = [&]() {
    if (plane_open) {
      spec.planes.push_back(plane);
      plane = ScenePlane{};
      plane_open = false;
    }
    if (wp_open) {
      spec.trajectory.push_back({wp_t, pose_from_pos_rpy_deg(wp_pos, wp_rpy)});
      wp_pos = wp_rpy = Vec3::Zero();
      wp_t = 0.0;
      wp_open = false;
    }
  };

  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      close_section();
      section = line.substr(1, line.size() - 2);
      if (section == "plane") plane_open = true;
      if (section == "waypoint") wp_open = true;
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("scene line " + std::to_string(lineno) +
                    ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    std::vector<double> nums = parse_numbers(value);
    auto need = [&](std::size_t n) {
      if (nums.size() != n)
        throw IoError("scene line " + std::to_string(lineno) + ": '" + key +
                      "' needs " + std::to_string(n) + " numbers");
    };

    if (section == "camera") {
      need(1);
      double v = nums[0];
      if (key == "width") spec.intrinsics.width = int(v);
      else if (key == "height") spec.intrinsics.height = int(v);
      else if (key == "fx") spec.intrinsics.fx = v;
      else if (key == "fy") spec.intrinsics.fy = v;
      else if (key == "cx") spec.intrinsics.cx = v;
      else if (key == "cy") spec.intrinsics.cy = v;
      else if (key == "dx") spec.intrinsics.dx = v;
      else if (key == "dy") spec.intrinsics.dy = v;
      else throw IoError("scene: unknown camera key '" + key + "'");
    } else if (section == "noise") {
      need(1);
      if (key == "sigma0") spec.sigma0 = nums[0];
      else if (key == "dropout") spec.dropout = nums[0];
      else if (key == "z_max") spec.z_max = nums[0];
      else throw IoError("scene: unknown noise key '" + key + "'");
    } else if (section == "plane") {
      if (key == "origin") { need(3); plane.origin = Vec3(nums[0], nums[1], nums[2]); }
      else if (key == "u") { need(3); plane.u_axis = Vec3(nums[0], nums[1], nums[2]); }
      else if (key == "v") { need(3); plane.v_axis = Vec3(nums[0], nums[1], nums[2]); }
      else if (key == "extent") { need(2); plane.extent_u = nums[0]; plane.extent_v = nums[1]; }
      else throw IoError("scene: unknown plane key '" + key + "'");
    } else if (section == "waypoint") {
      if (key == "t") { need(1); wp_t = nums[0]; }
      else if (key == "pos") { need(3); wp_pos = Vec3(nums[0], nums[1], nums[2]); }
      else if (key == "rpy") { need(3); wp_rpy = Vec3(nums[0], nums[1], nums[2]); }
      else throw IoError("scene: unknown waypoint key '" + key + "'");
    } else {
      throw IoError("scene line " + std::to_string(lineno) +
                    ": key outside a known section");
    }
  }
  close_section();
  spec.validate();
  return spec;
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scene: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_scene(ss.str());
}

}  // namespace pslam
