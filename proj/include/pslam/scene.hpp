#pragma once

#include "pslam/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pslam {

/// A finite rectangular patch of a world plane.
struct ScenePlane {
  Vec3 origin = Vec3::Zero();   // rectangle center
  Vec3 u_axis = Vec3::UnitX();  // in-plane axes, orthonormalized on load
  Vec3 v_axis = Vec3::UnitY();
  double extent_u = 1.0;        // full side lengths, meters
  double extent_v = 1.0;

  Vec3 normal() const { return u_axis.cross(v_axis).normalized(); }
};

struct Waypoint {
  double t = 0.0;
  Pose pose;  // camera-to-world
};

/// Declarative synthetic scene: rectangular world planes, a timestamped
/// camera trajectory, intrinsics, and the depth noise model
/// sigma(Z) = sigma0 * (Z / 1m)^2 plus uniform pixel dropout.
struct SceneSpec {
  CameraIntrinsics intrinsics;
  std::vector<ScenePlane> planes;
  std::vector<Waypoint> trajectory;
  double sigma0 = 0.0;   // meters at 1 m range
  double dropout = 0.0;  // fraction of pixels invalidated
  double z_max = 10.0;

  double t_begin() const { return trajectory.front().t; }
  double t_end() const { return trajectory.back().t; }

  /// Pose at time t, geodesic interpolation between bracketing waypoints.
  Pose pose_at(double t) const;

  void validate() const;
};

/// Per-pixel ray/plane intersection render; nearest hit wins, pixels
/// missing every plane (or beyond z_max) are invalid. Noise and dropout
/// draw from the given seed, so renders are reproducible.
DepthImage render_depth(const SceneSpec& spec, double t,
                        std::uint64_t seed = 0);

/// Scene files are flat `key = value` text in repeated [section] blocks;
/// see docs/formats.md.
SceneSpec load_scene(const std::filesystem::path& path);
SceneSpec parse_scene(const std::string& text);

}  // namespace pslam
