#pragma once

#include "nerfgs/common.hpp"
#include "nerfgs/vec.hpp"

namespace nerfgs {

// Pinhole camera, +z forward in camera space, pixel (0,0) top-left with
// sample positions at pixel centers (px + 0.5, py + 0.5).
struct Camera {
  real fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rot;   // world-to-camera rotation
  Vec3 trans; // world-to-camera translation
  int width = 0, height = 0;
  real near = real(0.05), far = real(100);

  Vec3 world_to_cam(const Vec3& p) const { return rot * p + trans; }
  Vec3 cam_to_world_dir(const Vec3& d) const { return rot.transposed_mul(d); }
  Vec3 center() const { return rot.transposed_mul(trans * real(-1)); }

  // World-space unit direction through the center of pixel (px, py).
  Vec3 pixel_dir(real px, real py) const {
    Vec3 dc{(px + real(0.5) - cx) / fx, (py + real(0.5) - cy) / fy, 1};
    return cam_to_world_dir(dc).normalized();
  }

  bool project(const Vec3& p_world, Vec2& pix, real& depth) const {
    Vec3 t = world_to_cam(p_world);
    depth = t.z;
    if (t.z <= 0) return false;
    pix = {fx * t.x / t.z + cx, fy * t.y / t.z + cy};
    return true;
  }

  void validate() const {
    require(fx > 0 && fy > 0, Errc::usage, "camera: focal lengths must be positive");
    require(width > 0 && height > 0, Errc::usage, "camera: image size must be positive");
    require(near < far, Errc::usage, "camera: near must be < far");
  }
};

// Camera at `eye` looking at `target`, with `up` fixing the roll.
inline Camera look_at_camera(const Vec3& eye, const Vec3& target, const Vec3& up, real fov_y_rad, int width,
                             int height) {
  Vec3 fwd = (target - eye).normalized();
  Vec3 right = fwd.cross(up).normalized();
  Vec3 down = fwd.cross(right);  // +y down in image space
  Camera cam;
  cam.rot.m = {right.x, right.y, right.z, down.x, down.y, down.z, fwd.x, fwd.y, fwd.z};
  cam.trans = cam.rot * eye * real(-1);
  cam.width = width;
  cam.height = height;
  cam.fy = real(0.5) * real(height) / std::tan(fov_y_rad / 2);
  cam.fx = cam.fy;
  cam.cx = real(width) / 2;
  cam.cy = real(height) / 2;
  return cam;
}

}  // namespace nerfgs
