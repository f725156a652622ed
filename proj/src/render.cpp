#include "endo/render.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace endo {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// Any unit vector perpendicular to v.
Vec3 perpendicular(const Vec3& v) {
  const Vec3 a = std::abs(v.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  return normalized(cross(v, a));
}

Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (p1 * 2.0 + (p2 - p0) * t + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2 +
          (-p0 + p1 * 3.0 - p2 * 3.0 + p3) * t3) *
         0.5;
}

}  // namespace

void SceneParams::validate() const {
  if (!(radius > 0.0)) throw std::invalid_argument("scene radius must be > 0");
  if (control_points < 2) throw std::invalid_argument("scene needs at least 2 control points");
  if (!(control_spacing > 0.0)) throw std::invalid_argument("control_spacing must be > 0");
  if (subdivisions < 1) throw std::invalid_argument("subdivisions must be >= 1");
  if (!(radius_variation >= 0.0 && radius_variation < 0.5)) {
    throw std::invalid_argument("radius_variation must be in [0, 0.5)");
  }
  if (!(fold_amplitude >= 0.0 && fold_amplitude < 0.5)) {
    throw std::invalid_argument("fold_amplitude must be in [0, 0.5)");
  }
  if (!(fold_frequency >= 0.0)) throw std::invalid_argument("fold_frequency must be >= 0");
  if (!(max_bend_degrees >= 0.0 && max_bend_degrees < 60.0)) {
    throw std::invalid_argument("max_bend_degrees must be in [0, 60)");
  }
}

Scene make_scene(std::uint64_t seed, const SceneParams& params) {
  params.validate();
  Rng rng = Rng(seed).split("scene");

  std::vector<Vec3> knots{{0, 0, 0}};
  Vec3 dir{0, 0, 1};
  const double bend = std::tan(params.max_bend_degrees * kDegToRad);
  for (int k = 1; k < params.control_points; ++k) {
    if (k > 1) {
      const Vec3 u = perpendicular(dir);
      const Vec3 v = cross(dir, u);
      dir = normalized(dir + u * (bend * rng.uniform(-1.0, 1.0) / std::numbers::sqrt2) +
                       v * (bend * rng.uniform(-1.0, 1.0) / std::numbers::sqrt2));
    }
    knots.push_back(knots.back() + dir * params.control_spacing);
  }

  Scene scene;
  scene.seed = seed;
  const std::size_t n = knots.size();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const Vec3& p0 = knots[k == 0 ? 0 : k - 1];
    const Vec3& p3 = knots[std::min(k + 2, n - 1)];
    for (int s = 0; s < params.subdivisions; ++s) {
      const double t = static_cast<double>(s) / params.subdivisions;
      scene.centerline.push_back(catmull_rom(p0, knots[k], knots[k + 1], p3, t));
    }
  }
  scene.centerline.push_back(knots.back());

  scene.arc_length.assign(scene.centerline.size(), 0.0);
  for (std::size_t i = 1; i < scene.centerline.size(); ++i) {
    scene.arc_length[i] = scene.arc_length[i - 1] + norm(scene.centerline[i] - scene.centerline[i - 1]);
  }

  const double f1 = rng.uniform(0.05, 0.12), f2 = rng.uniform(0.15, 0.3);
  const double ph1 = rng.uniform(0.0, 2 * std::numbers::pi), ph2 = rng.uniform(0.0, 2 * std::numbers::pi);
  for (double s : scene.arc_length) {
    const double wave = 0.6 * std::sin(2 * std::numbers::pi * f1 * s + ph1) +
                        0.4 * std::sin(2 * std::numbers::pi * f2 * s + ph2);
    scene.radius_profile.push_back(params.radius * (1.0 + params.radius_variation * wave));
  }

  scene.fold_amplitude = params.fold_amplitude;
  scene.fold_frequency = params.fold_frequency;
  scene.fold_phase = rng.uniform(0.0, 2 * std::numbers::pi);
  return scene;
}

double Scene::axis_distance(const Vec3& p, double* s_out, double* radius_out) const {
  double best = kMissDepth;
  double best_s = 0.0, best_r = radius_profile.empty() ? 0.0 : radius_profile[0];
  for (std::size_t i = 0; i + 1 < centerline.size(); ++i) {
    const Vec3& a = centerline[i];
    const Vec3 ab = centerline[i + 1] - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 d = p - (a + ab * t);
    const double dist2 = dot(d, d);
    if (dist2 < best) {
      best = dist2;
      best_s = arc_length[i] + t * (arc_length[i + 1] - arc_length[i]);
      best_r = radius_profile[i] + t * (radius_profile[i + 1] - radius_profile[i]);
    }
  }
  if (s_out) *s_out = best_s;
  if (radius_out) *radius_out = best_r;
  return std::sqrt(best);
}

double Scene::wall_radius(double s, double base_radius) const {
  if (fold_amplitude <= 0.0) return base_radius;
  const double c = std::max(0.0, std::cos(2 * std::numbers::pi * fold_frequency * s + fold_phase));
  const double c2 = c * c;
  return base_radius * (1.0 - fold_amplitude * c2 * c2);
}

double Scene::free_distance(const Vec3& p) const {
  double s = 0.0, r = 0.0;
  const double d = axis_distance(p, &s, &r);
  return wall_radius(s, r) - d;
}

Vec3 Scene::point_at(double s) const {
  for (std::size_t i = 0; i + 1 < centerline.size(); ++i) {
    if (s <= arc_length[i + 1] || i + 2 == centerline.size()) {
      const double seg = arc_length[i + 1] - arc_length[i];
      const double t = seg > 0.0 ? std::clamp((s - arc_length[i]) / seg, 0.0, 1.0) : 0.0;
      return centerline[i] + (centerline[i + 1] - centerline[i]) * t;
    }
  }
  return centerline.back();
}

Vec3 Scene::tangent_at(double s) const {
  for (std::size_t i = 0; i + 1 < centerline.size(); ++i) {
    if (s <= arc_length[i + 1] || i + 2 == centerline.size()) {
      return normalized(centerline[i + 1] - centerline[i]);
    }
  }
  return {0, 0, 1};
}

void EndoscopeCamera::orthonormalize() {
  if (!(fov_degrees > 60.0 && fov_degrees < 170.0)) {
    throw std::invalid_argument("camera fov must be in (60, 170) degrees");
  }
  if (width == 0 || height == 0) throw std::invalid_argument("camera resolution must be nonzero");
  const double fn = norm(forward);
  if (!(fn > 0.0)) throw std::invalid_argument("camera forward vector is zero");
  forward = forward * (1.0 / fn);
  const Vec3 u = up - forward * dot(up, forward);
  if (!(norm(u) > 1e-12)) throw std::invalid_argument("camera up is parallel to forward");
  up = normalized(u);
}

Vec3 EndoscopeCamera::ray_direction(std::size_t px, std::size_t py) const {
  const double half = std::tan(0.5 * fov_degrees * kDegToRad);
  const double aspect = static_cast<double>(height) / static_cast<double>(width);
  const double u = ((static_cast<double>(px) + 0.5) / width * 2.0 - 1.0) * half;
  const double v = (1.0 - (static_cast<double>(py) + 0.5) / height * 2.0) * half * aspect;
  return normalized(forward + right() * u + up * v);
}

void LightRig::validate() const {
  if (lights.size() < 2 || lights.size() > 3) {
    throw std::invalid_argument("light rig needs 2 or 3 lights, got " + std::to_string(lights.size()));
  }
  for (const auto& l : lights) {
    if (!(l.intensity > 0.0)) throw std::invalid_argument("light intensity must be > 0");
  }
}

Vec3 LightRig::light_position(const EndoscopeCamera& camera, std::size_t i) const {
  const Vec3& o = lights[i].offset;
  return camera.position + camera.right() * o.x + camera.up * o.y + camera.forward * o.z;
}

double shade(const Vec3& hit, const Vec3& normal, const EndoscopeCamera& camera, const LightRig& rig) {
  double total = 0.0;
  for (std::size_t i = 0; i < rig.lights.size(); ++i) {
    const Vec3 to_light = rig.light_position(camera, i) - hit;
    const double d2 = dot(to_light, to_light);
    const double cos_term = dot(normal, to_light) / std::sqrt(d2);
    total += rig.lights[i].intensity * std::max(0.0, cos_term) / d2;
  }
  return total;
}

RenderedPair render_view(const SurfaceField& field, const EndoscopeCamera& camera_in,
                         const LightRig& rig, const RenderOptions& options) {
  EndoscopeCamera camera = camera_in;
  camera.orthonormalize();
  rig.validate();
  const double clearance = field.free_distance(camera.position);
  if (!(clearance > options.min_camera_clearance)) {
    std::ostringstream os;
    os << "camera outside lumen at (" << camera.position.x << ", " << camera.position.y << ", "
       << camera.position.z << "), free distance " << clearance;
    throw std::invalid_argument(os.str());
  }

  RenderedPair out;
  out.image = Image(camera.width, camera.height);
  out.depth = DepthMap(camera.width, camera.height, kMissDepth);
  out.radiance.assign(camera.width * camera.height, 0.0);
  out.pose = {camera.position, camera.forward, camera.up, camera.fov_degrees};

  const double step = field.step_scale();
  const double h = 1e-5;
  for (std::size_t py = 0; py < camera.height; ++py) {
    for (std::size_t px = 0; px < camera.width; ++px) {
      const Vec3 dir = camera.ray_direction(px, py);
      double t = 0.0;
      bool hit = false;
      double d = 0.0;
      for (int i = 0; i < options.max_steps; ++i) {
        d = field.free_distance(camera.position + dir * t);
        if (d < options.hit_epsilon) {
          hit = true;
          break;
        }
        t += d * step;
        if (t > options.max_distance) break;
      }
      // Grazing rays creep along the wall and can exhaust the step budget.
      if (!hit && t <= options.max_distance && d < 1e-3) hit = true;
      if (!hit) continue;
      const Vec3 p = camera.position + dir * t;
      const Vec3 n = normalized(
          Vec3{field.free_distance(p + Vec3{h, 0, 0}) - field.free_distance(p - Vec3{h, 0, 0}),
               field.free_distance(p + Vec3{0, h, 0}) - field.free_distance(p - Vec3{0, h, 0}),
               field.free_distance(p + Vec3{0, 0, h}) - field.free_distance(p - Vec3{0, 0, h})});
      const std::size_t idx = py * camera.width + px;
      out.depth.values[idx] = std::max(t, options.hit_epsilon);
      out.radiance[idx] = shade(p, n, camera, rig);
      out.image.pixels[idx] = std::clamp(out.radiance[idx], 0.0, 1.0);
    }
  }
  return out;
}

EndoscopeCamera sample_camera(const Scene& scene, const ViewParams& params, Rng& rng) {
  EndoscopeCamera cam;
  cam.fov_degrees = params.fov_degrees;
  cam.width = params.width;
  cam.height = params.height;
  const double length = scene.total_length();
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double s = rng.uniform(0.15, 0.4) * length;
    const Vec3 tangent = scene.tangent_at(s);
    const Vec3 u = perpendicular(tangent);
    const Vec3 v = cross(tangent, u);
    const double a = rng.uniform(0.0, 2 * std::numbers::pi);
    const Vec3 lateral = u * std::cos(a) + v * std::sin(a);
    double r = 0.0;
    scene.axis_distance(scene.point_at(s), nullptr, &r);
    cam.position = scene.point_at(s) + lateral * (rng.uniform() * params.max_lateral_offset * r);

    const double tilt = rng.uniform(0.0, params.max_jitter_degrees) * kDegToRad;
    const double b = rng.uniform(0.0, 2 * std::numbers::pi);
    const Vec3 tilt_axis = u * std::cos(b) + v * std::sin(b);
    cam.forward = normalized(tangent * std::cos(tilt) + tilt_axis * std::sin(tilt));
    const Vec3 p = perpendicular(cam.forward);
    const double roll = rng.uniform(0.0, 2 * std::numbers::pi);
    cam.up = p * std::cos(roll) + cross(cam.forward, p) * std::sin(roll);
    cam.orthonormalize();
    if (scene.free_distance(cam.position) > 0.1 * r) return cam;
  }
  throw std::runtime_error("could not place a camera inside the lumen");
}

LightRig sample_lights(const ViewParams& params, Rng& rng) {
  LightRig rig;
  const std::size_t count = 2 + rng.below(2);
  const double start = rng.uniform(0.0, 2 * std::numbers::pi);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = start + 2 * std::numbers::pi * static_cast<double>(i) / count;
    rig.lights.push_back({{params.light_offset * std::cos(a), params.light_offset * std::sin(a), 0.0},
                          params.total_intensity / static_cast<double>(count)});
  }
  return rig;
}

}  // namespace endo
