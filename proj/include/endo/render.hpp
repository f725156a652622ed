#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "endo/image.hpp"
#include "endo/rng.hpp"

namespace endo {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  bool operator==(const Vec3&) const = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) { return a * (1.0 / norm(a)); }

// Distance to the nearest surface, positive in free space (where the camera
// lives) and zero on the surface. Must be 1-Lipschitz up to the renderer's
// step scale.
class SurfaceField {
 public:
  virtual ~SurfaceField() = default;
  virtual double free_distance(const Vec3& p) const = 0;
  // Sphere-tracing step multiplier; below 1 for fields that are not exact.
  virtual double step_scale() const { return 1.0; }
};

struct SceneParams {
  int control_points = 8;          // random-walk knots of the tube axis
  double control_spacing = 3.0;    // scene units between knots
  int subdivisions = 4;            // polyline samples per knot interval
  double max_bend_degrees = 25.0;  // heading change per knot
  double radius = 1.0;
  double radius_variation = 0.15;  // relative, smooth along the axis
  double fold_amplitude = 0.12;    // relative inward ridge depth
  double fold_frequency = 0.8;     // ridges per scene unit of arc length

  void validate() const;
};

// Procedural colon-like tube: a smooth random axis with a varying radius and
// periodic inward folds. Ends are closed by the rounded caps that the
// clamped segment distance produces.
class Scene : public SurfaceField {
 public:
  std::vector<Vec3> centerline;
  std::vector<double> radius_profile;  // per centerline point
  std::vector<double> arc_length;      // cumulative, per centerline point
  double fold_amplitude = 0.0;
  double fold_frequency = 0.0;
  double fold_phase = 0.0;
  std::uint64_t seed = 0;

  // Nearest axis location: returns distance and sets arc length / radius there.
  double axis_distance(const Vec3& p, double* s_out, double* radius_out) const;
  // Unfolded tube wall radius at arc length s.
  double wall_radius(double s, double base_radius) const;
  double total_length() const { return arc_length.empty() ? 0.0 : arc_length.back(); }
  Vec3 point_at(double s) const;
  Vec3 tangent_at(double s) const;

  double free_distance(const Vec3& p) const override;
  double step_scale() const override { return fold_amplitude > 0.0 ? 0.8 : 0.95; }
};

Scene make_scene(std::uint64_t seed, const SceneParams& params);

struct EndoscopeCamera {
  Vec3 position;
  Vec3 forward{0, 0, 1};
  Vec3 up{0, 1, 0};
  double fov_degrees = 120.0;
  std::size_t width = 64;
  std::size_t height = 64;

  // Re-derives an orthonormal (forward, up) pair; throws on degenerate input.
  void orthonormalize();
  Vec3 right() const { return normalized(cross(forward, up)); }
  // Unit direction through the center of pixel (px, py); py = 0 is the top row.
  Vec3 ray_direction(std::size_t px, std::size_t py) const;
};

struct PointLight {
  Vec3 offset;  // in camera frame: (right, up, forward)
  double intensity = 1.0;
};

struct LightRig {
  std::vector<PointLight> lights;

  void validate() const;  // 2 to 3 lights, positive intensities
  Vec3 light_position(const EndoscopeCamera& camera, std::size_t i) const;
};

// Lambertian inverse-square shading, unclamped:
// sum_l I_l * max(0, n . l_hat) / d_l^2.
double shade(const Vec3& hit, const Vec3& normal, const EndoscopeCamera& camera, const LightRig& rig);

struct RenderOptions {
  int max_steps = 512;
  double hit_epsilon = 1e-6;
  // Beyond this the lumen is too dark to matter and rays count as misses.
  double max_distance = 6.0;
  double min_camera_clearance = 0.02;
};

struct CameraRecord {
  Vec3 position, forward, up;
  double fov_degrees = 0.0;
};

struct RenderedPair {
  Image image;
  DepthMap depth;
  CameraRecord pose;
  std::uint64_t seed = 0;
  // Shading before the [0,1] clamp; kept for physical checks.
  std::vector<double> radiance;
};

// Sphere-traces every pixel. Throws std::invalid_argument with the camera
// position if the camera is not in free space.
RenderedPair render_view(const SurfaceField& field, const EndoscopeCamera& camera,
                         const LightRig& rig, const RenderOptions& options = {});

// Camera placed along the axis with lateral offset and angular jitter.
struct ViewParams {
  double fov_degrees = 120.0;
  std::size_t width = 64;
  std::size_t height = 64;
  double max_jitter_degrees = 30.0;
  double max_lateral_offset = 0.3;  // fraction of local radius
  double total_intensity = 0.6;     // split evenly across the lights
  double light_offset = 0.08;       // scene units from the lens
};

EndoscopeCamera sample_camera(const Scene& scene, const ViewParams& params, Rng& rng);
LightRig sample_lights(const ViewParams& params, Rng& rng);

// Analytic primitives for renderer validation.
struct SphereField : SurfaceField {
  Vec3 center;
  double radius = 1.0;
  SphereField(Vec3 c, double r) : center(c), radius(r) {}
  double free_distance(const Vec3& p) const override { return norm(p - center) - radius; }
};

// Camera inside an infinite cylinder around `axis_dir` through `axis_point`.
struct CylinderInteriorField : SurfaceField {
  Vec3 axis_point;
  Vec3 axis_dir{0, 0, 1};
  double radius = 1.0;
  CylinderInteriorField(Vec3 p, Vec3 d, double r) : axis_point(p), axis_dir(normalized(d)), radius(r) {}
  double free_distance(const Vec3& p) const override {
    const Vec3 v = p - axis_point;
    const Vec3 radial = v - axis_dir * dot(v, axis_dir);
    return radius - norm(radial);
  }
};

}  // namespace endo
