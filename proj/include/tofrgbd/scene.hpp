#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tofrgbd::sim {

using Vec3 = Eigen::Vector3d;

/// Lambertian reflectance: `ir` at the ToF wavelength, `rgb` for the color render.
struct Albedo {
  double ir = 0.5;
  std::array<double, 3> rgb{0.5, 0.5, 0.5};
};

enum class Wall { kBack, kLeft, kRight, kFloor, kCeiling };
inline constexpr int kWallCount = 5;

/// Axis-aligned room seen from the inside. The camera sits at the origin
/// looking down +z with +y pointing down; the room is open behind the
/// camera, so walls span z in [0, max.z].
struct Room {
  Vec3 min{-2.0, -1.2, 0.0};  // min.z is unused
  Vec3 max{2.0, 1.2, 4.0};    // max.y is the floor, min.y the ceiling
  std::array<Albedo, kWallCount> albedo{};
  std::array<bool, kWallCount> present{true, true, true, true, true};
};

struct Object {
  enum class Kind { kSphere, kBox };
  Kind kind = Kind::kSphere;
  Vec3 center = Vec3::Zero();
  Vec3 size{0.5, 0.5, 0.5};  // sphere: size.x is the radius; box: half extents
  Albedo albedo;
};

struct Scene {
  Room room;
  std::vector<Object> objects;
  std::uint64_t seed = 0;

  // Throws DomainError unless the camera (origin) is inside the room, every
  // object has positive size, and every albedo lies in (0, 1].
  void validate() const;
};

/// Surface point returned by ray casting.
struct Hit {
  double t = 0.0;  // distance along the unit ray
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // unit, facing the ray origin
  Albedo albedo;
};

/// Nearest intersection of origin + t*dir (dir unit length) with t > t_min.
std::optional<Hit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir,
                             double t_min = 1e-9);

/// True when no object blocks the open segment a-b. Walls never block: the
/// room is convex, so two points inside it always see each other past them.
bool visible(const Scene& scene, const Vec3& a, const Vec3& b);

/// Uniform-by-area sampler over every surface in the scene.
class SurfaceSampler {
 public:
  explicit SurfaceSampler(const Scene& scene);

  double total_area() const noexcept { return total_area_; }

  struct Sample {
    Vec3 point;
    Vec3 normal;  // outward for objects, into the room for walls
    Albedo albedo;
  };
  Sample draw(std::mt19937_64& rng) const;

 private:
  struct Patch {  // planar rectangle or sphere
    bool sphere = false;
    Vec3 origin;  // rectangle corner or sphere center
    Vec3 edge_u;
    Vec3 edge_v;
    Vec3 normal;
    double radius = 0.0;
    Albedo albedo;
  };
  std::vector<Patch> patches_;
  std::vector<double> cumulative_;
  double total_area_ = 0.0;
};

// splitmix64 finalizer of (seed, stream): independent per-pixel / per-scene streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

struct RandomSceneOptions {
  int min_objects = 2;
  int max_objects = 5;
  double min_back = 2.5;  // back-wall distance range, meters
  double max_back = 4.5;
};

/// Procedural room with randomly placed spheres and boxes; every surface lies
/// within 6 m of the camera, inside the 20 MHz unambiguous range.
Scene random_scene(std::uint64_t seed, const RandomSceneOptions& options = {});

/// A single fronto-parallel wall at distance z filling the view (no other
/// walls, no objects).
Scene wall_scene(double z, double albedo_ir, std::uint64_t seed = 0);

std::string scene_to_json(const Scene& scene);
// Throws ManifestError naming the offending field.
Scene scene_from_json(const std::string& text);
void write_scene(const std::filesystem::path& path, const Scene& scene);
Scene read_scene(const std::filesystem::path& path);

}  // namespace tofrgbd::sim
