#include "tofrgbd/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "tofrgbd/error.hpp"

namespace tofrgbd::sim {

namespace {

using json = nlohmann::json;

constexpr std::array<const char*, kWallCount> kWallNames{"back", "left", "right", "floor",
                                                         "ceiling"};

void check_albedo(const Albedo& a, const std::string& where) {
  const auto ok = [](double v) { return v > 0.0 && v <= 1.0; };
  if (!ok(a.ir) || !std::all_of(a.rgb.begin(), a.rgb.end(), ok)) {
    throw DomainError(where + ": albedo must lie in (0, 1]");
  }
}

// Axis-aligned rectangle at coordinate `level` on `axis`, bounded by
// [lo, hi] on the two remaining axes.
struct Rect {
  int axis;
  double level;
  Vec3 lo;
  Vec3 hi;
  Vec3 normal;
};

Rect wall_rect(const Room& room, Wall w) {
  const Vec3 lo(room.min.x(), room.min.y(), 0.0);
  const Vec3 hi = room.max;
  switch (w) {
    case Wall::kBack: return {2, hi.z(), lo, hi, Vec3(0, 0, -1)};
    case Wall::kLeft: return {0, lo.x(), lo, hi, Vec3(1, 0, 0)};
    case Wall::kRight: return {0, hi.x(), lo, hi, Vec3(-1, 0, 0)};
    case Wall::kFloor: return {1, hi.y(), lo, hi, Vec3(0, -1, 0)};
    case Wall::kCeiling: return {1, lo.y(), lo, hi, Vec3(0, 1, 0)};
  }
  return {2, hi.z(), lo, hi, Vec3(0, 0, -1)};
}

std::optional<double> hit_rect(const Rect& r, const Vec3& o, const Vec3& d, double t_min) {
  const double dn = d[r.axis];
  if (dn == 0.0) return std::nullopt;
  const double t = (r.level - o[r.axis]) / dn;
  if (!(t > t_min)) return std::nullopt;
  const Vec3 p = o + t * d;
  constexpr double kSlack = 1e-9;
  for (int a = 0; a < 3; ++a) {
    if (a == r.axis) continue;
    if (p[a] < r.lo[a] - kSlack || p[a] > r.hi[a] + kSlack) return std::nullopt;
  }
  return t;
}

std::optional<double> hit_sphere(const Object& s, const Vec3& o, const Vec3& d, double t_min) {
  const Vec3 oc = o - s.center;
  const double r = s.size.x();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - r * r;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  // Citardauq form keeps the near root accurate when |b| >> root.
  const double q = b > 0.0 ? -b - root : -b + root;
  double t0 = q;
  double t1 = q != 0.0 ? c / q : -b;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > t_min) return t0;
  if (t1 > t_min) return t1;
  return std::nullopt;
}

std::optional<std::pair<double, Vec3>> hit_box(const Object& bx, const Vec3& o, const Vec3& d,
                                               double t_min) {
  const Vec3 lo = bx.center - bx.size;
  const Vec3 hi = bx.center + bx.size;
  double t_near = -INFINITY;
  double t_far = INFINITY;
  int near_axis = 0;
  int far_axis = 0;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > t_near) {
      t_near = t0;
      near_axis = a;
    }
    if (t1 < t_far) {
      t_far = t1;
      far_axis = a;
    }
  }
  if (t_near > t_far) return std::nullopt;
  double t = t_near;
  int axis = near_axis;
  if (!(t > t_min)) {
    t = t_far;
    axis = far_axis;
    if (!(t > t_min)) return std::nullopt;
  }
  Vec3 n = Vec3::Zero();
  n[axis] = (o + t * d)[axis] > bx.center[axis] ? 1.0 : -1.0;
  return std::make_pair(t, n);
}

std::optional<std::pair<double, Vec3>> hit_object(const Object& obj, const Vec3& o, const Vec3& d,
                                                  double t_min) {
  if (obj.kind == Object::Kind::kSphere) {
    const auto t = hit_sphere(obj, o, d, t_min);
    if (!t) return std::nullopt;
    return std::make_pair(*t, Vec3(((o + *t * d) - obj.center).normalized()));
  }
  return hit_box(obj, o, d, t_min);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Albedo random_albedo(std::mt19937_64& rng) {
  Albedo a;
  a.ir = uniform(rng, 0.3, 0.9);
  for (double& c : a.rgb) c = uniform(rng, 0.1, 1.0);
  return a;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json albedo_json(const Albedo& a) {
  return {{"ir", a.ir}, {"rgb", json::array({a.rgb[0], a.rgb[1], a.rgb[2]})}};
}

const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ManifestError(path + "." + key, "missing field");
  return j.at(key);
}

double number(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_number()) throw ManifestError(path + "." + key, "expected a number");
  return v.get<double>();
}

Vec3 vec_from(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_array() || v.size() != 3 ||
      !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number(); })) {
    throw ManifestError(path + "." + key, "expected an array of 3 numbers");
  }
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

Albedo albedo_from(const json& j, const std::string& path) {
  const json& a = field(j, "albedo", path);
  Albedo out;
  out.ir = number(a, "ir", path + ".albedo");
  const json& rgb = field(a, "rgb", path + ".albedo");
  if (!rgb.is_array() || rgb.size() != 3 ||
      !std::all_of(rgb.begin(), rgb.end(), [](const json& e) { return e.is_number(); })) {
    throw ManifestError(path + ".albedo.rgb", "expected an array of 3 numbers");
  }
  for (std::size_t i = 0; i < 3; ++i) out.rgb[i] = rgb[i].get<double>();
  return out;
}

}  // namespace

void Scene::validate() const {
  const Vec3& lo = room.min;
  const Vec3& hi = room.max;
  if (!(lo.x() < 0.0 && hi.x() > 0.0 && lo.y() < 0.0 && hi.y() > 0.0 && hi.z() > 0.0)) {
    throw DomainError("scene: the camera at the origin must lie inside the room");
  }
  for (int w = 0; w < kWallCount; ++w) {
    check_albedo(room.albedo[static_cast<std::size_t>(w)],
                 std::string("scene: wall ") + kWallNames[static_cast<std::size_t>(w)]);
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const Object& o = objects[i];
    const std::string where = "scene: object " + std::to_string(i);
    const bool sized = o.kind == Object::Kind::kSphere
                           ? o.size.x() > 0.0
                           : (o.size.array() > 0.0).all();
    if (!sized || !o.center.allFinite()) throw DomainError(where + " needs a finite center and positive size");
    check_albedo(o.albedo, where);
  }
}

std::optional<Hit> intersect(const Scene& scene, const Vec3& origin, const Vec3& dir,
                             double t_min) {
  std::optional<Hit> best;
  const auto consider = [&](double t, const Vec3& n, const Albedo& a) {
    if (best && t >= best->t) return;
    Hit h;
    h.t = t;
    h.point = origin + t * dir;
    h.normal = n.dot(dir) > 0.0 ? Vec3(-n) : n;
    h.albedo = a;
    best = h;
  };
  for (int w = 0; w < kWallCount; ++w) {
    const auto wi = static_cast<std::size_t>(w);
    if (!scene.room.present[wi]) continue;
    const Rect r = wall_rect(scene.room, static_cast<Wall>(w));
    if (const auto t = hit_rect(r, origin, dir, t_min)) consider(*t, r.normal, scene.room.albedo[wi]);
  }
  for (const Object& obj : scene.objects) {
    if (const auto h = hit_object(obj, origin, dir, t_min)) consider(h->first, h->second, obj.albedo);
  }
  return best;
}

bool visible(const Scene& scene, const Vec3& a, const Vec3& b) {
  const Vec3 delta = b - a;
  const double len = delta.norm();
  if (len == 0.0) return true;
  const Vec3 dir = delta / len;
  const double slack = 1e-7 * std::max(1.0, len);
  for (const Object& obj : scene.objects) {
    const auto h = hit_object(obj, a, dir, slack);
    if (h && h->first < len - slack) return false;
  }
  return true;
}

SurfaceSampler::SurfaceSampler(const Scene& scene) {
  const auto add_rect = [&](const Vec3& origin, const Vec3& eu, const Vec3& ev, const Vec3& n,
                            const Albedo& a) {
    Patch p;
    p.origin = origin;
    p.edge_u = eu;
    p.edge_v = ev;
    p.normal = n;
    p.albedo = a;
    total_area_ += eu.norm() * ev.norm();
    patches_.push_back(p);
    cumulative_.push_back(total_area_);
  };
  const Room& room = scene.room;
  const Vec3 lo(room.min.x(), room.min.y(), 0.0);
  const Vec3 span = room.max - lo;
  const Vec3 ex(span.x(), 0, 0), ey(0, span.y(), 0), ez(0, 0, span.z());
  for (int w = 0; w < kWallCount; ++w) {
    const auto wi = static_cast<std::size_t>(w);
    if (!room.present[wi]) continue;
    const Rect r = wall_rect(room, static_cast<Wall>(w));
    const Albedo& a = room.albedo[wi];
    switch (static_cast<Wall>(w)) {
      case Wall::kBack: add_rect(Vec3(lo.x(), lo.y(), room.max.z()), ex, ey, r.normal, a); break;
      case Wall::kLeft: add_rect(lo, ey, ez, r.normal, a); break;
      case Wall::kRight: add_rect(Vec3(room.max.x(), lo.y(), lo.z()), ey, ez, r.normal, a); break;
      case Wall::kFloor: add_rect(Vec3(lo.x(), room.max.y(), lo.z()), ex, ez, r.normal, a); break;
      case Wall::kCeiling: add_rect(lo, ex, ez, r.normal, a); break;
    }
  }
  for (const Object& obj : scene.objects) {
    if (obj.kind == Object::Kind::kSphere) {
      Patch p;
      p.sphere = true;
      p.origin = obj.center;
      p.radius = obj.size.x();
      p.albedo = obj.albedo;
      total_area_ += 4.0 * std::numbers::pi * p.radius * p.radius;
      patches_.push_back(p);
      cumulative_.push_back(total_area_);
      continue;
    }
    for (int axis = 0; axis < 3; ++axis) {
      const int a1 = (axis + 1) % 3;
      const int a2 = (axis + 2) % 3;
      Vec3 eu = Vec3::Zero();
      Vec3 ev = Vec3::Zero();
      eu[a1] = 2.0 * obj.size[a1];
      ev[a2] = 2.0 * obj.size[a2];
      for (const double s : {-1.0, 1.0}) {
        Vec3 n = Vec3::Zero();
        n[axis] = s;
        Vec3 origin = obj.center - obj.size;
        origin[axis] = obj.center[axis] + s * obj.size[axis];
        add_rect(origin, eu, ev, n, obj.albedo);
      }
    }
  }
}

SurfaceSampler::Sample SurfaceSampler::draw(std::mt19937_64& rng) const {
  if (patches_.empty()) throw DegenerateError("SurfaceSampler: scene has no surfaces");
  const double pick = std::uniform_real_distribution<double>(0.0, total_area_)(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), pick);
  const std::size_t idx = std::min(static_cast<std::size_t>(it - cumulative_.begin()),
                                   patches_.size() - 1);
  const Patch& p = patches_[idx];
  Sample s;
  s.albedo = p.albedo;
  if (p.sphere) {
    std::normal_distribution<double> n01;
    Vec3 dir;
    do {
      dir = Vec3(n01(rng), n01(rng), n01(rng));
    } while (dir.squaredNorm() < 1e-20);
    dir.normalize();
    s.point = p.origin + p.radius * dir;
    s.normal = dir;
    return s;
  }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double a = u01(rng);
  const double b = u01(rng);
  s.point = p.origin + a * p.edge_u + b * p.edge_v;
  s.normal = p.normal;
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Scene random_scene(std::uint64_t seed, const RandomSceneOptions& options) {
  if (options.min_objects < 0 || options.max_objects < options.min_objects ||
      !(options.min_back > 1.5) || options.max_back < options.min_back || options.max_back > 5.0) {
    throw ContractError("random_scene: inconsistent options");
  }
  std::mt19937_64 rng(derive_seed(seed, 0));
  Scene scene;
  scene.seed = seed;
  Room& room = scene.room;
  const double half_w = uniform(rng, 1.5, 2.5);
  room.min = Vec3(-half_w, -uniform(rng, 1.0, 1.4), 0.0);
  room.max = Vec3(half_w, uniform(rng, 1.0, 1.4), uniform(rng, options.min_back, options.max_back));
  for (Albedo& a : room.albedo) a = random_albedo(rng);

  const int count =
      std::uniform_int_distribution<int>(options.min_objects, options.max_objects)(rng);
  for (int i = 0; i < count; ++i) {
    Object obj;
    obj.kind = uniform(rng, 0.0, 1.0) < 0.5 ? Object::Kind::kSphere : Object::Kind::kBox;
    if (obj.kind == Object::Kind::kSphere) {
      const double r = uniform(rng, 0.2, 0.45);
      obj.size = Vec3(r, r, r);
    } else {
      obj.size = Vec3(uniform(rng, 0.15, 0.4), uniform(rng, 0.15, 0.4), uniform(rng, 0.15, 0.4));
    }
    const Vec3& s = obj.size;
    obj.center = Vec3(uniform(rng, room.min.x() + s.x() + 0.05, room.max.x() - s.x() - 0.05),
                      uniform(rng, room.min.y() + s.y() + 0.05, room.max.y() - s.y()),
                      uniform(rng, 1.2 + s.z(), room.max.z() - s.z() - 0.05));
    obj.albedo = random_albedo(rng);
    scene.objects.push_back(obj);
  }
  return scene;
}

Scene wall_scene(double z, double albedo_ir, std::uint64_t seed) {
  if (!(z > 0.0)) throw DomainError("wall_scene: distance must be positive");
  Scene scene;
  scene.seed = seed;
  scene.room.min = Vec3(-100.0 * z, -100.0 * z, 0.0);
  scene.room.max = Vec3(100.0 * z, 100.0 * z, z);
  scene.room.present = {true, false, false, false, false};
  for (Albedo& a : scene.room.albedo) a = Albedo{albedo_ir, {albedo_ir, albedo_ir, albedo_ir}};
  scene.validate();
  return scene;
}

std::string scene_to_json(const Scene& scene) {
  json walls = json::array();
  for (std::size_t w = 0; w < kWallNames.size(); ++w) {
    walls.push_back({{"name", kWallNames[w]},
                     {"present", scene.room.present[w]},
                     {"albedo", albedo_json(scene.room.albedo[w])}});
  }
  json objects = json::array();
  for (const Object& o : scene.objects) {
    objects.push_back({{"kind", o.kind == Object::Kind::kSphere ? "sphere" : "box"},
                       {"center", vec_json(o.center)},
                       {"size", vec_json(o.size)},
                       {"albedo", albedo_json(o.albedo)}});
  }
  const json j = {{"format", 1},
                  {"seed", scene.seed},
                  {"room", {{"min", vec_json(scene.room.min)},
                            {"max", vec_json(scene.room.max)},
                            {"walls", walls}}},
                  {"objects", objects}};
  return j.dump(2);
}

Scene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scene JSON: ") + e.what(), e.byte);
  }
  const json& format = field(j, "format", "scene");
  if (!format.is_number_integer() || format.get<int>() != 1) {
    throw ManifestError("scene.format", "unsupported format version");
  }
  Scene scene;
  const json& seed = field(j, "seed", "scene");
  if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) {
    throw ManifestError("scene.seed", "expected a non-negative integer");
  }
  scene.seed = seed.get<std::uint64_t>();
  const json& room = field(j, "room", "scene");
  scene.room.min = vec_from(room, "min", "scene.room");
  scene.room.max = vec_from(room, "max", "scene.room");
  const json& walls = field(room, "walls", "scene.room");
  if (!walls.is_array() || walls.size() != kWallNames.size()) {
    throw ManifestError("scene.room.walls", "expected 5 walls (back, left, right, floor, ceiling)");
  }
  for (std::size_t w = 0; w < kWallNames.size(); ++w) {
    const std::string path = std::string("scene.room.walls.") + kWallNames[w];
    const json& present = field(walls[w], "present", path);
    if (!present.is_boolean()) throw ManifestError(path + ".present", "expected a boolean");
    scene.room.present[w] = present.get<bool>();
    scene.room.albedo[w] = albedo_from(walls[w], path);
  }
  const json& objects = field(j, "objects", "scene");
  if (!objects.is_array()) throw ManifestError("scene.objects", "expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string path = "scene.objects[" + std::to_string(i) + "]";
    Object o;
    const json& kind = field(objects[i], "kind", path);
    if (kind == "sphere") {
      o.kind = Object::Kind::kSphere;
    } else if (kind == "box") {
      o.kind = Object::Kind::kBox;
    } else {
      throw ManifestError(path + ".kind", "expected \"sphere\" or \"box\"");
    }
    o.center = vec_from(objects[i], "center", path);
    o.size = vec_from(objects[i], "size", path);
    o.albedo = albedo_from(objects[i], path);
    scene.objects.push_back(o);
  }
  scene.validate();
  return scene;
}

void write_scene(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw ManifestError(path.string(), "cannot open for writing");
  out << scene_to_json(scene) << '\n';
  if (!out) throw ManifestError(path.string(), "write failed");
}

Scene read_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError(path.string(), "cannot open scene file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return scene_from_json(ss.str());
}

}  // namespace tofrgbd::sim
