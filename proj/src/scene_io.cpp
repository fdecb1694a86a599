#include "lightfit/scene_io.hpp"

#include "json_reader.hpp"

#include <fmt/format.h>

#include <fstream>
#include <sstream>

namespace lightfit {

using nlohmann::json;
using detail::Reader;

namespace {

constexpr const char* kFormat = "lightfit-scene";
constexpr int kVersion = 1;

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json map_json(const Grid<double>& g) {
  const double first = g.empty() ? 0.0 : g[0];
  bool uniform = true;
  for (double v : g.values()) {
    uniform = uniform && v == first;
  }
  if (uniform && !g.empty()) {
    return first;
  }
  json rows = json::array();
  for (int y = 0; y < g.height(); ++y) {
    json row = json::array();
    for (int x = 0; x < g.width(); ++x) {
      row.push_back(g(x, y));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

Vec3 read_vec(const Reader& r) {
  if (r.array_size() != 3) {
    r.fail("expected 3 numbers");
  }
  return {r.at(std::size_t{0}).number(), r.at(1).number(), r.at(2).number()};
}

// Visits a width x height array of rows.
template <typename F>
void read_rows(const Reader& r, int width, int height, F&& f) {
  if (r.array_size() != static_cast<std::size_t>(height)) {
    r.fail(fmt::format("expected {} rows", height));
  }
  for (int y = 0; y < height; ++y) {
    const Reader row = r.at(static_cast<std::size_t>(y));
    if (row.array_size() != static_cast<std::size_t>(width)) {
      row.fail(fmt::format("expected {} columns", width));
    }
    for (int x = 0; x < width; ++x) {
      f(x, y, row.at(static_cast<std::size_t>(x)));
    }
  }
}

Grid<double> read_map(const Reader& r, int width, int height) {
  if (r.value().is_number()) {
    return Grid<double>(width, height, r.number());
  }
  Grid<double> g(width, height);
  read_rows(r, width, height, [&](int x, int y, const Reader& v) { g(x, y) = v.number(); });
  return g;
}

// Loader errors carry the JSON path of the offending field.
template <typename F>
auto at_path(const Reader& r, F&& f) {
  try {
    return f();
  } catch (const PreconditionError& e) {
    throw PreconditionError(fmt::format("{}: {}", r.path().empty() ? "/" : r.path(), e.what()));
  }
}

}  // namespace

std::string scene_to_json(const SceneFile& file) {
  const Scene& s = file.scene;
  s.validate();
  file.depth.validate();
  const int w = s.width();
  const int h = s.height();
  if (file.depth.width() != w || file.depth.height() != h) {
    throw PreconditionError("scene invariant violated: depth map must align with the point cloud");
  }
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["width"] = w;
  j["height"] = h;
  if (file.preset) {
    j["preset"] = *file.preset;
  }
  if (file.seed) {
    j["seed"] = *file.seed;
  }
  const Camera& c = s.camera;
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    rotation.push_back(json::array({c.rotation(r, 0), c.rotation(r, 1), c.rotation(r, 2)}));
  }
  j["camera"] = {{"fx", c.fx},           {"fy", c.fy},
                 {"cx", c.cx},           {"cy", c.cy},
                 {"rotation", rotation}, {"translation", vec_json(c.translation)}};
  json depth = json::array();
  json normals = json::array();
  for (int y = 0; y < h; ++y) {
    json drow = json::array();
    json nrow = json::array();
    for (int x = 0; x < w; ++x) {
      drow.push_back(file.depth.valid(x, y) ? json(file.depth.depth(x, y)) : json(nullptr));
      nrow.push_back(s.cloud.valid(x, y) ? vec_json(s.cloud.normals(x, y)) : json(nullptr));
    }
    depth.push_back(std::move(drow));
    normals.push_back(std::move(nrow));
  }
  j["depth"] = std::move(depth);
  j["normals"] = std::move(normals);
  j["materials"] = {{"diffuse", map_json(s.materials.diffuse)},
                    {"specular", map_json(s.materials.specular)},
                    {"shininess", s.materials.shininess}};
  if (file.lights) {
    json lights = json::array();
    for (const auto& l : file.lights->lights) {
      lights.push_back({{"position", vec_json(l.position)}, {"intensity", l.intensity}});
    }
    j["lights"] = std::move(lights);
    j["ambient"] = file.lights->ambient;
  }
  return j.dump(1) + "\n";
}

SceneFile scene_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports "... at line L, column C: ..." in the message.
    throw ParseError(fmt::format("scene file: {}", e.what()));
  }
  const Reader r(j, "");
  r.expect_object({"format", "version", "width", "height", "camera", "depth", "normals",
                   "materials", "lights", "ambient", "preset", "seed"});
  for (const char* key : {"format", "version", "width", "height", "camera", "depth", "materials"}) {
    if (!r.has(key)) {
      r.fail(fmt::format("missing key \"{}\"", key));
    }
  }
  if (r.at("format").string() != kFormat) {
    r.at("format").fail(fmt::format("expected \"{}\"", kFormat));
  }
  if (r.at("version").integer() != kVersion) {
    r.at("version").fail(fmt::format("unsupported version (expected {})", kVersion));
  }
  const auto w = r.at("width").integer();
  const auto h = r.at("height").integer();
  if (w < 1 || h < 1 || w > 1 << 15 || h > 1 << 15) {
    r.fail("width and height must be in [1, 32768]");
  }
  const int width = static_cast<int>(w);
  const int height = static_cast<int>(h);

  SceneFile file;
  Camera& cam = file.scene.camera;
  {
    const Reader c = r.at("camera");
    c.expect_object({"fx", "fy", "cx", "cy", "rotation", "translation"});
    for (const char* key : {"fx", "fy", "cx", "cy", "rotation", "translation"}) {
      if (!c.has(key)) {
        c.fail(fmt::format("missing key \"{}\"", key));
      }
    }
    cam.fx = c.at("fx").number();
    cam.fy = c.at("fy").number();
    cam.cx = c.at("cx").number();
    cam.cy = c.at("cy").number();
    cam.width = width;
    cam.height = height;
    const Reader rot = c.at("rotation");
    if (rot.array_size() != 3) {
      rot.fail("expected 3 rows");
    }
    for (int i = 0; i < 3; ++i) {
      cam.rotation.row(i) = read_vec(rot.at(static_cast<std::size_t>(i))).transpose();
    }
    cam.translation = read_vec(c.at("translation"));
    at_path(c, [&] {
      cam.validate();
      return 0;
    });
  }

  DepthMap& depth = file.depth;
  depth = DepthMap{Grid<double>(width, height, 0.0), Mask(width, height, 0)};
  read_rows(r.at("depth"), width, height, [&](int x, int y, const Reader& v) {
    if (v.value().is_null()) {
      return;
    }
    const double d = v.number();
    if (!(std::isfinite(d) && d > 0.0)) {
      v.violate("depth map invariant violated: valid depth must be finite and strictly positive");
    }
    depth.depth(x, y) = d;
    depth.valid(x, y) = 1;
  });

  OrientedPointCloud& cloud = file.scene.cloud;
  if (r.has("normals")) {
    cloud = OrientedPointCloud{Grid<Vec3>(width, height, Vec3::Zero()),
                               Grid<Vec3>(width, height, Vec3::Zero()), Mask(width, height, 0)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (depth.valid(x, y)) {
          cloud.points(x, y) = cam.backproject(x, y, depth.depth(x, y));
        }
      }
    }
    read_rows(r.at("normals"), width, height, [&](int x, int y, const Reader& v) {
      if (v.value().is_null()) {
        return;
      }
      const Vec3 n = read_vec(v);
      if (!n.allFinite() || std::abs(n.norm() - 1.0) > 1e-6) {
        v.violate(fmt::format("point cloud invariant violated: normal must have unit norm (got norm {})",
                           n.norm()));
      }
      if (!depth.valid(x, y)) {
        v.fail("normal given for a pixel without depth");
      }
      cloud.normals(x, y) = n;
      cloud.valid(x, y) = 1;
    });
  } else {
    cloud = at_path(r, [&] { return depth_to_cloud(depth, cam); });
  }

  {
    const Reader m = r.at("materials");
    m.expect_object({"diffuse", "specular", "shininess"});
    for (const char* key : {"diffuse", "specular", "shininess"}) {
      if (!m.has(key)) {
        m.fail(fmt::format("missing key \"{}\"", key));
      }
    }
    MaterialMaps& mat = file.scene.materials;
    mat.diffuse = read_map(m.at("diffuse"), width, height);
    mat.specular = read_map(m.at("specular"), width, height);
    mat.shininess = m.at("shininess").number();
    at_path(m, [&] {
      mat.validate();
      return 0;
    });
  }

  if (r.has("lights") || r.has("ambient")) {
    LightParams lights;
    if (r.has("ambient")) {
      lights.ambient = r.at("ambient").number();
    }
    if (r.has("lights")) {
      const Reader ls = r.at("lights");
      for (std::size_t i = 0; i < ls.array_size(); ++i) {
        const Reader l = ls.at(i);
        l.expect_object({"position", "intensity"});
        if (!l.has("position")) {
          l.fail("missing key \"position\"");
        }
        PointLight light;
        light.position = read_vec(l.at("position"));
        if (l.has("intensity")) {
          light.intensity = l.at("intensity").number();
        }
        lights.lights.push_back(light);
      }
    }
    at_path(r, [&] {
      lights.validate();
      return 0;
    });
    file.lights = lights;
  }
  if (r.has("preset")) {
    file.preset = r.at("preset").string();
  }
  if (r.has("seed")) {
    file.seed = r.at("seed").seed();
  }
  at_path(r, [&] {
    file.scene.validate();
    return 0;
  });
  return file;
}

void save_scene(const std::filesystem::path& path, const SceneFile& file) {
  write_file_atomic(path, scene_to_json(file));
}

SceneFile load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(fmt::format("{}: cannot open", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return scene_from_json(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const PreconditionError& e) {
    throw PreconditionError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace lightfit
