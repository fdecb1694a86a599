#pragma once

#include "lightfit/renderer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace lightfit {

/// Everything a scene file holds. Points are not stored: they are
/// recomputed from depth and camera on load.
struct SceneFile {
  Scene scene;
  DepthMap depth;
  /// Ground-truth lights, when known.
  std::optional<LightParams> lights;
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
};

/// JSON document:
///   format "lightfit-scene", version 1, width, height,
///   camera {fx, fy, cx, cy, rotation (3x3 rows), translation},
///   depth: rows of numbers, null where invalid,
///   normals (optional): rows of [x, y, z] or null; when absent they are
///   estimated with depth_to_cloud,
///   materials {diffuse, specular: number or rows, shininess},
///   lights (optional) [{position, intensity}], ambient, preset, seed.
/// Doubles are written with round-trip precision.
std::string scene_to_json(const SceneFile& file);

/// Throws ParseError naming the line/column or the JSON path of the bad
/// field, and PreconditionError naming the violated invariant.
SceneFile scene_from_json(std::string_view text);

void save_scene(const std::filesystem::path& path, const SceneFile& file);
SceneFile load_scene(const std::filesystem::path& path);

}  // namespace lightfit
