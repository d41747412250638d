#pragma once

#include "capr/geometry.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace capr {

/// Scene file schema version written by `scene_to_json`.
constexpr int kSceneSchemaVersion = 1;

/// Scene document:
///
///   { "schema": 1, "dimension": 3,
///     "bounding_box": { "lo": [x, y, z], "hi": [x, y, z] },
///     "root": <node> }
///
/// Node objects carry a "type" plus parameters:
///   ball          center[3], radius
///   box           lo[3], hi[3]
///   halfspace     normal[3], offset               ({x : normal.x < offset})
///   union         children[]
///   intersection  children[]
///   complement    child
///   lattice_balls spacing, radius, truncation, offset[3]?, radius_law?
///                 ("constant" | "inverse_index_norm")
///   punctures     points[][3], child?
///   smooth_union  children[2], epsilon
///   envelope      points[][3], radii[], kappa, tau
///
/// Errors are reported as ErrorKind::parse with a JSON-pointer location.
Scene scene_from_json(const nlohmann::json& doc);
nlohmann::json scene_to_json(const Scene& scene);

NodePtr node_from_json(const nlohmann::json& node, const std::string& where = "/root");
nlohmann::json node_to_json(const SceneNode& node);

Scene parse_scene(const std::string& text);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

}  // namespace capr
