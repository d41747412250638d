#include "capr/scene_io.hpp"

#include <fstream>
#include <sstream>

namespace capr {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::parse, "scene " + where + ": " + what);
}

const json& field(const json& obj, const char* name, const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  auto it = obj.find(name);
  if (it == obj.end()) fail(where, std::string("missing field '") + name + "'");
  return *it;
}

double number(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_number()) fail(where + "/" + name, "expected a number");
  return v.get<double>();
}

Vec3 vec3(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 3) fail(where, "expected an array of 3 numbers");
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    if (!v[a].is_number()) fail(where + "/" + std::to_string(a), "expected a number");
    out[a] = v[a].get<double>();
  }
  return out;
}

Vec3 vec3_field(const json& obj, const char* name, const std::string& where) {
  return vec3(field(obj, name, where), where + "/" + name);
}

std::vector<Vec3> points_field(const json& obj, const char* name, const std::string& where) {
  const json& v = field(obj, name, where);
  if (!v.is_array()) fail(where + "/" + name, "expected an array of points");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(vec3(v[i], where + "/" + name + "/" + std::to_string(i)));
  return out;
}

json to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json to_json(const std::vector<Vec3>& pts) {
  json out = json::array();
  for (const auto& p : pts) out.push_back(to_json(p));
  return out;
}

std::vector<NodePtr> children_field(const json& obj, const std::string& where) {
  const json& v = field(obj, "children", where);
  if (!v.is_array()) fail(where + "/children", "expected an array");
  std::vector<NodePtr> out;
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(node_from_json(v[i], where + "/children/" + std::to_string(i)));
  return out;
}

template <class F>
NodePtr guarded(const std::string& where, F&& make) {
  try {
    return make();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::parse) throw;
    fail(where, e.what());
  }
}

}  // namespace

NodePtr node_from_json(const json& node, const std::string& where) {
  const json& t = field(node, "type", where);
  if (!t.is_string()) fail(where + "/type", "expected a string");
  const std::string type = t.get<std::string>();

  if (type == "ball")
    return guarded(where, [&] {
      return make_ball(vec3_field(node, "center", where), number(node, "radius", where));
    });
  if (type == "box")
    return guarded(where, [&] {
      return make_box(vec3_field(node, "lo", where), vec3_field(node, "hi", where));
    });
  if (type == "halfspace")
    return guarded(where, [&] {
      return make_halfspace(vec3_field(node, "normal", where), number(node, "offset", where));
    });
  if (type == "union")
    return guarded(where, [&] { return make_union(children_field(node, where)); });
  if (type == "intersection")
    return guarded(where, [&] { return make_intersection(children_field(node, where)); });
  if (type == "complement")
    return guarded(where, [&] {
      return make_complement(node_from_json(field(node, "child", where), where + "/child"));
    });
  if (type == "lattice_balls")
    return guarded(where, [&] {
      Vec3 offset = Vec3::Zero();
      if (node.contains("offset")) offset = vec3(node["offset"], where + "/offset");
      RadiusLaw law = RadiusLaw::constant;
      if (node.contains("radius_law")) {
        const json& l = node["radius_law"];
        if (l == "constant")
          law = RadiusLaw::constant;
        else if (l == "inverse_index_norm")
          law = RadiusLaw::inverse_index_norm;
        else
          fail(where + "/radius_law", "expected \"constant\" or \"inverse_index_norm\"");
      }
      return make_lattice_balls(number(node, "spacing", where), number(node, "radius", where),
                                number(node, "truncation", where), offset, law);
    });
  if (type == "punctures")
    return guarded(where, [&] {
      NodePtr child;
      if (node.contains("child")) child = node_from_json(node["child"], where + "/child");
      return make_punctures(child, points_field(node, "points", where));
    });
  if (type == "smooth_union")
    return guarded(where, [&] {
      auto children = children_field(node, where);
      if (children.size() != 2) fail(where + "/children", "smooth_union needs exactly 2 children");
      return make_smooth_union(children[0], children[1], number(node, "epsilon", where));
    });
  if (type == "envelope")
    return guarded(where, [&] {
      const json& r = field(node, "radii", where);
      if (!r.is_array()) fail(where + "/radii", "expected an array");
      std::vector<double> radii;
      for (const auto& v : r) {
        if (!v.is_number()) fail(where + "/radii", "expected numbers");
        radii.push_back(v.get<double>());
      }
      return make_envelope(points_field(node, "points", where), std::move(radii),
                           number(node, "kappa", where), number(node, "tau", where));
    });
  fail(where + "/type", "unknown node type '" + type + "'");
}

json node_to_json(const SceneNode& node) {
  json out;
  out["type"] = node.type_name();
  const auto& d = node.data();
  if (const auto* b = std::get_if<BallNode>(&d)) {
    out["center"] = to_json(b->center);
    out["radius"] = b->radius;
  } else if (const auto* b = std::get_if<BoxNode>(&d)) {
    out["lo"] = to_json(b->box.lo);
    out["hi"] = to_json(b->box.hi);
  } else if (const auto* h = std::get_if<HalfspaceNode>(&d)) {
    out["normal"] = to_json(h->normal);
    out["offset"] = h->offset;
  } else if (const auto* u = std::get_if<UnionNode>(&d)) {
    out["children"] = json::array();
    for (const auto& c : u->children) out["children"].push_back(node_to_json(*c));
  } else if (const auto* u = std::get_if<IntersectionNode>(&d)) {
    out["children"] = json::array();
    for (const auto& c : u->children) out["children"].push_back(node_to_json(*c));
  } else if (const auto* c = std::get_if<ComplementNode>(&d)) {
    out["child"] = node_to_json(*c->child);
  } else if (const auto* l = std::get_if<LatticeBallsNode>(&d)) {
    out["spacing"] = l->spacing;
    out["radius"] = l->radius;
    out["truncation"] = l->truncation;
    out["offset"] = to_json(l->offset);
    out["radius_law"] = l->law == RadiusLaw::constant ? "constant" : "inverse_index_norm";
  } else if (const auto* p = std::get_if<PuncturesNode>(&d)) {
    out["points"] = to_json(p->points);
    if (p->child) out["child"] = node_to_json(*p->child);
  } else if (const auto* s = std::get_if<SmoothUnionNode>(&d)) {
    out["children"] = json::array({node_to_json(*s->first), node_to_json(*s->second)});
    out["epsilon"] = s->epsilon;
  } else if (const auto* e = std::get_if<EnvelopeNode>(&d)) {
    out["points"] = to_json(e->points);
    out["radii"] = e->radii;
    out["kappa"] = e->kappa;
    out["tau"] = e->tau;
  }
  return out;
}

Scene scene_from_json(const json& doc) {
  if (!doc.is_object()) fail("", "document must be an object");
  if (doc.contains("schema")) {
    const json& s = doc["schema"];
    if (!s.is_number_integer() || s.get<int>() != kSceneSchemaVersion)
      fail("/schema", "unsupported schema version");
  }
  Scene scene;
  scene.dimension = 3;
  if (doc.contains("dimension")) {
    const json& n = doc["dimension"];
    if (!n.is_number_integer() || n.get<int>() < 3) fail("/dimension", "expected an integer >= 3");
    scene.dimension = n.get<int>();
  }
  const json& bb = field(doc, "bounding_box", "");
  scene.bounding_box = {vec3_field(bb, "lo", "/bounding_box"), vec3_field(bb, "hi", "/bounding_box")};
  if (scene.bounding_box.degenerate()) fail("/bounding_box", "box must have positive extent");
  scene.root = node_from_json(field(doc, "root", ""), "/root");
  return scene;
}

json scene_to_json(const Scene& scene) {
  json out;
  out["schema"] = kSceneSchemaVersion;
  out["dimension"] = scene.dimension;
  out["bounding_box"] = {{"lo", to_json(scene.bounding_box.lo)},
                         {"hi", to_json(scene.bounding_box.hi)}};
  out["root"] = node_to_json(*scene.root);
  return out;
}

Scene parse_scene(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, std::string("scene JSON: ") + e.what() +
                                      " (byte " + std::to_string(e.byte) + ")");
  }
  return scene_from_json(doc);
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::parse, "cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::precondition, "cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << "\n";
}

}  // namespace capr
