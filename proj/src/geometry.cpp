#include "capr/geometry.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <unordered_map>

namespace capr {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::precondition: return "precondition";
    case ErrorKind::parse: return "parse";
    case ErrorKind::grid_too_coarse: return "grid too coarse";
    case ErrorKind::empty_compact_set: return "empty compact set";
    case ErrorKind::singular_kernel: return "singular kernel";
    case ErrorKind::invalid_patch_radius: return "invalid patch radius";
    case ErrorKind::envelope_failed: return "envelope failed";
    case ErrorKind::m_too_small: return "M too small";
    case ErrorKind::certificate_failed: return "certificate failed";
    case ErrorKind::zero_oscillation: return "invalid: zero oscillation";
    case ErrorKind::not_converged: return "not converged";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double box_sdf(const AxisBox& b, const Vec3& x) {
  const Vec3 half = 0.5 * b.extent();
  const Vec3 q = (x - b.center()).cwiseAbs() - half;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return outside + inside;
}

Index3 round_index(const Vec3& v) {
  return {std::llround(v.x()), std::llround(v.y()), std::llround(v.z())};
}

// Visits every lattice site within `window` index steps of the rounded position.
template <class F>
void for_lattice_window(const LatticeBallsNode& l, const Vec3& x, std::int64_t window,
                        F&& f) {
  const Index3 k0 = round_index((x - l.offset) / l.spacing);
  for (std::int64_t dk = -window; dk <= window; ++dk)
    for (std::int64_t dj = -window; dj <= window; ++dj)
      for (std::int64_t di = -window; di <= window; ++di) {
        const Index3 k{k0[0] + di, k0[1] + dj, k0[2] + dk};
        if (l.has_site(k)) f(k);
      }
}

std::int64_t lattice_window(const LatticeBallsNode& l) {
  return static_cast<std::int64_t>(std::ceil(l.radius / l.spacing)) + 1;
}

double bump(double t) { return t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0; }

double bump_derivative(double t) {
  if (t >= 1.0) return 0.0;
  const double one_minus = 1.0 - t * t;
  return bump(t) * (-2.0 * t / (one_minus * one_minus));
}

}  // namespace

double LatticeBallsNode::radius_at(const Index3& k) const {
  if (law == RadiusLaw::constant) return radius;
  const double norm = std::sqrt(double(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
  return radius / norm;
}

bool LatticeBallsNode::has_site(const Index3& k) const {
  if (law == RadiusLaw::inverse_index_norm && k[0] == 0 && k[1] == 0 && k[2] == 0)
    return false;
  const double dist = spacing * std::sqrt(double(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]));
  return dist <= truncation;
}

Vec3 LatticeBallsNode::site(const Index3& k) const {
  return offset + spacing * Vec3(double(k[0]), double(k[1]), double(k[2]));
}

struct SceneNode::EnvelopeIndex {
  double cell = 1.0;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets;

  static std::uint64_t key(std::int64_t i, std::int64_t j, std::int64_t k) {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return (u(i) << 42) | (u(j) << 21) | u(k);
  }
  Index3 cell_of(const Vec3& x) const {
    return {static_cast<std::int64_t>(std::floor(x.x() / cell)),
            static_cast<std::int64_t>(std::floor(x.y() / cell)),
            static_cast<std::int64_t>(std::floor(x.z() / cell))};
  }
};

SceneNode::SceneNode(Variant v) : data_(std::move(v)) {
  std::visit(
      overloaded{
          [](const BallNode& b) { require(b.radius > 0.0, "ball radius must be positive"); },
          [](const BoxNode& b) { require(!b.box.degenerate(), "box must have positive extent"); },
          [](const HalfspaceNode& h) {
            require(std::abs(h.normal.norm() - 1.0) < 1e-12, "half-space normal must be unit");
          },
          [](const UnionNode& u) {
            require(!u.children.empty(), "union needs children");
            for (const auto& c : u.children) require(c != nullptr, "null child");
          },
          [](const IntersectionNode& u) {
            require(!u.children.empty(), "intersection needs children");
            for (const auto& c : u.children) require(c != nullptr, "null child");
          },
          [](const ComplementNode& c) { require(c.child != nullptr, "complement needs a child"); },
          [](const LatticeBallsNode& l) {
            require(l.spacing > 0.0 && l.radius > 0.0 && l.truncation > 0.0,
                    "lattice_balls parameters must be positive");
          },
          [](const PuncturesNode& p) {
            require(p.child != nullptr || !p.points.empty(), "punctures need points or a child");
          },
          [](const SmoothUnionNode& s) {
            require(s.first && s.second, "smooth_union needs two children");
            require(s.epsilon > 0.0, "smooth_union epsilon must be positive");
          },
          [](const EnvelopeNode& e) {
            require(!e.points.empty(), "envelope needs points");
            require(e.points.size() == e.radii.size(), "envelope radii size mismatch");
            for (double r : e.radii) require(r > 0.0, "envelope radii must be positive");
            require(e.kappa > 0.0, "envelope kappa must be positive");
            require(e.tau > 0.0 && e.tau < 1.0, "envelope tau must lie in (0,1)");
          },
      },
      data_);

  if (const auto* e = std::get_if<EnvelopeNode>(&data_)) {
    auto index = std::make_shared<EnvelopeIndex>();
    index->cell = *std::max_element(e->radii.begin(), e->radii.end());
    for (std::size_t i = 0; i < e->points.size(); ++i) {
      const Index3 c = index->cell_of(e->points[i]);
      index->buckets[EnvelopeIndex::key(c[0], c[1], c[2])].push_back(i);
    }
    envelope_index_ = std::move(index);
  }
}

std::string SceneNode::type_name() const {
  return std::visit(overloaded{
                        [](const BallNode&) { return "ball"; },
                        [](const BoxNode&) { return "box"; },
                        [](const HalfspaceNode&) { return "halfspace"; },
                        [](const UnionNode&) { return "union"; },
                        [](const IntersectionNode&) { return "intersection"; },
                        [](const ComplementNode&) { return "complement"; },
                        [](const LatticeBallsNode&) { return "lattice_balls"; },
                        [](const PuncturesNode&) { return "punctures"; },
                        [](const SmoothUnionNode&) { return "smooth_union"; },
                        [](const EnvelopeNode&) { return "envelope"; },
                    },
                    data_);
}

double SceneNode::envelope_value(const Vec3& x, Vec3* grad) const {
  const auto* e = std::get_if<EnvelopeNode>(&data_);
  require(e != nullptr, "envelope_value needs an envelope node");
  Vec3 gu = Vec3::Zero();
  const double f = std::exp(-e->kappa * envelope_u(*e, x, grad ? &gu : nullptr));
  if (grad) *grad = -e->kappa * f * gu;
  return f;
}

double SceneNode::envelope_u(const EnvelopeNode& e, const Vec3& x, Vec3* grad) const {
  double u = 0.0;
  if (grad) grad->setZero();
  const Index3 c = envelope_index_->cell_of(x);
  for (std::int64_t dk = -1; dk <= 1; ++dk)
    for (std::int64_t dj = -1; dj <= 1; ++dj)
      for (std::int64_t di = -1; di <= 1; ++di) {
        const auto it = envelope_index_->buckets.find(
            EnvelopeIndex::key(c[0] + di, c[1] + dj, c[2] + dk));
        if (it == envelope_index_->buckets.end()) continue;
        for (std::size_t i : it->second) {
          const Vec3 d = x - e.points[i];
          const double r = d.norm();
          const double t = r / e.radii[i];
          if (t >= 1.0) continue;
          u += bump(t);
          if (grad && r > 0.0) *grad += bump_derivative(t) / e.radii[i] * d / r;
        }
      }
  return u;
}

double SceneNode::signed_distance(const Vec3& x) const {
  return std::visit(
      overloaded{
          [&](const BallNode& b) { return (x - b.center).norm() - b.radius; },
          [&](const BoxNode& b) { return box_sdf(b.box, x); },
          [&](const HalfspaceNode& h) { return h.normal.dot(x) - h.offset; },
          [&](const UnionNode& u) {
            double d = kInf;
            for (const auto& c : u.children) d = std::min(d, c->signed_distance(x));
            return d;
          },
          [&](const IntersectionNode& u) {
            double d = -kInf;
            for (const auto& c : u.children) d = std::max(d, c->signed_distance(x));
            return d;
          },
          [&](const ComplementNode& c) { return -c.child->signed_distance(x); },
          [&](const LatticeBallsNode& l) {
            const std::int64_t w = lattice_window(l);
            double d = kInf;
            for_lattice_window(l, x, w, [&](const Index3& k) {
              d = std::min(d, (x - l.site(k)).norm() - l.radius_at(k));
            });
            // Sites outside the window are at least this far away.
            const double beyond = (double(w) + 0.5) * l.spacing - l.radius;
            const double truncated = (x - l.offset).norm() - l.truncation - l.radius;
            return std::min(d, std::max(beyond, truncated));
          },
          [&](const PuncturesNode& p) {
            return p.child ? p.child->signed_distance(x) : kInf;
          },
          [&](const SmoothUnionNode& s) {
            return smooth_union_value(s.first->signed_distance(x),
                                      s.second->signed_distance(x), s.epsilon);
          },
          [&](const EnvelopeNode& e) {
            Vec3 g;
            const double u = envelope_u(e, x, &g);
            if (u <= 0.0) {
              double d = kInf;
              for (std::size_t i = 0; i < e.points.size(); ++i)
                d = std::min(d, (x - e.points[i]).norm() - e.radii[i]);
              return std::max(d, 0.0);
            }
            // Newton estimate of the distance to {f = tau}, f = exp(-kappa u).
            const double f = std::exp(-e.kappa * u);
            const double grad_f = e.kappa * f * g.norm();
            if (grad_f <= 0.0) return f < e.tau ? -e.radii.front() : e.radii.front();
            return (f - e.tau) / grad_f;
          },
      },
      data_);
}

bool SceneNode::contains(const Vec3& x, double tol) const {
  return std::visit(
      overloaded{
          [&](const BallNode& b) { return (x - b.center).norm() < b.radius; },
          [&](const BoxNode& b) {
            return (x.array() > b.box.lo.array()).all() && (x.array() < b.box.hi.array()).all();
          },
          [&](const HalfspaceNode& h) { return h.normal.dot(x) < h.offset; },
          [&](const UnionNode& u) {
            return std::any_of(u.children.begin(), u.children.end(),
                               [&](const NodePtr& c) { return c->contains(x, tol); });
          },
          [&](const IntersectionNode& u) {
            return std::all_of(u.children.begin(), u.children.end(),
                               [&](const NodePtr& c) { return c->contains(x, tol); });
          },
          [&](const ComplementNode& c) { return !c.child->closure_contains(x); },
          [&](const LatticeBallsNode& l) {
            bool in = false;
            for_lattice_window(l, x, lattice_window(l), [&](const Index3& k) {
              if ((x - l.site(k)).norm() < l.radius_at(k)) in = true;
            });
            return in;
          },
          [&](const PuncturesNode& p) {
            if (!p.child || !p.child->contains(x, tol)) return false;
            if (tol < 0.0) return true;
            return std::none_of(p.points.begin(), p.points.end(),
                                [&](const Vec3& q) { return (x - q).norm() <= tol; });
          },
          [&](const SmoothUnionNode&) { return signed_distance(x) < 0.0; },
          [&](const EnvelopeNode& e) {
            return std::exp(-e.kappa * envelope_u(e, x, nullptr)) < e.tau;
          },
      },
      data_);
}

bool SceneNode::closure_contains(const Vec3& x) const {
  return std::visit(
      overloaded{
          [&](const BallNode& b) { return (x - b.center).norm() <= b.radius; },
          [&](const BoxNode& b) { return b.box.contains(x); },
          [&](const HalfspaceNode& h) { return h.normal.dot(x) <= h.offset; },
          [&](const UnionNode& u) {
            return std::any_of(u.children.begin(), u.children.end(),
                               [&](const NodePtr& c) { return c->closure_contains(x); });
          },
          [&](const IntersectionNode& u) {
            return std::all_of(u.children.begin(), u.children.end(),
                               [&](const NodePtr& c) { return c->closure_contains(x); });
          },
          [&](const ComplementNode& c) { return !c.child->contains(x); },
          [&](const LatticeBallsNode& l) {
            bool in = false;
            for_lattice_window(l, x, lattice_window(l), [&](const Index3& k) {
              if ((x - l.site(k)).norm() <= l.radius_at(k)) in = true;
            });
            return in;
          },
          [&](const PuncturesNode& p) {
            if (p.child) return p.child->closure_contains(x);
            return std::any_of(p.points.begin(), p.points.end(),
                               [&](const Vec3& q) { return (x - q).norm() <= 1e-12; });
          },
          [&](const SmoothUnionNode&) { return signed_distance(x) <= 0.0; },
          [&](const EnvelopeNode& e) {
            return std::exp(-e.kappa * envelope_u(e, x, nullptr)) <= e.tau;
          },
      },
      data_);
}

std::optional<AxisBox> SceneNode::bounds() const {
  return std::visit(
      overloaded{
          [](const BallNode& b) -> std::optional<AxisBox> {
            return AxisBox{b.center.array() - b.radius, b.center.array() + b.radius};
          },
          [](const BoxNode& b) -> std::optional<AxisBox> { return b.box; },
          [](const HalfspaceNode&) -> std::optional<AxisBox> { return std::nullopt; },
          [](const UnionNode& u) -> std::optional<AxisBox> {
            std::optional<AxisBox> out;
            for (const auto& c : u.children) {
              auto b = c->bounds();
              if (!b) return std::nullopt;
              out = out ? out->hull(*b) : *b;
            }
            return out;
          },
          [](const IntersectionNode& u) -> std::optional<AxisBox> {
            std::optional<AxisBox> out;
            for (const auto& c : u.children) {
              auto b = c->bounds();
              if (!b) continue;
              out = out ? out->intersect(*b) : *b;
            }
            return out;
          },
          [](const ComplementNode&) -> std::optional<AxisBox> { return std::nullopt; },
          [](const LatticeBallsNode& l) -> std::optional<AxisBox> {
            const double reach = l.truncation + l.radius;
            return AxisBox{l.offset.array() - reach, l.offset.array() + reach};
          },
          [](const PuncturesNode& p) -> std::optional<AxisBox> {
            if (p.child) return p.child->bounds();
            AxisBox b{p.points.front(), p.points.front()};
            for (const auto& q : p.points) b = b.hull(AxisBox{q, q});
            return b;
          },
          [](const SmoothUnionNode& s) -> std::optional<AxisBox> {
            auto a = s.first->bounds();
            auto b = s.second->bounds();
            if (!a || !b) return std::nullopt;
            return a->hull(*b).inflated(s.epsilon);
          },
          [](const EnvelopeNode& e) -> std::optional<AxisBox> {
            AxisBox b{e.points.front(), e.points.front()};
            for (std::size_t i = 0; i < e.points.size(); ++i)
              b = b.hull(AxisBox{e.points[i].array() - e.radii[i], e.points[i].array() + e.radii[i]});
            return b;
          },
      },
      data_);
}

NodePtr SceneNode::transformed(double s, const Vec3& t) const {
  require(s > 0.0, "scale must be positive");
  const auto map_all = [&](const std::vector<NodePtr>& cs) {
    std::vector<NodePtr> out;
    out.reserve(cs.size());
    for (const auto& c : cs) out.push_back(c->transformed(s, t));
    return out;
  };
  return std::visit(
      overloaded{
          [&](const BallNode& b) { return make_ball(s * b.center + t, s * b.radius); },
          [&](const BoxNode& b) { return make_box(s * b.box.lo + t, s * b.box.hi + t); },
          [&](const HalfspaceNode& h) {
            return make_halfspace(h.normal, s * h.offset + h.normal.dot(t));
          },
          [&](const UnionNode& u) { return make_union(map_all(u.children)); },
          [&](const IntersectionNode& u) { return make_intersection(map_all(u.children)); },
          [&](const ComplementNode& c) { return make_complement(c.child->transformed(s, t)); },
          [&](const LatticeBallsNode& l) {
            return make_lattice_balls(s * l.spacing, s * l.radius, s * l.truncation,
                                      s * l.offset + t, l.law);
          },
          [&](const PuncturesNode& p) {
            std::vector<Vec3> pts;
            for (const auto& q : p.points) pts.push_back(s * q + t);
            return make_punctures(p.child ? p.child->transformed(s, t) : nullptr, std::move(pts));
          },
          [&](const SmoothUnionNode& u) {
            return make_smooth_union(u.first->transformed(s, t), u.second->transformed(s, t),
                                     s * u.epsilon);
          },
          [&](const EnvelopeNode& e) {
            std::vector<Vec3> pts;
            std::vector<double> radii;
            for (std::size_t i = 0; i < e.points.size(); ++i) {
              pts.push_back(s * e.points[i] + t);
              radii.push_back(s * e.radii[i]);
            }
            return make_envelope(std::move(pts), std::move(radii), e.kappa, e.tau);
          },
      },
      data_);
}

void SceneNode::collect_punctures(std::vector<Vec3>& out) const {
  std::visit(overloaded{
                 [&](const UnionNode& u) {
                   for (const auto& c : u.children) c->collect_punctures(out);
                 },
                 [&](const IntersectionNode& u) {
                   for (const auto& c : u.children) c->collect_punctures(out);
                 },
                 [&](const ComplementNode& c) { c.child->collect_punctures(out); },
                 [&](const PuncturesNode& p) {
                   out.insert(out.end(), p.points.begin(), p.points.end());
                   if (p.child) p.child->collect_punctures(out);
                 },
                 [&](const SmoothUnionNode& s) {
                   s.first->collect_punctures(out);
                   s.second->collect_punctures(out);
                 },
                 [](const auto&) {},
             },
             data_);
}

namespace {

bool same_children(const std::vector<NodePtr>& a, const std::vector<NodePtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(*a[i] == *b[i])) return false;
  return true;
}

bool same_ptr(const NodePtr& a, const NodePtr& b) {
  if (!a || !b) return a == b;
  return *a == *b;
}

}  // namespace

bool SceneNode::operator==(const SceneNode& other) const {
  if (data_.index() != other.data_.index()) return false;
  return std::visit(
      overloaded{
          [&](const BallNode& a) {
            const auto& b = std::get<BallNode>(other.data_);
            return a.center == b.center && a.radius == b.radius;
          },
          [&](const BoxNode& a) { return a.box == std::get<BoxNode>(other.data_).box; },
          [&](const HalfspaceNode& a) {
            const auto& b = std::get<HalfspaceNode>(other.data_);
            return a.normal == b.normal && a.offset == b.offset;
          },
          [&](const UnionNode& a) {
            return same_children(a.children, std::get<UnionNode>(other.data_).children);
          },
          [&](const IntersectionNode& a) {
            return same_children(a.children, std::get<IntersectionNode>(other.data_).children);
          },
          [&](const ComplementNode& a) {
            return same_ptr(a.child, std::get<ComplementNode>(other.data_).child);
          },
          [&](const LatticeBallsNode& a) {
            const auto& b = std::get<LatticeBallsNode>(other.data_);
            return a.spacing == b.spacing && a.radius == b.radius &&
                   a.truncation == b.truncation && a.offset == b.offset && a.law == b.law;
          },
          [&](const PuncturesNode& a) {
            const auto& b = std::get<PuncturesNode>(other.data_);
            return same_ptr(a.child, b.child) && a.points == b.points;
          },
          [&](const SmoothUnionNode& a) {
            const auto& b = std::get<SmoothUnionNode>(other.data_);
            return same_ptr(a.first, b.first) && same_ptr(a.second, b.second) &&
                   a.epsilon == b.epsilon;
          },
          [&](const EnvelopeNode& a) {
            const auto& b = std::get<EnvelopeNode>(other.data_);
            return a.points == b.points && a.radii == b.radii && a.kappa == b.kappa &&
                   a.tau == b.tau;
          },
      },
      data_);
}

NodePtr make_ball(const Vec3& center, double radius) {
  return std::make_shared<const SceneNode>(BallNode{center, radius});
}
NodePtr make_box(const Vec3& lo, const Vec3& hi) {
  return std::make_shared<const SceneNode>(BoxNode{AxisBox{lo, hi}});
}
NodePtr make_halfspace(const Vec3& normal, double offset) {
  const double len = normal.norm();
  require(len > 0.0, "half-space normal must be nonzero");
  // Leave already-unit normals untouched so serialization round-trips bit-exactly.
  if (std::abs(len - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon())
    return std::make_shared<const SceneNode>(HalfspaceNode{normal, offset});
  return std::make_shared<const SceneNode>(HalfspaceNode{normal / len, offset / len});
}
NodePtr make_union(std::vector<NodePtr> children) {
  return std::make_shared<const SceneNode>(UnionNode{std::move(children)});
}
NodePtr make_intersection(std::vector<NodePtr> children) {
  return std::make_shared<const SceneNode>(IntersectionNode{std::move(children)});
}
NodePtr make_complement(NodePtr child) {
  return std::make_shared<const SceneNode>(ComplementNode{std::move(child)});
}
NodePtr make_lattice_balls(double spacing, double radius, double truncation,
                           const Vec3& offset, RadiusLaw law) {
  return std::make_shared<const SceneNode>(
      LatticeBallsNode{spacing, radius, truncation, offset, law});
}
NodePtr make_punctures(NodePtr child, std::vector<Vec3> points) {
  return std::make_shared<const SceneNode>(PuncturesNode{std::move(child), std::move(points)});
}
NodePtr make_smooth_union(NodePtr first, NodePtr second, double epsilon) {
  return std::make_shared<const SceneNode>(
      SmoothUnionNode{std::move(first), std::move(second), epsilon});
}
NodePtr make_envelope(std::vector<Vec3> points, std::vector<double> radii, double kappa,
                      double tau) {
  return std::make_shared<const SceneNode>(
      EnvelopeNode{std::move(points), std::move(radii), kappa, tau});
}

std::vector<Vec3> Scene::punctures() const {
  std::vector<Vec3> out;
  root->collect_punctures(out);
  return out;
}

Scene Scene::transformed(double scale, const Vec3& shift) const {
  require(scale > 0.0, "scale must be positive");
  Scene out;
  out.dimension = dimension;
  out.bounding_box = {scale * bounding_box.lo + shift, scale * bounding_box.hi + shift};
  out.root = root->transformed(scale, shift);
  return out;
}

// ---------------------------------------------------------------------------
// Grid

Vec3 Grid::point(std::size_t linear_index) const {
  const auto n = static_cast<std::int64_t>(linear_index);
  const std::int64_t i = n % dims[0];
  const std::int64_t j = (n / dims[0]) % dims[1];
  const std::int64_t k = n / (dims[0] * dims[1]);
  return point(i, j, k);
}

std::size_t Grid::interior_count() const {
  return static_cast<std::size_t>(std::count(interior.begin(), interior.end(), 1));
}

Grid build_grid(const Scene& scene, double h) {
  require(h > 0.0, "grid spacing must be positive");
  require(!scene.bounding_box.degenerate(), "bounding box is degenerate");
  require(scene.dimension == 3, "grid operations support n = 3 only");

  Grid g;
  g.scene = scene;
  g.h = h;
  for (int a = 0; a < 3; ++a) {
    const auto lo = static_cast<std::int64_t>(std::floor(scene.bounding_box.lo[a] / h)) + 1;
    const auto hi = static_cast<std::int64_t>(std::ceil(scene.bounding_box.hi[a] / h)) - 1;
    g.first[a] = lo;
    g.dims[a] = std::max<std::int64_t>(hi - lo + 1, 0);
  }
  const std::size_t n = g.node_count();
  g.interior.assign(n, 0);
  g.punctured.assign(n, 0);
  const double puncture_tol = 1e-6 * h;
  for (std::int64_t k = 0; k < g.dims[2]; ++k)
    for (std::int64_t j = 0; j < g.dims[1]; ++j)
      for (std::int64_t i = 0; i < g.dims[0]; ++i) {
        const Vec3 x = g.point(i, j, k);
        if (!scene.bounding_box.contains(x)) continue;
        if (!scene.root->contains(x, -1.0)) continue;
        const std::size_t idx = g.linear(i, j, k);
        if (scene.root->contains(x, puncture_tol))
          g.interior[idx] = 1;
        else
          g.punctured[idx] = 1;
      }
  if (g.interior_count() < 8)
    throw Error(ErrorKind::grid_too_coarse,
                "grid too coarse: " + std::to_string(g.interior_count()) + " interior nodes");
  return g;
}

// ---------------------------------------------------------------------------
// CompactSample

namespace {

std::vector<double> nearest_neighbour_distance(const std::vector<Vec3>& pts) {
  const std::size_t n = pts.size();
  std::vector<double> nn(n, kInf);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (pts[i] - pts[j]).norm();
      nn[i] = std::min(nn[i], d);
      nn[j] = std::min(nn[j], d);
    }
  return nn;
}

}  // namespace

CompactSample::CompactSample(std::vector<Vec3> points, std::vector<double> patch_radius,
                             std::string source)
    : points_(std::move(points)), radius_(std::move(patch_radius)), source_(std::move(source)) {
  require(points_.size() == radius_.size(), "patch radius count mismatch");
  const auto nn = nearest_neighbour_distance(points_);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(radius_[i] > 0.0))
      throw Error(ErrorKind::invalid_patch_radius, "invalid patch radius");
    require(nn[i] > 0.0, "sample points must be pairwise distinct");
    if (radius_[i] > 0.5 * nn[i] * (1.0 + 1e-12))
      throw Error(ErrorKind::invalid_patch_radius,
                  "patch radius exceeds half the nearest-neighbour distance");
  }
}

CompactSample CompactSample::with_default_radii(std::vector<Vec3> points, double feature_size,
                                                std::string source) {
  require(feature_size > 0.0, "feature size must be positive");
  const auto nn = nearest_neighbour_distance(points);
  std::vector<double> radii(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) radii[i] = std::min(0.5 * nn[i], feature_size);
  return CompactSample(std::move(points), std::move(radii), std::move(source));
}

double CompactSample::max_patch_radius() const {
  return radius_.empty() ? 0.0 : *std::max_element(radius_.begin(), radius_.end());
}

CompactSample CompactSample::transformed(double scale, const Vec3& shift) const {
  require(scale > 0.0, "scale must be positive");
  CompactSample out;
  out.points_.reserve(points_.size());
  for (const auto& p : points_) out.points_.push_back(scale * p + shift);
  out.radius_.reserve(radius_.size());
  for (double a : radius_) out.radius_.push_back(scale * a);
  out.source_ = source_;
  return out;
}

CompactSample CompactSample::merged(const std::vector<CompactSample>& parts, std::string source) {
  std::vector<Vec3> pts;
  std::vector<double> radii;
  for (const auto& part : parts)
    for (std::size_t i = 0; i < part.size(); ++i) {
      const Vec3& p = part.points()[i];
      const bool duplicate = std::any_of(pts.begin(), pts.end(), [&](const Vec3& q) {
        return (p - q).norm() <= 1e-12 * (1.0 + p.norm());
      });
      if (duplicate) continue;
      pts.push_back(p);
      radii.push_back(part.patch_radius()[i]);
    }
  const auto nn = nearest_neighbour_distance(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) radii[i] = std::min(radii[i], 0.5 * nn[i]);
  return CompactSample(std::move(pts), std::move(radii), std::move(source));
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Vec3> sphere_points(const Vec3& center, double radius, int count,
                                std::uint64_t seed) {
  require(count >= 1, "sphere sample needs at least one point");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  // Uniform random rotation (Shoemake).
  const double u1 = unif(rng), u2 = unif(rng), u3 = unif(rng);
  const Eigen::Quaterniond q(std::sqrt(u1) * std::cos(2 * kPi * u3),
                             std::sqrt(1 - u1) * std::sin(2 * kPi * u2),
                             std::sqrt(1 - u1) * std::cos(2 * kPi * u2),
                             std::sqrt(u1) * std::sin(2 * kPi * u3));
  const Eigen::Matrix3d rot = q.normalized().toRotationMatrix();
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> pts;
  pts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double theta = golden * i;
    const Vec3 u(r * std::cos(theta), r * std::sin(theta), z);
    pts.push_back(center + radius * (rot * u));
  }
  return pts;
}

Vec3 numerical_gradient(const std::function<double(const Vec3&)>& f, const Vec3& x,
                        double step) {
  Vec3 g;
  for (int a = 0; a < 3; ++a) {
    Vec3 e = Vec3::Zero();
    e[a] = step;
    g[a] = (f(x + e) - f(x - e)) / (2.0 * step);
  }
  return g;
}

namespace {

struct PointHash {
  double cell;
  std::unordered_map<std::uint64_t, std::vector<Vec3>> buckets;

  std::uint64_t key(const Index3& c) const {
    const auto u = [](std::int64_t v) { return static_cast<std::uint64_t>(v + (1 << 20)) & 0x1fffff; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }
  Index3 cell_of(const Vec3& x) const {
    return {static_cast<std::int64_t>(std::floor(x.x() / cell)),
            static_cast<std::int64_t>(std::floor(x.y() / cell)),
            static_cast<std::int64_t>(std::floor(x.z() / cell))};
  }
  // Inserts x unless a stored point lies within `cell`.
  bool insert_if_separated(const Vec3& x) {
    const Index3 c = cell_of(x);
    for (std::int64_t dk = -1; dk <= 1; ++dk)
      for (std::int64_t dj = -1; dj <= 1; ++dj)
        for (std::int64_t di = -1; di <= 1; ++di) {
          auto it = buckets.find(key({c[0] + di, c[1] + dj, c[2] + dk}));
          if (it == buckets.end()) continue;
          for (const auto& q : it->second)
            if ((q - x).norm() < cell) return false;
        }
    buckets[key(c)].push_back(x);
    return true;
  }
};

std::vector<Vec3> projected_surface_points(const SceneNode& region, const AxisBox& box, double s,
                                           const Vec3& jitter, std::size_t* in_band = nullptr) {
  const auto sdf = [&](const Vec3& x) { return region.signed_distance(x); };
  std::array<std::int64_t, 3> n{};
  for (int a = 0; a < 3; ++a)
    n[a] = static_cast<std::int64_t>(std::ceil(box.extent()[a] / s)) + 1;
  const double band = 0.87 * s;
  const double accept = 1e-7 * s;
  const AxisBox allowed = box.inflated(s);
  PointHash hash{0.5 * s, {}};
  std::vector<Vec3> out;
  for (std::int64_t k = 0; k < n[2]; ++k)
    for (std::int64_t j = 0; j < n[1]; ++j)
      for (std::int64_t i = 0; i < n[0]; ++i) {
        const Vec3 p = box.lo + s * (Vec3(double(i), double(j), double(k)) + jitter - Vec3::Constant(0.5));
        const double d0 = sdf(p);
        if (!std::isfinite(d0) || std::abs(d0) > band) continue;
        if (in_band) ++*in_band;
        Vec3 q = p;
        double d = d0;
        for (int it = 0; it < 12 && std::abs(d) > 1e-3 * accept; ++it) {
          const Vec3 g = numerical_gradient(sdf, q, 1e-4 * s);
          const double g2 = g.squaredNorm();
          if (!(g2 > 1e-12)) break;
          q -= d * g / g2;
          d = sdf(q);
          if (!std::isfinite(d)) break;
        }
        if (!std::isfinite(d) || std::abs(d) > accept) continue;
        if ((q - p).norm() > 2.0 * s || !allowed.contains(q)) continue;
        if (hash.insert_if_separated(q)) out.push_back(q);
      }
  return out;
}

AxisBox point_bounds(const std::vector<Vec3>& pts) {
  AxisBox b{pts.front(), pts.front()};
  for (const auto& p : pts) b = b.hull(AxisBox{p, p});
  return b;
}

constexpr double kMaxSurfaceNodes = 4.0e6;

CompactSample sample_generic(const SceneNode& region, int budget, const SampleOptions& opt) {
  std::optional<AxisBox> bounds = region.bounds();
  if (opt.clip) bounds = bounds ? bounds->intersect(*opt.clip) : *opt.clip;
  require(bounds.has_value(), "unbounded region needs a clip box");
  if (bounds->empty()) throw Error(ErrorKind::empty_compact_set, "empty compact set");

  const AxisBox outer = *bounds;
  const double extent = std::max(outer.extent().maxCoeff(), 1e-300);
  const double min_spacing = opt.min_spacing > 0.0 ? opt.min_spacing : 1e-4 * extent;

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vec3 jitter(unif(rng), unif(rng), unif(rng));

  const double target = 0.85 * budget;
  const Vec3 e = outer.extent().cwiseMax(1e-12 * extent);
  const double area = 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
  double s = std::max(std::sqrt(area / target), min_spacing);

  AxisBox box = outer;
  std::vector<Vec3> surface;
  const auto nodes_at = [&](double spacing) {
    return (box.extent() / spacing).array().ceil().prod();
  };
  for (int pass = 0; pass < 8; ++pass) {
    std::size_t in_band = 0;
    surface = projected_surface_points(region, box, s, jitter, &in_band);
    if (surface.empty()) {
      // No node near the zero level: the region is empty at every finer spacing too.
      if (in_band == 0 || s <= min_spacing) break;
      s = std::max(0.25 * s, min_spacing);
      if (nodes_at(s) > kMaxSurfaceNodes) break;
      continue;
    }
    const double ratio = double(surface.size()) / target;
    if (ratio >= 0.6 && ratio <= 1.0) break;
    box = point_bounds(surface).inflated(s).intersect(outer);
    const double next = std::max(s * std::clamp(std::sqrt(ratio), 0.25, 4.0), min_spacing);
    if (next == s) break;
    s = next;
  }
  if (surface.empty()) throw Error(ErrorKind::empty_compact_set, "empty compact set");

  if (surface.size() > static_cast<std::size_t>(budget)) {
    std::vector<Vec3> thinned;
    const double stride = double(surface.size()) / budget;
    for (int i = 0; i < budget; ++i) thinned.push_back(surface[static_cast<std::size_t>(i * stride)]);
    surface = std::move(thinned);
  }

  // Sparse body fill well inside the region.
  std::vector<Vec3> body;
  const std::size_t body_cap =
      std::min<std::size_t>(budget / 8, budget - std::min<std::size_t>(budget, surface.size()));
  if (body_cap > 0) {
    const double sb = 2.0 * s;
    std::array<std::int64_t, 3> n{};
    for (int a = 0; a < 3; ++a)
      n[a] = static_cast<std::int64_t>(std::ceil(box.extent()[a] / sb)) + 1;
    for (std::int64_t k = 0; k < n[2]; ++k)
      for (std::int64_t j = 0; j < n[1]; ++j)
        for (std::int64_t i = 0; i < n[0]; ++i) {
          const Vec3 p = box.lo + sb * (Vec3(double(i), double(j), double(k)) + jitter);
          if (region.signed_distance(p) <= -s) body.push_back(p);
        }
    if (body.size() > body_cap) {
      std::vector<Vec3> thinned;
      const double stride = double(body.size()) / body_cap;
      for (std::size_t i = 0; i < body_cap; ++i)
        thinned.push_back(body[static_cast<std::size_t>(i * stride)]);
      body = std::move(thinned);
    }
  }

  std::vector<Vec3> pts = std::move(surface);
  pts.insert(pts.end(), body.begin(), body.end());
  const AxisBox pb = point_bounds(pts);
  const double feature = std::max(0.5 * pb.extent().norm(), 0.25 * s);
  return CompactSample::with_default_radii(std::move(pts), feature, region.type_name());
}

}  // namespace

CompactSample sample_compact(const SceneNode& region, int budget, const SampleOptions& options) {
  require(budget >= 2, "sample budget must be at least 2");
  if (const auto* b = std::get_if<BallNode>(&region.data())) {
    const AxisBox bb{b->center.array() - b->radius, b->center.array() + b->radius};
    if (!options.clip || (options.clip->contains(bb.lo) && options.clip->contains(bb.hi))) {
      auto pts = sphere_points(b->center, b->radius, budget, options.seed);
      return CompactSample::with_default_radii(std::move(pts), b->radius, "ball");
    }
  }
  if (const auto* p = std::get_if<PuncturesNode>(&region.data()); p && !p->child)
    throw Error(ErrorKind::empty_compact_set, "empty compact set");
  return sample_generic(region, budget, options);
}

// ---------------------------------------------------------------------------
// Smooth union

double chi(double t, double eps) {
  const double e2 = eps * eps;
  if (t <= 0.0) return 1.0;
  if (t >= e2) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - t / e2));
}

double smooth_union_value(double r1, double r2, double eps) {
  const double d = r1 - r2;
  const double t = d * d;
  return 0.5 * (r1 + r2 - std::sqrt(t + eps * eps * chi(t, eps)));
}

double smooth_union(const DefiningFunctionPair& pair, const Vec3& x) {
  return smooth_union_value(pair.r1(x), pair.r2(x), pair.epsilon);
}

TransversalityReport check_transversality(const DefiningFunctionPair& pair,
                                          const AxisBox& region, int resolution,
                                          double threshold) {
  require(resolution >= 2, "resolution must be at least 2");
  TransversalityReport rep;
  rep.min_cross = kInf;
  const double s = region.extent().maxCoeff() / resolution;
  const double step = 1e-5 * s;
  for (int k = 0; k <= resolution; ++k)
    for (int j = 0; j <= resolution; ++j)
      for (int i = 0; i <= resolution; ++i) {
        Vec3 q = region.lo + s * Vec3(i, j, k);
        if (std::abs(pair.r1(q)) > s || std::abs(pair.r2(q)) > s) continue;
        bool ok = false;
        for (int it = 0; it < 30; ++it) {
          for (const auto* f : {&pair.r1, &pair.r2}) {
            const Vec3 g = numerical_gradient(*f, q, step);
            if (g.squaredNorm() < 1e-24) break;
            q -= (*f)(q)*g / g.squaredNorm();
          }
          if (std::abs(pair.r1(q)) < 1e-10 * s && std::abs(pair.r2(q)) < 1e-10 * s) {
            ok = true;
            break;
          }
        }
        if (!ok) continue;
        const Vec3 g1 = numerical_gradient(pair.r1, q, step).normalized();
        const Vec3 g2 = numerical_gradient(pair.r2, q, step).normalized();
        rep.min_cross = std::min(rep.min_cross, g1.cross(g2).norm());
        ++rep.samples;
      }
  if (rep.samples == 0) rep.min_cross = 0.0;
  rep.near_tangent = rep.samples > 0 && rep.min_cross < threshold;
  return rep;
}

AxisBox lattice_cube(double M, const Index3& m) {
  require(M > 0.0, "M must be positive");
  const Vec3 c = 2.0 * M * Vec3(double(m[0]), double(m[1]), double(m[2]));
  return {c.array() - M, c.array() + M};
}

Index3 cube_index(double M, const Vec3& x) { return round_index(x / (2.0 * M)); }

}  // namespace capr
