#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace capr {

using Vec3 = Eigen::Vector3d;
using Index3 = std::array<std::int64_t, 3>;

/// Failure categories. The CLI maps these onto exit codes.
enum class ErrorKind {
  precondition,
  parse,
  grid_too_coarse,
  empty_compact_set,
  singular_kernel,
  invalid_patch_radius,
  envelope_failed,
  m_too_small,
  certificate_failed,
  zero_oscillation,
  not_converged,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorKind::precondition, what);
}

/// Closed axis-aligned box.
struct AxisBox {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool empty() const { return (hi.array() < lo.array()).any(); }
  bool degenerate() const { return (hi.array() <= lo.array()).any(); }
  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }
  double volume() const {
    return empty() ? 0.0 : extent().prod();
  }
  bool contains(const Vec3& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
  AxisBox intersect(const AxisBox& o) const {
    return {lo.cwiseMax(o.lo), hi.cwiseMin(o.hi)};
  }
  AxisBox hull(const AxisBox& o) const {
    return {lo.cwiseMin(o.lo), hi.cwiseMax(o.hi)};
  }
  AxisBox inflated(double d) const {
    return {lo.array() - d, hi.array() + d};
  }
  bool operator==(const AxisBox& o) const { return lo == o.lo && hi == o.hi; }
};

constexpr double kPi = 3.14159265358979323846;

/// Default sampling seed shared by the CLI and library defaults.
constexpr std::uint64_t kDefaultSeed = 20240917;

}  // namespace capr
