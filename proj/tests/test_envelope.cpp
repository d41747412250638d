#include "capr/envelope.hpp"

#include <doctest.h>

using namespace capr;

TEST_CASE("envelope of the unit sphere") {
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 1.0), 500);
  EnvelopeOptions o;
  const EnvelopeResult e = smooth_envelope(K, 0.05, o);
  CHECK(e.cap_g <= e.cap_k + 0.05);
  CHECK(e.cap_g <= 1.05);
  CHECK(e.cap_g >= e.cap_k * 0.99);
  for (const Vec3& p : K.points()) CHECK(e.scene.contains(p));
}

TEST_CASE("envelope of a tiny ball") {
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 0.01), 300);
  const EnvelopeResult e = smooth_envelope(K, 0.005);
  CHECK(e.cap_g <= 0.01 * 1.03 + 0.005);
}

TEST_CASE("envelope needs a positive slack") {
  const CompactSample K = sample_compact(*make_ball(Vec3::Zero(), 1.0), 100);
  try {
    smooth_envelope(K, 0.0);
    FAIL("expected precondition");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::precondition);
  }
}
