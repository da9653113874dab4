#include "support.hpp"

using namespace lieflow;
using namespace lieflow::testing;

TEST(Catalog, UnknownNameRejected) {
  EXPECT_ERRC(make_group("SU2"), Errc::unknown_group);
  EXPECT_ERRC(make_group("Rn", 0), Errc::invalid_input);
}

TEST(Catalog, ClassFlags) {
  const auto& h = chart("Heisenberg3")->flags();
  EXPECT_TRUE(h.nilpotent && h.solvable && h.simply_connected);
  EXPECT_FALSE(h.abelian || h.compact || h.semisimple);
  const auto& so3 = chart("SO3")->flags();
  EXPECT_TRUE(so3.compact && so3.semisimple);
  EXPECT_FALSE(so3.solvable || so3.simply_connected);
  const auto& sl2 = chart("SL2")->flags();
  EXPECT_TRUE(sl2.semisimple);
  EXPECT_FALSE(sl2.compact || sl2.solvable);
  const auto& aff = chart("AffPlus")->flags();
  EXPECT_TRUE(aff.solvable && aff.simply_connected);
  EXPECT_FALSE(aff.nilpotent);
  const auto& rn = chart("Rn", 3)->flags();
  EXPECT_TRUE(rn.abelian && rn.nilpotent && rn.simply_connected);
  const auto& gl = chart("GLnPlus", 2)->flags();
  EXPECT_FALSE(gl.solvable || gl.semisimple || gl.compact);
}

TEST(Catalog, SubgroupData) {
  const auto& h = chart("Heisenberg3")->subgroups();
  ASSERT_EQ(h.lower_central_series.size(), 3u);
  EXPECT_EQ(h.lower_central_series[1].dim(), 1);
  EXPECT_EQ(h.derived_algebra.dim(), 1);
  EXPECT_EQ(h.nilradical_algebra.dim(), 3);
  const auto& aff = chart("AffPlus")->subgroups();
  EXPECT_EQ(aff.derived_algebra.dim(), 1);
  EXPECT_EQ(aff.nilradical_algebra.dim(), 1);
  EXPECT_LT(aff.nilradical_algebra.residual(chart("AffPlus")->algebra().basis(1)), 1e-14);
  EXPECT_EQ(chart("SO3")->subgroups().derived_algebra.dim(), 3);
  EXPECT_EQ(chart("Rn", 2)->subgroups().derived_algebra.dim(), 0);
  EXPECT_EQ(chart("GLnPlus", 2)->subgroups().derived_algebra.dim(), 3);
}

TEST(Catalog, SubgroupAlgebrasAreClosed) {
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const auto& s = c->subgroups();
    EXPECT_LT(closure_residual(c->algebra(), s.derived_algebra), 1e-12) << name;
    EXPECT_LT(closure_residual(c->algebra(), s.nilradical_algebra), 1e-12) << name;
    if (s.radical_algebra) {
      EXPECT_LT(closure_residual(c->algebra(), *s.radical_algebra), 1e-12) << name;
    }
  }
}

TEST(Heisenberg, ProductLaw) {
  const auto c = chart("Heisenberg3");
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Vector p = rng.normal_vector(3), q = rng.normal_vector(3);
    const GroupElement g = GroupChart::heisenberg(p(0), p(1), p(2));
    const GroupElement h = GroupChart::heisenberg(q(0), q(1), q(2));
    const Vector prod = GroupChart::heisenberg_coords(c->mul(g, h));
    EXPECT_NEAR(prod(0), p(0) + q(0), 1e-14);
    EXPECT_NEAR(prod(1), p(1) + q(1), 1e-14);
    EXPECT_NEAR(prod(2), p(2) + q(2) + p(0) * q(1), 1e-14);
  }
}

TEST(Heisenberg, ExponentialCoordinates) {
  const auto c = chart("Heisenberg3");
  const Vector coords = GroupChart::heisenberg_coords(c->exp(xyz(2, 3, 5)));
  EXPECT_LT((coords - xyz(2, 3, 5 + 3)).norm(), 1e-14);
  EXPECT_LT((c->log(GroupChart::heisenberg(2, 3, 8)) - xyz(2, 3, 5)).norm(), 1e-14);
}

TEST(Group, IdentityAndInverse) {
  Rng rng(2);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    for (int k = 0; k < 20; ++k) {
      const GroupElement g = random_element(*c, rng, 1.5);
      EXPECT_LT(diff(c->mul(g, c->inv(g)), c->identity()), 1e-12) << name;
      EXPECT_LT(diff(c->mul(c->inv(g), g), c->identity()), 1e-12) << name;
      EXPECT_LT(diff(c->mul(c->identity(), g), g), 1e-15) << name;
    }
  }
}

TEST(Group, Associativity) {
  Rng rng(3);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const GroupElement a = random_element(*c, rng), b = random_element(*c, rng), d = random_element(*c, rng);
    EXPECT_LT(diff(c->mul(c->mul(a, b), d), c->mul(a, c->mul(b, d))), 1e-12) << name;
  }
}

TEST(Group, ExpOfZeroIsIdentity) {
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    EXPECT_EQ(diff(c->exp(Vector::Zero(c->dim())), c->identity()), 0.0) << name;
  }
}

TEST(Group, ExpLogRoundTrip) {
  Rng rng(4);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const double radius = c->flags().simply_connected && c->kind() != GroupKind::GLnPlus ? 3.0 : 0.5;
    for (int k = 0; k < 50; ++k) {
      const Vector a = rng.in_ball(c->dim(), radius);
      EXPECT_LT((c->log(c->exp(a)) - a).norm(), 1e-10) << name;
      const GroupElement g = c->exp(a);
      EXPECT_LT(diff(c->exp(c->log(g)), g), 1e-10) << name;
    }
  }
}

TEST(Group, ExpIsOneParameterSubgroup) {
  Rng rng(5);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const Vector a = rng.normal_vector(c->dim());
    EXPECT_LT(diff(c->mul(c->exp(0.3 * a), c->exp(0.5 * a)), c->exp(0.8 * a)), 1e-12) << name;
  }
}

TEST(So3, HalfTurnOutsideLogDomain) {
  const auto c = chart("SO3");
  const GroupElement half = c->exp(xyz(M_PI, 0, 0));
  Matrix expected = Matrix::Identity(3, 3);
  expected(1, 1) = expected(2, 2) = -1.0;
  EXPECT_LT(diff(half, {expected}), 1e-13);
  EXPECT_ERRC(c->log(half), Errc::log_domain);
}

TEST(So3, LogAgainstAxisAngle) {
  const auto c = chart("SO3");
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    const Vector axis = rng.unit_vector(3);
    const double theta = rng.uniform(0.01, 3.0);
    // Rodrigues oracle independent of the library exp.
    Matrix kx(3, 3);
    kx << 0, -axis(2), axis(1), axis(2), 0, -axis(0), -axis(1), axis(0), 0;
    const Matrix r = Matrix::Identity(3, 3) + std::sin(theta) * kx + (1 - std::cos(theta)) * kx * kx;
    EXPECT_LT((c->log({r}) - theta * axis).norm(), 1e-10);
  }
}

TEST(Distance, BiInvariantOnSo3) {
  const auto c = chart("SO3");
  EXPECT_EQ(c->metric(), MetricKind::bi_invariant);
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    const GroupElement g = random_element(*c, rng, 1.0), h = random_element(*c, rng, 1.0);
    const GroupElement a = random_element(*c, rng, 3.0);
    const double d = c->distance(g, h).value;
    EXPECT_NEAR(c->distance(c->mul(a, g), c->mul(a, h)).value, d, 1e-9);
    EXPECT_NEAR(c->distance(c->mul(g, a), c->mul(h, a)).value, d, 1e-9);
    EXPECT_NEAR(c->distance(h, g).value, d, 1e-12);
  }
  EXPECT_EQ(c->distance(c->identity(), c->identity()).value, 0.0);
  EXPECT_NEAR(c->distance(c->identity(), c->exp(xyz(0, 1.2, 0))).value, 1.2, 1e-12);
}

TEST(Distance, FallbackNearHalfTurn) {
  const auto c = chart("SO3");
  const Distance d = c->distance(c->identity(), c->exp(xyz(0, 0, M_PI)));
  EXPECT_TRUE(d.frobenius_fallback);
  EXPECT_NEAR(d.value, std::sqrt(8.0), 1e-12);
}

TEST(Distance, FrobeniusOnNoncompactCharts) {
  const auto c = chart("SL2");
  EXPECT_EQ(c->metric(), MetricKind::chart_frobenius);
  Rng rng(8);
  const GroupElement g = random_element(*c, rng), h = random_element(*c, rng);
  EXPECT_NEAR(c->distance(g, h).value, (g.matrix - h.matrix).norm(), 1e-15);
  EXPECT_NEAR(c->distance(g, h).value, c->distance(h, g).value, 1e-15);
}

TEST(Membership, CatalogElementsAreMembers) {
  Rng rng(9);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    for (int k = 0; k < 100; ++k) EXPECT_LT(c->membership_residual(random_element(*c, rng, 1.0)), 1e-10) << name;
  }
}

TEST(Membership, RandomNearIdentity) {
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const GroupElement a = c->random_near_identity(0.5, 42), b = c->random_near_identity(0.5, 42);
    EXPECT_EQ(a.matrix, b.matrix) << name;
    EXPECT_LT(c->membership_residual(a), 1e-10) << name;
    EXPECT_LT(diff(c->random_near_identity(1e-9, 3), c->identity()), 1e-8) << name;
  }
  EXPECT_ERRC(chart("SO3")->random_near_identity(0.0, 1), Errc::invalid_input);
}

TEST(Membership, CheckedProjectsSmallDriftAndRejectsLarge) {
  const auto c = chart("SO3");
  GroupElement g = c->exp(xyz(0.2, 0.1, -0.3));
  g.matrix(0, 0) += 1e-8;
  const GroupElement fixed = c->checked(g);
  EXPECT_LT(c->membership_residual(fixed), 1e-13);
  g.matrix(0, 0) += 1e-2;
  EXPECT_ERRC(c->checked(g), Errc::invalid_input);

  const auto h = chart("Heisenberg3");
  GroupElement lower = GroupChart::heisenberg(1, 2, 3);
  lower.matrix(2, 0) = 0.5;
  EXPECT_ERRC(h->checked(lower), Errc::invalid_input);
  EXPECT_ERRC(h->log({Matrix::Identity(2, 2)}), Errc::invalid_input);
}

TEST(Membership, ProjectionRestoresPattern) {
  Rng rng(10);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    GroupElement g = random_element(*c, rng);
    const GroupElement clean = g;
    for (Eigen::Index i = 0; i < g.matrix.size(); ++i) g.matrix(i) += 1e-9 * rng.normal();
    const GroupElement projected = c->project(g);
    EXPECT_LT(c->membership_residual(projected), 1e-12) << name;
    EXPECT_LT(diff(projected, clean), 1e-8) << name;
  }
}

TEST(AffPlus, LogNearUnitScale) {
  const auto c = chart("AffPlus");
  for (double alpha : {-1e-9, 0.0, 1e-7, 2e-6, 0.4}) {
    Vector a(2);
    a << alpha, 0.7;
    EXPECT_LT((c->log(c->exp(a)) - a).norm(), 1e-12) << alpha;
  }
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = -1.0;
  EXPECT_ERRC(c->log({bad}), Errc::log_domain);
}
