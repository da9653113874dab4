#include "support.hpp"

#include <Eigen/Eigenvalues>

using namespace lieflow;
using namespace lieflow::testing;

namespace {

const LieAlgebra& heis() {
  static const ChartPtr c = chart("Heisenberg3");
  return c->algebra();
}

// exp of a symmetric matrix through its eigendecomposition.
Matrix symmetric_exp(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  return eig.eigenvectors() * eig.eigenvalues().array().exp().matrix().asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

TEST(Bracket, HeisenbergGenerators) {
  const Vector x = heis().basis(0), y = heis().basis(1), z = heis().basis(2);
  EXPECT_LT((heis().bracket(x, y) - z).norm(), 1e-15);
  EXPECT_LT((heis().bracket(y, x) + z).norm(), 1e-15);
  EXPECT_LT(heis().bracket(x, z).norm(), 1e-15);
  EXPECT_LT(heis().bracket(y, z).norm(), 1e-15);
}

TEST(Bracket, SelfBracketVanishes) {
  Rng rng(1);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const Vector a = rng.normal_vector(c->dim());
    EXPECT_EQ(c->algebra().bracket(a, a).norm(), 0.0) << name;
  }
}

TEST(Bracket, DimensionMismatchThrows) {
  EXPECT_ERRC(heis().bracket(Vector::Zero(2), Vector::Zero(3)), Errc::invalid_input);
}

TEST(Bracket, MatchesRealizationCommutator) {
  Rng rng(2);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const LieAlgebra& alg = c->algebra();
    for (int trial = 0; trial < 20; ++trial) {
      const Vector a = rng.normal_vector(alg.dim()), b = rng.normal_vector(alg.dim());
      const Matrix ra = alg.realize(a), rb = alg.realize(b);
      EXPECT_LT(max_abs(alg.realize(alg.bracket(a, b)) - (ra * rb - rb * ra)), 1e-12) << name;
    }
  }
}

TEST(Bracket, JacobiHoldsOnCatalog) {
  for (const auto& [name, p] : catalog()) {
    const auto r = structural_residuals(chart(name, p)->algebra().data());
    EXPECT_EQ(r.antisymmetry, 0.0) << name;
    EXPECT_LT(r.jacobi, 1e-12) << name;
    EXPECT_LT(r.realization, 1e-12) << name;
  }
}

TEST(Bracket, CorruptedConstantsRejected) {
  AlgebraData d = heis().data();
  d.c(0, 2, 0) = 1.0;  // [X, Z] = X breaks Jacobi on (X, Y, Z)
  d.c(2, 0, 0) = -1.0;
  EXPECT_ERRC(LieAlgebra{d}, Errc::invalid_input);
  const auto r = structural_residuals(d);
  EXPECT_GT(r.jacobi, 0.5);

  AlgebraData asym = heis().data();
  asym.c(0, 1, 2) = 2.0;
  EXPECT_ERRC(LieAlgebra{asym}, Errc::invalid_input);
}

TEST(Ad, ActsAsBracket) {
  Rng rng(3);
  for (const auto& [name, p] : catalog()) {
    const LieAlgebra& alg = chart(name, p)->algebra();
    const Vector a = rng.normal_vector(alg.dim()), b = rng.normal_vector(alg.dim());
    EXPECT_LT((alg.ad(a) * b - alg.bracket(a, b)).norm(), 1e-13) << name;
    EXPECT_EQ(max_abs(alg.ad(Vector::Zero(alg.dim()))), 0.0);
  }
}

TEST(Ad, HeisenbergAdXSendsYToZ) {
  Matrix expected = Matrix::Zero(3, 3);
  expected(2, 1) = 1.0;
  EXPECT_LT(max_abs(heis().ad(heis().basis(0)) - expected), 1e-15);
}

TEST(Ad, So3IsAntisymmetric) {
  Rng rng(4);
  const LieAlgebra& alg = chart("SO3")->algebra();
  const Matrix ad = alg.ad(rng.normal_vector(3));
  EXPECT_LT(max_abs(ad + ad.transpose()), 1e-15);
}

TEST(Derivation, AdIsDerivation) {
  Rng rng(5);
  for (const auto& [name, p] : catalog()) {
    const LieAlgebra& alg = chart(name, p)->algebra();
    EXPECT_LT(leibniz_residual(alg, alg.ad(rng.normal_vector(alg.dim()))), 1e-12) << name;
  }
}

TEST(Derivation, BasisElementsSatisfyLeibniz) {
  Rng rng(6);
  for (const auto& [name, p] : catalog()) {
    const LieAlgebra& alg = chart(name, p)->algebra();
    for (int k = 0; k < 5; ++k) EXPECT_LT(leibniz_residual(alg, random_derivation(alg, rng)), 1e-10) << name;
  }
}

TEST(Derivation, DerivationSpaceDimensions) {
  // Der(h3) = 6, Der(so3) = Der(sl2) = 3, Der(aff) = 2, Der(R^2) = gl(2).
  EXPECT_EQ(derivation_basis(heis()).cols(), 6);
  EXPECT_EQ(derivation_basis(chart("SO3")->algebra()).cols(), 3);
  EXPECT_EQ(derivation_basis(chart("SL2")->algebra()).cols(), 3);
  EXPECT_EQ(derivation_basis(chart("AffPlus")->algebra()).cols(), 2);
  EXPECT_EQ(derivation_basis(chart("Rn", 2)->algebra()).cols(), 4);
}

TEST(Derivation, NonDerivationRejected) {
  Matrix d = Matrix::Identity(3, 3);  // D(Z) = Z but [DX, Y] + [X, DY] = 2Z
  EXPECT_ERRC(make_derivation(heis(), d), Errc::not_a_derivation);
  EXPECT_ERRC(solve_inner_witness(d, heis()), Errc::not_a_derivation);
}

TEST(Derivation, DerivedAlgebraIsInvariant) {
  Rng rng(7);
  for (const auto& [name, p] : catalog()) {
    const auto c = chart(name, p);
    const Subspace& derived = c->subgroups().derived_algebra;
    for (int k = 0; k < 10; ++k) {
      const Matrix d = random_derivation(c->algebra(), rng);
      for (int i = 0; i < derived.dim(); ++i) EXPECT_LT(derived.residual(d * derived.basis().col(i)), 1e-9) << name;
    }
  }
}

TEST(InnerWitness, HeisenbergDiagonalIsNotInner) {
  const InnerSolve s = solve_inner_witness(heisenberg_diagonal(), heis());
  EXPECT_FALSE(s.witness.has_value());
  EXPECT_GE(s.residual, 2.0);
  EXPECT_NEAR(s.residual, std::sqrt(6.0), 1e-12);
  const Derivation d = make_derivation(heis(), heisenberg_diagonal());
  EXPECT_FALSE(d.is_inner());
  EXPECT_FALSE(d.nilpotency_index.has_value());
}

TEST(InnerWitness, RecoversAdUpToCenter) {
  Rng rng(8);
  const Subspace z = center(heis());
  for (int k = 0; k < 50; ++k) {
    const Vector w = rng.normal_vector(3);
    const InnerSolve s = solve_inner_witness(heis().ad(w), heis());
    ASSERT_TRUE(s.witness.has_value());
    EXPECT_LT(s.residual, 1e-9);
    EXPECT_LT(z.residual(*s.witness - w), 1e-9);
  }
}

TEST(InnerWitness, SemisimpleDerivationsAreInner) {
  Rng rng(9);
  for (const char* name : {"SO3", "SL2"}) {
    const LieAlgebra& alg = chart(name)->algebra();
    for (int k = 0; k < 50; ++k) {
      const Matrix d = random_derivation(alg, rng, rng.uniform(0.1, 3.0));
      const InnerSolve s = solve_inner_witness(d, alg);
      ASSERT_TRUE(s.witness.has_value()) << name;
      EXPECT_LT(s.residual, 1e-9);
      EXPECT_LT(max_abs(alg.ad(*s.witness) - d), 1e-9);
    }
  }
}

TEST(InnerWitness, ConjugationDifferentialSign) {
  Rng rng(10);
  for (const auto& [name, p] : catalog()) {
    const LieAlgebra& alg = chart(name, p)->algebra();
    EXPECT_EQ(fix_inner_sign(alg), 1) << name;
    for (double t : {-1.0, 0.5, 2.0}) EXPECT_EQ(fix_inner_sign(alg, rng.in_ball(alg.dim(), 1.0), t), 1) << name;
  }
}

TEST(InnerWitness, ConjugationDifferentialAgainstHandDifferences) {
  // Directly difference g -> e^W g e^-W on SO3 and compare with e^{ad W}.
  const auto c = chart("SO3");
  const LieAlgebra& alg = c->algebra();
  Vector w(3);
  w << 0.4, -0.7, 0.2;
  const Matrix ew = matrix_exp(alg.realize(w)), emw = matrix_exp(-alg.realize(w));
  const Matrix j = fd_jacobian_at_identity(*c, [&](const GroupElement& g) { return GroupElement{ew * g.matrix * emw}; });
  EXPECT_LT(max_abs(j - matrix_exp(alg.ad(w))), 1e-8);
}

TEST(Nilpotency, Indices) {
  EXPECT_EQ(is_nilpotent_operator(Matrix::Zero(3, 3), 1e-12), 1);
  EXPECT_EQ(is_nilpotent_operator(heis().ad(heis().basis(0)), 1e-12), 2);
  Matrix shift = Matrix::Zero(3, 3);
  shift(1, 0) = shift(2, 1) = 1.0;
  EXPECT_EQ(is_nilpotent_operator(shift, 1e-12), 3);
  EXPECT_FALSE(is_nilpotent_operator(heisenberg_diagonal(), 1e-12).has_value());
  EXPECT_FALSE(is_nilpotent_operator(chart("SO3")->algebra().ad(xyz(0, 0, 1)), 1e-12).has_value());
}

TEST(MatrixExp, ZeroAndNilpotent) {
  EXPECT_EQ(max_abs(matrix_exp(Matrix::Zero(4, 4)) - Matrix::Identity(4, 4)), 0.0);
  Matrix n = Matrix::Zero(3, 3);
  n(0, 1) = 2.0;
  n(1, 2) = 3.0;
  const Matrix expected = Matrix::Identity(3, 3) + n + 0.5 * n * n;
  EXPECT_LT(max_abs(matrix_exp(n) - expected), 1e-14);
  EXPECT_LT(max_abs(matrix_exp_nilpotent(n, 3) - expected), 1e-15);
}

TEST(MatrixExp, SymmetricOracleRelativeError) {
  Rng rng(11);
  for (int k = 0; k < 40; ++k) {
    Matrix a(4, 4);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = rng.normal();
    Matrix s = a + a.transpose();
    s *= rng.uniform(0.01, 10.0) / norm_2(s);
    const Matrix expected = symmetric_exp(s);
    EXPECT_LT((matrix_exp(s) - expected).norm() / expected.norm(), 1e-12);
  }
}

TEST(MatrixExp, RotationAgainstRodrigues) {
  const LieAlgebra& alg = chart("SO3")->algebra();
  Rng rng(12);
  for (int k = 0; k < 20; ++k) {
    const Vector v = rng.normal_vector(3) * rng.uniform(0.1, 3.0);
    const double theta = v.norm();
    const Matrix kx = alg.realize(v / theta);
    const Matrix expected = Matrix::Identity(3, 3) + std::sin(theta) * kx + (1 - std::cos(theta)) * kx * kx;
    EXPECT_LT(max_abs(matrix_exp(alg.realize(v)) - expected), 1e-13);
  }
}

TEST(MatrixExp, InverseProperty) {
  Rng rng(13);
  for (int k = 0; k < 20; ++k) {
    Matrix m(3, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
    EXPECT_LT(max_abs(matrix_exp(m) * matrix_exp(-m) - Matrix::Identity(3, 3)), 1e-12);
  }
}

TEST(MatrixExp, OverflowReported) {
  Matrix big = Matrix::Identity(2, 2) * 1e6;
  EXPECT_ERRC(matrix_exp(big), Errc::numerical_overflow);
}

TEST(MatrixLog, UnipotentHeisenberg) {
  const Matrix g = GroupChart::heisenberg(1, 1, 1).matrix;
  const Vector v = heis().coords_of(matrix_log(g, LogMode::nilpotent));
  EXPECT_LT((v - xyz(1, 1, 0.5)).norm(), 1e-15);
  EXPECT_EQ(max_abs(matrix_log(Matrix::Identity(3, 3))), 0.0);
}

TEST(MatrixLog, RoundTrip) {
  Rng rng(14);
  for (int k = 0; k < 40; ++k) {
    Matrix m(3, 3);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal();
    m *= rng.uniform(0.05, 0.6) / norm_2(m);  // keeps ||e^m - I|| < 1
    EXPECT_LT(max_abs(matrix_log(matrix_exp(m)) - m), 1e-10);
  }
}

TEST(MatrixLog, DomainErrors) {
  Matrix neg = -Matrix::Identity(2, 2);
  EXPECT_ERRC(matrix_log(neg), Errc::log_domain);
  EXPECT_ERRC(matrix_log(Matrix::Identity(2, 2) * 2.0, LogMode::nilpotent), Errc::log_domain);
}

TEST(Series, HeisenbergLowerCentral) {
  const auto s = subspace_series(heis(), Subspace::full(3), SeriesKind::lower_central);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].dim(), 3);
  EXPECT_EQ(s[1].dim(), 1);
  EXPECT_EQ(s[2].dim(), 0);
  EXPECT_LT(s[1].residual(heis().basis(2)), 1e-14);
}

TEST(Series, AbelianAndSimple) {
  const auto rn = subspace_series(chart("Rn", 3)->algebra(), Subspace::full(3), SeriesKind::derived);
  ASSERT_EQ(rn.size(), 2u);
  EXPECT_EQ(rn[1].dim(), 0);
  const auto so3 = subspace_series(chart("SO3")->algebra(), Subspace::full(3), SeriesKind::derived);
  ASSERT_EQ(so3.size(), 1u);
  EXPECT_EQ(so3[0].dim(), 3);
}

TEST(Series, NonIncreasingAndNested) {
  for (const auto& [name, p] : catalog()) {
    const LieAlgebra& alg = chart(name, p)->algebra();
    for (auto kind : {SeriesKind::derived, SeriesKind::lower_central}) {
      const auto s = subspace_series(alg, Subspace::full(alg.dim()), kind);
      for (std::size_t i = 1; i < s.size(); ++i) {
        EXPECT_LT(s[i].dim(), s[i - 1].dim()) << name;
        EXPECT_LT(s[i - 1].containment_residual(s[i]), 1e-12) << name;
      }
    }
  }
}

TEST(Series, RejectsNonSubalgebra) {
  const Subspace xy = Subspace::span(Matrix::Identity(3, 2), 1e-8);
  EXPECT_ERRC(subspace_series(heis(), xy, SeriesKind::derived), Errc::not_a_subalgebra);
}

TEST(Center, Catalog) {
  EXPECT_EQ(center(heis()).dim(), 1);
  EXPECT_LT(center(heis()).residual(heis().basis(2)), 1e-14);
  EXPECT_EQ(center(chart("SO3")->algebra()).dim(), 0);
  EXPECT_EQ(center(chart("GLnPlus", 2)->algebra()).dim(), 1);
  EXPECT_EQ(center(chart("Rn", 2)->algebra()).dim(), 2);
}

TEST(Descriptor, JsonRoundTrip) {
  const AlgebraData& d = chart("SL2")->algebra().data();
  const AlgebraData back = algebra_data_from_json(nlohmann::json::parse(algebra_data_to_json(d).dump()));
  EXPECT_EQ(back.dim, d.dim);
  EXPECT_EQ(back.constants, d.constants);
  ASSERT_EQ(back.realization.size(), d.realization.size());
  for (std::size_t i = 0; i < d.realization.size(); ++i) EXPECT_EQ(back.realization[i], d.realization[i]);
}
