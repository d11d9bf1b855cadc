#include "testing.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace qrf;
using qrf::testing::golden;
using qrf::testing::mat;
using qrf::testing::Rng;

namespace {

const qrf::Setup& qubits() {
  static const qrf::Setup s = qrf::Setup::regular(Group({2}));
  return s;
}

Mat zz(double a, double b, double c) {
  return a * kron(pauli::z(), pauli::id()) + b * kron(pauli::id(), pauli::z()) + c * kron(pauli::z(), pauli::z());
}

Mat bjzz(double B, double J) { return zz(B, B, 2 * J); }

Vec frame_one_times(double a, double b) {
  Vec v = Vec::Zero(4);
  v(2) = a;
  v(3) = b;
  return v;
}

}  // namespace

TEST(Split, CanonicalForms) {
  const auto sp = split_hamiltonian(zz(1, 1, 1), 2, 2);
  EXPECT_LT(max_abs(sp.h_frame - pauli::z()), 1e-15);
  EXPECT_LT(max_abs(sp.h_s - pauli::z()), 1e-15);
  EXPECT_LT(max_abs(sp.h_int - kron(pauli::z(), pauli::z())), 1e-15);
  const auto pure = split_hamiltonian(zz(0, 0, 1), 2, 2);
  EXPECT_LT(max_abs(pure.h_frame), 1e-15);
  EXPECT_LT(max_abs(pure.h_s), 1e-15);
  // the identity component goes half to each side
  const auto c = split_hamiltonian(Mat(3.0 * identity(4)), 2, 2);
  EXPECT_LT(max_abs(c.h_frame - 1.5 * identity(2)), 1e-15);
  EXPECT_LT(max_abs(c.h_s - 1.5 * identity(2)), 1e-15);
  EXPECT_THROW(split_hamiltonian(ket_bra(4, 0, 1), 2, 2), HermiticityError);
  EXPECT_THROW(split_hamiltonian(identity(6), 2, 2), DomainError);
}

TEST(Split, RandomReconstruction) {
  Rng rng(41);
  for (int k = 0; k < 20; ++k) {
    const Eigen::Index n = 2 + k % 3, d = 2 + k % 4;
    const Mat H = rng.hermitian(n * d);
    const auto sp = split_hamiltonian(H, n, d);
    EXPECT_LT(max_abs(sp.total() - H), 1e-12);
    EXPECT_LT(max_abs(ptrace_first(sp.h_int, n, d)), 1e-12);
    EXPECT_LT(max_abs(ptrace_second(sp.h_int, n, d)), 1e-12);
  }
}

TEST(TransformPieces, ExampleCases) {
  const qrf::Setup& s = qubits();
  const auto free1 = transform_hamiltonian_pieces(s, split_hamiltonian(s, zz(1, 0, 0) + kron(pauli::id(), pauli::x())), 1, 0, 0);
  EXPECT_LT(max_abs(free1.split_new.h_int), 1e-15);
  EXPECT_EQ(dynamical_type_classifier(s, split_hamiltonian(s, zz(1, 0, 0) + kron(pauli::id(), pauli::x()))),
            DynamicalType::closed_to_closed);

  const auto sp2 = split_hamiltonian(s, zz(1, 1, 0));
  const auto t2 = transform_hamiltonian_pieces(s, sp2, 1, 0, 0);
  EXPECT_LT(max_abs(t2.H_new - zz(1, 0, 1)), 1e-15);
  EXPECT_EQ(dynamical_type_classifier(s, sp2), DynamicalType::closed_to_open);

  const auto t3 = transform_hamiltonian_pieces(s, split_hamiltonian(s, zz(0, 0, 1)), 1, 0, 0);
  EXPECT_LT(max_abs(t3.H_new - zz(0, 1, 0)), 1e-15);
  EXPECT_EQ(dynamical_type_classifier(s, split_hamiltonian(s, zz(1, 1, 1))), DynamicalType::interacting);
}

TEST(TransformPieces, AssemblyAndGolden) {
  Rng rng(42);
  for (int k = 0; k < 30; ++k) {
    const qrf::Setup s = qrf::testing::small_setup(k);
    const auto n = static_cast<int>(s.order());
    const std::size_t gi = rng.pick(0, n - 1), gj = rng.pick(0, n - 1);
    const auto t = transform_hamiltonian_pieces(s, split_hamiltonian(s, rng.hermitian(s.perspective_dim())), 1 + k % 2, gi, gj);
    EXPECT_LT(max_abs(t.pieces.assemble(s.d_S()) - t.H_new), 1e-10) << "k=" << k;
  }
  const auto& th = golden()["thermo"];
  const qrf::Setup s = qrf::Setup::tensor_power(Group({2}), 2);
  const auto t = transform_hamiltonian_pieces(s, split_hamiltonian(s, mat(th["H"])), 1, 0, 0);
  EXPECT_LT(max_abs(t.H_new - mat(golden()["dynamics"]["H_new"])), 1e-12);
}

TEST(Evolve, StationarityPurityAndPhases) {
  Rng rng(43);
  const Mat H = rng.hermitian(4);
  const auto e = eigh(H);
  const Mat stat = from_spectrum(e.vectors, (RVec(4) << 0.1, 0.2, 0.3, 0.4).finished());
  EXPECT_LT(max_abs(evolve(H, stat, 1.7) - stat), 1e-12);
  const Mat rho = rng.density(4);
  const Propagator prop(H);
  for (double t : {0.3, 1.1, 5.0}) {
    const Mat r = prop.evolve(rho, t);
    EXPECT_NEAR(purity(r), purity(rho), 1e-12);
    EXPECT_NEAR(r.trace().real(), 1.0, 1e-12);
    EXPECT_LT(hermiticity_residual(r), 1e-12);
  }
  const double B = 0.7, J = 1.3, a = 0.6, b = 0.8;
  const Propagator p2(bjzz(B, J));
  for (double t : {0.0, 0.4, 2.2}) {
    const Vec psi = p2.evolve(frame_one_times(a, b), t);
    EXPECT_NEAR(std::abs(psi(2) - a * std::exp(cplx(0, 2 * J * t))), 0, 1e-12);
    EXPECT_NEAR(std::abs(psi(3) - b * std::exp(cplx(0, -2 * (J - B) * t))), 0, 1e-12);
  }
  EXPECT_THROW(evolve(ket_bra(2, 0, 1), identity(2) / 2.0, 1.0), HermiticityError);
}

TEST(Eom, Examples) {
  Rng rng(44);
  const qrf::Setup& s = qubits();
  const auto free = split_hamiltonian(s, zz(1, 0.5, 0));
  const auto ef = subsystem_eom_terms(free, rng.density(4));
  EXPECT_LT(max_abs(ef.h_tilde_s), 1e-15);
  EXPECT_LT(max_abs(ef.dissipative_term), 1e-14);
  EXPECT_LT(ef.closure_residual, 1e-12);

  const auto inter = split_hamiltonian(s, rng.hermitian(4));
  const auto ep = subsystem_eom_terms(inter, kron(rng.density(2), rng.density(2)));
  EXPECT_LT(max_abs(ep.omega), 1e-14);
  EXPECT_TRUE(ep.effectively_closed);
  const auto er = subsystem_eom_terms(inter, rng.density(4));
  EXPECT_LT(er.closure_residual, 1e-10);
  EXPECT_LT(max_abs(ptrace_first(er.omega, 2, 2)), 1e-14);
  EXPECT_LT(max_abs(ptrace_second(er.omega, 2, 2)), 1e-14);
}

TEST(Eom, EffectiveFieldsInBothPerspectives) {
  const qrf::Setup& s = qubits();
  const double B = 0.9, J = 1.4;
  const Mat H = bjzz(B, J);
  const Vec psi = frame_one_times(0.6, 0.8);
  const Mat v = qrf_transform(s, 1, 0, 0).matrix;
  const Propagator prop(H);
  for (double t : {0.0, 0.5, 1.9}) {
    const Mat rho = prop.evolve(Mat(psi * psi.adjoint()), t);
    const auto ei = subsystem_eom_terms(split_hamiltonian(s, H), rho);
    const auto ej = subsystem_eom_terms(split_hamiltonian(s, conjugate(v, H)), conjugate(v, rho));
    EXPECT_LT(max_abs(ei.h_tilde_s + 2 * J * pauli::z()), 1e-12);
    EXPECT_LT(max_abs(ej.h_tilde_s + B * pauli::z()), 1e-12);
    EXPECT_TRUE(ei.effectively_closed);
    EXPECT_TRUE(ej.effectively_closed);
  }
}

TEST(Eom, GoldenInducedField) {
  const auto& th = golden()["thermo"];
  const auto e = subsystem_eom_terms(split_hamiltonian(mat(th["H"]), 2, 4), mat(th["rho"]));
  EXPECT_LT(max_abs(e.h_tilde_s - mat(golden()["dynamics"]["h_tilde_s"])), 1e-12);
}

TEST(Trajectory, ImportedHamiltonianKeepsStateInSubalgebra) {
  const qrf::Setup& s = qubits();
  const BilocalUnitary x(pauli::id(), pauli::x());
  std::vector<double> grid;
  for (int k = 0; k < 20; ++k) grid.push_back(0.3 * k);
  for (auto [B, J] : {std::pair{1.0, 1.0}, {0.4, 1.7}, {2.0, -0.5}}) {
    const Mat H = bjzz(B, J);
    const Vec psi = frame_one_times(0.6, 0.8);
    const auto c = imported_hamiltonian_and_trajectory_check(s, H, x, 0, 0, psi * psi.adjoint(), grid);
    EXPECT_TRUE(c.all_in);
    EXPECT_TRUE(c.premise);
    EXPECT_TRUE(c.consistent_with_premise);
    EXPECT_LT(max_abs(c.H_imported - zz(B, -2 * J, -B)), 1e-14);
    EXPECT_LT(c.hagree_residual, 1e-10);
  }
  // stationary eigenstate in A_X
  const Vec e0 = Vec::Unit(4, 0);
  const auto st = imported_hamiltonian_and_trajectory_check(s, zz(1, 1, 1), BilocalUnitary::identity_on(s), 0, 0,
                                                            e0 * e0.adjoint(), grid);
  EXPECT_TRUE(st.all_in);
  EXPECT_THROW(imported_hamiltonian_and_trajectory_check(s, zz(1, 1, 1), x, 0, 0, e0 * e0.adjoint(), {1.0, 0.5}),
               DomainError);
}

TEST(Trajectory, EntersSubalgebrasPeriodically) {
  const qrf::Setup& s = qubits();
  const double B = 1.0, J = 1.0;
  Vec plus = Vec::Ones(2) / std::sqrt(2.0);
  const Vec psi = kron(plus, plus);
  const Propagator prop(bjzz(B, J));
  const auto one = BilocalUnitary::identity_on(s);
  const BilocalUnitary x(pauli::id(), pauli::x());
  const double pi = std::numbers::pi;
  for (int n = 0; n <= 6; ++n) {
    const double t1 = pi * n / (2 * J - B), t2 = pi * n / (2 * J + B);
    const Vec a = prop.evolve(psi, t1), b = prop.evolve(psi, t2);
    EXPECT_TRUE(membership_test(s, a * a.adjoint(), one, 0, 0).is_member) << n;
    EXPECT_TRUE(membership_test(s, b * b.adjoint(), x, 0, 0).is_member) << n;
  }
  for (double t : {0.4, 1.3, 2.5}) {
    const Vec a = prop.evolve(psi, t);
    EXPECT_FALSE(membership_test(s, a * a.adjoint(), one, 0, 0).is_member);
    EXPECT_FALSE(membership_test(s, a * a.adjoint(), x, 0, 0).is_member);
  }
}

TEST(Trajectory, EntanglementAngleDecidesInvariance) {
  const qrf::Setup& s = qubits();
  const Mat H = zz(1, 1, 1);
  const Mat v = qrf_transform(s, 1, 0, 0).matrix;
  const Propagator prop(H);
  for (double theta : {0.0, 0.3, std::numbers::pi / 4}) {
    Vec psi = Vec::Zero(4);
    psi(0) = std::cos(theta);
    psi(3) = std::sin(theta);
    for (int k = 0; k < 20; ++k) {
      const double t = 0.35 * k;
      const Mat rho = prop.evolve(Mat(psi * psi.adjoint()), t);
      const double si = von_neumann(trace_frame(s, rho)), sj = von_neumann(trace_frame(s, conjugate(v, rho)));
      const double c2 = std::cos(theta) * std::cos(theta), s2 = 1 - c2;
      double h = 0;
      for (double p : {c2, s2})
        if (p > 1e-15) h -= p * std::log(p);
      EXPECT_NEAR(si, h, 1e-9);
      EXPECT_NEAR(sj, 0.0, 1e-9);
      if (theta == 0.0) {
        EXPECT_NEAR(si, sj, 1e-9);
      }
    }
  }
}

TEST(Trajectory, InvariantTrajectoryProperties) {
  Rng rng(45);
  for (int k = 0; k < 15; ++k) {
    const auto tr = qrf::testing::random_invariant_trajectory(rng, k);
    const qrf::Setup& s = tr.setup;
    const Mat H_imp = imported_hamiltonian(s, tr.H, tr.x, tr.gi, tr.gj);
    const Mat v = qrf_transform(s, 1, tr.gi, tr.gj).matrix;
    const Propagator prop(tr.H);
    std::optional<Mat> z0;
    for (double t : {0.0, 0.7, 1.9, 3.1}) {
      const Mat rho = prop.evolve(tr.rho0, t);
      EXPECT_TRUE(membership_test(s, rho, tr.x, tr.gi, tr.gj).is_member);
      EXPECT_NEAR((tr.H * rho).trace().real(), (H_imp * rho).trace().real(), 1e-9);
      EXPECT_TRUE(match_spectra(spectrum(rho), spectrum(conjugate(v, rho))).match);
      // rho_S in the other perspective is Z^dag rho_S Z with the fixed Z of X
      const Mat ri = trace_frame(s, rho), rj = trace_frame(s, conjugate(v, rho));
      EXPECT_LT(max_abs(tr.x.Z.adjoint() * ri * tr.x.Z - rj), 1e-9) << "k=" << k << " t=" << t;
    }
  }
}
