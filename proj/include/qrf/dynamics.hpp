#pragma once

#include "qrf/states.hpp"

#include <vector>

namespace qrf {

// H = h_frame (x) 1 + 1 (x) h_s + h_int with h_int fully non-local. The
// identity component goes half to each local part.
struct HamiltonianSplit {
  Mat h_frame;
  Mat h_s;
  Mat h_int;
  Mat total() const {
    return kron(h_frame, identity(h_s.rows())) + kron(identity(h_frame.rows()), h_s) + h_int;
  }
};

inline HamiltonianSplit split_hamiltonian(const Mat& H, Eigen::Index d_frame, Eigen::Index d_s) {
  require_hermitian(H, "split_hamiltonian");
  if (H.rows() != d_frame * d_s) throw DomainError("split_hamiltonian: dimension mismatch");
  const cplx c = H.trace() / static_cast<double>(d_frame * d_s);
  HamiltonianSplit out;
  out.h_frame = ptrace_second(H, d_frame, d_s) / static_cast<double>(d_s) - 0.5 * c * identity(d_frame);
  out.h_s = ptrace_first(H, d_frame, d_s) / static_cast<double>(d_frame) - 0.5 * c * identity(d_s);
  out.h_int = H - kron(out.h_frame, identity(d_s)) - kron(identity(d_frame), out.h_s);
  return out;
}

inline HamiltonianSplit split_hamiltonian(const Setup& s, const Mat& H) { return split_hamiltonian(H, s.N(), s.d_S()); }

inline Mat conjugate(const Mat& u, const Mat& f) { return u * f * u.adjoint(); }

// Local S-translation average and frame-diagonal part, for single-factor operators.
inline Mat pi_t_local(const Setup& s, const Mat& f_s) {
  Mat acc = Mat::Zero(f_s.rows(), f_s.cols());
  for (std::size_t g = 0; g < s.order(); ++g) acc += conjugate(s.U_S(g), f_s);
  return acc / static_cast<double>(s.order());
}
inline Mat pi_d_local(const Mat& f_j) { return Mat(f_j.diagonal().asDiagonal()); }

struct TransformedPieces {
  Mat frame_from_diag;     // P Pi_d(h_frame) P^dag, now on frame i
  Mat lambda_frame;
  Mat s_translation_part;  // Pi_t(h_s)
  Mat lambda_s;
  Mat int_from_locals;     // V(h_frame^{d-perp} (x) 1 + 1 (x) h_s^{t-perp})
  Mat int_from_dt;         // (P (x) 1) Pi_d Pi_t(h_int) (P (x) 1)^dag
  Mat lambda_int;

  Mat assemble(Eigen::Index d_s) const {
    const Eigen::Index n = frame_from_diag.rows();
    return kron(Mat(frame_from_diag + lambda_frame), identity(d_s)) +
           kron(identity(n), Mat(s_translation_part + lambda_s)) + int_from_locals + int_from_dt + lambda_int;
  }
};

struct TransformedHamiltonian {
  HamiltonianSplit split_new;
  TransformedPieces pieces;
  Mat H_new;
};

inline TransformedHamiltonian transform_hamiltonian_pieces(const Setup& s, const HamiltonianSplit& split, int i,
                                                           std::size_t gi, std::size_t gj) {
  const Mat v = qrf_transform(s, i, gi, gj).matrix;
  const Mat p = tps_change_unitary(s, i, gi, gj).parity_swap;
  const Mat pd = on_frame(s, p);
  TransformedHamiltonian out;
  out.H_new = conjugate(v, split.total());
  out.split_new = split_hamiltonian(s, out.H_new);
  auto& pc = out.pieces;
  const Mat hf_d = pi_d_local(split.h_frame);
  const Mat hs_t = pi_t_local(s, split.h_s);
  pc.frame_from_diag = conjugate(p, hf_d);
  pc.s_translation_part = hs_t;
  pc.int_from_locals = conjugate(v, Mat(on_frame(s, split.h_frame - hf_d) + on_system(s, split.h_s - hs_t)));
  pc.int_from_dt = conjugate(pd, pi_d(s, pi_t(s, split.h_int)));
  const Mat rest = split.h_int - pi_d(s, pi_t(s, split.h_int));  // (Pi_d Pi_t-perp + Pi_d-perp)(h_int)
  const auto lam = split_hamiltonian(s, conjugate(v, rest));
  pc.lambda_frame = lam.h_frame;
  pc.lambda_s = lam.h_s;
  pc.lambda_int = lam.h_int;
  return out;
}

// Exact evolution by one spectral decomposition of H, reused across times.
class Propagator {
 public:
  explicit Propagator(const Mat& H) : e_(eigh(H)) {}
  Mat unitary(double t) const {
    Vec ph(e_.values.size());
    for (Eigen::Index k = 0; k < ph.size(); ++k) ph(k) = std::exp(-I_UNIT * e_.values(k) * t);
    return e_.vectors * ph.asDiagonal() * e_.vectors.adjoint();
  }
  Mat evolve(const Mat& rho0, double t) const { return conjugate(unitary(t), rho0); }
  Vec evolve(const Vec& psi0, double t) const { return unitary(t) * psi0; }

 private:
  HermitianEigen e_;
};

inline Mat evolve(const Mat& H, const Mat& rho0, double t) { return Propagator(H).evolve(rho0, t); }

inline Mat liouvillian(const Mat& H, const Mat& rho) { return -I_UNIT * commutator(H, rho); }

struct EomTerms {
  Mat rho_s, rho_frame, omega;
  Mat h_tilde_s;
  Mat unitary_term, dissipative_term;
  Mat rho_s_dot;  // -i Tr_frame [H, rho]
  double closure_residual = 0;
  double correlation_commutator = 0;
  bool effectively_closed = false;
};

inline EomTerms subsystem_eom_terms(const HamiltonianSplit& split, const Mat& rho, double eps = tol::hermitian) {
  const Eigen::Index n = split.h_frame.rows(), d = split.h_s.rows();
  EomTerms e;
  e.rho_s = ptrace_first(rho, n, d);
  e.rho_frame = ptrace_second(rho, n, d);
  e.omega = rho - kron(e.rho_frame, e.rho_s);
  e.h_tilde_s = ptrace_first(Mat(split.h_int * kron(e.rho_frame, identity(d))), n, d);
  e.unitary_term = -I_UNIT * commutator(split.h_s + e.h_tilde_s, e.rho_s);
  e.dissipative_term = -I_UNIT * ptrace_first(commutator(split.h_int, e.omega), n, d);
  e.rho_s_dot = ptrace_first(liouvillian(split.total(), rho), n, d);
  e.closure_residual = max_abs(e.unitary_term + e.dissipative_term - e.rho_s_dot);
  e.correlation_commutator = commutator(kron(identity(n), e.rho_s), e.omega).norm();
  e.effectively_closed = e.correlation_commutator <= eps;
  return e;
}

enum class DynamicalType { closed_to_closed, closed_to_open, interacting };

inline const char* to_string(DynamicalType t) {
  switch (t) {
    case DynamicalType::closed_to_closed: return "closed_to_closed";
    case DynamicalType::closed_to_open: return "closed_to_open";
    case DynamicalType::interacting: return "interacting";
  }
  return "?";
}

inline DynamicalType dynamical_type_classifier(const Setup& s, const HamiltonianSplit& split, double eps = tol::hermitian) {
  if (max_abs(split.h_int) > eps) return DynamicalType::interacting;
  const bool frame_ok = max_abs(split.h_frame - pi_d_local(split.h_frame)) <= eps;
  const bool s_ok = max_abs(split.h_s - pi_t_local(s, split.h_s)) <= eps;
  return frame_ok && s_ok ? DynamicalType::closed_to_closed : DynamicalType::closed_to_open;
}

// H_{j->i} = X U H U^dag X^dag
inline Mat imported_hamiltonian(const Setup& s, const Mat& H, const BilocalUnitary& x, std::size_t gi, std::size_t gj) {
  return conjugate(Mat(x.X() * U_ibar(s, gi, gj)), H);
}

struct TrajectoryPoint {
  double t = 0;
  Membership membership;
  double commutator_norm = 0;  // ||[H - H_imported, rho(t)]||_HS
};

struct TrajectoryCheck {
  Mat H_imported;
  std::vector<TrajectoryPoint> points;
  bool all_in = false;
  bool premise = false;  // in at t0 and commutator below 1e-9 everywhere
  bool consistent_with_premise = false;
  double hagree_residual = 0;  // ||Pi_X(H) - Pi_X(H_imported)||
};

inline TrajectoryCheck imported_hamiltonian_and_trajectory_check(const Setup& s, const Mat& H, const BilocalUnitary& x,
                                                                 std::size_t gi, std::size_t gj, const Mat& rho0,
                                                                 const std::vector<double>& grid) {
  for (std::size_t k = 1; k < grid.size(); ++k)
    if (!(grid[k] > grid[k - 1])) throw DomainError("time grid must be strictly increasing");
  TrajectoryCheck c;
  c.H_imported = imported_hamiltonian(s, H, x, gi, gj);
  const Propagator prop(H);
  const Mat dh = H - c.H_imported;
  c.all_in = true;
  bool comm_ok = true;
  for (double t : grid) {
    const Mat rho = prop.evolve(rho0, t);
    TrajectoryPoint p{t, membership_test(s, rho, x, gi, gj), commutator(dh, rho).norm()};
    c.all_in = c.all_in && p.membership.is_member;
    comm_ok = comm_ok && p.commutator_norm <= tol::membership * std::max(1.0, dh.norm());
    c.points.push_back(p);
  }
  c.premise = !c.points.empty() && c.points.front().membership.is_member && comm_ok;
  c.consistent_with_premise = c.all_in == c.premise;
  const InvariantProjector px(s, x, gi, gj);
  c.hagree_residual = (px.apply(H) - px.apply(c.H_imported)).norm();
  return c;
}

}  // namespace qrf
