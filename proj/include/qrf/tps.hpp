#pragma once

#include "qrf/maps.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace qrf {

// Everything here acts on a perspective space (other frame j, S). The
// matrices do not depend on which frame's perspective it is, only on the
// orientations: gi for the perspective frame, gj for the other one.

inline Mat pi_t(const Setup& s, const Mat& f) {
  Mat acc = Mat::Zero(f.rows(), f.cols());
  for (std::size_t g = 0; g < s.order(); ++g) {
    const Mat u = on_system(s, s.U_S(g));
    acc += u * f * u.adjoint();
  }
  return acc / static_cast<double>(s.order());
}

inline Mat pi_d(const Setup& s, const Mat& f) {
  Mat out = Mat::Zero(f.rows(), f.cols());
  const Eigen::Index d = s.d_S();
  for (Eigen::Index g = 0; g < s.N(); ++g) out.block(g * d, g * d, d, d) = f.block(g * d, g * d, d, d);
  return out;
}

inline Mat pi_t_perp(const Setup& s, const Mat& f) { return f - pi_t(s, f); }
inline Mat pi_d_perp(const Setup& s, const Mat& f) { return f - pi_d(s, f); }

struct FourComponentDecomposition {
  Mat dt, dtp, dpt, dptp;
  Mat sum() const { return dt + dtp + dpt + dptp; }
};

inline FourComponentDecomposition decompose(const Setup& s, const Mat& f) {
  const Mat t = pi_t(s, f), tp = f - t;
  const Mat dt = pi_d(s, t), dtp = pi_d(s, tp);
  return {dt, dtp, t - dt, tp - dtp};
}

struct BilocalUnitary {
  Mat Y;  // other frame
  Mat Z;  // S

  BilocalUnitary() = default;
  BilocalUnitary(Mat y, Mat z) : Y(std::move(y)), Z(std::move(z)) {
    require_unitary(Y, "bilocal Y");
    require_unitary(Z, "bilocal Z");
  }
  static BilocalUnitary identity_on(const Setup& s) { return {identity(s.N()), identity(s.d_S())}; }
  Mat X() const { return kron(Y, Z); }
};

inline Mat U_ibar(const Setup& s, std::size_t gi, std::size_t gj) { return tps_change_unitary(s, 1, gi, gj).U_ibar; }

struct Membership {
  bool is_member = false;
  double residual = 0;  // ||U f U^dag - X^dag f X||_HS
};

inline Membership membership_test(const Setup& s, const Mat& f, const BilocalUnitary& x, std::size_t gi, std::size_t gj,
                                  double eps = tol::membership) {
  const Mat u = U_ibar(s, gi, gj);
  const Mat X = x.X();
  const double r = (u * f * u.adjoint() - X.adjoint() * f * X).norm();
  return {r <= eps * std::max(1.0, f.norm()), r};
}

// Re-express an admissible X for new orientations (gi', gj').
inline BilocalUnitary transport_X(const Setup& s, const BilocalUnitary& x, std::size_t gi, std::size_t gj, std::size_t gi2,
                                  std::size_t gj2) {
  const auto& G = s.group();
  const std::size_t ky = G.mul(G.inv(G.mul(gi2, gj2)), G.mul(gi, gj));
  const std::size_t kz = G.mul(gj, G.inv(gj2));
  return {x.Y * s.U_frame(ky), x.Z * s.U_S(kz)};
}

// Orthogonal projector onto {f : X U f U^dag X^dag = f}. W = X U is unitary,
// so the fixed space is the commutant of W: operators block-diagonal in W's
// eigenspaces. Eigenvalues are grouped with |lambda_a - lambda_b| <= 1e-9,
// which is the eigenvalue-1 criterion for the conjugation superoperator.
class InvariantProjector {
 public:
  InvariantProjector(const Setup& s, const BilocalUnitary& x, std::size_t gi, std::size_t gj, double eps = tol::eigen_one) {
    const Mat w = x.X() * U_ibar(s, gi, gj);
    d_ = w.rows();
    Eigen::ComplexSchur<Mat> schur(w);
    const Mat& t = schur.matrixT();
    const Mat& q = schur.matrixU();
    const Eigen::Index n = t.rows();
    std::vector<Eigen::Index> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](Eigen::Index a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    // Gaps inside this window are too close to call either way.
    const double ambiguous = 1e-6;
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = a + 1; b < n; ++b) {
        const double gap = std::abs(t(a, a) - t(b, b));
        if (gap <= eps)
          parent[find(a)] = find(b);
        else if (gap < ambiguous)
          throw NumericalRankError("eigenvalue clustering ambiguous: gap " + std::to_string(gap) +
                                   " between threshold and 1e-6");
      }
    std::vector<Eigen::Index> roots;
    for (Eigen::Index a = 0; a < n; ++a)
      if (std::find(roots.begin(), roots.end(), find(a)) == roots.end()) roots.push_back(find(a));
    for (auto r : roots) {
      std::vector<Eigen::Index> cols;
      for (Eigen::Index a = 0; a < n; ++a)
        if (find(a) == r) cols.push_back(a);
      Mat basis(n, static_cast<Eigen::Index>(cols.size()));
      for (std::size_t k = 0; k < cols.size(); ++k) basis.col(static_cast<Eigen::Index>(k)) = q.col(cols[k]);
      blocks_.push_back(basis * basis.adjoint());
      dim_ += static_cast<Eigen::Index>(cols.size() * cols.size());
    }
  }

  Mat apply(const Mat& f) const {
    Mat out = Mat::Zero(f.rows(), f.cols());
    for (const auto& p : blocks_) out += p * f * p;
    return out;
  }
  // Column-major superoperator sum_a conj(P_a) (x) P_a.
  Mat superop() const {
    Mat s = Mat::Zero(d_ * d_, d_ * d_);
    for (const auto& p : blocks_) s += kron(Mat(p.conjugate()), p);
    return s;
  }
  Eigen::Index dimension() const { return dim_; }
  const std::vector<Mat>& eigenprojectors() const { return blocks_; }

 private:
  Eigen::Index d_ = 0, dim_ = 0;
  std::vector<Mat> blocks_;
};

inline InvariantProjector invariant_projector(const Setup& s, const BilocalUnitary& x, std::size_t gi, std::size_t gj) {
  return InvariantProjector(s, x, gi, gj);
}

struct Intersection {
  Eigen::Index dimension = 0;
  std::vector<Mat> basis;  // orthonormal in Hilbert-Schmidt inner product
};

// Eigenvalue-1 space of P1 P2 P1 for two orthogonal projector superoperators.
inline Intersection intersect(const Mat& p1, const Mat& p2, double eps = tol::eigen_one) {
  const Mat m = p1 * p2 * p1;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.adjoint()));
  const auto d = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(m.rows()))));
  Intersection out;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
    if (std::abs(es.eigenvalues()(k) - 1.0) <= eps) {
      ++out.dimension;
      out.basis.push_back(unvec(es.eigenvectors().col(k), d));
    }
  return out;
}

struct ScanHit {
  std::size_t index = 0;
  Membership result;
};

// Membership over a caller-supplied family of bilocal unitaries.
inline std::vector<ScanHit> scan_membership(const Setup& s, const Mat& f, const std::vector<BilocalUnitary>& family,
                                            std::size_t gi, std::size_t gj) {
  std::vector<ScanHit> out;
  for (std::size_t k = 0; k < family.size(); ++k) out.push_back({k, membership_test(s, f, family[k], gi, gj)});
  return out;
}

inline std::vector<Mat> pauli_group_mod_phase() { return {pauli::id(), pauli::x(), pauli::y(), pauli::z()}; }

enum class Locality { S_local, frame_local };

struct LocalClassification {
  Locality which = Locality::S_local;
  Mat local;                       // f_S or f_j
  bool tps_invariant = false;      // S: translation-invariant; frame: Pi_d-perp kills f_j (x) 1
  bool invariant_all_orientations = false;  // S-local only: U-invariant for every (gi, gj)
  Mat parity_swap;                 // P_j for the given orientations
  bool parity_condition = false;   // frame-local: Y = P_j^dag satisfies Y^dag f Y = P f P^dag
  bool dt_fixed = false;           // Pi_d Pi_t (op) = op
  std::optional<BilocalUnitary> parity_swap_witness;  // X = P_j^dag (x) 1 when dt_fixed
  Membership parity_swap_membership;
};

inline LocalClassification classify_local_operator(const Setup& s, const Mat& op, Locality which, std::size_t gi,
                                                   std::size_t gj, double eps = tol::hermitian) {
  LocalClassification c;
  c.which = which;
  const double scale = std::max(1.0, op.norm());
  const auto& G = s.group();
  if (which == Locality::S_local) {
    c.local = trace_frame(s, op) / static_cast<double>(s.N());
    if (max_abs(op - on_system(s, c.local)) > eps * scale) throw LocalityError("operator is not of the form 1 (x) f_S");
    c.tps_invariant = true;
    for (std::size_t g = 0; g < s.order(); ++g)
      if (max_abs(commutator(c.local, s.U_S(g))) > eps * scale) c.tps_invariant = false;
    c.invariant_all_orientations = true;
    for (std::size_t a = 0; a < G.order(); ++a)
      for (std::size_t b = 0; b < G.order(); ++b) {
        const Mat u = U_ibar(s, a, b);
        if (max_abs(u * op * u.adjoint() - op) > eps * scale) c.invariant_all_orientations = false;
      }
  } else {
    c.local = trace_system(s, op) / static_cast<double>(s.d_S());
    if (max_abs(op - on_frame(s, c.local)) > eps * scale) throw LocalityError("operator is not of the form f_j (x) 1");
    c.tps_invariant = max_abs(pi_d_perp(s, op)) <= eps * scale;
  }
  c.parity_swap = tps_change_unitary(s, 1, gi, gj).parity_swap;
  if (which == Locality::frame_local) {
    const Mat& p = c.parity_swap;
    const Mat y = p.adjoint();
    c.parity_condition = max_abs(y.adjoint() * c.local * y - p * c.local * p.adjoint()) <= eps * scale;
  }
  c.dt_fixed = max_abs(pi_d(s, pi_t(s, op)) - op) <= eps * scale;
  if (c.dt_fixed) {
    c.parity_swap_witness = BilocalUnitary(c.parity_swap.adjoint(), identity(s.d_S()));
    c.parity_swap_membership = membership_test(s, op, *c.parity_swap_witness, gi, gj);
  }
  return c;
}

struct PureWitness {
  std::optional<BilocalUnitary> witness;
  RVec schmidt;          // of psi
  RVec schmidt_transformed;  // of U_ibar psi
  double spectrum_gap = 0;   // max |difference| of sorted coefficients
  Membership check;
};

inline Mat reshape_state(const Setup& s, const Vec& psi) {
  Mat m(s.N(), s.d_S());
  for (Eigen::Index a = 0; a < s.N(); ++a)
    for (Eigen::Index k = 0; k < s.d_S(); ++k) m(a, k) = psi(a * s.d_S() + k);
  return m;
}

// Full SVDs M = A S B^dag and M' = A' S B'^dag give (Y^dag (x) Z^dag) psi = U psi
// with Y = A A'^dag, Z = conj(B B'^dag). Degenerate Schmidt blocks need no
// separate alignment because the same S is used on both sides.
inline PureWitness pure_state_bilocal_witness(const Setup& s, const Vec& psi, std::size_t gi, std::size_t gj,
                                              double eps = tol::spectrum) {
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw DomainError("witness: state is not normalized");
  PureWitness out;
  const Vec psi2 = U_ibar(s, gi, gj) * psi;
  Eigen::JacobiSVD<Mat> a(reshape_state(s, psi), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::JacobiSVD<Mat> b(reshape_state(s, psi2), Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.schmidt = a.singularValues();
  out.schmidt_transformed = b.singularValues();
  out.spectrum_gap = (out.schmidt - out.schmidt_transformed).cwiseAbs().maxCoeff();
  if (out.spectrum_gap > eps) return out;
  BilocalUnitary x(a.matrixU() * b.matrixU().adjoint(), Mat((a.matrixV() * b.matrixV().adjoint()).conjugate()));
  out.check = membership_test(s, psi * psi.adjoint(), x, gi, gj);
  if (out.check.is_member) out.witness = x;
  return out;
}

}  // namespace qrf
