#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace qrf {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

inline constexpr cplx I_UNIT{0.0, 1.0};

namespace tol {
// Absolute bound on max |A - A^dagger| entries.
inline constexpr double hermitian = 1e-10;
inline constexpr double unitary = 1e-10;
// Eigenvalues above -eig_clamp are clamped to zero before log/power.
inline constexpr double eig_clamp = 1e-12;
// Below -indefinite an eigenvalue is a genuine sign error.
inline constexpr double indefinite = 1e-8;
// Relative to max(1, ||f||_HS).
inline constexpr double membership = 1e-9;
inline constexpr double eigen_one = 1e-9;
inline constexpr double spectrum = 1e-9;
inline constexpr double degeneracy_gap = 1e-8;
}  // namespace tol

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct LabelError : Error {
  using Error::Error;
};
struct HermiticityError : Error {
  using Error::Error;
};
struct IndefiniteError : Error {
  using Error::Error;
};
struct UnitarityError : Error {
  using Error::Error;
};
struct NumericalRankError : Error {
  using Error::Error;
};
struct LocalityError : Error {
  using Error::Error;
};
struct PremiseError : Error {
  using Error::Error;
};

inline double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double hermiticity_residual(const Mat& m) { return max_abs(m - m.adjoint()); }

inline double unitarity_residual(const Mat& m) {
  return max_abs(m * m.adjoint() - Mat::Identity(m.rows(), m.rows()));
}

inline bool is_hermitian(const Mat& m, double eps = tol::hermitian) {
  return m.rows() == m.cols() && hermiticity_residual(m) <= eps;
}

inline bool is_unitary(const Mat& m, double eps = tol::unitary) {
  return m.rows() == m.cols() && unitarity_residual(m) <= eps;
}

inline void require_hermitian(const Mat& m, const char* what) {
  if (!is_hermitian(m))
    throw HermiticityError(std::string(what) + ": operator is not Hermitian (residual " +
                           std::to_string(hermiticity_residual(m)) + ")");
}

inline void require_unitary(const Mat& m, const char* what) {
  if (!is_unitary(m))
    throw UnitarityError(std::string(what) + ": operator is not unitary (residual " +
                         std::to_string(unitarity_residual(m)) + ")");
}

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Vec kron(const Vec& a, const Vec& b) {
  Vec out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

inline Mat identity(Eigen::Index d) { return Mat::Identity(d, d); }

inline Mat commutator(const Mat& a, const Mat& b) { return a * b - b * a; }
inline Mat anticommutator(const Mat& a, const Mat& b) { return a * b + b * a; }

inline double hs_norm(const Mat& m) { return m.norm(); }

namespace pauli {
inline Mat id() { return identity(2); }
inline Mat x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Mat y() {
  Mat m(2, 2);
  m << 0, -I_UNIT, I_UNIT, 0;
  return m;
}
inline Mat z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

// Bipartite helpers on a space C^{d1} (x) C^{d2}; first factor is the slow index.
inline Mat ptrace_second(const Mat& m, Eigen::Index d1, Eigen::Index d2) {
  Mat out = Mat::Zero(d1, d1);
  for (Eigen::Index a = 0; a < d1; ++a)
    for (Eigen::Index b = 0; b < d1; ++b) {
      cplx s = 0;
      for (Eigen::Index k = 0; k < d2; ++k) s += m(a * d2 + k, b * d2 + k);
      out(a, b) = s;
    }
  return out;
}

inline Mat ptrace_first(const Mat& m, Eigen::Index d1, Eigen::Index d2) {
  Mat out = Mat::Zero(d2, d2);
  for (Eigen::Index k = 0; k < d1; ++k) out += m.block(k * d2, k * d2, d2, d2);
  return out;
}

}  // namespace qrf
