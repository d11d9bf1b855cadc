#pragma once

#include "qrf/core.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace qrf {

struct Factor {
  std::string label;
  Eigen::Index dim = 1;
  bool operator==(const Factor&) const = default;
};
using Factors = std::vector<Factor>;

inline Eigen::Index total_dim(const Factors& fs) {
  Eigen::Index d = 1;
  for (const auto& f : fs) d *= f.dim;
  return d;
}

inline std::size_t factor_position(const Factors& fs, const std::string& label) {
  for (std::size_t k = 0; k < fs.size(); ++k)
    if (fs[k].label == label) return k;
  throw LabelError("missing factor '" + label + "'");
}

inline void check_unique_labels(const Factors& fs) {
  for (std::size_t a = 0; a < fs.size(); ++a)
    for (std::size_t b = a + 1; b < fs.size(); ++b)
      if (fs[a].label == fs[b].label) throw LabelError("label collision on '" + fs[a].label + "'");
}

struct LabeledOperator {
  Mat matrix;
  Factors factors;

  LabeledOperator() = default;
  LabeledOperator(Mat m, Factors fs) : matrix(std::move(m)), factors(std::move(fs)) {
    check_unique_labels(factors);
    const auto d = total_dim(factors);
    if (matrix.rows() != d || matrix.cols() != d)
      throw DomainError("matrix is " + std::to_string(matrix.rows()) + "x" + std::to_string(matrix.cols()) +
                        " but factors multiply to " + std::to_string(d));
  }
};

struct StateVector {
  Vec amplitudes;
  Factors factors;

  StateVector() = default;
  StateVector(Vec v, Factors fs, bool normalize = true) : amplitudes(std::move(v)), factors(std::move(fs)) {
    check_unique_labels(factors);
    if (amplitudes.size() != total_dim(factors))
      throw DomainError("vector length " + std::to_string(amplitudes.size()) + " but factors multiply to " +
                        std::to_string(total_dim(factors)));
    const double n = amplitudes.norm();
    if (n == 0.0) throw DomainError("zero state vector");
    if (normalize) amplitudes /= n;
    if (std::abs(amplitudes.norm() - 1.0) > 1e-10) throw DomainError("state vector is not normalized");
  }

  LabeledOperator projector() const { return {amplitudes * amplitudes.adjoint(), factors}; }
};

// Column-major vectorization: vec(A f B) = (B^T (x) A) vec(f).
struct Superoperator {
  Mat matrix;
  Factors operand_factors;

  Mat apply(const Mat& f) const {
    const auto d = f.rows();
    Mat v = matrix * Eigen::Map<const Vec>(f.data(), d * d);
    return Eigen::Map<Mat>(v.data(), d, d);
  }
  LabeledOperator apply(const LabeledOperator& f) const {
    if (f.factors != operand_factors) throw LabelError("superoperator applied to mismatched factors");
    return {apply(f.matrix), f.factors};
  }
};

inline Vec vec(const Mat& f) { return Eigen::Map<const Vec>(f.data(), f.size()); }
inline Mat unvec(const Vec& v, Eigen::Index d) { return Eigen::Map<const Mat>(v.data(), d, d); }

// ---- index plumbing ------------------------------------------------------

namespace detail {
inline std::vector<Eigen::Index> strides(const std::vector<Eigen::Index>& dims) {
  std::vector<Eigen::Index> s(dims.size(), 1);
  for (std::size_t k = dims.size(); k-- > 1;) s[k - 1] = s[k] * dims[k];
  return s;
}
inline std::vector<Eigen::Index> dims_of(const Factors& fs) {
  std::vector<Eigen::Index> d;
  for (const auto& f : fs) d.push_back(f.dim);
  return d;
}

// new flat index -> old flat index, for result factor k = input factor perm[k]
inline std::vector<Eigen::Index> permutation_map(const std::vector<Eigen::Index>& dims,
                                                 const std::vector<std::size_t>& perm) {
  const std::size_t n = dims.size();
  std::vector<Eigen::Index> new_dims(n);
  for (std::size_t k = 0; k < n; ++k) new_dims[k] = dims[perm[k]];
  const auto old_s = strides(dims);
  const auto new_s = strides(new_dims);
  Eigen::Index d = 1;
  for (auto x : dims) d *= x;
  std::vector<Eigen::Index> to_old(static_cast<std::size_t>(d));
  for (Eigen::Index idx = 0; idx < d; ++idx) {
    Eigen::Index rem = idx, old = 0;
    for (std::size_t k = 0; k < n; ++k) {
      old += (rem / new_s[k]) * old_s[perm[k]];
      rem %= new_s[k];
    }
    to_old[static_cast<std::size_t>(idx)] = old;
  }
  return to_old;
}
}  // namespace detail

// Reorder tensor factors: result factor k is input factor perm[k].
inline Mat permute_factors(const Mat& m, const std::vector<Eigen::Index>& dims, const std::vector<std::size_t>& perm) {
  const auto to_old = detail::permutation_map(dims, perm);
  const Eigen::Index d = m.rows();
  Mat out(d, d);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r) out(r, c) = m(to_old[r], to_old[c]);
  return out;
}

inline Vec permute_factors(const Vec& v, const std::vector<Eigen::Index>& dims, const std::vector<std::size_t>& perm) {
  const auto to_old = detail::permutation_map(dims, perm);
  Vec out(v.size());
  for (Eigen::Index r = 0; r < v.size(); ++r) out(r) = v(to_old[r]);
  return out;
}

inline LabeledOperator tensor(const LabeledOperator& a, const LabeledOperator& b) {
  Factors fs = a.factors;
  fs.insert(fs.end(), b.factors.begin(), b.factors.end());
  return {kron(a.matrix, b.matrix), fs};
}

// Pad with identities on absent labels and permute into target order.
inline LabeledOperator embed(const LabeledOperator& a, const Factors& target) {
  check_unique_labels(target);
  for (const auto& f : a.factors) {
    const auto pos = factor_position(target, f.label);
    if (target[pos].dim != f.dim)
      throw DomainError("factor '" + f.label + "' has dim " + std::to_string(f.dim) + " vs target " +
                        std::to_string(target[pos].dim));
  }
  Factors padded = a.factors;
  Eigen::Index pad_dim = 1;
  for (const auto& f : target)
    if (std::none_of(a.factors.begin(), a.factors.end(), [&](const Factor& x) { return x.label == f.label; })) {
      padded.push_back(f);
      pad_dim *= f.dim;
    }
  Mat m = kron(a.matrix, identity(pad_dim));
  std::vector<std::size_t> perm;
  for (const auto& f : target) perm.push_back(factor_position(padded, f.label));
  return {permute_factors(m, detail::dims_of(padded), perm), target};
}

inline Mat partial_trace_positions(const Mat& m, const std::vector<Eigen::Index>& dims, const std::vector<std::size_t>& drop) {
  std::vector<std::size_t> keep, order;
  for (std::size_t k = 0; k < dims.size(); ++k)
    if (std::find(drop.begin(), drop.end(), k) == drop.end()) keep.push_back(k);
  order = keep;
  order.insert(order.end(), drop.begin(), drop.end());
  Eigen::Index dk = 1, dd = 1;
  for (auto k : keep) dk *= dims[k];
  for (auto k : drop) dd *= dims[k];
  return ptrace_second(permute_factors(m, dims, order), dk, dd);
}

inline LabeledOperator partial_trace(const LabeledOperator& op, const std::string& drop) {
  const auto pos = factor_position(op.factors, drop);
  Factors rest;
  for (std::size_t k = 0; k < op.factors.size(); ++k)
    if (k != pos) rest.push_back(op.factors[k]);
  return {partial_trace_positions(op.matrix, detail::dims_of(op.factors), {pos}), rest};
}

inline cplx hs_inner(const Mat& a, const Mat& b) { return (a.adjoint() * b).trace(); }

inline cplx hs_inner(const LabeledOperator& a, const LabeledOperator& b) {
  if (a.factors != b.factors) throw LabelError("hs_inner: factor lists differ");
  return hs_inner(a.matrix, b.matrix);
}

// ---- spectral functions --------------------------------------------------

struct HermitianEigen {
  RVec values;  // ascending
  Mat vectors;
};

inline HermitianEigen eigh(const Mat& h) {
  require_hermitian(h, "eigh");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (h + h.adjoint()));
  return {es.eigenvalues(), es.eigenvectors()};
}

inline Mat from_spectrum(const Mat& vectors, const RVec& values) {
  return vectors * values.cast<cplx>().asDiagonal() * vectors.adjoint();
}

inline RVec clamp_nonnegative(RVec ev, const char* what) {
  for (auto& x : ev) {
    if (x < -tol::indefinite)
      throw IndefiniteError(std::string(what) + ": eigenvalue " + std::to_string(x) + " below -1e-8");
    if (x < tol::eig_clamp) x = std::max(x, 0.0);
  }
  return ev;
}

// exp(c * A) for normal A. The Schur form of a normal matrix is diagonal, so
// this is spectral exponentiation with an orthonormal eigenbasis even when
// eigenvalues are degenerate.
inline Mat exp_scaled(const Mat& a, cplx c) {
  if (is_hermitian(a)) {
    const auto e = eigh(a);
    Vec d(e.values.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = std::exp(c * e.values(k));
    return e.vectors * d.asDiagonal() * e.vectors.adjoint();
  }
  Eigen::ComplexSchur<Mat> schur(a);
  const Mat& t = schur.matrixT();
  Mat off = t;
  off.diagonal().setZero();
  if (max_abs(off) > 1e-10 * std::max(1.0, max_abs(a))) throw DomainError("exp_scaled: argument is not normal");
  Vec d(t.rows());
  for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = std::exp(c * t(k, k));
  return schur.matrixU() * d.asDiagonal() * schur.matrixU().adjoint();
}

inline Mat logm_psd(const Mat& a) {
  auto e = eigh(a);
  RVec ev = clamp_nonnegative(e.values, "log");
  for (auto& x : ev) {
    if (x <= 0) throw IndefiniteError("log: singular operator (zero eigenvalue)");
    x = std::log(x);
  }
  return from_spectrum(e.vectors, ev);
}

inline Mat power(const Mat& a, double alpha) {
  auto e = eigh(a);
  RVec ev = alpha < 1 ? clamp_nonnegative(e.values, "power") : e.values;
  for (auto& x : ev) {
    if (x == 0.0) {
      x = alpha > 0 ? 0.0 : std::numeric_limits<double>::infinity();
      continue;
    }
    if (x < 0 && alpha != std::floor(alpha)) throw IndefiniteError("power: fractional power of negative eigenvalue");
    x = std::pow(x, alpha);
  }
  return from_spectrum(e.vectors, ev);
}

enum class MatrixFn { exp_scaled, log, power };

inline LabeledOperator hermitian_matrix_function(const LabeledOperator& op, MatrixFn fn, cplx param = 1.0) {
  switch (fn) {
    case MatrixFn::exp_scaled: return {exp_scaled(op.matrix, param), op.factors};
    case MatrixFn::log: return {logm_psd(op.matrix), op.factors};
    case MatrixFn::power: return {power(op.matrix, param.real()), op.factors};
  }
  throw DomainError("unknown matrix function");
}

// ---- superoperators ------------------------------------------------------

// f -> w f w^dagger
inline Mat conjugation_superop(const Mat& w) {
  require_unitary(w, "conjugation_superop");
  return kron(Mat(w.conjugate()), w);
}

inline Superoperator conjugation_superop(const LabeledOperator& w) {
  return {conjugation_superop(w.matrix), w.factors};
}

// Superoperator of an arbitrary linear map, by applying it to matrix units.
inline Mat superop_of(const std::function<Mat(const Mat&)>& f, Eigen::Index d) {
  Mat s(d * d, d * d);
  for (Eigen::Index c = 0; c < d; ++c)
    for (Eigen::Index r = 0; r < d; ++r) {
      Mat e = Mat::Zero(d, d);
      e(r, c) = 1.0;
      s.col(c * d + r) = vec(f(e));
    }
  return s;
}

}  // namespace qrf
