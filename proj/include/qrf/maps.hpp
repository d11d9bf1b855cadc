#pragma once

#include "qrf/group.hpp"
#include "qrf/operator.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace qrf {

// Kinematical scene R1 (x) R2 (x) S. Both frames carry the regular
// representation; S carries rep_S. Orientations and group elements are passed
// as indices into the group's lexicographic enumeration.
class Setup {
 public:
  Setup(Group g, std::vector<Mat> rep_s, std::string kind = "explicit")
      : group_(std::move(g)), rep_(std::move(rep_s)), kind_(std::move(kind)) {
    const std::size_t n = group_.order();
    if (rep_.size() != n)
      throw UnitarityError("representation lists " + std::to_string(rep_.size()) + " matrices for a group of order " +
                           std::to_string(n));
    d_s_ = rep_[0].rows();
    if (d_s_ < 1) throw DomainError("system dimension must be positive");
    for (std::size_t a = 0; a < n; ++a) {
      if (rep_[a].rows() != d_s_ || rep_[a].cols() != d_s_)
        throw DomainError("representation matrix " + std::to_string(a) + " has the wrong shape");
      if (!is_unitary(rep_[a]))
        throw UnitarityError("representation matrix for element " + group_.to_string(group_.element(a)) +
                             " is not unitary (residual " + std::to_string(unitarity_residual(rep_[a])) + ")");
    }
    if (max_abs(rep_[0] - identity(d_s_)) > tol::unitary)
      throw UnitarityError("representation of the identity element is not the identity matrix");
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        if (max_abs(rep_[a] * rep_[b] - rep_[group_.mul(a, b)]) > tol::unitary)
          throw UnitarityError("representation is not a homomorphism at elements " + std::to_string(a) + ", " +
                               std::to_string(b));
  }

  static Setup regular(const Group& g) {
    std::vector<Mat> rep;
    for (std::size_t a = 0; a < g.order(); ++a) rep.push_back(g.regular(a));
    return Setup(g, rep, "regular");
  }

  static Setup tensor_power(const Group& g, int m) {
    if (m < 1) throw DomainError("tensor_power needs m >= 1");
    std::vector<Mat> rep;
    for (std::size_t a = 0; a < g.order(); ++a) {
      Mat u = g.regular(a);
      Mat acc = u;
      for (int k = 1; k < m; ++k) acc = kron(acc, u);
      rep.push_back(acc);
    }
    return Setup(g, rep, "tensor_power:" + std::to_string(m));
  }

  const Group& group() const { return group_; }
  std::size_t order() const { return group_.order(); }
  Eigen::Index N() const { return static_cast<Eigen::Index>(group_.order()); }
  Eigen::Index d_S() const { return d_s_; }
  Eigen::Index perspective_dim() const { return N() * d_s_; }
  const Mat& U_S(std::size_t g) const { return rep_.at(g); }
  Mat U_frame(std::size_t g) const { return group_.regular(g); }
  const std::string& rep_kind() const { return kind_; }

  Mat U_kin(std::size_t g) const { return kron(kron(U_frame(g), U_frame(g)), U_S(g)); }

  Factors kin_factors() const { return {{"R1", N()}, {"R2", N()}, {"S", d_s_}}; }
  // Perspective of frame i is (other frame, S).
  Factors perspective_factors(int i) const {
    check_frame(i);
    return {{other_label(i), N()}, {"S", d_s_}};
  }

  static void check_frame(int i) {
    if (i != 1 && i != 2) throw LabelError("frame must be R1 or R2");
  }
  static int other(int i) {
    check_frame(i);
    return 3 - i;
  }
  static std::string label(int i) { return "R" + std::to_string(i); }
  static std::string other_label(int i) { return label(other(i)); }

 private:
  Group group_;
  std::vector<Mat> rep_;
  Eigen::Index d_s_ = 0;
  std::string kind_;
};

// A linear map between two labeled spaces.
struct LinearMap {
  Mat matrix;
  Factors source;
  Factors target;
};

inline Mat ket_bra(Eigen::Index n, Eigen::Index r, Eigen::Index c) {
  Mat m = Mat::Zero(n, n);
  m(r, c) = 1.0;
  return m;
}

// ---- perspective-space helpers: factors (other frame, S) ----------------

inline Mat on_frame(const Setup& s, const Mat& a) { return kron(a, identity(s.d_S())); }
inline Mat on_system(const Setup& s, const Mat& b) { return kron(identity(s.N()), b); }
inline Mat trace_system(const Setup& s, const Mat& m) { return ptrace_second(m, s.N(), s.d_S()); }
inline Mat trace_frame(const Setup& s, const Mat& m) { return ptrace_first(m, s.N(), s.d_S()); }

// ---- maps ----------------------------------------------------------------

inline LabeledOperator pi_phys(const Setup& s) {
  const Eigen::Index d = s.N() * s.N() * s.d_S();
  Mat p = Mat::Zero(d, d);
  for (std::size_t g = 0; g < s.order(); ++g) p += s.U_kin(g);
  return {p / static_cast<double>(s.order()), s.kin_factors()};
}

// Permutation taking the kinematical order to (frame i, other frame, S).
inline Mat kin_to_frame_first(const Setup& s, int i) {
  Setup::check_frame(i);
  const Eigen::Index d = s.N() * s.N() * s.d_S();
  if (i == 1) return identity(d);
  Mat swap = Mat::Zero(d, d);
  for (Eigen::Index a = 0; a < s.N(); ++a)
    for (Eigen::Index b = 0; b < s.N(); ++b)
      for (Eigen::Index k = 0; k < s.d_S(); ++k) swap((b * s.N() + a) * s.d_S() + k, (a * s.N() + b) * s.d_S() + k) = 1.0;
  return swap;
}

// sqrt|G| (<g|_i (x) 1) Pi_phys, a co-isometry onto the perspective space.
inline LinearMap reduction_map(const Setup& s, int i, std::size_t g) {
  const Eigen::Index dp = s.perspective_dim();
  Mat bra = Mat::Zero(dp, s.N() * dp);
  for (Eigen::Index r = 0; r < dp; ++r) bra(r, static_cast<Eigen::Index>(g) * dp + r) = 1.0;
  Mat m = std::sqrt(static_cast<double>(s.order())) * bra * kin_to_frame_first(s, i) * pi_phys(s).matrix;
  return {m, s.kin_factors(), s.perspective_factors(i)};
}

// V_{i->j} = sum_g |g g_i>_i <g_j g^-1|_j (x) U_S^g, from (j,S) to (i,S).
inline LinearMap qrf_transform(const Setup& s, int i, std::size_t gi, std::size_t gj) {
  const auto& G = s.group();
  Mat v = Mat::Zero(s.perspective_dim(), s.perspective_dim());
  for (std::size_t g = 0; g < s.order(); ++g)
    v += kron(ket_bra(s.N(), G.mul(g, gi), G.mul(gj, G.inv(g))), s.U_S(g));
  return {v, s.perspective_factors(i), s.perspective_factors(Setup::other(i))};
}

struct TpsChange {
  Mat U_ibar;       // on (j,S)
  LinearMap frame_swap;  // relabels j -> i
  Mat parity_swap;  // on the frame factor alone
};

inline TpsChange tps_change_unitary(const Setup& s, int i, std::size_t gi, std::size_t gj) {
  const auto& G = s.group();
  Mat u = Mat::Zero(s.perspective_dim(), s.perspective_dim());
  Mat p = Mat::Zero(s.N(), s.N());
  for (std::size_t g = 0; g < s.order(); ++g) {
    Mat kb = ket_bra(s.N(), G.mul(gi, g), G.mul(gj, G.inv(g)));
    u += kron(kb, s.U_S(g));
    p += kb;
  }
  const int j = Setup::other(i);
  return {u, {identity(s.perspective_dim()), s.perspective_factors(j), s.perspective_factors(i)}, p};
}

inline Mat embed_kin(const Setup& s, const Mat& op, const Factors& fs) {
  return embed(LabeledOperator(op, fs), s.kin_factors()).matrix;
}

// O = |G| Pi_phys (|g><g|_i (x) f) Pi_phys with f on (j,S).
inline LabeledOperator relational_observable(const Setup& s, int i, std::size_t g, const LabeledOperator& f) {
  if (f.factors != s.perspective_factors(i))
    throw LabelError("relational observable: f must carry factors (" + Setup::other_label(i) + ", S)");
  Factors fs = {{Setup::label(i), s.N()}};
  fs.insert(fs.end(), f.factors.begin(), f.factors.end());
  const Eigen::Index gi = static_cast<Eigen::Index>(g);
  Mat inner = embed_kin(s, kron(ket_bra(s.N(), gi, gi), f.matrix), fs);
  const Mat p = pi_phys(s).matrix;
  return {static_cast<double>(s.order()) * p * inner * p, s.kin_factors()};
}

inline LabeledOperator g_twirl_inv(const Setup& s, const LabeledOperator& op) {
  if (op.factors != s.kin_factors()) throw LabelError("g_twirl_inv: operator must live on R1, R2, S");
  Mat acc = Mat::Zero(op.matrix.rows(), op.matrix.cols());
  for (std::size_t g = 0; g < s.order(); ++g) {
    const Mat u = s.U_kin(g);
    acc += u * op.matrix * u.adjoint();
  }
  return {acc / static_cast<double>(s.order()), op.factors};
}

// Relation-conditional reorientation of R1, taking R1-relative observables of
// S into R2-relative ones.
inline LabeledOperator symmetry_qrf_transform(const Setup& s, std::size_t g1, std::size_t g2, const LabeledOperator& op) {
  if (op.factors != s.kin_factors()) throw LabelError("symmetry_qrf_transform: operator must live on R1, R2, S");
  const auto& G = s.group();
  const Eigen::Index n = s.N();
  Mat acc = Mat::Zero(op.matrix.rows(), op.matrix.cols());
  for (std::size_t gp = 0; gp < s.order(); ++gp) {
    Mat proj = Mat::Zero(n * n, n * n);
    for (std::size_t g = 0; g < s.order(); ++g) {
      const Eigen::Index a = static_cast<Eigen::Index>(g), b = static_cast<Eigen::Index>(G.mul(g, gp));
      proj(a * n + b, a * n + b) = 1.0;
    }
    const std::size_t shift = G.mul(G.mul(G.inv(g1), g2), G.inv(gp));
    const Mat w = kron(kron(s.U_frame(shift), identity(n)), identity(s.d_S()));
    acc += kron(proj, identity(s.d_S())) * w * op.matrix * w.adjoint();
  }
  return {acc, op.factors};
}

}  // namespace qrf
