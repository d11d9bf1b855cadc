#pragma once

#include "qrf/tps.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace qrf {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require_density(const Mat& rho, const char* what, double eps = 1e-10) {
  require_hermitian(rho, what);
  if (std::abs(rho.trace().real() - 1.0) > eps) throw DomainError(std::string(what) + ": trace is not 1");
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -eps) throw IndefiniteError(std::string(what) + ": negative eigenvalue");
}

inline double purity(const Mat& rho) { return (rho * rho).trace().real(); }

// ---- constructors ----------------------------------------------------------

inline Vec basis_vector(Eigen::Index d, Eigen::Index k) { return Vec::Unit(d, k); }

inline Vec product_state(const std::vector<Vec>& parts) {
  Vec out = Vec::Ones(1);
  for (const auto& p : parts) out = kron(out, p);
  return out;
}

inline Mat product_density(const std::vector<Mat>& parts) {
  Mat out = Mat::Ones(1, 1);
  for (const auto& p : parts) out = kron(out, p);
  return out;
}

// (1/sqrt n) sum of single excitations on n qubits.
inline Vec w_state(int n) {
  if (n < 1) throw DomainError("W state needs n >= 1");
  const Eigen::Index d = Eigen::Index(1) << n;
  Vec v = Vec::Zero(d);
  for (int k = 0; k < n; ++k) v(Eigen::Index(1) << (n - 1 - k)) = 1.0;
  return v / std::sqrt(static_cast<double>(n));
}

// (1/sqrt|G|) sum_g |g>^{(x) n}
inline Vec ghz_state(const Group& g, int n) {
  if (n < 1) throw DomainError("GHZ state needs n >= 1");
  const auto N = static_cast<Eigen::Index>(g.order());
  Eigen::Index d = 1, stride = 0;
  for (int k = 0; k < n; ++k) d *= N;
  for (int k = 0; k < n; ++k) stride = stride * N + 1;
  Vec v = Vec::Zero(d);
  for (Eigen::Index a = 0; a < N; ++a) v(a * stride) = 1.0;
  return v / std::sqrt(static_cast<double>(N));
}

// |h; chi_k> = (1/sqrt|G|) sum_g chi_k(g) |g, g h>
inline Vec gb_state(const Group& G, std::size_t h, std::size_t k) {
  if (h >= G.order() || k >= G.order()) throw DomainError("generalized Bell labels out of range");
  const auto N = static_cast<Eigen::Index>(G.order());
  Vec v = Vec::Zero(N * N);
  for (std::size_t g = 0; g < G.order(); ++g)
    v(static_cast<Eigen::Index>(g) * N + static_cast<Eigen::Index>(G.mul(g, h))) += G.character(k, g);
  return v / std::sqrt(static_cast<double>(N));
}

inline Mat gibbs(const Mat& h, double beta) {
  const auto e = eigh(h);
  // shift by the ground energy (or top, for beta < 0) to keep exp finite
  const double ref = beta >= 0 ? e.values.minCoeff() : e.values.maxCoeff();
  RVec w(e.values.size());
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = std::exp(-beta * (e.values(k) - ref));
  w /= w.sum();
  return from_spectrum(e.vectors, w);
}

// ---- entropies -------------------------------------------------------------

inline RVec spectrum(const Mat& rho) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double von_neumann(const Mat& rho) {
  double s = 0;
  for (double p : spectrum(rho))
    if (p > tol::eig_clamp) s -= p * std::log(p);
  return std::max(0.0, s);
}

inline double renyi(const Mat& rho, double alpha) {
  if (!(alpha > 0) || alpha == 1.0) throw DomainError("Renyi order must be in (0,1) or (1,inf)");
  double acc = 0;
  for (double p : spectrum(rho))
    if (p > tol::eig_clamp) acc += std::pow(p, alpha);
  return std::max(0.0, std::log(acc) / (1.0 - alpha));
}

// S(rho || sigma); +inf when rho has weight outside the support of sigma.
inline double relative_entropy(const Mat& rho, const Mat& sigma, double support_eps = 1e-12) {
  const auto e = eigh(sigma);
  double cross = 0;
  for (Eigen::Index k = 0; k < e.values.size(); ++k) {
    const double w = (e.vectors.col(k).adjoint() * rho * e.vectors.col(k))(0, 0).real();
    if (e.values(k) <= tol::eig_clamp) {
      if (w > support_eps) return kInf;
      continue;
    }
    cross -= w * std::log(e.values(k));
  }
  return std::max(0.0, -von_neumann(rho) + cross);
}

inline double mutual_information(const Mat& rho, Eigen::Index d1, Eigen::Index d2) {
  return von_neumann(ptrace_second(rho, d1, d2)) + von_neumann(ptrace_first(rho, d1, d2)) - von_neumann(rho);
}

// ---- transforms ------------------------------------------------------------

struct SubsystemTransform {
  Mat rho_jbar;
  Mat rho_S_old, rho_frame_old;  // marginals in the source perspective
  Mat rho_S_new, rho_frame_new;  // marginals in the target perspective
  bool translation_invariant = false;
};

inline bool is_translation_invariant(const Setup& s, const Mat& rho_ibar, double eps = tol::hermitian) {
  for (std::size_t g = 0; g < s.order(); ++g) {
    const Mat u = on_system(s, s.U_S(g));
    if (max_abs(u * rho_ibar - rho_ibar * u) > eps) return false;
  }
  return true;
}

inline SubsystemTransform subsystem_transform(const Setup& s, const Mat& rho_ibar, int i, std::size_t gi, std::size_t gj) {
  const Mat v = qrf_transform(s, i, gi, gj).matrix;
  SubsystemTransform t;
  t.rho_jbar = v * rho_ibar * v.adjoint();
  t.rho_S_old = trace_frame(s, rho_ibar);
  t.rho_frame_old = trace_system(s, rho_ibar);
  t.rho_S_new = trace_frame(s, t.rho_jbar);
  t.rho_frame_new = trace_system(s, t.rho_jbar);
  t.translation_invariant = is_translation_invariant(s, rho_ibar);
  if (t.translation_invariant) t.rho_S_new = t.rho_S_old;  // exact by Pi_t invariance
  return t;
}

struct SpectrumMatch {
  bool match = false;
  double gap = 0;
};

inline SpectrumMatch match_spectra(const RVec& a, const RVec& b, double eps = tol::spectrum) {
  if (a.size() != b.size()) return {false, kInf};
  RVec x = a, y = b;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double gap = (x - y).cwiseAbs().maxCoeff();
  return {gap <= eps, gap};
}

struct EquivalenceWitness {
  std::optional<Mat> Z;  // rho_b = Z^dag rho_a Z
  double spectrum_gap = 0;
  std::optional<bool> translation_invariant;  // of the global state, when supplied
};

inline EquivalenceWitness subsystem_equivalence_witness(const Mat& rho_a, const Mat& rho_b) {
  EquivalenceWitness w;
  if (rho_a.rows() != rho_b.rows()) throw DomainError("equivalence witness: dimension mismatch");
  const auto ea = eigh(rho_a), eb = eigh(rho_b);
  const auto m = match_spectra(ea.values, eb.values);
  w.spectrum_gap = m.gap;
  // eigh sorts ascending, so columns pair up eigenvalue by eigenvalue; inside
  // a degenerate block any pairing is exact.
  if (m.match) w.Z = Mat(ea.vectors * eb.vectors.adjoint());
  return w;
}

inline EquivalenceWitness subsystem_equivalence_witness(const Setup& s, const Mat& rho_ibar, const Mat& rho_a,
                                                        const Mat& rho_b) {
  auto w = subsystem_equivalence_witness(rho_a, rho_b);
  w.translation_invariant = is_translation_invariant(s, rho_ibar);
  return w;
}

struct NegativeTemperaturePrediction {
  std::vector<std::size_t> G_a, G_c;
  bool conditions_hold = false;  // anticommute on G_a, commute on G_c
  double q_a = 0;
  Mat predicted;
};

inline NegativeTemperaturePrediction negative_temperature_predict(const Setup& s, const Mat& H_S, double beta,
                                                                  const Mat& rho_frame, std::size_t gj,
                                                                  bool require_flip = false) {
  require_hermitian(H_S, "negative_temperature_predict");
  const auto& G = s.group();
  NegativeTemperaturePrediction p;
  p.conditions_hold = true;
  for (std::size_t h = 0; h < s.order(); ++h) {
    const Mat& u = s.U_S(h);
    if (max_abs(anticommutator(u, H_S)) <= tol::hermitian) {
      p.G_a.push_back(h);
    } else {
      p.G_c.push_back(h);
      if (max_abs(commutator(u, H_S)) > tol::hermitian) p.conditions_hold = false;
    }
  }
  if (p.G_a.empty()) {
    p.conditions_hold = false;
    if (require_flip) throw PremiseError("no group element anticommutes with H_S");
  }
  for (std::size_t h : p.G_a) {
    const auto idx = static_cast<Eigen::Index>(G.mul(gj, G.inv(h)));
    p.q_a += rho_frame(idx, idx).real();
  }
  p.predicted = p.q_a * gibbs(H_S, -beta) + (1.0 - p.q_a) * gibbs(H_S, beta);
  return p;
}

}  // namespace qrf
