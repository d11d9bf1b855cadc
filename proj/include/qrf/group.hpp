#pragma once

#include "qrf/core.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace qrf {

struct GroupElement {
  std::vector<int> residues;
  bool operator==(const GroupElement&) const = default;
};

// Product of cyclic groups Z_{n_1} x ... x Z_{n_k}. Elements are enumerated
// lexicographically with the first factor most significant; every basis
// downstream uses that index.
class Group {
 public:
  Group() = default;
  explicit Group(std::vector<int> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) throw DomainError("group needs at least one cyclic factor");
    order_ = 1;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      if (factors_[k] < 1)
        throw DomainError("cyclic factor " + std::to_string(k) + " must be >= 1, got " +
                          std::to_string(factors_[k]));
      order_ *= static_cast<std::size_t>(factors_[k]);
    }
    if (order_ < 2) throw DomainError("group must be non-trivial (order >= 2)");
    mul_table_.resize(order_ * order_);
    inv_table_.resize(order_);
    for (std::size_t a = 0; a < order_; ++a) {
      inv_table_[a] = index(inv(element(a)));
      for (std::size_t b = 0; b < order_; ++b) mul_table_[a * order_ + b] = index(mul(element(a), element(b)));
    }
  }

  const std::vector<int>& factors() const { return factors_; }
  std::size_t order() const { return order_; }

  void validate(const GroupElement& a) const {
    if (a.residues.size() != factors_.size())
      throw DomainError("element has " + std::to_string(a.residues.size()) + " residues, group has " +
                        std::to_string(factors_.size()) + " factors");
    for (std::size_t k = 0; k < factors_.size(); ++k)
      if (a.residues[k] < 0 || a.residues[k] >= factors_[k])
        throw DomainError("residue " + std::to_string(a.residues[k]) + " invalid for factor " +
                          std::to_string(k) + " (Z_" + std::to_string(factors_[k]) + ")");
  }

  std::size_t index(const GroupElement& a) const {
    validate(a);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < factors_.size(); ++k)
      idx = idx * static_cast<std::size_t>(factors_[k]) + static_cast<std::size_t>(a.residues[k]);
    return idx;
  }

  GroupElement element(std::size_t idx) const {
    if (idx >= order_) throw DomainError("element index " + std::to_string(idx) + " out of range");
    GroupElement a;
    a.residues.resize(factors_.size());
    for (std::size_t k = factors_.size(); k-- > 0;) {
      a.residues[k] = static_cast<int>(idx % static_cast<std::size_t>(factors_[k]));
      idx /= static_cast<std::size_t>(factors_[k]);
    }
    return a;
  }

  GroupElement identity() const { return GroupElement{std::vector<int>(factors_.size(), 0)}; }

  GroupElement mul(const GroupElement& a, const GroupElement& b) const {
    validate(a);
    validate(b);
    GroupElement c = a;
    for (std::size_t k = 0; k < factors_.size(); ++k) c.residues[k] = (a.residues[k] + b.residues[k]) % factors_[k];
    return c;
  }

  GroupElement inv(const GroupElement& a) const {
    validate(a);
    GroupElement c = a;
    for (std::size_t k = 0; k < factors_.size(); ++k) c.residues[k] = (factors_[k] - a.residues[k]) % factors_[k];
    return c;
  }

  // Index-level arithmetic, used in the hot loops.
  std::size_t mul(std::size_t a, std::size_t b) const { return mul_table_.at(a * order_ + b); }
  std::size_t inv(std::size_t a) const { return inv_table_.at(a); }

  cplx character(const GroupElement& k, const GroupElement& g) const {
    validate(k);
    validate(g);
    double phase = 0;
    for (std::size_t m = 0; m < factors_.size(); ++m)
      phase += static_cast<double>(k.residues[m] * g.residues[m] % factors_[m]) / factors_[m];
    return std::polar(1.0, 2.0 * std::numbers::pi * phase);
  }
  cplx character(std::size_t k, std::size_t g) const { return character(element(k), element(g)); }

  // U^g |h> = |g h>, a permutation matrix in the enumeration basis.
  Mat regular(std::size_t g) const {
    Mat u = Mat::Zero(order_, order_);
    for (std::size_t h = 0; h < order_; ++h) u(mul(g, h), h) = 1.0;
    return u;
  }
  Mat regular(const GroupElement& g) const { return regular(index(g)); }

  std::string to_string(const GroupElement& a) const {
    std::string s = "(";
    for (std::size_t k = 0; k < a.residues.size(); ++k) s += (k ? "," : "") + std::to_string(a.residues[k]);
    return s + ")";
  }

 private:
  std::vector<int> factors_;
  std::size_t order_ = 0;
  std::vector<std::size_t> mul_table_, inv_table_;
};

}  // namespace qrf
