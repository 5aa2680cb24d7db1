#pragma once
// Finitely supported multi-indices over dimensions m = 1, 2, 3, ... and
// ordered index sets.  Stored sparsely as (dimension, order) pairs with
// strictly increasing dimensions and strictly positive orders.
//
// Serialization: "m1:o1 m2:o2 ..." with dimensions ascending; the zero index
// serializes to the empty string (an empty line in set files).
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pmel/errors.hpp"

namespace pmel {

class MultiIndex {
 public:
  MultiIndex() = default;

  static MultiIndex zero() { return MultiIndex(); }
  static MultiIndex unit(int dim, int order = 1);

  // Order in dimension `dim` (1-based); 0 if outside the support.
  int order_of(int dim) const;
  int total() const;  // |nu| = sum of orders
  bool is_zero() const { return s_.empty(); }
  int num_active() const { return static_cast<int>(s_.size()); }
  int max_dim() const { return s_.empty() ? 0 : s_.back().first; }

  const std::vector<std::pair<int, int>>& support() const { return s_; }

  // nu + delta * e_dim; throws ValidationFailure if an order would go negative.
  MultiIndex plus(int dim, int delta) const;

  bool operator==(const MultiIndex& o) const { return s_ == o.s_; }
  bool operator!=(const MultiIndex& o) const { return !(*this == o); }

  // Graded order: by |nu| first, then lexicographic on the dense sequence
  // (nu_1, nu_2, ...) ascending.
  bool graded_before(const MultiIndex& o) const;
  // Pure lexicographic comparison on the dense sequence.
  bool lex_before(const MultiIndex& o) const;

  std::string to_string() const;
  static MultiIndex parse(const std::string& line);

  std::size_t hash() const;

 private:
  std::vector<std::pair<int, int>> s_;  // (dim, order), dim ascending
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const { return m.hash(); }
};

// Ordered set of distinct multi-indices, kept in graded order.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<MultiIndex> idx);  // sorts, rejects duplicates

  int size() const { return static_cast<int>(idx_.size()); }
  const MultiIndex& operator[](int i) const { return idx_[i]; }
  const std::vector<MultiIndex>& indices() const { return idx_; }
  bool contains(const MultiIndex& m) const;
  // Position of m in the set, -1 if absent.
  int position(const MultiIndex& m) const;
  bool contains_zero() const { return contains(MultiIndex::zero()); }
  int max_total() const;
  int max_dim() const;

  // One index per line.
  std::string serialize() const;
  static IndexSet deserialize(const std::string& text);

 private:
  std::vector<MultiIndex> idx_;
};

}  // namespace pmel
