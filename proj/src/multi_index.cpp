#include "pmel/multi_index.hpp"

#include <algorithm>
#include <sstream>

namespace pmel {

MultiIndex MultiIndex::unit(int dim, int order) {
  if (dim < 1) throw ValidationFailure("MultiIndex: dimensions are 1-based");
  MultiIndex m;
  if (order < 0) throw ValidationFailure("MultiIndex: negative order");
  if (order > 0) m.s_.push_back({dim, order});
  return m;
}

int MultiIndex::order_of(int dim) const {
  for (const auto& [d, o] : s_)
    if (d == dim) return o;
  return 0;
}

int MultiIndex::total() const {
  int t = 0;
  for (const auto& [d, o] : s_) t += o;
  return t;
}

MultiIndex MultiIndex::plus(int dim, int delta) const {
  if (dim < 1) throw ValidationFailure("MultiIndex: dimensions are 1-based");
  MultiIndex r;
  bool placed = false;
  for (const auto& [d, o] : s_) {
    if (d == dim) {
      const int no = o + delta;
      if (no < 0) throw ValidationFailure("MultiIndex: order would go negative");
      if (no > 0) r.s_.push_back({d, no});
      placed = true;
    } else {
      if (!placed && d > dim) {
        if (delta < 0)
          throw ValidationFailure("MultiIndex: order would go negative");
        if (delta > 0) r.s_.push_back({dim, delta});
        placed = true;
      }
      r.s_.push_back({d, o});
    }
  }
  if (!placed) {
    if (delta < 0) throw ValidationFailure("MultiIndex: order would go negative");
    if (delta > 0) r.s_.push_back({dim, delta});
  }
  return r;
}

bool MultiIndex::lex_before(const MultiIndex& o) const {
  // Compare dense sequences (nu_1, nu_2, ...) entry by entry.
  std::size_t a = 0, b = 0;
  int dim = 1;
  const int last = std::max(max_dim(), o.max_dim());
  for (; dim <= last; ++dim) {
    int va = 0, vb = 0;
    if (a < s_.size() && s_[a].first == dim) va = s_[a++].second;
    if (b < o.s_.size() && o.s_[b].first == dim) vb = o.s_[b++].second;
    if (va != vb) return va < vb;
  }
  return false;
}

bool MultiIndex::graded_before(const MultiIndex& o) const {
  const int ta = total(), tb = o.total();
  if (ta != tb) return ta < tb;
  return lex_before(o);
}

std::string MultiIndex::to_string() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [d, o] : s_) {
    if (!first) os << ' ';
    os << d << ':' << o;
    first = false;
  }
  return os.str();
}

MultiIndex MultiIndex::parse(const std::string& line) {
  MultiIndex m;
  std::istringstream is(line);
  std::string tok;
  int prev_dim = 0;
  while (is >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos)
      throw ValidationFailure("MultiIndex::parse: missing ':' in '" + tok + "'");
    int dim = 0, order = 0;
    try {
      dim = std::stoi(tok.substr(0, colon));
      order = std::stoi(tok.substr(colon + 1));
    } catch (const std::exception&) {
      throw ValidationFailure("MultiIndex::parse: bad token '" + tok + "'");
    }
    if (dim <= prev_dim)
      throw ValidationFailure("MultiIndex::parse: dimensions must ascend");
    if (order <= 0)
      throw ValidationFailure("MultiIndex::parse: orders must be positive");
    m.s_.push_back({dim, order});
    prev_dim = dim;
  }
  return m;
}

std::size_t MultiIndex::hash() const {
  // FNV-1a over the (dim, order) stream.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  for (const auto& [d, o] : s_) {
    mix(static_cast<std::uint64_t>(d));
    mix(static_cast<std::uint64_t>(o));
  }
  return static_cast<std::size_t>(h);
}

IndexSet::IndexSet(std::vector<MultiIndex> idx) : idx_(std::move(idx)) {
  std::sort(idx_.begin(), idx_.end(),
            [](const MultiIndex& a, const MultiIndex& b) {
              return a.graded_before(b);
            });
  for (std::size_t i = 1; i < idx_.size(); ++i)
    if (idx_[i] == idx_[i - 1])
      throw ValidationFailure("IndexSet: duplicate index " +
                              idx_[i].to_string());
}

bool IndexSet::contains(const MultiIndex& m) const { return position(m) >= 0; }

int IndexSet::position(const MultiIndex& m) const {
  auto it = std::lower_bound(idx_.begin(), idx_.end(), m,
                             [](const MultiIndex& a, const MultiIndex& b) {
                               return a.graded_before(b);
                             });
  if (it != idx_.end() && *it == m)
    return static_cast<int>(it - idx_.begin());
  return -1;
}

int IndexSet::max_total() const {
  int t = 0;
  for (const auto& m : idx_) t = std::max(t, m.total());
  return t;
}

int IndexSet::max_dim() const {
  int d = 0;
  for (const auto& m : idx_) d = std::max(d, m.max_dim());
  return d;
}

std::string IndexSet::serialize() const {
  std::ostringstream os;
  for (const auto& m : idx_) os << m.to_string() << '\n';
  return os.str();
}

IndexSet IndexSet::deserialize(const std::string& text) {
  std::vector<MultiIndex> idx;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) idx.push_back(MultiIndex::parse(line));
  return IndexSet(std::move(idx));
}

}  // namespace pmel
