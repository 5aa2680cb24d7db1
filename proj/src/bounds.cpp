#include "pmel/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <unordered_set>

namespace pmel {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

double checked(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvalidConstants(std::string("make_bound_sequence: ") + what +
                           " must be positive and finite");
  return v;
}

}  // namespace

double BoundSequence::sum() const {
  double s = 0.0;
  for (double v : dhat) s += v;
  return s;
}

double coeff_bound(const MultiIndex& nu, const BoundSequence& b) {
  for (const auto& [dim, order] : nu.support())
    if (dim > b.dims())
      throw DimensionMismatch("coeff_bound: index support exceeds dhat");
  for (double v : b.dhat)
    if (v < 0.0) throw InvalidConstants("coeff_bound: negative dhat entry");
  const int total = nu.total();
  if (total == 0) return 1.0;
  if (total <= 20) {
    // Exact integer multinomial |nu|! / nu!, built as a product of binomials.
    unsigned __int128 multinomial = 1;
    int placed = 0;
    for (const auto& [dim, order] : nu.support()) {
      for (int i = 1; i <= order; ++i) {
        multinomial = multinomial * static_cast<unsigned>(placed + i) / i;
      }
      placed += order;
    }
    double prod = static_cast<double>(multinomial);
    for (const auto& [dim, order] : nu.support())
      prod *= std::pow(b.dhat[dim - 1], order);
    return prod;
  }
  double lg = std::lgamma(total + 1.0);
  for (const auto& [dim, order] : nu.support()) {
    lg -= std::lgamma(order + 1.0);
    const double dm = b.dhat[dim - 1];
    if (dm == 0.0) return 0.0;
    lg += order * std::log(dm);
  }
  return std::exp(lg);
}

BoundSequence make_bound_sequence(const DisplacementConstants& c) {
  checked(c.alpha, "alpha");
  BoundSequence b;
  b.kind = BoundKind::displacement;
  for (double bm : c.beta) {
    if (bm < 0.0) throw InvalidConstants("make_bound_sequence: beta_m < 0");
    b.dhat.push_back(bm / (kSqrt3 * c.alpha));
  }
  return b;
}

BoundSequence make_bound_sequence(const MixedConstants& c) {
  checked(c.alpha0, "alpha0");
  checked(c.beta0, "beta0");
  const double t = 1.0 / c.alpha0 + c.beta0 / (c.alpha0 * c.alpha0);
  double sum_beta = 0.0;
  for (double bm : c.beta) {
    if (bm < 0.0) throw InvalidConstants("make_bound_sequence: beta_m < 0");
    sum_beta += bm;
  }
  const double denom = 1.0 - t * sum_beta;
  if (denom <= 0.0)
    throw AlphaStrongViolated(
        "make_bound_sequence: (1/alpha0 + beta0/alpha0^2) sum beta_m >= 1");
  BoundSequence b;
  b.kind = BoundKind::mixed;
  for (double bm : c.beta) b.dhat.push_back(t * bm / denom / kSqrt3);
  return b;
}

double incompressible_threshold(const IncompressibleConstants& c) {
  const double R = 1.0 + c.mu_max / c.mu_min;
  return 4.0 * c.mu_max * (1.0 + c.kappa0) * R * (c.c7 * c.c7) /
         (c.c0 * c.c0);
}

BoundSequence make_bound_sequence(const IncompressibleConstants& c) {
  checked(c.mu_min, "mu_min");
  checked(c.mu_max, "mu_max");
  checked(c.lambda_min, "lambda_min");
  checked(c.lambda_bar_min, "lambda_bar_min");
  checked(c.c0, "c0");
  checked(c.c7, "c7");
  if (!(c.zeta > 0.0 && c.zeta < 1.0))
    throw InvalidConstants("make_bound_sequence: zeta must lie in (0,1)");
  if (c.gamma.size() != c.delta.size())
    throw DimensionMismatch("make_bound_sequence: gamma/delta length mismatch");
  const double theta2 = incompressible_threshold(c);
  if (c.lambda_bar_min <= theta2)
    throw InvalidConstants(
        "make_bound_sequence: lambda_bar_min below robustness threshold " +
        std::to_string(theta2));
  const double R = 1.0 + c.mu_max / c.mu_min;
  const double C1 = 4.0 * c.c7 * c.c7 * c.mu_min * R * R / (c.c0 * c.c0);
  const double C2 = c.c7 / c.c0 * R;
  const double C3 =
      4.0 * c.mu_max * c.c7 * c.c7 * c.c7 * R * R / (c.c0 * c.c0 * c.c0);
  const double C4 = 4.0 * c.c7 * c.mu_min * R / c.c0;
  const double C5 = 4.0 * c.mu_max * c.c7 * c.c7 * R / (c.c0 * c.c0);
  const double lm = c.lambda_min;
  const double mu_part_factor =
      1.0 + C1 / lm + C4 / std::pow(lm, c.zeta);
  const double la_part_factor = 1.0 + C2 / std::pow(lm, 1.0 - c.zeta) +
                                C3 / std::pow(lm, 2.0 - c.zeta) + C5 / lm;
  BoundSequence b;
  b.kind = BoundKind::incompressible;
  for (std::size_t m = 0; m < c.gamma.size(); ++m) {
    if (c.gamma[m] < 0.0 || c.delta[m] < 0.0)
      throw InvalidConstants("make_bound_sequence: negative mode bound");
    const double hm = std::max(c.gamma[m] / c.mu_min * mu_part_factor,
                               c.delta[m] / lm * la_part_factor);
    b.dhat.push_back(hm / kSqrt3);
  }
  return b;
}

namespace {

// Total order used for ranking: larger bound first, then smaller |nu|,
// then lexicographically smaller dense sequence.
struct Ranked {
  double bound;
  double cert;  // max(bound, S^{|nu|+1}); monotone along the lattice
  MultiIndex nu;
};

bool rank_before(const Ranked& a, const Ranked& b) {
  if (a.bound != b.bound) return a.bound > b.bound;
  const int ta = a.nu.total(), tb = b.nu.total();
  if (ta != tb) return ta < tb;
  return a.nu.lex_before(b.nu);
}

// Priority queue comparator by certificate (then the rank order for ties).
struct CertLess {
  bool operator()(const Ranked& a, const Ranked& b) const {
    if (a.cert != b.cert) return a.cert < b.cert;
    return !rank_before(a, b);
  }
};

}  // namespace

IndexSet best_n_indices(const BoundSequence& b, int N,
                        std::vector<std::string>* warnings) {
  if (N < 1) throw ValidationFailure("best_n_indices: N >= 1 required");
  const int M = b.dims();
  const double S = b.sum();
  const bool decaying = S < 1.0;
  if (!decaying && warnings)
    warnings->push_back(
        "best_n_indices: l1 norm of dhat >= 1; falling back to a graded "
        "level cap, result may be inexact");

  auto make_ranked = [&](const MultiIndex& nu) {
    Ranked r;
    r.nu = nu;
    r.bound = coeff_bound(nu, b);
    r.cert = decaying ? std::max(r.bound, std::pow(S, nu.total() + 1))
                      : r.bound;
    return r;
  };

  std::priority_queue<Ranked, std::vector<Ranked>, CertLess> queue;
  std::unordered_set<MultiIndex, MultiIndexHash> seen;
  std::vector<Ranked> best;  // kept sorted by rank_before, size <= N

  auto nth_bound = [&]() {
    return (static_cast<int>(best.size()) < N)
               ? -1.0
               : best.back().bound;
  };

  queue.push(make_ranked(MultiIndex::zero()));
  seen.insert(MultiIndex::zero());
  const int level_cap = decaying ? 512 : 24;  // safety net
  long nodes = 0;
  while (!queue.empty()) {
    const Ranked top = queue.top();
    // Nothing reachable can beat (or tie into) the current top N.
    if (static_cast<int>(best.size()) == N &&
        top.cert < nth_bound() * (1.0 - 1e-15))
      break;
    queue.pop();
    ++nodes;
    if (nodes > 2000000) {
      if (warnings)
        warnings->push_back(
            "best_n_indices: node budget exhausted, result may be inexact");
      break;
    }

    auto pos = std::lower_bound(best.begin(), best.end(), top, rank_before);
    if (static_cast<int>(best.size()) < N) {
      best.insert(pos, top);
    } else if (pos != best.end()) {
      best.insert(pos, top);
      best.pop_back();
    }

    if (top.nu.total() >= level_cap) continue;
    for (int m = 1; m <= M; ++m) {
      if (b.dhat[m - 1] == 0.0) continue;
      MultiIndex child = top.nu.plus(m, 1);
      if (seen.insert(child).second) queue.push(make_ranked(child));
    }
  }
  std::vector<MultiIndex> out;
  out.reserve(best.size());
  for (const auto& r : best) out.push_back(r.nu);
  return IndexSet(std::move(out));
}

IndexSet downward_close(const IndexSet& set) {
  std::unordered_set<MultiIndex, MultiIndexHash> all;
  std::vector<MultiIndex> work = set.indices();
  for (const auto& m : set.indices()) all.insert(m);
  while (!work.empty()) {
    MultiIndex nu = work.back();
    work.pop_back();
    for (const auto& [dim, order] : nu.support()) {
      MultiIndex parent = nu.plus(dim, -1);
      if (all.insert(parent).second) work.push_back(parent);
    }
  }
  return IndexSet(std::vector<MultiIndex>(all.begin(), all.end()));
}

StechkinCheck stechkin_tail(const std::vector<double>& b, int N, double p,
                            double q) {
  if (!(p > 0.0) || !(q > p))
    throw InvalidConstants("stechkin_tail: need 0 < p < q");
  if (N < 1) throw InvalidConstants("stechkin_tail: N >= 1");
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (b[i] <= 0.0)
      throw NonPositiveData("stechkin_tail: entries must be positive");
    if (i > 0 && b[i] > b[i - 1] * (1.0 + 1e-14))
      throw NotSorted("stechkin_tail: sequence increases at position " +
                      std::to_string(i + 1));
  }
  StechkinCheck out;
  double tail_q = 0.0, sum_p = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    sum_p += std::pow(b[i], p);
    if (static_cast<int>(i) + 1 > N) tail_q += std::pow(b[i], q);
  }
  out.lhs = std::pow(tail_q, 1.0 / q);
  out.rhs = std::pow(static_cast<double>(N), 1.0 / q - 1.0 / p) *
            std::pow(sum_p, 1.0 / p);
  return out;
}

SummabilityCertificate summability_certificate(const std::vector<double>& seq,
                                               double p, double kappa,
                                               BoundKind kind, double theta) {
  if (!(p > 0.0 && p < 1.0))
    throw InvalidConstants("summability_certificate: need 0 < p < 1");
  SummabilityCertificate cert;
  cert.rate = 1.0 / p - 0.5;
  cert.kappa_limit =
      (kind == BoundKind::incompressible) ? kSqrt3 / (1.0 + theta) : kSqrt3;
  std::ostringstream detail;
  if (kappa >= cert.kappa_limit)
    detail << "kappa = " << kappa << " not below threshold " << cert.kappa_limit
           << "; ";
  double lp = 0.0;
  int n_pos = 0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t m = 0; m < seq.size(); ++m) {
    if (seq[m] < 0.0) {
      detail << "negative entry at m = " << (m + 1) << "; ";
      continue;
    }
    lp += std::pow(seq[m], p);
    if (seq[m] > 0.0) {
      const double x = std::log(static_cast<double>(m + 1));
      const double y = std::log(seq[m]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n_pos;
    }
  }
  cert.lp_sum = lp;
  if (n_pos >= 3) {
    const double den = n_pos * sxx - sx * sx;
    cert.decay_exponent = (den > 0.0) ? -(n_pos * sxy - sx * sy) / den : 0.0;
    if (cert.decay_exponent <= 1.0 / p)
      detail << "fitted decay exponent " << cert.decay_exponent
             << " does not exceed 1/p = " << 1.0 / p << "; ";
  }
  cert.detail = detail.str();
  cert.ok = cert.detail.empty();
  return cert;
}

}  // namespace pmel
