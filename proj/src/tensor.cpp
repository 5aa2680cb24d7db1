#include "pmel/tensor.hpp"

#include <cmath>
#include <vector>

namespace pmel {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void check_dim(int d) {
  if (d != 1 && d != 2) throw DimensionMismatch("SymTensor4: d must be 1 or 2");
}

// Slot v -> index pair (i,j), i <= j.
void slot_pair(int d, int v, int& i, int& j) {
  if (d == 1) {
    i = j = 0;
  } else {
    static const int I[3] = {0, 1, 0};
    static const int J[3] = {0, 1, 1};
    i = I[v];
    j = J[v];
  }
}

int pair_slot(int d, int i, int j) {
  if (d == 1) return 0;
  if (i == j) return i;
  return 2;
}

double slot_scale(int d, int v) { return (d == 2 && v == 2) ? kSqrt2 : 1.0; }

}  // namespace

Eigen::VectorXd sym_to_vec(const Eigen::MatrixXd& s) {
  const int d = static_cast<int>(s.rows());
  check_dim(d);
  Eigen::VectorXd v(voigt_dim(d));
  for (int k = 0; k < v.size(); ++k) {
    int i, j;
    slot_pair(d, k, i, j);
    v[k] = slot_scale(d, k) * 0.5 * (s(i, j) + s(j, i));
  }
  return v;
}

Eigen::MatrixXd vec_to_sym(int d, const Eigen::VectorXd& v) {
  check_dim(d);
  if (v.size() != voigt_dim(d)) throw DimensionMismatch("vec_to_sym: bad length");
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < v.size(); ++k) {
    int i, j;
    slot_pair(d, k, i, j);
    s(i, j) = v[k] / slot_scale(d, k);
    s(j, i) = s(i, j);
  }
  return s;
}

SymTensor4 SymTensor4::from_voigt(int d, const Eigen::MatrixXd& V) {
  check_dim(d);
  const int vd = voigt_dim(d);
  if (V.rows() != vd || V.cols() != vd)
    throw DimensionMismatch("SymTensor4::from_voigt: bad matrix size");
  const double scale = std::max(1.0, V.cwiseAbs().maxCoeff());
  if ((V - V.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale)
    throw ValidationFailure("SymTensor4: matrix not symmetric (major symmetry)");
  SymTensor4 t;
  t.d_ = d;
  t.V_ = 0.5 * (V + V.transpose());
  return t;
}

SymTensor4 SymTensor4::from_entries(int d, const std::vector<double>& a) {
  check_dim(d);
  const int n = d * d * d * d;
  if (static_cast<int>(a.size()) != n)
    throw DimensionMismatch("SymTensor4::from_entries: need d^4 entries");
  auto at = [&](int i, int j, int k, int l) {
    return a[((i * d + j) * d + k) * d + l];
  };
  double scale = 1.0;
  for (double x : a) scale = std::max(scale, std::abs(x));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          const double v = at(i, j, k, l);
          if (std::abs(v - at(j, i, k, l)) > 1e-14 * scale ||
              std::abs(v - at(i, j, l, k)) > 1e-14 * scale ||
              std::abs(v - at(k, l, i, j)) > 1e-14 * scale)
            throw ValidationFailure("SymTensor4: entries violate symmetry");
        }
  const int vd = voigt_dim(d);
  Eigen::MatrixXd V(vd, vd);
  for (int v = 0; v < vd; ++v)
    for (int w = 0; w < vd; ++w) {
      int i, j, k, l;
      slot_pair(d, v, i, j);
      slot_pair(d, w, k, l);
      V(v, w) = slot_scale(d, v) * slot_scale(d, w) * at(i, j, k, l);
    }
  return from_voigt(d, V);
}

SymTensor4 SymTensor4::isotropic(int d, double mu, double lambda) {
  check_dim(d);
  const int vd = voigt_dim(d);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(vd, vd);
  // Diagonal slots: 2 mu + lambda on (ii,ii), lambda couples distinct (ii,jj);
  // the off-diagonal slot carries 2 mu a_{ijij} with the sqrt(2) scaling.
  for (int v = 0; v < d; ++v) {
    for (int w = 0; w < d; ++w) V(v, w) = lambda;
    V(v, v) += 2.0 * mu;
  }
  if (d == 2) V(2, 2) = 2.0 * mu;
  SymTensor4 t;
  t.d_ = d;
  t.V_ = V;
  return t;
}

SymTensor4 SymTensor4::identity_sym(int d) { return isotropic(d, 0.5, 0.0); }

double SymTensor4::entry(int i, int j, int k, int l) const {
  check_dim(d_);
  const int v = pair_slot(d_, i, j);
  const int w = pair_slot(d_, k, l);
  return V_(v, w) / (slot_scale(d_, v) * slot_scale(d_, w));
}

Eigen::MatrixXd SymTensor4::apply(const Eigen::MatrixXd& xi) const {
  check_dim(d_);
  if (xi.rows() != d_ || xi.cols() != d_)
    throw DimensionMismatch("SymTensor4::apply: argument size");
  const double scale = std::max(1.0, xi.cwiseAbs().maxCoeff());
  if ((xi - xi.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationFailure("SymTensor4::apply: argument not symmetric");
  return vec_to_sym(d_, V_ * sym_to_vec(xi));
}

SymTensor4 SymTensor4::inverse() const {
  check_dim(d_);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V_);
  if (es.info() != Eigen::Success)
    throw EigSolverFailure("SymTensor4::inverse: eigensolver failed");
  if (es.eigenvalues().minCoeff() < 1e-12)
    throw SingularTensor("SymTensor4::inverse: smallest eigenvalue " +
                         std::to_string(es.eigenvalues().minCoeff()));
  SymTensor4 t;
  t.d_ = d_;
  t.V_ = V_.inverse();
  t.V_ = 0.5 * (t.V_ + t.V_.transpose().eval());
  return t;
}

double SymTensor4::contract(const Eigen::MatrixXd& xi,
                            const Eigen::MatrixXd& zeta) const {
  return sym_to_vec(zeta).dot(V_ * sym_to_vec(xi));
}

SymTensor4 SymTensor4::scaled(double c) const {
  SymTensor4 t;
  t.d_ = d_;
  t.V_ = c * V_;
  return t;
}

SymTensor4 SymTensor4::plus(const SymTensor4& other) const {
  if (d_ != other.d_) throw DimensionMismatch("SymTensor4::plus: mixed dims");
  SymTensor4 t;
  t.d_ = d_;
  t.V_ = V_ + other.V_;
  return t;
}

double SymTensor4::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V_);
  if (es.info() != Eigen::Success)
    throw EigSolverFailure("SymTensor4: eigensolver failed");
  return es.eigenvalues().minCoeff();
}

double SymTensor4::max_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V_);
  if (es.info() != Eigen::Success)
    throw EigSolverFailure("SymTensor4: eigensolver failed");
  return es.eigenvalues().maxCoeff();
}

double SymTensor4::op_norm() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(V_);
  if (es.info() != Eigen::Success)
    throw EigSolverFailure("SymTensor4: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace pmel
