#pragma once

// Dense complex matrix kernels: Hermitian Jacobi eigensolver, SVD, norms,
// polar decomposition and Hermitian functional calculus.
//
// Sizes here are small (n <= 64), so everything is plain row-major storage
// with O(n^3) loops. All routines are pure and deterministic.

#include <algorithm>
#include <cmath>
#include <complex>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opgeo/error.hpp"

namespace opgeo::linalg {

using Complex = std::complex<double>;

class ComplexMatrix {
 public:
  ComplexMatrix() = default;

  ComplexMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), entries_(rows * cols, Complex{0.0, 0.0}) {}

  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> entries)
      : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (entries_.size() != rows_ * cols_)
      throw Error(ErrorKind::invalid_argument,
                  "matrix entry count " + std::to_string(entries_.size()) + " does not match " +
                      std::to_string(rows_) + "x" + std::to_string(cols_));
    for (const auto& z : entries_)
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag()))
        throw Error(ErrorKind::invalid_argument, "matrix entries must be finite");
  }

  static ComplexMatrix identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static ComplexMatrix zeros(std::size_t rows, std::size_t cols) { return {rows, cols}; }

  static ComplexMatrix diagonal(std::span<const double> d) {
    ComplexMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  static ComplexMatrix diagonal(std::initializer_list<double> d) {
    std::vector<double> v(d);
    return diagonal(std::span<const double>(v));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }
  bool empty() const noexcept { return entries_.empty(); }

  Complex& operator()(std::size_t i, std::size_t j) { return entries_[i * cols_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const { return entries_[i * cols_ + j]; }

  std::span<const Complex> entries() const noexcept { return entries_; }

  ComplexMatrix adjoint() const {
    ComplexMatrix r(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) r(j, i) = std::conj((*this)(i, j));
    return r;
  }

  Complex trace() const {
    Complex t{};
    for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
    return t;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (const auto& z : entries_) s += std::norm(z);
    return std::sqrt(s);
  }

  std::vector<Complex> column(std::size_t j) const {
    std::vector<Complex> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
  }

  void set_column(std::size_t j, std::span<const Complex> c) {
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = c[i];
  }

  ComplexMatrix& operator+=(const ComplexMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] += o.entries_[k];
    return *this;
  }

  ComplexMatrix& operator-=(const ComplexMatrix& o) {
    require_same_shape(o);
    for (std::size_t k = 0; k < entries_.size(); ++k) entries_[k] -= o.entries_[k];
    return *this;
  }

  ComplexMatrix& operator*=(Complex s) {
    for (auto& z : entries_) z *= s;
    return *this;
  }

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, Complex s) { return a *= s; }
  friend ComplexMatrix operator*(Complex s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(double s, ComplexMatrix a) { return a *= Complex{s, 0.0}; }

  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols_ != b.rows_)
      throw Error(ErrorKind::shape_mismatch, "matrix product of incompatible shapes");
    ComplexMatrix r(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const Complex aik = a(i, k);
        if (aik == Complex{}) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
      }
    return r;
  }

  friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

 private:
  void require_same_shape(const ComplexMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw Error(ErrorKind::shape_mismatch, "matrix shapes differ");
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> entries_;
};

inline ComplexMatrix hermitian_part(const ComplexMatrix& a) {
  return 0.5 * (a + a.adjoint());
}

struct SpectralDecomposition {
  std::vector<double> eigenvalues;  // ascending
  ComplexMatrix eigenvectors;       // columns orthonormal
};

struct SVDResult {
  ComplexMatrix left;                  // unitary, rows x rows
  std::vector<double> singular_values;  // descending, min(rows, cols) entries
  ComplexMatrix right;                 // unitary, cols x cols
};

enum class PolarSide { left, right };

struct PolarDecomposition {
  PolarSide side = PolarSide::left;
  ComplexMatrix absolute;
  ComplexMatrix isometry;
};

// Off-diagonal threshold for the Jacobi sweeps, relative to the Frobenius
// norm. Thread-local so a caller can tighten it for one computation.
inline double& jacobi_tolerance() {
  thread_local double tol = 1e-15;
  return tol;
}

class ScopedJacobiTolerance {
 public:
  explicit ScopedJacobiTolerance(double tol) : saved_(jacobi_tolerance()) { jacobi_tolerance() = tol; }
  ~ScopedJacobiTolerance() { jacobi_tolerance() = saved_; }
  ScopedJacobiTolerance(const ScopedJacobiTolerance&) = delete;
  ScopedJacobiTolerance& operator=(const ScopedJacobiTolerance&) = delete;

 private:
  double saved_;
};

namespace detail {

inline constexpr int kMaxSweeps = 80;

// Unitary J acting on coordinates (p, q) that diagonalizes the Hermitian 2x2
// block [[app, apq], [conj(apq), aqq]] via J* B J:
//   J = [[c, s], [-s*conj(phase), c*conj(phase)]],  phase = apq / |apq|.
struct Rotation {
  double c = 1.0;
  double s = 0.0;
  Complex phase{1.0, 0.0};

  Complex pp() const { return c; }
  Complex pq() const { return s; }
  Complex qp() const { return -s * std::conj(phase); }
  Complex qq() const { return c * std::conj(phase); }
};

inline Rotation jacobi_rotation(double app, double aqq, Complex apq) {
  const double mag = std::abs(apq);
  Rotation r;
  if (mag == 0.0) return r;
  r.phase = apq / mag;
  const double theta = (aqq - app) / (2.0 * mag);
  double t;
  if (std::abs(theta) > 1e150)
    t = 0.5 / theta;
  else
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  r.c = 1.0 / std::sqrt(1.0 + t * t);
  r.s = t * r.c;
  return r;
}

// A <- A J on columns p, q.
inline void rotate_columns(ComplexMatrix& a, std::size_t p, std::size_t q, const Rotation& r) {
  const Complex jpp = r.pp(), jpq = r.pq(), jqp = r.qp(), jqq = r.qq();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const Complex akp = a(k, p), akq = a(k, q);
    a(k, p) = akp * jpp + akq * jqp;
    a(k, q) = akp * jpq + akq * jqq;
  }
}

// A <- J* A on rows p, q.
inline void rotate_rows(ComplexMatrix& a, std::size_t p, std::size_t q, const Rotation& r) {
  const Complex jpp = std::conj(r.pp()), jpq = std::conj(r.pq()), jqp = std::conj(r.qp()),
                jqq = std::conj(r.qq());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const Complex apk = a(p, k), aqk = a(q, k);
    a(p, k) = jpp * apk + jqp * aqk;
    a(q, k) = jpq * apk + jqq * aqk;
  }
}

// Cyclic Jacobi on the Hermitian part of `a`. Eigenvalues ascending; the
// eigenvector matrix is left empty when `want_vectors` is false.
inline SpectralDecomposition jacobi_eigen(const ComplexMatrix& input, bool want_vectors) {
  const std::size_t n = input.rows();
  ComplexMatrix a = hermitian_part(input);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();
  ComplexMatrix v = want_vectors ? ComplexMatrix::identity(n) : ComplexMatrix{};

  const double scale = a.frobenius_norm();
  const double threshold = jacobi_tolerance() * scale;
  for (int sweep = 0; sweep < kMaxSweeps && scale > 0.0; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        if (std::abs(apq) <= threshold) continue;
        const Rotation r = jacobi_rotation(a(p, p).real(), a(q, q).real(), apq);
        rotate_columns(a, p, q, r);
        rotate_rows(a, p, q, r);
        a(p, q) = a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        if (want_vectors) rotate_columns(v, p, q, r);
        rotated = true;
      }
    if (!rotated) break;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });
  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  for (std::size_t k = 0; k < n; ++k) out.eigenvalues[k] = a(order[k], order[k]).real();
  if (want_vectors) {
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = v(i, order[k]);
  }
  return out;
}

inline double column_norm(const ComplexMatrix& a, std::size_t j) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += std::norm(a(i, j));
  return std::sqrt(s);
}

inline Complex column_dot(const ComplexMatrix& a, std::size_t i, const ComplexMatrix& b, std::size_t j) {
  Complex s{};
  for (std::size_t k = 0; k < a.rows(); ++k) s += std::conj(a(k, i)) * b(k, j);
  return s;
}

// Orthonormalizes columns [0, fixed) of `q` in place (two Gram-Schmidt
// passes), then fills columns [fixed, cols), plus any fixed column that was
// numerically dependent, from the standard basis in index order.
inline void orthonormal_completion(ComplexMatrix& q, std::size_t fixed) {
  const std::size_t m = q.rows();
  std::vector<std::size_t> accepted;
  auto orthogonalize = [&](std::vector<Complex>& w) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i : accepted) {
        Complex d{};
        for (std::size_t k = 0; k < m; ++k) d += std::conj(q(k, i)) * w[k];
        for (std::size_t k = 0; k < m; ++k) w[k] -= d * q(k, i);
      }
  };
  auto norm_of = [](const std::vector<Complex>& w) {
    double s = 0.0;
    for (const auto& z : w) s += std::norm(z);
    return std::sqrt(s);
  };
  std::vector<std::size_t> missing;
  for (std::size_t j = 0; j < fixed; ++j) {
    std::vector<Complex> w = q.column(j);
    const double before = norm_of(w);
    orthogonalize(w);
    const double nrm = norm_of(w);
    if (before == 0.0 || nrm <= 1e-10 * before) {
      missing.push_back(j);
      continue;
    }
    for (auto& z : w) z /= nrm;
    q.set_column(j, w);
    accepted.push_back(j);
  }
  for (std::size_t j = fixed; j < q.cols(); ++j) missing.push_back(j);
  std::size_t slot = 0;
  for (std::size_t e = 0; e < m && slot < missing.size(); ++e) {
    std::vector<Complex> w(m, Complex{});
    w[e] = 1.0;
    orthogonalize(w);
    const double nrm = norm_of(w);
    if (nrm < 1e-6) continue;
    for (auto& z : w) z /= nrm;
    q.set_column(missing[slot], w);
    accepted.push_back(missing[slot++]);
  }
}

// Full SVD for rows >= cols: initial right frame from the eigenvectors of
// A*A, then one-sided Jacobi on A V until the columns are orthogonal to
// working precision, then column recovery plus completion for the left frame.
inline SVDResult tall_svd(const ComplexMatrix& a) {
  const std::size_t m = a.rows(), n = a.cols();
  const ComplexMatrix gram = a.adjoint() * a;
  SpectralDecomposition eig = jacobi_eigen(gram, true);
  // Descending, ties kept in ascending index order so that degenerate
  // spectra (e.g. the identity) keep the standard frame.
  std::vector<std::size_t> desc(n);
  std::iota(desc.begin(), desc.end(), 0);
  std::stable_sort(desc.begin(), desc.end(),
                   [&](std::size_t i, std::size_t j) { return eig.eigenvalues[i] > eig.eigenvalues[j]; });
  ComplexMatrix v(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) v(i, k) = eig.eigenvectors(i, desc[k]);
  ComplexMatrix b = a * v;

  const double tol = std::max(jacobi_tolerance(), 1e-17);
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = std::norm(column_norm(b, p));
        const double beta = std::norm(column_norm(b, q));
        const Complex gamma = column_dot(b, p, b, q);
        if (std::abs(gamma) <= tol * std::sqrt(alpha * beta) || alpha == 0.0 || beta == 0.0) continue;
        const Rotation r = jacobi_rotation(alpha, beta, gamma);
        rotate_columns(b, p, q, r);
        rotate_columns(v, p, q, r);
        rotated = true;
      }
    if (!rotated) break;
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = column_norm(b, j);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

  SVDResult out;
  out.singular_values.resize(n);
  out.right = ComplexMatrix(n, n);
  out.left = ComplexMatrix(m, m);
  const double smax = n > 0 ? sigma[order[0]] : 0.0;
  const double negligible = 64.0 * std::numeric_limits<double>::epsilon() * smax;
  std::size_t recovered = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.singular_values[k] = sigma[j];
    for (std::size_t i = 0; i < n; ++i) out.right(i, k) = v(i, j);
    if (sigma[j] > negligible && sigma[j] > 0.0) {
      for (std::size_t i = 0; i < m; ++i) out.left(i, k) = b(i, j) / sigma[j];
      recovered = k + 1;
    }
  }
  orthonormal_completion(out.left, recovered);
  return out;
}

}  // namespace detail

inline void require_square(const ComplexMatrix& a, const char* what) {
  if (!a.is_square())
    throw Error(ErrorKind::shape_mismatch, std::string(what) + " requires a square matrix, got " +
                                               std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
}

inline SVDResult svd(const ComplexMatrix& a) {
  if (a.rows() >= a.cols()) return detail::tall_svd(a);
  SVDResult t = detail::tall_svd(a.adjoint());
  return SVDResult{std::move(t.right), std::move(t.singular_values), std::move(t.left)};
}

inline std::vector<double> singular_values(const ComplexMatrix& a) {
  const ComplexMatrix gram = a.rows() >= a.cols() ? a.adjoint() * a : a * a.adjoint();
  auto eig = detail::jacobi_eigen(gram, false).eigenvalues;
  std::vector<double> s(eig.size());
  for (std::size_t k = 0; k < eig.size(); ++k) s[k] = std::sqrt(std::max(eig[eig.size() - 1 - k], 0.0));
  return s;
}

inline double operator_norm(const ComplexMatrix& a) {
  if (a.empty()) return 0.0;
  const ComplexMatrix gram = a.rows() >= a.cols() ? a.adjoint() * a : a * a.adjoint();
  if (gram.rows() == 1) return std::sqrt(gram(0, 0).real());
  const auto eig = detail::jacobi_eigen(gram, false).eigenvalues;
  return std::sqrt(std::max(eig.back(), 0.0));
}

inline double trace_norm(const ComplexMatrix& a) {
  const auto s = svd(a).singular_values;
  return std::accumulate(s.begin(), s.end(), 0.0);
}

inline double min_singular_value(const ComplexMatrix& a) {
  const auto s = svd(a).singular_values;
  return s.empty() ? 0.0 : s.back();
}

inline double hermitian_defect(const ComplexMatrix& a) { return operator_norm(a - a.adjoint()); }

inline SpectralDecomposition hermitian_eig(const ComplexMatrix& a) {
  require_square(a, "hermitian_eig");
  const double defect = hermitian_defect(a);
  if (defect > 1e-9 * std::max(1.0, operator_norm(a)))
    throw Error(ErrorKind::invalid_argument,
                "hermitian_eig: input is not Hermitian (||A - A*|| = " + std::to_string(defect) + ")");
  return detail::jacobi_eigen(a, true);
}

inline double min_eigenvalue_hermitian_part(const ComplexMatrix& a) {
  require_square(a, "min_eigenvalue_hermitian_part");
  return detail::jacobi_eigen(a, false).eigenvalues.front();
}

// U diag(phi(lambda)) U* for Hermitian A.
template <std::invocable<double> F>
ComplexMatrix apply_function_hermitian(const ComplexMatrix& a, F&& phi) {
  const SpectralDecomposition eig = hermitian_eig(a);
  const std::size_t n = a.rows();
  ComplexMatrix scaled = eig.eigenvectors;
  for (std::size_t k = 0; k < n; ++k) {
    const double fk = static_cast<double>(phi(eig.eigenvalues[k]));
    for (std::size_t i = 0; i < n; ++i) scaled(i, k) *= fk;
  }
  return hermitian_part(scaled * eig.eigenvectors.adjoint());
}

// Polar factors from the SVD A = W S V*: left is A = (W S W*)(W V*), right is
// A = (W V*)(V S V*). On singular input the completed columns of W make the
// isometry a deterministic unitary extension.
inline PolarDecomposition polar(const ComplexMatrix& a, PolarSide side = PolarSide::left) {
  require_square(a, "polar");
  const SVDResult s = svd(a);
  const ComplexMatrix sig = ComplexMatrix::diagonal(std::span<const double>(s.singular_values));
  PolarDecomposition out;
  out.side = side;
  out.isometry = s.left * s.right.adjoint();
  out.absolute = side == PolarSide::left ? hermitian_part(s.left * sig * s.left.adjoint())
                                         : hermitian_part(s.right * sig * s.right.adjoint());
  return out;
}

// Unitary factor of a QR factorization (R with positive diagonal). Columns
// that are numerically dependent are completed from the standard basis.
inline ComplexMatrix qr_unitary(const ComplexMatrix& a) {
  require_square(a, "qr_unitary");
  ComplexMatrix q = a;
  detail::orthonormal_completion(q, q.cols());
  return q;
}

// Columns of V spanning the numerical kernel {v : ||A v|| <= tol * sigma_max}.
inline ComplexMatrix null_space(const ComplexMatrix& a, double tol) {
  const SVDResult s = svd(a);
  const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
  std::size_t rank = 0;
  for (double sv : s.singular_values)
    if (sv > tol * smax) ++rank;
  const std::size_t n = a.cols();
  ComplexMatrix basis(n, n - rank);
  for (std::size_t k = rank; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) basis(i, k - rank) = s.right(i, k);
  return basis;
}

// Minimum-norm least-squares solution of A x = b via the pseudo-inverse.
inline std::vector<Complex> solve_least_squares(const ComplexMatrix& a, std::span<const Complex> b,
                                                double rcond = 1e-12) {
  if (b.size() != a.rows()) throw Error(ErrorKind::shape_mismatch, "solve_least_squares: rhs length");
  const SVDResult s = svd(a);
  const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
  std::vector<Complex> x(a.cols(), Complex{});
  for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
    const double sv = s.singular_values[k];
    if (sv <= rcond * smax || sv == 0.0) continue;
    Complex coef{};
    for (std::size_t i = 0; i < a.rows(); ++i) coef += std::conj(s.left(i, k)) * b[i];
    coef /= sv;
    for (std::size_t i = 0; i < a.cols(); ++i) x[i] += coef * s.right(i, k);
  }
  return x;
}

}  // namespace opgeo::linalg
