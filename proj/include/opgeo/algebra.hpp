#pragma once

// Finite direct sums of full matrix algebras M_{n1} + ... + M_{nk} with the
// max-of-blocks operator norm, their duals under the trace pairing, and the
// exact description of norming-functional sets
//   S_x = { f : f(x) = ||f|| = 1 }.
//
// In finite dimensions the dual and the predual are the same space, so one
// description serves both the C*-algebra and the von Neumann algebra
// statements. Likewise a weak*-dense C*-subalgebra of such an algebra is the
// whole algebra, so nothing separate is modelled for it.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "opgeo/linalg.hpp"

namespace opgeo::algebra {

using linalg::Complex;
using linalg::ComplexMatrix;
using Rng = std::mt19937_64;

class AlgebraShape {
 public:
  AlgebraShape() = default;

  explicit AlgebraShape(std::vector<std::size_t> block_dims) : dims_(std::move(block_dims)) {
    if (dims_.empty()) throw Error(ErrorKind::invalid_argument, "algebra shape needs at least one block");
    for (std::size_t d : dims_)
      if (d == 0) throw Error(ErrorKind::invalid_argument, "block dimensions must be positive");
  }

  const std::vector<std::size_t>& block_dims() const noexcept { return dims_; }
  std::size_t block_count() const noexcept { return dims_.size(); }
  std::size_t block_dim(std::size_t i) const { return dims_.at(i); }

  std::size_t dual_dimension() const noexcept {
    std::size_t total = 0;
    for (std::size_t d : dims_) total += d * d;
    return total;
  }

  // "M2+M3" style label.
  std::string to_string() const {
    std::string s;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
      if (i) s += '+';
      s += 'M' + std::to_string(dims_[i]);
    }
    return s;
  }

  friend bool operator==(const AlgebraShape&, const AlgebraShape&) = default;

 private:
  std::vector<std::size_t> dims_;
};

inline void require_same_shape(const AlgebraShape& a, const AlgebraShape& b, const char* what) {
  if (a != b)
    throw Error(ErrorKind::shape_mismatch,
                std::string(what) + ": shapes " + a.to_string() + " and " + b.to_string() + " differ");
}

class Element {
 public:
  Element() = default;

  Element(AlgebraShape shape, std::vector<ComplexMatrix> blocks)
      : shape_(std::move(shape)), blocks_(std::move(blocks)) {
    if (blocks_.size() != shape_.block_count())
      throw Error(ErrorKind::shape_mismatch, "element block count does not match shape");
    for (std::size_t i = 0; i < blocks_.size(); ++i)
      if (blocks_[i].rows() != shape_.block_dim(i) || blocks_[i].cols() != shape_.block_dim(i))
        throw Error(ErrorKind::shape_mismatch, "block " + std::to_string(i) + " has the wrong size");
  }

  // Single-block convenience.
  explicit Element(ComplexMatrix block)
      : Element(AlgebraShape({block.rows()}), std::vector<ComplexMatrix>{std::move(block)}) {}

  static Element unit(const AlgebraShape& shape) {
    std::vector<ComplexMatrix> b;
    for (std::size_t d : shape.block_dims()) b.push_back(ComplexMatrix::identity(d));
    return {shape, std::move(b)};
  }

  static Element zero(const AlgebraShape& shape) {
    std::vector<ComplexMatrix> b;
    for (std::size_t d : shape.block_dims()) b.emplace_back(d, d);
    return {shape, std::move(b)};
  }

  const AlgebraShape& shape() const noexcept { return shape_; }
  const std::vector<ComplexMatrix>& blocks() const noexcept { return blocks_; }
  const ComplexMatrix& block(std::size_t i) const { return blocks_.at(i); }
  std::size_t block_count() const noexcept { return blocks_.size(); }

  Element adjoint() const {
    std::vector<ComplexMatrix> b;
    for (const auto& m : blocks_) b.push_back(m.adjoint());
    return {shape_, std::move(b)};
  }

  template <typename Op>
  Element map_blocks(Op op) const {
    std::vector<ComplexMatrix> b;
    for (std::size_t i = 0; i < blocks_.size(); ++i) b.push_back(op(blocks_[i], i));
    return {shape_, std::move(b)};
  }

  friend Element operator+(const Element& a, const Element& b) {
    require_same_shape(a.shape_, b.shape_, "element sum");
    return a.map_blocks([&](const ComplexMatrix& m, std::size_t i) { return m + b.blocks_[i]; });
  }

  friend Element operator-(const Element& a, const Element& b) {
    require_same_shape(a.shape_, b.shape_, "element difference");
    return a.map_blocks([&](const ComplexMatrix& m, std::size_t i) { return m - b.blocks_[i]; });
  }

  friend Element operator*(const Element& a, const Element& b) {
    require_same_shape(a.shape_, b.shape_, "element product");
    return a.map_blocks([&](const ComplexMatrix& m, std::size_t i) { return m * b.blocks_[i]; });
  }

  friend Element operator*(Complex s, const Element& a) {
    return a.map_blocks([&](const ComplexMatrix& m, std::size_t) { return m * s; });
  }

  friend Element operator*(double s, const Element& a) { return Complex(s, 0.0) * a; }

  friend bool operator==(const Element&, const Element&) = default;

 private:
  AlgebraShape shape_;
  std::vector<ComplexMatrix> blocks_;
};

namespace detail {

// Blockwise i.i.d. standard complex Gaussian entries (real and imaginary
// parts each N(0, 1)).
inline Element gaussian_element(const AlgebraShape& shape, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<ComplexMatrix> blocks;
  for (std::size_t n : shape.block_dims()) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double re = normal(rng);
        m(i, j) = Complex(re, normal(rng));
      }
    blocks.push_back(std::move(m));
  }
  return {shape, std::move(blocks)};
}

}  // namespace detail

// C*-direct-sum norm: max over blocks of the operator norm.
inline double element_norm(const Element& x) {
  double n = 0.0;
  for (const auto& b : x.blocks()) n = std::max(n, linalg::operator_norm(b));
  return n;
}

// f(x) = sum_i tr(a_i x_i), ||f|| = sum_i ||a_i||_1.
class Functional {
 public:
  Functional() = default;

  Functional(AlgebraShape shape, std::vector<ComplexMatrix> densities)
      : shape_(std::move(shape)), densities_(std::move(densities)) {
    if (densities_.size() != shape_.block_count())
      throw Error(ErrorKind::shape_mismatch, "functional block count does not match shape");
    for (std::size_t i = 0; i < densities_.size(); ++i)
      if (densities_[i].rows() != shape_.block_dim(i) || densities_[i].cols() != shape_.block_dim(i))
        throw Error(ErrorKind::shape_mismatch, "density " + std::to_string(i) + " has the wrong size");
  }

  static Functional zero(const AlgebraShape& shape) {
    std::vector<ComplexMatrix> d;
    for (std::size_t n : shape.block_dims()) d.emplace_back(n, n);
    return {shape, std::move(d)};
  }

  const AlgebraShape& shape() const noexcept { return shape_; }
  const std::vector<ComplexMatrix>& densities() const noexcept { return densities_; }
  const ComplexMatrix& density(std::size_t i) const { return densities_.at(i); }

  // Coordinates in C^{sum n_i^2}, blocks concatenated row-major.
  std::vector<Complex> vectorize() const {
    std::vector<Complex> v;
    v.reserve(shape_.dual_dimension());
    for (const auto& a : densities_) v.insert(v.end(), a.entries().begin(), a.entries().end());
    return v;
  }

 private:
  AlgebraShape shape_;
  std::vector<ComplexMatrix> densities_;
};

inline Complex evaluate(const Functional& f, const Element& x) {
  require_same_shape(f.shape(), x.shape(), "evaluate");
  Complex total{};
  for (std::size_t b = 0; b < x.block_count(); ++b) {
    const ComplexMatrix& a = f.density(b);
    const ComplexMatrix& m = x.block(b);
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) total += a(i, j) * m(j, i);
  }
  return total;
}

inline double functional_norm(const Functional& f) {
  double total = 0.0;
  for (const auto& a : f.densities()) total += linalg::trace_norm(a);
  return total;
}

// Singular-value cut shared by the active-block test and the index set J.
inline constexpr double kUnitSingularValueGap = 1e-6;
// Singular values in [1 - kBorderlineGap, 1 - kUnitSingularValueGap) sit next
// to the cliff where span_dim jumps; they are flagged, not reclassified.
inline constexpr double kBorderlineGap = 1e-4;

struct NormingBlock {
  bool active = false;
  ComplexMatrix left_frame;   // W_i from x_i = W_i S_i V_i*
  ComplexMatrix right_frame;  // V_i
  std::vector<double> singular_values;
  std::size_t support = 0;  // |J_i|; J_i is the leading `support` indices
};

// S_x = { f : a_i = V_i c_i W_i*, c_i >= 0 supported on J_i, sum tr c_i = 1,
//         a_i = 0 on inactive blocks }.
struct NormingSetDescription {
  Element base;
  std::vector<NormingBlock> blocks;
  std::size_t span_dim = 0;
  std::size_t dual_dim = 0;
  bool borderline = false;
  std::vector<std::string> warnings;
};

inline NormingSetDescription norming_set(const Element& x) {
  const double nrm = element_norm(x);
  if (nrm == 0.0) throw Error(ErrorKind::zero_norm, "norming_set: x = 0");
  if (std::abs(nrm - 1.0) > kUnitSingularValueGap)
    throw Error(ErrorKind::precondition, "norming_set: ||x|| = " + std::to_string(nrm) + ", expected 1");

  NormingSetDescription desc;
  desc.base = x;
  desc.dual_dim = x.shape().dual_dimension();
  for (std::size_t b = 0; b < x.block_count(); ++b) {
    linalg::SVDResult s = linalg::svd(x.block(b));
    NormingBlock nb;
    for (double sv : s.singular_values) {
      if (sv >= 1.0 - kUnitSingularValueGap)
        ++nb.support;
      else if (sv >= 1.0 - kBorderlineGap) {
        desc.borderline = true;
        desc.warnings.push_back("block " + std::to_string(b) + ": singular value " + std::to_string(sv) +
                                " is within 1e-4 of 1 but below the 1e-6 cut");
      }
    }
    nb.active = nb.support > 0;
    nb.singular_values = std::move(s.singular_values);
    nb.left_frame = std::move(s.left);
    nb.right_frame = std::move(s.right);
    desc.span_dim += nb.support * nb.support;
    desc.blocks.push_back(std::move(nb));
  }
  return desc;
}

// Member of S_x from explicit per-block coefficient matrices c_i (|J_i| x |J_i|,
// PSD). Inactive blocks must get an empty matrix. The result is rescaled so
// that sum_i tr(c_i) = 1.
inline Functional norming_functional_from(const NormingSetDescription& desc,
                                          const std::vector<ComplexMatrix>& coefficients) {
  if (coefficients.size() != desc.blocks.size())
    throw Error(ErrorKind::shape_mismatch, "one coefficient block per algebra block expected");
  double total = 0.0;
  for (std::size_t b = 0; b < desc.blocks.size(); ++b) {
    const auto& nb = desc.blocks[b];
    const auto& c = coefficients[b];
    if (!nb.active) {
      if (!c.empty()) throw Error(ErrorKind::invalid_argument, "coefficient given for an inactive block");
      continue;
    }
    if (c.rows() != nb.support || c.cols() != nb.support)
      throw Error(ErrorKind::shape_mismatch, "coefficient block must be |J| x |J|");
    total += c.trace().real();
  }
  if (!(total > 0.0)) throw Error(ErrorKind::invalid_argument, "coefficients must have positive total trace");

  std::vector<ComplexMatrix> densities;
  for (std::size_t b = 0; b < desc.blocks.size(); ++b) {
    const auto& nb = desc.blocks[b];
    const std::size_t n = desc.base.shape().block_dim(b);
    ComplexMatrix a(n, n);
    if (nb.active) {
      const auto& c = coefficients[b];
      // a = V_J c W_J*
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          Complex s{};
          for (std::size_t p = 0; p < nb.support; ++p)
            for (std::size_t q = 0; q < nb.support; ++q)
              s += nb.right_frame(i, p) * c(p, q) * std::conj(nb.left_frame(j, q));
          a(i, j) = s / total;
        }
    }
    densities.push_back(std::move(a));
  }
  return {desc.base.shape(), std::move(densities)};
}

// Random member of S_x: exponential block weights, and c_i = g g* with g a
// complex Ginibre |J_i| x |J_i| matrix (full rank almost surely, so repeated
// samples span the whole face).
inline Functional sample_norming_functional(const NormingSetDescription& desc, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::vector<ComplexMatrix> coefficients;
  bool any_active = false;
  for (const auto& nb : desc.blocks) {
    if (!nb.active) {
      coefficients.emplace_back();
      continue;
    }
    any_active = true;
    ComplexMatrix g(nb.support, nb.support);
    for (std::size_t i = 0; i < nb.support; ++i)
      for (std::size_t j = 0; j < nb.support; ++j) g(i, j) = Complex(normal(rng), normal(rng));
    ComplexMatrix c = g * g.adjoint();
    const double weight = expo(rng);
    c *= Complex(weight / c.trace().real(), 0.0);
    coefficients.push_back(std::move(c));
  }
  if (!any_active) throw Error(ErrorKind::precondition, "norming set has no active block");
  return norming_functional_from(desc, coefficients);
}

// Complex rank of the vectorized functionals: singular values above
// tol * sigma_max.
inline std::size_t numeric_span_rank(const std::vector<Functional>& fs, double tol) {
  if (fs.empty()) return 0;
  const std::size_t dim = fs.front().shape().dual_dimension();
  ComplexMatrix m(fs.size(), dim);
  for (std::size_t r = 0; r < fs.size(); ++r) {
    require_same_shape(fs.front().shape(), fs[r].shape(), "numeric_span_rank");
    const auto v = fs[r].vectorize();
    for (std::size_t c = 0; c < dim; ++c) m(r, c) = v[c];
  }
  const auto s = linalg::svd(m).singular_values;
  if (s.empty() || s.front() == 0.0) return 0;
  std::size_t rank = 0;
  for (double sv : s)
    if (sv > tol * s.front()) ++rank;
  return rank;
}

struct NormingInfimum {
  double value = 0.0;               // inf over f in S^u of Re f(x)
  double hermitian_residual = 0.0;  // max_i ||x_i u_i* - (x_i u_i*)*||
};

inline double unitarity_defect(const Element& u) {
  double d = 0.0;
  for (const auto& b : u.blocks()) {
    const auto id = ComplexMatrix::identity(b.rows());
    d = std::max({d, linalg::operator_norm(b.adjoint() * b - id), linalg::operator_norm(b * b.adjoint() - id)});
  }
  return d;
}

// For unitary u every f in S^u has the form y -> sum_i tr(rho_i y_i u_i*)
// with (rho_i) a state, so the infimum of Re f(x) is the least eigenvalue of
// the Hermitian parts of x_i u_i* over all blocks.
inline NormingInfimum min_real_over_norming(const Element& u, const Element& x) {
  require_same_shape(u.shape(), x.shape(), "min_real_over_norming");
  const double defect = unitarity_defect(u);
  if (defect > 1e-8)
    throw Error(ErrorKind::precondition, "min_real_over_norming: u is not unitary (defect " + std::to_string(defect) + ")");
  NormingInfimum out;
  out.value = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < x.block_count(); ++b) {
    const ComplexMatrix xu = x.block(b) * u.block(b).adjoint();
    out.hermitian_residual = std::max(out.hermitian_residual, linalg::hermitian_defect(xu));
    out.value = std::min(out.value, linalg::min_eigenvalue_hermitian_part(xu));
  }
  return out;
}

}  // namespace opgeo::algebra
