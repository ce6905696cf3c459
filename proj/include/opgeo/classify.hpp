#pragma once

// Operator classes decided two ways: a direct algebraic test (products and
// adjoints) and a geometric one that only looks at norms, norming
// functionals, and, where a unit is identified, states. Each geometric
// route also produces a checkable object: a witness y for non partial
// isometries, a unitary/epsilon certificate for invertibility, or a span
// report for unitaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "opgeo/algebra.hpp"

namespace opgeo::classify {

using algebra::AlgebraShape;
using algebra::Element;
using algebra::Functional;
using algebra::Rng;
using linalg::Complex;
using linalg::ComplexMatrix;

struct Tolerances {
  double decomposition = 1e-10;  // residuals of decompositions
  double equality = 1e-8;        // numeric equalities (witness norms, states, certificates)
  double classification = 1e-6;  // semantic cuts (PI, unitary, projection, ||x|| = 1, invertible)
  double tester = 1e-7;          // X1 / X2 membership testers
  double rank = 1e-7;            // relative cut for numeric_span_rank
};

using WitnessFunction = std::function<double(double)>;

inline double default_witness_function(double s) { return s * (1.0 - s); }

struct WitnessConfig {
  WitnessFunction witness_function = default_witness_function;
  double gap = 1e-3;  // spectral point t must lie in [gap, 1 - gap]
  // b-grid for X2: |b| log-spaced over [radius_min, radius_max] plus 1/||y||,
  // times `phases` equally spaced arguments k*2pi/phases.
  double radius_min = 1e-3;
  double radius_max = 1e3;
  int radii_per_decade = 4;
  int phases = 16;
  // a-search for X1 over [a_lower/||y||, a_upper/||y||].
  double a_lower = 1e-3;
  double a_upper = 10.0;
  int a_grid = 33;
  int golden_iterations = 60;
};

struct Settings {
  Tolerances tol;
  WitnessConfig witness;
  std::uint64_t seed = 0x6f70676f;  // sampled directions / states inside verdicts
  int directions = 4;               // per kind (defect corner, random) in sampled tester checks
  int state_samples = 32;
};

// ---------------------------------------------------------------------------
// shared helpers

inline double require_norm_one(const Element& x, const Tolerances& tol, const char* what) {
  const double n = algebra::element_norm(x);
  if (n == 0.0) throw Error(ErrorKind::zero_norm, std::string(what) + ": x = 0 has no normalized form");
  if (std::abs(n - 1.0) > tol.classification)
    throw Error(ErrorKind::precondition, std::string(what) + ": requires ||x|| = 1, got " + std::to_string(n));
  return n;
}

inline double block_max(const Element& x, const std::function<double(const ComplexMatrix&)>& f) {
  double m = 0.0;
  for (const auto& b : x.blocks()) m = std::max(m, f(b));
  return m;
}

inline double min_singular_value(const Element& x) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& b : x.blocks()) m = std::min(m, linalg::min_singular_value(b));
  return m;
}

inline Element left_polar_unitary(const Element& x) {
  return x.map_blocks([](const ComplexMatrix& b, std::size_t) { return linalg::polar(b, linalg::PolarSide::left).isometry; });
}

// ||x x* x - x||
inline double partial_isometry_defect(const Element& x) {
  return block_max(x, [](const ComplexMatrix& b) { return linalg::operator_norm(b * b.adjoint() * b - b); });
}

using algebra::unitarity_defect;

inline double hermitian_defect(const Element& x) {
  return block_max(x, [](const ComplexMatrix& b) { return linalg::hermitian_defect(b); });
}

inline void require_identified_unit(const Element& x, const Element& unit) {
  algebra::require_same_shape(x.shape(), unit.shape(), "unit");
  const double d = algebra::element_norm(unit - Element::unit(unit.shape()));
  if (d > 1e-8)
    throw Error(ErrorKind::precondition, "the identified unit is not the identity of the algebra (distance " +
                                             std::to_string(d) + ")");
}

// ---------------------------------------------------------------------------
// evidence and verdicts

struct PartialIsometryWitness {
  Element y;
  double b = 0.0;  // 1 / ||y||
  double norm_plus = 0.0;    // ||x + y||
  double norm_minus = 0.0;   // ||x - y||
  double norm_scaled = 0.0;  // ||x + b y||
  double margin = 0.0;       // ||x + b y|| - 1
  double spectral_point = 0.0;
  bool verified = false;     // | ||x +- y|| - 1 | <= equality and margin > 0
};

struct InvertibilityCertificate {
  Element u;
  double epsilon = 0.0;
};

struct SpanReport {
  std::size_t span_dim = 0;
  std::size_t dual_dim = 0;
  std::size_t sampled_rank = 0;
  std::size_t samples = 0;
  bool borderline = false;
};

struct TesterReport {
  int directions = 0;
  int x1_members = 0;
  int x2_members = 0;
  int disagreements = 0;
  double max_x2_deviation = 0.0;
};

struct CertificateCheck {
  bool accepted = false;
  double unitarity_defect = 0.0;
  double hermitian_residual = 0.0;
  double min_eigenvalue = 0.0;
};

using Evidence = std::variant<std::monostate, PartialIsometryWitness, InvertibilityCertificate, SpanReport,
                              TesterReport, CertificateCheck>;

struct Condition {
  std::string name;
  bool holds = false;
  double measure = 0.0;
};

struct Verdict {
  std::string predicate;
  bool algebraic = false;
  bool geometric = false;
  bool agreement = false;  // algebraic == geometric
  bool unanimous = false;  // every listed condition agrees
  std::vector<Condition> conditions;
  Evidence evidence;
  Tolerances tolerances;
};

inline Verdict make_verdict(std::string predicate, std::vector<Condition> conditions, bool geometric,
                            Evidence evidence, const Tolerances& tol) {
  Verdict v;
  v.predicate = std::move(predicate);
  v.algebraic = conditions.front().holds;
  v.geometric = geometric;
  v.agreement = v.algebraic == v.geometric;
  v.unanimous = std::all_of(conditions.begin(), conditions.end(),
                            [&](const Condition& c) { return c.holds == conditions.front().holds; }) &&
                v.agreement;
  v.conditions = std::move(conditions);
  v.evidence = std::move(evidence);
  v.tolerances = tol;
  return v;
}

// ---------------------------------------------------------------------------
// partial isometries

inline bool is_partial_isometry_algebraic(const Element& x, const Tolerances& tol = {}) {
  return partial_isometry_defect(x) <= tol.classification;
}

// Checks f(0) = f(1) = 0, 0 < f(t) <= 1 on (0, 1) and f(s) <= 1/s - 1 on a
// dense grid.
inline void validate_witness_function(const WitnessFunction& f) {
  if (!f) throw Error(ErrorKind::invalid_argument, "witness function is empty");
  if (std::abs(f(0.0)) > 1e-12 || std::abs(f(1.0)) > 1e-12)
    throw Error(ErrorKind::invalid_argument, "witness function must vanish at 0 and 1");
  constexpr int kGrid = 2000;
  for (int k = 1; k < kGrid; ++k) {
    const double s = static_cast<double>(k) / kGrid;
    const double v = f(s);
    if (!(v > 0.0) || v > 1.0)
      throw Error(ErrorKind::invalid_argument, "witness function must map (0,1) into (0,1], fails at s = " + std::to_string(s));
    if (v > 1.0 / s - 1.0 + 1e-12)
      throw Error(ErrorKind::invalid_argument, "witness function exceeds 1/s - 1 at s = " + std::to_string(s));
  }
}

inline std::vector<double> all_singular_values(const Element& x) {
  std::vector<double> s;
  for (const auto& b : x.blocks()) {
    const auto sv = linalg::svd(b).singular_values;
    s.insert(s.end(), sv.begin(), sv.end());
  }
  return s;
}

// y = f(|x|) x with |x| = (x x*)^{1/2}. Exists when some singular value of x
// lies in [gap, 1 - gap]; the recorded spectral point is the one maximizing
// s f(s), which bounds the margin from below.
inline std::optional<PartialIsometryWitness> construct_witness(const Element& x, const WitnessConfig& cfg = {},
                                                               const Tolerances& tol = {}) {
  require_norm_one(x, tol, "construct_witness");
  validate_witness_function(cfg.witness_function);
  const auto& phi = cfg.witness_function;

  std::optional<double> point;
  double best = -1.0;
  for (double s : all_singular_values(x)) {
    if (s < cfg.gap || s > 1.0 - cfg.gap) continue;
    const double drive = s * phi(s);
    if (drive > best) {
      best = drive;
      point = s;
    }
  }
  if (!point) return std::nullopt;

  PartialIsometryWitness w;
  w.spectral_point = *point;
  w.y = x.map_blocks([&](const ComplexMatrix& b, std::size_t) {
    const auto abs = linalg::polar(b, linalg::PolarSide::left).absolute;
    return linalg::apply_function_hermitian(abs, phi) * b;
  });
  const double ny = algebra::element_norm(w.y);
  if (ny == 0.0) return std::nullopt;
  w.b = 1.0 / ny;
  w.norm_plus = algebra::element_norm(x + w.y);
  w.norm_minus = algebra::element_norm(x - w.y);
  w.norm_scaled = algebra::element_norm(x + w.b * w.y);
  w.margin = w.norm_scaled - 1.0;
  w.verified = std::abs(w.norm_plus - 1.0) <= tol.equality && std::abs(w.norm_minus - 1.0) <= tol.equality &&
               w.margin > 0.0;
  return w;
}

// Re-measures a witness against x; b must match 1/||y||.
inline bool verify_witness(const Element& x, const PartialIsometryWitness& w, const Tolerances& tol = {}) {
  algebra::require_same_shape(x.shape(), w.y.shape(), "verify_witness");
  const double ny = algebra::element_norm(w.y);
  if (ny == 0.0 || std::abs(w.b * ny - 1.0) > tol.equality) return false;
  const double plus = algebra::element_norm(x + w.y);
  const double minus = algebra::element_norm(x - w.y);
  const double scaled = algebra::element_norm(x + w.b * w.y);
  return std::abs(plus - 1.0) <= tol.equality && std::abs(minus - 1.0) <= tol.equality &&
         scaled - 1.0 > tol.equality;
}

struct X1Probe {
  bool member = false;
  double a = 0.0;
  double deviation = 0.0;  // min over a of max(| ||x + a y|| - 1 |, | ||x - a y|| - 1 |)
};

// Tester for X1 = { y : exists a > 0, ||x + a y|| = ||x - a y|| = 1 }: a log
// grid over the bracket, then golden-section refinement around the best grid
// point. The bracket starts at a_lower/||y|| because every y satisfies the
// equations to first order as a -> 0.
inline X1Probe x1_probe(const Element& x, const Element& y, const WitnessConfig& cfg = {}, const Tolerances& tol = {}) {
  const double ny = algebra::element_norm(y);
  if (ny == 0.0) return {true, 1.0, 0.0};
  auto h = [&](double a) {
    return std::max(std::abs(algebra::element_norm(x + a * y) - 1.0), std::abs(algebra::element_norm(x - a * y) - 1.0));
  };
  const double lo = std::log(cfg.a_lower / ny), hi = std::log(cfg.a_upper / ny);
  const int n = std::max(cfg.a_grid, 3);
  std::vector<double> grid(n), vals(n);
  int best = 0;
  for (int k = 0; k < n; ++k) {
    grid[k] = std::exp(lo + (hi - lo) * k / (n - 1));
    vals[k] = h(grid[k]);
    if (vals[k] < vals[best]) best = k;
  }
  X1Probe out{false, grid[best], vals[best]};
  if (out.deviation > tol.tester) {
    double left = grid[std::max(best - 1, 0)], right = grid[std::min(best + 1, n - 1)];
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = right - ratio * (right - left), d = left + ratio * (right - left);
    double fc = h(c), fd = h(d);
    for (int it = 0; it < cfg.golden_iterations; ++it) {
      if (fc < fd) {
        right = d;
        d = c;
        fd = fc;
        c = right - ratio * (right - left);
        fc = h(c);
      } else {
        left = c;
        c = d;
        fc = fd;
        d = left + ratio * (right - left);
        fd = h(d);
      }
    }
    if (fc < out.deviation) out = {false, c, fc};
    if (fd < out.deviation) out = {false, d, fd};
  }
  out.member = out.deviation <= tol.tester;
  return out;
}

inline bool x1_member(const Element& x, const Element& y, const WitnessConfig& cfg = {}, const Tolerances& tol = {}) {
  return x1_probe(x, y, cfg, tol).member;
}

struct X2Probe {
  bool member = false;
  double deviation = 0.0;  // max over the b-grid of | ||x + b y|| - max(1, ||b y||) |
  Complex worst_b{};
};

inline std::vector<double> b_radii(const WitnessConfig& cfg, double norm_y) {
  std::vector<double> r;
  const double lo = std::log10(cfg.radius_min), hi = std::log10(cfg.radius_max);
  const int steps = std::max(1, static_cast<int>(std::lround((hi - lo) * cfg.radii_per_decade)));
  for (int k = 0; k <= steps; ++k) r.push_back(std::pow(10.0, lo + (hi - lo) * k / steps));
  if (norm_y > 0.0) r.push_back(1.0 / norm_y);
  return r;
}

inline X2Probe x2_probe(const Element& x, const Element& y, const WitnessConfig& cfg = {}, const Tolerances& tol = {}) {
  const double ny = algebra::element_norm(y);
  X2Probe out;
  if (ny == 0.0) {
    out.deviation = std::abs(algebra::element_norm(x) - 1.0);
    out.member = out.deviation <= tol.tester;
    return out;
  }
  for (double r : b_radii(cfg, ny))
    for (int k = 0; k < cfg.phases; ++k) {
      const Complex b = std::polar(r, 2.0 * std::numbers::pi * k / cfg.phases);
      const double dev = std::abs(algebra::element_norm(x + b * y) - std::max(1.0, r * ny));
      if (dev > out.deviation) {
        out.deviation = dev;
        out.worst_b = b;
      }
    }
  out.member = out.deviation <= tol.tester;
  return out;
}

inline bool x2_member(const Element& x, const Element& y, const WitnessConfig& cfg = {}, const Tolerances& tol = {}) {
  return x2_probe(x, y, cfg, tol).member;
}

// (1 - q) g (1 - p) with p = x*x, q = x x*, normalized (zero when the corner
// is trivial). For a partial isometry this is exactly where X1 = X2 lives.
inline Element defect_corner_direction(const Element& x, Rng& rng) {
  const Element g = algebra::detail::gaussian_element(x.shape(), rng);
  const Element one = Element::unit(x.shape());
  const Element y = (one - x * x.adjoint()) * g * (one - x.adjoint() * x);
  const double n = algebra::element_norm(y);
  return n > 1e-12 ? (1.0 / n) * y : Element::zero(x.shape());
}

inline Element random_direction(const AlgebraShape& shape, Rng& rng) {
  const Element g = algebra::detail::gaussian_element(shape, rng);
  return (1.0 / algebra::element_norm(g)) * g;
}

inline TesterReport sampled_tester_check(const Element& x, const Settings& s) {
  Rng rng(s.seed);
  TesterReport r;
  auto probe = [&](const Element& y) {
    const bool in1 = x1_member(x, y, s.witness, s.tol);
    const X2Probe p2 = x2_probe(x, y, s.witness, s.tol);
    ++r.directions;
    r.x1_members += in1;
    r.x2_members += p2.member;
    r.disagreements += in1 != p2.member;
    r.max_x2_deviation = std::max(r.max_x2_deviation, p2.member ? p2.deviation : 0.0);
  };
  for (int k = 0; k < s.directions; ++k) {
    probe(defect_corner_direction(x, rng));
    probe(random_direction(x.shape(), rng));
  }
  return r;
}

// x is a partial isometry iff X1 = X2. Geometric verdict: no witness of
// X1 != X2 can be built, and sampled directions never separate the testers.
inline Verdict is_partial_isometry_geometric(const Element& x, const Settings& s = {}) {
  require_norm_one(x, s.tol, "is_partial_isometry_geometric");
  const double defect = partial_isometry_defect(x);
  const auto witness = construct_witness(x, s.witness, s.tol);
  std::vector<Condition> conds{{"xx*x = x", defect <= s.tol.classification, defect}};
  if (witness) {
    conds.push_back({"X1 = X2", false, witness->margin});
    return make_verdict("partial_isometry", std::move(conds), false, *witness, s.tol);
  }
  const TesterReport report = sampled_tester_check(x, s);
  conds.push_back({"X1 = X2", report.disagreements == 0,
                   static_cast<double>(report.disagreements)});
  return make_verdict("partial_isometry", std::move(conds), report.disagreements == 0, report, s.tol);
}

// Extreme points of the unit ball are exactly the x with X1 = {0}.
inline Verdict is_extreme_point(const Element& x, const Settings& s = {}) {
  require_norm_one(x, s.tol, "is_extreme_point");
  bool algebraic = is_partial_isometry_algebraic(x, s.tol);
  for (const auto& b : x.blocks()) {
    const auto id = ComplexMatrix::identity(b.rows());
    const bool full = linalg::operator_norm(id - b * b.adjoint()) <= s.tol.classification ||
                      linalg::operator_norm(id - b.adjoint() * b) <= s.tol.classification;
    algebraic = algebraic && full;
  }
  std::vector<Condition> conds{{"partial isometry with full support in every block", algebraic, 0.0}};
  if (auto w = construct_witness(x, s.witness, s.tol)) {
    conds.push_back({"X1 = {0}", false, w->margin});
    return make_verdict("extreme_point", std::move(conds), false, *w, s.tol);
  }
  Rng rng(s.seed);
  TesterReport r;
  for (int k = 0; k < s.directions; ++k) {
    const Element y = defect_corner_direction(x, rng);
    if (algebra::element_norm(y) == 0.0) continue;
    ++r.directions;
    r.x1_members += x1_member(x, y, s.witness, s.tol);
  }
  conds.push_back({"X1 = {0}", r.x1_members == 0, static_cast<double>(r.x1_members)});
  return make_verdict("extreme_point", std::move(conds), r.x1_members == 0, r, s.tol);
}

// ---------------------------------------------------------------------------
// unitaries

inline bool is_unitary_algebraic(const Element& x, const Tolerances& tol = {}) {
  return unitarity_defect(x) <= tol.classification;
}

// x unitary iff S_x spans the dual. span_dim is exact; the sampled rank is a
// cross-check reported as evidence.
inline Verdict is_unitary_geometric(const Element& x, const Settings& s = {}) {
  const double n = algebra::element_norm(x);
  if (n == 0.0) throw Error(ErrorKind::zero_norm, "is_unitary_geometric: x = 0");
  const double defect = unitarity_defect(x);
  std::vector<Condition> conds{{"x*x = xx* = 1", defect <= s.tol.classification, defect}};
  SpanReport report;
  report.dual_dim = x.shape().dual_dimension();
  if (std::abs(n - 1.0) > s.tol.classification) {
    conds.push_back({"S_x spans the dual", false, 0.0});
    return make_verdict("unitary", std::move(conds), false, report, s.tol);
  }
  const auto desc = algebra::norming_set(x);
  report.span_dim = desc.span_dim;
  report.borderline = desc.borderline;
  report.samples = 3 * desc.span_dim;
  Rng rng(s.seed);
  std::vector<Functional> fs;
  for (std::size_t k = 0; k < report.samples; ++k) fs.push_back(algebra::sample_norming_functional(desc, rng));
  report.sampled_rank = algebra::numeric_span_rank(fs, s.tol.rank);
  const bool spans = desc.span_dim == report.dual_dim;
  conds.push_back({"S_x spans the dual", spans, static_cast<double>(desc.span_dim)});
  return make_verdict("unitary", std::move(conds), spans, report, s.tol);
}

// max over sampled f in S_x of |f(1 - x*x)|; vanishes for partial isometries.
inline double norming_annihilates_defect(const Element& x, int samples, Rng& rng, const Tolerances& tol = {}) {
  require_norm_one(x, tol, "norming_annihilates_defect");
  if (!is_partial_isometry_algebraic(x, tol))
    throw Error(ErrorKind::precondition, "norming_annihilates_defect: x is not a partial isometry");
  const Element p = Element::unit(x.shape()) - x.adjoint() * x;
  const auto desc = algebra::norming_set(x);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k)
    worst = std::max(worst, std::abs(algebra::evaluate(algebra::sample_norming_functional(desc, rng), p)));
  return worst;
}

struct DefectNormAudit {
  double literal = 0.0;      // max | ||x + a t p|| - max(1, |t|) |
  double identity = 0.0;     // max | ||x + a t p||^2 - ||x x* + t^2 p|| |
  double bound_excess = 0.0; // max(||x + a t p||^2 - (1 + t^2), 0)
};

// Sweeps t over the grid and a over `phases` unit phases with p = 1 - x*x.
// Since x p = 0 the cross terms of (x + a t p)(x + a t p)* vanish, so
// ||x + a t p||^2 = ||x x* + t^2 p|| <= 1 + t^2 for every partial isometry.
// The value max(1, |t|) is reached only when x x* is orthogonal to p, i.e.
// when x is normal; for other partial isometries `literal` is not small.
inline DefectNormAudit defect_norm_audit(const Element& x, const std::vector<double>& t_grid, int phases = 16,
                                         const Tolerances& tol = {}) {
  require_norm_one(x, tol, "defect_norm_identity");
  if (!is_partial_isometry_algebraic(x, tol))
    throw Error(ErrorKind::precondition, "defect_norm_identity: x is not a partial isometry");
  const Element p = Element::unit(x.shape()) - x.adjoint() * x;
  const Element q = x * x.adjoint();
  const bool trivial = algebra::element_norm(p) <= tol.classification;
  DefectNormAudit out;
  for (double t : t_grid) {
    const double expected = trivial ? 1.0 : std::max(1.0, std::abs(t));
    const double exact = algebra::element_norm(q + (t * t) * p);
    for (int k = 0; k < phases; ++k) {
      const Complex a = std::polar(1.0, 2.0 * std::numbers::pi * k / phases);
      const double n = algebra::element_norm(x + (a * t) * p);
      out.literal = std::max(out.literal, std::abs(n - expected));
      out.identity = std::max(out.identity, std::abs(n * n - exact));
      out.bound_excess = std::max(out.bound_excess, n * n - (1.0 + t * t));
    }
  }
  return out;
}

// max over t in the grid and unit phases a of | ||x + a t p|| - max(1, |t|) |.
inline double defect_norm_identity(const Element& x, const std::vector<double>& t_grid, int phases = 16,
                                   const Tolerances& tol = {}) {
  return defect_norm_audit(x, t_grid, phases, tol).literal;
}

// ---------------------------------------------------------------------------
// invertibility

inline std::optional<InvertibilityCertificate> invertibility_certificate(const Element& x, const Tolerances& tol = {}) {
  const double smin = min_singular_value(x);
  if (!(smin > tol.classification)) return std::nullopt;
  return InvertibilityCertificate{left_polar_unitary(x), smin};
}

// Accepts when u is unitary and x u* >= epsilon, i.e. Re f(x) >= epsilon on
// all of S^u with no imaginary part.
inline CertificateCheck verify_certificate(const Element& x, const InvertibilityCertificate& cert,
                                           const Tolerances& tol = {}) {
  if (!(cert.epsilon > 0.0) || !std::isfinite(cert.epsilon))
    throw Error(ErrorKind::malformed_certificate, "epsilon must be a positive finite number");
  if (cert.u.shape() != x.shape())
    throw Error(ErrorKind::malformed_certificate, "certificate unitary has shape " + cert.u.shape().to_string() +
                                                      ", operator has " + x.shape().to_string());
  CertificateCheck c;
  c.unitarity_defect = unitarity_defect(cert.u);
  if (c.unitarity_defect > tol.equality) return c;
  const auto inf = algebra::min_real_over_norming(cert.u, x);
  c.hermitian_residual = inf.hermitian_residual;
  c.min_eigenvalue = inf.value;
  c.accepted = c.hermitian_residual <= tol.equality && c.min_eigenvalue >= cert.epsilon - tol.equality;
  return c;
}

inline Verdict is_invertible(const Element& x, const Tolerances& tol = {}) {
  const double smin = min_singular_value(x);
  std::vector<Condition> conds{{"sigma_min > 0", smin > tol.classification, smin}};
  const auto cert = invertibility_certificate(x, tol);
  if (!cert) {
    conds.push_back({"unitary u, epsilon > 0 with f(x) >= epsilon on S^u", false, 0.0});
    return make_verdict("invertible", std::move(conds), false, std::monostate{}, tol);
  }
  const CertificateCheck check = verify_certificate(x, *cert, tol);
  conds.push_back({"unitary u, epsilon > 0 with f(x) >= epsilon on S^u", check.accepted, check.min_eigenvalue});
  return make_verdict("invertible", std::move(conds), check.accepted, *cert, tol);
}

// ---------------------------------------------------------------------------
// predicates that use the identified unit

// States of the algebra as S_1 for the identified unit 1, one per
// matrix-unit-derived density: e_j e_j*, and (e_j + e_k), (e_j + i e_k)
// projections for j < k. Together they span the self-adjoint part of the
// dual over the reals.
inline std::vector<Functional> state_basis(const Element& unit) {
  const auto desc = algebra::norming_set(unit);
  std::vector<Functional> states;
  for (std::size_t b = 0; b < desc.blocks.size(); ++b) {
    const std::size_t n = desc.blocks[b].support;
    auto with_block = [&](const ComplexMatrix& c) {
      std::vector<ComplexMatrix> coeffs;
      for (std::size_t o = 0; o < desc.blocks.size(); ++o)
        coeffs.push_back(o == b ? c : ComplexMatrix(desc.blocks[o].support, desc.blocks[o].support));
      states.push_back(algebra::norming_functional_from(desc, coeffs));
    };
    for (std::size_t j = 0; j < n; ++j) {
      ComplexMatrix c(n, n);
      c(j, j) = 1.0;
      with_block(c);
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) {
        ComplexMatrix re(n, n), im(n, n);
        re(j, j) = re(k, k) = im(j, j) = im(k, k) = 0.5;
        re(j, k) = re(k, j) = 0.5;
        im(j, k) = Complex(0.0, -0.5);
        im(k, j) = Complex(0.0, 0.5);
        with_block(re);
        with_block(im);
      }
  }
  return states;
}

struct LumerSlope {
  double alpha = 0.0;
  double slope = 0.0;  // (||1 + i alpha x|| - 1) / alpha
};

inline std::vector<LumerSlope> lumer_slopes(const Element& x, const Element& unit,
                                            const std::vector<double>& alphas = {1e-2, -1e-2, 1e-3, -1e-3, 1e-4, -1e-4}) {
  require_identified_unit(x, unit);
  std::vector<LumerSlope> out;
  for (double a : alphas) out.push_back({a, (algebra::element_norm(unit + Complex(0.0, a) * x) - 1.0) / a});
  return out;
}

// ||1 + i alpha x|| <= 1 + o(alpha): the slope must decay linearly, bounded
// by 10 |alpha| max(1, ||x||^2) at every probed scale.
inline bool is_self_adjoint_lumer(const Element& x, const Element& unit) {
  const double n = algebra::element_norm(x);
  for (const auto& s : lumer_slopes(x, unit))
    if (std::abs(s.slope) > 10.0 * std::abs(s.alpha) * std::max(1.0, n * n)) return false;
  return true;
}

inline double max_imaginary_on_states(const Element& x, const std::vector<Functional>& states) {
  double worst = 0.0;
  for (const auto& f : states) worst = std::max(worst, std::abs(algebra::evaluate(f, x).imag()));
  return worst;
}

// f(x) real for every state f.
inline bool is_self_adjoint_states(const Element& x, const Element& unit, const Tolerances& tol = {}) {
  require_identified_unit(x, unit);
  return max_imaginary_on_states(x, state_basis(unit)) <= tol.equality;
}

inline Verdict is_self_adjoint(const Element& x, const Element& unit, const Tolerances& tol = {}) {
  require_identified_unit(x, unit);
  const double defect = hermitian_defect(x);
  const double imag = max_imaginary_on_states(x, state_basis(unit));
  const bool lumer = is_self_adjoint_lumer(x, unit);
  std::vector<Condition> conds{{"x = x*", defect <= tol.equality, defect},
                               {"Lumer: ||1 + i a x|| <= 1 + o(a)", lumer, 0.0},
                               {"f(x) real on states", imag <= tol.equality, imag}};
  return make_verdict("self_adjoint", std::move(conds), lumer && imag <= tol.equality, std::monostate{}, tol);
}

// Recovers x* from state data alone: the self-adjoint elements are the
// common kernel of y -> Im f(y) over a spanning family of states; writing
// x = h + i k with h, k in that real subspace gives x* = h - i k.
class AdjointRecovery {
 public:
  explicit AdjointRecovery(const Element& unit) : shape_(unit.shape()) {
    const auto states = state_basis(unit);
    for (std::size_t b = 0; b < shape_.block_count(); ++b) blocks_.push_back(build_block(states, b));
  }

  const AlgebraShape& shape() const noexcept { return shape_; }

  // Real dimension of the detected self-adjoint subspace, per block.
  std::vector<std::size_t> self_adjoint_dimensions() const {
    std::vector<std::size_t> d;
    for (const auto& blk : blocks_) d.push_back(blk.basis.size());
    return d;
  }

  // Distance of x from the detected self-adjoint subspace.
  double self_adjoint_residual(const Element& x) const {
    const Element r = recover(x);
    return algebra::element_norm(x - r);
  }

  Element recover(const Element& x) const {
    algebra::require_same_shape(shape_, x.shape(), "recover_adjoint");
    return x.map_blocks([&](const ComplexMatrix& m, std::size_t b) {
      const BlockData& blk = blocks_[b];
      const std::size_t n = m.rows(), nn = n * n, dim = blk.basis.size();
      std::vector<double> rhs(2 * nn);
      for (std::size_t i = 0; i < nn; ++i) {
        rhs[i] = m.entries()[i].real();
        rhs[nn + i] = m.entries()[i].imag();
      }
      std::vector<double> coef(2 * dim, 0.0);
      for (std::size_t r = 0; r < 2 * dim; ++r)
        for (std::size_t c = 0; c < 2 * nn; ++c) coef[r] += blk.pseudo_inverse[r][c] * rhs[c];
      ComplexMatrix out(n, n);
      for (std::size_t j = 0; j < dim; ++j) {
        const Complex w(coef[j], -coef[dim + j]);  // h - i k
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t k = 0; k < n; ++k) out(i, k) += w * blk.basis[j](i, k);
      }
      return out;
    });
  }

 private:
  struct BlockData {
    std::vector<ComplexMatrix> basis;               // real basis of the detected self-adjoint subspace
    std::vector<std::vector<double>> pseudo_inverse;  // (2 dim) x (2 n^2)
  };

  BlockData build_block(const std::vector<Functional>& states, std::size_t b) const {
    const std::size_t n = shape_.block_dim(b), nn = n * n;
    // Rows: Im tr(a z) as a real functional of (Re z, Im z).
    std::vector<const ComplexMatrix*> dens;
    for (const auto& f : states)
      if (f.density(b).frobenius_norm() > 0.0) dens.push_back(&f.density(b));
    ComplexMatrix im_map(dens.size(), 2 * nn);
    for (std::size_t r = 0; r < dens.size(); ++r)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          const Complex a = (*dens[r])(k, i);  // tr(a z) = sum_{i,k} a_{ki} z_{ik}
          im_map(r, i * n + k) = a.imag();
          im_map(r, nn + i * n + k) = a.real();
        }
    // Real input gives real singular vectors: every Jacobi phase is +-1.
    const ComplexMatrix kernel = linalg::null_space(im_map, 1e-10);
    BlockData blk;
    for (std::size_t j = 0; j < kernel.cols(); ++j) {
      ComplexMatrix h(n, n);
      for (std::size_t i = 0; i < nn; ++i) h(i / n, i % n) = Complex(kernel(i, j).real(), kernel(nn + i, j).real());
      blk.basis.push_back(std::move(h));
    }
    const std::size_t dim = blk.basis.size();
    // Columns: h_j and i h_j as real vectors.
    ComplexMatrix system(2 * nn, 2 * dim);
    for (std::size_t j = 0; j < dim; ++j)
      for (std::size_t i = 0; i < nn; ++i) {
        const Complex z = blk.basis[j].entries()[i];
        system(i, j) = z.real();
        system(nn + i, j) = z.imag();
        system(i, dim + j) = -z.imag();
        system(nn + i, dim + j) = z.real();
      }
    const auto s = linalg::svd(system);
    const double smax = s.singular_values.empty() ? 0.0 : s.singular_values.front();
    blk.pseudo_inverse.assign(2 * dim, std::vector<double>(2 * nn, 0.0));
    for (std::size_t k = 0; k < s.singular_values.size(); ++k) {
      const double sv = s.singular_values[k];
      if (sv <= 1e-12 * smax || sv == 0.0) continue;
      for (std::size_t r = 0; r < 2 * dim; ++r)
        for (std::size_t c = 0; c < 2 * nn; ++c)
          blk.pseudo_inverse[r][c] += (s.right(r, k) * std::conj(s.left(c, k))).real() / sv;
    }
    return blk;
  }

  AlgebraShape shape_;
  std::vector<BlockData> blocks_;
};

inline Element recover_adjoint(const Element& x, const Element& unit) {
  require_identified_unit(x, unit);
  return AdjointRecovery(unit).recover(x);
}

// Three equivalent descriptions of positivity:
//   (1) x = x* with nonnegative spectrum,
//   (2) f(x) >= 0 for every state f,
//   (3) x self-adjoint (by states) and || ||x|| 1 - x || <= ||x||.
// Route (2) combines the state basis, sampled states and the exact infimum of
// Re f(x) over S_1 from the norming-set description.
inline Verdict is_positive(const Element& x, const Element& unit, const Settings& s = {}) {
  require_identified_unit(x, unit);
  const Tolerances& tol = s.tol;
  const double herm = hermitian_defect(x);
  double lam = std::numeric_limits<double>::infinity();
  for (const auto& b : x.blocks()) lam = std::min(lam, linalg::min_eigenvalue_hermitian_part(b));
  const bool oracle = herm <= tol.equality && lam >= -tol.equality;

  const auto basis = state_basis(unit);
  double min_re = algebra::min_real_over_norming(unit, x).value;
  double max_im = 0.0;
  for (const auto& f : basis) {
    const Complex v = algebra::evaluate(f, x);
    min_re = std::min(min_re, v.real());
    max_im = std::max(max_im, std::abs(v.imag()));
  }
  Rng rng(s.seed);
  const auto desc = algebra::norming_set(unit);
  for (int k = 0; k < s.state_samples; ++k) {
    const Complex v = algebra::evaluate(algebra::sample_norming_functional(desc, rng), x);
    min_re = std::min(min_re, v.real());
    max_im = std::max(max_im, std::abs(v.imag()));
  }
  const bool states = min_re >= -tol.equality && max_im <= tol.equality;

  const double nx = algebra::element_norm(x);
  const double shifted = algebra::element_norm(nx * unit - x);
  const bool norm_route = max_im <= tol.equality && shifted <= nx + tol.equality;

  std::vector<Condition> conds{{"x = x*, spec(x) >= 0", oracle, lam},
                               {"f(x) >= 0 on states", states, min_re},
                               {"self-adjoint and || ||x|| 1 - x || <= ||x||", norm_route, shifted - nx}};
  return make_verdict("positive", std::move(conds), states, std::monostate{}, tol);
}

// Projections: (1) x^2 = x = x*; (2) partial isometry and x >= 0;
// (3) x = (1 + v)/2 for a self-adjoint unitary v.
inline Verdict is_projection(const Element& x, const Element& unit, const Settings& s = {}) {
  require_identified_unit(x, unit);
  const Tolerances& tol = s.tol;
  const double idem = algebra::element_norm(x * x - x);
  const double herm = hermitian_defect(x);
  const bool oracle = idem <= tol.classification && herm <= tol.classification;

  const Verdict pos = is_positive(x, unit, s);
  const bool pi = is_partial_isometry_algebraic(x, tol);
  const bool pi_positive = pi && pos.geometric;

  const Element v = 2.0 * x - unit;
  const double v_herm = hermitian_defect(v);
  const double v_unit = unitarity_defect(v);
  const bool reflection = v_herm <= tol.classification && v_unit <= tol.classification;

  std::vector<Condition> conds{{"x^2 = x = x*", oracle, std::max(idem, herm)},
                               {"partial isometry and x >= 0", pi_positive, partial_isometry_defect(x)},
                               {"x = (1 + v)/2, v = v*, v unitary", reflection, std::max(v_herm, v_unit)}};
  return make_verdict("projection", std::move(conds), pi_positive, std::monostate{}, tol);
}

}  // namespace opgeo::classify
