#pragma once

// JSON documents: operators in, verdicts / certificates / witnesses / suite
// reports out. Numbers are written with 17 significant digits so every
// double survives a write-read cycle unchanged.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "opgeo/classify.hpp"
#include "opgeo/harness.hpp"

namespace opgeo::report {

using json = nlohmann::ordered_json;
using algebra::AlgebraShape;
using algebra::Element;
using classify::Settings;
using classify::Tolerances;
using linalg::Complex;
using linalg::ComplexMatrix;

inline constexpr std::string_view kToolName = "opgeo";
inline constexpr std::string_view kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// writer

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0.0) return std::signbit(v) ? "-0.0" : "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void write(std::ostringstream& out, const json& j, int indent, int depth) {
  const auto pad = [&](int d) {
    if (indent > 0) out << '\n' << std::string(static_cast<std::size_t>(d * indent), ' ');
  };
  // Arrays of scalars stay on one line.
  const auto flat = [](const json& a) {
    for (const auto& e : a)
      if (e.is_structured()) return false;
    return true;
  };
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << '{';
      bool first = true;
      for (const auto& [k, v] : j.items()) {
        if (!first) out << ',';
        first = false;
        pad(depth + 1);
        out << json(k).dump() << (indent > 0 ? ": " : ":");
        write(out, v, indent, depth + 1);
      }
      pad(depth);
      out << '}';
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      const bool one_line = flat(j) || indent == 0;
      out << '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out << (one_line && indent > 0 ? ", " : ",");
        first = false;
        if (!one_line) pad(depth + 1);
        write(out, v, one_line ? 0 : indent, depth + 1);
      }
      if (!one_line) pad(depth);
      out << ']';
      return;
    }
    case json::value_t::number_float:
      out << format_double(j.get<double>());
      return;
    default:
      out << j.dump();
  }
}

}  // namespace detail

inline std::string dump(const json& j, int indent = 2) {
  std::ostringstream out;
  detail::write(out, j, indent, 0);
  if (indent > 0) out << '\n';
  return out.str();
}

// FNV-1a, 64 bit, as 16 hex digits.
inline std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// elements

inline json block_json(const ComplexMatrix& m) {
  json a = json::array();
  for (const Complex& z : m.entries()) a.push_back(json::array({z.real(), z.imag()}));
  return a;
}

inline json element_json(const Element& x) {
  json a = json::array();
  for (const auto& b : x.blocks()) a.push_back(block_json(b));
  return a;
}

inline json shape_json(const AlgebraShape& s) {
  json a = json::array();
  for (std::size_t d : s.block_dims()) a.push_back(d);
  return a;
}

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline double finite_number(const json& j, ErrorKind kind, const std::string& where) {
  if (!j.is_number()) fail(kind, where + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(kind, where + ": non-finite number");
  return v;
}

}  // namespace detail

inline AlgebraShape parse_shape(const json& j, ErrorKind kind = ErrorKind::parse) {
  if (!j.is_array() || j.empty()) detail::fail(kind, "shape: expected a nonempty array of block sizes");
  std::vector<std::size_t> dims;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0 || d.get<std::uint64_t>() > 64)
      detail::fail(kind, "shape: block sizes must be integers in [1, 64]");
    dims.push_back(d.get<std::size_t>());
  }
  return AlgebraShape(std::move(dims));
}

inline Element parse_element(const json& j, const AlgebraShape& shape, ErrorKind kind = ErrorKind::parse,
                             const std::string& what = "blocks") {
  if (!j.is_array() || j.size() != shape.block_count())
    detail::fail(kind, what + ": expected " + std::to_string(shape.block_count()) + " blocks");
  std::vector<ComplexMatrix> blocks;
  for (std::size_t b = 0; b < shape.block_count(); ++b) {
    const std::size_t n = shape.block_dim(b);
    const json& jb = j[b];
    const std::string where = what + "[" + std::to_string(b) + "]";
    if (!jb.is_array() || jb.size() != n * n)
      detail::fail(kind, where + ": expected " + std::to_string(n * n) + " [re, im] pairs, row-major");
    std::vector<Complex> e;
    for (std::size_t k = 0; k < n * n; ++k) {
      const json& z = jb[k];
      const std::string at = where + "[" + std::to_string(k) + "]";
      if (!z.is_array() || z.size() != 2) detail::fail(kind, at + ": expected [re, im]");
      e.emplace_back(detail::finite_number(z[0], kind, at), detail::finite_number(z[1], kind, at));
    }
    blocks.emplace_back(n, n, std::move(e));
  }
  return {shape, std::move(blocks)};
}

inline json parse_text(std::string_view text, ErrorKind kind = ErrorKind::parse) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    detail::fail(kind, std::string("malformed JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// operator documents

struct OperatorDocument {
  Element x;
  std::optional<std::string> label;
  std::optional<Element> unit;  // "identity" in the document expands to the identity

  friend bool operator==(const OperatorDocument&, const OperatorDocument&) = default;
};

inline OperatorDocument parse_operator(std::string_view text) {
  const json j = parse_text(text);
  if (!j.is_object()) detail::fail(ErrorKind::parse, "operator document must be a JSON object");
  if (!j.contains("shape") || !j.contains("blocks")) detail::fail(ErrorKind::parse, "operator document needs shape and blocks");
  OperatorDocument doc;
  const AlgebraShape shape = parse_shape(j["shape"]);
  doc.x = parse_element(j["blocks"], shape);
  if (j.contains("label")) {
    if (!j["label"].is_string()) detail::fail(ErrorKind::parse, "label must be a string");
    doc.label = j["label"].get<std::string>();
  }
  if (j.contains("unit")) {
    const json& u = j["unit"];
    if (u.is_string()) {
      if (u.get<std::string>() != "identity") detail::fail(ErrorKind::parse, "unit must be \"identity\" or blocks");
      doc.unit = Element::unit(shape);
    } else {
      doc.unit = parse_element(u, shape, ErrorKind::parse, "unit");
    }
  }
  return doc;
}

inline json operator_json(const OperatorDocument& doc) {
  json j = json::object();
  j["shape"] = shape_json(doc.x.shape());
  if (doc.label) j["label"] = *doc.label;
  j["blocks"] = element_json(doc.x);
  if (doc.unit) j["unit"] = element_json(*doc.unit);
  return j;
}

inline std::string serialize_operator(const OperatorDocument& doc) { return dump(operator_json(doc)); }

// ---------------------------------------------------------------------------
// verdicts and evidence

inline json to_json(const Tolerances& t) {
  return json{{"decomposition", t.decomposition},
              {"equality", t.equality},
              {"classification", t.classification},
              {"tester", t.tester},
              {"rank", t.rank}};
}

inline json witness_json(const classify::PartialIsometryWitness& w) {
  return json{{"kind", "witness"},
              {"y", element_json(w.y)},
              {"b", w.b},
              {"norm_plus", w.norm_plus},
              {"norm_minus", w.norm_minus},
              {"norm_scaled", w.norm_scaled},
              {"margin", w.margin},
              {"spectral_point", w.spectral_point},
              {"verified", w.verified}};
}

inline json certificate_json(const classify::InvertibilityCertificate& c) {
  return json{{"kind", "certificate"}, {"u", element_json(c.u)}, {"epsilon", c.epsilon}};
}

inline json evidence_json(const classify::Evidence& e) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) {
          return nullptr;
        } else if constexpr (std::is_same_v<T, classify::PartialIsometryWitness>) {
          return witness_json(v);
        } else if constexpr (std::is_same_v<T, classify::InvertibilityCertificate>) {
          return certificate_json(v);
        } else if constexpr (std::is_same_v<T, classify::SpanReport>) {
          return json{{"kind", "span"},
                      {"span_dim", v.span_dim},
                      {"dual_dim", v.dual_dim},
                      {"sampled_rank", v.sampled_rank},
                      {"samples", v.samples},
                      {"borderline", v.borderline}};
        } else if constexpr (std::is_same_v<T, classify::TesterReport>) {
          return json{{"kind", "testers"},
                      {"directions", v.directions},
                      {"x1_members", v.x1_members},
                      {"x2_members", v.x2_members},
                      {"disagreements", v.disagreements},
                      {"max_x2_deviation", v.max_x2_deviation}};
        } else {
          return json{{"kind", "certificate_check"},
                      {"accepted", v.accepted},
                      {"unitarity_defect", v.unitarity_defect},
                      {"hermitian_residual", v.hermitian_residual},
                      {"min_eigenvalue", v.min_eigenvalue}};
        }
      },
      e);
}

inline json to_json(const classify::Verdict& v) {
  json conds = json::array();
  for (const auto& c : v.conditions) conds.push_back(json{{"name", c.name}, {"holds", c.holds}, {"measure", c.measure}});
  return json{{"predicate", v.predicate},
              {"status", "evaluated"},
              {"algebraic", v.algebraic},
              {"geometric", v.geometric},
              {"agreement", v.agreement},
              {"unanimous", v.unanimous},
              {"conditions", conds},
              {"evidence", evidence_json(v.evidence)}};
}

inline json not_applicable(std::string_view predicate, const Error& e) {
  return json{{"predicate", predicate}, {"status", "not-applicable"}, {"reason", e.what()}};
}

struct ClassifyResult {
  json document;
  bool precondition_failed = false;  // some predicate was not applicable
};

// Runs every applicable classifier. Predicates whose precondition fails are
// listed as not-applicable with the reason.
inline ClassifyResult classify_document(const OperatorDocument& doc, const Settings& s, std::string_view input_digest) {
  ClassifyResult r;
  json verdicts = json::array();
  auto run = [&](std::string_view name, auto&& f) {
    try {
      verdicts.push_back(to_json(f()));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::precondition && e.kind() != ErrorKind::zero_norm) throw;
      verdicts.push_back(not_applicable(name, e));
      r.precondition_failed = true;
    }
  };
  const Element& x = doc.x;
  run("partial_isometry", [&] { return classify::is_partial_isometry_geometric(x, s); });
  run("extreme_point", [&] { return classify::is_extreme_point(x, s); });
  run("unitary", [&] { return classify::is_unitary_geometric(x, s); });
  run("invertible", [&] { return classify::is_invertible(x, s.tol); });
  if (doc.unit) {
    const Element& u = *doc.unit;
    run("self_adjoint", [&] { return classify::is_self_adjoint(x, u, s.tol); });
    run("positive", [&] { return classify::is_positive(x, u, s); });
    run("projection", [&] { return classify::is_projection(x, u, s); });
  }
  json input{{"digest", input_digest}, {"shape", shape_json(x.shape())}};
  if (doc.label) input["label"] = *doc.label;
  input["unit"] = doc.unit.has_value();
  r.document = json{{"tool", kToolName},
                    {"version", kToolVersion},
                    {"input", input},
                    {"tolerances", to_json(s.tol)},
                    {"verdicts", verdicts}};
  return r;
}

// ---------------------------------------------------------------------------
// certificate / witness documents

inline json certificate_document(const classify::InvertibilityCertificate& c) {
  json j{{"predicate", "invertible"}, {"shape", shape_json(c.u.shape())}};
  j.update(certificate_json(c));
  return j;
}

inline json witness_document(const classify::PartialIsometryWitness& w) {
  json j{{"predicate", "partial-isometry"}, {"shape", shape_json(w.y.shape())}};
  j.update(witness_json(w));
  return j;
}

// A certificate with a malformed body (missing fields, epsilon not a positive
// finite number, wrong shape) raises malformed_certificate.
inline classify::InvertibilityCertificate parse_certificate(std::string_view text) {
  constexpr ErrorKind kind = ErrorKind::malformed_certificate;
  const json j = parse_text(text, kind);
  if (!j.is_object() || !j.contains("u") || !j.contains("epsilon") || !j.contains("shape"))
    detail::fail(kind, "certificate needs shape, u and epsilon");
  const AlgebraShape shape = parse_shape(j["shape"], kind);
  classify::InvertibilityCertificate c;
  c.u = parse_element(j["u"], shape, kind, "u");
  c.epsilon = detail::finite_number(j["epsilon"], kind, "epsilon");
  if (!(c.epsilon > 0.0)) detail::fail(kind, "epsilon must be positive");
  return c;
}

inline classify::PartialIsometryWitness parse_witness(std::string_view text) {
  constexpr ErrorKind kind = ErrorKind::malformed_certificate;
  const json j = parse_text(text, kind);
  if (!j.is_object() || !j.contains("y") || !j.contains("b") || !j.contains("shape"))
    detail::fail(kind, "witness needs shape, y and b");
  const AlgebraShape shape = parse_shape(j["shape"], kind);
  classify::PartialIsometryWitness w;
  w.y = parse_element(j["y"], shape, kind, "y");
  w.b = detail::finite_number(j["b"], kind, "b");
  return w;
}

// ---------------------------------------------------------------------------
// suite reports

inline json failure_json(const harness::Failure& f) {
  char seed[19];
  std::snprintf(seed, sizeof seed, "0x%016llx", static_cast<unsigned long long>(f.seed));
  return json{{"seed", seed},
              {"trial", f.trial},
              {"shape", f.shape},
              {"deviation", f.deviation},
              {"rerun_deviation", f.rerun_deviation},
              {"rerun_passed", f.rerun_passed},
              {"note", f.note}};
}

// Wall time is left out unless asked for, so identical runs give identical
// bytes.
inline json to_json(const harness::SuiteReport& r, bool timing = false) {
  json suites = json::array();
  for (const auto& s : r.suites) {
    json metrics = json::object();
    for (const auto& [name, range] : s.metrics) metrics[name] = json{{"min", range.min}, {"max", range.max}};
    json failures = json::array(), recovered = json::array();
    for (const auto& f : s.failures) failures.push_back(failure_json(f));
    for (const auto& f : s.recovered) recovered.push_back(failure_json(f));
    json js{{"suite", harness::to_string(s.suite)},
            {"trials", s.trials},
            {"passed", s.passed},
            {"failed", s.trials - s.passed},
            {"max_deviation", s.max_deviation},
            {"metrics", metrics},
            {"failures", failures},
            {"recovered", recovered}};
    if (timing) js["wall_seconds"] = s.wall_seconds;
    suites.push_back(std::move(js));
  }
  return json{{"tool", kToolName},
              {"version", kToolVersion},
              {"seed", r.seed},
              {"trials", r.trials},
              {"shapes", r.shapes},
              {"tolerances", to_json(r.tolerances)},
              {"ok", r.ok()},
              {"suites", suites}};
}

inline std::string to_text(const harness::SuiteReport& r, bool timing = false) {
  std::ostringstream out;
  out << "seed " << r.seed << ", " << r.trials << " trials per suite, shapes";
  for (const auto& s : r.shapes) out << ' ' << s;
  out << '\n';
  for (const auto& s : r.suites) {
    out << (s.ok() ? "PASS " : "FAIL ") << harness::to_string(s.suite) << "  " << s.passed << '/' << s.trials
        << "  max deviation " << format_double(s.max_deviation);
    if (!s.recovered.empty()) out << "  (" << s.recovered.size() << " recovered on rerun)";
    if (timing) out << "  " << format_double(s.wall_seconds) << " s";
    out << '\n';
    for (const auto& f : s.failures) {
      char seed[19];
      std::snprintf(seed, sizeof seed, "0x%016llx", static_cast<unsigned long long>(f.seed));
      out << "  trial " << f.trial << " seed " << seed << " " << f.shape << " deviation "
          << format_double(f.deviation) << ": " << f.note << '\n';
    }
  }
  out << (r.ok() ? "all suites passed\n" : "some suites failed\n");
  return out.str();
}

}  // namespace opgeo::report
