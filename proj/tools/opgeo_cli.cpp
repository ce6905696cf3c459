// opgeo: classify operators, emit and check certificates, run the suites.
//
// Exit codes: 0 success, 1 harness failures, 2 input error, 3 precondition,
// 4 negative certification.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "opgeo/opgeo.hpp"

namespace {

using namespace opgeo;
using report::json;

enum Exit { kOk = 0, kSuiteFailure = 1, kInputError = 2, kPrecondition = 3, kNegative = 4 };

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::parse:
    case ErrorKind::invalid_argument:
    case ErrorKind::malformed_certificate:
      return kInputError;
    case ErrorKind::precondition:
    case ErrorKind::shape_mismatch:
    case ErrorKind::zero_norm:
      return kPrecondition;
  }
  return kInputError;
}

std::string read_input(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), {}};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::parse, "cannot read '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint64_t parse_seed(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::invalid_argument, "seed must be an unsigned integer, got '" + text + "'");
  }
}

std::optional<std::uint64_t> env_seed() {
  if (const char* s = std::getenv("OPGEO_SEED")) return parse_seed(s);
  return std::nullopt;
}

classify::Tolerances apply_overrides(const std::vector<std::string>& overrides) {
  classify::Tolerances t;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::invalid_argument, "--tol expects name=value, got '" + o + "'");
    const std::string name = o.substr(0, eq);
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(o.substr(eq + 1), &used);
      if (used != o.size() - eq - 1) throw std::invalid_argument(o);
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_argument, "--tol value is not a number in '" + o + "'");
    }
    if (!(value > 0.0) || !std::isfinite(value))
      throw Error(ErrorKind::invalid_argument, "--tol values must be positive, got '" + o + "'");
    if (name == "decomposition") t.decomposition = value;
    else if (name == "equality") t.equality = value;
    else if (name == "classification") t.classification = value;
    else if (name == "tester") t.tester = value;
    else if (name == "rank") t.rank = value;
    else throw Error(ErrorKind::invalid_argument, "unknown tolerance '" + name + "'");
  }
  return t;
}

// "2,4,6,2+3" or "M2,M2+M3".
std::vector<algebra::AlgebraShape> parse_shapes(const std::string& text) {
  std::vector<algebra::AlgebraShape> shapes;
  std::stringstream list(text);
  std::string item;
  while (std::getline(list, item, ',')) {
    std::vector<std::size_t> dims;
    std::stringstream parts(item);
    std::string part;
    while (std::getline(parts, part, '+')) {
      if (!part.empty() && (part[0] == 'M' || part[0] == 'm')) part.erase(0, 1);
      if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos || part.size() > 2)
        throw Error(ErrorKind::invalid_argument, "bad shape '" + item + "'");
      dims.push_back(std::stoul(part));
    }
    shapes.emplace_back(std::move(dims));
  }
  if (shapes.empty()) throw Error(ErrorKind::invalid_argument, "no shapes given");
  return shapes;
}

std::vector<harness::Suite> parse_suites(const std::string& text) {
  std::vector<harness::Suite> suites;
  std::stringstream list(text);
  std::string item;
  while (std::getline(list, item, ',')) suites.push_back(harness::parse_suite(item));
  if (suites.empty()) throw Error(ErrorKind::invalid_argument, "no suites given");
  return suites;
}

// The unit comes from --unit (the word "identity" or an operator document
// whose blocks are the unit) or from the document's own "unit" field.
void attach_unit(report::OperatorDocument& doc, const std::string& unit_flag) {
  if (unit_flag.empty()) return;
  if (unit_flag == "identity") {
    doc.unit = algebra::Element::unit(doc.x.shape());
    return;
  }
  const auto u = report::parse_operator(read_input(unit_flag));
  algebra::require_same_shape(doc.x.shape(), u.x.shape(), "--unit");
  doc.unit = u.x;
}

struct Common {
  std::vector<std::string> tol;
  std::string seed;
};

classify::Settings settings_from(const Common& c) {
  classify::Settings s;
  s.tol = apply_overrides(c.tol);
  if (!c.seed.empty()) s.seed = parse_seed(c.seed);
  else if (auto e = env_seed()) s.seed = *e;
  return s;
}

int cmd_classify(const std::string& input, const std::string& unit, const Common& common) {
  const std::string text = read_input(input);
  auto doc = report::parse_operator(text);
  attach_unit(doc, unit);
  const auto result = report::classify_document(doc, settings_from(common), report::digest(text));
  std::cout << report::dump(result.document);
  return result.precondition_failed ? kPrecondition : kOk;
}

int cmd_certify(const std::string& input, const std::string& predicate, const std::string& verify, const Common& common) {
  const auto doc = report::parse_operator(read_input(input));
  const classify::Settings s = settings_from(common);
  if (predicate == "invertible") {
    if (!verify.empty()) {
      const auto cert = report::parse_certificate(read_input(verify));
      const auto check = classify::verify_certificate(doc.x, cert, s.tol);
      json out = report::evidence_json(check);
      out["predicate"] = "invertible";
      std::cout << report::dump(out);
      return check.accepted ? kOk : kNegative;
    }
    const auto cert = classify::invertibility_certificate(doc.x, s.tol);
    if (!cert) {
      std::cerr << "opgeo: no certificate: sigma_min(x) = " << report::format_double(classify::min_singular_value(doc.x))
                << " is not above " << report::format_double(s.tol.classification) << '\n';
      return kNegative;
    }
    std::cout << report::dump(report::certificate_document(*cert));
    return kOk;
  }
  // partial-isometry: the evidence is a witness that x is not one
  if (!verify.empty()) {
    const auto w = report::parse_witness(read_input(verify));
    const bool ok = classify::verify_witness(doc.x, w, s.tol);
    json out{{"kind", "witness_check"},
             {"accepted", ok},
             {"norm_plus", algebra::element_norm(doc.x + w.y)},
             {"norm_minus", algebra::element_norm(doc.x - w.y)},
             {"norm_scaled", algebra::element_norm(doc.x + w.b * w.y)},
             {"predicate", "partial-isometry"}};
    std::cout << report::dump(out);
    return ok ? kOk : kNegative;
  }
  const auto w = classify::construct_witness(doc.x, s.witness, s.tol);
  if (!w) {
    std::cerr << "opgeo: no witness: no singular value of x lies in [" << report::format_double(s.witness.gap) << ", "
              << report::format_double(1.0 - s.witness.gap) << "]\n";
    return kNegative;
  }
  std::cout << report::dump(report::witness_document(*w));
  return kOk;
}

int cmd_adjoint(const std::string& input, const std::string& unit) {
  auto doc = report::parse_operator(read_input(input));
  attach_unit(doc, unit);
  if (!doc.unit) throw Error(ErrorKind::precondition, "adjoint recovery needs an identified unit (--unit identity)");
  report::OperatorDocument out{classify::recover_adjoint(doc.x, *doc.unit), std::nullopt, std::nullopt};
  if (doc.label) out.label = *doc.label + "*";
  std::cout << report::serialize_operator(out);
  return kOk;
}

struct HarnessFlags {
  std::string seed;
  int trials = 200;
  std::string suites;
  std::string shapes;
  std::string format = "json";
  bool timing = false;
  int threads = 1;
};

int cmd_harness(const HarnessFlags& f, const Common& common) {
  harness::TrialConfig cfg;
  if (!f.seed.empty()) cfg.seed = parse_seed(f.seed);
  else if (auto e = env_seed()) cfg.seed = *e;
  cfg.trials = f.trials;
  cfg.threads = f.threads;
  cfg.tolerances = apply_overrides(common.tol);
  if (!f.suites.empty()) cfg.suites = parse_suites(f.suites);
  if (!f.shapes.empty()) cfg.shapes = parse_shapes(f.shapes);
  harness::validate(cfg);
  const auto r = harness::run_suite(cfg);
  if (f.format == "text") std::cout << report::to_text(r, f.timing);
  else std::cout << report::dump(report::to_json(r, f.timing));
  if (!r.ok()) {
    for (const auto& s : r.suites)
      for (const auto& fl : s.failures)
        std::cerr << "opgeo: " << harness::to_string(s.suite) << " failed at trial " << fl.trial << " (seed "
                  << fl.seed << ", " << fl.shape << ")\n";
  }
  return r.ok() ? kOk : kSuiteFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classify finite-dimensional C*-algebra elements by norm geometry"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(report::kToolVersion));

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tol", common.tol, "Tolerance override name=value (decomposition, equality, classification, tester, rank)");
  };

  std::string input, unit, predicate, verify;
  auto* classify_cmd = app.add_subcommand("classify", "Run every applicable classifier on an operator document");
  classify_cmd->add_option("input", input, "Operator document (- for stdin)")->required();
  classify_cmd->add_option("--unit", unit, "\"identity\" or an operator document holding the unit");
  classify_cmd->add_option("--seed", common.seed, "Seed for sampled checks (default: $OPGEO_SEED)");
  add_common(classify_cmd);

  auto* certify_cmd = app.add_subcommand("certify", "Emit or verify an invertibility certificate or a witness");
  certify_cmd->add_option("input", input, "Operator document (- for stdin)")->required();
  certify_cmd->add_option("--predicate", predicate, "invertible | partial-isometry")
      ->required()
      ->check(CLI::IsMember({"invertible", "partial-isometry"}));
  certify_cmd->add_option("--verify", verify, "Certificate or witness document to check against the operator");
  add_common(certify_cmd);

  HarnessFlags hf;
  auto* harness_cmd = app.add_subcommand("harness", "Run the property suites");
  harness_cmd->add_option("--seed", hf.seed, "Base seed (default: $OPGEO_SEED, else 1)");
  harness_cmd->add_option("--trials", hf.trials, "Trials per suite")->check(CLI::PositiveNumber);
  harness_cmd->add_option("--suites", hf.suites, "Comma-separated subset of T1F,T1B,T1X,T2,T2P,T4,LUMER,P6,P7,ADJ");
  harness_cmd->add_option("--shapes", hf.shapes, "Comma-separated shapes, blocks joined by + (default 2,4,6,2+3)");
  harness_cmd->add_option("--format", hf.format, "json | text")->check(CLI::IsMember({"json", "text"}));
  harness_cmd->add_option("--threads", hf.threads, "Worker threads")->check(CLI::PositiveNumber);
  harness_cmd->add_flag("--timing", hf.timing, "Include wall time (output then varies between runs)");
  add_common(harness_cmd);

  auto* adjoint_cmd = app.add_subcommand("adjoint", "Recover x* from state data and print it");
  adjoint_cmd->add_option("input", input, "Operator document (- for stdin)")->required();
  adjoint_cmd->add_option("--unit", unit, "\"identity\" or an operator document holding the unit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*classify_cmd) return cmd_classify(input, unit, common);
    if (*certify_cmd) return cmd_certify(input, predicate, verify, common);
    if (*harness_cmd) return cmd_harness(hf, common);
    if (*adjoint_cmd) return cmd_adjoint(input, unit);
  } catch (const Error& e) {
    std::cerr << "opgeo: " << e.what() << '\n';
    return exit_code(e);
  }
  return kInputError;
}
