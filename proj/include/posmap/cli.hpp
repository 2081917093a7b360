#ifndef POSMAP_CLI_HPP
#define POSMAP_CLI_HPP

// Command-line front end. parse_args resolves flags, an optional JSON config
// and POSMAP_SEED into a RunConfig; run executes it and writes one report.
// Exit codes: 0 all checks passed, 1 a mathematical check failed, 2 usage or
// IO error.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "posmap/io.hpp"
#include "posmap/witness.hpp"

namespace posmap::cli {

enum class Command { Build, CertifyBlock, CheckPositive, Witness, Detect, Optimality, NdOptimality, FullReport };
enum class Format { Json, Csv, Text };

inline constexpr std::uint64_t kDefaultSeed = 42;
inline constexpr std::size_t kDefaultTrials = 500;
inline constexpr std::size_t kMaxSquaredDimension = 4096;
inline constexpr double kNearDiagonalAtol = 1e-12;

inline const std::vector<std::pair<std::string, Command>>& command_names() {
  static const std::vector<std::pair<std::string, Command>> names = {
      {"build", Command::Build},
      {"certify-block", Command::CertifyBlock},
      {"check-positive", Command::CheckPositive},
      {"witness", Command::Witness},
      {"detect", Command::Detect},
      {"optimality", Command::Optimality},
      {"nd-optimality", Command::NdOptimality},
      {"full-report", Command::FullReport},
  };
  return names;
}

inline std::string to_string(Command c) {
  for (const auto& [name, cmd] : command_names())
    if (cmd == c) return name;
  return "unknown";
}

inline std::optional<Command> parse_command(const std::string& s) {
  for (const auto& [name, cmd] : command_names())
    if (name == s) return cmd;
  return std::nullopt;
}

inline std::string to_string(Format f) {
  switch (f) {
    case Format::Json: return "json";
    case Format::Csv: return "csv";
    case Format::Text: return "text";
  }
  return "json";
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  Command command = Command::FullReport;
  std::optional<MapSpec> map_spec;
  std::optional<BlockSpec> block_spec;
  bool z_random = false;  // phases were drawn from the seed
  std::uint64_t seed = kDefaultSeed;
  std::string seed_source = "default";  // default | env | config | flag
  std::size_t trials = kDefaultTrials;
  Tolerance tolerances;
  std::string output;  // empty: stdout
  Format format = Format::Json;
  bool timestamp = true;
  bool allow_large = false;
};

/// Parses "a", "a+bi", "a-bi", "bi", "i", "-i".
inline Complex parse_complex(const std::string& token) {
  auto number = [&](std::string_view s) {
    double v = 0.0;
    if (s.empty() || s == "+") return 1.0;
    if (s == "-") return -1.0;
    if (s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("cannot parse number in '" + token + "'");
    return v;
  };
  std::string_view s(token);
  if (s.empty()) throw UsageError("empty complex literal");
  if (s.back() != 'i') return {number(s), 0.0};
  s.remove_suffix(1);
  std::size_t split = std::string_view::npos;
  for (std::size_t p = s.size(); p-- > 1;) {
    if ((s[p] == '+' || s[p] == '-') && s[p - 1] != 'e' && s[p - 1] != 'E') {
      split = p;
      break;
    }
  }
  if (split == std::string_view::npos) return {0.0, number(s)};
  return {number(s.substr(0, split)), number(s.substr(split))};
}

/// Comma-separated complex literals; a single value fills every pair.
inline Json parse_z_flag(const std::string& text) {
  std::vector<Complex> values;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
    values.push_back(parse_complex(tok));
  }
  if (values.empty()) throw UsageError("--z: no values");
  if (values.size() == 1 && values[0].imag() == 0.0) return values[0].real();
  Json re = Json::array(), im = Json::array();
  for (const auto& v : values) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  if (values.size() == 1) return Json{{"fill_re", re[0]}, {"fill_im", im[0]}};
  return Json{{"re", re}, {"im", im}};
}

inline std::uint64_t parse_seed(const std::string& text, const char* origin) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw UsageError(std::string(origin) + ": seed '" + text + "' is not an unsigned 64-bit integer");
  }
  return v;
}

inline Json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw UsageError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw UsageError(std::string("malformed JSON in ") + what + " '" + path + "': " + e.what());
  }
}

namespace detail {

inline UpperTriangular<Complex> random_unit_phases(std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x7a));
  UpperTriangular<Complex> z(n);
  for (auto& v : z.values()) v = rng.unit_phase();
  return z;
}

// Resolve the map part of a config: config values first, flags on top.
inline std::optional<MapSpec> resolve_map_spec(Json spec_json, const std::optional<std::string>& family,
                                               const std::optional<std::size_t>& n,
                                               const std::optional<std::size_t>& k,
                                               const std::optional<std::string>& z,
                                               const std::optional<std::string>& unitary, bool& z_random) {
  if (family) spec_json["family"] = *family;
  if (n) spec_json["N"] = *n;
  if (k) spec_json["K"] = *k;
  if (unitary) spec_json["unitary"] = *unitary;
  std::optional<Complex> fill;
  if (z) {
    if (*z == "random") {
      z_random = true;
      spec_json.erase("z");
    } else {
      Json zj = parse_z_flag(*z);
      if (zj.is_object() && zj.contains("fill_re")) {
        fill = Complex{zj["fill_re"].get<double>(), zj["fill_im"].get<double>()};
        spec_json.erase("z");
      } else {
        spec_json["z"] = zj;
      }
    }
  } else if (spec_json.contains("z") && spec_json["z"].is_string()) {
    if (spec_json["z"].get<std::string>() != "random") throw UsageError("map_spec.z: only \"random\" is a valid string");
    z_random = true;
    spec_json.erase("z");
  }
  if (spec_json.is_null() || spec_json.empty()) return std::nullopt;
  MapSpec spec = map_spec_from_json(spec_json);
  if (fill && spec.has_phases()) spec.z = UpperTriangular<Complex>(spec.n, *fill);
  return spec;
}

}  // namespace detail

/// Builds a RunConfig from argv. `env_seed` is the value of POSMAP_SEED, if set.
/// Returns nullopt when help was requested (already printed to `out`).
inline std::optional<RunConfig> parse_args(int argc, const char* const* argv, const char* env_seed,
                                           std::ostream& out = std::cout) {
  CLI::App app{"Positive maps: block certificates, witnesses, PPT detection and optimality checks", "posmap"};
  std::string command_text;
  std::optional<std::string> family, z, unitary, spec_path, config_path, output, format, seed_text;
  std::optional<std::size_t> n, k, trials;
  std::optional<double> psd_slack, eq_atol;
  bool no_timestamp = false, allow_large = false;

  std::string commands;
  for (const auto& [name, _] : command_names()) commands += (commands.empty() ? "" : "|") + name;
  app.add_option("command", command_text, commands);
  app.add_option("--family", family, "reduction|generalized-reduction|robertson|generalized-robertson|"
                                     "complex-robertson|new");
  app.add_option("--N", n, "number of blocks");
  app.add_option("--K", k, "half block size for unitary-twisted families");
  app.add_option("--z", z, "pair phases in order (1,2),(1,3),...: one value, a comma list like 1,0.5-0.5i, or random");
  app.add_option("--unitary", unitary, "antisymmetric unitary: J or sigma_y");
  app.add_option("--spec", spec_path, "BlockSpec or MapSpec JSON file");
  app.add_option("--config", config_path, "RunConfig JSON file");
  app.add_option("--seed", seed_text, "64-bit seed (default 42, or POSMAP_SEED)");
  app.add_option("--trials", trials, "see-saw trials (default 500)");
  app.add_option("--psd-slack", psd_slack, "PSD slack (default 1e-9)");
  app.add_option("--eq-atol", eq_atol, "equality tolerance (default 1e-10)");
  app.add_option("--output", output, "report path (default stdout)");
  app.add_option("--format", format, "json|csv|text");
  app.add_flag("--no-timestamp", no_timestamp, "omit the timestamp so reports are byte-reproducible");
  app.add_flag("--allow-large", allow_large, "permit d^2 > 4096");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return std::nullopt;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig cfg;
  Json config = Json::object();
  if (config_path) {
    config = read_json_file(*config_path, "config");
    if (!config.is_object()) throw UsageError("config: expected a JSON object");
    try {
      io::reject_unknown(config,
                         {"command", "map_spec", "block_spec", "seed", "trials", "tolerances", "output", "format",
                          "no_timestamp", "allow_large"},
                         "config");
    } catch (const FormatError& e) {
      throw UsageError(e.what());
    }
  }

  if (command_text.empty() && config.contains("command")) command_text = config["command"].get<std::string>();
  if (command_text.empty()) throw UsageError("no command given (" + commands + ")");
  const auto command = parse_command(command_text);
  if (!command) throw UsageError("unknown command '" + command_text + "' (" + commands + ")");
  cfg.command = *command;

  try {
    if (env_seed && *env_seed) {
      cfg.seed = parse_seed(env_seed, "POSMAP_SEED");
      cfg.seed_source = "env";
    }
    if (config.contains("seed")) {
      if (!config["seed"].is_number_unsigned()) throw UsageError("config.seed: expected an unsigned integer");
      cfg.seed = config["seed"].get<std::uint64_t>();
      cfg.seed_source = "config";
    }
    if (seed_text) {
      cfg.seed = parse_seed(*seed_text, "--seed");
      cfg.seed_source = "flag";
    }

    if (config.contains("trials")) cfg.trials = io::as_size(config["trials"], "config.trials");
    if (trials) cfg.trials = *trials;
    if (cfg.trials == 0) throw UsageError("trials must be at least 1");

    if (config.contains("tolerances")) {
      const Json& t = config["tolerances"];
      io::require_object(t, "config.tolerances");
      io::reject_unknown(t, {"psd_slack", "eq_atol"}, "config.tolerances");
      if (t.contains("psd_slack")) cfg.tolerances.psd_slack = io::as_double(t["psd_slack"], "psd_slack");
      if (t.contains("eq_atol")) cfg.tolerances.eq_atol = io::as_double(t["eq_atol"], "eq_atol");
    }
    if (psd_slack) cfg.tolerances.psd_slack = *psd_slack;
    if (eq_atol) cfg.tolerances.eq_atol = *eq_atol;
    cfg.tolerances.validate();

    if (config.contains("output")) cfg.output = config["output"].get<std::string>();
    if (output) cfg.output = *output;

    std::string fmt = config.value("format", std::string("json"));
    if (format) fmt = *format;
    if (fmt == "json") cfg.format = Format::Json;
    else if (fmt == "csv") cfg.format = Format::Csv;
    else if (fmt == "text") cfg.format = Format::Text;
    else throw UsageError("unknown format '" + fmt + "' (json|csv|text)");

    cfg.timestamp = !(no_timestamp || config.value("no_timestamp", false));
    cfg.allow_large = allow_large || config.value("allow_large", false);

    // --spec holds either kind of spec; a BlockSpec is recognised by n_blocks.
    Json map_json = config.value("map_spec", Json::object());
    if (config.contains("block_spec")) cfg.block_spec = block_spec_from_json(config["block_spec"]);
    if (spec_path) {
      Json s = read_json_file(*spec_path, "spec");
      if (s.is_object() && s.contains("n_blocks")) {
        cfg.block_spec = block_spec_from_json(s);
      } else {
        map_json = std::move(s);
      }
    }
    cfg.map_spec = detail::resolve_map_spec(std::move(map_json), family, n, k, z, unitary, cfg.z_random);
    if (cfg.map_spec && cfg.z_random && cfg.map_spec->has_phases()) {
      cfg.map_spec->z = detail::random_unit_phases(cfg.map_spec->n, cfg.seed);
    }
  } catch (const FormatError& e) {
    throw UsageError(e.what());
  } catch (const Json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

namespace detail {

inline bool is_matrix_json(const Json& j) {
  return j.is_object() && j.contains("rows") && j.contains("cols") && j.contains("re");
}

// Scalar leaves with dotted paths; arrays and matrices are JSON-only.
inline void flatten(const Json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    if (is_matrix_json(j)) return;
    for (const auto& [key, value] : j.items()) flatten(value, prefix.empty() ? key : prefix + "." + key, out);
  } else if (j.is_array()) {
    // Lists of names (failed invariants, checks) stay summary fields.
    if (j.empty() || !j.front().is_string()) return;
    std::string joined;
    for (const auto& x : j) joined += (joined.empty() ? "" : ";") + x.get<std::string>();
    out.emplace_back(prefix, joined);
  } else {
    out.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

class Checks {
 public:
  void add(const std::string& name, bool ok) {
    names_.push_back(name);
    if (!ok) failed_.push_back(name);
  }
  bool ok() const noexcept { return failed_.empty(); }
  const std::vector<std::string>& failed() const noexcept { return failed_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<std::string> failed_;
};

inline Json site_json(const ViolationSite& s) {
  return Json{{"condition", s.condition}, {"i", s.i + 1}, {"j", s.j + 1}, {"k", s.k + 1}};
}

inline Json vector_json(std::span<const Complex> v) {
  Json re = Json::array(), im = Json::array();
  for (const auto& x : v) {
    re.push_back(x.real());
    im.push_back(x.imag());
  }
  return Json{{"re", re}, {"im", im}};
}

inline const MapSpec& need_map(const RunConfig& cfg) {
  if (!cfg.map_spec) throw UsageError(to_string(cfg.command) + " needs a map (--family ... or --spec/--config)");
  return *cfg.map_spec;
}

inline const MapSpec& need_new_family(const RunConfig& cfg) {
  const MapSpec& spec = need_map(cfg);
  if (spec.family != MapFamily::NewFamily) {
    throw UsageError(to_string(cfg.command) + " applies to --family new only");
  }
  return spec;
}

inline void guard_dimension(std::size_t d, const RunConfig& cfg) {
  if (d * d > kMaxSquaredDimension && !cfg.allow_large) {
    throw UsageError("d^2 = " + std::to_string(d * d) + " exceeds " + std::to_string(kMaxSquaredDimension) +
                     "; pass --allow-large to proceed");
  }
}

inline Json scan_section(const MapSpec& spec, const RunConfig& cfg, Checks& checks, bool with_argmin) {
  const ScanResult scan = positivity_scan(build(spec, cfg.tolerances), cfg.trials, cfg.seed);
  const bool ok = scan.min_value >= -cfg.tolerances.psd_slack;
  checks.add("positivity_scan", ok);
  Json j;
  j["min_value"] = scan.min_value;
  j["best_trial"] = scan.best_trial;
  j["total_alternations"] = scan.total_alternations;
  j["trials"] = cfg.trials;
  j["ok"] = ok;
  if (with_argmin) j["argmin"] = vector_json(scan.argmin);
  return j;
}

inline Json witness_section(const Witness& w, const RunConfig& cfg, Checks& checks) {
  const double lmin = min_eigenvalue(w.matrix, cfg.tolerances);
  const bool not_psd = lmin < -cfg.tolerances.psd_slack;
  checks.add("witness_not_psd", not_psd);
  Json j;
  j["dims"] = Json{{"dA", w.dims.dA}, {"dB", w.dims.dB}};
  j["min_eigenvalue"] = lmin;
  j["trace"] = trace(w.matrix).real();
  j["hermiticity_error"] = hermiticity_error(w.matrix);
  j["not_psd"] = not_psd;
  return j;
}

inline Json detect_section(const MapSpec& spec, const Witness& w, const RunConfig& cfg, Checks& checks,
                           bool with_matrix) {
  const PptDetector det = build_ppt_detector(spec.n, spec.k, spec.z, w);
  const DetectionResult r = detection_value(w, det);
  const double tr = trace(det.rho).real();
  const double lmin = min_eigenvalue(det.rho, cfg.tolerances);
  const double lmin_gamma =
      min_eigenvalue(partial_transpose(det.rho, w.dims, Subsystem::B), cfg.tolerances);
  const double norm_c = 1.0 / det.normalization;
  const bool trace_ok = std::abs(tr - 1.0) <= cfg.tolerances.eq_atol;
  const bool psd_ok = lmin >= -cfg.tolerances.psd_slack;
  const bool ppt_ok = lmin_gamma >= -cfg.tolerances.psd_slack;
  const bool negative = r.value < -cfg.tolerances.psd_slack;
  const double residual = std::abs(r.value - r.expected);
  const bool constant_ok = residual <= cfg.tolerances.eq_atol;
  const bool near_ok = std::abs(r.near_diagonal_sum) <= kNearDiagonalAtol;
  checks.add("rho_trace_one", trace_ok);
  checks.add("rho_psd", psd_ok);
  checks.add("rho_ppt", ppt_ok);
  checks.add("detection_negative", negative);
  checks.add("detection_constant", constant_ok);
  checks.add("near_diagonal_zero", near_ok);

  Json j;
  j["trace"] = tr;
  j["unnormalized_trace"] = det.unnormalized_trace;
  j["normalization"] = det.normalization;
  j["rho_min_eigenvalue"] = lmin;
  j["rho_gamma_min_eigenvalue"] = lmin_gamma;
  j["psd_ok"] = psd_ok;
  j["ppt_ok"] = ppt_ok;
  j["detection_value"] = r.value;
  j["expected_detection_value"] = r.expected;
  j["detection_residual"] = residual;
  j["constant_ok"] = constant_ok;
  Json parts;
  parts["diagonal"] = r.diagonal_sum * norm_c;
  parts["stripe"] = r.stripe_sum * norm_c;
  parts["diagonal_plus_stripe"] = (r.diagonal_sum + r.stripe_sum) * norm_c;
  parts["expected_diagonal_plus_stripe"] = expected_stripe_sum(spec.n, spec.k);
  parts["residual"] = r.residual_sum * norm_c;
  parts["expected_residual"] = expected_residual_sum(spec.n, spec.k);
  parts["near_diagonal"] = r.near_diagonal_sum;
  parts["scale"] = "before normalization, except near_diagonal";
  j["partial_sums"] = std::move(parts);
  j["near_diagonal_ok"] = near_ok;
  if (with_matrix) j["rho"] = to_json(det.rho);
  return j;
}

inline Json necessity_json(const NecessityFailure& e) {
  Json pairs = Json::array();
  for (const auto& [p, q] : e.pairs()) pairs.push_back(Json::array({p + 1, q + 1}));
  return Json{{"error", e.what()}, {"non_unimodular_pairs", pairs}};
}

inline Json optimality_section(const MapSpec& spec, const Witness& w, const RunConfig& cfg, Checks& checks) {
  try {
    const ZeroProductSet set = optimality_zero_set(spec, w, cfg.tolerances);
    const std::size_t d = spec.dimension();
    checks.add("zero_expectations", set.zeros_ok);
    checks.add("spanning_rank", set.spanning_ok);
    Json j;
    j["vector_count"] = set.vectors.size();
    j["expected_count"] = d * d;
    j["max_abs_expectation"] = set.max_abs_expectation;
    j["min_singular_value"] = set.min_singular_value;
    j["rank"] = set.rank;
    j["zeros_ok"] = set.zeros_ok;
    j["spanning_ok"] = set.spanning_ok;
    j["optimal"] = set.zeros_ok && set.spanning_ok;
    return j;
  } catch (const NecessityFailure& e) {
    checks.add("unimodular_phases", false);
    return necessity_json(e);
  }
}

inline Json nd_section(const MapSpec& spec, const Witness& w, const RunConfig& cfg, Checks& checks) {
  try {
    const NdOptimalityReport r = nd_optimality_check(spec, w, cfg.tolerances);
    checks.add("covariance", r.covariance_ok);
    checks.add("gamma_zero_expectations", r.gamma_zero_set_ok);
    checks.add("gamma_spanning_rank", r.gamma_spanning_ok);
    Json j;
    j["covariance_residual"] = r.covariance_residual;
    j["covariance_ok"] = r.covariance_ok;
    j["unitary_identity_residual"] = antisymmetric_conjugation_identity(spec.unitary);
    j["gamma_max_abs_expectation"] = r.gamma_max_abs_expectation;
    j["gamma_min_singular_value"] = r.gamma_min_singular_value;
    j["gamma_rank"] = r.gamma_rank;
    j["gamma_zero_set_ok"] = r.gamma_zero_set_ok;
    j["gamma_spanning_ok"] = r.gamma_spanning_ok;
    j["nd_optimal"] = r.ok();
    return j;
  } catch (const NecessityFailure& e) {
    checks.add("unimodular_phases", false);
    return necessity_json(e);
  }
}

inline Json certify_section(const BlockSpec& spec, const RunConfig& cfg, Checks& checks) {
  Json j;
  const ConditionReport cond = check_conditions(spec, cfg.tolerances);
  Json c;
  c["def_ok"] = cond.def_ok;
  c["def_violation"] = cond.def_violation;
  c["cond1_ok"] = cond.cond1_ok;
  c["cond1_violation"] = cond.cond1_violation;
  c["cond2_ok"] = cond.cond2_ok;
  c["cond2_violation"] = cond.cond2_violation;
  c["max_violation"] = cond.max_violation;
  if (cond.witness_triple) c["worst_triple"] = site_json(*cond.witness_triple);
  j["conditions"] = std::move(c);
  checks.add("def", cond.def_ok);
  checks.add("cond1", cond.cond1_ok);
  checks.add("cond2", cond.cond2_ok);

  const CertifyResult cert = inductive_certify(spec, cfg.tolerances);
  Json ic;
  ic["ok"] = cert.ok();
  if (cert.certificate) {
    const auto& ct = *cert.certificate;
    ic["levels"] = ct.chain.size();
    ic["level_min_eigenvalues"] = ct.level_min_eigenvalues;
    ic["degenerate_guard_used"] = ct.degenerate_guard_used;
    Json steps = Json::array();
    for (const auto& s : ct.steps) {
      Json sj;
      sj["level"] = s.level;
      sj["alpha_last"] = s.alpha_last;
      sj["max_new_phase"] = s.max_new_phase;
      sj["phase_bound_excess"] = s.phase_bound_excess;
      sj["rescaled_relation_violation"] = s.rescaled_relation_violation;
      sj["rescaled_diag_violation"] = s.rescaled_diag_violation;
      sj["diag_bound_margin"] = s.diag_bound_margin;
      sj["schur_identity_residual"] = s.schur_identity_residual;
      sj["loewner_gap"] = s.loewner_gap;
      steps.push_back(std::move(sj));
    }
    ic["steps"] = std::move(steps);
  }
  if (cert.failure) {
    const auto& f = *cert.failure;
    Json fj;
    fj["step"] = f.step;
    fj["check"] = f.check;
    fj["value"] = f.value;
    fj["message"] = f.message;
    if (f.site) fj["site"] = site_json(*f.site);
    ic["failure"] = std::move(fj);
  }
  j["inductive_certificate"] = std::move(ic);
  checks.add("inductive_certificate", cert.ok());

  const double lmin = min_eigenvalue(assemble(spec, cfg.tolerances), cfg.tolerances);
  j["assembled_min_eigenvalue"] = lmin;
  j["assembled_psd"] = lmin >= -cfg.tolerances.psd_slack;
  checks.add("assembled_psd", lmin >= -cfg.tolerances.psd_slack);
  return j;
}

inline Json decisions_json() {
  Json j;
  j["index_base"] = 1;
  j["choi_normalization"] = "(1/d) sum_ij e_ij (x) map(e_ij)";
  j["partial_transpose"] = "second factor";
  j["zero_set_left_convention"] = to_string(detect_left_convention());
  j["diag_bound_weight"] = "M_ii <= alpha_i 1";
  j["lower_block_phase"] = "conj(z_pq)";
  j["detector_block_rule"] = "(p,r),(q,s): p==q zero; r==s stripe -W_ij; else z_pq/((2K)^2 N(N-1)) e_ij";
  j["detector_normalization"] = "1/(2K+1)";
  j["nd_unitary"] = "V = 1_N (x) U^+";
  return j;
}

inline Json execute(const RunConfig& cfg, Checks& checks) {
  Json results;
  switch (cfg.command) {
    case Command::Build: {
      const MapSpec& spec = need_map(cfg);
      guard_dimension(spec.dimension(), cfg);
      const LinearMap map = build(spec, cfg.tolerances);
      const double herm = hermiticity_preservation_error(map);
      checks.add("hermiticity_preservation", herm <= cfg.tolerances.eq_atol);
      const Witness w = make_witness(spec, cfg.tolerances);
      results["dimension"] = spec.dimension();
      results["block_size"] = spec.block_size();
      results["prefactor"] = spec.prefactor();
      results["hermiticity_preservation_error"] = herm;
      if (cfg.format == Format::Json) results["witness"] = to_json(w.matrix);
      break;
    }
    case Command::CertifyBlock: {
      if (cfg.block_spec) {
        const BlockSpec& spec = *cfg.block_spec;
        guard_dimension(spec.n_blocks * spec.block_size, cfg);
        results["source"] = "spec";
        results.update(certify_section(spec, cfg, checks));
      } else {
        // Block data of map(|psi><psi|) for a seeded random psi.
        const MapSpec& spec = need_map(cfg);
        guard_dimension(spec.dimension(), cfg);
        const ComplexVector psi = random_unit_vector(spec.dimension(), derive_seed(cfg.seed, 0xb1));
        const BlockSpec bspec = rank_one_block_spec(spec, psi, cfg.tolerances);
        const ComplexMatrix image = apply(build(spec, cfg.tolerances), ComplexMatrix::outer(psi, psi));
        const double residual = max_abs_diff(image, spec.prefactor() * assemble(bspec, cfg.tolerances));
        checks.add("rank_one_image", residual <= cfg.tolerances.eq_atol);
        results["source"] = "rank-one image of the map";
        results["psi"] = vector_json(psi);
        results["image_residual"] = residual;
        results.update(certify_section(bspec, cfg, checks));
        if (cfg.format == Format::Json) results["block_spec"] = to_json(bspec);
      }
      break;
    }
    case Command::CheckPositive: {
      const MapSpec& spec = need_map(cfg);
      guard_dimension(spec.dimension(), cfg);
      results["positivity_scan"] = scan_section(spec, cfg, checks, true);
      break;
    }
    case Command::Witness: {
      const MapSpec& spec = need_map(cfg);
      guard_dimension(spec.dimension(), cfg);
      const Witness w = make_witness(spec, cfg.tolerances);
      results["witness"] = witness_section(w, cfg, checks);
      const double prod = min_product_expectation(w, cfg.trials, cfg.seed);
      const bool block_pos = prod >= -cfg.tolerances.psd_slack;
      checks.add("block_positive", block_pos);
      results["min_product_expectation"] = prod;
      results["block_positive"] = block_pos;
      if (cfg.format == Format::Json) results["matrix"] = to_json(w.matrix);
      break;
    }
    case Command::Detect: {
      const MapSpec& spec = need_new_family(cfg);
      guard_dimension(spec.dimension(), cfg);
      const Witness w = make_witness(spec, cfg.tolerances);
      results["detection"] = detect_section(spec, w, cfg, checks, cfg.format == Format::Json);
      break;
    }
    case Command::Optimality: {
      const MapSpec& spec = need_new_family(cfg);
      guard_dimension(spec.dimension(), cfg);
      results["optimality"] = optimality_section(spec, make_witness(spec, cfg.tolerances), cfg, checks);
      break;
    }
    case Command::NdOptimality: {
      const MapSpec& spec = need_new_family(cfg);
      guard_dimension(spec.dimension(), cfg);
      results["nd_optimality"] = nd_section(spec, make_witness(spec, cfg.tolerances), cfg, checks);
      break;
    }
    case Command::FullReport: {
      const MapSpec& spec = need_map(cfg);
      guard_dimension(spec.dimension(), cfg);
      const Witness w = make_witness(spec, cfg.tolerances);
      results["positivity_scan"] = scan_section(spec, cfg, checks, false);
      results["choi"] = witness_section(w, cfg, checks);
      if (spec.family == MapFamily::NewFamily) {
        results["detection"] = detect_section(spec, w, cfg, checks, false);
        results["optimality"] = optimality_section(spec, w, cfg, checks);
        results["nd_optimality"] = nd_section(spec, w, cfg, checks);
      }
      break;
    }
  }
  return results;
}

}  // namespace detail

/// Report body as an ordered JSON object; `exit_code` gets 0 or 1.
inline Json make_report(const RunConfig& cfg, int& exit_code) {
  detail::Checks checks;
  Json results = detail::execute(cfg, checks);
  Json report;
  report["tool"] = "posmap";
  report["command"] = to_string(cfg.command);
  report["status"] = checks.ok() ? "pass" : "fail";
  report["failed_invariants"] = checks.failed();
  report["checks"] = checks.names();
  report["seed"] = cfg.seed;
  report["seed_source"] = cfg.seed_source;
  report["trials"] = cfg.trials;
  report["tolerances"] = Json{{"psd_slack", cfg.tolerances.psd_slack}, {"eq_atol", cfg.tolerances.eq_atol}};
  report["decisions"] = detail::decisions_json();
  if (cfg.map_spec) {
    report["map_spec"] = to_json(*cfg.map_spec);
    report["z_source"] = cfg.z_random ? "random" : "given";
  }
  if (cfg.block_spec && cfg.format == Format::Json) report["block_spec"] = to_json(*cfg.block_spec);
  report["results"] = std::move(results);
  if (cfg.timestamp) report["timestamp"] = detail::utc_timestamp();
  exit_code = checks.ok() ? 0 : 1;
  return report;
}

inline std::string render(const Json& report, Format format) {
  switch (format) {
    case Format::Json: return report.dump(2) + "\n";
    case Format::Csv: {
      std::vector<std::pair<std::string, std::string>> rows;
      detail::flatten(report, "", rows);
      std::string out = "field,value\n";
      for (const auto& [k, v] : rows) out += detail::csv_escape(k) + "," + detail::csv_escape(v) + "\n";
      return out;
    }
    case Format::Text: {
      std::vector<std::pair<std::string, std::string>> rows;
      detail::flatten(report, "", rows);
      std::string out;
      for (const auto& [k, v] : rows) out += k + " = " + v + "\n";
      return out;
    }
  }
  return {};
}

/// Runs one configuration and writes the report to cfg.output or `out`.
inline int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  int code = 2;
  std::string text, failed;
  try {
    const Json report = make_report(cfg, code);
    text = render(report, cfg.format);
    for (const auto& f : report["failed_invariants"]) failed += " " + f.get<std::string>();
  } catch (const UsageError& e) {
    err << "posmap: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {  // SpecError, DimensionError, bad inputs
    err << "posmap: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "posmap: internal error: " << e.what() << "\n";
    return 2;
  }
  if (cfg.output.empty()) {
    out << text;
    out.flush();
  } else {
    std::ofstream file(cfg.output, std::ios::binary);
    file << text;
    if (!file) {
      err << "posmap: cannot write '" << cfg.output << "'\n";
      return 2;
    }
  }
  if (code == 1) err << "posmap: failed invariants:" << failed << "\n";
  return code;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  try {
    const auto cfg = parse_args(argc, argv, std::getenv("POSMAP_SEED"), out);
    if (!cfg) return 0;
    return run(*cfg, out, err);
  } catch (const UsageError& e) {
    err << "posmap: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace posmap::cli

#endif  // POSMAP_CLI_HPP
