// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "posmap/cli.hpp"
#include "support.hpp"

using namespace posmap;
using posmap::testing::oracle_min_eigenvalue;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

MapSpec new_family(std::size_t n, std::size_t k, UpperTriangular<Complex> z) {
  return MapSpec::new_family(n, k, std::move(z), default_antisymmetric_unitary(2 * k));
}

const std::vector<std::pair<std::size_t, std::size_t>> kDetectGrid = {{2, 1}, {3, 1}, {2, 2}};

// 1. Block-certificate soundness over randomized condition-satisfying specs.
Verdict soundness() {
  const auto t0 = Clock::now();
  Rng rng(2024);
  const std::vector<std::pair<std::size_t, std::size_t>> nk = {{2, 1}, {3, 1}, {2, 2}, {3, 2}, {4, 1}, {4, 2}};
  std::size_t total = 0, certified = 0, psd = 0, oracle_psd = 0, steps = 0, chain_psd_fail = 0;
  std::string first_failure;
  auto record = [&](const BlockSpec& s, const std::string& label) {
    ++total;
    const bool lib_psd = is_psd(assemble(s));
    const bool ora_psd = oracle_min_eigenvalue(assemble(s)) >= -1e-9;
    const CertifyResult r = inductive_certify(s);
    psd += lib_psd;
    oracle_psd += ora_psd;
    if (r.ok()) {
      ++certified;
      steps += r.certificate->steps.size();
      for (double m : r.certificate->level_min_eigenvalues) chain_psd_fail += m < -1e-9;
    } else if (first_failure.empty()) {
      first_failure = label + ": " + (r.failure ? r.failure->message : "no certificate");
    }
  };
  for (int round = 0; round < 50; ++round) {
    for (auto [n, k] : nk) {
      // map-derived: rank-one images of the Robertson-type and new maps
      const bool unit = rng.uniform() < 0.5;
      const MapSpec nf = new_family(n, k, posmap::testing::random_phases(n, rng, unit));
      record(rank_one_block_spec(nf, random_unit_vector(nf.dimension(), rng)), "new-family rank-one");
      const MapSpec cr = MapSpec::complex_robertson_extension(n, posmap::testing::random_phases(n, rng, unit));
      record(rank_one_block_spec(cr, random_unit_vector(cr.dimension(), rng)), "robertson rank-one");
      // direct recipes with block size 2K
      record(posmap::testing::rank_one_recipe(n, 2 * k, rng), "rank-one recipe");
      record(posmap::testing::unitary_recipe(n, 2 * k, rng), "unitary recipe");
    }
  }
  const double elapsed = seconds_since(t0);
  const bool pass = total >= 1000 && certified == total && psd == total && oracle_psd == total &&
                    chain_psd_fail == 0 && elapsed < 60.0;
  std::string detail = std::to_string(total) + " specs, certified " + std::to_string(certified) + ", is_psd " +
                       std::to_string(psd) + ", oracle psd " + std::to_string(oracle_psd) + ", steps verified " +
                       std::to_string(steps) + ", " + fmt(elapsed) + " s";
  if (!first_failure.empty()) detail += "; first failure: " + first_failure;
  return {pass, detail};
}

// 2. Positivity of the six families by seeded see-saw scans.
Verdict positivity() {
  const auto t0 = Clock::now();
  Rng rng(7);
  std::vector<std::pair<std::string, MapSpec>> cases;
  for (std::size_t n = 2; n <= 6; ++n) {
    cases.emplace_back("reduction N=" + std::to_string(n), MapSpec::reduction(n));
    cases.emplace_back("gen-reduction unit N=" + std::to_string(n),
                       MapSpec::generalized_reduction(n, posmap::testing::random_phases(n, rng, true)));
    cases.emplace_back("gen-reduction sub-unit N=" + std::to_string(n),
                       MapSpec::generalized_reduction(n, posmap::testing::random_phases(n, rng, false)));
  }
  cases.emplace_back("robertson", MapSpec::robertson());
  for (std::size_t k = 1; k <= 2; ++k)
    cases.emplace_back("gen-robertson K=" + std::to_string(k),
                       MapSpec::generalized_robertson(k, default_antisymmetric_unitary(2 * k)));
  for (std::size_t n = 2; n <= 3; ++n)
    cases.emplace_back("complex-robertson N=" + std::to_string(n),
                       MapSpec::complex_robertson_extension(n, posmap::testing::random_phases(n, rng, true)));
  for (auto [n, k] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 1}, {3, 1}, {2, 2}, {3, 2}})
    cases.emplace_back("new N=" + std::to_string(n) + " K=" + std::to_string(k),
                       new_family(n, k, posmap::testing::random_phases(n, rng, true)));

  double worst = std::numeric_limits<double>::infinity();
  std::string worst_label;
  for (const auto& [label, spec] : cases) {
    const ScanResult r = positivity_scan(build(spec), 500, 42);
    if (r.min_value < worst) {
      worst = r.min_value;
      worst_label = label;
    }
  }
  return {worst >= -1e-9, std::to_string(cases.size()) + " maps x 500 trials, min " + fmt(worst) + " (" +
                              worst_label + "), " + fmt(seconds_since(t0)) + " s"};
}

// 3. Witnesses are not positive semidefinite.
Verdict witness_negativity() {
  bool pass = true;
  std::string detail = "reduction:";
  for (std::size_t n = 2; n <= 6; ++n) {
    const ComplexMatrix w = make_witness(MapSpec::reduction(n)).matrix;
    const double lib = min_eigenvalue(w), ora = oracle_min_eigenvalue(w);
    const bool ok = std::abs(lib + 1.0 / n) <= 1e-9 && std::abs(ora + 1.0 / n) <= 1e-9;
    pass = pass && ok;
    detail += " N=" + std::to_string(n) + ":" + fmt(lib);
  }
  detail += "; new:";
  for (auto [n, k] : std::vector<std::pair<std::size_t, std::size_t>>{{2, 1}, {3, 1}, {2, 2}, {3, 2}}) {
    const double lmin = min_eigenvalue(make_witness(new_family(n, k, UpperTriangular<Complex>(n, 1.0))).matrix);
    pass = pass && lmin < -1e-3;
    detail += " (" + std::to_string(n) + "," + std::to_string(k) + "):" + fmt(lmin);
  }
  return {pass, detail};
}

// 4. The PPT state detected by the new witness, with the closed-form value.
Verdict indecomposability() {
  bool pass = true;
  std::string detail;
  for (auto [n, k] : kDetectGrid) {
    const MapSpec spec = new_family(n, k, UpperTriangular<Complex>(n, 1.0));
    const Witness w = make_witness(spec);
    const PptDetector det = build_ppt_detector(n, k, spec.z, w);
    const double tr = trace(det.rho).real();
    const double lmin = oracle_min_eigenvalue(det.rho);
    const double lmin_pt = oracle_min_eigenvalue(partial_transpose(det.rho, w.dims, Subsystem::B));
    const DetectionResult r = detection_value(w, det);
    const double tk = 2.0 * static_cast<double>(k);
    const double closed = -1.0 / ((tk + 1.0) * tk * tk * tk * n * (n - 1.0));
    const bool negative_ppt = lmin >= -1e-9 && lmin_pt >= -1e-9 && r.value < 0.0;
    const bool constant = std::abs(r.value - closed) <= 1e-10;
    const bool ok = std::abs(tr - 1.0) <= 1e-10 && negative_ppt && constant && std::abs(r.near_diagonal_sum) <= 1e-12;
    pass = pass && ok;
    detail += "(" + std::to_string(n) + "," + std::to_string(k) + ") value " + fmt(r.value) + " vs " + fmt(closed) +
              ", rho min " + fmt(lmin) + ", rho^G min " + fmt(lmin_pt) + "; ";
  }
  // -1/48 at (2,1)
  pass = pass && std::abs(expected_detection_value(2, 1) + 1.0 / 48.0) < 1e-16;
  return {pass, detail};
}

// 5. Optimality: spanning zero set for random unit-modulus phases.
Verdict optimality() {
  Rng rng(55);
  bool pass = true;
  std::string detail;
  for (auto [n, k] : kDetectGrid) {
    const MapSpec spec = new_family(n, k, posmap::testing::random_phases(n, rng, true));
    const Witness w = make_witness(spec);
    const ZeroProductSet set = optimality_zero_set(spec, w);
    const std::size_t d = spec.dimension();
    std::vector<ComplexVector> cols;
    for (const auto& pv : set.vectors) cols.push_back(kron(pv.left, pv.right));
    const double oracle_smin = posmap::testing::oracle_singular_values(stack_columns(cols)).minCoeff();
    const bool ok = set.vectors.size() == d * d && set.max_abs_expectation <= 1e-10 && set.rank == d * d &&
                    set.min_singular_value > 1e-8 && oracle_smin > 1e-8;
    pass = pass && ok;
    detail += "(" + std::to_string(n) + "," + std::to_string(k) + ") " + std::to_string(set.vectors.size()) +
              " vectors, max|<W>| " + fmt(set.max_abs_expectation) + ", smin " + fmt(set.min_singular_value) + "; ";
  }
  return {pass, detail};
}

// 6. Nd-optimality: covariance of W under the partial transpose and the
// transformed zero set for W^Gamma.
Verdict nd_optimality() {
  bool pass = true;
  std::string detail;
  Rng rng(66);
  for (auto [n, k] : kDetectGrid) {
    for (int variant = 0; variant < 2; ++variant) {
      UpperTriangular<Complex> z(n, 1.0);
      if (variant == 1)
        for (auto& v : z.values()) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
      const MapSpec spec = new_family(n, k, z);
      const NdOptimalityReport r = nd_optimality_check(spec, make_witness(spec));
      pass = pass && r.covariance_residual <= 1e-12 && r.gamma_zero_set_ok && r.gamma_spanning_ok;
      if (variant == 0)
        detail += "(" + std::to_string(n) + "," + std::to_string(k) + ") residual " + fmt(r.covariance_residual) +
                  ", rank " + std::to_string(r.gamma_rank) + "; ";
    }
  }
  return {pass, detail + "plus random real signs"};
}

// 7. Schur-complement verdicts against the eigenvalue oracle.
Verdict schur_oracle() {
  Rng rng(77);
  Tolerance tol;
  std::size_t disagree_lib = 0, disagree_eigen = 0, disagree_truth = 0, singular_b = 0, positives = 0;
  const std::size_t trials = 10000;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::size_t m = 1 + rng.index(4), n = 1 + rng.index(4);
    // B = W diag(b) W^+ >= 0, sometimes singular
    const ComplexMatrix wb = haar_unitary(n, rng);
    std::vector<Complex> b(n);
    bool singular = false;
    for (auto& x : b) {
      const bool zero = rng.uniform() < 0.25;
      x = zero ? 0.0 : rng.uniform(0.05, 2.0);
      singular = singular || zero;
    }
    singular_b += singular;
    const ComplexMatrix bm = wb * ComplexMatrix::diagonal(b) * dagger(wb);
    ComplexMatrix bplus_diag(n, n), range(n, n);
    for (std::size_t i = 0; i < n; ++i)
      if (b[i] != Complex{}) {
        bplus_diag(i, i) = 1.0 / b[i];
        range(i, i) = 1.0;
      }
    const ComplexMatrix bplus = wb * bplus_diag * dagger(wb);
    const ComplexMatrix proj = wb * range * dagger(wb);
    // X^+ in range(B), plus an optional leak outside it
    ComplexMatrix xd = proj * random_complex_matrix(n, m, rng);
    bool leak = false;
    if (singular && rng.uniform() < 0.3) {
      ComplexMatrix outside = (ComplexMatrix::identity(n) - proj) * random_complex_matrix(n, m, rng);
      if (max_abs(outside) > 0.1) {
        xd += outside;
        leak = true;
      }
    }
    const ComplexMatrix x = dagger(xd);
    // A = X B^+ X^+ + S; S PSD or with an eigenvalue <= -0.01
    const ComplexMatrix ws = haar_unitary(m, rng);
    std::vector<Complex> s(m);
    bool negative = false;
    for (auto& v : s) v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.0, 2.0);
    if (rng.uniform() < 0.5) {
      s[rng.index(m)] = -rng.uniform(0.01, 1.0);
      negative = true;
    }
    ComplexMatrix a = x * bplus * xd + ws * ComplexMatrix::diagonal(s) * dagger(ws);
    a = 0.5 * (a + dagger(a));
    const bool truth = !negative && !leak;
    positives += truth;

    const ComplexMatrix h = assemble_2x2_blocks(a, x, bm);
    const bool verdict = schur_positivity(a, x, bm, tol);
    disagree_lib += verdict != is_psd(h, tol);
    disagree_eigen += verdict != (oracle_min_eigenvalue(h) >= -tol.psd_slack);
    disagree_truth += verdict != truth;
  }
  const bool pass = disagree_lib == 0 && disagree_eigen == 0;
  return {pass, std::to_string(trials) + " instances (" + std::to_string(singular_b) + " singular B, " +
                    std::to_string(positives) + " PSD); disagreements vs is_psd " + std::to_string(disagree_lib) +
                    ", vs Eigen " + std::to_string(disagree_eigen) + ", vs construction " +
                    std::to_string(disagree_truth)};
}

// 8. Byte-identical full reports from two runs of the CLI binary.
Verdict determinism() {
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "posmap_acceptance_a.json", b = dir / "posmap_acceptance_b.json";
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  const std::string base = std::string("\"") + POSMAP_CLI_PATH +
                           "\" full-report --family new --N 3 --K 1 --seed 42 --trials 500 --no-timestamp --output ";
  const int ra = std::system((base + "\"" + a.string() + "\"").c_str());
  const int rb = std::system((base + "\"" + b.string() + "\"").c_str());
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string sa = slurp(a), sb = slurp(b);
  const bool pass = ra == 0 && rb == 0 && !sa.empty() && sa == sb;
  return {pass, "exit codes " + std::to_string(ra) + "/" + std::to_string(rb) + ", " + std::to_string(sa.size()) +
                    " bytes, identical=" + (sa == sb ? "yes" : "no")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"block-certificate soundness", soundness},
      {"positivity of all six families", positivity},
      {"witness non-positivity", witness_negativity},
      {"indecomposability (PPT detection)", indecomposability},
      {"optimality (spanning zero set)", optimality},
      {"nd-optimality", nd_optimality},
      {"Schur complement vs eigenvalue oracle", schur_oracle},
      {"determinism of full-report", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
