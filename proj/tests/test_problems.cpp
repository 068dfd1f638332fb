#include <doctest.h>

#include "sdg/hamiltonian.hpp"
#include "sdg/problems.hpp"
#include "sdg/suites.hpp"

#include <algorithm>
#include <map>

using namespace sdg;

#ifndef SDG_SOURCE_DIR
#error "SDG_SOURCE_DIR must point at the repository root"
#endif

TEST_CASE("catalogue covers the required problems") {
  CHECK(catalog().size() >= 6);
  for (const char* key : {"cancel-drift", "isaacs-gap", "one-player", "linear-driver",
                          "random-terminal", "heat-check", "pursuit-1d"})
    CHECK_NOTHROW(find_problem(key));
  CHECK_THROWS_AS(find_problem("no-such-game"), InvalidArgument);
  CHECK_FALSE(find_problem("isaacs-gap").isaacs_expected);
  CHECK(find_problem("cancel-drift").isaacs_expected);
  CHECK(make_problem("one-player").theta_grid.size() == 1);
  CHECK(make_problem("random-terminal").randomness == Randomness::discrete_random);
}

TEST_CASE("every catalogue entry passes the coefficient probe") {
  for (const auto& p : catalog()) {
    const ProblemSpec spec = p.make({});
    CHECK_NOTHROW(spec.check());
    const A1Report rep = validate_a1(spec, 2000, 1);
    CHECK_MESSAGE(rep.passed, (p.key + ": " + rep.witness));
  }
}

TEST_CASE("grid overrides apply") {
  const ProblemSpec spec = make_problem("cancel-drift", {3, 7});
  CHECK(spec.theta_grid.size() == 3);
  CHECK(spec.gamma_grid.size() == 7);
}

TEST_CASE("facts carry a provenance and match their problem") {
  for (const auto& p : catalog()) {
    CHECK_FALSE(p.facts.empty());
    for (const auto& f : p.facts) {
      CHECK_FALSE(f.name.empty());
      CHECK(to_string(f.source) != "unknown");
      CHECK(f.tolerance >= 0.0);
    }
  }
}

TEST_CASE("fingerprint separates problems and is stable") {
  CHECK(fingerprint(make_problem("cancel-drift")) == fingerprint(make_problem("cancel-drift")));
  CHECK(fingerprint(make_problem("cancel-drift")) != fingerprint(make_problem("isaacs-smooth")));
  CHECK(fingerprint(make_problem("cancel-drift", {3, 3})) != fingerprint(make_problem("cancel-drift")));
}

TEST_CASE("inline problems are assembled from numbers") {
  InlineCoefficients c;
  c.drift_cross = 1.0;
  c.theta_points = 2;
  c.gamma_points = 2;
  const NamedProblem p = inline_problem(c);
  CHECK_FALSE(p.isaacs_expected);
  const ProblemSpec spec = p.make({});
  CHECK(validate_a1(spec, 500, 2).passed);
  const HamiltonianPoint pt = unit_gradient_point(spec);
  CHECK(h_plus(pt, spec, spec.theta_grid, spec.gamma_grid).value -
            h_minus(pt, spec, spec.theta_grid, spec.gamma_grid).value ==
        doctest::Approx(2.0));
  c.terminal = "cube";
  CHECK_THROWS_AS(inline_problem(c), InvalidArgument);
}

TEST_CASE("traceability matrix lists every anchor exactly once") {
  const auto rows = read_traceability(std::string(SDG_SOURCE_DIR) + "/docs/traceability.csv");
  std::map<std::string, int> seen;
  const auto& suites = suite_names();
  for (const auto& r : rows) {
    ++seen[r.anchor];
    CHECK_MESSAGE(std::find(suites.begin(), suites.end(), r.suite) != suites.end(), r.suite);
    CHECK_FALSE(r.tolerance.empty());
    CHECK_FALSE(r.description.empty());
  }
  for (const auto& a : required_anchors()) CHECK_MESSAGE(seen[a] == 1, a);
  CHECK(seen.size() == required_anchors().size());
}

TEST_CASE("suites named in the traceability matrix are runnable") {
  for (const char* s : {"dpp", "sublinear", "domination", "comparison", "regularity", "stability",
                        "freezing-rate", "isaacs", "pde-cross"}) {
    const auto& names = suite_names();
    CHECK(std::find(names.begin(), names.end(), s) != names.end());
    CHECK_FALSE(suite_description(s).empty());
  }
  CHECK_THROWS_AS(run_suite("nope", RunSettings{}), InvalidArgument);
}
