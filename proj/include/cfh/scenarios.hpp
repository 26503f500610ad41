#ifndef CFH_SCENARIOS_HPP
#define CFH_SCENARIOS_HPP

#include <map>
#include <string>
#include <vector>

#include "cfh/kam.hpp"
#include "cfh/operators.hpp"
#include "cfh/regularity.hpp"

namespace cfh::scenarios {

/// Resolved scenario configuration; defaults are inlined into the manifest on
/// first run so reported numbers stay reproducible.
struct Params {
    std::string scenario;
    int n = 2;
    int q = 1;
    int k0 = 1;
    double r2 = 0.35;
    double r3 = 0.15;
    double h = 0.05;
    int levels = 4;
    int mc_samples = 100000;
    double theta = 0.25;
    double delta0 = 0.02;
    int k_max = 3;
    int mesh_m = 5;
    double stein_r = 0.0;
    std::uint64_t seed = 7;
    int workers = 0;
    bool deterministic = true;

    static Params from_json(const std::string& text);
    std::string to_json() const;
};

struct Outcome {
    bool ok = true;
    std::string results_csv;   // deterministic
    std::string timings_csv;   // wall-clock, excluded from determinism
    std::string manifest_json;
    std::vector<std::string> summary;
};

std::vector<std::string> scenario_names();
Outcome run_scenario(const Params& p);

// Individual experiments (reused by the acceptance suite).
Outcome run_koppelman(const Params&);
Outcome run_bounds(const Params&);
Outcome run_stokes(const Params&);
Outcome run_bmk_reproduce(const Params&);
Outcome run_homotopy_convex(const Params&);
Outcome run_homotopy_concave(const Params&);
Outcome run_closed_solve(const Params&);
Outcome run_kam(const Params&);
Outcome run_zygmund(const Params&);
Outcome run_stein(const Params&);

// Fixture helpers shared with the test suites.
FormField convex_fixture_closed(int n);      // dbar(zb1 zb2): closed (0,1)
FormField convex_fixture_nonclosed(int n);   // zb2 dzb1 + c dzb2: dbar != 0
FormField concave_fixture_closed(int n);
FormField rough_fixture(int n);              // sign(y1) dzb1, bounded, discontinuous

}  // namespace cfh::scenarios

#endif
