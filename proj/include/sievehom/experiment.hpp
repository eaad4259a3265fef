#pragma once

#include <string>
#include <vector>

#include "sievehom/capacity.hpp"
#include "sievehom/config.hpp"
#include "sievehom/equidistribution.hpp"
#include "sievehom/geometry.hpp"
#include "sievehom/homogenization.hpp"

namespace sievehom {

enum class ExperimentKind { Discrepancy, Capacity, MeanCap, Corrector, Homogenize, Sweep };
const char* to_string(ExperimentKind kind);

// Parsed and normalized experiment description.  `from_ini` fills defaults
// and throws ValidationError naming the offending section.key; full
// cross-field checking lives in validate_config so the validate subcommand
// can report everything at once.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Discrepancy;
    std::string name;  // output directory prefix

    int d = 2;
    double p = 1.3;

    bool has_surface = false;
    ConvexSurface surface;
    HoleShape hole = HoleShape::ball(2, 1.0);

    std::vector<double> eps_list;
    double prefactor = 1.0;   // a = prefactor * critical size
    double hole_size = 0.0;   // explicit a override when positive

    double R = 4.0;      // capacity solves: outer half-width
    int cells = 64;      // capacity solves: base grid cells
    int levels = 1;      // refinement levels
    double grid_h = 0.0; // obstacle solves: target spacing
    int max_cells = 1024;

    double tol = 1e-6;
    int max_iter = 5000;
    double quad_tol = 0.01;

    bool has_domain = false;
    Box domain;  // obstacle / corrector domain

    Box qprime;               // discrepancy lateral window
    Interval interval{0.0, 0.5};
    int et_terms = 0;         // 0 = automatic

    std::vector<Pt> normals;  // mean-cap directions (normalized)
    bool quantize = true;     // corrector offset cache

    double delta = 0.2;         // facet size for the limit measure
    double obstacle_amp = 0.3;  // obstacle = amp * product of lateral bumps
    double source_const = 0.0;  // constant source term

    std::string out_dir = ".";
    long long seed = 0;
    int threads = 0;  // 0 = unset

    SolverOptions solver() const;
    ObstacleProblemSpec obstacle_spec() const;  // homogenize / sweep kinds
    static ExperimentConfig from_ini(const IniFile& ini);
};

struct Diagnostic {
    enum class Level { Warning, Error };
    Level level = Level::Error;
    std::string key;      // offending config key, section.key
    std::string message;
};

// Full constraint report without running anything.  Errors block `run`;
// warnings do not (capacity-only experiments legitimately sit outside the
// exponent window of the homogenization theory).
std::vector<Diagnostic> validate_config(const ExperimentConfig& cfg);

struct RunOptions {
    std::string out_root;   // empty = config output dir
    int threads = 0;        // 0 = config value, then 1
    long long seed = -1;    // -1 = config value
    bool quiet = false;
    std::string dir_name;   // empty = "<name>-<utc timestamp>"
};

struct RunResult {
    std::string dir;
    std::vector<std::string> files;  // relative names, manifest order
};

// Runs the experiment and writes its artifacts plus MANIFEST.txt.  Throws
// ValidationError for config problems and SolverError when a solve fails to
// converge.  Identical config and seed reproduce every file byte for byte.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Bundled ready-to-run configurations; `run --config <name>` falls back to
// these when no file of that name exists.
struct Fixture {
    const char* name;
    const char* summary;
    const char* ini;
};
const std::vector<Fixture>& builtin_fixtures();
const Fixture* find_fixture(const std::string& name);

}  // namespace sievehom
