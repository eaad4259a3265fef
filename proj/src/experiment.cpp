#include "sievehom/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "sievehom/report.hpp"

namespace sievehom {

const char* to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Discrepancy: return "discrepancy";
        case ExperimentKind::Capacity: return "capacity";
        case ExperimentKind::MeanCap: return "mean-cap";
        case ExperimentKind::Corrector: return "corrector";
        case ExperimentKind::Homogenize: return "homogenize";
        case ExperimentKind::Sweep: return "sweep";
    }
    return "?";
}

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s = {
        {"experiment", {"kind", "name"}},
        {"space", {"d", "p"}},
        {"surface",
         {"kind", "slope", "curvature", "linear", "offset", "x0", "chart_lo", "chart_hi"}},
        {"hole", {"kind", "radius", "halfwidths"}},
        {"sieve", {"eps", "prefactor", "hole_size"}},
        {"grid", {"R", "cells", "levels", "h", "max_cells"}},
        {"solver", {"tol", "max_iter", "quad_tol"}},
        {"domain", {"lo", "hi"}},
        {"discrepancy", {"qprime_lo", "qprime_hi", "interval", "et_terms"}},
        {"mean_cap", {"normals"}},
        {"corrector", {"quantize"}},
        {"homogenize", {"delta", "obstacle", "source"}},
        {"output", {"dir"}},
        {"run", {"seed", "threads"}},
    };
    return s;
}

Box box_from(const std::vector<double>& lo, const std::vector<double>& hi, int d,
             const std::string& key) {
    require(static_cast<int>(lo.size()) == d && static_cast<int>(hi.size()) == d,
            "config: " + key + ": expected " + std::to_string(d) + " values");
    Box b;
    b.d = d;
    for (int i = 0; i < d; ++i) {
        b.lo[i] = lo[i];
        b.hi[i] = hi[i];
    }
    return b;
}

Pt pt_from(const std::vector<double>& v, int n, const std::string& key) {
    require(static_cast<int>(v.size()) == n,
            "config: " + key + ": expected " + std::to_string(n) + " values");
    Pt p{};
    for (int i = 0; i < n; ++i) p[i] = v[i];
    return p;
}

ConvexSurface parse_surface(const IniFile& ini, int d) {
    const std::string kind = ini.get("surface", "kind");
    const Box chart = box_from(ini.get_list("surface", "chart_lo"),
                               ini.get_list("surface", "chart_hi"), d - 1,
                               "surface.chart_lo/chart_hi");
    const double offset = ini.get_double_or("surface", "offset", 0.0);
    try {
        if (kind == "flat")
            return ConvexSurface::flat(
                d, pt_from(ini.get_list("surface", "slope"), d - 1, "surface.slope"), offset,
                chart);
        if (kind == "quadratic") {
            const auto A = ini.get_list("surface", "curvature");
            require(static_cast<int>(A.size()) == (d - 1) * (d - 1),
                    "config: surface.curvature: expected " + std::to_string((d - 1) * (d - 1)) +
                        " values");
            const Pt b = pt_from(
                ini.get_list_or("surface", "linear", std::vector<double>(d - 1, 0.0)), d - 1,
                "surface.linear");
            return ConvexSurface::quadratic(d, A, b, offset, chart);
        }
        if (kind == "cosh") {
            require(d == 2, "config: surface.kind: cosh charts are two-dimensional");
            return ConvexSurface::cosh_chart(ini.get_double("surface", "x0"), chart);
        }
    } catch (const ValidationError& e) {
        throw ValidationError("config: surface: " + std::string(e.what()));
    }
    throw ValidationError("config: surface.kind: unknown kind " + kind);
}

HoleShape parse_hole(const IniFile& ini, int d) {
    if (!ini.has("hole", "kind")) return HoleShape::ball(d, 1.0);
    const std::string kind = ini.get("hole", "kind");
    try {
        if (kind == "ball") return HoleShape::ball(d, ini.get_double_or("hole", "radius", 1.0));
        if (kind == "box")
            return HoleShape::box(
                d, pt_from(ini.get_list("hole", "halfwidths"), d, "hole.halfwidths"));
    } catch (const ValidationError& e) {
        throw ValidationError("config: hole: " + std::string(e.what()));
    }
    throw ValidationError("config: hole.kind: unknown kind " + kind);
}

double effective_hole_size(const ExperimentConfig& cfg, double eps) {
    return cfg.hole_size > 0.0 ? cfg.hole_size
                               : cfg.prefactor * critical_hole_size(eps, cfg.d, cfg.p);
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
    return buf;
}

void say(bool quiet, const std::string& line) {
    if (!quiet) std::printf("%s\n", line.c_str());
}

// ---- runners ----------------------------------------------------------

void run_discrepancy(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    CsvTable t;
    t.header = {"epsilon", "N", "A", "deviation", "bound_ET", "D_exact"};
    PlotSeries dev_s{"deviation", {}, {}}, ex_s{"D_exact", {}, {}}, et_s{"bound_ET", {}, {}};
    std::vector<double> devs;
    for (double eps : cfg.eps_list) {
        const auto sample = surface_sequence(cfg.surface, eps, cfg.qprime);
        const auto dev = interval_deviation(sample, cfg.interval);
        const double et = erdos_turan_bound(sample, cfg.et_terms);
        const auto exact = discrepancy_exact(sample);
        t.add_row({format_double(eps), format_double(static_cast<double>(dev.n)),
                   format_double(static_cast<double>(dev.count)),
                   format_double(dev.deviation), format_double(et),
                   format_double(exact.value)});
        devs.push_back(dev.deviation);
        if (dev.deviation > 0.0) {
            dev_s.x.push_back(eps);
            dev_s.y.push_back(dev.deviation);
        }
        ex_s.x.push_back(eps);
        ex_s.y.push_back(exact.value);
        et_s.x.push_back(eps);
        et_s.y.push_back(et);
        say(quiet, "eps=" + format_double(eps) + " N=" + std::to_string(dev.n) +
                       " deviation=" + format_double(dev.deviation));
    }
    const DecayFit fit = decay_fit(cfg.eps_list, devs);
    t.add_row({"fit", format_double(fit.used), format_double(fit.dropped),
               format_double(fit.C), format_double(fit.alpha),
               format_double(fit.max_log_residual)});
    w.write("deviation.csv", write_csv(t));

    PlotSpec plot;
    plot.title = cfg.name;
    plot.xlabel = "epsilon";
    plot.ylabel = "value";
    plot.logx = plot.logy = true;
    plot.series = {dev_s, ex_s, et_s};
    w.write("decay.svg", render_svg(plot));
    say(quiet, "decay fit: alpha=" + format_double(fit.alpha) + " C=" + format_double(fit.C));
}

void run_capacity(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    const ScaledHole region(cfg.hole, 1.0, Pt{});
    const auto est = capacity_with_refinement(cfg.p, region, cfg.R, cfg.cells, cfg.levels,
                                              OuterBoundary::Sphere, cfg.solver());
    const double mu_reg =
        cfg.p == 2.0 ? 0.0 : cfg.solver().mu_schedule.back();
    CsvTable t;
    t.header = {"h", "mu_reg", "value", "residual", "extrapolated"};
    PlotSeries vals{"value", {}, {}};
    for (std::size_t j = 0; j < est.levels.size(); ++j) {
        const double h = 2.0 * cfg.R / (cfg.cells << j);
        const bool last = j + 1 == est.levels.size();
        t.add_row({format_double(h), format_double(mu_reg), format_double(est.levels[j]),
                   last ? format_double(est.finest.residual) : "",
                   last ? format_double(est.value) : ""});
        vals.x.push_back(h);
        vals.y.push_back(est.levels[j]);
        say(quiet, "h=" + format_double(h) + " value=" + format_double(est.levels[j]));
    }
    w.write("capacity.csv", write_csv(t));

    PlotSpec plot;
    plot.title = cfg.name;
    plot.xlabel = "h";
    plot.ylabel = "capacity";
    plot.logx = true;
    plot.series = {vals};
    w.write("convergence.svg", render_svg(plot));
    say(quiet, "extrapolated=" + format_double(est.value) +
                   " order=" + format_double(est.order));
}

void run_mean_cap(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    CsvTable t;
    for (int i = 0; i < cfg.d; ++i) t.header.push_back("nu_" + std::to_string(i + 1));
    t.header.push_back("value");
    t.header.push_back("evaluations");
    for (const Pt& nu : cfg.normals) {
        const auto res =
            mean_capacity(cfg.p, cfg.hole, nu, cfg.R, cfg.cells, cfg.quad_tol, cfg.solver());
        std::vector<std::string> row;
        for (int i = 0; i < cfg.d; ++i) row.push_back(format_double(nu[i]));
        row.push_back(format_double(res.value));
        row.push_back(format_double(res.evaluations));
        t.add_row(std::move(row));
        say(quiet, "nu_d=" + format_double(nu[cfg.d - 1]) +
                       " value=" + format_double(res.value));
    }
    w.write("mean_capacity.csv", write_csv(t));
}

void run_corrector(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    CsvTable t;
    t.header = {"epsilon", "a_eps", "n_cells", "distinct_solves", "total", "per_volume"};
    PlotSeries per{"per_volume", {}, {}};
    for (double eps : cfg.eps_list) {
        const double a = effective_hole_size(cfg, eps);
        const auto sieve = SieveConfig::with_hole_size(eps, a, cfg.d, cfg.p);
        const auto ce = corrector_energy(cfg.surface, sieve, cfg.hole, cfg.domain, cfg.cells,
                                         cfg.levels, cfg.quantize, cfg.solver());
        t.add_row({format_double(eps), format_double(a),
                   format_double(static_cast<double>(ce.n_cells)),
                   format_double(static_cast<double>(ce.distinct_solves)),
                   format_double(ce.total), format_double(ce.per_volume)});
        if (ce.per_volume > 0.0) {
            per.x.push_back(eps);
            per.y.push_back(ce.per_volume);
        }
        say(quiet, "eps=" + format_double(eps) + " cells=" + std::to_string(ce.n_cells) +
                       " total=" + format_double(ce.total));
    }
    w.write("corrector.csv", write_csv(t));

    PlotSpec plot;
    plot.title = cfg.name;
    plot.xlabel = "epsilon";
    plot.ylabel = "energy per volume";
    plot.logx = true;
    plot.series = {per};
    w.write("corrector.svg", render_svg(plot));
}

void add_quantity(CsvTable& t, const std::string& name, double value) {
    t.add_row({name, format_double(value)});
}

LimitMeasureTable table_for(const ExperimentConfig& cfg) {
    return build_limit_measure(cfg.surface, cfg.hole, cfg.p, cfg.domain, cfg.delta, cfg.R,
                               cfg.cells, cfg.quad_tol, cfg.solver());
}

void run_homogenize(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    const auto spec = cfg.obstacle_spec();
    const auto table = table_for(cfg);
    say(quiet, "limit measure: " + std::to_string(table.facets.size()) + " facets, total " +
                   format_double(table.total_measure()));
    const double eps = cfg.eps_list.front();
    const auto perf = solve_perforated(spec, eps, cfg.solver());
    say(quiet, "perforated solve: " + std::to_string(perf.constrained_nodes) +
                   " constrained nodes, energy " + format_double(perf.energy_total));
    const auto hom = solve_homogenized(spec, table, cfg.solver());
    say(quiet, "homogenized solve: energy " + format_double(hom.energy_total));

    CsvTable t;
    t.header = {"quantity", "value"};
    add_quantity(t, "epsilon", eps);
    add_quantity(t, "a_eps", spec.sieve_at(eps).a);
    add_quantity(t, "facets", static_cast<double>(table.facets.size()));
    add_quantity(t, "surface_measure", table.total_weight());
    add_quantity(t, "limit_measure", table.total_measure());
    add_quantity(t, "energy_perforated_gradient", perf.energy_gradient);
    add_quantity(t, "energy_perforated_source", perf.energy_source);
    add_quantity(t, "energy_perforated_total", perf.energy_total);
    add_quantity(t, "constrained_nodes", static_cast<double>(perf.constrained_nodes));
    add_quantity(t, "residual_perforated", perf.residual);
    add_quantity(t, "energy_hom_gradient", hom.energy_gradient);
    add_quantity(t, "energy_hom_source", hom.energy_source);
    add_quantity(t, "energy_hom_obstacle", hom.energy_obstacle);
    add_quantity(t, "energy_hom_total", hom.energy_total);
    add_quantity(t, "residual_hom", hom.residual);
    add_quantity(t, "lp_distance", lp_distance(perf.u, hom.u, cfg.p));
    w.write("summary.csv", write_csv(t));

    write_field(perf.u, std::filesystem::path(w.dir()) / "u_perforated.f64");
    w.add_existing("u_perforated.f64");
    write_field(hom.u, std::filesystem::path(w.dir()) / "u_homogenized.f64");
    w.add_existing("u_homogenized.f64");
}

void run_sweep(const ExperimentConfig& cfg, ArtifactWriter& w, bool quiet) {
    const auto spec = cfg.obstacle_spec();
    const auto table = table_for(cfg);
    say(quiet, "limit measure: " + std::to_string(table.facets.size()) + " facets, total " +
                   format_double(table.total_measure()));
    const auto report = convergence_experiment(spec, cfg.eps_list, table, cfg.solver());

    CsvTable t;
    t.header = {"epsilon", "a_eps", "lp_distance", "energy_perforated", "energy_hom",
                "n_hit_cells"};
    PlotSeries dist{"lp_distance", {}, {}};
    for (const auto& row : report.rows) {
        t.add_row({format_double(row.eps), format_double(row.a_eps),
                   format_double(row.lp_distance), format_double(row.energy_perforated),
                   format_double(row.energy_hom),
                   format_double(static_cast<double>(row.n_hit_cells))});
        if (row.lp_distance > 0.0) {
            dist.x.push_back(row.eps);
            dist.y.push_back(row.lp_distance);
        }
        say(quiet, "eps=" + format_double(row.eps) +
                       " distance=" + format_double(row.lp_distance));
    }
    w.write("convergence.csv", write_csv(t));

    PlotSpec plot;
    plot.title = cfg.name;
    plot.xlabel = "epsilon";
    plot.ylabel = "Lp distance";
    plot.logx = plot.logy = true;
    plot.series = {dist};
    w.write("convergence.svg", render_svg(plot));

    write_field(report.limit.u, std::filesystem::path(w.dir()) / "u_homogenized.f64");
    w.add_existing("u_homogenized.f64");
}

}  // namespace

SolverOptions ExperimentConfig::solver() const {
    SolverOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    o.throw_on_stall = true;
    return o;
}

ObstacleProblemSpec ExperimentConfig::obstacle_spec() const {
    ObstacleProblemSpec spec;
    spec.d = d;
    spec.p = p;
    spec.domain = domain;
    spec.surface = surface;
    spec.shape = hole;
    spec.hole_prefactor = prefactor;
    spec.grid_h = grid_h;
    spec.max_cells = max_cells;
    if (source_const != 0.0) {
        const double s = source_const;
        spec.source = [s](const Pt&) { return s; };
    }
    if (obstacle_amp != 0.0) {
        const double amp = obstacle_amp;
        const Box dom = domain;
        const int dm = d - 1;
        spec.obstacle = [amp, dom, dm](const Pt& x) {
            double v = amp;
            for (int i = 0; i < dm; ++i) {
                const double w = dom.hi[i] - dom.lo[i];
                v *= 4.0 * (x[i] - dom.lo[i]) * (dom.hi[i] - x[i]) / (w * w);
            }
            return v;
        };
    }
    return spec;
}

ExperimentConfig ExperimentConfig::from_ini(const IniFile& ini) {
    for (const auto& section : ini.sections()) {
        auto it = schema().find(section);
        require(it != schema().end(), "config: unknown section [" + section + "]");
        for (const auto& key : ini.keys(section))
            require(it->second.count(key) > 0,
                    "config: unknown key " + section + "." + key);
    }

    ExperimentConfig cfg;
    const std::string kind = ini.get("experiment", "kind");
    if (kind == "discrepancy") cfg.kind = ExperimentKind::Discrepancy;
    else if (kind == "capacity") cfg.kind = ExperimentKind::Capacity;
    else if (kind == "mean-cap") cfg.kind = ExperimentKind::MeanCap;
    else if (kind == "corrector") cfg.kind = ExperimentKind::Corrector;
    else if (kind == "homogenize") cfg.kind = ExperimentKind::Homogenize;
    else if (kind == "sweep") cfg.kind = ExperimentKind::Sweep;
    else throw ValidationError("config: experiment.kind: unknown kind " + kind);
    cfg.name = ini.get_or("experiment", "name", kind);

    cfg.d = static_cast<int>(ini.get_int_or("space", "d", 2));
    require(cfg.d >= 2 && cfg.d <= kMaxDim, "config: space.d: out of range");
    cfg.p = ini.get_double("space", "p");

    if (ini.has("surface", "kind")) {
        cfg.surface = parse_surface(ini, cfg.d);
        cfg.has_surface = true;
    }
    cfg.hole = parse_hole(ini, cfg.d);

    cfg.eps_list = ini.get_list_or("sieve", "eps", {});
    cfg.prefactor = ini.get_double_or("sieve", "prefactor", 1.0);
    cfg.hole_size = ini.get_double_or("sieve", "hole_size", 0.0);

    cfg.R = ini.get_double_or("grid", "R", 4.0);
    cfg.cells = static_cast<int>(ini.get_int_or("grid", "cells", 64));
    cfg.levels = static_cast<int>(ini.get_int_or("grid", "levels", 1));
    cfg.grid_h = ini.get_double_or("grid", "h", 0.0);
    cfg.max_cells = static_cast<int>(ini.get_int_or("grid", "max_cells", 1024));

    cfg.tol = ini.get_double_or("solver", "tol", 1e-5);
    cfg.max_iter = static_cast<int>(ini.get_int_or("solver", "max_iter", 8000));
    cfg.quad_tol = ini.get_double_or("solver", "quad_tol", 0.01);

    if (ini.has("domain", "lo") || ini.has("domain", "hi")) {
        cfg.domain = box_from(ini.get_list("domain", "lo"), ini.get_list("domain", "hi"),
                              cfg.d, "domain.lo/hi");
        cfg.has_domain = true;
    }

    const std::vector<double> unit_lo(cfg.d - 1, 0.0), unit_hi(cfg.d - 1, 1.0);
    cfg.qprime = box_from(ini.get_list_or("discrepancy", "qprime_lo", unit_lo),
                          ini.get_list_or("discrepancy", "qprime_hi", unit_hi), cfg.d - 1,
                          "discrepancy.qprime_lo/hi");
    const auto iv = ini.get_list_or("discrepancy", "interval", {0.0, 0.5});
    require(iv.size() == 2, "config: discrepancy.interval: expected two values");
    cfg.interval = Interval{iv[0], iv[1]};
    cfg.et_terms = static_cast<int>(ini.get_int_or("discrepancy", "et_terms", 0));

    if (ini.has("mean_cap", "normals")) {
        const std::string raw = ini.get("mean_cap", "normals");
        std::size_t pos = 0;
        while (pos <= raw.size()) {
            std::size_t sep = raw.find(';', pos);
            if (sep == std::string::npos) sep = raw.size();
            std::istringstream part(raw.substr(pos, sep - pos));
            std::vector<double> comps;
            double v;
            while (part >> v) comps.push_back(v);
            if (!comps.empty()) {
                Pt nu = pt_from(comps, cfg.d, "mean_cap.normals");
                const double n = std::sqrt(dot(nu, nu, cfg.d));
                require(n > 0.0, "config: mean_cap.normals: zero direction");
                for (int i = 0; i < cfg.d; ++i) nu[i] /= n;
                cfg.normals.push_back(nu);
            }
            pos = sep + 1;
        }
        require(!cfg.normals.empty(), "config: mean_cap.normals: empty list");
    } else {
        Pt ez{};
        ez[cfg.d - 1] = 1.0;
        cfg.normals = {ez};
    }

    cfg.quantize = ini.get_bool_or("corrector", "quantize", true);
    cfg.delta = ini.get_double_or("homogenize", "delta", 0.2);
    cfg.obstacle_amp = ini.get_double_or("homogenize", "obstacle", 0.3);
    cfg.source_const = ini.get_double_or("homogenize", "source", 0.0);

    cfg.out_dir = ini.get_or("output", "dir", ".");
    cfg.seed = ini.get_int_or("run", "seed", 0);
    cfg.threads = static_cast<int>(ini.get_int_or("run", "threads", 0));
    return cfg;
}

std::vector<Diagnostic> validate_config(const ExperimentConfig& cfg) {
    std::vector<Diagnostic> out;
    auto err = [&](const std::string& key, const std::string& msg) {
        out.push_back({Diagnostic::Level::Error, key, msg});
    };
    auto warn = [&](const std::string& key, const std::string& msg) {
        out.push_back({Diagnostic::Level::Warning, key, msg});
    };
    const auto k = cfg.kind;
    const bool obstacle_kind = k == ExperimentKind::Homogenize || k == ExperimentKind::Sweep;
    const bool sieve_kind = obstacle_kind || k == ExperimentKind::Corrector;

    if (cfg.p <= 1.0) err("space.p", "p must exceed 1");
    const double p_hi = (cfg.d + 4.0) / 4.0;
    if (cfg.p > 1.0 && cfg.p >= p_hi)
        warn("space.p", "p = " + format_double(cfg.p) +
                            " lies outside the homogenization window 1 < p < (d+4)/4 = " +
                            format_double(p_hi) +
                            "; capacity values are fine, the obstacle limit is not covered");
    if (cfg.tol <= 0.0) err("solver.tol", "tolerance must be positive");
    if (cfg.max_iter < 1) err("solver.max_iter", "need at least one iteration");
    if (cfg.quad_tol <= 0.0) err("solver.quad_tol", "quadrature tolerance must be positive");
    if (cfg.cells < 8) err("grid.cells", "need at least 8 cells");
    if (cfg.levels < 1 || cfg.levels > 4) err("grid.levels", "levels must lie in [1, 4]");
    if (cfg.R <= 0.0) err("grid.R", "outer half-width must be positive");
    if (cfg.hole.dim() != cfg.d) err("hole.kind", "template dimension differs from space.d");
    else if ((k == ExperimentKind::Capacity || k == ExperimentKind::MeanCap) &&
             cfg.R <= cfg.hole.circumradius())
        err("grid.R", "outer half-width must exceed the template circumradius");

    const bool needs_surface = k != ExperimentKind::Capacity && k != ExperimentKind::MeanCap;
    if (needs_surface && !cfg.has_surface)
        err("surface.kind", "this experiment kind needs a surface");

    if (needs_surface) {
        if (cfg.eps_list.empty()) err("sieve.eps", "epsilon list is required");
        for (double eps : cfg.eps_list)
            if (eps <= 0.0) err("sieve.eps", "epsilon values must be positive");
    }
    if (k == ExperimentKind::Discrepancy && cfg.eps_list.size() < 2)
        err("sieve.eps", "the decay fit needs at least two epsilon values");
    if (k == ExperimentKind::Sweep && cfg.eps_list.size() < 3)
        err("sieve.eps", "the sweep needs at least three epsilon values");

    double a_min = 0.0;
    if (sieve_kind && cfg.p > 1.0) {
        for (double eps : cfg.eps_list) {
            if (eps <= 0.0) continue;
            const double a = effective_hole_size(cfg, eps);
            if (a_min == 0.0 || a < a_min) a_min = a;
            const std::string key = cfg.hole_size > 0.0 ? "sieve.hole_size" : "sieve.prefactor";
            if (a <= 0.0) err(key, "hole size must be positive");
            else if (a >= eps / 2.0)
                err(key, "holes touch the cell boundary at eps = " + format_double(eps) +
                             " (a = " + format_double(a) + " >= eps/2)");
        }
    }
    if (obstacle_kind && cfg.hole_size > 0.0)
        err("sieve.hole_size",
            "obstacle experiments scale holes by prefactor; explicit sizes are not supported");

    if (sieve_kind && !cfg.has_domain) err("domain.lo", "domain box is required");
    if (sieve_kind && cfg.has_domain)
        for (int i = 0; i < cfg.d; ++i)
            if (cfg.domain.hi[i] <= cfg.domain.lo[i]) {
                err("domain.hi", "domain box is empty");
                break;
            }

    if (obstacle_kind) {
        if (cfg.grid_h <= 0.0) err("grid.h", "obstacle experiments need a grid spacing");
        else if (a_min > 0.0 && cfg.grid_h > a_min / 4.0 + 1e-12)
            err("grid.h", "grid spacing must be at most a quarter of the smallest hole (" +
                              format_double(a_min / 4.0) + ")");
        else if (cfg.has_domain)
            for (int i = 0; i < cfg.d; ++i)
                if ((cfg.domain.hi[i] - cfg.domain.lo[i]) / cfg.grid_h >
                    cfg.max_cells + 1e-9) {
                    err("grid.h", "grid exceeds grid.max_cells per axis");
                    break;
                }
        if (cfg.delta <= 0.0) err("homogenize.delta", "facet size must be positive");
        if (cfg.obstacle_amp < 0.0)
            warn("homogenize.obstacle", "nonpositive obstacle makes the constraint inactive");
        if (cfg.has_surface && cfg.has_domain)
            for (int i = 0; i < cfg.d - 1; ++i)
                if (cfg.surface.domain.lo[i] > cfg.domain.lo[i] ||
                    cfg.surface.domain.hi[i] < cfg.domain.hi[i]) {
                    err("surface.chart_lo", "chart must cover the domain laterally");
                    break;
                }
    }

    if (k == ExperimentKind::Discrepancy) {
        if (!(cfg.interval.lo >= 0.0 && cfg.interval.lo < cfg.interval.hi &&
              cfg.interval.hi <= 1.0))
            err("discrepancy.interval", "interval must satisfy 0 <= lo < hi <= 1");
        if (cfg.et_terms < 0) err("discrepancy.et_terms", "term count cannot be negative");
        for (int i = 0; i < cfg.d - 1; ++i)
            if (cfg.qprime.hi[i] <= cfg.qprime.lo[i]) {
                err("discrepancy.qprime_hi", "lateral window is empty");
                break;
            }
    }
    return out;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    for (const auto& diag : validate_config(cfg))
        if (diag.level == Diagnostic::Level::Error)
            throw ValidationError("config: " + diag.key + ": " + diag.message);

    const int threads = opts.threads > 0 ? opts.threads : (cfg.threads > 0 ? cfg.threads : 1);
    set_num_threads(threads);
    const long long seed = opts.seed >= 0 ? opts.seed : cfg.seed;

    const std::string root = opts.out_root.empty() ? cfg.out_dir : opts.out_root;
    const std::string dirname =
        opts.dir_name.empty() ? cfg.name + "-" + utc_timestamp() : opts.dir_name;
    ArtifactWriter w((std::filesystem::path(root) / dirname).string());

    switch (cfg.kind) {
        case ExperimentKind::Discrepancy: run_discrepancy(cfg, w, opts.quiet); break;
        case ExperimentKind::Capacity: run_capacity(cfg, w, opts.quiet); break;
        case ExperimentKind::MeanCap: run_mean_cap(cfg, w, opts.quiet); break;
        case ExperimentKind::Corrector: run_corrector(cfg, w, opts.quiet); break;
        case ExperimentKind::Homogenize: run_homogenize(cfg, w, opts.quiet); break;
        case ExperimentKind::Sweep: run_sweep(cfg, w, opts.quiet); break;
    }

    RunResult res;
    res.files = w.files();
    w.finalize({"experiment " + cfg.name, "kind " + std::string(to_string(cfg.kind)),
                "seed " + std::to_string(seed)});
    res.dir = w.dir();
    return res;
}

namespace {

const Fixture kFixtures[] = {
    {"discrepancy-parabola",
     "lattice equidistribution of a parabola chart over six dyadic scales",
     R"(# deviation decay of frac(g(eps k)/eps) for the parabola chart
[experiment]
kind = discrepancy
name = discrepancy-parabola
[space]
d = 2
p = 1.3
[surface]
kind = quadratic
curvature = 1
linear = 0
offset = 0
chart_lo = -0.25
chart_hi = 1.25
[sieve]
eps = 0.0625 0.03125 0.015625 0.0078125 0.00390625 0.001953125
[discrepancy]
interval = 0 0.5
)"},
    {"capacity-ball-3d", "p=2 capacity of the unit ball under grid refinement",
     R"(# cap_2(B_1) = 4 pi under refinement
[experiment]
kind = capacity
name = capacity-ball-3d
[space]
d = 3
p = 2
[hole]
kind = ball
radius = 1
[grid]
R = 4
cells = 24
levels = 3
)"},
    {"capacity-cube-2d", "p=1.3 capacity of a grid-aligned square under refinement",
     R"(# faces sit on grid nodes at every level
[experiment]
kind = capacity
name = capacity-cube-2d
[space]
d = 2
p = 1.3
[hole]
kind = box
halfwidths = 0.5 0.5
[grid]
R = 6
cells = 48
levels = 2
)"},
    {"mean-cap-ball-3d", "direction-averaged capacity of the unit ball, two normals",
     R"(# ball templates are rotation invariant: both rows should agree
[experiment]
kind = mean-cap
name = mean-cap-ball-3d
[space]
d = 3
p = 2
[hole]
kind = ball
radius = 1
[grid]
R = 4
cells = 32
[solver]
quad_tol = 0.05
[mean_cap]
normals = 0 0 1 ; 0.4472135954999579 0 0.8944271909999159
)"},
    {"corrector-plane-3d", "cell-problem energies over a tilted plane section",
     R"(# irrational slopes keep the vertical offsets equidistributed
[experiment]
kind = corrector
name = corrector-plane-3d
[space]
d = 3
p = 2
[surface]
kind = flat
slope = 0.41421356237309515 0.7320508075688772
offset = 0.51
chart_lo = -0.5 -0.5
chart_hi = 1.5 1.5
[hole]
kind = ball
radius = 1
[sieve]
eps = 0.0625
prefactor = 0.5
[grid]
cells = 24
[domain]
lo = 0 0 0
hi = 1 1 1
[corrector]
quantize = true
)"},
    {"homogenize-line-2d", "perforated and homogenized obstacle solves at one scale",
     R"(# thin obstacle on a tilted line, eps = 1/8
[experiment]
kind = homogenize
name = homogenize-line-2d
[space]
d = 2
p = 1.3
[surface]
kind = flat
slope = 0.3
offset = 0.53
chart_lo = -0.5
chart_hi = 1.5
[hole]
kind = ball
radius = 1
[sieve]
eps = 0.125
prefactor = 0.5
[grid]
R = 4
cells = 64
h = 0.010416666666666666
[domain]
lo = 0 0
hi = 1 1
[homogenize]
delta = 0.05
obstacle = 0.3
)"},
    {"sweep-line-2d", "epsilon sweep of the obstacle problem against its limit",
     R"(# distances to the homogenized solution across three scales
[experiment]
kind = sweep
name = sweep-line-2d
[space]
d = 2
p = 1.3
[surface]
kind = flat
slope = 0.37
offset = 0.53
chart_lo = -0.5
chart_hi = 1.5
[hole]
kind = ball
radius = 1
[sieve]
eps = 0.5 0.25 0.125
prefactor = 0.5
[grid]
R = 4
cells = 64
h = 0.010416666666666666
[domain]
lo = 0 0
hi = 1 1
[homogenize]
delta = 0.05
obstacle = 0.3
)"},
};

}  // namespace

const std::vector<Fixture>& builtin_fixtures() {
    static const std::vector<Fixture> fixtures(std::begin(kFixtures), std::end(kFixtures));
    return fixtures;
}

const Fixture* find_fixture(const std::string& name) {
    for (const auto& f : builtin_fixtures())
        if (name == f.name) return &f;
    return nullptr;
}

}  // namespace sievehom
