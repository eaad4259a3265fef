#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "sievehom/capacity.hpp"
#include "sievehom/equidistribution.hpp"
#include "sievehom/experiment.hpp"
#include "sievehom/geometry.hpp"

namespace py = pybind11;
using namespace sievehom;

namespace {

Pt to_pt(const std::vector<double>& v, const char* what) {
    if (v.empty() || v.size() > static_cast<std::size_t>(kMaxDim))
        throw ValidationError(std::string(what) + ": expected 1 to 4 components");
    Pt out{};
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
    return out;
}

Box to_box(const std::vector<double>& lo, const std::vector<double>& hi, const char* what) {
    if (lo.size() != hi.size())
        throw ValidationError(std::string(what) + ": lo and hi must match in length");
    Box b;
    b.d = static_cast<int>(lo.size());
    b.lo = to_pt(lo, what);
    b.hi = to_pt(hi, what);
    return b;
}

ModOneSample as_sample(std::vector<double> values) {
    ModOneSample s;
    s.values = std::move(values);
    s.provenance.generator = "python";
    s.validate();
    return s;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "sieve capacity and homogenization core";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);

    m.def("critical_hole_size", &critical_hole_size, py::arg("eps"), py::arg("d"),
          py::arg("p"), "Hole size eps^(d/(d-p+1)) at which capacity density is order one");

    py::class_<HoleShape>(m, "HoleShape", "Compact convex hole template")
        .def_static("ball", &HoleShape::ball, py::arg("d"), py::arg("radius"))
        .def_static(
            "box",
            [](int d, const std::vector<double>& half_widths) {
                return HoleShape::box(d, to_pt(half_widths, "half_widths"));
            },
            py::arg("d"), py::arg("half_widths"))
        .def("circumradius", &HoleShape::circumradius)
        .def("dim", &HoleShape::dim);

    py::class_<ConvexSurface>(m, "ConvexSurface", "Convex graph chart x_d = g(x')")
        .def_static(
            "flat",
            [](const std::vector<double>& slope, double offset,
               const std::vector<double>& chart_lo, const std::vector<double>& chart_hi) {
                const int d = static_cast<int>(slope.size()) + 1;
                return ConvexSurface::flat(d, to_pt(slope, "slope"), offset,
                                           to_box(chart_lo, chart_hi, "chart"));
            },
            py::arg("slope"), py::arg("offset"), py::arg("chart_lo"), py::arg("chart_hi"))
        .def_static(
            "quadratic",
            [](const std::vector<double>& A, const std::vector<double>& b, double c,
               const std::vector<double>& chart_lo, const std::vector<double>& chart_hi) {
                const int d = static_cast<int>(b.size()) + 1;
                return ConvexSurface::quadratic(d, A, to_pt(b, "b"), c,
                                                to_box(chart_lo, chart_hi, "chart"));
            },
            py::arg("A"), py::arg("b"), py::arg("c"), py::arg("chart_lo"),
            py::arg("chart_hi"));

    m.def(
        "surface_values",
        [](const ConvexSurface& s, double eps, const std::vector<double>& qprime_lo,
           const std::vector<double>& qprime_hi) {
            return surface_sequence(s, eps, to_box(qprime_lo, qprime_hi, "qprime")).values;
        },
        py::arg("surface"), py::arg("eps"), py::arg("qprime_lo"), py::arg("qprime_hi"),
        "frac(g(eps k')/eps) over lattice points eps k' in the window, lexicographic");

    m.def(
        "discrepancy",
        [](std::vector<double> values) {
            const auto rep = discrepancy_exact(std::move(values));
            return py::make_tuple(rep.value, rep.star, rep.n);
        },
        py::arg("values"), "Exact extreme discrepancy: (two_sided, star, n)");

    m.def(
        "erdos_turan_bound",
        [](std::vector<double> values, int n) {
            return erdos_turan_bound(as_sample(std::move(values)), n);
        },
        py::arg("values"), py::arg("n") = 0);

    m.def(
        "interval_deviation",
        [](std::vector<double> values, double lo, double hi) {
            const auto rep =
                interval_deviation(as_sample(std::move(values)), Interval{lo, hi});
            return py::make_tuple(rep.deviation, rep.count, rep.n);
        },
        py::arg("values"), py::arg("lo"), py::arg("hi"),
        "Counting deviation |A/N - (hi - lo)|: (deviation, count, n)");

    m.def(
        "capacity",
        [](double p, const HoleShape& shape, double R, int cells, int levels) {
            const ScaledHole region(shape, 1.0, Pt{});
            return capacity_with_refinement(p, region, R, cells, levels).value;
        },
        py::arg("p"), py::arg("shape"), py::arg("R") = 4.0, py::arg("cells") = 32,
        py::arg("levels") = 1,
        "Richardson-extrapolated p-capacity of the template in a ball of radius R");

    m.def(
        "mean_capacity",
        [](double p, const HoleShape& shape, const std::vector<double>& nu, double R,
           int cells, double quad_tol) {
            const auto r = mean_capacity(p, shape, to_pt(nu, "nu"), R, cells, quad_tol);
            return py::make_tuple(r.value, r.evaluations);
        },
        py::arg("p"), py::arg("shape"), py::arg("nu"), py::arg("R") = 4.0,
        py::arg("cells") = 32, py::arg("quad_tol") = 0.01,
        "Direction-averaged slice capacity: (value, slice_solves)");

    m.def(
        "run_config",
        [](const std::string& text, const std::string& out_root, const std::string& dir_name,
           long long seed, int threads, bool quiet) {
            const auto cfg = ExperimentConfig::from_ini(IniFile::parse_string(text));
            RunOptions opts;
            opts.out_root = out_root;
            opts.dir_name = dir_name;
            opts.seed = seed;
            opts.threads = threads;
            opts.quiet = quiet;
            const auto res = run_experiment(cfg, opts);
            return py::make_tuple(res.dir, res.files);
        },
        py::arg("text"), py::arg("out_root"), py::arg("dir_name") = std::string(),
        py::arg("seed") = -1, py::arg("threads") = 0, py::arg("quiet") = true,
        "Run an experiment config (INI text); returns (directory, file names)");

    m.def(
        "validate_config",
        [](const std::string& text) {
            const auto cfg = ExperimentConfig::from_ini(IniFile::parse_string(text));
            std::vector<py::tuple> out;
            for (const auto& d : validate_config(cfg))
                out.push_back(py::make_tuple(
                    d.level == Diagnostic::Level::Error ? "error" : "warning", d.key,
                    d.message));
            return out;
        },
        py::arg("text"), "Config diagnostics as (level, key, message) tuples");

    m.def("fixtures", [] {
        std::vector<py::tuple> out;
        for (const auto& f : builtin_fixtures()) out.push_back(py::make_tuple(f.name, f.summary));
        return out;
    });
    m.def(
        "fixture_config",
        [](const std::string& name) {
            const Fixture* f = find_fixture(name);
            if (!f) throw ValidationError("config: no such bundled fixture: " + name);
            return std::string(f->ini);
        },
        py::arg("name"));
}
