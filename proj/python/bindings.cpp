#include <algorithm>
#include <complex>

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hpr/gradients.hpp"
#include "hpr/harness.hpp"
#include "hpr/likelihood.hpp"
#include "hpr/measurement.hpp"
#include "hpr/metrics.hpp"
#include "hpr/operator.hpp"
#include "hpr/synthetic.hpp"

namespace py = pybind11;

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

static hpr::ImageGrid to_grid(const Array& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    hpr::ImageGrid g(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    const double* p = a.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = p[i];
    return g;
}

static Array to_array(const hpr::ImageGrid& g) {
    Array a({g.rows(), g.cols()});
    double* p = a.mutable_data();
    for (std::size_t i = 0; i < g.size(); ++i) p[i] = g[i];
    return a;
}

static std::vector<double> to_vec(const Array& a) {
    return std::vector<double>(a.data(), a.data() + a.size());
}

static py::dict row_dict(const hpr::MetricRow& r) {
    py::dict d;
    d["solver"] = r.solver;
    d["alpha"] = r.alpha;
    d["sigma"] = r.sigma;
    d["seed"] = r.seed;
    d["nrmse"] = r.nrmse;
    d["nrmse_raw"] = r.nrmse_raw;
    d["ssim"] = r.ssim;
    d["iterations"] = r.iterations;
    d["wall_ms"] = r.wall_ms;
    d["status"] = r.status;
    return d;
}

PYBIND11_MODULE(_hpr, m) {
    m.doc() = "holographic phase retrieval core";

    py::class_<hpr::TruncationPolicy>(m, "TruncationPolicy")
        .def(py::init<>())
        .def_readwrite("delta", &hpr::TruncationPolicy::delta)
        .def_readwrite("hard_cap", &hpr::TruncationPolicy::hard_cap)
        .def_readwrite("tail_guard", &hpr::TruncationPolicy::tail_guard);

    m.def("lambert_peak", &hpr::lambert_peak, py::arg("a"), py::arg("b"), py::arg("sigma"));
    m.def("log_s", &hpr::log_s, py::arg("a"), py::arg("b"), py::arg("sigma"),
          py::arg("policy") = hpr::TruncationPolicy{});
    m.def("phi", &hpr::phi, py::arg("u"), py::arg("y"), py::arg("sigma"),
          py::arg("policy") = hpr::TruncationPolicy{});
    m.def("phi_derivative", &hpr::phi_derivative, py::arg("u"), py::arg("y"), py::arg("sigma"),
          py::arg("policy") = hpr::TruncationPolicy{});
    m.def("nll_pg_term", &hpr::nll_pg_term, py::arg("u"), py::arg("y"), py::arg("sigma"),
          py::arg("policy") = hpr::TruncationPolicy{});
    m.def("nll_poisson_term", &hpr::nll_poisson_term, py::arg("u"), py::arg("y"));
    m.def("phi_slope_bound", &hpr::phi_slope_bound, py::arg("sigma"), py::arg("y_max"));

    py::class_<hpr::HolographicOperator, std::shared_ptr<hpr::HolographicOperator>>(m, "Operator")
        .def(py::init([](std::size_t n, double gain, std::size_t oversample, const Array& ref) {
                 return std::make_shared<hpr::HolographicOperator>(
                     hpr::make_operator(n, gain, oversample, to_grid(ref)));
             }),
             py::arg("n"), py::arg("gain"), py::arg("oversample"), py::arg("reference"))
        .def_property_readonly("n", &hpr::HolographicOperator::n)
        .def_property_readonly("gain", &hpr::HolographicOperator::alpha)
        .def_property_readonly("measurement_count", &hpr::HolographicOperator::measurement_count)
        .def_property_readonly("spectral_norm", [](const hpr::HolographicOperator& op) { return op.norms().spectral; })
        .def_property_readonly("infinity_norm", [](const hpr::HolographicOperator& op) { return op.norms().infinity; })
        .def("forward", [](const hpr::HolographicOperator& op, const Array& x) {
            const hpr::Field f = op.apply_forward(to_grid(x));
            py::array_t<std::complex<double>> out({op.plane_rows(), op.plane_cols()});
            std::copy(f.begin(), f.end(), out.mutable_data());
            return out;
        })
        .def("intensity", [](const hpr::HolographicOperator& op, const Array& x) {
            return op.intensity(to_grid(x));
        });

    m.def("nominal_gain", &hpr::nominal_gain, py::arg("alpha"), py::arg("n"), py::arg("oversample"));
    m.def("random_binary_reference", [](std::size_t n, std::uint64_t seed, double fill) {
        return to_array(hpr::random_binary_reference(n, seed, fill));
    }, py::arg("n"), py::arg("seed"), py::arg("fill") = 0.5);
    m.def("make_synthetic", [](const std::string& kind, std::size_t n, std::uint64_t seed) {
        return to_array(hpr::make_synthetic(hpr::parse_synthetic_kind(kind), n, seed));
    }, py::arg("kind"), py::arg("n"), py::arg("seed"));

    m.def("simulate", [](const hpr::HolographicOperator& op, const Array& x, double b_bar, double sigma,
                         std::uint64_t seed) {
        const hpr::MeasurementSet s = hpr::simulate_measurements(op, to_grid(x), b_bar, sigma, seed);
        return py::make_tuple(s.y, s.b_bar);
    }, py::arg("op"), py::arg("x"), py::arg("b_bar"), py::arg("sigma"), py::arg("seed"));

    auto fidelity = [](const hpr::HolographicOperator& op, const Array& y, const Array& b, double sigma,
                       const std::string& kind) {
        hpr::MeasurementSet meas;
        meas.y = to_vec(y);
        meas.b_bar = to_vec(b);
        meas.sigma = sigma;
        return std::make_pair(meas, hpr::parse_likelihood(kind));
    };
    m.def("data_value", [fidelity](const hpr::HolographicOperator& op, const Array& x, const Array& y,
                                   const Array& b, double sigma, const std::string& kind) {
        auto [meas, lk] = fidelity(op, y, b, sigma, kind);
        return hpr::DataFidelity(op, meas, lk).value(to_grid(x));
    }, py::arg("op"), py::arg("x"), py::arg("y"), py::arg("b_bar"), py::arg("sigma"), py::arg("likelihood") = "pg");
    m.def("data_gradient", [fidelity](const hpr::HolographicOperator& op, const Array& x, const Array& y,
                                      const Array& b, double sigma, const std::string& kind) {
        auto [meas, lk] = fidelity(op, y, b, sigma, kind);
        return to_array(hpr::DataFidelity(op, meas, lk).gradient(to_grid(x)));
    }, py::arg("op"), py::arg("x"), py::arg("y"), py::arg("b_bar"), py::arg("sigma"), py::arg("likelihood") = "pg");

    m.def("nrmse", [](const Array& a, const Array& b) { return hpr::nrmse(to_grid(a), to_grid(b)); });
    m.def("ssim", [](const Array& a, const Array& b, double data_range) {
        hpr::SsimParams p;
        p.data_range = data_range;
        return hpr::ssim(to_grid(a), to_grid(b), p);
    }, py::arg("x_hat"), py::arg("x_true"), py::arg("data_range") = 1.0);
    m.def("phase_correct", [](const Array& a, const Array& b) {
        return to_array(hpr::phase_correct(to_grid(a), to_grid(b)));
    });

    m.def("run_experiment", [](const std::string& config_text) {
        const hpr::ExperimentConfig cfg = hpr::parse_experiment_config(config_text);
        hpr::ExperimentResult res;
        {
            py::gil_scoped_release release;
            res = hpr::run_experiment(cfg);
        }
        py::list rows;
        for (const auto& r : res.rows) rows.append(row_dict(r));
        return py::make_tuple(rows, hpr::metrics_csv(res.rows));
    }, py::arg("config_text"), "Run a sweep from config text; returns (rows, metrics csv).");

    m.def("selftest", [] {
        py::list out;
        for (const auto& r : hpr::selftest()) out.append(py::make_tuple(r.name, r.passed, r.detail));
        return out;
    });
}
