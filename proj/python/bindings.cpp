#include "weakinfo/commands.hpp"
#include "weakinfo/complete_solver.hpp"
#include "weakinfo/config.hpp"
#include "weakinfo/measures.hpp"
#include "weakinfo/trinomial.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace weakinfo;

namespace {

BinomialParams binomial(double s, double h, double k, double r, int periods, double wealth) {
    return {s, h, k, r, periods, wealth};
}

py::dict value_dict(const ValueOfInformation& v) {
    py::dict d;
    d["u"] = v.u;
    d["F"] = v.F;
    d["pi"] = v.pi ? py::cast(*v.pi) : py::none();
    d["riskfree_utility"] = v.riskfree_utility;
    return d;
}

}  // namespace

PYBIND11_MODULE(_weakinfo, m) {
    m.doc() = "Value of weak information in discrete-time markets";

    py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    py::class_<Utility>(m, "Utility")
        .def_static("log", &Utility::log)
        .def_static("power", &Utility::power, py::arg("gamma"))
        .def_static("exponential", &Utility::exponential, py::arg("alpha"))
        .def_property_readonly("name", &Utility::name)
        .def("evaluate", &Utility::evaluate)
        .def("marginal", &Utility::marginal)
        .def("inverse_marginal", &Utility::inverse_marginal)
        .def("conjugate", &Utility::conjugate)
        .def("__repr__", [](const Utility& u) { return "Utility." + u.name(); });

    m.def(
        "minimal_measure",
        [](double h, double k, double r, const std::vector<double>& nu) {
            int N = static_cast<int>(nu.size()) - 1;
            auto mm = minimal_measure(risk_neutral_binomial<double>(h, k, r, N), nu);
            std::vector<std::vector<double>> up;
            for (int n = 0; n < N; ++n) {
                up.emplace_back();
                for (int i = 0; i <= n; ++i) up.back().push_back(mm.up(n, i));
            }
            return up;
        },
        py::arg("h"), py::arg("k"), py::arg("r"), py::arg("nu"),
        "Up-probabilities of the minimal measure, indexed [time][down-moves].");

    m.def(
        "minimal_measure_exact",
        [](const std::string& h, const std::string& k, const std::string& r, const std::vector<std::string>& nu) {
            int N = static_cast<int>(nu.size()) - 1;
            std::vector<Rational> w;
            for (const auto& x : nu) w.push_back(parse_rational(x));
            auto mm = minimal_measure(risk_neutral_binomial<Rational>(parse_rational(h), parse_rational(k), parse_rational(r), N), w);
            std::vector<std::vector<std::string>> up;
            for (int n = 0; n < N; ++n) {
                up.emplace_back();
                for (int i = 0; i <= n; ++i) up.back().push_back(to_string(mm.up(n, i)));
            }
            return up;
        },
        py::arg("h"), py::arg("k"), py::arg("r"), py::arg("nu"), "Same as minimal_measure, as exact fractions.");

    m.def(
        "solve_binomial",
        [](const Utility& u, const std::vector<double>& nu, double s, double h, double k, double r, double wealth,
           bool pruning) {
            int N = static_cast<int>(nu.size()) - 1;
            auto sol = solve_binomial(binomial(s, h, k, r, N, wealth), u, Anticipation::validated(nu, pruning));
            py::dict d = value_dict(sol.value);
            d["lambda"] = sol.lambda.lambda;
            d["terminal_wealth"] = sol.terminal_wealth;
            d["wealth"] = sol.wealth;
            d["delta"] = sol.portfolio.stock;
            d["bank"] = sol.portfolio.bank;
            return d;
        },
        py::arg("utility"), py::arg("nu"), py::arg("s"), py::arg("h"), py::arg("k"), py::arg("r"), py::arg("wealth"),
        py::arg("pruning") = false);

    m.def(
        "extremal_measures",
        [](double a, double b, double c, double r) {
            auto pair = extremal_measures<double>(a, b, c, r);
            return py::make_tuple(pair.p0, pair.p1);
        },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("r"));

    m.def(
        "solve_trinomial",
        [](const Utility& u, const std::vector<double>& nu_paths, double s, double a, double b, double c, double r,
           int periods, double wealth) {
            auto sol = solve_trinomial(TrinomialParams{s, a, b, c, r, periods, wealth}, u, nu_paths);
            py::dict d;
            d["lambda"] = sol.lambda.lambda;
            d["residual_norm"] = sol.lambda.residual_norm;
            d["method"] = sol.lambda.method;
            d["u"] = sol.u;
            d["riskfree_utility"] = sol.riskfree_utility;
            d["terminal_wealth"] = sol.terminal_wealth;
            d["delta"] = sol.tree.delta;
            d["replicable"] = sol.tree.replicability.ok;
            d["worst_mismatch"] = sol.tree.replicability.worst_mismatch;
            return d;
        },
        py::arg("utility"), py::arg("nu_paths"), py::arg("s"), py::arg("a"), py::arg("b"), py::arg("c"), py::arg("r"),
        py::arg("periods"), py::arg("wealth"));

    m.def(
        "run",
        [](const std::string& config_text, const std::string& command, int precision, int threads) {
            CommandOptions opts;
            opts.command = command;
            opts.precision = precision;
            opts.threads = threads;
            CommandResult res = run_command(parse_config(config_text), opts);
            return py::make_tuple(res.exit_code, res.report.dump(), res.files);
        },
        py::arg("config_text"), py::arg("command") = "", py::arg("precision") = 7, py::arg("threads") = 1,
        "Runs a config; returns (exit_code, report_json, files).");
}
