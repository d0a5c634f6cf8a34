#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dbn/dbn_state.hpp"
#include "dbn/diagnostics.hpp"
#include "dbn/errors.hpp"
#include "dbn/experiment.hpp"
#include "dbn/optimizer.hpp"
#include "dbn/schedule_analysis.hpp"

namespace py = pybind11;
using namespace dbn;

namespace {

py::array_t<double> to_array(const Matrix& m) {
    py::array_t<double> out({m.rows(), m.cols()});
    std::copy(m.data().begin(), m.data().end(), out.mutable_data());
    return out;
}

py::object targets_of(const Dataset& d) {
    if (d.empty() || std::holds_alternative<std::size_t>(d.targets[0])) {
        py::array_t<std::int64_t> labels(std::vector<py::ssize_t>{static_cast<py::ssize_t>(d.size())});
        auto view = labels.mutable_unchecked<1>();
        for (std::size_t i = 0; i < d.size(); ++i) view(static_cast<py::ssize_t>(i)) = static_cast<std::int64_t>(label_of(d, i));
        return std::move(labels);
    }
    py::list rows;
    for (const auto& t : d.targets) rows.append(std::get<Vector>(t));
    return rows;
}

py::dict dataset_dict(const Dataset& d) {
    py::dict out;
    out["inputs"] = to_array(d.inputs);
    out["targets"] = targets_of(d);
    return out;
}

py::dict sums_dict(const PartialSums& s) {
    py::dict out;
    out["s1"] = s.s1;
    out["s2"] = s.s2;
    out["s3"] = s.s3;
    out["s4"] = s.s4;
    out["eta_sq"] = s.eta_sq;
    return out;
}

py::object optional_value(const std::optional<double>& v) { return v ? py::cast(*v) : py::none(); }

py::dict metrics_dict(const RunMetrics& m) {
    py::list rows;
    for (const auto& r : m.rows) {
        py::dict row;
        row["epoch"] = r.epoch;
        row["train_loss"] = r.train_loss;
        row["train_accuracy"] = r.train_accuracy;
        row["val_loss"] = r.val_loss;
        row["val_accuracy"] = r.val_accuracy;
        row["grad_norm"] = optional_value(r.gradient_norm);
        row["lambda_gap"] = optional_value(r.lambda_gap);
        rows.append(row);
    }
    py::dict out;
    out["alpha"] = m.alpha_label;
    out["rows"] = rows;
    out["iterations"] = m.iterations;
    out["diverged"] = m.diverged;
    out["divergence"] = m.divergence;
    out["best_val_accuracy"] = m.best_val_accuracy();
    out["csv"] = metrics_csv(m);
    return out;
}

ExperimentConfig config_from(const std::filesystem::path& path, std::optional<std::uint64_t> seed,
                             std::optional<std::filesystem::path> output) {
    ExperimentConfig c = load_config(path);
    if (seed) c.seed = *seed;
    c.output = output.value_or(std::filesystem::path{});
    return c;
}

SchedulePair pair_of(const std::string& alpha, const std::string& eta) { return {parse_alpha(alpha), parse_eta(eta)}; }

}  // namespace

PYBIND11_MODULE(_dbn_lab, m) {
    m.doc() = "Diminishing batch normalization training and schedule analysis";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
    py::register_exception<NumericError>(m, "NumericError", base.ptr());
    py::register_exception<FormatError>(m, "FormatError", base.ptr());

    m.def("alpha_at", [](const std::string& alpha, std::uint64_t it) { return alpha_at(parse_alpha(alpha), it); },
          py::arg("alpha"), py::arg("m"));
    m.def("eta_at", [](const std::string& eta, std::uint64_t it) { return eta_at(parse_eta(eta), it); },
          py::arg("eta"), py::arg("m"));
    m.def("stepsize_warnings", [](const std::string& eta) { return stepsize_warnings(parse_eta(eta)); },
          py::arg("eta"));

    m.def("check_theorem31_rule", &check_theorem31_rule, py::arg("h"), py::arg("k"));
    m.def("check_lemma42_rule", &check_lemma42_rule, py::arg("h"), py::arg("k"));
    m.def("partial_sums",
          [](const std::string& alpha, const std::string& eta, std::uint64_t truncation) {
              return sums_dict(partial_sums(pair_of(alpha, eta), truncation));
          },
          py::arg("alpha"), py::arg("eta"), py::arg("truncation"));
    m.def("tail_bound_am",
          [](const std::string& alpha, const std::string& eta, std::uint64_t start, double m1, double m2,
             std::uint64_t horizon) { return tail_bound_am(pair_of(alpha, eta), start, m1, m2, horizon); },
          py::arg("alpha"), py::arg("eta"), py::arg("m"), py::arg("m1") = 1.0, py::arg("m2") = 1.0,
          py::arg("horizon") = 1000000);
    m.def("classify",
          [](const std::string& alpha, const std::string& eta, std::uint64_t truncation) {
              const ConditionReport r = classify(pair_of(alpha, eta), truncation);
              py::dict out;
              out["theorem31_ok"] = r.theorem31_ok;
              out["lemma42_ok"] = r.lemma42_ok;
              out["theorem31_symbolic"] = r.theorem31_symbolic ? py::cast(*r.theorem31_symbolic) : py::none();
              out["lemma42_symbolic"] = r.lemma42_symbolic ? py::cast(*r.lemma42_symbolic) : py::none();
              out["theorem31_numeric"] = to_string(r.theorem31_numeric);
              out["lemma42_numeric"] = to_string(r.lemma42_numeric);
              out["theorem31_trace"] = r.theorem31_trace;
              out["lemma42_trace"] = r.lemma42_trace;
              out["sums"] = sums_dict(r.sums);
              py::dict growth;
              for (const auto& e : r.evidence) growth[py::str(e.name)] = e.growth;
              out["growth"] = growth;
              out["agreement"] = r.agreement;
              return out;
          },
          py::arg("alpha"), py::arg("eta"), py::arg("truncation") = 100000);

    m.def("generate_synthetic",
          [](std::size_t classes, std::size_t dim, std::size_t samples, double spread, std::uint64_t seed) {
              const Split s = generate_synthetic(SyntheticSpec{classes, dim, samples, spread}, seed);
              py::dict out;
              out["train"] = dataset_dict(s.train);
              out["validation"] = dataset_dict(s.validation);
              out["classes"] = s.classes;
              return out;
          },
          py::arg("classes") = 2, py::arg("dim") = 2, py::arg("samples") = 400, py::arg("spread") = 0.5,
          py::arg("seed") = 1);
    m.def("load_idx",
          [](const std::filesystem::path& images, const std::filesystem::path& labels, std::size_t limit) {
              return dataset_dict(load_idx(images, labels, limit));
          },
          py::arg("images"), py::arg("labels"), py::arg("limit") = 1000);
    m.def("parse_idx",
          [](py::bytes images, py::bytes labels, std::size_t limit) {
              const std::string a = images;
              const std::string b = labels;
              const auto* pa = reinterpret_cast<const std::uint8_t*>(a.data());
              const auto* pb = reinterpret_cast<const std::uint8_t*>(b.data());
              return dataset_dict(parse_idx({pa, a.size()}, {pb, b.size()}, limit));
          },
          py::arg("images"), py::arg("labels"), py::arg("limit") = 1000);

    m.def("gradient_check",
          [](std::uint64_t seed, const std::string& activation, bool activated_head, double step) {
              const NetworkArch arch{{3, 5, 5, 2}, parse_activation(activation),
                                     activated_head ? OutputHead::activated : OutputHead::linear_logits};
              const GradientCheckResult r = gradient_check(make_gradient_problem(seed, arch), step);
              py::dict out;
              out["max_relative_error"] = r.max_relative_error;
              out["worst_component"] = r.worst_component;
              out["components"] = r.components;
              out["near_kink"] = r.near_kink;
              return out;
          },
          py::arg("seed"), py::arg("activation") = "relu", py::arg("activated_head") = false,
          py::arg("step") = 1e-5);

    m.def("run_experiment",
          [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
             std::optional<std::filesystem::path> output) {
              const ExperimentConfig c = config_from(config, seed, output);
              RunMetrics metrics;
              {
                  py::gil_scoped_release release;
                  metrics = run_experiment(c);
              }
              return metrics_dict(metrics);
          },
          py::arg("config"), py::arg("seed") = py::none(), py::arg("output") = py::none());
    m.def("compare_alphas",
          [](const std::filesystem::path& config, const std::vector<std::string>& alphas,
             std::optional<std::uint64_t> seed, std::optional<std::filesystem::path> output) {
              const ExperimentConfig c = config_from(config, seed, output);
              std::vector<AlphaSchedule> schedules;
              for (const auto& a : alphas) schedules.push_back(parse_alpha(a));
              SweepResult sweep;
              {
                  py::gil_scoped_release release;
                  sweep = compare_alphas(c, schedules);
              }
              py::list rows;
              for (const auto& r : sweep.rows) {
                  py::dict row;
                  row["alpha"] = r.alpha;
                  row["best_val_accuracy"] = r.best_val_accuracy;
                  row["final_train_accuracy"] = r.final_train_accuracy;
                  row["final_grad_norm"] = optional_value(r.final_gradient_norm);
                  row["initial_train_loss"] = r.initial_train_loss;
                  row["diverged"] = r.diverged;
                  rows.append(row);
              }
              py::dict out;
              out["rows"] = rows;
              out["csv"] = sweep_csv(sweep);
              return out;
          },
          py::arg("config"), py::arg("alphas"), py::arg("seed") = py::none(), py::arg("output") = py::none());
}
