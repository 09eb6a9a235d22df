// Copyright (C) 2026 The cultdiff Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cultdiff/agreement.hpp"
#include "cultdiff/correlation.hpp"
#include "cultdiff/genpipe.hpp"
#include "cultdiff/loss.hpp"
#include "cultdiff/metrics.hpp"
#include "cultdiff/pairs.hpp"
#include "cultdiff/pipeline.hpp"

namespace py = pybind11;
using namespace cultdiff;

namespace {

Image to_image(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an HxWx3 array");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), img.pixels.begin());
    return img;
}

std::vector<PairTerm<double>> terms(const std::vector<double>& d, const std::vector<int>& y, const std::vector<double>& w) {
    if (d.size() != y.size() || d.size() != w.size()) throw py::value_error("d, y and w must have equal lengths");
    std::vector<PairTerm<double>> out;
    for (std::size_t i = 0; i < d.size(); ++i) out.push_back({d[i], y[i], w[i]});
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "cultdiff core operations";

    static py::exception<Error> error_type(m, "Error", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const py::object cls = error_type;
            py::object exc = cls(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    m.def(
        "render_prompt",
        [](const std::string& country, const std::string& category, const std::string& name) {
            Artifact a;
            a.country = country;
            a.category = parse_category(category);
            a.name = name;
            return render_prompt(a, default_demonym_table());
        },
        py::arg("country"), py::arg("category"), py::arg("name"));

    m.def(
        "weighted_margin_loss",
        [](const std::vector<double>& d, const std::vector<int>& y, const std::vector<double>& w, double margin) {
            const auto batch = terms(d, y, w);
            return weighted_margin_loss(std::span<const PairTerm<double>>(batch), margin);
        },
        py::arg("d"), py::arg("y"), py::arg("w"), py::arg("margin") = 1.0);
    m.def("normalize_score", &normalize_score, py::arg("mean_likert"));
    m.def(
        "human_pair_score",
        [](const std::vector<std::array<int, 4>>& q1) { return human_pair_score(std::span<const std::array<int, 4>>(q1)); },
        py::arg("q1_answers"));

    m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });
    m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });
    m.def("kendall_tau_b", [](const std::vector<double>& x, const std::vector<double>& y) { return kendall_tau_b(x, y); });
    m.def("kendall_tau_c", [](const std::vector<double>& x, const std::vector<double>& y) { return kendall_tau_c(x, y); });
    m.def("fleiss_kappa", &fleiss_kappa, py::arg("counts"));

    m.def("ssim", [](py::array_t<float> a, py::array_t<float> b) { return ssim(to_image(a), to_image(b)); });
    m.def("lpips", [](py::array_t<float> a, py::array_t<float> b) { return lpips_distance(to_image(a), to_image(b)); });
    m.def(
        "per_pair_fid",
        [](const std::vector<std::vector<double>>& refs, const std::vector<double>& x) {
            std::vector<Eigen::VectorXd> r;
            for (const auto& v : refs) r.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size())));
            return point_mass_fid(r, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<long>(x.size())));
        },
        py::arg("reference_features"), py::arg("generated_features"));

    m.def(
        "write_fixture",
        [](const std::filesystem::path& dir, std::uint64_t seed) {
            write_fixture_workdir(dir, seed);
            return dir / "pipeline.json";
        },
        py::arg("directory"), py::arg("seed") = 2026);
    m.def(
        "run_pipeline",
        [](const std::filesystem::path& config_path, const std::string& stages, bool force) {
            auto cfg = PipelineConfig::load(config_path);
            cfg.apply_env();
            RunOptions ro;
            ro.force = force;
            PipelineResult r;
            {
                py::gil_scoped_release release;
                r = run_pipeline(cfg, parse_stages(stages), ro);
            }
            py::list out;
            for (const auto& s : r.stages) {
                py::dict d;
                d["stage"] = std::string(to_string(s.stage));
                d["skipped"] = s.skipped;
                d["manifest"] = py::module_::import("json").attr("loads")(s.manifest.dump());
                out.append(d);
            }
            py::dict res;
            res["exit_code"] = r.exit_code;
            res["message"] = r.message;
            res["stages"] = out;
            return res;
        },
        py::arg("config"), py::arg("stages") = "all", py::arg("force") = false);
}
