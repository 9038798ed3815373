#include "badhash/api.hpp"
#include "badhash/error.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
namespace api = badhash::api;

PYBIND11_MODULE(_badhash, m) {
    m.doc() = "Clean-label backdoor experiments on deep hashing retrieval";

    static py::exception<badhash::Error> error(m, "Error");
    static py::exception<badhash::ConfigError> config_error(m, "ConfigError", error.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const badhash::ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const badhash::Error& e) {
            py::set_error(error, e.what());
        }
    });

    m.def("hamming_distance", &api::hamming_distance, py::arg("a"), py::arg("b"));
    m.def("binarize", &api::binarize, py::arg("relaxed"));
    m.def("average_precision", &api::average_precision, py::arg("relevances"), py::arg("k"));
    m.def("mean_average_precision", &api::mean_average_precision, py::arg("queries"), py::arg("query_labels"),
          py::arg("database"), py::arg("database_labels"), py::arg("topk") = 1000);
    m.def("t_map", &api::t_map, py::arg("queries"), py::arg("target_label"), py::arg("database"),
          py::arg("database_labels"), py::arg("topk") = 1000);
    m.def("rank", &api::rank, py::arg("query"), py::arg("database"), py::arg("k"));
    m.def("hadamard_centers", &api::hadamard_centers, py::arg("classes"), py::arg("code_length"), py::arg("seed") = 0);
    m.def("smooth_label", &api::smooth_label, py::arg("source_class"), py::arg("class_count"), py::arg("epsilon"));

    py::class_<api::ImagePairMetrics>(m, "ImagePairMetrics")
        .def_readonly("mse", &api::ImagePairMetrics::mse)
        .def_readonly("psnr", &api::ImagePairMetrics::psnr)
        .def_readonly("ssim", &api::ImagePairMetrics::ssim);
    m.def("image_metrics", &api::image_metrics, py::arg("a"), py::arg("b"), py::arg("shape"));
    m.def("psnr_from_mse", &api::psnr_from_mse, py::arg("mse"));

    m.def("write_code_dump", &api::write_code_dump, py::arg("path"), py::arg("codes"));
    m.def("read_code_dump", &api::read_code_dump, py::arg("path"));
    m.def("make_desk_dataset", &api::make_desk_dataset, py::arg("dir"), py::arg("classes"), py::arg("first_family") = 0,
          py::arg("per_class") = 500, py::arg("side") = 32, py::arg("seed") = 0);

    const auto release = py::call_guard<py::gil_scoped_release>();
    m.def("load_config", &api::load_config, py::arg("path"), py::arg("seed") = py::none(), py::arg("out") = py::none(),
          py::arg("overrides") = std::vector<std::string>{});
    m.def("run_pipeline", &api::run_pipeline, py::arg("config"), py::arg("seed") = py::none(),
          py::arg("out") = py::none(), py::arg("overrides") = std::vector<std::string>{}, release);
    m.def("run_comparison", &api::run_comparison, py::arg("config"), py::arg("seed") = py::none(),
          py::arg("out") = py::none(), py::arg("overrides") = std::vector<std::string>{}, release);
}
