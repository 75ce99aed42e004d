#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "refinery/code_model.hpp"
#include "refinery/mcts.hpp"
#include "refinery/refiner.hpp"
#include "refinery/safety.hpp"
#include "refinery/validation.hpp"

namespace py = pybind11;
using namespace refinery;

PYBIND11_MODULE(_refinery, m) {
    m.doc() = "core operations of the refinement engine";

    py::class_<UnsafeConstructCounts>(m, "UnsafeConstructCounts")
        .def(py::init<>())
        .def_readwrite("rpc", &UnsafeConstructCounts::rpc)
        .def_readwrite("rpr", &UnsafeConstructCounts::rpr)
        .def_readwrite("luc", &UnsafeConstructCounts::luc)
        .def_readwrite("uce", &UnsafeConstructCounts::uce)
        .def_readwrite("utc", &UnsafeConstructCounts::utc)
        .def("total", &UnsafeConstructCounts::total)
        .def("__repr__", [](const UnsafeConstructCounts& c) {
            return "UnsafeConstructCounts(rpc=" + std::to_string(c.rpc) +
                   ", rpr=" + std::to_string(c.rpr) + ", luc=" + std::to_string(c.luc) +
                   ", uce=" + std::to_string(c.uce) + ", utc=" + std::to_string(c.utc) + ")";
        });

    py::class_<SafetyBaseline>(m, "SafetyBaseline")
        .def(py::init<>())
        .def_readwrite("counts0", &SafetyBaseline::counts0)
        .def_readwrite("linter0", &SafetyBaseline::linter0);

    m.def("count_source", &count_source, py::arg("source"),
          "count the five unsafe-construct categories in one source text");
    m.def(
        "count_project",
        [](const std::map<std::string, std::string>& files) {
            ProjectSnapshot p;
            p.files = files;
            return count_constructs(p);
        },
        py::arg("files"), "count over a {path: text} mapping (only .rs entries)");
    m.def("safety_ratio", &safety_ratio, py::arg("counts"), py::arg("baseline"),
          py::arg("compilable"));
    m.def("idiomaticity", &idiomaticity, py::arg("linter_warnings"), py::arg("baseline"));
    m.def(
        "compile_score",
        [](int error_count) {
            CompileOutcome o;
            o.errors.resize(static_cast<std::size_t>(error_count));
            return compile_score(o);
        },
        py::arg("error_count"));
    m.def("node_reward", &node_reward, py::arg("c_prev"), py::arg("s_prev"), py::arg("c_curr"),
          py::arg("s_curr"), py::arg("w"));
    m.def(
        "uct_score",
        [](double q, std::int64_t visits, std::int64_t parent_visits, double c) {
            SearchNode n;
            n.q_value = q;
            n.visits = visits;
            return uct_score(n, parent_visits, c);
        },
        py::arg("q"), py::arg("visits"), py::arg("parent_visits"), py::arg("uct_c"));
    m.def("postprocess", &postprocess, py::arg("response"),
          "extract the candidate body between FUNC delimiters");

    py::class_<CallSite>(m, "CallSite")
        .def(py::init<>())
        .def_readwrite("caller_id", &CallSite::caller_id)
        .def_readwrite("snippet", &CallSite::snippet);

    py::class_<FunctionUnit>(m, "FunctionUnit")
        .def(py::init<>())
        .def_readwrite("id", &FunctionUnit::id)
        .def_readwrite("name", &FunctionUnit::name)
        .def_readwrite("body", &FunctionUnit::body)
        .def_readwrite("file", &FunctionUnit::file)
        .def_readwrite("callees", &FunctionUnit::callees)
        .def_readwrite("call_sites", &FunctionUnit::call_sites)
        .def_readwrite("globals", &FunctionUnit::globals)
        .def_readwrite("imports", &FunctionUnit::imports);

    m.def("build_prompt", &build_prompt, py::arg("unit"));

    py::class_<ProjectSnapshot>(m, "ProjectSnapshot")
        .def(py::init<>())
        .def_readonly("files", &ProjectSnapshot::files)
        .def_property_readonly("function_ids",
                               [](const ProjectSnapshot& p) {
                                   std::vector<std::string> ids;
                                   for (const auto& [id, u] : p.function_index) ids.push_back(id);
                                   return ids;
                               })
        .def("unit", &ProjectSnapshot::unit, py::return_value_policy::copy);

    m.def("load_project", &load_project, py::arg("dir"));
    m.def("substitute", &substitute, py::arg("project"), py::arg("unit_id"), py::arg("new_body"));
    m.def(
        "index_functions",
        [](const ProjectSnapshot& p) { return index_functions(p); },
        py::arg("project"));
    m.def(
        "order_by_dependency",
        [](const std::vector<FunctionUnit>& units) { return order_by_dependency(units).ordered_ids; },
        py::arg("units"));
}
