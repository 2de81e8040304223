// Copyright 2026 The fldebug Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fldebug/error.hpp"
#include "fldebug/experiments.hpp"
#include "fldebug/faultloc/localization.hpp"
#include "fldebug/faultloc/selection.hpp"
#include "fldebug/fl/fedavg.hpp"
#include "fldebug/server/api.hpp"
#include "fldebug/server/controller.hpp"
#include "fldebug/server/json_views.hpp"

namespace py = pybind11;
using namespace fldebug;

namespace {

py::array_t<float> to_array(std::span<const float> v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

model::ModelSnapshot from_array(const model::ModelArch& arch, const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  return model::ModelSnapshot(arch, std::vector<float>(a.data(), a.data() + a.size()));
}

/// The HTTP route table, driven in-process.
class Api {
 public:
  explicit Api(const std::string& telemetry_dir)
      : controller_(telemetry::TelemetryStore::open(telemetry_dir)), router_(controller_) {}

  py::tuple request(const std::string& method, const std::string& target, const std::string& body) {
    server::ApiResponse r;
    {
      py::gil_scoped_release release;
      r = router_.handle(method, target, body);
    }
    return py::make_tuple(r.status, r.body.dump());
  }

 private:
  server::Controller controller_;
  server::ApiRouter router_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated learning replay debugger";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() { return py::exception<Error>(m, "FldebugError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string message = std::string(to_string(e.code())) + ": " + e.what();
      PyErr_SetString(error_type.get_stored().ptr(), message.c_str());
    }
  });

  m.def(
      "run_scenario",
      [](const std::string& telemetry_dir, std::size_t clients, const std::set<ClientId>& faulty, double noise_rate,
         int rounds, std::uint64_t seed, const std::vector<std::size_t>& arch, int epochs) {
        experiments::ScenarioSpec spec;
        spec.num_clients = clients;
        spec.faulty = faulty;
        spec.noise_rate = noise_rate;
        spec.rounds = rounds;
        spec.seed = seed;
        spec.arch = model::ModelArch{arch};
        spec.epochs = epochs;
        py::gil_scoped_release release;
        const auto cfg = experiments::scenario_config(spec);
        const fl::Simulator sim(cfg);
        auto store = telemetry::TelemetryStore::create(telemetry_dir, sim.initial_global(), fl::session_config_to_yaml(cfg));
        const auto global = sim.run_session(store);
        return fl::evaluate(global, sim.test_set());
      },
      py::arg("telemetry_dir"), py::arg("clients") = 10, py::arg("faulty") = std::set<ClientId>{3},
      py::arg("noise_rate") = 1.0, py::arg("rounds") = 3, py::arg("seed") = 0,
      py::arg("arch") = std::vector<std::size_t>{64, 32, 10}, py::arg("epochs") = 10,
      "Trains a synthetic federation into a new telemetry store; returns the final test accuracy.");

  m.def(
      "fedavg",
      [](const std::vector<py::array_t<float, py::array::c_style | py::array::forcecast>>& params,
         const std::vector<double>& weights) {
        require(!params.empty(), "fedavg: no snapshots");
        const auto n = static_cast<std::size_t>(params[0].size());
        require(n >= 2, "fedavg: vectors need at least 2 elements");
        // Any arch with n parameters; fedavg is elementwise.
        const model::ModelArch arch{{n - 1, 1}};
        std::vector<model::ModelSnapshot> snaps;
        for (const auto& p : params) snaps.push_back(from_array(arch, p));
        return to_array(fl::fedavg(snaps, weights).params());
      },
      py::arg("params"), py::arg("weights"), "Weighted parameter average with 64-bit accumulation.");

  py::class_<telemetry::TelemetryStore>(m, "Store")
      .def_static("open", [](const std::string& root) { return telemetry::TelemetryStore::open(root); })
      .def_property_readonly("timeline", &telemetry::TelemetryStore::timeline)
      .def_property_readonly("latest_round", &telemetry::TelemetryStore::latest_round)
      .def_property_readonly("arch", [](const telemetry::TelemetryStore& s) { return s.arch().layer_sizes; })
      .def("branches", &telemetry::TelemetryStore::branches)
      .def("head", &telemetry::TelemetryStore::head)
      .def("open_branch", &telemetry::TelemetryStore::open_branch)
      .def("participants", [](const telemetry::TelemetryStore& s, RoundId r) { return s.load_round(r)->participant_ids; })
      .def("global_params",
           [](const telemetry::TelemetryStore& s, RoundId r) { return to_array(s.load_round(r)->global_snapshot->params()); })
      .def("client_params",
           [](const telemetry::TelemetryStore& s, RoundId r, ClientId c) {
             return to_array(s.load_round(r)->client_snapshots.at(c)->params());
           })
      .def("dataset_sizes",
           [](const telemetry::TelemetryStore& s, RoundId r) {
             const auto rec = s.load_round(r);
             std::vector<std::size_t> out;
             for (ClientId c : rec->participant_ids) out.push_back(rec->client_metrics.at(c).dataset_size);
             return out;
           })
      .def("global_digest", [](const telemetry::TelemetryStore& s, RoundId r) { return s.load_round(r)->global_snapshot->digest(); })
      .def("verify_integrity", [](const telemetry::TelemetryStore& s) {
        const auto report = s.verify_integrity();
        py::dict d;
        d["ok"] = report.ok();
        d["rounds_checked"] = report.rounds_checked;
        d["failed_rounds"] = report.failed_rounds;
        d["messages"] = report.messages;
        return d;
      });

  m.def(
      "localize",
      [](const telemetry::TelemetryStore& store, RoundId round, std::size_t kappa, std::optional<std::size_t> eta,
         float threshold, std::uint64_t seed) {
        std::string json;
        {
          py::gil_scoped_release release;
          const auto clients = faultloc::clients_of(*store.load_round(round));
          faultloc::SelectionConfig sel;
          sel.kappa = kappa;
          sel.eta = eta;
          sel.seed = seed;
          faultloc::LocalizationConfig cfg;
          cfg.activation_threshold = threshold;
          const auto suite = faultloc::select_test_inputs(clients, sel);
          json = server::report_json(faultloc::localize(clients, suite, cfg), suite).dump();
        }
        return json;
      },
      py::arg("store"), py::arg("round"), py::arg("kappa") = 10, py::arg("eta") = std::nullopt,
      py::arg("threshold") = model::kDefaultActivationThreshold, py::arg("seed") = 0,
      "Localizes the faulty client of a recorded round; returns the report as JSON text.");

  py::class_<Api>(m, "Api")
      .def(py::init<const std::string&>(), py::arg("telemetry_dir"))
      .def("request", &Api::request, py::arg("method"), py::arg("target"), py::arg("body") = "",
           "Routes one request; returns (status, JSON text).");
}
