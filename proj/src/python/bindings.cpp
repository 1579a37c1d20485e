/*
 * Copyright 2026 The gpufp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpufp/device_model.hpp"
#include "gpufp/fingerprint.hpp"
#include "gpufp/geoloc.hpp"
#include "gpufp/harness.hpp"
#include "gpufp/netsim.hpp"
#include "gpufp/protocol.hpp"
#include "gpufp/registry.hpp"

namespace py = pybind11;
using namespace gpufp;

namespace {

std::vector<std::uint8_t> to_vec(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

// (device, registration_index, fingerprint) tuples; the fingerprints must
// outlive the returned entries.
std::vector<GalleryEntry> gallery_from(const std::vector<std::tuple<std::uint64_t, std::uint32_t, const Fingerprint*>>& g) {
  std::vector<GalleryEntry> out;
  out.reserve(g.size());
  for (const auto& [d, i, fp] : g) out.push_back({DeviceId{d}, i, fp});
  return out;
}

py::dict accuracy_dict(const AccuracyReport& r) {
  py::dict d;
  d["approach"] = r.approach;
  d["trials"] = r.trials;
  d["correct"] = r.correct;
  d["accuracy"] = r.accuracy;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  return d;
}

py::dict separation_dict(const SeparationSummary& s) {
  py::dict d;
  d["within_count"] = s.within_count;
  d["cross_count"] = s.cross_count;
  d["median_within"] = s.median_within;
  d["median_cross"] = s.median_cross;
  d["max_within"] = s.max_within;
  d["min_cross"] = s.min_cross;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "GPU fingerprint re-identification and location verification (simulated).";

  auto error = py::register_exception<Error>(m, "Error");
  py::register_exception<DecodeError>(m, "DecodeError", error.ptr());

  py::class_<Seed>(m, "Seed")
      .def(py::init<>())
      .def(py::init([](std::uint64_t hi, std::uint64_t lo) { return Seed{hi, lo}; }), py::arg("hi"), py::arg("lo"))
      .def_static("from_hex", &seed_from_hex)
      .def_readwrite("hi", &Seed::hi)
      .def_readwrite("lo", &Seed::lo)
      .def("hex", [](const Seed& s) { return to_hex(s); })
      .def("__eq__", [](const Seed& a, const Seed& b) { return a == b; })
      .def("__hash__", [](const Seed& s) { return std::hash<Seed>{}(s); })
      .def("__repr__", [](const Seed& s) { return "Seed('" + to_hex(s) + "')"; });

  py::class_<SimParams>(m, "SimParams")
      .def(py::init<>())
      .def_readwrite("n_sms", &SimParams::n_sms)
      .def_readwrite("n_rounds", &SimParams::n_rounds)
      .def_readwrite("sync_interval", &SimParams::sync_interval)
      .def_readwrite("sigma_profile", &SimParams::sigma_profile)
      .def_readwrite("sigma_jitter", &SimParams::sigma_jitter)
      .def_readwrite("sigma_seed_delay", &SimParams::sigma_seed_delay)
      .def_readwrite("sigma_drift", &SimParams::sigma_drift)
      .def_readwrite("compute_time_mean", &SimParams::compute_time_mean)
      .def_readwrite("compute_time_jitter", &SimParams::compute_time_jitter)
      .def("validate", &SimParams::validate);

  py::class_<DeviceProfile>(m, "DeviceProfile")
      .def_property_readonly("device_id", [](const DeviceProfile& p) { return p.device_id().value; })
      .def_property_readonly("sm_offsets", &DeviceProfile::sm_offsets);

  m.def("create_device",
        [](std::uint64_t rng_seed, const SimParams& params, std::optional<std::uint64_t> device_id) {
          return create_device(rng_seed, params, DeviceId{device_id.value_or(rng_seed)});
        },
        py::arg("rng_seed"), py::arg("params") = SimParams{}, py::arg("device_id") = py::none());

  py::class_<Fingerprint>(m, "Fingerprint")
      .def(py::init([](const Seed& seed, std::uint32_t n_sms, std::uint32_t n_rounds, std::vector<std::uint32_t> e) {
             if (e.size() != Layout{n_sms, n_rounds}.size()) fail(ErrorKind::kDimension, "element count does not match layout");
             return Fingerprint{seed, Layout{n_sms, n_rounds}, std::move(e)};
           }),
           py::arg("seed"), py::arg("n_sms"), py::arg("n_rounds"), py::arg("elements"))
      .def_readonly("seed", &Fingerprint::seed)
      .def_property_readonly("n_sms", [](const Fingerprint& f) { return f.layout.n_sms; })
      .def_property_readonly("n_rounds", [](const Fingerprint& f) { return f.layout.n_rounds; })
      .def_readonly("elements", &Fingerprint::elements)
      .def("at", &Fingerprint::at, py::arg("sm"), py::arg("round"))
      .def("__eq__", [](const Fingerprint& a, const Fingerprint& b) { return a == b; })
      .def("__len__", [](const Fingerprint& f) { return f.elements.size(); });

  m.def("run_fingerprint",
        [](const DeviceProfile& p, const Seed& s, std::uint64_t nonce, const SimParams& params) {
          auto r = run_fingerprint(p, s, nonce, params);
          return py::make_tuple(std::move(r.fingerprint), r.simulated_duration);
        },
        py::arg("profile"), py::arg("seed"), py::arg("run_nonce"), py::arg("params") = SimParams{},
        "Returns (fingerprint, simulated_duration_s).");

  m.def("l1_distance", &l1_distance);

  py::class_<MatchResult>(m, "MatchResult")
      .def_property_readonly("matched_device", [](const MatchResult& r) { return r.matched_device.value; })
      .def_readonly("matched_index", &MatchResult::matched_index)
      .def_readonly("matched_distance", &MatchResult::matched_distance)
      .def_readonly("correct", &MatchResult::correct);

  m.def("reidentify",
        [](const Fingerprint& q, std::uint64_t truth,
           const std::vector<std::tuple<std::uint64_t, std::uint32_t, const Fingerprint*>>& g) {
          return reidentify(q, DeviceId{truth}, gallery_from(g));
        },
        py::arg("query"), py::arg("query_device"), py::arg("gallery"),
        "gallery: list of (device_id, registration_index, Fingerprint).");
  m.def("reidentify_paired",
        [](const Fingerprint& a, const Fingerprint& b, std::uint64_t truth,
           const std::vector<std::tuple<std::uint64_t, std::uint32_t, const Fingerprint*>>& g) {
          return reidentify_paired(a, b, DeviceId{truth}, gallery_from(g));
        },
        py::arg("first"), py::arg("second"), py::arg("query_device"), py::arg("gallery"));

  py::class_<TimingPolicy>(m, "TimingPolicy")
      .def(py::init<>())
      .def_readwrite("compute_time_min", &TimingPolicy::compute_time_min)
      .def_readwrite("compute_time_max", &TimingPolicy::compute_time_max)
      .def_readwrite("signal_speed", &TimingPolicy::signal_speed)
      .def_readwrite("slack", &TimingPolicy::slack)
      .def_readwrite("path_speed", &TimingPolicy::path_speed);

  m.def("bound_distance",
        [](double rtt_s, const TimingPolicy& p) { return bound_distance(rtt_s, p).max_distance_km; },
        py::arg("rtt_s"), py::arg("policy") = TimingPolicy{}, "Upper bound in km on the device distance.");

  m.def("feasible_region",
        [](const std::vector<std::tuple<double, double, double>>& disks) {
          std::vector<Disk> d;
          for (const auto& [x, y, r] : disks) d.push_back({{x, y}, r});
          const FeasibleRegion region(std::move(d));
          py::dict out;
          out["empty"] = region.empty();
          if (!region.empty()) out["witness"] = py::make_tuple(region.witness().x, region.witness().y);
          out["diameter_km"] = region.diameter_estimate();
          return out;
        },
        py::arg("disks"), "disks: list of (x_km, y_km, radius_km).");

  m.attr("PROTOCOL_VERSION") = kProtocolVersion;
  m.def("encode_challenge",
        [](std::uint64_t id, const Seed& seed, std::int64_t issued_at_ns) {
          return to_bytes(encode_challenge(ChallengeMessage{kProtocolVersion, id, seed, issued_at_ns}));
        },
        py::arg("challenge_id"), py::arg("seed"), py::arg("issued_at_ns") = 0);
  m.def("decode_challenge", [](const py::bytes& b) {
    const auto msg = decode_challenge(to_vec(b));
    return py::make_tuple(msg.challenge_id, msg.seed, msg.issued_at_ns);
  });
  m.def("encode_response",
        [](std::uint64_t id, const Fingerprint& fp) { return to_bytes(encode_response(make_response(id, fp))); },
        py::arg("challenge_id"), py::arg("fingerprint"));
  m.def("decode_response",
        [](const py::bytes& b, const Seed& seed) {
          const auto msg = decode_response(to_vec(b));
          return py::make_tuple(msg.challenge_id, to_fingerprint(msg, seed));
        },
        py::arg("data"), py::arg("seed"), "Returns (challenge_id, Fingerprint); the seed is the verifier's.");

  m.def("clopper_pearson",
        [](std::uint64_t k, std::uint64_t n, double conf) {
          const auto ci = clopper_pearson(k, n, conf);
          return py::make_tuple(ci.low, ci.high);
        },
        py::arg("k"), py::arg("n"), py::arg("confidence") = 0.95);

  m.def("evaluate",
        [](const std::string& config_json) {
          const ToolConfig c = parse_tool_config(config_json.empty() ? "{}" : config_json);
          EvaluationResult r;
          {
            py::gil_scoped_release release;
            r = run_evaluation(c.experiment);
          }
          py::dict out;
          out["single"] = accuracy_dict(r.single);
          out["paired"] = accuracy_dict(r.paired);
          out["n_splits"] = r.n_splits;
          out["paired_dominates"] = r.paired_dominates;
          out["gpu_separation"] = separation_dict(r.census.gpu_summary);
          out["seed_separation"] = separation_dict(r.census.seed_summary);
          return out;
        },
        py::arg("config_json") = "", "Runs the accuracy experiment. The config uses the CLI's JSON format.");

  m.def("scenario_names", &builtin_scenario_names);
  m.def("run_builtin_scenario",
        [](const std::string& name, std::uint64_t rng_seed, std::uint32_t trials, const std::string& config_json) {
          const ToolConfig c = parse_tool_config(config_json.empty() ? "{}" : config_json);
          ScenarioReport report;
          {
            py::gil_scoped_release release;
            auto setup = builtin_scenario(name, rng_seed, trials, c);
            report = run_scenario(setup.scenario, setup.registry, setup.policy, setup.options);
          }
          py::dict out;
          for (bool attack : {false, true}) {
            py::dict d;
            d["rounds"] = report.count(attack);
            d["accepted"] = report.accepted(attack);
            d["replay_alarms"] = report.replay_alarms(attack);
            d["errors"] = report.errors(attack);
            out[attack ? "attack" : "honest"] = d;
          }
          out["jsonl"] = report_jsonl(report);
          return out;
        },
        py::arg("name"), py::arg("rng_seed") = 1, py::arg("trials") = 20, py::arg("config_json") = "");
}
