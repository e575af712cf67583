#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fermi/agent.hpp"
#include "fermi/baselines.hpp"
#include "fermi/config.hpp"
#include "fermi/env.hpp"
#include "fermi/errors.hpp"
#include "fermi/experiment.hpp"
#include "fermi/metrics.hpp"
#include "fermi/orchestrator.hpp"
#include "fermi/reward.hpp"
#include "fermi/secure_agg.hpp"

namespace py = pybind11;
using namespace fermi;

namespace {

py::dict row_to_dict(const MetricsRow& r) {
  py::dict d;
  d["episode"] = r.episode;
  for (std::size_t c = 0; c < kNumMetricColumns; ++c) d[py::str(std::string(metric_names()[c]))] = metric_value(r, c);
  return d;
}

py::dict outcome_to_dict(const StepOutcome& o) {
  py::dict d;
  d["has_task"] = o.has_task;
  d["resolved"] = o.resolved;
  d["task_succeeded"] = o.task_succeeded;
  d["offloaded"] = o.offloaded;
  d["latency_s"] = o.latency_s;
  d["deadline_s"] = o.deadline_s;
  d["energy_tx"] = o.energy_tx;
  d["energy_comp"] = o.energy_comp;
  d["energy_spent"] = o.energy_spent;
  d["mac_attempted"] = o.mac_attempted;
  d["mac_succeeded"] = o.mac_succeeded;
  d["bits_delivered"] = o.bits_delivered;
  d["se_bps_hz"] = o.se_bps_hz;
  return d;
}

std::vector<std::uint8_t> to_vec(const secagg::Bytes32& b) { return {b.begin(), b.end()}; }

secagg::Bytes32 to_bytes32(const std::vector<std::uint8_t>& v) {
  if (v.size() != 32) throw ShapeError("expected 32 bytes");
  secagg::Bytes32 b;
  std::copy(v.begin(), v.end(), b.begin());
  return b;
}

}  // namespace

PYBIND11_MODULE(_fermi6g, m) {
  m.doc() = "Federated multi-agent DRQN simulator for 6G edge offloading";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<RoundAborted>(m, "RoundAborted", PyExc_RuntimeError);
  py::register_exception<KeyError>(m, "KeyAgreementError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<EnvConfig>(m, "EnvConfig")
      .def(py::init<>())
      .def_readwrite("num_agents", &EnvConfig::num_agents)
      .def_readwrite("num_channels", &EnvConfig::num_channels)
      .def_readwrite("steps", &EnvConfig::steps)
      .def_readwrite("energy_threshold", &EnvConfig::energy_threshold)
      .def_readwrite("noise_std", &EnvConfig::noise_std)
      .def_readwrite("retry_prob", &EnvConfig::retry_prob)
      .def_readwrite("initial_energy", &EnvConfig::initial_energy);

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("env", &TrainingConfig::env)
      .def_readwrite("episodes", &TrainingConfig::episodes)
      .def_readwrite("seed", &TrainingConfig::seed)
      .def_readwrite("lr", &TrainingConfig::lr)
      .def_readwrite("gamma", &TrainingConfig::gamma)
      .def_readwrite("agg_interval", &TrainingConfig::agg_interval)
      .def_readwrite("hidden", &TrainingConfig::hidden)
      .def_readwrite("sequence_length", &TrainingConfig::sequence_length)
      .def_readwrite("batch", &TrainingConfig::batch)
      .def_readwrite("buffer", &TrainingConfig::buffer)
      .def_property(
          "policy", [](const TrainingConfig& c) { return std::string(to_string(c.policy)); },
          [](TrainingConfig& c, const std::string& p) { c.policy = parse_policy(p); })
      .def("validate", &TrainingConfig::validate)
      .def("__eq__", [](const TrainingConfig& a, const TrainingConfig& b) { return a == b; });

  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("print_config", &print_config, py::arg("config"));

  py::class_<Environment>(m, "Environment")
      .def(py::init<EnvConfig>())
      .def("reset", [](Environment& e, std::uint64_t seed) { e.reset(seed); }, py::arg("seed"))
      .def("observe", [](const Environment& e, int i) {
        const auto o = e.observe(i);
        return std::vector<double>(o.features.begin(), o.features.end());
      })
      .def("step",
           [](Environment& e, const std::vector<std::tuple<int, int, int>>& acts) {
             std::vector<ActionVector> a;
             for (auto [app, mac, cpu] : acts) {
               if (app != 0 && app != 1) throw ShapeError("app decision must be 0 or 1");
               a.push_back({static_cast<AppDecision>(app), mac, cpu});
             }
             py::list out;
             for (const auto& o : e.step(a)) out.append(outcome_to_dict(o));
             return out;
           })
      .def("energy", [](const Environment& e, int i) { return e.agent(i).energy; })
      .def("position", [](const Environment& e, int i) { return e.agent(i).position; })
      .def("jain_fairness", &Environment::jain_fairness)
      .def("serialize", &Environment::serialize)
      .def_property_readonly("num_agents", &Environment::num_agents)
      .def_property_readonly("step_index", &Environment::current_step);

  m.def("jain_index", [](const std::vector<double>& x) { return jain_index(x); });
  m.def("channel_entropy", [](const std::vector<double>& p, std::size_t k) { return channel_entropy(p, k); });
  m.def("round_robin_mac", &round_robin_mac);
  m.def("least_used_channel", [](const std::vector<long>& loads) { return least_used_channel(loads); });
  m.def("decay_epsilon", &decay_epsilon, py::arg("eps"), py::arg("eps_end") = 0.05, py::arg("decay") = 0.995);

  auto sa = m.def_submodule("secagg", "pairwise-mask secure aggregation");
  sa.def("keypair_from_secret", [](const std::vector<std::uint8_t>& s) {
    const auto kp = secagg::keypair_from_secret(to_bytes32(s));
    return py::bytes(reinterpret_cast<const char*>(kp.public_key.data()), 32);
  });
  sa.def("derive_pair_seed", [](const std::vector<std::uint8_t>& secret, const std::vector<std::uint8_t>& peer,
                                std::uint32_t round, std::uint16_t me, std::uint16_t other) {
    const auto s = secagg::derive_pair_seed(to_bytes32(secret), to_bytes32(peer), round, me, other);
    return py::bytes(reinterpret_cast<const char*>(s.data()), 32);
  });
  sa.def("expand_mask", [](const std::vector<std::uint8_t>& seed, std::size_t dim) {
    return secagg::expand_mask(to_bytes32(seed), dim);
  });
  sa.def("quantize", [](const std::vector<double>& x) { return secagg::quantize(x); });
  sa.def("dequantize_mean", [](const std::vector<std::uint32_t>& s, std::size_t n) { return secagg::dequantize_mean(s, n); });
  sa.def("eligibility_filter", [](const std::vector<double>& e, double th) { return secagg::eligibility_filter(e, th); });
  sa.def("masked_average",
         [](const std::vector<std::vector<double>>& params, std::uint32_t round) {
           // Full protocol run over fresh keys; returns the released average.
           const std::size_t n = params.size();
           std::vector<secagg::KeyPair> keys;
           for (std::size_t i = 0; i < n; ++i) keys.push_back(secagg::keygen());
           std::vector<std::uint16_t> ids;
           for (std::size_t i = 0; i < n; ++i) ids.push_back(static_cast<std::uint16_t>(i));
           secagg::Aggregator agg;
           agg.begin_round(round, ids, n ? params.front().size() : 0);
           for (std::uint16_t i = 0; i < n; ++i) {
             std::map<std::uint16_t, secagg::Seed> seeds;
             for (std::uint16_t j = 0; j < n; ++j)
               if (j != i) seeds[j] = secagg::derive_pair_seed(keys[i].secret, keys[j].public_key, round, i, j);
             agg.submit(i, secagg::encode(secagg::mask_update(secagg::quantize(params[i]), i, round, ids, seeds)));
           }
           return agg.finalize();
         },
         py::arg("params"), py::arg("round") = 1);

  py::class_<Trainer>(m, "Trainer")
      .def(py::init<TrainingConfig>())
      .def("train", [](Trainer& t) {
        py::list out;
        for (const auto& r : t.train()) out.append(row_to_dict(r));
        return out;
      })
      .def("evaluate", [](Trainer& t, int episodes, std::uint64_t seed) {
        py::list out;
        for (const auto& r : t.evaluate(episodes, seed)) out.append(row_to_dict(r));
        return out;
      })
      .def("agent_params", [](const Trainer& t, int i) {
        const auto p = t.agent(i).net().params();
        return std::vector<double>(p.begin(), p.end());
      })
      .def_property_readonly("global_params", &Trainer::global_params)
      .def_property_readonly("epsilon", &Trainer::epsilon);

  m.def("metrics_csv_header", &metrics_csv_header);
  m.def("run_experiment", [](const TrainingConfig& c, const std::filesystem::path& out) {
    py::list rows;
    for (const auto& r : run_experiment(c, out).metrics) rows.append(row_to_dict(r));
    return rows;
  });
}
