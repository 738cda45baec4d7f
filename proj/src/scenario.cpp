// Copyright 2026 The Trainsim Authors.
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

#include "trainsim/scenario.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trainsim/errors.hpp"
#include "trainsim/fdp.hpp"

namespace trainsim {

using json = nlohmann::json;

namespace {

// nlohmann reports byte offsets; turn them into line:column for diagnostics.
std::pair<int, int> line_col(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

ValencyDist valency_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "constant") return ValencyDist::Constant(j.at("value"));
  if (kind == "poisson_truncated")
    return ValencyDist::PoissonTruncated(j.at("mean"), j.value("max", 0));
  if (kind == "empirical")
    return ValencyDist::Empirical(
        j.at("values").get<std::vector<std::uint32_t>>(),
        j.value("weights", std::vector<double>{}));
  throw ValidationError("unknown valency_dist kind: " + kind);
}

OptimizerKind optimizer_from_json(const json& j) {
  OptimizerKind o;
  const std::string kind = j.at("kind");
  if (kind == "element_wise")
    o.kind = OptimizerClass::kElementWise;
  else if (kind == "row_wise")
    o.kind = OptimizerClass::kRowWise;
  else
    throw ValidationError("unknown optimizer kind: " + kind);
  o.params_width_multiplier = j.value("params_width_multiplier", 1);
  return o;
}

EmbeddingTableSpec table_from_json(const json& j) {
  EmbeddingTableSpec t;
  t.name = j.at("name");
  t.vocab_size = j.at("vocab_size");
  t.dim = j.at("dim");
  t.mean_valency = j.value("mean_valency", 1.0);
  if (j.contains("valency_dist"))
    t.valency_dist = valency_from_json(j.at("valency_dist"));
  else
    t.valency_dist = ValencyDist::Constant(1);
  t.zipf_s = j.value("zipf_s", 0.0);
  if (j.contains("optimizer")) t.optimizer = optimizer_from_json(j.at("optimizer"));
  t.bytes_per_element = j.value("bytes_per_element", 4);
  return t;
}

ModelSpec model_from_json(const json& j) {
  ModelSpec m;
  m.name = j.at("name");
  for (const auto& t : j.value("tables", json::array()))
    m.tables.push_back(table_from_json(t));
  m.dense_step_time_us = j.value("dense_step_time_us", 0.0);
  if (j.contains("features"))
    for (const auto& [feature, table] : j.at("features").items())
      m.features[feature] = table.get<std::string>();
  m.validate();
  return m;
}

RowScheme scheme_from_string(const std::string& s) {
  if (s == "block") return RowScheme::kBlock;
  if (s == "cyclic") return RowScheme::kCyclic;
  if (s == "random_hash") return RowScheme::kRandomHash;
  throw ValidationError("unknown row scheme: " + s);
}

PartitionerConfig partitioner_from_json(const json& j) {
  PartitionerConfig c;
  c.node_count = j.at("node_count");
  c.mem_capacity_per_node = j.value("mem_capacity_per_node_bytes", std::int64_t{0});
  c.search_budget = j.value("search_budget", std::int64_t{100'000});
  if (j.contains("column_splits"))
    c.search.column_splits = j.at("column_splits").get<std::vector<std::int32_t>>();
  if (j.contains("row_schemes")) {
    c.search.row_schemes.clear();
    for (const auto& s : j.at("row_schemes"))
      c.search.row_schemes.push_back(scheme_from_string(s.get<std::string>()));
  }
  c.search.narrow_width_threshold = j.value("narrow_width_threshold", 32);
  c.search.narrow_access_penalty = j.value("narrow_access_penalty", 1.25);
  c.search.mem_capacity_per_node = c.mem_capacity_per_node;
  if (j.contains("traffic"))
    for (const auto& [table, rows] : j.at("traffic").items())
      c.traffic[table] = rows.get<std::vector<double>>();
  c.traffic_batch_size = j.value("traffic_batch_size", std::int64_t{1024});
  return c;
}

ExecConfig exec_from_json(const json& j) {
  ExecConfig e;
  e.tc_us = j.value("tc_us", 0.0);
  e.sc_balanced_us = j.value("sc_balanced_us", 0.0);
  e.contention.tc_slowdown = j.value("tc_slowdown", 0.05);
  e.contention.sc_slowdown = j.value("sc_slowdown", 0.10);
  if (j.contains("stale")) {
    const auto& s = j.at("stale");
    StaleTrainConfig cfg;
    cfg.vocab = s.value("vocab", std::int64_t{64});
    cfg.dim = s.value("dim", 8);
    cfg.steps = s.value("steps", std::int64_t{1000});
    cfg.learning_rate = s.value("learning_rate", 0.05);
    cfg.staleness = s.value("staleness", 1);
    cfg.seed = s.value("seed", std::uint64_t{0});
    cfg.zipf_s = s.value("zipf_s", 1.0);
    cfg.target_noise = s.value("target_noise", 0.1);
    e.stale = cfg;
  }
  return e;
}

PsScenarioConfig ps_from_json(const json& j) {
  PsScenarioConfig c;
  c.ps_count = j.at("ps_count");
  c.scheme = scheme_from_string(j.value("scheme", "cyclic"));
  c.n_cores = j.value("n_cores", std::int64_t{1});
  c.batches = j.value("batches", std::int64_t{1});
  c.batch_size = j.value("batch_size", std::int64_t{256});
  c.net.per_rpc_us = j.value("per_rpc_us", 0.0);
  c.net.per_byte_us = j.value("per_byte_us", 0.0);
  c.net.per_row_lookup_us = j.value("per_row_lookup_us", 0.0);
  c.net.id_bytes = j.value("id_bytes", 4);
  return c;
}

SigScenarioConfig sig_from_json(const json& j) {
  SigScenarioConfig c;
  for (const auto& cl : j.value("clients", json::array()))
    c.clients.push_back({cl.at("id"), cl.value("priority", 0)});
  if (j.contains("graphs"))
    for (const auto& [name, g] : j.at("graphs").items())
      c.graphs[name] = sig::TransformGraph::from_json(g.dump());
  for (const auto& s : j.value("submissions", json::array())) {
    SigSubmission sub;
    sub.model = s.at("model");
    sub.pipeline = s.value("pipeline", s.at("model").get<std::string>());
    sub.client = s.value("client", "default");
    sub.graph = s.at("graph");
    sub.range = {s.at("range").at(0), s.at("range").at(1)};
    sub.at = s.value("at", std::int64_t{0});
    c.submissions.push_back(sub);
  }
  if (j.contains("pool")) {
    const auto& p = j.at("pool");
    SigPoolConfig pool;
    pool.components = p.value("components", 10);
    pool.models = p.value("models", 22);
    pool.components_per_model = p.value("components_per_model", pool.components);
    pool.selection = p.value("selection", "shared");
    if (p.contains("range")) pool.range = {p.at("range").at(0), p.at("range").at(1)};
    c.pool = pool;
  }
  c.raw_tokens_per_field = j.value("raw_tokens_per_field", 4);
  c.raw_vocab = j.value("raw_vocab", 64);
  c.ttl = j.value("ttl", std::int64_t{0});
  return c;
}

sim::SimScenario sim_from_json(const json& j) {
  sim::SimScenario s;
  s.epoch_wall_time = j.at("epoch_wall_time_us");
  s.events_total = j.at("events_total");
  s.arrival_rate_per_us = j.value("arrival_rate_per_us", 0.0);
  s.event_coverage_us = j.value("event_coverage_us", std::int64_t{0});
  s.work_unit_size = j.value("work_unit_size", std::int64_t{100});
  s.host_buffer_capacity = j.value("host_buffer_capacity", std::int64_t{1000});
  s.work_unit_read_us = j.value("work_unit_read_us", std::int64_t{2000});
  s.work_unit_transform_us = j.value("work_unit_transform_us", std::int64_t{3000});
  s.service_jitter = j.value("service_jitter", 0.0);
  s.train_us_per_event = j.value("train_us_per_event", std::int64_t{50});
  s.checkpoint_write_us = j.value("checkpoint_write_us", std::int64_t{5000});
  s.restore_us = j.value("restore_us", std::int64_t{5000});
  if (j.contains("autoscale")) {
    const auto& a = j.at("autoscale");
    s.bands.low = a.value("low", 0.3);
    s.bands.high = a.value("high", 0.8);
    s.bands.interval = a.value("interval_us", std::int64_t{10'000});
  }
  s.initial_in_flight = j.value("initial_in_flight", 1);
  s.max_in_flight = j.value("max_in_flight", 64);
  s.chips = j.value("chips", 1);
  s.rejoin_delay_us = j.value("rejoin_delay_us", std::int64_t{20'000});
  s.max_sim_time = j.value("max_sim_time_us", std::int64_t{0});
  for (const auto& f : j.value("faults", json::array())) {
    sim::FaultEvent fe;
    fe.at = f.at("at_us");
    const std::string kind = f.at("kind");
    if (kind == "transient") {
      fe.kind = sim::FaultKind::kTransient;
    } else if (kind == "permanent") {
      fe.kind = sim::FaultKind::kPermanent;
    } else if (kind == "sig_stall") {
      fe.kind = sim::FaultKind::kSigStall;
      fe.stall_duration = f.at("duration_us");
    } else if (kind == "preemption") {
      fe.kind = sim::FaultKind::kPreemption;
      fe.warning = f.at("warning_us");
      fe.job = f.value("job", "trainer");
    } else {
      throw ValidationError("unknown fault kind: " + kind);
    }
    s.faults.push_back(fe);
  }
  return s;
}

TcoScenarioConfig tco_from_json(const json& j) {
  TcoScenarioConfig c;
  const auto& p = j.at("params");
  c.params.tpu_chip = p.value("tpu_chip", 0.0);
  c.params.cpu_core = p.value("cpu_core", 0.0);
  c.params.ram_gib = p.value("ram_gib", 0.0);
  c.params.tray = p.value("tray", 0.0);
  c.params.power_provisioning = p.value("power_provisioning", 0.0);
  c.params.power_delivery = p.value("power_delivery", 0.0);
  c.params.amortization_horizon_days = p.value("amortization_horizon_days", 365.0);
  for (const auto& m : j.at("models")) {
    ResourceProfile r;
    r.model = m.at("name");
    r.tpu_chips = m.value("tpu_chips", 0.0);
    r.tpu_trays = m.value("tpu_trays", 0.0);
    r.reader_cores_sig = m.value("reader_cores_sig", 0.0);
    r.reader_ram_gib_sig = m.value("reader_ram_gib_sig", 0.0);
    r.reader_cores_lig = m.value("reader_cores_lig", 0.0);
    r.reader_ram_gib_lig = m.value("reader_ram_gib_lig", 0.0);
    r.ps_cores = m.value("ps_cores", 0.0);
    r.ps_ram_gib = m.value("ps_ram_gib", 0.0);
    r.provisioned_kw = m.value("provisioned_kw", 0.0);
    r.delivered_kw = m.value("delivered_kw", 0.0);
    c.models.push_back(r);
  }
  if (j.contains("sig_pool")) {
    const auto& sp = j.at("sig_pool");
    c.pool.cores = sp.value("cores", 0.0);
    c.pool.ram_gib = sp.value("ram_gib", 0.0);
    c.pool.sharing_models = sp.value("sharing_models", 1);
  }
  return c;
}

}  // namespace

const ModelSpec& Scenario::model(const std::string& name) const {
  for (const auto& m : models)
    if (m.name == name) return m;
  throw NotFoundError("scenario has no model: " + name);
}

Scenario Scenario::parse(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte);
    throw ValidationError(origin + ":" + std::to_string(line) + ":" +
                          std::to_string(col) + ": " + e.what());
  }
  try {
    Scenario s;
    s.version = j.at("version");
    if (s.version != "1")
      throw ValidationError("unsupported scenario version: " + s.version);
    if (!j.contains("seed")) throw ValidationError("scenario requires a seed");
    s.seed = j.at("seed");
    for (const auto& m : j.value("models", json::array()))
      s.models.push_back(model_from_json(m));
    if (j.contains("partitioner")) s.partitioner = partitioner_from_json(j.at("partitioner"));
    if (j.contains("exec")) s.exec = exec_from_json(j.at("exec"));
    if (j.contains("ps")) s.ps = ps_from_json(j.at("ps"));
    if (j.contains("sig")) s.sig = sig_from_json(j.at("sig"));
    if (j.contains("sim")) {
      s.sim = sim_from_json(j.at("sim"));
      s.sim->validate();
    }
    if (j.contains("tco")) s.tco = tco_from_json(j.at("tco"));
    for (const auto& f : j.value("fleet", json::array())) {
      sim::PipelineSnapshot p;
      const std::string state = f.at("state");
      p.state = state == "training" ? sim::PipelineState::kTraining
                : state == "queued" ? sim::PipelineState::kQueued
                                    : sim::PipelineState::kOnHold;
      p.chips = f.at("chips");
      s.fleet.push_back(p);
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": " + e.what());
  }
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open scenario: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse(text, path);
}

TrafficStats scenario_traffic(const ModelSpec& model,
                              const PartitionerConfig& config) {
  TrafficStats stats;
  for (const auto& table : model.tables) {
    auto it = config.traffic.find(table.name);
    if (it != config.traffic.end()) {
      if (static_cast<std::int64_t>(it->second.size()) != table.vocab_size)
        throw ValidationError("traffic for " + table.name + " lists " +
                              std::to_string(it->second.size()) +
                              " rows, table has " +
                              std::to_string(table.vocab_size));
      stats.rows[table.name] = it->second;
    } else {
      stats.rows[table.name] = synthesize_row_traffic(
          table, config.traffic_batch_size, std::nullopt);
    }
  }
  return stats;
}

}  // namespace trainsim
