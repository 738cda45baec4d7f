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

#ifndef TRAINSIM_SCENARIO_HPP_
#define TRAINSIM_SCENARIO_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trainsim/cost.hpp"
#include "trainsim/exec_cost.hpp"
#include "trainsim/partition.hpp"
#include "trainsim/pipeline_sim.hpp"
#include "trainsim/ps_model.hpp"
#include "trainsim/sig.hpp"
#include "trainsim/workload.hpp"

namespace trainsim {

struct PartitionerConfig {
  NodeId node_count = 1;
  std::int64_t mem_capacity_per_node = 0;
  std::int64_t search_budget = 100'000;
  PartitionSearchOptions search;
  // Explicit per-row deduplicated lookup rates; tables not listed here get
  // traffic synthesized from their spec.
  std::map<std::string, std::vector<double>> traffic;
  std::int64_t traffic_batch_size = 1024;
};

struct ExecConfig {
  double tc_us = 0.0;
  double sc_balanced_us = 0.0;
  ContentionModel contention;
  std::optional<StaleTrainConfig> stale;
};

struct PsScenarioConfig {
  std::int32_t ps_count = 1;
  RowScheme scheme = RowScheme::kCyclic;
  std::int64_t n_cores = 1;
  std::int64_t batches = 1;
  std::int64_t batch_size = 256;
  PsNetParams net;
};

struct SigClientConfig {
  std::string id;
  int priority = 0;
};

struct SigSubmission {
  std::string model;
  std::string pipeline;
  std::string client;
  std::string graph;  // name in the graphs map
  sig::EventRange range;
  std::int64_t at = 0;
};

// Generated replay workload: `models` pipelines each submitting
// `components_per_model` components drawn from a pool of `components`
// distinct graphs. "shared" selection gives every model the same prefix.
struct SigPoolConfig {
  int components = 10;
  int models = 22;
  int components_per_model = 10;
  std::string selection = "shared";  // shared | hashed
  sig::EventRange range{0, 16};
};

struct SigScenarioConfig {
  std::vector<SigClientConfig> clients;
  std::map<std::string, sig::TransformGraph> graphs;
  std::vector<SigSubmission> submissions;
  std::optional<SigPoolConfig> pool;
  int raw_tokens_per_field = 4;
  int raw_vocab = 64;
  std::int64_t ttl = 0;  // 0 = no stale eviction during replay
};

struct TcoScenarioConfig {
  TcoParams params;
  std::vector<ResourceProfile> models;
  SigPool pool;
};

struct Scenario {
  std::string version;
  std::uint64_t seed = 0;
  std::vector<ModelSpec> models;
  std::optional<PartitionerConfig> partitioner;
  std::optional<ExecConfig> exec;
  std::optional<PsScenarioConfig> ps;
  std::optional<SigScenarioConfig> sig;
  std::optional<sim::SimScenario> sim;
  std::optional<TcoScenarioConfig> tco;
  std::vector<sim::PipelineSnapshot> fleet;

  const ModelSpec& model(const std::string& name) const;

  static Scenario load(const std::string& path);
  static Scenario parse(const std::string& text, const std::string& origin);
};

// Traffic stats for one model under the partitioner config: explicit per-row
// rates when given, synthesized from the table spec otherwise.
TrafficStats scenario_traffic(const ModelSpec& model,
                              const PartitionerConfig& config);

}  // namespace trainsim

#endif  // TRAINSIM_SCENARIO_HPP_
