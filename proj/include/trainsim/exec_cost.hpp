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

#ifndef TRAINSIM_EXEC_COST_HPP_
#define TRAINSIM_EXEC_COST_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "trainsim/partition.hpp"
#include "trainsim/workload.hpp"

namespace trainsim {

enum class StepMode { kSerialized, kPipelined };

struct StepCost {
  double tc_us = 0.0;  // TensorCore time per step
  double sc_us = 0.0;  // SparseCore time per step
  StepMode mode = StepMode::kSerialized;
};

// Fractional slowdowns each core suffers when overlapped with the other
// (shared memory/interconnect bandwidth).
struct ContentionModel {
  double tc_slowdown = 0.05;
  double sc_slowdown = 0.10;
};

enum class ExchangeStrategy { kDedupAllToAll, kAllValuesReduceScatter };

struct TrafficModel {
  ExchangeStrategy strategy = ExchangeStrategy::kDedupAllToAll;
  std::int32_t bytes_per_value = 4;  // row-id bytes on the wire
  NodeId node_count = 1;
};

struct StaleTrainConfig {
  std::int64_t vocab = 64;
  std::int32_t dim = 8;
  std::int64_t steps = 1000;
  double learning_rate = 0.05;
  std::int32_t staleness = 1;  // 0 or 1
  std::uint64_t seed = 0;
  double zipf_s = 1.0;
  double target_noise = 0.1;
};

struct StaleTrainResult {
  double final_loss_stale = 0.0;
  double final_loss_fresh = 0.0;
  std::vector<double> loss_curve_stale;
  std::vector<double> loss_curve_fresh;
};

double serialized_step(const StepCost& cost);
double pipelined_step(const StepCost& cost, const ContentionModel& contention);

// Bytes injected into the interconnect to resolve one batch's embedding
// lookups under the given exchange strategy. Deduplicated all-to-all pays
// per unique value (ids out, one dim-wide vector back, once per column
// multiplicity); the all-values scheme ships every occurrence and, for
// row-partitioned tables, adds a partial-sum exchange that grows with the
// node count.
double network_traffic(const TrainingBatch& batch, const PartitionPlan& plan,
                       const TrafficModel& model,
                       const std::vector<EmbeddingTableSpec>& specs);

// Splits examples between the deduplicating TensorCore path (valency at or
// under the threshold) and the direct SparseCore path.
std::pair<double, double> software_dedup_route(
    const std::vector<std::int64_t>& valencies, std::int64_t threshold);

// Trains a one-table toy model (embedding lookup + linear readout, squared
// loss) twice: applying embedding gradients immediately, and delayed by one
// step. Deterministic per config.
StaleTrainResult stale_gradient_experiment(const StaleTrainConfig& cfg);

// One row of the step-cost sweep exported by the CLI.
struct StepCostRow {
  std::string model;
  std::string mode;
  double tc_us = 0.0;
  double sc_us = 0.0;
  double step_us = 0.0;
  double speedup = 1.0;
};

std::string step_cost_csv(const std::vector<StepCostRow>& rows);

// The optimization ladder evaluated on one model: serialized row-only
// baseline, pipelining, hybrid partitioning with compile-time stats, and
// hybrid partitioning with profiled stats. SparseCore time is modeled as
// balanced-SC time x load imbalance x access-granularity penalty; every plan
// is scored against the true traffic.
struct LadderOptions {
  NodeId nodes = 4;
  double sc_balanced_us = 0.0;  // SC time per step at imbalance 1
  double tc_us = 0.0;
  ContentionModel contention;
  PartitionSearchOptions search;
  std::int64_t search_budget = 100000;
};

std::vector<StepCostRow> optimization_ladder(
    const ModelSpec& model, const TrafficStats& true_stats,
    const TrafficStats& compile_time_stats, const LadderOptions& opts);

}  // namespace trainsim

#endif  // TRAINSIM_EXEC_COST_HPP_
