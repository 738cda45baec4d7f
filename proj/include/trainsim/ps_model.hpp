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

#ifndef TRAINSIM_PS_MODEL_HPP_
#define TRAINSIM_PS_MODEL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "trainsim/partition.hpp"
#include "trainsim/workload.hpp"

namespace trainsim {

// Tables with identical width and optimizer parameters, stacked into one
// variable; member rows live at consecutive offsets.
struct StackedGroup {
  std::vector<std::string> tables;
  std::vector<std::int64_t> row_offsets;  // parallel to tables
  std::int64_t total_rows = 0;
  std::int32_t dim = 0;
  OptimizerKind optimizer;
  RowScheme scheme = RowScheme::kCyclic;
};

struct PsLayout {
  std::int32_t ps_count = 1;
  std::vector<StackedGroup> groups;

  // Parameter server holding one row of one table.
  std::int32_t ps_for_row(const std::string& table, std::int64_t row) const;
  const StackedGroup& group_for_table(const std::string& table) const;
};

struct RpcAccounting {
  // One fetch+update exchange per counted unit; the classic per-PS RPC
  // formula (cores x tables) counts these pairs.
  std::int64_t per_ps_rpc_pairs_per_step = 0;
  // Individual RPCs, i.e. 2x the pairs.
  std::int64_t per_ps_rpcs_per_step = 0;
  std::int64_t total_payload_bytes = 0;
};

struct PsNetParams {
  double per_rpc_us = 0.0;
  double per_byte_us = 0.0;
  double per_row_lookup_us = 0.0;
  std::int32_t id_bytes = 4;
};

// Groups tables by (dim, optimizer kind, params multiplier); group order and
// member order follow first appearance. Singleton groups are fine.
std::vector<std::vector<std::string>> stack_tables(
    const std::vector<EmbeddingTableSpec>& tables);

// Distributes every table's rows across all parameter servers. When stacking
// is on, same-shape tables are first stacked into one variable; stacked
// multi-table groups always use cyclic distribution so every member spreads
// over all servers regardless of the requested scheme.
PsLayout shard_rows_over_ps(const std::vector<EmbeddingTableSpec>& tables,
                            std::int32_t ps_count, RowScheme scheme,
                            bool stack = true);

// Per-PS RPC load. Uncoalesced: one fetch+update pair per (core, table) per
// batch. Coalesced: one pair per (worker, PS) per batch, all tables'
// values serialized together; workers are modeled one per core.
RpcAccounting rpc_count(std::int64_t n_cores, std::int64_t n_tables_effective,
                        std::int64_t ps_count, bool coalesced,
                        std::int64_t batches = 1,
                        std::int64_t payload_bytes = 0);

// Slowest parameter server's time for one step: RPC overhead + payload bytes
// + a lookup-compute proxy per unique row it serves.
double ps_step_time(const PsLayout& layout, const TrainingBatch& batch,
                    const RpcAccounting& acct,
                    const std::vector<EmbeddingTableSpec>& specs,
                    const PsNetParams& net);

}  // namespace trainsim

#endif  // TRAINSIM_PS_MODEL_HPP_
