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

#ifndef TRAINSIM_PARTITION_HPP_
#define TRAINSIM_PARTITION_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trainsim/workload.hpp"

namespace trainsim {

using NodeId = std::int32_t;

enum class RowScheme { kBlock, kCyclic, kRandomHash };

// Row-set descriptors. Half-open block ranges; cyclic classes are residue
// classes mod stride; hash classes bucket rows by the repo's mix_hash.
struct RowAll {};
struct RowBlock {
  std::int64_t lo = 0, hi = 0;  // [lo, hi)
};
struct RowCyclic {
  std::int64_t offset = 0, stride = 1;  // rows r with r % stride == offset
};
struct RowHash {
  std::uint64_t cls = 0, modulus = 1, seed = 0;
};
using RowSet = std::variant<RowAll, RowBlock, RowCyclic, RowHash>;

struct ColRange {
  std::int32_t lo = 0, hi = 0;  // [lo, hi)
  std::int32_t width() const { return hi - lo; }
};

struct ShardSpec {
  std::string table;
  RowSet rows;
  ColRange cols;
  NodeId node = 0;
};

struct PartitionPlan {
  std::vector<ShardSpec> shards;
  NodeId node_count = 1;
  // Row distribution scheme per row-partitioned table.
  std::map<std::string, RowScheme> row_schemes;
};

// Mean deduplicated lookups per step, per (table, row).
struct TrafficStats {
  std::map<std::string, std::vector<double>> rows;

  const std::vector<double>& table_rows(const std::string& table) const;
  double table_total(const std::string& table) const;
};

struct LoadReport {
  std::vector<double> bytes_per_node;
  double imbalance = 1.0;
  NodeId node_count = 1;
  bool zero_traffic = false;
};

struct PartitionSearchOptions {
  // Column shard counts each table may be split into; 1 means unsplit.
  std::vector<std::int32_t> column_splits = {1, 2, 4, 8};
  // Row schemes offered to the search.
  std::vector<RowScheme> row_schemes = {RowScheme::kCyclic, RowScheme::kBlock};
  std::int64_t mem_capacity_per_node = 0;  // 0 = unconstrained
  // Accesses narrower than this many elements pay the penalty factor below
  // (narrow reads strand memory bandwidth; the exact curve is a knob).
  std::int32_t narrow_width_threshold = 32;
  double narrow_access_penalty = 1.25;
  std::uint64_t hash_seed = 0x5eed;
};

// Scored plan: objective = imbalance * (sum B_i / N) * granularity penalty.
struct ScoredPlan {
  PartitionPlan plan;
  LoadReport load;
  double objective = 0.0;
};

bool row_in_set(const RowSet& set, std::int64_t row);
std::int64_t row_set_cardinality(const RowSet& set, std::int64_t vocab);

// --- Plan evaluation ------------------------------------------------------

// B_i = sum over shards on node i of (row lookups x column width x
// bytes_per_element); imbalance = N * max B_i / sum B_i. Zero total traffic
// is reported as imbalance 1.0 with the warning flag set.
LoadReport load_imbalance(const PartitionPlan& plan, const TrafficStats& stats,
                          const std::vector<EmbeddingTableSpec>& specs);

double plan_objective(const PartitionPlan& plan, const TrafficStats& stats,
                      const std::vector<EmbeddingTableSpec>& specs,
                      const PartitionSearchOptions& opts);

// Per-node resident bytes: rows x cols x bytes_per_element x optimizer
// params multiplier.
std::vector<std::int64_t> memory_bytes(
    const PartitionPlan& plan, const std::vector<EmbeddingTableSpec>& specs);

void validate_plan(const PartitionPlan& plan,
                   const std::vector<EmbeddingTableSpec>& specs);

// --- Single-method partitioners -------------------------------------------

PartitionPlan row_partition(const EmbeddingTableSpec& table, NodeId nodes,
                            RowScheme scheme, std::uint64_t hash_seed = 0x5eed);

// Splits [0, dim) into shard_count ranges with widths differing by at most
// one; shard i lands on node i. Tables with row-wise optimizers cannot be
// split (the optimizer needs whole rows).
PartitionPlan column_partition(const EmbeddingTableSpec& table,
                               std::int32_t shard_count);

// Whole tables to nodes, greedy by descending traffic onto the least-loaded
// node; ties break to the lowest node index, then lexicographic table name.
PartitionPlan table_partition(const std::vector<EmbeddingTableSpec>& tables,
                              NodeId nodes, const TrafficStats& stats);

// --- Hybrid search ---------------------------------------------------------

// Beam search over per-table method choices (row schemes, whole-table, column
// splits) with deterministic greedy placement, clamped from below by the best
// of row-cyclic and table-greedy. search_budget bounds the beam width; a
// budget at least the size of the method space makes the search exhaustive.
ScoredPlan hybrid_partition(const ModelSpec& model, NodeId nodes,
                            const TrafficStats& stats,
                            std::int64_t mem_capacity_per_node,
                            std::int64_t search_budget,
                            const PartitionSearchOptions& opts = {});

// Exhaustive enumeration of the same method space with the same placement and
// objective; refuses instances whose method space exceeds max_candidates.
ScoredPlan exact_partition_oracle(const ModelSpec& model, NodeId nodes,
                                  const TrafficStats& stats,
                                  const PartitionSearchOptions& opts = {},
                                  std::int64_t max_candidates = 10'000'000);

// Imbalance of cyclic vs block row partitioning for one table whose stats are
// sorted by descending access frequency.
std::pair<double, double> compare_cyclic_block(const EmbeddingTableSpec& table,
                                               const TrafficStats& stats,
                                               NodeId nodes);

// --- Serialization ---------------------------------------------------------

std::string plan_to_json(const PartitionPlan& plan);
PartitionPlan plan_from_json(const std::string& json_text);

}  // namespace trainsim

#endif  // TRAINSIM_PARTITION_HPP_
