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

#include "trainsim/ps_model.hpp"

#include <algorithm>
#include <map>
#include <tuple>

#include "trainsim/errors.hpp"

namespace trainsim {

namespace {

// Parameter server for a global row index under block distribution with
// chunk sizes differing by at most one (larger chunks first).
std::int32_t block_ps(std::int64_t row, std::int64_t total, std::int32_t ps) {
  const std::int64_t q = total / ps;
  const std::int64_t r = total % ps;
  const std::int64_t big = r * (q + 1);
  if (row < big) return static_cast<std::int32_t>(row / (q + 1));
  return static_cast<std::int32_t>(r + (row - big) / std::max<std::int64_t>(1, q));
}

}  // namespace

std::int32_t PsLayout::ps_for_row(const std::string& table,
                                  std::int64_t row) const {
  const StackedGroup& group = group_for_table(table);
  std::int64_t offset = 0;
  for (std::size_t i = 0; i < group.tables.size(); ++i)
    if (group.tables[i] == table) offset = group.row_offsets[i];
  const std::int64_t global = offset + row;
  if (global < 0 || global >= group.total_rows)
    throw InvalidArgumentError("row out of range for table " + table);
  switch (group.scheme) {
    case RowScheme::kCyclic:
      return static_cast<std::int32_t>(global % ps_count);
    case RowScheme::kBlock:
      return block_ps(global, group.total_rows, ps_count);
    case RowScheme::kRandomHash:
      return static_cast<std::int32_t>(
          mix_hash(static_cast<std::uint64_t>(global), 0x5eed) % ps_count);
  }
  return 0;
}

const StackedGroup& PsLayout::group_for_table(const std::string& table) const {
  for (const auto& g : groups)
    for (const auto& t : g.tables)
      if (t == table) return g;
  throw NotFoundError("layout has no table: " + table);
}

std::vector<std::vector<std::string>> stack_tables(
    const std::vector<EmbeddingTableSpec>& tables) {
  using Key = std::tuple<std::int32_t, OptimizerClass, std::int32_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<std::string>> groups;
  for (const auto& t : tables) {
    const Key key{t.dim, t.optimizer.kind, t.optimizer.params_width_multiplier};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(t.name);
  }
  std::vector<std::vector<std::string>> out;
  out.reserve(order.size());
  for (const auto& key : order) out.push_back(groups[key]);
  return out;
}

PsLayout shard_rows_over_ps(const std::vector<EmbeddingTableSpec>& tables,
                            std::int32_t ps_count, RowScheme scheme,
                            bool stack) {
  if (ps_count < 1) throw InvalidArgumentError("ps_count must be >= 1");
  PsLayout layout;
  layout.ps_count = ps_count;

  std::vector<std::vector<std::string>> grouped;
  if (stack) {
    grouped = stack_tables(tables);
  } else {
    for (const auto& t : tables) grouped.push_back({t.name});
  }
  auto find_table = [&](const std::string& name) -> const EmbeddingTableSpec& {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw NotFoundError("unknown table: " + name);
  };
  for (const auto& names : grouped) {
    StackedGroup g;
    g.tables = names;
    const auto& first = find_table(names.front());
    g.dim = first.dim;
    g.optimizer = first.optimizer;
    for (const auto& name : names) {
      g.row_offsets.push_back(g.total_rows);
      g.total_rows += find_table(name).vocab_size;
    }
    // Stacked variables must spread every member over all servers, which
    // block distribution cannot guarantee.
    g.scheme = names.size() > 1 ? RowScheme::kCyclic : scheme;
    layout.groups.push_back(std::move(g));
  }
  return layout;
}

RpcAccounting rpc_count(std::int64_t n_cores, std::int64_t n_tables_effective,
                        std::int64_t ps_count, bool coalesced,
                        std::int64_t batches, std::int64_t payload_bytes) {
  if (n_cores < 1 || n_tables_effective < 1 || ps_count < 1 || batches < 1)
    throw InvalidArgumentError("rpc_count arguments must be >= 1");
  RpcAccounting acct;
  acct.per_ps_rpc_pairs_per_step =
      coalesced ? n_cores * batches : n_cores * n_tables_effective * batches;
  acct.per_ps_rpcs_per_step = 2 * acct.per_ps_rpc_pairs_per_step;
  acct.total_payload_bytes = payload_bytes;
  return acct;
}

double ps_step_time(const PsLayout& layout, const TrainingBatch& batch,
                    const RpcAccounting& acct,
                    const std::vector<EmbeddingTableSpec>& specs,
                    const PsNetParams& net) {
  std::vector<double> payload(static_cast<std::size_t>(layout.ps_count), 0.0);
  std::vector<double> rows_served(static_cast<std::size_t>(layout.ps_count), 0.0);
  for (const auto& [table, _] : batch.lookups) {
    const EmbeddingTableSpec* spec = nullptr;
    for (const auto& s : specs)
      if (s.name == table) spec = &s;
    if (spec == nullptr) throw NotFoundError("ps_step_time: unknown table " + table);
    const double row_bytes = static_cast<double>(spec->dim) * spec->bytes_per_element;
    for (std::int64_t row : dedup(batch, table).unique_rows) {
      const std::int32_t ps = layout.ps_for_row(table, row);
      // Fetch (id out, vector back) plus update (id + vector in).
      payload[static_cast<std::size_t>(ps)] += 2.0 * (net.id_bytes + row_bytes);
      rows_served[static_cast<std::size_t>(ps)] += 1.0;
    }
  }
  double worst = 0.0;
  for (std::int32_t ps = 0; ps < layout.ps_count; ++ps) {
    const double t = net.per_rpc_us * acct.per_ps_rpcs_per_step +
                     net.per_byte_us * payload[static_cast<std::size_t>(ps)] +
                     net.per_row_lookup_us * rows_served[static_cast<std::size_t>(ps)];
    worst = std::max(worst, t);
  }
  return worst;
}

}  // namespace trainsim
