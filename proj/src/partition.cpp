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

#include "trainsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "trainsim/errors.hpp"
#include "trainsim/rng.hpp"

namespace trainsim {

using json = nlohmann::json;

const std::vector<double>& TrafficStats::table_rows(
    const std::string& table) const {
  auto it = rows.find(table);
  if (it == rows.end())
    throw NotFoundError("traffic stats missing table: " + table);
  return it->second;
}

double TrafficStats::table_total(const std::string& table) const {
  const auto& r = table_rows(table);
  return std::accumulate(r.begin(), r.end(), 0.0);
}

bool row_in_set(const RowSet& set, std::int64_t row) {
  if (std::holds_alternative<RowAll>(set)) return true;
  if (const auto* b = std::get_if<RowBlock>(&set))
    return row >= b->lo && row < b->hi;
  if (const auto* c = std::get_if<RowCyclic>(&set))
    return row % c->stride == c->offset;
  const auto& h = std::get<RowHash>(set);
  return mix_hash(static_cast<std::uint64_t>(row), h.seed) % h.modulus == h.cls;
}

std::int64_t row_set_cardinality(const RowSet& set, std::int64_t vocab) {
  if (std::holds_alternative<RowAll>(set)) return vocab;
  if (const auto* b = std::get_if<RowBlock>(&set))
    return std::max<std::int64_t>(0, std::min(b->hi, vocab) - std::max<std::int64_t>(b->lo, 0));
  if (const auto* c = std::get_if<RowCyclic>(&set)) {
    if (c->offset >= vocab) return 0;
    return (vocab - 1 - c->offset) / c->stride + 1;
  }
  const auto& h = std::get<RowHash>(set);
  std::int64_t count = 0;
  for (std::int64_t r = 0; r < vocab; ++r)
    if (mix_hash(static_cast<std::uint64_t>(r), h.seed) % h.modulus == h.cls)
      ++count;
  return count;
}

namespace {

const EmbeddingTableSpec& find_spec(
    const std::vector<EmbeddingTableSpec>& specs, const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return s;
  throw NotFoundError("plan references unknown table: " + name);
}

// Sum of per-row lookup rates over the shard's row set.
double shard_lookups(const RowSet& set, const std::vector<double>& row_stats) {
  double total = 0.0;
  if (std::holds_alternative<RowAll>(set)) {
    for (double v : row_stats) total += v;
    return total;
  }
  if (const auto* b = std::get_if<RowBlock>(&set)) {
    const std::int64_t lo = std::max<std::int64_t>(0, b->lo);
    const std::int64_t hi =
        std::min<std::int64_t>(static_cast<std::int64_t>(row_stats.size()), b->hi);
    for (std::int64_t r = lo; r < hi; ++r)
      total += row_stats[static_cast<std::size_t>(r)];
    return total;
  }
  if (const auto* c = std::get_if<RowCyclic>(&set)) {
    for (std::int64_t r = c->offset;
         r < static_cast<std::int64_t>(row_stats.size()); r += c->stride)
      total += row_stats[static_cast<std::size_t>(r)];
    return total;
  }
  const auto& h = std::get<RowHash>(set);
  for (std::size_t r = 0; r < row_stats.size(); ++r)
    if (mix_hash(r, h.seed) % h.modulus == h.cls) total += row_stats[r];
  return total;
}

std::string row_set_key(const RowSet& set) {
  std::ostringstream os;
  if (std::holds_alternative<RowAll>(set)) {
    os << "all";
  } else if (const auto* b = std::get_if<RowBlock>(&set)) {
    os << "block:" << b->lo << ":" << b->hi;
  } else if (const auto* c = std::get_if<RowCyclic>(&set)) {
    os << "cyclic:" << c->offset << ":" << c->stride;
  } else {
    const auto& h = std::get<RowHash>(set);
    os << "hash:" << h.cls << ":" << h.modulus << ":" << h.seed;
  }
  return os.str();
}

std::string shard_key(const ShardSpec& s) {
  std::ostringstream os;
  os << s.table << "|" << s.cols.lo << "|" << s.cols.hi << "|"
     << row_set_key(s.rows) << "|" << s.node;
  return os.str();
}

// Canonical plan identity used for deterministic tie-breaks.
std::string plan_key(const PartitionPlan& plan) {
  std::vector<std::string> keys;
  keys.reserve(plan.shards.size());
  for (const auto& s : plan.shards) keys.push_back(shard_key(s));
  std::sort(keys.begin(), keys.end());
  std::string joined;
  for (const auto& k : keys) {
    joined += k;
    joined += ";";
  }
  return joined;
}

void check_rows_partition(const std::string& table,
                          const std::vector<const ShardSpec*>& shards,
                          std::int64_t vocab) {
  if (shards.size() == 1 &&
      std::holds_alternative<RowAll>(shards[0]->rows))
    return;
  bool all_block = true, all_cyclic = true, all_hash = true;
  for (const auto* s : shards) {
    all_block &= std::holds_alternative<RowBlock>(s->rows) ||
                 std::holds_alternative<RowAll>(s->rows);
    all_cyclic &= std::holds_alternative<RowCyclic>(s->rows);
    all_hash &= std::holds_alternative<RowHash>(s->rows);
  }
  if (all_block) {
    std::vector<RowBlock> blocks;
    for (const auto* s : shards) {
      if (std::holds_alternative<RowAll>(s->rows))
        blocks.push_back(RowBlock{0, vocab});
      else
        blocks.push_back(std::get<RowBlock>(s->rows));
    }
    std::sort(blocks.begin(), blocks.end(),
              [](const RowBlock& a, const RowBlock& b) { return a.lo < b.lo; });
    std::int64_t cursor = 0;
    for (const auto& b : blocks) {
      if (b.lo != cursor)
        throw ValidationError("table " + table + ": row blocks leave a gap or overlap at row " +
                              std::to_string(cursor));
      cursor = b.hi;
    }
    if (cursor != vocab)
      throw ValidationError("table " + table + ": row blocks end at " +
                            std::to_string(cursor) + " of " + std::to_string(vocab));
    return;
  }
  if (all_cyclic) {
    const std::int64_t stride = std::get<RowCyclic>(shards[0]->rows).stride;
    std::vector<bool> seen(static_cast<std::size_t>(stride), false);
    for (const auto* s : shards) {
      const auto& c = std::get<RowCyclic>(s->rows);
      if (c.stride != stride)
        throw ValidationError("table " + table + ": mixed cyclic strides");
      if (c.offset < 0 || c.offset >= stride || seen[static_cast<std::size_t>(c.offset)])
        throw ValidationError("table " + table + ": cyclic classes do not partition rows");
      seen[static_cast<std::size_t>(c.offset)] = true;
    }
    for (bool b : seen)
      if (!b) throw ValidationError("table " + table + ": missing cyclic class");
    return;
  }
  if (all_hash) {
    const auto& first = std::get<RowHash>(shards[0]->rows);
    std::vector<bool> seen(first.modulus, false);
    for (const auto* s : shards) {
      const auto& h = std::get<RowHash>(s->rows);
      if (h.modulus != first.modulus || h.seed != first.seed)
        throw ValidationError("table " + table + ": mixed hash classes");
      if (h.cls >= h.modulus || seen[h.cls])
        throw ValidationError("table " + table + ": hash classes do not partition rows");
      seen[h.cls] = true;
    }
    for (bool b : seen)
      if (!b) throw ValidationError("table " + table + ": missing hash class");
    return;
  }
  // Mixed descriptors: fall back to exact enumeration on small vocabularies.
  if (vocab > (1 << 20))
    throw ValidationError("table " + table +
                          ": mixed row descriptors on a large vocabulary cannot be verified");
  std::vector<int> cover(static_cast<std::size_t>(vocab), 0);
  for (const auto* s : shards)
    for (std::int64_t r = 0; r < vocab; ++r)
      if (row_in_set(s->rows, r)) ++cover[static_cast<std::size_t>(r)];
  for (std::int64_t r = 0; r < vocab; ++r)
    if (cover[static_cast<std::size_t>(r)] != 1)
      throw ValidationError("table " + table + ": row " + std::to_string(r) +
                            " covered " + std::to_string(cover[static_cast<std::size_t>(r)]) +
                            " times");
}

}  // namespace

void validate_plan(const PartitionPlan& plan,
                   const std::vector<EmbeddingTableSpec>& specs) {
  if (plan.node_count < 1)
    throw ValidationError("plan needs node_count >= 1");
  std::map<std::string, std::vector<const ShardSpec*>> by_table;
  for (const auto& s : plan.shards) {
    const auto& spec = find_spec(specs, s.table);
    if (s.node < 0 || s.node >= plan.node_count)
      throw ValidationError("shard of " + s.table + " targets node " +
                            std::to_string(s.node) + " outside [0, " +
                            std::to_string(plan.node_count) + ")");
    if (s.cols.lo < 0 || s.cols.hi > spec.dim || s.cols.lo >= s.cols.hi)
      throw ValidationError("shard of " + s.table + " has bad column range");
    by_table[s.table].push_back(&s);
  }
  for (const auto& spec : specs) {
    auto it = by_table.find(spec.name);
    if (it == by_table.end())
      throw ValidationError("table " + spec.name + " has no shards");
    // Group shards by identical column range; the ranges must tile [0, dim)
    // and each band's row sets must partition the vocabulary.
    std::map<std::pair<std::int32_t, std::int32_t>,
             std::vector<const ShardSpec*>> bands;
    for (const auto* s : it->second)
      bands[{s->cols.lo, s->cols.hi}].push_back(s);
    std::int32_t cursor = 0;
    std::int32_t distinct_ranges = 0;
    for (const auto& [range, shards] : bands) {
      if (range.first != cursor)
        throw ValidationError("table " + spec.name +
                              ": column ranges leave a gap or overlap at column " +
                              std::to_string(cursor));
      cursor = range.second;
      ++distinct_ranges;
      check_rows_partition(spec.name, shards, spec.vocab_size);
    }
    if (cursor != spec.dim)
      throw ValidationError("table " + spec.name + ": columns end at " +
                            std::to_string(cursor) + " of " + std::to_string(spec.dim));
    if (spec.optimizer.kind == OptimizerClass::kRowWise && distinct_ranges > 1)
      throw ConstraintViolationError(
          "table " + spec.name +
          " uses a row-wise optimizer and cannot be column partitioned");
  }
}

LoadReport load_imbalance(const PartitionPlan& plan, const TrafficStats& stats,
                          const std::vector<EmbeddingTableSpec>& specs) {
  validate_plan(plan, specs);
  LoadReport report;
  report.node_count = plan.node_count;
  report.bytes_per_node.assign(static_cast<std::size_t>(plan.node_count), 0.0);
  for (const auto& shard : plan.shards) {
    const auto& spec = find_spec(specs, shard.table);
    const auto& row_stats = stats.table_rows(shard.table);
    if (static_cast<std::int64_t>(row_stats.size()) != spec.vocab_size)
      throw InvalidArgumentError("traffic stats for " + shard.table + " cover " +
                                 std::to_string(row_stats.size()) + " rows, expected " +
                                 std::to_string(spec.vocab_size));
    const double lookups = shard_lookups(shard.rows, row_stats);
    report.bytes_per_node[static_cast<std::size_t>(shard.node)] +=
        lookups * shard.cols.width() * spec.bytes_per_element;
  }
  const double total = std::accumulate(report.bytes_per_node.begin(),
                                       report.bytes_per_node.end(), 0.0);
  const double max_b =
      *std::max_element(report.bytes_per_node.begin(), report.bytes_per_node.end());
  if (total <= 0.0) {
    report.imbalance = 1.0;
    report.zero_traffic = true;
  } else {
    report.imbalance = plan.node_count * max_b / total;
  }
  return report;
}

std::vector<std::int64_t> memory_bytes(
    const PartitionPlan& plan, const std::vector<EmbeddingTableSpec>& specs) {
  std::vector<std::int64_t> per_node(static_cast<std::size_t>(plan.node_count), 0);
  for (const auto& shard : plan.shards) {
    const auto& spec = find_spec(specs, shard.table);
    const std::int64_t rows = row_set_cardinality(shard.rows, spec.vocab_size);
    per_node[static_cast<std::size_t>(shard.node)] +=
        rows * shard.cols.width() * spec.bytes_per_element *
        spec.optimizer.params_width_multiplier;
  }
  return per_node;
}

double plan_objective(const PartitionPlan& plan, const TrafficStats& stats,
                      const std::vector<EmbeddingTableSpec>& specs,
                      const PartitionSearchOptions& opts) {
  const LoadReport report = load_imbalance(plan, stats, specs);
  const double total = std::accumulate(report.bytes_per_node.begin(),
                                       report.bytes_per_node.end(), 0.0);
  std::int32_t min_width = std::numeric_limits<std::int32_t>::max();
  for (const auto& s : plan.shards) min_width = std::min(min_width, s.cols.width());
  const double penalty =
      min_width < opts.narrow_width_threshold ? opts.narrow_access_penalty : 1.0;
  return report.imbalance * (total / plan.node_count) * penalty;
}

PartitionPlan row_partition(const EmbeddingTableSpec& table, NodeId nodes,
                            RowScheme scheme, std::uint64_t hash_seed) {
  if (nodes < 1) throw InvalidArgumentError("row_partition needs nodes >= 1");
  PartitionPlan plan;
  plan.node_count = nodes;
  plan.row_schemes[table.name] = scheme;
  const ColRange full{0, table.dim};
  if (nodes == 1) {
    plan.shards.push_back({table.name, RowAll{}, full, 0});
    return plan;
  }
  switch (scheme) {
    case RowScheme::kBlock: {
      const std::int64_t q = table.vocab_size / nodes;
      const std::int64_t r = table.vocab_size % nodes;
      std::int64_t lo = 0;
      for (NodeId i = 0; i < nodes; ++i) {
        const std::int64_t hi = lo + q + (i < r ? 1 : 0);
        if (hi > lo) plan.shards.push_back({table.name, RowBlock{lo, hi}, full, i});
        lo = hi;
      }
      break;
    }
    case RowScheme::kCyclic:
      for (NodeId i = 0; i < nodes && i < table.vocab_size; ++i)
        plan.shards.push_back({table.name, RowCyclic{i, nodes}, full, i});
      break;
    case RowScheme::kRandomHash:
      for (NodeId i = 0; i < nodes; ++i)
        plan.shards.push_back(
            {table.name,
             RowHash{static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(nodes),
                     hash_seed},
             full, i});
      break;
  }
  // Degenerate vocab < nodes with cyclic: the loop above already stopped, but
  // coverage needs every residue class present, so pad onto empty classes.
  if (scheme == RowScheme::kCyclic && table.vocab_size < nodes) {
    for (NodeId i = static_cast<NodeId>(table.vocab_size); i < nodes; ++i)
      plan.shards.push_back({table.name, RowCyclic{i, nodes}, full, i});
  }
  return plan;
}

PartitionPlan column_partition(const EmbeddingTableSpec& table,
                               std::int32_t shard_count) {
  if (shard_count < 1 || shard_count > table.dim)
    throw InvalidArgumentError("column_partition needs 1 <= shard_count <= dim");
  if (shard_count > 1 && table.optimizer.kind == OptimizerClass::kRowWise)
    throw ConstraintViolationError(
        "table " + table.name +
        " uses a row-wise optimizer and cannot be column partitioned");
  PartitionPlan plan;
  plan.node_count = shard_count;
  const std::int32_t q = table.dim / shard_count;
  const std::int32_t r = table.dim % shard_count;
  std::int32_t lo = 0;
  for (std::int32_t i = 0; i < shard_count; ++i) {
    const std::int32_t hi = lo + q + (i < r ? 1 : 0);
    plan.shards.push_back({table.name, RowAll{}, ColRange{lo, hi}, i});
    lo = hi;
  }
  return plan;
}

PartitionPlan table_partition(const std::vector<EmbeddingTableSpec>& tables,
                              NodeId nodes, const TrafficStats& stats) {
  if (nodes < 1) throw InvalidArgumentError("table_partition needs nodes >= 1");
  struct Entry {
    const EmbeddingTableSpec* spec;
    double traffic;
  };
  std::vector<Entry> entries;
  for (const auto& t : tables)
    entries.push_back({&t, stats.table_total(t.name) * t.dim * t.bytes_per_element});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.traffic != b.traffic) return a.traffic > b.traffic;
    return a.spec->name < b.spec->name;
  });
  PartitionPlan plan;
  plan.node_count = nodes;
  std::vector<double> load(static_cast<std::size_t>(nodes), 0.0);
  for (const auto& e : entries) {
    NodeId best = 0;
    for (NodeId i = 1; i < nodes; ++i)
      if (load[static_cast<std::size_t>(i)] < load[static_cast<std::size_t>(best)])
        best = i;
    plan.shards.push_back(
        {e.spec->name, RowAll{}, ColRange{0, e.spec->dim}, best});
    load[static_cast<std::size_t>(best)] += e.traffic;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Hybrid search. A candidate is one method per table; materialization turns a
// method vector into a concrete plan with deterministic greedy placement.
// hybrid_partition and exact_partition_oracle share this code path exactly, so
// an exhaustive beam returns the oracle's plan bit for bit.
// ---------------------------------------------------------------------------

namespace {

struct TableMethod {
  enum class Kind { kRow, kWhole, kColumn };
  Kind kind = Kind::kWhole;
  RowScheme scheme = RowScheme::kCyclic;  // kRow only
  std::int32_t splits = 1;                // kColumn only
};

std::vector<TableMethod> method_catalog(const EmbeddingTableSpec& table,
                                        NodeId nodes,
                                        const PartitionSearchOptions& opts) {
  std::vector<TableMethod> catalog;
  for (RowScheme scheme : opts.row_schemes)
    catalog.push_back({TableMethod::Kind::kRow, scheme, 1});
  catalog.push_back({TableMethod::Kind::kWhole, RowScheme::kCyclic, 1});
  if (table.optimizer.kind == OptimizerClass::kElementWise) {
    for (std::int32_t c : opts.column_splits) {
      if (c >= 2 && c <= table.dim && c <= nodes)
        catalog.push_back({TableMethod::Kind::kColumn, RowScheme::kCyclic, c});
    }
  }
  return catalog;
}

// A floating shard group to be placed greedily (whole tables and column
// slices). Row-partitioned tables are pinned class i -> node i instead.
struct ShardGroup {
  std::string table;
  ColRange cols;
  double traffic_bytes;
  std::int64_t mem_bytes;
};

struct Materialized {
  PartitionPlan plan;
  bool feasible = true;
  std::vector<std::int64_t> mem_overflow;  // per node, when infeasible
};

Materialized materialize(const std::vector<const EmbeddingTableSpec*>& tables,
                         const std::vector<TableMethod>& methods, NodeId nodes,
                         const TrafficStats& stats,
                         const PartitionSearchOptions& opts) {
  Materialized out;
  out.plan.node_count = nodes;
  std::vector<double> load(static_cast<std::size_t>(nodes), 0.0);
  std::vector<std::int64_t> mem(static_cast<std::size_t>(nodes), 0);
  const std::int64_t cap = opts.mem_capacity_per_node;

  auto mem_ok = [&](NodeId n, std::int64_t bytes) {
    return cap <= 0 || mem[static_cast<std::size_t>(n)] + bytes <= cap;
  };

  // Pinned row shards first: class i lands on node i by construction.
  std::vector<ShardGroup> groups;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto& spec = *tables[t];
    const auto& method = methods[t];
    const auto& row_stats = stats.table_rows(spec.name);
    if (method.kind == TableMethod::Kind::kRow) {
      PartitionPlan partial =
          row_partition(spec, nodes, method.scheme, opts.hash_seed);
      for (const auto& shard : partial.shards) {
        const double bytes = shard_lookups(shard.rows, row_stats) *
                             shard.cols.width() * spec.bytes_per_element;
        const std::int64_t m = row_set_cardinality(shard.rows, spec.vocab_size) *
                               shard.cols.width() * spec.bytes_per_element *
                               spec.optimizer.params_width_multiplier;
        if (!mem_ok(shard.node, m)) {
          out.feasible = false;
        }
        mem[static_cast<std::size_t>(shard.node)] += m;
        load[static_cast<std::size_t>(shard.node)] += bytes;
        out.plan.shards.push_back(shard);
      }
      out.plan.row_schemes[spec.name] = method.scheme;
    } else {
      const std::int32_t splits =
          method.kind == TableMethod::Kind::kColumn ? method.splits : 1;
      const std::int32_t q = spec.dim / splits;
      const std::int32_t r = spec.dim % splits;
      std::int32_t lo = 0;
      const double table_lookups = stats.table_total(spec.name);
      for (std::int32_t i = 0; i < splits; ++i) {
        const std::int32_t hi = lo + q + (i < r ? 1 : 0);
        ShardGroup g;
        g.table = spec.name;
        g.cols = {lo, hi};
        g.traffic_bytes = table_lookups * g.cols.width() * spec.bytes_per_element;
        g.mem_bytes = spec.vocab_size * g.cols.width() * spec.bytes_per_element *
                      spec.optimizer.params_width_multiplier;
        groups.push_back(std::move(g));
        lo = hi;
      }
    }
  }
  if (!out.feasible) {
    for (NodeId n = 0; n < nodes; ++n)
      out.mem_overflow.push_back(
          cap > 0 ? std::max<std::int64_t>(0, mem[static_cast<std::size_t>(n)] - cap) : 0);
    return out;
  }

  std::sort(groups.begin(), groups.end(), [](const ShardGroup& a, const ShardGroup& b) {
    if (a.traffic_bytes != b.traffic_bytes) return a.traffic_bytes > b.traffic_bytes;
    if (a.table != b.table) return a.table < b.table;
    return a.cols.lo < b.cols.lo;
  });
  for (const auto& g : groups) {
    NodeId best = -1;
    for (NodeId n = 0; n < nodes; ++n) {
      if (!mem_ok(n, g.mem_bytes)) continue;
      if (best < 0 ||
          load[static_cast<std::size_t>(n)] < load[static_cast<std::size_t>(best)])
        best = n;
    }
    if (best < 0) {
      out.feasible = false;
      for (NodeId n = 0; n < nodes; ++n)
        out.mem_overflow.push_back(std::max<std::int64_t>(
            0, mem[static_cast<std::size_t>(n)] + g.mem_bytes - cap));
      return out;
    }
    out.plan.shards.push_back({g.table, RowAll{}, g.cols, best});
    load[static_cast<std::size_t>(best)] += g.traffic_bytes;
    mem[static_cast<std::size_t>(best)] += g.mem_bytes;
  }
  return out;
}

// Comparator for candidate selection: objective, then canonical plan key.
struct Candidate {
  double objective = std::numeric_limits<double>::infinity();
  std::string key;
  PartitionPlan plan;
  bool valid = false;

  void consider(double obj, PartitionPlan&& p) {
    std::string k = plan_key(p);
    if (!valid || obj < objective || (obj == objective && k < key)) {
      objective = obj;
      key = std::move(k);
      plan = std::move(p);
      valid = true;
    }
  }
};

void check_total_footprint(const std::vector<EmbeddingTableSpec>& tables,
                           NodeId nodes, std::int64_t cap) {
  if (cap <= 0) return;
  std::int64_t total = 0;
  for (const auto& t : tables)
    total += t.vocab_size * t.dim * t.bytes_per_element *
             t.optimizer.params_width_multiplier;
  if (total > cap * nodes) {
    const std::int64_t per_node_deficit = (total + nodes - 1) / nodes - cap;
    std::ostringstream os;
    os << "infeasible: total footprint " << total << " bytes exceeds " << nodes
       << " x " << cap << " bytes; per-node deficit at an even split:";
    for (NodeId n = 0; n < nodes; ++n)
      os << " node" << n << "=" << per_node_deficit;
    throw InfeasibleError(os.str());
  }
}

ScoredPlan score(const PartitionPlan& plan, const TrafficStats& stats,
                 const std::vector<EmbeddingTableSpec>& specs,
                 const PartitionSearchOptions& opts) {
  ScoredPlan sp;
  sp.plan = plan;
  sp.load = load_imbalance(plan, stats, specs);
  sp.objective = plan_objective(plan, stats, specs, opts);
  return sp;
}

}  // namespace

ScoredPlan hybrid_partition(const ModelSpec& model, NodeId nodes,
                            const TrafficStats& stats,
                            std::int64_t mem_capacity_per_node,
                            std::int64_t search_budget,
                            const PartitionSearchOptions& opts_in) {
  if (nodes < 1) throw InvalidArgumentError("hybrid_partition needs nodes >= 1");
  if (search_budget < 1) throw InvalidArgumentError("search_budget must be >= 1");
  PartitionSearchOptions opts = opts_in;
  opts.mem_capacity_per_node = mem_capacity_per_node;
  check_total_footprint(model.tables, nodes, mem_capacity_per_node);

  // Tables in descending traffic order so the beam decides heavy hitters first.
  std::vector<const EmbeddingTableSpec*> tables;
  for (const auto& t : model.tables) tables.push_back(&t);
  std::sort(tables.begin(), tables.end(),
            [&](const EmbeddingTableSpec* a, const EmbeddingTableSpec* b) {
              const double ta = stats.table_total(a->name) * a->dim * a->bytes_per_element;
              const double tb = stats.table_total(b->name) * b->dim * b->bytes_per_element;
              if (ta != tb) return ta > tb;
              return a->name < b->name;
            });

  std::vector<std::vector<TableMethod>> catalogs;
  for (const auto* t : tables) catalogs.push_back(method_catalog(*t, nodes, opts));

  struct BeamState {
    std::vector<TableMethod> methods;
    double partial_objective = 0.0;
    std::string partial_key;
  };
  std::vector<BeamState> beam{{}};
  for (std::size_t t = 0; t < tables.size(); ++t) {
    std::vector<BeamState> next;
    next.reserve(beam.size() * catalogs[t].size());
    for (const auto& state : beam) {
      for (const auto& method : catalogs[t]) {
        BeamState ns = state;
        ns.methods.push_back(method);
        std::vector<const EmbeddingTableSpec*> prefix(tables.begin(),
                                                      tables.begin() + t + 1);
        Materialized m = materialize(prefix, ns.methods, nodes, stats, opts);
        if (!m.feasible) continue;
        ns.partial_objective = plan_objective(
            m.plan, stats,
            [&] {
              std::vector<EmbeddingTableSpec> sub;
              for (const auto* s : prefix) sub.push_back(*s);
              return sub;
            }(),
            opts);
        ns.partial_key = plan_key(m.plan);
        next.push_back(std::move(ns));
      }
    }
    std::sort(next.begin(), next.end(), [](const BeamState& a, const BeamState& b) {
      if (a.partial_objective != b.partial_objective)
        return a.partial_objective < b.partial_objective;
      return a.partial_key < b.partial_key;
    });
    if (static_cast<std::int64_t>(next.size()) > search_budget)
      next.resize(static_cast<std::size_t>(search_budget));
    beam = std::move(next);
  }

  Candidate best;
  std::vector<std::int64_t> worst_overflow;
  for (const auto& state : beam) {
    Materialized m = materialize(tables, state.methods, nodes, stats, opts);
    if (!m.feasible) continue;
    best.consider(plan_objective(m.plan, stats, model.tables, opts),
                  std::move(m.plan));
  }

  // Clamp from below by the two single-method baselines when feasible.
  {
    PartitionPlan cyclic;
    cyclic.node_count = nodes;
    for (const auto& t : model.tables) {
      PartitionPlan p = row_partition(t, nodes, RowScheme::kCyclic, opts.hash_seed);
      cyclic.shards.insert(cyclic.shards.end(), p.shards.begin(), p.shards.end());
      cyclic.row_schemes[t.name] = RowScheme::kCyclic;
    }
    const auto mem = memory_bytes(cyclic, model.tables);
    const bool ok = mem_capacity_per_node <= 0 ||
                    *std::max_element(mem.begin(), mem.end()) <= mem_capacity_per_node;
    if (ok)
      best.consider(plan_objective(cyclic, stats, model.tables, opts),
                    std::move(cyclic));
  }
  {
    PartitionPlan greedy = table_partition(model.tables, nodes, stats);
    const auto mem = memory_bytes(greedy, model.tables);
    const bool ok = mem_capacity_per_node <= 0 ||
                    *std::max_element(mem.begin(), mem.end()) <= mem_capacity_per_node;
    if (ok)
      best.consider(plan_objective(greedy, stats, model.tables, opts),
                    std::move(greedy));
  }

  if (!best.valid) {
    std::ostringstream os;
    os << "infeasible: no placement fits " << nodes << " nodes at "
       << mem_capacity_per_node << " bytes each";
    throw InfeasibleError(os.str());
  }
  return score(best.plan, stats, model.tables, opts);
}

ScoredPlan exact_partition_oracle(const ModelSpec& model, NodeId nodes,
                                  const TrafficStats& stats,
                                  const PartitionSearchOptions& opts_in,
                                  std::int64_t max_candidates) {
  if (nodes < 1) throw InvalidArgumentError("oracle needs nodes >= 1");
  PartitionSearchOptions opts = opts_in;
  check_total_footprint(model.tables, nodes, opts.mem_capacity_per_node);

  std::vector<const EmbeddingTableSpec*> tables;
  for (const auto& t : model.tables) tables.push_back(&t);
  std::vector<std::vector<TableMethod>> catalogs;
  double space = 1.0;
  for (const auto* t : tables) {
    catalogs.push_back(method_catalog(*t, nodes, opts));
    space *= static_cast<double>(catalogs.back().size());
  }
  if (space > static_cast<double>(max_candidates)) {
    std::ostringstream os;
    os << "oracle refuses: method space has about " << space
       << " candidates, limit is " << max_candidates;
    throw InvalidArgumentError(os.str());
  }

  Candidate best;
  std::vector<std::size_t> odometer(tables.size(), 0);
  std::vector<TableMethod> methods(tables.size());
  bool done = tables.empty();
  while (!done) {
    for (std::size_t i = 0; i < tables.size(); ++i)
      methods[i] = catalogs[i][odometer[i]];
    Materialized m = materialize(tables, methods, nodes, stats, opts);
    if (m.feasible)
      best.consider(plan_objective(m.plan, stats, model.tables, opts),
                    std::move(m.plan));
    // Advance odometer.
    std::size_t i = 0;
    for (; i < odometer.size(); ++i) {
      if (++odometer[i] < catalogs[i].size()) break;
      odometer[i] = 0;
    }
    done = (i == odometer.size());
  }
  if (tables.empty()) {
    PartitionPlan empty;
    empty.node_count = nodes;
    best.consider(0.0, std::move(empty));
  }
  if (!best.valid)
    throw InfeasibleError("oracle found no feasible plan");
  return score(best.plan, stats, model.tables, opts);
}

std::pair<double, double> compare_cyclic_block(const EmbeddingTableSpec& table,
                                               const TrafficStats& stats,
                                               NodeId nodes) {
  const auto& rows = stats.table_rows(table.name);
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i] > rows[i - 1])
      throw InvalidArgumentError(
          "compare_cyclic_block expects stats sorted by descending frequency");
  std::vector<EmbeddingTableSpec> specs{table};
  const auto cyclic = row_partition(table, nodes, RowScheme::kCyclic);
  const auto block = row_partition(table, nodes, RowScheme::kBlock);
  return {load_imbalance(cyclic, stats, specs).imbalance,
          load_imbalance(block, stats, specs).imbalance};
}

// --- JSON ------------------------------------------------------------------

namespace {

json row_set_to_json(const RowSet& set) {
  json j;
  if (std::holds_alternative<RowAll>(set)) {
    j["kind"] = "all";
  } else if (const auto* b = std::get_if<RowBlock>(&set)) {
    j["kind"] = "block";
    j["lo"] = b->lo;
    j["hi"] = b->hi;
  } else if (const auto* c = std::get_if<RowCyclic>(&set)) {
    j["kind"] = "cyclic";
    j["offset"] = c->offset;
    j["stride"] = c->stride;
  } else {
    const auto& h = std::get<RowHash>(set);
    j["kind"] = "hash";
    j["class"] = h.cls;
    j["modulus"] = h.modulus;
    j["seed"] = h.seed;
  }
  return j;
}

RowSet row_set_from_json(const json& j) {
  const std::string kind = j.at("kind");
  if (kind == "all") return RowAll{};
  if (kind == "block") return RowBlock{j.at("lo"), j.at("hi")};
  if (kind == "cyclic") return RowCyclic{j.at("offset"), j.at("stride")};
  if (kind == "hash") return RowHash{j.at("class"), j.at("modulus"), j.at("seed")};
  throw ValidationError("unknown row set kind: " + kind);
}

std::string scheme_name(RowScheme s) {
  switch (s) {
    case RowScheme::kBlock: return "block";
    case RowScheme::kCyclic: return "cyclic";
    case RowScheme::kRandomHash: return "random_hash";
  }
  return "?";
}

RowScheme scheme_from_name(const std::string& s) {
  if (s == "block") return RowScheme::kBlock;
  if (s == "cyclic") return RowScheme::kCyclic;
  if (s == "random_hash") return RowScheme::kRandomHash;
  throw ValidationError("unknown row scheme: " + s);
}

}  // namespace

std::string plan_to_json(const PartitionPlan& plan) {
  json j;
  j["node_count"] = plan.node_count;
  j["row_schemes"] = json::object();
  for (const auto& [table, scheme] : plan.row_schemes)
    j["row_schemes"][table] = scheme_name(scheme);
  j["shards"] = json::array();
  for (const auto& s : plan.shards) {
    json shard;
    shard["table"] = s.table;
    shard["node"] = s.node;
    shard["cols"] = {s.cols.lo, s.cols.hi};
    shard["rows"] = row_set_to_json(s.rows);
    j["shards"].push_back(shard);
  }
  return j.dump(2);
}

PartitionPlan plan_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  PartitionPlan plan;
  plan.node_count = j.at("node_count");
  if (j.contains("row_schemes"))
    for (const auto& [table, scheme] : j.at("row_schemes").items())
      plan.row_schemes[table] = scheme_from_name(scheme.get<std::string>());
  for (const auto& shard : j.at("shards")) {
    ShardSpec s;
    s.table = shard.at("table");
    s.node = shard.at("node");
    s.cols = {shard.at("cols").at(0), shard.at("cols").at(1)};
    s.rows = row_set_from_json(shard.at("rows"));
    plan.shards.push_back(std::move(s));
  }
  return plan;
}

}  // namespace trainsim
