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

#include <doctest.h>

#include "trainsim/errors.hpp"
#include "trainsim/rng.hpp"

using namespace trainsim;

namespace {

EmbeddingTableSpec table(const std::string& name, std::int64_t vocab,
                         std::int32_t dim,
                         OptimizerClass opt = OptimizerClass::kElementWise) {
  EmbeddingTableSpec t;
  t.name = name;
  t.vocab_size = vocab;
  t.dim = dim;
  t.optimizer.kind = opt;
  return t;
}

// The worked two-table instance: 4x64 tables, per-row deduplicated lookup
// rates (0.6, 0.3, 0.2, 0.1), four nodes.
struct TwoTableInstance {
  ModelSpec model;
  TrafficStats stats;

  TwoTableInstance() {
    model.name = "two_table";
    model.tables = {table("t0", 4, 64), table("t1", 4, 64)};
    stats.rows["t0"] = {0.6, 0.3, 0.2, 0.1};
    stats.rows["t1"] = {0.6, 0.3, 0.2, 0.1};
  }

  PartitionPlan row_plan() const {
    PartitionPlan plan;
    plan.node_count = 4;
    for (const auto& t : model.tables) {
      auto p = row_partition(t, 4, RowScheme::kBlock);
      plan.shards.insert(plan.shards.end(), p.shards.begin(), p.shards.end());
      plan.row_schemes[t.name] = RowScheme::kBlock;
    }
    return plan;
  }

  PartitionPlan table_column_plan() const {
    PartitionPlan plan;
    plan.node_count = 4;
    plan.shards = {
        {"t0", RowAll{}, ColRange{0, 32}, 0},
        {"t0", RowAll{}, ColRange{32, 64}, 1},
        {"t1", RowAll{}, ColRange{0, 32}, 2},
        {"t1", RowAll{}, ColRange{32, 64}, 3},
    };
    return plan;
  }
};

// Independent coverage oracle: count owners of every (row, col) cell.
void check_coverage_by_enumeration(const PartitionPlan& plan,
                                   const std::vector<EmbeddingTableSpec>& specs) {
  for (const auto& spec : specs) {
    for (std::int64_t r = 0; r < spec.vocab_size; ++r) {
      for (std::int32_t c = 0; c < spec.dim; ++c) {
        int owners = 0;
        for (const auto& s : plan.shards) {
          if (s.table != spec.name) continue;
          if (c < s.cols.lo || c >= s.cols.hi) continue;
          if (row_in_set(s.rows, r)) ++owners;
        }
        REQUIRE(owners == 1);
      }
    }
  }
}

ModelSpec random_instance(Rng& rng, TrafficStats& stats, NodeId& nodes,
                          bool allow_row_wise = true) {
  ModelSpec model;
  model.name = "random";
  const int n_tables = 1 + static_cast<int>(rng.next_below(4));
  nodes = 1 + static_cast<NodeId>(rng.next_below(4));
  for (int i = 0; i < n_tables; ++i) {
    const std::int64_t vocab = 1 + static_cast<std::int64_t>(rng.next_below(8));
    const std::int32_t dim = 1 + static_cast<std::int32_t>(rng.next_below(8));
    auto t = table("t" + std::to_string(i), vocab, dim);
    if (allow_row_wise && rng.next_below(5) == 0)
      t.optimizer.kind = OptimizerClass::kRowWise;
    auto& rows = stats.rows[t.name];
    for (std::int64_t r = 0; r < vocab; ++r)
      rows.push_back(rng.next_double() * 4.0);
    model.tables.push_back(std::move(t));
  }
  return model;
}

PartitionSearchOptions small_options() {
  PartitionSearchOptions opts;
  opts.column_splits = {1, 2};
  opts.row_schemes = {RowScheme::kCyclic, RowScheme::kBlock};
  return opts;
}

}  // namespace

TEST_CASE("row plan of the two-table instance has load imbalance exactly 2") {
  TwoTableInstance inst;
  const auto report = load_imbalance(inst.row_plan(), inst.stats, inst.model.tables);
  CHECK(report.imbalance == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("table+column plan of the two-table instance has imbalance exactly 1") {
  TwoTableInstance inst;
  const auto report =
      load_imbalance(inst.table_column_plan(), inst.stats, inst.model.tables);
  CHECK(report.imbalance == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single node always reports imbalance 1") {
  auto t = table("t", 5, 3);
  TrafficStats stats;
  stats.rows["t"] = {1.0, 2.0, 3.0, 0.5, 0.25};
  const auto plan = row_partition(t, 1, RowScheme::kBlock);
  CHECK(load_imbalance(plan, stats, {t}).imbalance == 1.0);
}

TEST_CASE("zero traffic reports imbalance 1 with a warning flag") {
  auto t = table("t", 4, 4);
  TrafficStats stats;
  stats.rows["t"] = {0.0, 0.0, 0.0, 0.0};
  const auto report =
      load_imbalance(row_partition(t, 2, RowScheme::kCyclic), stats, {t});
  CHECK(report.imbalance == 1.0);
  CHECK(report.zero_traffic);
}

TEST_CASE("block row partition of vocab 4 over 4 nodes is one row per node") {
  const auto plan = row_partition(table("t", 4, 8), 4, RowScheme::kBlock);
  REQUIRE(plan.shards.size() == 4);
  for (NodeId i = 0; i < 4; ++i) {
    const auto& b = std::get<RowBlock>(plan.shards[static_cast<std::size_t>(i)].rows);
    CHECK(b.lo == i);
    CHECK(b.hi == i + 1);
    CHECK(plan.shards[static_cast<std::size_t>(i)].node == i);
  }
}

TEST_CASE("cyclic row partition of vocab 8 over 4 nodes strides by 4") {
  const auto t = table("t", 8, 8);
  const auto plan = row_partition(t, 4, RowScheme::kCyclic);
  for (const auto& s : plan.shards) {
    const auto& c = std::get<RowCyclic>(s.rows);
    CHECK(c.stride == 4);
    CHECK(c.offset == s.node);
    // Node i holds rows {i, i+4}.
    CHECK(row_in_set(s.rows, c.offset));
    CHECK(row_in_set(s.rows, c.offset + 4));
    CHECK(row_set_cardinality(s.rows, 8) == 2);
  }
  check_coverage_by_enumeration(plan, {t});
}

TEST_CASE("block row partition of vocab 7 over 4 nodes splits 2-2-2-1") {
  const auto t = table("t", 7, 2);
  const auto plan = row_partition(t, 4, RowScheme::kBlock);
  std::vector<std::int64_t> counts;
  for (const auto& s : plan.shards) counts.push_back(row_set_cardinality(s.rows, 7));
  CHECK(counts == std::vector<std::int64_t>{2, 2, 2, 1});
  check_coverage_by_enumeration(plan, {t});
}

TEST_CASE("hash row partition covers every row exactly once") {
  const auto t = table("t", 23, 3);
  const auto plan = row_partition(t, 4, RowScheme::kRandomHash);
  check_coverage_by_enumeration(plan, {t});
  validate_plan(plan, {t});
}

TEST_CASE("column partition splits 64 columns into two half ranges") {
  const auto plan = column_partition(table("t", 4, 64), 2);
  REQUIRE(plan.shards.size() == 2);
  CHECK(plan.shards[0].cols.lo == 0);
  CHECK(plan.shards[0].cols.hi == 32);
  CHECK(plan.shards[1].cols.lo == 32);
  CHECK(plan.shards[1].cols.hi == 64);
}

TEST_CASE("column partition with one shard is the identity split") {
  const auto plan = column_partition(table("t", 4, 64), 1);
  REQUIRE(plan.shards.size() == 1);
  CHECK(plan.shards[0].cols.width() == 64);
}

TEST_CASE("column partition of 10 columns into 3 shards widths are 4-3-3") {
  const auto t = table("t", 5, 10);
  const auto plan = column_partition(t, 3);
  std::vector<std::int32_t> widths;
  for (const auto& s : plan.shards) widths.push_back(s.cols.width());
  CHECK(widths == std::vector<std::int32_t>{4, 3, 3});
  check_coverage_by_enumeration(plan, {t});
}

TEST_CASE("row-wise optimizers cannot be column partitioned") {
  const auto t = table("t", 4, 64, OptimizerClass::kRowWise);
  CHECK_THROWS_AS(column_partition(t, 2), ConstraintViolationError);
  CHECK_NOTHROW(column_partition(t, 1));
}

TEST_CASE("table partition of two equal tables balances perfectly") {
  std::vector<EmbeddingTableSpec> tables{table("a", 4, 8), table("b", 4, 8)};
  TrafficStats stats;
  stats.rows["a"] = {1.0, 1.0, 1.0, 1.0};
  stats.rows["b"] = {1.0, 1.0, 1.0, 1.0};
  const auto plan = table_partition(tables, 2, stats);
  CHECK(load_imbalance(plan, stats, tables).imbalance ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(plan.shards[0].node != plan.shards[1].node);
}

TEST_CASE("greedy table placement of traffic 4-3-2-1 on two nodes gives 5-5") {
  std::vector<EmbeddingTableSpec> tables;
  TrafficStats stats;
  const double traffic[] = {4.0, 3.0, 2.0, 1.0};
  for (int i = 0; i < 4; ++i) {
    tables.push_back(table("t" + std::to_string(i), 1, 1));
    stats.rows["t" + std::to_string(i)] = {traffic[i]};
  }
  const auto plan = table_partition(tables, 2, stats);
  const auto report = load_imbalance(plan, stats, tables);
  CHECK(report.bytes_per_node[0] == doctest::Approx(5.0 * 4));
  CHECK(report.bytes_per_node[1] == doctest::Approx(5.0 * 4));
  CHECK(report.imbalance == doctest::Approx(1.0).epsilon(1e-12));

  // Exhaustive assignment oracle: no 2-node assignment beats max load 5.
  double best = 1e18;
  for (int mask = 0; mask < 16; ++mask) {
    double l0 = 0, l1 = 0;
    for (int i = 0; i < 4; ++i) (mask >> i & 1 ? l1 : l0) += traffic[i];
    best = std::min(best, std::max(l0, l1));
  }
  CHECK(best == doctest::Approx(5.0));
}

TEST_CASE("one table on four nodes strands three of them") {
  std::vector<EmbeddingTableSpec> tables{table("t", 4, 8)};
  TrafficStats stats;
  stats.rows["t"] = {1.0, 1.0, 1.0, 1.0};
  const auto plan = table_partition(tables, 4, stats);
  CHECK(load_imbalance(plan, stats, tables).imbalance ==
        doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("memory accounting for a whole 4x64 table is 1024 bytes") {
  const auto t = table("t", 4, 64);
  PartitionPlan plan;
  plan.node_count = 1;
  plan.shards = {{"t", RowAll{}, ColRange{0, 64}, 0}};
  CHECK(memory_bytes(plan, {t}) == std::vector<std::int64_t>{1024});

  const auto split = column_partition(t, 2);
  CHECK(memory_bytes(split, {t}) == std::vector<std::int64_t>{512, 512});
}

TEST_CASE("memory accounting matches a cell-count oracle on random plans") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    TrafficStats stats;
    NodeId nodes = 1;
    auto model = random_instance(rng, stats, nodes, false);
    const auto sp = hybrid_partition(model, nodes, stats, 0, 1'000'000,
                                     small_options());
    const auto mem = memory_bytes(sp.plan, model.tables);
    // Count cells one by one.
    std::vector<std::int64_t> oracle(static_cast<std::size_t>(nodes), 0);
    for (const auto& spec : model.tables) {
      for (std::int64_t r = 0; r < spec.vocab_size; ++r)
        for (std::int32_t c = 0; c < spec.dim; ++c)
          for (const auto& s : sp.plan.shards) {
            if (s.table != spec.name || c < s.cols.lo || c >= s.cols.hi) continue;
            if (row_in_set(s.rows, r))
              oracle[static_cast<std::size_t>(s.node)] +=
                  spec.bytes_per_element * spec.optimizer.params_width_multiplier;
          }
    }
    CHECK(mem == oracle);
  }
}

TEST_CASE("hybrid search finds the imbalance-1 plan for the two-table instance") {
  TwoTableInstance inst;
  const auto sp = hybrid_partition(inst.model, 4, inst.stats, 0, 1'000'000,
                                   small_options());
  CHECK(sp.load.imbalance == doctest::Approx(1.0).epsilon(1e-12));
  check_coverage_by_enumeration(sp.plan, inst.model.tables);
}

TEST_CASE("hybrid on a single tiny table and one node is trivial") {
  ModelSpec model;
  model.name = "tiny";
  model.tables = {table("t", 2, 2)};
  TrafficStats stats;
  stats.rows["t"] = {1.0, 1.0};
  const auto sp = hybrid_partition(model, 1, stats, 0, 10, small_options());
  CHECK(sp.load.imbalance == 1.0);
}

TEST_CASE("hybrid matches the exhaustive oracle on random small instances") {
  Rng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    TrafficStats stats;
    NodeId nodes = 1;
    auto model = random_instance(rng, stats, nodes);
    const auto opts = small_options();
    const auto heuristic = hybrid_partition(model, nodes, stats, 0, 1'000'000, opts);
    const auto oracle = exact_partition_oracle(model, nodes, stats, opts);
    CHECK(std::abs(heuristic.objective - oracle.objective) <= 1e-9);
    check_coverage_by_enumeration(heuristic.plan, model.tables);
  }
}

TEST_CASE("a starved beam may trail the oracle but never beat it") {
  Rng rng(23);
  for (int trial = 0; trial < 15; ++trial) {
    TrafficStats stats;
    NodeId nodes = 1;
    auto model = random_instance(rng, stats, nodes);
    const auto opts = small_options();
    const auto heuristic = hybrid_partition(model, nodes, stats, 0, 2, opts);
    const auto oracle = exact_partition_oracle(model, nodes, stats, opts);
    CHECK(oracle.objective <= heuristic.objective + 1e-9);
  }
}

TEST_CASE("hybrid is never worse than row-cyclic or table-greedy") {
  Rng rng(24);
  for (int trial = 0; trial < 25; ++trial) {
    TrafficStats stats;
    NodeId nodes = 1;
    auto model = random_instance(rng, stats, nodes);
    const auto opts = small_options();
    const auto sp = hybrid_partition(model, nodes, stats, 0, 4, opts);

    PartitionPlan cyclic;
    cyclic.node_count = nodes;
    for (const auto& t : model.tables) {
      auto p = row_partition(t, nodes, RowScheme::kCyclic);
      cyclic.shards.insert(cyclic.shards.end(), p.shards.begin(), p.shards.end());
    }
    const double row_obj = plan_objective(cyclic, stats, model.tables, opts);
    const double greedy_obj = plan_objective(
        table_partition(model.tables, nodes, stats), stats, model.tables, opts);
    CHECK(sp.objective <= std::min(row_obj, greedy_obj) + 1e-9);
  }
}

TEST_CASE("eq-1 bounds hold for every produced plan") {
  Rng rng(25);
  for (int trial = 0; trial < 25; ++trial) {
    TrafficStats stats;
    NodeId nodes = 1;
    auto model = random_instance(rng, stats, nodes);
    const auto sp = hybrid_partition(model, nodes, stats, 0, 64, small_options());
    CHECK(sp.load.imbalance >= 1.0 - 1e-12);
    CHECK(sp.load.imbalance <= nodes + 1e-12);
  }
}

TEST_CASE("infeasible memory is rejected with per-node deficits") {
  ModelSpec model;
  model.name = "big";
  model.tables = {table("t", 1024, 64)};  // 256 KiB
  TrafficStats stats;
  stats.rows["t"].assign(1024, 1.0);
  CHECK_THROWS_WITH_AS(
      hybrid_partition(model, 2, stats, 1024, 10, small_options()),
      doctest::Contains("deficit"), InfeasibleError);
}

TEST_CASE("oracle refuses oversized method spaces with a size estimate") {
  ModelSpec model;
  model.name = "wide";
  TrafficStats stats;
  PartitionSearchOptions opts = small_options();
  for (int i = 0; i < 16; ++i) {
    model.tables.push_back(table("t" + std::to_string(i), 4, 4));
    stats.rows["t" + std::to_string(i)] = {1, 1, 1, 1};
  }
  CHECK_THROWS_WITH_AS(exact_partition_oracle(model, 4, stats, opts, 1000),
                       doctest::Contains("candidates"), InvalidArgumentError);
}

TEST_CASE("cyclic beats block on the worked 4-row example over 2 nodes") {
  auto t = table("t", 4, 1);
  t.bytes_per_element = 1;
  TrafficStats stats;
  stats.rows["t"] = {0.6, 0.3, 0.2, 0.1};
  const auto [cyclic, block] = compare_cyclic_block(t, stats, 2);
  // Hand-computed: block nodes carry (0.9, 0.3), cyclic nodes carry (0.8, 0.4).
  CHECK(block == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(cyclic == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("cyclic and block tie under uniform traffic") {
  auto t = table("t", 8, 1);
  TrafficStats stats;
  stats.rows["t"].assign(8, 1.0);
  const auto [cyclic, block] = compare_cyclic_block(t, stats, 4);
  CHECK(cyclic == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(block == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cyclic never loses to block on frequency-sorted tables") {
  Rng rng(26);
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t vocab = 2 + static_cast<std::int64_t>(rng.next_below(64));
    auto t = table("t", vocab, 4);
    TrafficStats stats;
    auto& rows = stats.rows["t"];
    double v = 10.0;
    for (std::int64_t r = 0; r < vocab; ++r) {
      rows.push_back(v);
      v *= 0.7 + 0.29 * rng.next_double();  // strictly decreasing
    }
    const NodeId nodes = static_cast<NodeId>(2 + rng.next_below(7));
    const auto [cyclic, block] = compare_cyclic_block(t, stats, nodes);
    CHECK(cyclic <= block + 1e-12);
  }
}

TEST_CASE("compare_cyclic_block requires sorted stats") {
  auto t = table("t", 3, 1);
  TrafficStats stats;
  stats.rows["t"] = {0.1, 0.9, 0.5};
  CHECK_THROWS_AS(compare_cyclic_block(t, stats, 2), InvalidArgumentError);
}

TEST_CASE("plans survive a json round trip") {
  TwoTableInstance inst;
  const auto sp =
      hybrid_partition(inst.model, 4, inst.stats, 0, 1'000'000, small_options());
  const auto restored = plan_from_json(plan_to_json(sp.plan));
  CHECK(plan_to_json(restored) == plan_to_json(sp.plan));
  CHECK(load_imbalance(restored, inst.stats, inst.model.tables).imbalance ==
        doctest::Approx(sp.load.imbalance).epsilon(1e-12));
}

TEST_CASE("plan validation flags overlaps and gaps") {
  const auto t = table("t", 4, 8);
  PartitionPlan plan;
  plan.node_count = 2;
  plan.shards = {{"t", RowBlock{0, 2}, ColRange{0, 8}, 0},
                 {"t", RowBlock{1, 4}, ColRange{0, 8}, 1}};
  CHECK_THROWS_AS(validate_plan(plan, {t}), ValidationError);
  plan.shards[1].rows = RowBlock{2, 3};
  CHECK_THROWS_AS(validate_plan(plan, {t}), ValidationError);
  plan.shards[1].rows = RowBlock{2, 4};
  CHECK_NOTHROW(validate_plan(plan, {t}));
}
