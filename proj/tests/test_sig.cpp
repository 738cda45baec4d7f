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

#include "trainsim/sig.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

#include <doctest.h>

#include "trainsim/errors.hpp"

using namespace trainsim;
using namespace trainsim::sig;

namespace {

// The worked example: intersect the unigrams of two text fields, then append
// a third field.
TransformGraph example_graph(const std::string& prefix = "") {
  TransformGraph g;
  g.nodes = {{prefix + "ra", "read", {"field_a"}, {}},
             {prefix + "rb", "read", {"field_b"}, {}},
             {prefix + "ua", "unigrams", {}, {prefix + "ra"}},
             {prefix + "ub", "unigrams", {}, {prefix + "rb"}},
             {prefix + "i", "intersect", {}, {prefix + "ua", prefix + "ub"}},
             {prefix + "rc", "read", {"field_c"}, {}},
             {prefix + "k", "concat", {}, {prefix + "i", prefix + "rc"}}};
  g.outputs = {prefix + "k"};
  return g;
}

TransformGraph chain_graph(const std::string& field, int depth,
                           const std::string& prefix = "n") {
  TransformGraph g;
  g.nodes.push_back({prefix + "0", "read", {field}, {}});
  for (int i = 1; i <= depth; ++i)
    g.nodes.push_back({prefix + std::to_string(i), "unigrams", {},
                       {prefix + std::to_string(i - 1)}});
  g.outputs = {prefix + std::to_string(depth)};
  return g;
}

// Reference interpreter, written independently of eval_transform.
TokenList reference_eval(const TransformGraph& g, const std::string& id,
                         const RawRecord& record) {
  const GraphNode& n = g.node(id);
  auto tokens_of = [&](const std::string& child) {
    return reference_eval(g, child, record);
  };
  if (n.op == "read") {
    TokenList out;
    std::istringstream is(record.at(n.params[0]));
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
  }
  if (n.op == "unigrams") {
    TokenList in = tokens_of(n.inputs[0]), out;
    for (const auto& t : in)
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    return out;
  }
  if (n.op == "intersect") {
    TokenList x = tokens_of(n.inputs[0]), y = tokens_of(n.inputs[1]), out;
    for (const auto& t : x)
      if (std::find(y.begin(), y.end(), t) != y.end() &&
          std::find(out.begin(), out.end(), t) == out.end())
        out.push_back(t);
    return out;
  }
  if (n.op == "concat") {
    TokenList x = tokens_of(n.inputs[0]), y = tokens_of(n.inputs[1]);
    x.insert(x.end(), y.begin(), y.end());
    return x;
  }
  if (n.op == "set_intersect" || n.op == "set_union") {
    TokenList x = tokens_of(n.inputs[0]), y = tokens_of(n.inputs[1]);
    std::set<std::string> sx(x.begin(), x.end()), sy(y.begin(), y.end()), out;
    if (n.op == "set_intersect") {
      for (const auto& t : sx)
        if (sy.count(t)) out.insert(t);
    } else {
      out = sx;
      out.insert(sy.begin(), sy.end());
    }
    return TokenList(out.begin(), out.end());
  }
  throw InvalidGraphError("reference: unknown op " + n.op);
}

}  // namespace

TEST_CASE("two disjoint reads split into two components") {
  TransformGraph g;
  g.nodes = {{"a", "read", {"fa"}, {}}, {"b", "read", {"fb"}, {}}};
  g.outputs = {"a", "b"};
  const auto components = extract_components(g);
  CHECK(components.size() == 2);
}

TEST_CASE("the worked example graph is a single component") {
  const auto components = extract_components(example_graph());
  REQUIRE(components.size() == 1);
  CHECK(components[0].output_node == "k");
  CHECK(components[0].subgraph.raw_reads() ==
        std::set<std::string>{"field_a", "field_b", "field_c"});
}

TEST_CASE("component count matches a union-find oracle on random forests") {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    TransformGraph g;
    const int chains = 1 + static_cast<int>(rng.next_below(6));
    for (int c = 0; c < chains; ++c) {
      const auto chain = chain_graph("f" + std::to_string(c),
                                     1 + static_cast<int>(rng.next_below(4)),
                                     "c" + std::to_string(c) + "_");
      g.nodes.insert(g.nodes.end(), chain.nodes.begin(), chain.nodes.end());
      g.outputs.push_back(chain.outputs[0]);
    }
    CHECK(extract_components(g).size() == static_cast<std::size_t>(chains));
  }
}

TEST_CASE("cyclic graphs are rejected") {
  TransformGraph g;
  g.nodes = {{"a", "unigrams", {}, {"b"}}, {"b", "unigrams", {}, {"a"}}};
  g.outputs = {"a"};
  CHECK_THROWS_AS(extract_components(g), InvalidGraphError);
}

TEST_CASE("a component with two designated outputs is rejected") {
  TransformGraph g;
  g.nodes = {{"a", "read", {"f"}, {}}, {"b", "unigrams", {}, {"a"}}};
  g.outputs = {"a", "b"};
  CHECK_THROWS_AS(extract_components(g), InvalidGraphError);
}

TEST_CASE("canonical keys ignore node id numbering") {
  const auto a = extract_components(example_graph("x"));
  const auto b = extract_components(example_graph("completely_different_"));
  CHECK(canonical_key(a[0]) == canonical_key(b[0]));
}

TEST_CASE("commutative op operand order does not change the key") {
  auto build = [](bool swapped) {
    TransformGraph g;
    g.nodes = {{"a", "read", {"fa"}, {}},
               {"b", "read", {"fb"}, {}},
               {"s", "set_intersect", {},
                swapped ? std::vector<std::string>{"b", "a"}
                        : std::vector<std::string>{"a", "b"}}};
    g.outputs = {"s"};
    return extract_components(g)[0];
  };
  CHECK(canonical_key(build(false)) == canonical_key(build(true)));
}

TEST_CASE("order-preserving intersect keeps operand order in the key") {
  auto build = [](bool swapped) {
    TransformGraph g;
    g.nodes = {{"a", "read", {"fa"}, {}},
               {"b", "read", {"fb"}, {}},
               {"s", "intersect", {},
                swapped ? std::vector<std::string>{"b", "a"}
                        : std::vector<std::string>{"a", "b"}}};
    g.outputs = {"s"};
    return extract_components(g)[0];
  };
  CHECK(canonical_key(build(false)) != canonical_key(build(true)));
}

TEST_CASE("field mutations never collide over many random graphs") {
  std::set<std::string> keys;
  int graphs = 0;
  for (int i = 0; i < 2500; ++i) {
    for (int depth = 1; depth <= 4; ++depth) {
      const auto g = chain_graph("field" + std::to_string(i), depth);
      keys.insert(canonical_key(extract_components(g)[0]).hex());
      ++graphs;
    }
  }
  CHECK(keys.size() == static_cast<std::size_t>(graphs));
}

TEST_CASE("the worked example evaluates to shoe sale") {
  const auto c = extract_components(example_graph())[0];
  const RawRecord record{{"field_a", "red shoe"},
                         {"field_b", "shoe store"},
                         {"field_c", "sale"}};
  CHECK(eval_transform(c, record) == TokenList{"shoe", "sale"});
}

TEST_CASE("intersect of a list with itself equals its unigrams") {
  TransformGraph g;
  g.nodes = {{"a", "read", {"f"}, {}},
             {"i", "intersect", {}, {"a", "a"}}};
  g.outputs = {"i"};
  TransformGraph u;
  u.nodes = {{"a", "read", {"f"}, {}}, {"u", "unigrams", {}, {"a"}}};
  u.outputs = {"u"};
  const RawRecord record{{"f", "b a c a b d"}};
  CHECK(eval_transform(extract_components(g)[0], record) ==
        eval_transform(extract_components(u)[0], record));
}

TEST_CASE("evaluation matches the reference interpreter on random records") {
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 6, 8, 99);
  const auto c = extract_components(example_graph())[0];
  for (std::uint64_t e = 0; e < 200; ++e) {
    const auto record = raw.record(e);
    CHECK(eval_transform(c, record) ==
          reference_eval(c.subgraph, c.output_node, record));
  }
}

TEST_CASE("missing raw fields are reported by name") {
  const auto c = extract_components(example_graph())[0];
  const RawRecord record{{"field_a", "x"}, {"field_b", "y"}};
  CHECK_THROWS_WITH_AS(eval_transform(c, record),
                       doctest::Contains("field_c"), MissingInputError);
}

TEST_CASE("resubmitting the same graph hits every component and adds no work") {
  SigService svc;
  svc.register_client("c", 5);
  const auto g = example_graph();
  const auto first = svc.submit(g, "m1", "p1", "c", {0, 8}, 10);
  REQUIRE(first.inputs.size() == 1);
  CHECK(!first.inputs[0].cache_hit);
  const auto pending = svc.pending_tasks();
  const auto second = svc.submit(g, "m2", "p2", "c", {0, 8}, 20);
  CHECK(second.inputs[0].cache_hit);
  CHECK(second.inputs[0].storage_location == first.inputs[0].storage_location);
  CHECK(svc.pending_tasks() == pending);
}

TEST_CASE("two models sharing one of two components create three entries") {
  SigService svc;
  TransformGraph m1;
  {
    auto shared = chain_graph("shared_field", 2, "s");
    auto own = chain_graph("own_a", 1, "a");
    m1.nodes = shared.nodes;
    m1.nodes.insert(m1.nodes.end(), own.nodes.begin(), own.nodes.end());
    m1.outputs = {shared.outputs[0], own.outputs[0]};
  }
  TransformGraph m2;
  {
    auto shared = chain_graph("shared_field", 2, "z");
    auto own = chain_graph("own_b", 1, "b");
    m2.nodes = shared.nodes;
    m2.nodes.insert(m2.nodes.end(), own.nodes.begin(), own.nodes.end());
    m2.outputs = {shared.outputs[0], own.outputs[0]};
  }
  svc.submit(m1, "m1", "p1", "c", {0, 4}, 0);
  svc.submit(m2, "m2", "p2", "c", {0, 4}, 1);
  CHECK(svc.entry_count() == 3);
}

TEST_CASE("empty graphs produce empty read solutions") {
  SigService svc;
  TransformGraph empty;
  const auto solution = svc.submit(empty, "m", "p", "c", {0, 4}, 0);
  CHECK(solution.inputs.empty());
}

TEST_CASE("mutable data is rejected as unsupported") {
  SigService svc;
  auto g = example_graph();
  g.mutable_data = true;
  CHECK_THROWS_AS(svc.submit(g, "m", "p", "c", {0, 4}, 0), UnsupportedError);
}

TEST_CASE("a single queued task executes and its block becomes ready") {
  SigService svc;
  const auto g = example_graph();
  const auto solution = svc.submit(g, "m", "p", "c", {0, 4}, 0);
  const auto key = solution.inputs[0].key;
  CHECK(svc.block_status(key, {0, 4}) == BlockStatus::kScheduled);
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 4, 16, 1);
  const auto executed = svc.worker_poll_execute(raw, 10, 5);
  CHECK(executed.size() == 1);
  CHECK(svc.block_status(key, {0, 4}) == BlockStatus::kReady);
  const auto* block = svc.warehouse_block(solution.inputs[0].storage_location);
  REQUIRE(block != nullptr);
  CHECK(block->size() == 4);
}

TEST_CASE("budget zero leaves the service untouched") {
  SigService svc;
  svc.submit(example_graph(), "m", "p", "c", {0, 4}, 0);
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 4, 16, 1);
  const auto before = svc.pending_tasks();
  CHECK(svc.worker_poll_execute(raw, 0, 1).empty());
  CHECK(svc.pending_tasks() == before);
}

TEST_CASE("strict priority drains the high-priority client first") {
  SigService svc;
  svc.register_client("high", 10);
  svc.register_client("low", 1);
  std::vector<CanonicalKey> high_keys, low_keys;
  for (int i = 0; i < 10; ++i) {
    const auto hg = chain_graph("hi" + std::to_string(i), 1);
    const auto lg = chain_graph("lo" + std::to_string(i), 1);
    high_keys.push_back(
        svc.submit(hg, "mh", "ph", "high", {0, 2}, i).inputs[0].key);
    low_keys.push_back(
        svc.submit(lg, "ml", "pl", "low", {0, 2}, i).inputs[0].key);
  }
  std::vector<std::string> fields;
  for (int i = 0; i < 10; ++i) {
    fields.push_back("hi" + std::to_string(i));
    fields.push_back("lo" + std::to_string(i));
  }
  SyntheticRawSource raw(fields, 2, 8, 2);
  const auto executed = svc.worker_poll_execute(raw, 11, 100);
  CHECK(executed.size() == 11);
  // Priority-queue oracle: all ten high tasks run before any low task.
  for (const auto& k : high_keys)
    CHECK(svc.block_status(k, {0, 2}) == BlockStatus::kReady);
  int low_ready = 0;
  for (const auto& k : low_keys)
    if (svc.block_status(k, {0, 2}) == BlockStatus::kReady) ++low_ready;
  CHECK(low_ready == 1);
  // No lower-priority task ran while a higher-priority one was pending.
}

TEST_CASE("a failing evaluation marks the task failed and the block unready") {
  SigService svc;
  const auto g = example_graph();
  const auto key = svc.submit(g, "m", "p", "c", {0, 2}, 0).inputs[0].key;
  SyntheticRawSource raw({"field_a", "field_b"}, 2, 8, 3);  // field_c missing
  const auto executed = svc.worker_poll_execute(raw, 5, 1);
  CHECK(executed.empty());
  CHECK(svc.block_status(key, {0, 2}) == BlockStatus::kScheduled);
  CHECK(svc.metrics().failed_tasks == 1);
  CHECK(svc.metrics().worker_evaluations == 0);
}

TEST_CASE("fresh entries survive stale eviction and old ones do not") {
  SigService svc;
  const auto old_key =
      svc.submit(chain_graph("old", 1), "m", "p", "c", {0, 2}, 0).inputs[0].key;
  const auto new_key =
      svc.submit(chain_graph("new", 1), "m", "p", "c", {0, 2}, 900).inputs[0].key;
  const auto evicted = svc.evict_stale(1000, 500);
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0] == old_key);
  // Filter oracle across a mixed population.
  CHECK(svc.block_status(new_key, {0, 2}).has_value());
  CHECK(!svc.block_status(old_key, {0, 2}).has_value());
  // The next submit of the evicted graph misses again.
  const auto resubmit = svc.submit(chain_graph("old", 1), "m", "p", "c", {0, 2}, 1001);
  CHECK(!resubmit.inputs[0].cache_hit);
}

TEST_CASE("stale eviction requires a positive ttl") {
  SigService svc;
  CHECK_THROWS_AS(svc.evict_stale(10, 0), InvalidArgumentError);
}

TEST_CASE("evict by raw field hits exactly the entries reading that field") {
  SigService svc;
  svc.submit(example_graph(), "m", "p", "c", {0, 2}, 0);
  svc.submit(chain_graph("unrelated", 2), "m", "p", "c", {0, 2}, 0);
  const auto evicted = svc.evict_query(EvictPredicate::ByRawField("field_b"));
  CHECK(evicted.size() == 1);
  CHECK(svc.entry_count() == 1);
  // Re-submission schedules a fresh task.
  const auto again = svc.submit(example_graph(), "m", "p", "c", {0, 2}, 1);
  CHECK(!again.inputs[0].cache_hit);
}

TEST_CASE("evict by pipeline removes shared entries too") {
  SigService svc;
  const auto g = chain_graph("shared", 1);
  svc.submit(g, "m1", "p1", "c", {0, 2}, 0);
  svc.submit(g, "m2", "p2", "c", {0, 2}, 0);
  const auto evicted = svc.evict_query(EvictPredicate::ByPipeline("p1"));
  CHECK(evicted.size() == 1);  // shared by p2, evicted anyway
  CHECK(svc.entry_count() == 0);
}

TEST_CASE("an unmatched predicate evicts nothing") {
  SigService svc;
  svc.submit(example_graph(), "m", "p", "c", {0, 2}, 0);
  CHECK(svc.evict_query(EvictPredicate::ByRawField("no_such_field")).empty());
  CHECK(svc.evict_query(EvictPredicate::ByPipeline("no_such_pipe")).empty());
  CHECK(svc.entry_count() == 1);
}

TEST_CASE("first submission reports a zero hit rate") {
  SigService svc;
  svc.submit(example_graph(), "m", "p", "c", {0, 2}, 0);
  CHECK(svc.metrics().hit_rate == 0.0);
}

TEST_CASE("k models sharing a graph average k consumers per ready block") {
  SigService svc;
  const auto g = example_graph();
  for (int k = 0; k < 7; ++k)
    svc.submit(g, "m" + std::to_string(k), "p" + std::to_string(k), "c", {0, 2}, k);
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 2, 8, 4);
  svc.worker_poll_execute(raw, 10, 10);
  const auto m = svc.metrics();
  CHECK(m.mean_consumers_per_ready_block == doctest::Approx(7.0));
  CHECK(m.peak_consumers == 7);
}

TEST_CASE("metrics equal a brute-force recount of the submission log") {
  SigService svc;
  Rng rng(55);
  // 30 models drawing from a pool of 50 chain graphs, with resubmission.
  std::int64_t expect_hits = 0, expect_misses = 0;
  std::set<std::pair<std::string, std::string>> seen;  // (key-ish, range)
  for (int step = 0; step < 400; ++step) {
    const int component = static_cast<int>(rng.next_below(50));
    const int model = static_cast<int>(rng.next_below(30));
    const auto g = chain_graph("pool" + std::to_string(component),
                               1 + component % 3);
    const std::string log_key =
        "pool" + std::to_string(component) + "/" + std::to_string(component % 3);
    if (seen.insert({log_key, "0-4"}).second)
      ++expect_misses;
    else
      ++expect_hits;
    svc.submit(g, "m" + std::to_string(model), "p" + std::to_string(model), "c",
               {0, 4}, step);
  }
  const auto m = svc.metrics();
  CHECK(m.hits == expect_hits);
  CHECK(m.misses == expect_misses);
  CHECK(m.hit_rate ==
        doctest::Approx(expect_hits / static_cast<double>(400)));
}

TEST_CASE("a component shared by k models is evaluated exactly once") {
  SigService svc;
  const auto g = example_graph();
  CanonicalKey key;
  for (int k = 0; k < 22; ++k)
    key = svc.submit(g, "m" + std::to_string(k), "p" + std::to_string(k), "c",
                     {0, 4}, k)
              .inputs[0]
              .key;
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 3, 16, 5);
  while (svc.pending_tasks() > 0) svc.worker_poll_execute(raw, 1, 50);
  CHECK(svc.materializations(key) == 1);
  // After an eviction the next consumer pays exactly one re-materialization.
  svc.evict_query(EvictPredicate::ByKey(key));
  svc.submit(g, "m0", "p0", "c", {0, 4}, 100);
  while (svc.pending_tasks() > 0) svc.worker_poll_execute(raw, 1, 101);
  CHECK(svc.materializations(key) == 1);  // fresh entry, one evaluation
  CHECK(svc.metrics().worker_evaluations == 2);
}

TEST_CASE("snapshots restore entries, metrics and queues") {
  SigService svc;
  svc.register_client("c", 3);
  const auto g = example_graph();
  const auto key = svc.submit(g, "m", "p", "c", {0, 4}, 7).inputs[0].key;
  SyntheticRawSource raw({"field_a", "field_b", "field_c"}, 3, 16, 6);
  svc.worker_poll_execute(raw, 10, 8);
  svc.submit(g, "m2", "p2", "c", {0, 4}, 9);  // a hit
  const std::string snapshot = svc.snapshot_json();

  SigService restored;
  restored.load_snapshot(snapshot);
  CHECK(restored.entry_count() == 1);
  CHECK(restored.block_status(key, {0, 4}) == BlockStatus::kReady);
  CHECK(restored.metrics().hits == 1);
  CHECK(restored.metrics().misses == 1);
  // The restored cache still matches the same graph.
  const auto solution = restored.submit(g, "m3", "p3", "c", {0, 4}, 10);
  CHECK(solution.inputs[0].cache_hit);
}

TEST_CASE("weighted fair scheduling still serves low priority clients early") {
  SigService::Options options;
  options.discipline = SchedulingDiscipline::kWeightedFair;
  SigService svc(options);
  svc.register_client("high", 9);
  svc.register_client("low", 1);
  std::vector<std::string> fields;
  for (int i = 0; i < 10; ++i) {
    svc.submit(chain_graph("hi" + std::to_string(i), 1), "mh", "ph", "high",
               {0, 2}, i);
    svc.submit(chain_graph("lo" + std::to_string(i), 1), "ml", "pl", "low",
               {0, 2}, i);
    fields.push_back("hi" + std::to_string(i));
    fields.push_back("lo" + std::to_string(i));
  }
  SyntheticRawSource raw(fields, 2, 8, 7);
  svc.worker_poll_execute(raw, 10, 50);
  // 9:1 weighting: nine high tasks and one low task execute.
  int low_ready = 0;
  for (int i = 0; i < 10; ++i) {
    const auto g = chain_graph("lo" + std::to_string(i), 1);
    const auto key = canonical_key(extract_components(g)[0]);
    if (svc.block_status(key, {0, 2}) == BlockStatus::kReady) ++low_ready;
  }
  CHECK(low_ready == 1);
}
