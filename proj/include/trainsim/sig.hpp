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

#ifndef TRAINSIM_SIG_HPP_
#define TRAINSIM_SIG_HPP_

#include <array>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "trainsim/rng.hpp"

namespace trainsim::sig {

// --- Transformation graphs --------------------------------------------------

struct GraphNode {
  std::string id;
  std::string op;  // read | unigrams | intersect | concat | set_intersect | set_union
  std::vector<std::string> params;  // read: the raw field name
  std::vector<std::string> inputs;  // node ids
};

struct TransformGraph {
  std::vector<GraphNode> nodes;
  std::vector<std::string> outputs;  // one per model input
  // Late-arriving/mutable sources cannot be memoized and are rejected.
  bool mutable_data = false;

  void validate() const;
  std::set<std::string> raw_reads() const;
  const GraphNode& node(const std::string& id) const;

  std::string to_json() const;
  static TransformGraph from_json(const std::string& text);
};

struct ConnectedComponent {
  TransformGraph subgraph;  // restricted to the output's ancestor cone
  std::string output_node;
};

struct CanonicalKey {
  std::array<std::uint8_t, 32> digest{};
  std::string hex() const;
  auto operator<=>(const CanonicalKey&) const = default;
};

struct OpInfo {
  int arity = 1;            // -1 for variadic, 0 for leaves
  bool commutative = false; // operand order does not affect the output
};

const OpInfo& op_info(const std::string& op);

// Weakly-connected components of the graph, each pruned to its designated
// output's ancestor cone. Order is deterministic: smallest raw field read,
// then canonical key.
std::vector<ConnectedComponent> extract_components(const TransformGraph& graph);

// Merkle-style SHA-256 over op labels, params and child digests; child
// digests are sorted for commutative ops and positional otherwise. Node ids
// never enter the hash.
CanonicalKey canonical_key(const ConnectedComponent& component);

using TokenList = std::vector<std::string>;
using RawRecord = std::map<std::string, std::string>;

// Evaluates the component over one raw record.
//   read(f):          whitespace-split of field f
//   unigrams(x):      x deduplicated, first-occurrence order
//   intersect(x,y):   unique tokens of x also present in y, x's order
//   concat(x,y):      x followed by y
//   set_intersect:    sorted unique tokens common to both
//   set_union:        sorted unique tokens of either
TokenList eval_transform(const ConnectedComponent& component,
                         const RawRecord& record);

// --- Raw data ---------------------------------------------------------------

class RawSource {
 public:
  virtual ~RawSource() = default;
  virtual RawRecord record(std::uint64_t event_id) const = 0;
};

// Deterministic synthetic records: each field holds tokens drawn from a
// fixed vocabulary by hashing (event, field, position).
class SyntheticRawSource : public RawSource {
 public:
  SyntheticRawSource(std::vector<std::string> fields, int tokens_per_field,
                     int vocab, std::uint64_t seed);
  RawRecord record(std::uint64_t event_id) const override;

 private:
  std::vector<std::string> fields_;
  int tokens_per_field_;
  int vocab_;
  std::uint64_t seed_;
};

// --- Memoization service ------------------------------------------------------

struct EventRange {
  std::uint64_t lo = 0, hi = 0;  // [lo, hi)
  auto operator<=>(const EventRange&) const = default;
};

enum class BlockStatus { kScheduled, kMaterializing, kReady };

struct ReadSolutionItem {
  std::string output_node;
  CanonicalKey key;
  std::string storage_location;
  BlockStatus status = BlockStatus::kScheduled;
  bool cache_hit = false;
};

struct ReadSolution {
  std::vector<ReadSolutionItem> inputs;
};

struct MemoTask {
  std::uint64_t id = 0;
  CanonicalKey key;
  EventRange range;
  std::string client;
  int priority = 0;
  std::uint64_t enqueue_seq = 0;
};

struct SigMetrics {
  std::int64_t hits = 0;
  std::int64_t misses = 0;
  double hit_rate = 0.0;
  double mean_consumers_per_ready_block = 0.0;
  std::int64_t peak_consumers = 0;
  std::int64_t worker_evaluations = 0;
  std::int64_t failed_tasks = 0;
};

struct EvictPredicate {
  enum class Kind { kRawField, kPipeline, kKey };
  Kind kind = Kind::kRawField;
  std::string raw_field;
  std::string pipeline;
  CanonicalKey key;

  static EvictPredicate ByRawField(std::string field);
  static EvictPredicate ByPipeline(std::string pipeline);
  static EvictPredicate ByKey(CanonicalKey key);
};

enum class SchedulingDiscipline { kStrictPriority, kWeightedFair };

// The matching/scheduling/worker core. All state mutations funnel through one
// mutex; deterministic when driven by a single worker.
class SigService {
 public:
  struct Options {
    SchedulingDiscipline discipline = SchedulingDiscipline::kStrictPriority;
  };

  SigService() = default;
  explicit SigService(Options options) : options_(options) {}

  void register_client(const std::string& id, int priority);

  // Matches each component against the cache. Hits return the existing
  // location and bump last_requested; misses insert unconditionally, assign a
  // location and enqueue a task at the client's priority.
  ReadSolution submit(const TransformGraph& graph, const std::string& model,
                      const std::string& pipeline, const std::string& client,
                      EventRange range, std::int64_t now);

  // Dequeues up to budget tasks, evaluates each component over its event
  // range against the raw source, stores the block and flips it to ready.
  // Returns executed task ids. A failing evaluation marks the task failed and
  // leaves the block unready.
  std::vector<std::uint64_t> worker_poll_execute(const RawSource& raw,
                                                 std::int64_t budget,
                                                 std::int64_t now);

  std::vector<CanonicalKey> evict_stale(std::int64_t now, std::int64_t ttl);
  std::vector<CanonicalKey> evict_query(const EvictPredicate& predicate);

  SigMetrics metrics() const;
  void reset_metrics();

  // Introspection for tests and the CLI.
  std::int64_t pending_tasks() const;
  std::int64_t entry_count() const;
  std::int64_t materializations(const CanonicalKey& key) const;
  std::optional<BlockStatus> block_status(const CanonicalKey& key,
                                          EventRange range) const;
  const std::vector<TokenList>* warehouse_block(const std::string& location) const;
  std::vector<std::string> ready_locations() const;

  std::string snapshot_json() const;
  // Replaces all service state with the snapshot's.
  void load_snapshot(const std::string& text);

 private:
  struct BlockState {
    std::string location;
    BlockStatus status = BlockStatus::kScheduled;
    std::optional<std::uint64_t> producer_task;
  };
  struct Entry {
    CanonicalKey key;
    ConnectedComponent component;
    std::map<EventRange, BlockState> blocks;
    std::int64_t last_requested = 0;
    std::set<std::pair<std::string, std::string>> consumers;  // (model, pipeline)
    std::int64_t materializations = 0;
  };

  std::optional<MemoTask> pop_next_task_locked();
  void erase_entry_locked(const CanonicalKey& key);

  Options options_;
  mutable std::recursive_mutex mutex_;
  std::map<CanonicalKey, Entry> entries_;
  std::map<std::string, int> client_priority_;
  std::map<std::string, std::vector<MemoTask>> queues_;  // client -> FIFO
  std::map<std::string, std::int64_t> client_served_;    // weighted-fair state
  std::map<std::string, std::vector<TokenList>> warehouse_;
  std::map<std::string, std::set<CanonicalKey>> raw_field_index_;
  std::map<std::string, std::set<CanonicalKey>> pipeline_index_;
  std::int64_t hits_ = 0;
  std::int64_t misses_ = 0;
  std::int64_t worker_evaluations_ = 0;
  std::int64_t failed_tasks_ = 0;
  std::uint64_t next_task_id_ = 1;
  std::uint64_t next_seq_ = 1;
};

}  // namespace trainsim::sig

#endif  // TRAINSIM_SIG_HPP_
