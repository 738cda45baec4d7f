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
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "trainsim/errors.hpp"

namespace trainsim::sig {

using json = nlohmann::json;

const OpInfo& op_info(const std::string& op) {
  static const std::map<std::string, OpInfo> kOps = {
      {"read", {0, false}},          {"unigrams", {1, false}},
      {"intersect", {2, false}},     {"concat", {2, false}},
      {"set_intersect", {2, true}},  {"set_union", {2, true}},
  };
  auto it = kOps.find(op);
  if (it == kOps.end()) throw InvalidGraphError("unknown op: " + op);
  return it->second;
}

const GraphNode& TransformGraph::node(const std::string& id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw InvalidGraphError("unknown node id: " + id);
}

void TransformGraph::validate() const {
  std::unordered_map<std::string, const GraphNode*> by_id;
  for (const auto& n : nodes) {
    if (!by_id.emplace(n.id, &n).second)
      throw InvalidGraphError("duplicate node id: " + n.id);
    const OpInfo& info = op_info(n.op);
    if (info.arity >= 0 && static_cast<int>(n.inputs.size()) != info.arity)
      throw InvalidGraphError("node " + n.id + ": op " + n.op + " expects " +
                              std::to_string(info.arity) + " inputs, got " +
                              std::to_string(n.inputs.size()));
    if (n.op == "read" && n.params.size() != 1)
      throw InvalidGraphError("node " + n.id + ": read needs one field param");
  }
  for (const auto& n : nodes)
    for (const auto& in : n.inputs)
      if (!by_id.count(in))
        throw InvalidGraphError("node " + n.id + " references missing node " + in);
  for (const auto& out : outputs)
    if (!by_id.count(out))
      throw InvalidGraphError("output references missing node " + out);

  // Cycle check plus reachability from read leaves, in one DFS.
  enum class Color { kWhite, kGray, kBlack };
  std::unordered_map<std::string, Color> color;
  std::unordered_map<std::string, bool> grounded;  // reaches a read leaf
  std::function<bool(const GraphNode&)> visit = [&](const GraphNode& n) -> bool {
    auto& c = color[n.id];
    if (c == Color::kGray) throw InvalidGraphError("graph contains a cycle through " + n.id);
    if (c == Color::kBlack) return grounded[n.id];
    c = Color::kGray;
    bool g = n.op == "read";
    bool all_inputs_grounded = !n.inputs.empty();
    for (const auto& in : n.inputs)
      all_inputs_grounded &= visit(*by_id.at(in));
    g = g || all_inputs_grounded;
    color[n.id] = Color::kBlack;
    grounded[n.id] = g;
    return g;
  };
  for (const auto& n : nodes) visit(n);
  for (const auto& out : outputs)
    if (!grounded[out])
      throw InvalidGraphError("output " + out + " is not grounded in raw reads");
}

std::set<std::string> TransformGraph::raw_reads() const {
  std::set<std::string> fields;
  for (const auto& n : nodes)
    if (n.op == "read") fields.insert(n.params.front());
  return fields;
}

std::string TransformGraph::to_json() const {
  json j;
  j["nodes"] = json::array();
  for (const auto& n : nodes)
    j["nodes"].push_back({{"id", n.id},
                          {"op", n.op},
                          {"params", n.params},
                          {"inputs", n.inputs}});
  j["outputs"] = outputs;
  if (mutable_data) j["mutable"] = true;
  return j.dump();
}

TransformGraph TransformGraph::from_json(const std::string& text) {
  const json j = json::parse(text);
  TransformGraph g;
  for (const auto& n : j.at("nodes")) {
    GraphNode node;
    node.id = n.at("id");
    node.op = n.at("op");
    if (n.contains("params")) node.params = n.at("params").get<std::vector<std::string>>();
    if (n.contains("inputs")) node.inputs = n.at("inputs").get<std::vector<std::string>>();
    g.nodes.push_back(std::move(node));
  }
  g.outputs = j.at("outputs").get<std::vector<std::string>>();
  g.mutable_data = j.value("mutable", false);
  return g;
}

// --- Canonical hashing -------------------------------------------------------

namespace {

std::array<std::uint8_t, 32> sha256(const std::string& data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

void append_length_prefixed(std::string& buffer, const std::string& piece) {
  const std::uint32_t n = static_cast<std::uint32_t>(piece.size());
  for (int i = 0; i < 4; ++i)
    buffer.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  buffer += piece;
}

std::array<std::uint8_t, 32> node_digest(
    const TransformGraph& graph, const std::string& id,
    std::unordered_map<std::string, std::array<std::uint8_t, 32>>& memo) {
  auto it = memo.find(id);
  if (it != memo.end()) return it->second;
  const GraphNode& n = graph.node(id);
  std::string buffer;
  append_length_prefixed(buffer, n.op);
  for (const auto& p : n.params) append_length_prefixed(buffer, p);
  std::vector<std::string> children;
  for (const auto& in : n.inputs) {
    const auto d = node_digest(graph, in, memo);
    children.emplace_back(reinterpret_cast<const char*>(d.data()), d.size());
  }
  if (op_info(n.op).commutative) std::sort(children.begin(), children.end());
  for (const auto& c : children) buffer += c;
  auto digest = sha256(buffer);
  memo.emplace(id, digest);
  return digest;
}

}  // namespace

std::string CanonicalKey::hex() const {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : digest) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

CanonicalKey canonical_key(const ConnectedComponent& component) {
  std::unordered_map<std::string, std::array<std::uint8_t, 32>> memo;
  CanonicalKey key;
  key.digest = node_digest(component.subgraph, component.output_node, memo);
  return key;
}

std::vector<ConnectedComponent> extract_components(const TransformGraph& graph) {
  graph.validate();
  if (graph.nodes.empty()) return {};

  // Union-find over undirected edges gives the weak components.
  std::unordered_map<std::string, std::string> parent;
  std::function<std::string(const std::string&)> find =
      [&](const std::string& x) -> std::string {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) {
      parent[x] = x;
      return x;
    }
    const std::string root = find(it->second);
    parent[x] = root;
    return root;
  };
  auto unite = [&](const std::string& a, const std::string& b) {
    const std::string ra = find(a), rb = find(b);
    if (ra != rb) parent[ra] = rb;
  };
  for (const auto& n : graph.nodes) {
    find(n.id);
    for (const auto& in : n.inputs) unite(n.id, in);
  }

  std::map<std::string, std::vector<const GraphNode*>> members;
  for (const auto& n : graph.nodes) members[find(n.id)].push_back(&n);
  std::map<std::string, std::vector<std::string>> outputs_by_root;
  for (const auto& out : graph.outputs)
    outputs_by_root[find(out)].push_back(out);

  std::vector<ConnectedComponent> components;
  for (const auto& [root, nodes] : members) {
    const auto oit = outputs_by_root.find(root);
    const std::size_t n_outputs = oit == outputs_by_root.end() ? 0 : oit->second.size();
    if (n_outputs != 1)
      throw InvalidGraphError("component containing node " + nodes.front()->id +
                              " designates " + std::to_string(n_outputs) +
                              " outputs, expected exactly 1");
    const std::string& output = oit->second.front();

    // Prune to the output's ancestor cone; dangling side branches do not
    // affect the produced data.
    std::unordered_set<std::string> cone;
    std::function<void(const std::string&)> mark = [&](const std::string& id) {
      if (!cone.insert(id).second) return;
      for (const auto& in : graph.node(id).inputs) mark(in);
    };
    mark(output);

    ConnectedComponent c;
    c.output_node = output;
    for (const auto& n : graph.nodes)
      if (cone.count(n.id)) c.subgraph.nodes.push_back(n);
    c.subgraph.outputs = {output};
    components.push_back(std::move(c));
  }

  std::sort(components.begin(), components.end(),
            [](const ConnectedComponent& a, const ConnectedComponent& b) {
              const auto ra = a.subgraph.raw_reads();
              const auto rb = b.subgraph.raw_reads();
              const std::string fa = ra.empty() ? "" : *ra.begin();
              const std::string fb = rb.empty() ? "" : *rb.begin();
              if (fa != fb) return fa < fb;
              return canonical_key(a).hex() < canonical_key(b).hex();
            });
  return components;
}

// --- Evaluation --------------------------------------------------------------

namespace {

TokenList split_whitespace(const std::string& text) {
  TokenList out;
  std::istringstream is(text);
  std::string token;
  while (is >> token) out.push_back(token);
  return out;
}

TokenList unique_first_occurrence(const TokenList& in) {
  TokenList out;
  std::unordered_set<std::string> seen;
  for (const auto& t : in)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

}  // namespace

TokenList eval_transform(const ConnectedComponent& component,
                         const RawRecord& record) {
  std::unordered_map<std::string, TokenList> memo;
  std::function<const TokenList&(const std::string&)> eval =
      [&](const std::string& id) -> const TokenList& {
    auto it = memo.find(id);
    if (it != memo.end()) return it->second;
    const GraphNode& n = component.subgraph.node(id);
    TokenList result;
    if (n.op == "read") {
      auto rit = record.find(n.params.front());
      if (rit == record.end())
        throw MissingInputError("raw record is missing field: " + n.params.front());
      result = split_whitespace(rit->second);
    } else if (n.op == "unigrams") {
      result = unique_first_occurrence(eval(n.inputs[0]));
    } else if (n.op == "intersect") {
      const TokenList& x = eval(n.inputs[0]);
      const TokenList& y = eval(n.inputs[1]);
      std::unordered_set<std::string> in_y(y.begin(), y.end());
      for (const auto& t : unique_first_occurrence(x))
        if (in_y.count(t)) result.push_back(t);
    } else if (n.op == "concat") {
      result = eval(n.inputs[0]);
      const TokenList& y = eval(n.inputs[1]);
      result.insert(result.end(), y.begin(), y.end());
    } else if (n.op == "set_intersect" || n.op == "set_union") {
      const TokenList& x = eval(n.inputs[0]);
      const TokenList& y = eval(n.inputs[1]);
      std::set<std::string> sx(x.begin(), x.end());
      std::set<std::string> sy(y.begin(), y.end());
      if (n.op == "set_intersect") {
        for (const auto& t : sx)
          if (sy.count(t)) result.push_back(t);
      } else {
        sx.insert(sy.begin(), sy.end());
        result.assign(sx.begin(), sx.end());
      }
    } else {
      throw InvalidGraphError("unknown op: " + n.op);
    }
    return memo.emplace(id, std::move(result)).first->second;
  };
  return eval(component.output_node);
}

SyntheticRawSource::SyntheticRawSource(std::vector<std::string> fields,
                                       int tokens_per_field, int vocab,
                                       std::uint64_t seed)
    : fields_(std::move(fields)),
      tokens_per_field_(tokens_per_field),
      vocab_(vocab),
      seed_(seed) {
  if (tokens_per_field_ < 1 || vocab_ < 1)
    throw InvalidArgumentError("synthetic source needs tokens >= 1 and vocab >= 1");
}

RawRecord SyntheticRawSource::record(std::uint64_t event_id) const {
  RawRecord out;
  for (std::size_t f = 0; f < fields_.size(); ++f) {
    std::string text;
    for (int t = 0; t < tokens_per_field_; ++t) {
      const std::uint64_t h =
          mix_hash(event_id * 1315423911ULL + f * 2654435761ULL + t, seed_);
      if (t > 0) text += ' ';
      text += "tok" + std::to_string(h % static_cast<std::uint64_t>(vocab_));
    }
    out[fields_[f]] = std::move(text);
  }
  return out;
}

// --- Service -----------------------------------------------------------------

EvictPredicate EvictPredicate::ByRawField(std::string field) {
  EvictPredicate p;
  p.kind = Kind::kRawField;
  p.raw_field = std::move(field);
  return p;
}

EvictPredicate EvictPredicate::ByPipeline(std::string pipeline) {
  EvictPredicate p;
  p.kind = Kind::kPipeline;
  p.pipeline = std::move(pipeline);
  return p;
}

EvictPredicate EvictPredicate::ByKey(CanonicalKey key) {
  EvictPredicate p;
  p.kind = Kind::kKey;
  p.key = key;
  return p;
}

void SigService::register_client(const std::string& id, int priority) {
  std::lock_guard lock(mutex_);
  client_priority_[id] = priority;
  queues_.try_emplace(id);
  client_served_.try_emplace(id, 0);
}

namespace {

std::string block_location(const CanonicalKey& key, EventRange range) {
  return key.hex().substr(0, 16) + ":" + std::to_string(range.lo) + "-" +
         std::to_string(range.hi);
}

}  // namespace

ReadSolution SigService::submit(const TransformGraph& graph,
                                const std::string& model,
                                const std::string& pipeline,
                                const std::string& client, EventRange range,
                                std::int64_t now) {
  if (graph.mutable_data)
    throw UnsupportedError(
        "mutable or late-arriving data cannot be memoized; use local input "
        "generation");
  if (range.hi < range.lo) throw InvalidArgumentError("bad event range");
  const auto components = extract_components(graph);

  std::lock_guard lock(mutex_);
  if (!client_priority_.count(client)) {
    client_priority_[client] = 0;
    queues_.try_emplace(client);
    client_served_.try_emplace(client, 0);
  }
  ReadSolution solution;
  for (const auto& component : components) {
    const CanonicalKey key = canonical_key(component);
    auto [eit, inserted] = entries_.try_emplace(key);
    Entry& entry = eit->second;
    if (inserted) {
      entry.key = key;
      entry.component = component;
      for (const auto& field : component.subgraph.raw_reads())
        raw_field_index_[field].insert(key);
    }
    entry.last_requested = std::max(entry.last_requested, now);
    entry.consumers.insert({model, pipeline});
    pipeline_index_[pipeline].insert(key);

    auto bit = entry.blocks.find(range);
    const bool block_hit = bit != entry.blocks.end();
    if (block_hit) {
      ++hits_;
    } else {
      ++misses_;
      BlockState block;
      block.location = block_location(key, range);
      block.status = BlockStatus::kScheduled;
      MemoTask task;
      task.id = next_task_id_++;
      task.key = key;
      task.range = range;
      task.client = client;
      task.priority = client_priority_[client];
      task.enqueue_seq = next_seq_++;
      block.producer_task = task.id;
      queues_[client].push_back(task);
      bit = entry.blocks.emplace(range, std::move(block)).first;
    }
    ReadSolutionItem item;
    item.output_node = component.output_node;
    item.key = key;
    item.storage_location = bit->second.location;
    item.status = bit->second.status;
    item.cache_hit = block_hit;
    solution.inputs.push_back(std::move(item));
  }
  return solution;
}

std::optional<MemoTask> SigService::pop_next_task_locked() {
  auto best_in_queue = [](const std::vector<MemoTask>& q) -> const MemoTask* {
    const MemoTask* best = nullptr;
    for (const auto& t : q) {
      if (best == nullptr || t.priority > best->priority ||
          (t.priority == best->priority && t.enqueue_seq < best->enqueue_seq))
        best = &t;
    }
    return best;
  };

  std::string chosen_client;
  const MemoTask* chosen = nullptr;
  if (options_.discipline == SchedulingDiscipline::kStrictPriority) {
    for (const auto& [client, q] : queues_) {
      const MemoTask* t = best_in_queue(q);
      if (t == nullptr) continue;
      if (chosen == nullptr || t->priority > chosen->priority ||
          (t->priority == chosen->priority && t->enqueue_seq < chosen->enqueue_seq)) {
        chosen = t;
        chosen_client = client;
      }
    }
  } else {
    // Weighted fair: serve the client with the highest priority-to-served
    // ratio; ties go to the lexicographically first client.
    double best_score = -1.0;
    for (const auto& [client, q] : queues_) {
      if (q.empty()) continue;
      const double weight = std::max(1, client_priority_.at(client));
      const double score =
          weight / (1.0 + static_cast<double>(client_served_.at(client)));
      if (score > best_score) {
        best_score = score;
        chosen_client = client;
      }
    }
    if (!chosen_client.empty()) chosen = best_in_queue(queues_[chosen_client]);
  }
  if (chosen == nullptr) return std::nullopt;
  MemoTask task = *chosen;
  auto& q = queues_[chosen_client];
  q.erase(std::find_if(q.begin(), q.end(),
                       [&](const MemoTask& t) { return t.id == task.id; }));
  ++client_served_[chosen_client];
  return task;
}

std::vector<std::uint64_t> SigService::worker_poll_execute(const RawSource& raw,
                                                           std::int64_t budget,
                                                           std::int64_t now) {
  std::lock_guard lock(mutex_);
  std::vector<std::uint64_t> executed;
  for (std::int64_t i = 0; i < budget; ++i) {
    auto task = pop_next_task_locked();
    if (!task) break;
    auto eit = entries_.find(task->key);
    if (eit == entries_.end()) {
      --i;  // orphaned by eviction; does not consume budget
      continue;
    }
    Entry& entry = eit->second;
    auto bit = entry.blocks.find(task->range);
    if (bit == entry.blocks.end()) {
      --i;
      continue;
    }
    BlockState& block = bit->second;
    block.status = BlockStatus::kMaterializing;
    try {
      std::vector<TokenList> outputs;
      outputs.reserve(static_cast<std::size_t>(task->range.hi - task->range.lo));
      for (std::uint64_t e = task->range.lo; e < task->range.hi; ++e)
        outputs.push_back(eval_transform(entry.component, raw.record(e)));
      warehouse_[block.location] = std::move(outputs);
      block.status = BlockStatus::kReady;
      block.producer_task.reset();
      ++entry.materializations;
      ++worker_evaluations_;
      entry.last_requested = std::max(entry.last_requested, now);
      executed.push_back(task->id);
    } catch (const std::exception&) {
      // Leave the block unready; consumers observe the status and the next
      // submit for this (key, range) keeps matching without re-enqueueing.
      block.status = BlockStatus::kScheduled;
      block.producer_task.reset();
      ++failed_tasks_;
    }
  }
  return executed;
}

void SigService::erase_entry_locked(const CanonicalKey& key) {
  auto eit = entries_.find(key);
  if (eit == entries_.end()) return;
  for (const auto& [_, block] : eit->second.blocks) warehouse_.erase(block.location);
  for (const auto& field : eit->second.component.subgraph.raw_reads()) {
    auto fit = raw_field_index_.find(field);
    if (fit != raw_field_index_.end()) {
      fit->second.erase(key);
      if (fit->second.empty()) raw_field_index_.erase(fit);
    }
  }
  for (auto it = pipeline_index_.begin(); it != pipeline_index_.end();) {
    it->second.erase(key);
    it = it->second.empty() ? pipeline_index_.erase(it) : std::next(it);
  }
  for (auto& [_, q] : queues_)
    q.erase(std::remove_if(q.begin(), q.end(),
                           [&](const MemoTask& t) { return t.key == key; }),
            q.end());
  entries_.erase(eit);
}

std::vector<CanonicalKey> SigService::evict_stale(std::int64_t now,
                                                  std::int64_t ttl) {
  if (ttl <= 0) throw InvalidArgumentError("ttl must be > 0");
  std::lock_guard lock(mutex_);
  std::vector<CanonicalKey> evicted;
  for (const auto& [key, entry] : entries_)
    if (now - entry.last_requested > ttl) evicted.push_back(key);
  for (const auto& key : evicted) erase_entry_locked(key);
  return evicted;
}

std::vector<CanonicalKey> SigService::evict_query(const EvictPredicate& predicate) {
  std::lock_guard lock(mutex_);
  std::vector<CanonicalKey> evicted;
  switch (predicate.kind) {
    case EvictPredicate::Kind::kRawField: {
      auto it = raw_field_index_.find(predicate.raw_field);
      if (it != raw_field_index_.end())
        evicted.assign(it->second.begin(), it->second.end());
      break;
    }
    case EvictPredicate::Kind::kPipeline: {
      auto it = pipeline_index_.find(predicate.pipeline);
      if (it != pipeline_index_.end())
        evicted.assign(it->second.begin(), it->second.end());
      break;
    }
    case EvictPredicate::Kind::kKey:
      if (entries_.count(predicate.key)) evicted.push_back(predicate.key);
      break;
  }
  for (const auto& key : evicted) erase_entry_locked(key);
  return evicted;
}

SigMetrics SigService::metrics() const {
  std::lock_guard lock(mutex_);
  SigMetrics m;
  m.hits = hits_;
  m.misses = misses_;
  m.hit_rate = (hits_ + misses_) == 0
                   ? 0.0
                   : static_cast<double>(hits_) / static_cast<double>(hits_ + misses_);
  std::int64_t ready_entries = 0;
  std::int64_t consumer_sum = 0;
  for (const auto& [_, entry] : entries_) {
    m.peak_consumers = std::max(
        m.peak_consumers, static_cast<std::int64_t>(entry.consumers.size()));
    bool any_ready = false;
    for (const auto& [__, block] : entry.blocks)
      any_ready |= block.status == BlockStatus::kReady;
    if (any_ready) {
      ++ready_entries;
      consumer_sum += static_cast<std::int64_t>(entry.consumers.size());
    }
  }
  m.mean_consumers_per_ready_block =
      ready_entries == 0 ? 0.0
                         : static_cast<double>(consumer_sum) / ready_entries;
  m.worker_evaluations = worker_evaluations_;
  m.failed_tasks = failed_tasks_;
  return m;
}

void SigService::reset_metrics() {
  std::lock_guard lock(mutex_);
  hits_ = 0;
  misses_ = 0;
}

std::int64_t SigService::pending_tasks() const {
  std::lock_guard lock(mutex_);
  std::int64_t n = 0;
  for (const auto& [_, q] : queues_) n += static_cast<std::int64_t>(q.size());
  return n;
}

std::int64_t SigService::entry_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::int64_t>(entries_.size());
}

std::int64_t SigService::materializations(const CanonicalKey& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.materializations;
}

std::optional<BlockStatus> SigService::block_status(const CanonicalKey& key,
                                                    EventRange range) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  auto bit = it->second.blocks.find(range);
  if (bit == it->second.blocks.end()) return std::nullopt;
  return bit->second.status;
}

const std::vector<TokenList>* SigService::warehouse_block(
    const std::string& location) const {
  std::lock_guard lock(mutex_);
  auto it = warehouse_.find(location);
  return it == warehouse_.end() ? nullptr : &it->second;
}

std::vector<std::string> SigService::ready_locations() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [location, _] : warehouse_) out.push_back(location);
  return out;
}

// --- Snapshot ----------------------------------------------------------------

namespace {

CanonicalKey key_from_hex(const std::string& hex) {
  if (hex.size() != 64) throw ValidationError("bad key hex length");
  CanonicalKey key;
  auto nibble = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    throw ValidationError("bad key hex digit");
  };
  for (std::size_t i = 0; i < 32; ++i)
    key.digest[i] =
        static_cast<std::uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  return key;
}

const char* status_name(BlockStatus s) {
  switch (s) {
    case BlockStatus::kScheduled: return "scheduled";
    case BlockStatus::kMaterializing: return "materializing";
    case BlockStatus::kReady: return "ready";
  }
  return "?";
}

BlockStatus status_from_name(const std::string& s) {
  if (s == "scheduled") return BlockStatus::kScheduled;
  if (s == "materializing") return BlockStatus::kMaterializing;
  if (s == "ready") return BlockStatus::kReady;
  throw ValidationError("unknown block status: " + s);
}

}  // namespace

std::string SigService::snapshot_json() const {
  std::lock_guard lock(mutex_);
  json j;
  j["version"] = 1;
  j["counters"] = {{"hits", hits_},
                   {"misses", misses_},
                   {"worker_evaluations", worker_evaluations_},
                   {"failed_tasks", failed_tasks_},
                   {"next_task_id", next_task_id_},
                   {"next_seq", next_seq_}};
  j["clients"] = json::object();
  for (const auto& [id, prio] : client_priority_) j["clients"][id] = prio;
  j["entries"] = json::array();
  for (const auto& [key, entry] : entries_) {
    json e;
    e["key"] = key.hex();
    e["component"] = json::parse(entry.component.subgraph.to_json());
    e["output_node"] = entry.component.output_node;
    e["last_requested"] = entry.last_requested;
    e["materializations"] = entry.materializations;
    e["consumers"] = json::array();
    for (const auto& [model, pipeline] : entry.consumers)
      e["consumers"].push_back(json::array({model, pipeline}));
    e["blocks"] = json::array();
    for (const auto& [range, block] : entry.blocks)
      e["blocks"].push_back({{"lo", range.lo},
                             {"hi", range.hi},
                             {"location", block.location},
                             {"status", status_name(block.status)}});
    j["entries"].push_back(std::move(e));
  }
  j["warehouse"] = json::object();
  for (const auto& [location, rows] : warehouse_) j["warehouse"][location] = rows;
  j["tasks"] = json::array();
  for (const auto& [client, q] : queues_)
    for (const auto& t : q)
      j["tasks"].push_back({{"id", t.id},
                            {"key", t.key.hex()},
                            {"lo", t.range.lo},
                            {"hi", t.range.hi},
                            {"client", client},
                            {"priority", t.priority},
                            {"seq", t.enqueue_seq}});
  return j.dump(2);
}

void SigService::load_snapshot(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("version").get<int>() != 1)
    throw ValidationError("unsupported snapshot version");
  std::lock_guard lock(mutex_);
  entries_.clear();
  client_priority_.clear();
  queues_.clear();
  client_served_.clear();
  warehouse_.clear();
  raw_field_index_.clear();
  pipeline_index_.clear();

  const auto& counters = j.at("counters");
  hits_ = counters.at("hits");
  misses_ = counters.at("misses");
  worker_evaluations_ = counters.at("worker_evaluations");
  failed_tasks_ = counters.at("failed_tasks");
  next_task_id_ = counters.at("next_task_id");
  next_seq_ = counters.at("next_seq");
  for (const auto& [id, prio] : j.at("clients").items()) {
    client_priority_[id] = prio.get<int>();
    queues_.try_emplace(id);
    client_served_.try_emplace(id, 0);
  }
  for (const auto& e : j.at("entries")) {
    Entry entry;
    entry.key = key_from_hex(e.at("key"));
    entry.component.subgraph = TransformGraph::from_json(e.at("component").dump());
    entry.component.output_node = e.at("output_node");
    entry.last_requested = e.at("last_requested");
    entry.materializations = e.at("materializations");
    for (const auto& c : e.at("consumers")) {
      const auto model = c.at(0).get<std::string>();
      const auto pipeline = c.at(1).get<std::string>();
      entry.consumers.insert({model, pipeline});
      pipeline_index_[pipeline].insert(entry.key);
    }
    for (const auto& b : e.at("blocks")) {
      BlockState block;
      block.location = b.at("location");
      block.status = status_from_name(b.at("status"));
      entry.blocks[{b.at("lo"), b.at("hi")}] = block;
    }
    for (const auto& field : entry.component.subgraph.raw_reads())
      raw_field_index_[field].insert(entry.key);
    entries_[entry.key] = std::move(entry);
  }
  for (const auto& [location, rows] : j.at("warehouse").items())
    warehouse_[location] = rows.get<std::vector<TokenList>>();
  for (const auto& t : j.at("tasks")) {
    MemoTask task;
    task.id = t.at("id");
    task.key = key_from_hex(t.at("key"));
    task.range = {t.at("lo"), t.at("hi")};
    task.client = t.at("client");
    task.priority = t.at("priority");
    task.enqueue_seq = t.at("seq");
    queues_[task.client].push_back(task);
  }
}

}  // namespace trainsim::sig
