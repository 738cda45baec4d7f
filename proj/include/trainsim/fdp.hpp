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

#ifndef TRAINSIM_FDP_HPP_
#define TRAINSIM_FDP_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "trainsim/partition.hpp"
#include "trainsim/workload.hpp"

namespace trainsim {

// One sampled profile of a training batch for one feature.
struct ProfileRecord {
  std::string feature;
  double values_per_example = 0.0;
  std::int64_t unique_values_per_batch = 0;
  std::optional<std::vector<double>> per_shard_load;
  std::int64_t batch_size = 0;
  std::uint64_t step = 0;
};

struct FeatureStats {
  std::string feature;
  double mean_valency = 0.0;
  double mean_unique_fraction = 0.0;  // in [0, 1]
  std::int64_t sample_count = 0;
  std::uint64_t last_updated = 0;
};

// Profiles the batch with the given probability. The record's fields are
// computed exactly; only the keep/drop decision is random. `table` is the
// table backing the feature (a feature maps to exactly one table). When a
// plan is supplied, per-shard byte loads for this batch are recorded too.
std::optional<ProfileRecord> maybe_profile(
    const TrainingBatch& batch, const std::string& feature,
    const std::string& table, double rate, Rng& rng, std::uint64_t step = 0,
    const PartitionPlan* plan = nullptr,
    const std::vector<EmbeddingTableSpec>* specs = nullptr);

// Statistics database keyed by feature name only, so models that reuse a
// feature read and write one shared entry. Readers may run concurrently;
// writers are serialized.
class FdpDatabase {
 public:
  struct Options {
    // Exponential decay factor applied to the running means per update;
    // 0 disables decay and keeps exact streaming means.
    double decay = 0.0;
    // Keep raw records so tests can recompute the means from scratch.
    bool retain_samples = false;
  };

  FdpDatabase() = default;
  explicit FdpDatabase(Options options) : options_(options) {}

  void update(const ProfileRecord& record);
  std::optional<FeatureStats> query(const std::string& feature) const;
  std::vector<FeatureStats> all() const;
  const std::vector<ProfileRecord>& retained(const std::string& feature) const;

  std::string to_json() const;
  // Replaces the current contents with the serialized database.
  void import_json(const std::string& text);

  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  Options options_;
  std::map<std::string, FeatureStats> stats_;
  std::map<std::string, std::vector<ProfileRecord>> samples_;
  mutable std::shared_mutex mutex_;
};

// Expected per-row deduplicated lookups for a table, used by the partitioner
// when building TrafficStats. Rows follow the table's Zipf profile; the total
// is mean_valency x unique_fraction x batch_size. FDP stats, when present,
// override the spec-declared valency with the measured one.
std::vector<double> synthesize_row_traffic(const EmbeddingTableSpec& table,
                                           std::int64_t batch_size,
                                           const std::optional<FeatureStats>& stats);

}  // namespace trainsim

#endif  // TRAINSIM_FDP_HPP_
