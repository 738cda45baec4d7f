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

#include "trainsim/fdp.hpp"

#include <fstream>
#include <mutex>

#include <nlohmann/json.hpp>

#include "trainsim/errors.hpp"

namespace trainsim {

using json = nlohmann::json;

std::optional<ProfileRecord> maybe_profile(
    const TrainingBatch& batch, const std::string& feature,
    const std::string& table, double rate, Rng& rng, std::uint64_t step,
    const PartitionPlan* plan, const std::vector<EmbeddingTableSpec>* specs) {
  if (rate < 0.0 || rate > 1.0)
    throw InvalidArgumentError("profiling rate must be in [0, 1]");
  if (rng.next_double() >= rate) return std::nullopt;

  const auto occurrences = flatten_lookups(batch, table);
  const auto deduped = dedup_rows(occurrences);
  ProfileRecord record;
  record.feature = feature;
  record.batch_size = batch.batch_size;
  record.values_per_example =
      batch.batch_size == 0
          ? 0.0
          : static_cast<double>(occurrences.size()) / batch.batch_size;
  record.unique_values_per_batch =
      static_cast<std::int64_t>(deduped.unique_rows.size());
  record.step = step;
  if (plan != nullptr && specs != nullptr) {
    TrafficStats stats;
    const EmbeddingTableSpec* spec = nullptr;
    for (const auto& s : *specs)
      if (s.name == table) spec = &s;
    if (spec == nullptr) throw NotFoundError("unknown table: " + table);
    auto& rows = stats.rows[table];
    rows.assign(static_cast<std::size_t>(spec->vocab_size), 0.0);
    for (std::int64_t r : deduped.unique_rows)
      rows[static_cast<std::size_t>(r)] += 1.0;
    // Restrict the plan to this table so the load report reflects only it.
    PartitionPlan sub;
    sub.node_count = plan->node_count;
    for (const auto& s : plan->shards)
      if (s.table == table) sub.shards.push_back(s);
    record.per_shard_load =
        load_imbalance(sub, stats, {*spec}).bytes_per_node;
  }
  return record;
}

void FdpDatabase::update(const ProfileRecord& record) {
  if (record.batch_size < 0)
    throw InvalidArgumentError("profile record has negative batch size");
  std::unique_lock lock(mutex_);
  auto& entry = stats_[record.feature];
  const double unique_fraction =
      record.values_per_example > 0.0 && record.batch_size > 0
          ? static_cast<double>(record.unique_values_per_batch) /
                (record.values_per_example * record.batch_size)
          : 0.0;
  if (entry.sample_count == 0) {
    entry.feature = record.feature;
    entry.mean_valency = record.values_per_example;
    entry.mean_unique_fraction = unique_fraction;
    entry.sample_count = 1;
  } else if (options_.decay > 0.0) {
    const double a = options_.decay;
    entry.mean_valency = (1.0 - a) * entry.mean_valency + a * record.values_per_example;
    entry.mean_unique_fraction =
        (1.0 - a) * entry.mean_unique_fraction + a * unique_fraction;
    entry.sample_count += 1;
  } else {
    entry.sample_count += 1;
    const double n = static_cast<double>(entry.sample_count);
    entry.mean_valency += (record.values_per_example - entry.mean_valency) / n;
    entry.mean_unique_fraction += (unique_fraction - entry.mean_unique_fraction) / n;
  }
  entry.last_updated = record.step;
  if (options_.retain_samples) samples_[record.feature].push_back(record);
}

std::optional<FeatureStats> FdpDatabase::query(const std::string& feature) const {
  std::shared_lock lock(mutex_);
  auto it = stats_.find(feature);
  if (it == stats_.end()) return std::nullopt;
  return it->second;
}

std::vector<FeatureStats> FdpDatabase::all() const {
  std::shared_lock lock(mutex_);
  std::vector<FeatureStats> out;
  out.reserve(stats_.size());
  for (const auto& [_, s] : stats_) out.push_back(s);
  return out;
}

const std::vector<ProfileRecord>& FdpDatabase::retained(
    const std::string& feature) const {
  std::shared_lock lock(mutex_);
  auto it = samples_.find(feature);
  if (it == samples_.end())
    throw NotFoundError("no retained samples for feature: " + feature);
  return it->second;
}

std::string FdpDatabase::to_json() const {
  std::shared_lock lock(mutex_);
  json j;
  j["version"] = 1;
  j["features"] = json::array();
  for (const auto& [_, s] : stats_) {
    j["features"].push_back({{"feature", s.feature},
                             {"mean_valency", s.mean_valency},
                             {"mean_unique_fraction", s.mean_unique_fraction},
                             {"sample_count", s.sample_count},
                             {"last_updated", s.last_updated}});
  }
  return j.dump(2);
}

void FdpDatabase::import_json(const std::string& text) {
  const json j = json::parse(text);
  if (!j.contains("version") || j.at("version").get<int>() != 1)
    throw ValidationError("unsupported stats database version");
  std::unique_lock lock(mutex_);
  stats_.clear();
  samples_.clear();
  for (const auto& f : j.at("features")) {
    FeatureStats s;
    s.feature = f.at("feature");
    s.mean_valency = f.at("mean_valency");
    s.mean_unique_fraction = f.at("mean_unique_fraction");
    s.sample_count = f.at("sample_count");
    s.last_updated = f.at("last_updated");
    stats_[s.feature] = s;
  }
}

void FdpDatabase::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write stats database: " + path);
  out << to_json();
}

void FdpDatabase::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read stats database: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  import_json(text);
}

std::vector<double> synthesize_row_traffic(
    const EmbeddingTableSpec& table, std::int64_t batch_size,
    const std::optional<FeatureStats>& stats) {
  const double valency = stats ? stats->mean_valency : table.mean_valency;
  const double unique_fraction = stats ? stats->mean_unique_fraction : 1.0;
  const double total = valency * unique_fraction * static_cast<double>(batch_size);
  ZipfSampler zipf(table.zipf_s, table.vocab_size);
  std::vector<double> rows(static_cast<std::size_t>(table.vocab_size));
  for (std::int64_t r = 0; r < table.vocab_size; ++r)
    rows[static_cast<std::size_t>(r)] = total * zipf.probability(r);
  return rows;
}

}  // namespace trainsim
