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

#include "trainsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "trainsim/errors.hpp"

namespace trainsim {

ValencyDist ValencyDist::Constant(std::uint32_t v) {
  ValencyDist d;
  d.kind = Kind::kConstant;
  d.constant = v;
  return d;
}

ValencyDist ValencyDist::PoissonTruncated(double mean, std::int32_t max) {
  ValencyDist d;
  d.kind = Kind::kPoissonTruncated;
  d.mean = mean;
  d.max = max;
  return d;
}

ValencyDist ValencyDist::Empirical(std::vector<std::uint32_t> values,
                                   std::vector<double> weights) {
  ValencyDist d;
  d.kind = Kind::kEmpirical;
  d.values = std::move(values);
  d.weights = std::move(weights);
  return d;
}

std::int32_t ValencyDist::effective_max() const {
  switch (kind) {
    case Kind::kConstant:
      return static_cast<std::int32_t>(constant);
    case Kind::kPoissonTruncated:
      return max > 0 ? max
                     : std::max<std::int32_t>(
                           1, static_cast<std::int32_t>(std::ceil(4.0 * mean)));
    case Kind::kEmpirical: {
      std::uint32_t m = 0;
      for (std::uint32_t v : values) m = std::max(m, v);
      return static_cast<std::int32_t>(m);
    }
  }
  return 0;
}

namespace {

// Knuth's product-of-uniforms Poisson sampler; fine for the mean-valency
// range seen in practice (<= a few hundred).
std::uint32_t sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  const double threshold = std::exp(-mean);
  double p = 1.0;
  std::uint32_t k = 0;
  do {
    ++k;
    p *= rng.next_double();
  } while (p > threshold);
  return k - 1;
}

}  // namespace

std::uint32_t ValencyDist::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kConstant:
      return constant;
    case Kind::kPoissonTruncated: {
      const std::uint32_t cap = static_cast<std::uint32_t>(effective_max());
      return std::min(sample_poisson(mean, rng), cap);
    }
    case Kind::kEmpirical: {
      if (values.empty())
        throw InvalidArgumentError("empirical valency distribution is empty");
      if (weights.empty())
        return values[rng.next_below(values.size())];
      double total = 0.0;
      for (double w : weights) total += w;
      double u = rng.next_double() * total;
      for (std::size_t i = 0; i < values.size(); ++i) {
        u -= weights[i];
        if (u <= 0.0) return values[i];
      }
      return values.back();
    }
  }
  return 0;
}

void EmbeddingTableSpec::validate() const {
  if (name.empty()) throw ValidationError("embedding table needs a name");
  if (vocab_size < 1)
    throw ValidationError("table " + name + ": vocab_size must be >= 1");
  if (dim < 1) throw ValidationError("table " + name + ": dim must be >= 1");
  if (mean_valency < 0.0)
    throw ValidationError("table " + name + ": mean_valency must be >= 0");
  if (zipf_s < 0.0)
    throw ValidationError("table " + name + ": zipf_s must be >= 0");
  if (bytes_per_element < 1)
    throw ValidationError("table " + name + ": bytes_per_element must be >= 1");
  if (optimizer.params_width_multiplier < 1)
    throw ValidationError("table " + name +
                          ": params_width_multiplier must be >= 1");
  if (valency_dist.kind == ValencyDist::Kind::kEmpirical &&
      !valency_dist.weights.empty() &&
      valency_dist.weights.size() != valency_dist.values.size())
    throw ValidationError("table " + name +
                          ": empirical weights/values size mismatch");
}

void ModelSpec::validate() const {
  std::set<std::string> names;
  for (const auto& t : tables) {
    t.validate();
    if (!names.insert(t.name).second)
      throw ValidationError("duplicate table name: " + t.name);
  }
  for (const auto& [feature, table_name] : features) {
    if (!names.count(table_name))
      throw ValidationError("feature " + feature +
                            " maps to unknown table " + table_name);
  }
}

const EmbeddingTableSpec& ModelSpec::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw NotFoundError("unknown table: " + name);
}

const EmbeddingTableSpec& ModelSpec::table_for_feature(
    const std::string& feature) const {
  auto it = features.find(feature);
  if (it == features.end()) throw NotFoundError("unknown feature: " + feature);
  return table(it->second);
}

ZipfSampler::ZipfSampler(double s, std::int64_t n) {
  if (n < 1) throw InvalidArgumentError("zipf sampler needs n >= 1");
  if (s < 0.0) throw InvalidArgumentError("zipf sampler needs s >= 0");
  cdf_.resize(static_cast<std::size_t>(n));
  double acc = 0.0;
  for (std::int64_t r = 0; r < n; ++r) {
    acc += std::pow(static_cast<double>(r + 1), -s);
    cdf_[static_cast<std::size_t>(r)] = acc;
  }
}

std::int64_t ZipfSampler::operator()(Rng& rng) const {
  const double u = rng.next_double() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::int64_t>(it - cdf_.begin());
}

double ZipfSampler::probability(std::int64_t rank) const {
  if (rank < 0 || rank >= n())
    throw InvalidArgumentError("zipf rank out of range");
  const double lo = rank == 0 ? 0.0 : cdf_[static_cast<std::size_t>(rank - 1)];
  return (cdf_[static_cast<std::size_t>(rank)] - lo) / cdf_.back();
}

std::int64_t sample_zipf(double s, std::int64_t n, Rng& rng) {
  return ZipfSampler(s, n)(rng);
}

TrainingBatch generate_batch(const ModelSpec& model, std::int64_t batch_size,
                             std::uint64_t first_event_id, Rng& rng) {
  if (batch_size < 0) throw InvalidArgumentError("batch_size must be >= 0");
  TrainingBatch batch;
  batch.batch_size = batch_size;
  batch.event_ids.reserve(static_cast<std::size_t>(batch_size));
  for (std::int64_t i = 0; i < batch_size; ++i)
    batch.event_ids.push_back(first_event_id + static_cast<std::uint64_t>(i));

  for (const auto& table : model.tables) {
    // Per-table substream keyed by content, so adding a table does not
    // perturb the draws of existing ones.
    Rng table_rng(rng.next_u64() ^ mix_hash(first_event_id, 0x7ab1e5));
    ZipfSampler zipf(table.zipf_s, table.vocab_size);
    auto& rows = batch.lookups[table.name];
    rows.resize(static_cast<std::size_t>(batch_size));
    for (auto& example : rows) {
      const std::uint32_t valency = table.valency_dist.sample(table_rng);
      example.reserve(valency);
      for (std::uint32_t v = 0; v < valency; ++v)
        example.push_back(zipf(table_rng));
    }
  }
  return batch;
}

std::vector<std::int64_t> flatten_lookups(const TrainingBatch& batch,
                                          const std::string& table) {
  auto it = batch.lookups.find(table);
  if (it == batch.lookups.end())
    throw NotFoundError("batch has no table: " + table);
  std::vector<std::int64_t> out;
  for (const auto& example : it->second)
    out.insert(out.end(), example.begin(), example.end());
  return out;
}

DedupResult dedup_rows(const std::vector<std::int64_t>& occurrences) {
  DedupResult result;
  result.inverse.reserve(occurrences.size());
  std::unordered_map<std::int64_t, std::size_t> seen;
  seen.reserve(occurrences.size());
  for (std::int64_t row : occurrences) {
    auto [it, inserted] = seen.emplace(row, result.unique_rows.size());
    if (inserted) result.unique_rows.push_back(row);
    result.inverse.push_back(it->second);
  }
  return result;
}

DedupResult dedup(const TrainingBatch& batch, const std::string& table) {
  return dedup_rows(flatten_lookups(batch, table));
}

}  // namespace trainsim
