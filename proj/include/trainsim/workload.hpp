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

#ifndef TRAINSIM_WORKLOAD_HPP_
#define TRAINSIM_WORKLOAD_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "trainsim/rng.hpp"

namespace trainsim {

enum class OptimizerClass { kElementWise, kRowWise };

struct OptimizerKind {
  OptimizerClass kind = OptimizerClass::kElementWise;
  // Slots per weight, e.g. 2 for a momentum accumulator alongside the weight.
  int params_width_multiplier = 1;
};

// How many feature values one example contributes to a table.
struct ValencyDist {
  enum class Kind { kConstant, kPoissonTruncated, kEmpirical };
  Kind kind = Kind::kConstant;
  // kConstant
  std::uint32_t constant = 1;
  // kPoissonTruncated: Poisson(mean) clamped to [0, max]. max <= 0 means
  // 4*mean rounded up, which leaves the mean within a fraction of a percent.
  double mean = 1.0;
  std::int32_t max = 0;
  // kEmpirical: valencies with optional weights (uniform when empty).
  std::vector<std::uint32_t> values;
  std::vector<double> weights;

  static ValencyDist Constant(std::uint32_t v);
  static ValencyDist PoissonTruncated(double mean, std::int32_t max = 0);
  static ValencyDist Empirical(std::vector<std::uint32_t> values,
                               std::vector<double> weights = {});

  std::int32_t effective_max() const;
  std::uint32_t sample(Rng& rng) const;
};

struct EmbeddingTableSpec {
  std::string name;
  std::int64_t vocab_size = 1;
  std::int32_t dim = 1;
  double mean_valency = 1.0;
  ValencyDist valency_dist;
  double zipf_s = 0.0;
  OptimizerKind optimizer;
  std::int32_t bytes_per_element = 4;

  void validate() const;
};

struct ModelSpec {
  std::string name;
  std::vector<EmbeddingTableSpec> tables;
  double dense_step_time_us = 0.0;
  // Feature name -> table name; every feature maps to exactly one table.
  std::map<std::string, std::string> features;

  void validate() const;
  const EmbeddingTableSpec& table(const std::string& name) const;
  const EmbeddingTableSpec& table_for_feature(const std::string& feature) const;
};

struct TrainingBatch {
  std::int64_t batch_size = 0;
  // Table name -> per-example row indices.
  std::map<std::string, std::vector<std::vector<std::int64_t>>> lookups;
  // Globally unique, strictly increasing within the batch.
  std::vector<std::uint64_t> event_ids;
};

struct DedupResult {
  std::vector<std::int64_t> unique_rows;  // first-occurrence order
  std::vector<std::size_t> inverse;       // per occurrence, index into unique_rows
};

// Zipf(s) over ranks [0, n): P(r) proportional to 1/(r+1)^s. Cumulative
// weights are precomputed once; each draw is a binary search.
class ZipfSampler {
 public:
  ZipfSampler(double s, std::int64_t n);
  std::int64_t operator()(Rng& rng) const;
  // P(rank) under the normalized distribution.
  double probability(std::int64_t rank) const;
  std::int64_t n() const { return static_cast<std::int64_t>(cdf_.size()); }

 private:
  std::vector<double> cdf_;
};

// One-off draw; builds the cumulative table each call, so prefer ZipfSampler
// in loops.
std::int64_t sample_zipf(double s, std::int64_t n, Rng& rng);

// Synthesizes a deterministic batch: per table, each example draws a valency
// from the table's distribution, then that many Zipf-ranked rows. The whole
// batch is a pure function of (model, batch_size, first_event_id, seed).
TrainingBatch generate_batch(const ModelSpec& model, std::int64_t batch_size,
                             std::uint64_t first_event_id, Rng& rng);

// Collapses the batch's occurrence list for one table to unique rows plus the
// inverse mapping that reconstructs the original list.
DedupResult dedup(const TrainingBatch& batch, const std::string& table);

DedupResult dedup_rows(const std::vector<std::int64_t>& occurrences);

// Flattened occurrence list for one table, in (example, position) order.
std::vector<std::int64_t> flatten_lookups(const TrainingBatch& batch,
                                          const std::string& table);

}  // namespace trainsim

#endif  // TRAINSIM_WORKLOAD_HPP_
