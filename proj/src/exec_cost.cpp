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

#include "trainsim/exec_cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "trainsim/errors.hpp"

namespace trainsim {

double serialized_step(const StepCost& cost) {
  if (cost.tc_us < 0.0 || cost.sc_us < 0.0)
    throw InvalidArgumentError("step costs must be >= 0");
  return cost.tc_us + cost.sc_us;
}

double pipelined_step(const StepCost& cost, const ContentionModel& contention) {
  if (cost.tc_us < 0.0 || cost.sc_us < 0.0)
    throw InvalidArgumentError("step costs must be >= 0");
  if (contention.tc_slowdown < 0.0 || contention.sc_slowdown < 0.0)
    throw InvalidArgumentError("slowdowns must be >= 0");
  return std::max(cost.tc_us * (1.0 + contention.tc_slowdown),
                  cost.sc_us * (1.0 + contention.sc_slowdown));
}

double network_traffic(const TrainingBatch& batch, const PartitionPlan& plan,
                       const TrafficModel& model,
                       const std::vector<EmbeddingTableSpec>& specs) {
  if (model.node_count < 1)
    throw InvalidArgumentError("traffic model needs node_count >= 1");
  double bytes = 0.0;
  for (const auto& [table_name, _] : batch.lookups) {
    const EmbeddingTableSpec* spec = nullptr;
    for (const auto& s : specs)
      if (s.name == table_name) spec = &s;
    if (spec == nullptr)
      throw NotFoundError("traffic model: unknown table " + table_name);

    // Column multiplicity: how many shards each feature value indexes.
    std::set<std::pair<std::int32_t, std::int32_t>> bands;
    bool row_partitioned = false;
    for (const auto& shard : plan.shards) {
      if (shard.table != table_name) continue;
      bands.insert({shard.cols.lo, shard.cols.hi});
      if (!std::holds_alternative<RowAll>(shard.rows)) row_partitioned = true;
    }
    if (bands.empty())
      throw NotFoundError("plan has no shards for table " + table_name);
    const double multiplicity = static_cast<double>(bands.size());
    const double row_bytes =
        static_cast<double>(spec->dim) * spec->bytes_per_element;

    const auto occurrences = flatten_lookups(batch, table_name);
    switch (model.strategy) {
      case ExchangeStrategy::kDedupAllToAll: {
        const auto deduped = dedup_rows(occurrences);
        bytes += static_cast<double>(deduped.unique_rows.size()) *
                 (multiplicity * model.bytes_per_value + row_bytes);
        break;
      }
      case ExchangeStrategy::kAllValuesReduceScatter: {
        bytes += static_cast<double>(occurrences.size()) * model.bytes_per_value;
        const double vectors =
            static_cast<double>(batch.batch_size) * row_bytes;
        // Partial segment sums on row shards require a reduce-scatter whose
        // volume grows with the node count.
        bytes += row_partitioned ? model.node_count * vectors : vectors;
        break;
      }
    }
  }
  return bytes;
}

std::pair<double, double> software_dedup_route(
    const std::vector<std::int64_t>& valencies, std::int64_t threshold) {
  if (threshold < 1) throw InvalidArgumentError("threshold must be >= 1");
  if (valencies.empty()) return {1.0, 0.0};
  std::int64_t low = 0;
  for (std::int64_t v : valencies)
    if (v <= threshold) ++low;
  const double tc = static_cast<double>(low) / valencies.size();
  return {tc, 1.0 - tc};
}

namespace {

double sample_normal(Rng& rng, double stddev) {
  const double u1 = 1.0 - rng.next_double();  // (0, 1]
  const double u2 = rng.next_double();
  return stddev * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

struct ToyStep {
  std::int64_t row;
  double target;
};

std::vector<double> run_toy_arm(const StaleTrainConfig& cfg,
                                const std::vector<ToyStep>& data,
                                const std::vector<double>& embed_init,
                                const std::vector<double>& readout_init,
                                int delay) {
  std::vector<double> embeddings = embed_init;
  std::vector<double> readout = readout_init;
  std::vector<double> losses;
  losses.reserve(data.size());
  const std::size_t dim = readout.size();

  bool has_pending = false;
  std::int64_t pending_row = 0;
  std::vector<double> pending_grad(dim, 0.0);

  for (std::size_t step = 0; step < data.size(); ++step) {
    const auto& s = data[step];
    double* row = &embeddings[static_cast<std::size_t>(s.row) * dim];
    double pred = 0.0;
    for (std::size_t d = 0; d < dim; ++d) pred += row[d] * readout[d];
    const double err = pred - s.target;
    const double loss = err * err;
    if (!std::isfinite(loss))
      throw DivergenceError("toy training diverged", static_cast<long long>(step));
    losses.push_back(loss);

    std::vector<double> grad_row(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      grad_row[d] = 2.0 * err * readout[d];
      readout[d] -= cfg.learning_rate * 2.0 * err * row[d];
    }
    if (delay == 0) {
      for (std::size_t d = 0; d < dim; ++d)
        row[d] -= cfg.learning_rate * grad_row[d];
    } else {
      // The overlapped SparseCore applies the previous step's embedding
      // gradient while this step is already using the un-updated row.
      if (has_pending) {
        double* prow = &embeddings[static_cast<std::size_t>(pending_row) * dim];
        for (std::size_t d = 0; d < dim; ++d)
          prow[d] -= cfg.learning_rate * pending_grad[d];
      }
      pending_row = s.row;
      pending_grad = std::move(grad_row);
      has_pending = true;
    }
  }
  if (delay != 0 && has_pending) {
    double* prow = &embeddings[static_cast<std::size_t>(pending_row) * dim];
    for (std::size_t d = 0; d < dim; ++d)
      prow[d] -= cfg.learning_rate * pending_grad[d];
  }
  return losses;
}

double tail_mean(const std::vector<double>& losses) {
  const std::size_t window = std::max<std::size_t>(1, losses.size() / 10);
  double sum = 0.0;
  for (std::size_t i = losses.size() - window; i < losses.size(); ++i)
    sum += losses[i];
  return sum / static_cast<double>(window);
}

}  // namespace

StaleTrainResult stale_gradient_experiment(const StaleTrainConfig& cfg) {
  if (cfg.steps < 10) throw InvalidArgumentError("experiment needs steps >= 10");
  if (cfg.staleness != 0 && cfg.staleness != 1)
    throw InvalidArgumentError("staleness must be 0 or 1");
  if (cfg.vocab < 1 || cfg.dim < 1)
    throw InvalidArgumentError("vocab and dim must be >= 1");

  Rng rng(cfg.seed);
  const std::size_t dim = static_cast<std::size_t>(cfg.dim);

  // Ground-truth parameters the toy model has to recover.
  std::vector<double> true_embed(static_cast<std::size_t>(cfg.vocab) * dim);
  for (auto& v : true_embed) v = 2.0 * rng.next_double() - 1.0;
  std::vector<double> true_readout(dim);
  for (auto& v : true_readout) v = 2.0 * rng.next_double() - 1.0;

  std::vector<double> embed_init(static_cast<std::size_t>(cfg.vocab) * dim);
  for (auto& v : embed_init) v = 0.2 * (2.0 * rng.next_double() - 1.0);
  std::vector<double> readout_init(dim);
  for (auto& v : readout_init) v = 0.2 * (2.0 * rng.next_double() - 1.0);

  // One shared data stream so both arms see identical batches.
  ZipfSampler zipf(cfg.zipf_s, cfg.vocab);
  std::vector<ToyStep> data;
  data.reserve(static_cast<std::size_t>(cfg.steps));
  for (std::int64_t i = 0; i < cfg.steps; ++i) {
    ToyStep s;
    s.row = zipf(rng);
    double clean = 0.0;
    const double* row = &true_embed[static_cast<std::size_t>(s.row) * dim];
    for (std::size_t d = 0; d < dim; ++d) clean += row[d] * true_readout[d];
    s.target = clean + sample_normal(rng, cfg.target_noise);
    data.push_back(s);
  }

  StaleTrainResult result;
  result.loss_curve_stale =
      run_toy_arm(cfg, data, embed_init, readout_init, cfg.staleness);
  result.loss_curve_fresh = run_toy_arm(cfg, data, embed_init, readout_init, 0);
  result.final_loss_stale = tail_mean(result.loss_curve_stale);
  result.final_loss_fresh = tail_mean(result.loss_curve_fresh);
  return result;
}

std::string step_cost_csv(const std::vector<StepCostRow>& rows) {
  std::ostringstream os;
  os << "model,mode,tc_us,sc_us,step_us,speedup\n";
  for (const auto& r : rows)
    os << r.model << "," << r.mode << "," << r.tc_us << "," << r.sc_us << ","
       << r.step_us << "," << r.speedup << "\n";
  return os.str();
}

namespace {

double plan_sc_time(const PartitionPlan& plan, const TrafficStats& true_stats,
                    const ModelSpec& model, const LadderOptions& opts) {
  const LoadReport report = load_imbalance(plan, true_stats, model.tables);
  std::int32_t min_width = std::numeric_limits<std::int32_t>::max();
  for (const auto& s : plan.shards) min_width = std::min(min_width, s.cols.width());
  const double penalty = (!plan.shards.empty() &&
                          min_width < opts.search.narrow_width_threshold)
                             ? opts.search.narrow_access_penalty
                             : 1.0;
  return opts.sc_balanced_us * report.imbalance * penalty;
}

}  // namespace

std::vector<StepCostRow> optimization_ladder(
    const ModelSpec& model, const TrafficStats& true_stats,
    const TrafficStats& compile_time_stats, const LadderOptions& opts) {
  // Row-only baseline: every table row-partitioned cyclically.
  PartitionPlan row_plan;
  row_plan.node_count = opts.nodes;
  for (const auto& t : model.tables) {
    PartitionPlan p = row_partition(t, opts.nodes, RowScheme::kCyclic,
                                    opts.search.hash_seed);
    row_plan.shards.insert(row_plan.shards.end(), p.shards.begin(), p.shards.end());
    row_plan.row_schemes[t.name] = RowScheme::kCyclic;
  }
  const double sc_row = plan_sc_time(row_plan, true_stats, model, opts);

  const ScoredPlan hybrid = hybrid_partition(
      model, opts.nodes, compile_time_stats, opts.search.mem_capacity_per_node,
      opts.search_budget, opts.search);
  const double sc_hybrid = plan_sc_time(hybrid.plan, true_stats, model, opts);

  const ScoredPlan fdp = hybrid_partition(
      model, opts.nodes, true_stats, opts.search.mem_capacity_per_node,
      opts.search_budget, opts.search);
  const double sc_fdp = plan_sc_time(fdp.plan, true_stats, model, opts);

  std::vector<StepCostRow> rows;
  const double baseline =
      serialized_step({opts.tc_us, sc_row, StepMode::kSerialized});
  auto push = [&](const std::string& mode, double sc, bool pipelined) {
    StepCostRow r;
    r.model = model.name;
    r.mode = mode;
    r.tc_us = opts.tc_us;
    r.sc_us = sc;
    r.step_us = pipelined
                    ? pipelined_step({opts.tc_us, sc, StepMode::kPipelined},
                                     opts.contention)
                    : serialized_step({opts.tc_us, sc, StepMode::kSerialized});
    r.speedup = baseline / r.step_us;
    rows.push_back(r);
  };
  push("baseline", sc_row, false);
  push("pipelining", sc_row, true);
  push("hybrid", sc_hybrid, true);
  push("fdp", sc_fdp, true);
  return rows;
}

}  // namespace trainsim
