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

#include "trainsim/cost.hpp"

#include <cmath>
#include <sstream>

#include "trainsim/errors.hpp"

namespace trainsim {

double advancing_rate(double data_days, double wall_days) {
  if (wall_days <= 0.0)
    throw InvalidArgumentError("advancing rate needs wall time > 0");
  return data_days / wall_days;
}

bool initial_training_in_target(double rate) {
  return rate >= 100.0 && rate <= 500.0;
}

PipelineCost pipeline_tco(const ResourceProfile& resources,
                          const TcoParams& params, GenerationMode mode,
                          const SigPool& pool) {
  PipelineCost cost;
  cost.tpu_cost = resources.tpu_chips * params.tpu_chip +
                  resources.tpu_trays * params.tray +
                  resources.provisioned_kw * params.power_provisioning +
                  resources.delivered_kw * params.power_delivery;
  if (mode == GenerationMode::kSig) {
    cost.reader_cost = resources.reader_cores_sig * params.cpu_core +
                       resources.reader_ram_gib_sig * params.ram_gib;
    const double pool_cost =
        pool.cores * params.cpu_core + pool.ram_gib * params.ram_gib;
    const int sharers = pool.sharing_models < 1 ? 1 : pool.sharing_models;
    cost.sig_share_cost = pool_cost / sharers;
  } else {
    cost.reader_cost = resources.reader_cores_lig * params.cpu_core +
                       resources.reader_ram_gib_lig * params.ram_gib;
  }
  cost.ps_cost = resources.ps_cores * params.cpu_core +
                 resources.ps_ram_gib * params.ram_gib;
  cost.total = cost.tpu_cost + cost.reader_cost + cost.ps_cost + cost.sig_share_cost;
  return cost;
}

CostComparison compare_sig_lig(const std::vector<ResourceProfile>& models,
                               const TcoParams& params, const SigPool& pool) {
  if (models.empty())
    throw InvalidArgumentError("compare_sig_lig needs at least one model");
  CostComparison cmp;
  std::vector<double> retained;  // 1 - reduction, i.e. sig/lig cost ratio
  for (const auto& m : models) {
    CostComparison::PerModel pm;
    pm.model = m.model;
    pm.total_sig = pipeline_tco(m, params, GenerationMode::kSig, pool).total;
    pm.total_lig = pipeline_tco(m, params, GenerationMode::kLig, pool).total;
    if (pm.total_lig <= 0.0)
      throw InvalidArgumentError("model " + m.model + " has zero LIG cost");
    pm.reduction = 1.0 - pm.total_sig / pm.total_lig;
    retained.push_back(pm.total_sig / pm.total_lig);
    cmp.models.push_back(pm);
  }
  cmp.geomean_reduction = 1.0 - geomean(retained);
  return cmp;
}

double geomean(const std::vector<double>& values) {
  if (values.empty()) throw InvalidArgumentError("geomean of empty list");
  double log_sum = 0.0;
  for (double v : values) {
    if (v <= 0.0)
      throw InvalidArgumentError("geomean needs strictly positive values");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

std::string cost_report_csv(const CostComparison& comparison) {
  std::ostringstream os;
  os << "model,total_sig,total_lig,reduction\n";
  for (const auto& m : comparison.models)
    os << m.model << "," << m.total_sig << "," << m.total_lig << ","
       << m.reduction << "\n";
  os << "geomean,,," << comparison.geomean_reduction << "\n";
  return os.str();
}

}  // namespace trainsim
