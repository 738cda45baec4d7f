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

#ifndef TRAINSIM_COST_HPP_
#define TRAINSIM_COST_HPP_

#include <string>
#include <vector>

namespace trainsim {

// Abstract cost units per unit of fleet time; only ratios are meaningful.
struct TcoParams {
  double tpu_chip = 0.0;
  double cpu_core = 0.0;
  double ram_gib = 0.0;
  double tray = 0.0;
  double power_provisioning = 0.0;  // per provisioned kW
  double power_delivery = 0.0;      // per delivered kW
  double amortization_horizon_days = 365.0;
};

// Per-model resource footprint. Reader columns exist twice because shared
// and local input generation provision very different reader fleets.
struct ResourceProfile {
  std::string model;
  double tpu_chips = 0.0;
  double tpu_trays = 0.0;
  double reader_cores_sig = 0.0;
  double reader_ram_gib_sig = 0.0;
  double reader_cores_lig = 0.0;
  double reader_ram_gib_lig = 0.0;
  double ps_cores = 0.0;
  double ps_ram_gib = 0.0;
  double provisioned_kw = 0.0;
  double delivered_kw = 0.0;
};

// Shared input-generation worker pool, amortized across its consumers.
struct SigPool {
  double cores = 0.0;
  double ram_gib = 0.0;
  int sharing_models = 1;
};

enum class GenerationMode { kSig, kLig };

struct PipelineCost {
  double tpu_cost = 0.0;
  double reader_cost = 0.0;
  double ps_cost = 0.0;
  double sig_share_cost = 0.0;
  double total = 0.0;
};

struct CostComparison {
  struct PerModel {
    std::string model;
    double total_sig = 0.0;
    double total_lig = 0.0;
    double reduction = 0.0;  // 1 - sig/lig
  };
  std::vector<PerModel> models;
  double geomean_reduction = 0.0;
};

struct AdvancingRateSample {
  double data_days = 0.0;
  double wall_days = 0.0;
  double rate = 0.0;
};

// Events trained per unit of wall time, as a multiple of real time.
double advancing_rate(double data_days, double wall_days);

// Whether a rate meets the historical-backfill band of 100x-500x.
bool initial_training_in_target(double rate);

PipelineCost pipeline_tco(const ResourceProfile& resources,
                          const TcoParams& params, GenerationMode mode,
                          const SigPool& pool = {});

CostComparison compare_sig_lig(const std::vector<ResourceProfile>& models,
                               const TcoParams& params, const SigPool& pool);

double geomean(const std::vector<double>& values);

std::string cost_report_csv(const CostComparison& comparison);

}  // namespace trainsim

#endif  // TRAINSIM_COST_HPP_
