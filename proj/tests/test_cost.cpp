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

#include <doctest.h>

#include "trainsim/errors.hpp"
#include "trainsim/pipeline_sim.hpp"
#include "trainsim/rng.hpp"

using namespace trainsim;

namespace {

TcoParams unit_params() {
  TcoParams p;
  p.tpu_chip = 1.0;
  p.cpu_core = 1.0;
  p.ram_gib = 0.5;
  p.tray = 2.0;
  p.power_provisioning = 0.1;
  p.power_delivery = 0.1;
  return p;
}

// Five models whose SIG savings span 12%..27% with reader fleets 4.3x..7.5x
// cheaper under shared generation; the shared pool is amortized over 22.
std::vector<ResourceProfile> calibration_models() {
  struct Row {
    const char* name;
    double sig_cores, lig_cores;
  };
  const Row rows[] = {
      {"m0", 4.6695, 20.0790}, {"m1", 4.9231, 24.6155}, {"m2", 4.9421, 27.1814},
      {"m3", 4.8113, 29.8301}, {"m4", 6.2570, 46.9275},
  };
  std::vector<ResourceProfile> models;
  for (const auto& row : rows) {
    ResourceProfile r;
    r.model = row.name;
    r.tpu_chips = 100.0;
    r.reader_cores_sig = row.sig_cores;
    r.reader_cores_lig = row.lig_cores;
    models.push_back(r);
  }
  return models;
}

SigPool calibration_pool() {
  SigPool pool;
  pool.cores = 22.0;
  pool.ram_gib = 0.0;
  pool.sharing_models = 22;
  return pool;
}

}  // namespace

TEST_CASE("advancing rate follows its definition") {
  CHECK(advancing_rate(365.0, 2.0) == 182.5);
  CHECK(advancing_rate(1.0, 1.0) == 1.0);
  CHECK_THROWS_AS(advancing_rate(365.0, 0.0), InvalidArgumentError);
  CHECK_THROWS_AS(advancing_rate(365.0, -1.0), InvalidArgumentError);
}

TEST_CASE("initial training target band is 100x to 500x") {
  CHECK(initial_training_in_target(100.0));
  CHECK(initial_training_in_target(182.5));
  CHECK(initial_training_in_target(500.0));
  CHECK(!initial_training_in_target(99.0));
  CHECK(!initial_training_in_target(501.0));
  CHECK(!initial_training_in_target(1.0));
}

TEST_CASE("zero resources cost zero") {
  ResourceProfile r;
  r.model = "empty";
  const auto cost = pipeline_tco(r, unit_params(), GenerationMode::kLig);
  CHECK(cost.total == 0.0);
  CHECK(cost.tpu_cost == 0.0);
  CHECK(cost.reader_cost == 0.0);
}

TEST_CASE("a 4.3x reader footprint costs exactly 4.3x") {
  ResourceProfile r;
  r.model = "m";
  r.reader_cores_sig = 10.0;
  r.reader_cores_lig = 43.0;
  const auto sig = pipeline_tco(r, unit_params(), GenerationMode::kSig);
  const auto lig = pipeline_tco(r, unit_params(), GenerationMode::kLig);
  CHECK(lig.reader_cost / sig.reader_cost == doctest::Approx(4.3).epsilon(1e-12));
}

TEST_CASE("the sig pool is amortized over its sharing models") {
  ResourceProfile r;
  r.model = "m";
  r.tpu_chips = 10.0;
  SigPool pool;
  pool.cores = 44.0;
  pool.sharing_models = 22;
  const auto cost = pipeline_tco(r, unit_params(), GenerationMode::kSig, pool);
  CHECK(cost.sig_share_cost == doctest::Approx(2.0));
  const auto lig = pipeline_tco(r, unit_params(), GenerationMode::kLig, pool);
  CHECK(lig.sig_share_cost == 0.0);
}

TEST_CASE("identical footprints mean zero reduction") {
  ResourceProfile r;
  r.model = "m";
  r.tpu_chips = 5.0;
  r.reader_cores_sig = 3.0;
  r.reader_cores_lig = 3.0;
  const auto cmp = compare_sig_lig({r}, unit_params(), {});
  CHECK(cmp.models[0].reduction == doctest::Approx(0.0));
  CHECK(cmp.geomean_reduction == doctest::Approx(0.0));
}

TEST_CASE("a single model's geomean is its own reduction") {
  ResourceProfile r;
  r.model = "m";
  r.tpu_chips = 8.0;
  r.reader_cores_sig = 0.0;
  r.reader_cores_lig = 2.0;
  const auto cmp = compare_sig_lig({r}, unit_params(), {});
  CHECK(cmp.models[0].reduction == doctest::Approx(0.2));
  CHECK(cmp.geomean_reduction == doctest::Approx(0.2));
}

TEST_CASE("the calibration scenario reduces cost by 18 percent geomean") {
  const auto cmp =
      compare_sig_lig(calibration_models(), unit_params(), calibration_pool());
  for (const auto& m : cmp.models) {
    CHECK(m.reduction >= 0.12 - 0.005);
    CHECK(m.reduction <= 0.27 + 0.005);
  }
  // Direct product oracle.
  double product = 1.0;
  for (const auto& m : cmp.models) product *= m.total_sig / m.total_lig;
  const double oracle = 1.0 - std::pow(product, 1.0 / cmp.models.size());
  CHECK(cmp.geomean_reduction == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(cmp.geomean_reduction - 0.18) <= 0.01);
}

TEST_CASE("geomean basics") {
  CHECK(geomean({3.7}) == doctest::Approx(3.7));
  CHECK(geomean({1.0, 4.0}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(geomean({}), InvalidArgumentError);
  CHECK_THROWS_AS(geomean({1.0, 0.0}), InvalidArgumentError);
  CHECK_THROWS_AS(geomean({1.0, -2.0}), InvalidArgumentError);
}

TEST_CASE("geomean matches the direct product formula on random lists") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> values;
    const std::size_t n = 1 + rng.next_below(12);
    double product = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      values.push_back(0.1 + rng.next_double() * 10.0);
      product *= values.back();
    }
    const double direct = std::pow(product, 1.0 / static_cast<double>(n));
    CHECK(geomean(values) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("cost lines scale linearly with resources") {
  ResourceProfile r;
  r.model = "m";
  r.tpu_chips = 7.0;
  r.tpu_trays = 2.0;
  r.reader_cores_sig = 3.0;
  r.reader_ram_gib_sig = 8.0;
  r.ps_cores = 4.0;
  r.provisioned_kw = 1.5;
  ResourceProfile doubled = r;
  doubled.tpu_chips *= 2;
  doubled.tpu_trays *= 2;
  doubled.reader_cores_sig *= 2;
  doubled.reader_ram_gib_sig *= 2;
  doubled.ps_cores *= 2;
  doubled.provisioned_kw *= 2;
  const auto c1 = pipeline_tco(r, unit_params(), GenerationMode::kSig);
  const auto c2 = pipeline_tco(doubled, unit_params(), GenerationMode::kSig);
  CHECK(c2.tpu_cost == doctest::Approx(2.0 * c1.tpu_cost));
  CHECK(c2.reader_cost == doctest::Approx(2.0 * c1.reader_cost));
  CHECK(c2.ps_cost == doctest::Approx(2.0 * c1.ps_cost));
}

TEST_CASE("sig never costs more when its share stays under the reader savings") {
  Rng rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    ResourceProfile r;
    r.model = "m";
    r.tpu_chips = 10.0 + rng.next_double() * 100.0;
    r.reader_cores_sig = rng.next_double() * 10.0;
    r.reader_cores_lig = r.reader_cores_sig * (1.5 + rng.next_double() * 6.0);
    SigPool pool;
    pool.sharing_models = 1 + static_cast<int>(rng.next_below(30));
    // Pool share capped at the reader savings.
    const double savings = r.reader_cores_lig - r.reader_cores_sig;
    pool.cores = savings * pool.sharing_models * rng.next_double();
    const auto cmp = compare_sig_lig({r}, unit_params(), pool);
    CHECK(cmp.models[0].total_sig <= cmp.models[0].total_lig + 1e-9);
  }
}

TEST_CASE("the simulator's own advancing rate matches the formula") {
  sim::SimScenario s;
  s.epoch_wall_time = 20'000;
  s.events_total = 1000;
  s.event_coverage_us = 80;
  s.work_unit_size = 50;
  s.host_buffer_capacity = 200;
  s.work_unit_read_us = 500;
  s.work_unit_transform_us = 500;
  s.train_us_per_event = 20;
  s.checkpoint_write_us = 200;
  s.restore_us = 200;
  const auto report = sim::run(s, 1);
  REQUIRE(report.reached_stream_end);
  // Cross-module check: events x coverage over wall time, in days over days.
  const double data_days = static_cast<double>(report.final_watermark) * 80.0;
  const double wall_days = static_cast<double>(report.end_time);
  CHECK(advancing_rate(data_days, wall_days) ==
        doctest::Approx(report.overall_advancing_rate).epsilon(1e-12));
}

TEST_CASE("cost csv includes per-model rows and the geomean") {
  const auto cmp =
      compare_sig_lig(calibration_models(), unit_params(), calibration_pool());
  const auto csv = cost_report_csv(cmp);
  CHECK(csv.find("model,total_sig,total_lig,reduction") == 0);
  CHECK(csv.find("m0,") != std::string::npos);
  CHECK(csv.find("geomean,") != std::string::npos);
}
