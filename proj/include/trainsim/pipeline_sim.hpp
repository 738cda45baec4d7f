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

#ifndef TRAINSIM_PIPELINE_SIM_HPP_
#define TRAINSIM_PIPELINE_SIM_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trainsim::sim {

using SimTime = std::int64_t;  // integer simulated microseconds

enum class FaultKind { kTransient, kPermanent, kSigStall, kPreemption };

struct FaultEvent {
  SimTime at = 0;
  FaultKind kind = FaultKind::kTransient;
  SimTime stall_duration = 0;  // kSigStall: how long data stays unavailable
  SimTime warning = 0;         // kPreemption: notice-to-shutdown interval
  std::string job;             // kPreemption
};

struct AutoscaleBands {
  double low = 0.3;
  double high = 0.8;
  SimTime interval = 10'000;
};

struct SimScenario {
  SimTime epoch_wall_time = 1'000'000;
  std::int64_t events_total = 0;
  // Events arriving per microsecond; 0 means the whole stream is available
  // at t = 0 (historical backfill).
  double arrival_rate_per_us = 0.0;
  // Data time one event represents; 0 derives it from the arrival rate
  // (caught-up training) or defaults to 1.
  SimTime event_coverage_us = 0;
  std::int64_t work_unit_size = 100;
  std::int64_t host_buffer_capacity = 1000;
  SimTime work_unit_read_us = 2'000;
  SimTime work_unit_transform_us = 3'000;
  double service_jitter = 0.0;  // sampled uniformly in [1-j, 1+j]
  SimTime train_us_per_event = 50;
  SimTime checkpoint_write_us = 5'000;
  SimTime restore_us = 5'000;
  AutoscaleBands bands;
  int initial_in_flight = 1;
  int max_in_flight = 64;
  int chips = 1;
  SimTime rejoin_delay_us = 20'000;
  SimTime max_sim_time = 0;  // 0 = no horizon guard
  std::vector<FaultEvent> faults;

  void validate() const;
};

enum class UncommittedReason { kComponentFailure, kPreemptionTimeout, kHold };

struct EpochRecord {
  int index = 0;  // attempt index; retries get fresh indices
  std::uint64_t first_event = 0;
  std::uint64_t end_event = 0;  // attempted range [first_event, end_event)
  bool committed = false;
  std::optional<int> checkpoint_id;
  std::optional<UncommittedReason> reason;
  bool ended_early = false;  // committed ahead of schedule for a preemption
  SimTime start_time = 0;
  SimTime end_time = 0;
};

struct CheckpointRecord {
  int id = 0;
  int epoch_index = 0;
  // Number of committed events; events [0, high_watermark) are durable.
  std::uint64_t high_watermark = 0;
  std::uint64_t state_digest = 0;
};

enum class HoldKind { kPermanentError, kTransientStall };

struct TrainingHold {
  HoldKind kind = HoldKind::kPermanentError;
  SimTime placed_at = 0;
  std::optional<SimTime> released_at;
  bool resources_released = true;
};

enum class PreemptionOutcome { kCommittedEarly, kRestartFromCheckpoint };

struct PreemptionRecord {
  std::string job;
  SimTime notice_time = 0;
  SimTime shutdown_deadline = 0;
  bool acknowledged = true;
  bool interrupted_running_epoch = false;
  PreemptionOutcome outcome = PreemptionOutcome::kCommittedEarly;
  SimTime rejoin_time = 0;
};

// Raw audit log. Train entries carry half-open event-id runs per epoch
// attempt; commits bind an attempt to its committed range.
struct TimelineEntry {
  enum class Kind {
    kTrain,         // attempt trained events [lo, hi)
    kCommit,        // attempt committed; [lo, hi) newly durable
    kDiscard,       // attempt aborted; its training is void
    kHoldPlaced,
    kHoldReleased,
    kPreemptNotice,
  };
  Kind kind = Kind::kTrain;
  SimTime at = 0;
  int attempt = 0;
  std::uint64_t lo = 0, hi = 0;
};

struct SeriesPoint {
  SimTime at = 0;
  double value = 0.0;
};

struct SimReport {
  std::vector<TimelineEntry> timeline;
  std::vector<EpochRecord> epochs;
  std::vector<CheckpointRecord> checkpoints;
  std::vector<TrainingHold> holds;
  std::vector<PreemptionRecord> preemptions;
  // Per event id: times trained into a committed state.
  std::vector<std::uint32_t> committed_counts;
  std::uint64_t final_watermark = 0;  // events [0, watermark) are durable
  std::int64_t events_total = 0;
  bool ended_in_permanent_hold = false;
  bool reached_stream_end = false;
  bool hit_horizon = false;
  SimTime end_time = 0;
  std::vector<SeriesPoint> buffer_fullness;
  std::vector<SeriesPoint> reader_tasks;
  std::vector<SeriesPoint> advancing_rate;  // one point per committed epoch
  std::vector<SeriesPoint> chips_active;
  double overall_advancing_rate = 0.0;

  std::string to_json() const;
  static SimReport from_json(const std::string& text);
};

struct AuditResult {
  bool pass = true;
  std::vector<std::uint64_t> violations;
  std::string detail;
};

// Runs the scenario to stream end, permanent hold, or the horizon.
// Deterministic for a given (scenario, seed).
SimReport run(const SimScenario& scenario, std::uint64_t seed);

// Recomputes committed-training counts from the raw timeline: every event id
// below the final watermark must have been trained into a committed state
// exactly once, and nothing above it at all.
AuditResult audit_exactly_once(const SimReport& report);

// Buffer-feedback scaling: below the low-water band grows in-flight work by
// one step, above the high-water band shrinks it, never below one.
int autoscale_readers(double fullness, int in_flight, const AutoscaleBands& bands);

enum class PipelineState { kTraining, kQueued, kOnHold };

struct PipelineSnapshot {
  PipelineState state = PipelineState::kTraining;
  double chips = 0.0;
};

struct ChipDemand {
  double training = 0.0;
  double queued = 0.0;
  double on_hold = 0.0;
  bool ratios_valid = false;  // false when nothing is training
  double queued_ratio = 0.0;
  double on_hold_ratio = 0.0;
};

ChipDemand chip_demand_snapshot(const std::vector<PipelineSnapshot>& fleet);

}  // namespace trainsim::sim

#endif  // TRAINSIM_PIPELINE_SIM_HPP_
