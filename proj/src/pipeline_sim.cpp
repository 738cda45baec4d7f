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

#include "trainsim/pipeline_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>

#include <nlohmann/json.hpp>

#include "trainsim/errors.hpp"
#include "trainsim/rng.hpp"

namespace trainsim::sim {

using json = nlohmann::json;

void SimScenario::validate() const {
  std::vector<std::string> problems;
  if (epoch_wall_time <= 0) problems.push_back("epoch_wall_time must be > 0");
  if (events_total < 0) problems.push_back("events_total must be >= 0");
  if (arrival_rate_per_us < 0) problems.push_back("arrival_rate_per_us must be >= 0");
  if (work_unit_size < 1) problems.push_back("work_unit_size must be >= 1");
  if (host_buffer_capacity < work_unit_size)
    problems.push_back("host_buffer_capacity must hold at least one work unit");
  if (work_unit_read_us < 0 || work_unit_transform_us < 0)
    problems.push_back("service times must be >= 0");
  if (service_jitter < 0.0 || service_jitter >= 1.0)
    problems.push_back("service_jitter must be in [0, 1)");
  if (train_us_per_event < 0) problems.push_back("train_us_per_event must be >= 0");
  if (checkpoint_write_us < 0 || restore_us < 0)
    problems.push_back("checkpoint/restore times must be >= 0");
  if (!(bands.low >= 0.0 && bands.low < bands.high && bands.high <= 1.0))
    problems.push_back("autoscale bands need 0 <= low < high <= 1");
  if (bands.interval <= 0) problems.push_back("autoscale interval must be > 0");
  if (initial_in_flight < 1) problems.push_back("initial_in_flight must be >= 1");
  if (max_in_flight < initial_in_flight)
    problems.push_back("max_in_flight must be >= initial_in_flight");
  if (chips < 0) problems.push_back("chips must be >= 0");
  if (rejoin_delay_us < 0) problems.push_back("rejoin_delay_us must be >= 0");
  for (const auto& f : faults) {
    if (f.at < 0) problems.push_back("fault times must be >= 0");
    if (f.kind == FaultKind::kSigStall && f.stall_duration <= 0)
      problems.push_back("sig_stall needs a positive duration");
    if (f.kind == FaultKind::kPreemption && f.warning < 0)
      problems.push_back("preemption warning must be >= 0");
  }
  if (!problems.empty()) {
    std::string msg = "invalid scenario:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ValidationError(msg);
  }
}

int autoscale_readers(double fullness, int in_flight,
                      const AutoscaleBands& bands) {
  if (fullness < bands.low) return in_flight + 1;
  if (fullness > bands.high) return std::max(1, in_flight - 1);
  return std::max(1, in_flight);
}

ChipDemand chip_demand_snapshot(const std::vector<PipelineSnapshot>& fleet) {
  ChipDemand d;
  for (const auto& p : fleet) {
    switch (p.state) {
      case PipelineState::kTraining: d.training += p.chips; break;
      case PipelineState::kQueued: d.queued += p.chips; break;
      case PipelineState::kOnHold: d.on_hold += p.chips; break;
    }
  }
  if (d.training > 0.0) {
    d.ratios_valid = true;
    d.queued_ratio = d.queued / d.training;
    d.on_hold_ratio = d.on_hold / d.training;
  }
  return d;
}

namespace {

enum class EvKind {
  kStartEpoch,
  kEpochEnd,
  kWorkUnitDone,
  kTrainDone,
  kAutoscaleTick,
  kMaybeIssue,
  kCheckpointDone,
  kRestoreDone,
  kFault,
  kStallClear,
  kDeadline,
};

struct Ev {
  SimTime at = 0;
  std::uint64_t seq = 0;
  EvKind kind = EvKind::kStartEpoch;
  std::uint64_t gen = 0;  // 0 = external, always delivered
  std::int64_t payload = 0;
};

struct EvLater {
  bool operator()(const Ev& a, const Ev& b) const {
    if (a.at != b.at) return a.at > b.at;
    return a.seq > b.seq;
  }
};

enum class Phase { kIdle, kRunning, kDraining, kCheckpointing, kRestoring, kHeld, kDone };

class Simulator {
 public:
  Simulator(const SimScenario& scenario, std::uint64_t seed)
      : sc_(scenario), rng_(seed) {
    sc_.validate();
    coverage_ = sc_.event_coverage_us > 0
                    ? sc_.event_coverage_us
                    : (sc_.arrival_rate_per_us > 0.0
                           ? std::max<SimTime>(
                                 1, std::llround(1.0 / sc_.arrival_rate_per_us))
                           : 1);
    report_.events_total = sc_.events_total;
    report_.committed_counts.assign(
        static_cast<std::size_t>(sc_.events_total), 0);
    // Restore-from-scratch checkpoint; zero-progress epochs reference it.
    report_.checkpoints.push_back({0, -1, 0, mix_hash(seed, 0xc0)});
  }

  SimReport run();

 private:
  void schedule(SimTime at, EvKind kind, std::uint64_t gen, std::int64_t payload = 0) {
    queue_.push(Ev{at, seq_++, kind, gen, payload});
  }

  bool epoch_active() const {
    return phase_ == Phase::kRunning || phase_ == Phase::kDraining ||
           phase_ == Phase::kCheckpointing;
  }

  std::int64_t available_events(SimTime t) const {
    if (sc_.arrival_rate_per_us <= 0.0) return sc_.events_total;
    return std::min<std::int64_t>(
        sc_.events_total,
        static_cast<std::int64_t>(std::floor(static_cast<double>(t) *
                                             sc_.arrival_rate_per_us)));
  }

  SimTime arrival_time(std::int64_t k) const {
    SimTime t = static_cast<SimTime>(
        std::ceil(static_cast<double>(k) / sc_.arrival_rate_per_us));
    while (available_events(t) < k) ++t;
    return t;
  }

  void log_fullness() {
    report_.buffer_fullness.push_back(
        {now_, static_cast<double>(buffer_count_) / sc_.host_buffer_capacity});
  }
  void log_readers() {
    report_.reader_tasks.push_back({now_, static_cast<double>(target_)});
  }
  void log_chips(double v) { report_.chips_active.push_back({now_, v}); }

  void flush_run() {
    if (run_lo_ == run_hi_) return;
    report_.timeline.push_back(
        {TimelineEntry::Kind::kTrain, now_, attempt_, run_lo_, run_hi_});
    attempt_runs_.push_back({run_lo_, run_hi_});
    run_lo_ = run_hi_ = 0;
  }

  void start_epoch() {
    if (phase_ != Phase::kIdle) return;
    if (now_ < rejoin_until_) {
      schedule(rejoin_until_, EvKind::kStartEpoch, gen_);
      return;
    }
    phase_ = Phase::kRunning;
    attempt_ = next_attempt_++;
    epoch_first_ = cursor_;
    epoch_start_ = now_;
    schedule(now_ + sc_.epoch_wall_time, EvKind::kEpochEnd, gen_);
    schedule(now_ + sc_.bands.interval, EvKind::kAutoscaleTick, gen_);
    issue_work_units();
  }

  void issue_work_units() {
    while (phase_ == Phase::kRunning && active_wus_ < target_ &&
           cursor_ < sc_.events_total) {
      const std::int64_t size =
          std::min<std::int64_t>(sc_.work_unit_size, sc_.events_total - cursor_);
      if (buffer_count_ + undelivered_events_ + size > sc_.host_buffer_capacity)
        break;  // backpressure: wait for training to free space
      if (available_events(now_) < cursor_ + size) {
        schedule(arrival_time(cursor_ + size), EvKind::kMaybeIssue, gen_);
        break;
      }
      const double jitter =
          sc_.service_jitter == 0.0
              ? 1.0
              : 1.0 + sc_.service_jitter * (2.0 * rng_.next_double() - 1.0);
      const SimTime service = std::max<SimTime>(
          0, std::llround((sc_.work_unit_read_us + sc_.work_unit_transform_us) *
                          jitter));
      const std::int64_t wu = next_wu_++;
      wu_ranges_[wu] = {static_cast<std::uint64_t>(cursor_),
                        static_cast<std::uint64_t>(cursor_ + size)};
      cursor_ += size;
      ++active_wus_;
      undelivered_events_ += size;
      schedule(now_ + service, EvKind::kWorkUnitDone, gen_, wu);
    }
  }

  void deliver_pending() {
    while (!pending_.empty()) {
      const auto [lo, hi] = pending_.front();
      const std::int64_t size = static_cast<std::int64_t>(hi - lo);
      if (buffer_count_ + size > sc_.host_buffer_capacity) break;
      pending_.pop_front();
      buffer_.push_back({lo, hi});
      buffer_count_ += size;
      undelivered_events_ -= size;
    }
  }

  void kick_trainer() {
    if (trainer_busy_ || buffer_.empty()) return;
    if (phase_ != Phase::kRunning && phase_ != Phase::kDraining) return;
    trainer_busy_ = true;
    schedule(now_ + sc_.train_us_per_event, EvKind::kTrainDone, gen_);
  }

  void on_train_done() {
    auto& [lo, hi] = buffer_.front();
    const std::uint64_t id = lo++;
    if (lo == hi) buffer_.pop_front();
    --buffer_count_;
    if (run_lo_ == run_hi_) {
      run_lo_ = id;
      run_hi_ = id + 1;
    } else if (id == run_hi_) {
      ++run_hi_;
    } else {
      flush_run();
      run_lo_ = id;
      run_hi_ = id + 1;
    }
    log_fullness();
    deliver_pending();
    trainer_busy_ = false;
    kick_trainer();
    if (phase_ == Phase::kRunning) issue_work_units();
    if (phase_ == Phase::kDraining) check_drain();
  }

  void on_wu_done(std::int64_t wu) {
    auto it = wu_ranges_.find(wu);
    if (it == wu_ranges_.end()) return;
    const auto range = it->second;
    wu_ranges_.erase(it);
    --active_wus_;
    const std::int64_t size = static_cast<std::int64_t>(range.second - range.first);
    if (buffer_count_ + size <= sc_.host_buffer_capacity) {
      buffer_.push_back(range);
      buffer_count_ += size;
      undelivered_events_ -= size;
      log_fullness();
    } else {
      pending_.push_back(range);
    }
    kick_trainer();
    if (phase_ == Phase::kRunning) issue_work_units();
    if (phase_ == Phase::kDraining) check_drain();
  }

  void check_drain() {
    if (phase_ != Phase::kDraining) return;
    if (active_wus_ != 0 || !pending_.empty() || buffer_count_ != 0 || trainer_busy_)
      return;
    phase_ = Phase::kCheckpointing;
    checkpoint_done_at_ = now_ + sc_.checkpoint_write_us;
    schedule(checkpoint_done_at_, EvKind::kCheckpointDone, gen_);
  }

  void commit_epoch() {
    flush_run();
    const std::uint64_t new_watermark = static_cast<std::uint64_t>(cursor_);
    report_.timeline.push_back({TimelineEntry::Kind::kCommit, now_, attempt_,
                                static_cast<std::uint64_t>(epoch_first_),
                                new_watermark});
    for (const auto& [lo, hi] : attempt_runs_)
      for (std::uint64_t id = lo; id < hi; ++id)
        ++report_.committed_counts[static_cast<std::size_t>(id)];
    attempt_runs_.clear();

    EpochRecord rec;
    rec.index = attempt_;
    rec.first_event = static_cast<std::uint64_t>(epoch_first_);
    rec.end_event = new_watermark;
    rec.committed = true;
    rec.ended_early = preempt_pending_.has_value();
    rec.start_time = epoch_start_;
    rec.end_time = now_;
    if (cursor_ > epoch_first_) {
      CheckpointRecord ckpt;
      ckpt.id = ++last_checkpoint_id_;
      ckpt.epoch_index = attempt_;
      ckpt.high_watermark = new_watermark;
      ckpt.state_digest = mix_hash(new_watermark, 0xc0de ^ rng_.state());
      report_.checkpoints.push_back(ckpt);
      rec.checkpoint_id = ckpt.id;
    } else {
      rec.checkpoint_id = last_checkpoint_id_;  // nothing new to persist
    }
    report_.epochs.push_back(rec);
    committed_ = cursor_;

    const SimTime duration = now_ - epoch_start_;
    if (duration > 0)
      report_.advancing_rate.push_back(
          {now_, static_cast<double>(cursor_ - epoch_first_) * coverage_ /
                     static_cast<double>(duration)});

    if (preempt_pending_) {
      auto& prec = report_.preemptions[preempt_pending_->record];
      prec.outcome = PreemptionOutcome::kCommittedEarly;
      prec.rejoin_time = now_ + sc_.rejoin_delay_us;
      rejoin_until_ = std::max(rejoin_until_, prec.rejoin_time);
      preempt_pending_.reset();
    }
    ++gen_;
    phase_ = Phase::kIdle;
    if (committed_ == sc_.events_total) {
      phase_ = Phase::kDone;
      report_.reached_stream_end = true;
      log_chips(0.0);
    } else {
      schedule(std::max(now_, rejoin_until_), EvKind::kStartEpoch, gen_);
    }
  }

  void discard_epoch(UncommittedReason reason) {
    flush_run();
    report_.timeline.push_back({TimelineEntry::Kind::kDiscard, now_, attempt_,
                                static_cast<std::uint64_t>(epoch_first_),
                                static_cast<std::uint64_t>(cursor_)});
    EpochRecord rec;
    rec.index = attempt_;
    rec.first_event = static_cast<std::uint64_t>(epoch_first_);
    rec.end_event = static_cast<std::uint64_t>(cursor_);
    rec.committed = false;
    rec.reason = reason;
    rec.start_time = epoch_start_;
    rec.end_time = now_;
    report_.epochs.push_back(rec);

    ++gen_;
    wu_ranges_.clear();
    active_wus_ = 0;
    undelivered_events_ = 0;
    pending_.clear();
    buffer_.clear();
    buffer_count_ = 0;
    trainer_busy_ = false;
    attempt_runs_.clear();
    cursor_ = committed_;
    log_fullness();
  }

  void place_hold(HoldKind kind) {
    TrainingHold hold;
    hold.kind = kind;
    hold.placed_at = now_;
    hold.resources_released = true;
    report_.holds.push_back(hold);
    report_.timeline.push_back({TimelineEntry::Kind::kHoldPlaced, now_, attempt_, 0,
                                static_cast<std::uint64_t>(kind)});
    phase_ = Phase::kHeld;
    ++gen_;
    log_chips(0.0);
  }

  void on_fault(const FaultEvent& f) {
    if (phase_ == Phase::kDone) return;
    switch (f.kind) {
      case FaultKind::kTransient:
        // Temporary component failure: no hold, replay from the checkpoint.
        if (epoch_active()) {
          discard_epoch(UncommittedReason::kComponentFailure);
          phase_ = Phase::kRestoring;
          schedule(now_ + sc_.restore_us, EvKind::kRestoreDone, gen_);
        }
        break;
      case FaultKind::kPermanent:
        if (phase_ == Phase::kHeld) {
          // Upgrade a transient hold; the permanent one never releases.
          if (!report_.holds.empty() && !report_.holds.back().released_at &&
              report_.holds.back().kind == HoldKind::kTransientStall) {
            report_.holds.back().released_at = now_;
            report_.timeline.push_back(
                {TimelineEntry::Kind::kHoldReleased, now_, attempt_, 0, 0});
          }
        }
        if (epoch_active()) discard_epoch(UncommittedReason::kComponentFailure);
        place_hold(HoldKind::kPermanentError);
        report_.ended_in_permanent_hold = true;
        break;
      case FaultKind::kSigStall:
        if (phase_ == Phase::kHeld) {
          const bool transient_hold =
              !report_.holds.empty() && !report_.holds.back().released_at &&
              report_.holds.back().kind == HoldKind::kTransientStall;
          if (transient_hold) {
            stall_clear_at_ = std::max(stall_clear_at_, now_ + f.stall_duration);
            schedule(stall_clear_at_, EvKind::kStallClear, 0);
          }
          break;  // a permanent hold swallows further stalls
        }
        if (epoch_active()) discard_epoch(UncommittedReason::kHold);
        place_hold(HoldKind::kTransientStall);
        stall_clear_at_ = now_ + f.stall_duration;
        schedule(stall_clear_at_, EvKind::kStallClear, 0);
        break;
      case FaultKind::kPreemption: {
        PreemptionRecord rec;
        rec.job = f.job;
        rec.notice_time = now_;
        rec.shutdown_deadline = now_ + f.warning;
        rec.interrupted_running_epoch = epoch_active() && !preempt_pending_;
        rec.outcome = PreemptionOutcome::kCommittedEarly;
        report_.timeline.push_back({TimelineEntry::Kind::kPreemptNotice, now_,
                                    attempt_, 0,
                                    static_cast<std::uint64_t>(f.warning)});
        const std::size_t index = report_.preemptions.size();
        report_.preemptions.push_back(rec);
        if (rec.interrupted_running_epoch) {
          // The job exits at commit (graceful) or at the deadline (killed);
          // the rejoin clock starts then.
          preempt_pending_ = Pending{index, rec.shutdown_deadline};
          schedule(rec.shutdown_deadline, EvKind::kDeadline, 0);
          if (phase_ == Phase::kRunning) {
            // Early epoch end: stop issuing, drain, checkpoint what we have.
            phase_ = Phase::kDraining;
            check_drain();
          }
        } else {
          // Nothing uncommitted is at risk; the job exits right away.
          report_.preemptions[index].rejoin_time = now_ + sc_.rejoin_delay_us;
          rejoin_until_ = std::max(rejoin_until_, now_ + sc_.rejoin_delay_us);
        }
        break;
      }
    }
  }

  void on_deadline(SimTime at) {
    if (!preempt_pending_ || preempt_pending_->deadline != at) return;
    if (phase_ == Phase::kCheckpointing && checkpoint_done_at_ <= at)
      return;  // the checkpoint lands within the warning; commit proceeds
    auto& prec = report_.preemptions[preempt_pending_->record];
    prec.outcome = PreemptionOutcome::kRestartFromCheckpoint;
    prec.rejoin_time = at + sc_.rejoin_delay_us;
    rejoin_until_ = std::max(rejoin_until_, prec.rejoin_time);
    preempt_pending_.reset();
    if (epoch_active()) {
      discard_epoch(UncommittedReason::kPreemptionTimeout);
      phase_ = Phase::kRestoring;
      schedule(now_ + sc_.restore_us, EvKind::kRestoreDone, gen_);
    }
  }

  void on_stall_clear(SimTime at) {
    if (phase_ != Phase::kHeld || at != stall_clear_at_) return;
    if (report_.holds.empty() ||
        report_.holds.back().kind != HoldKind::kTransientStall)
      return;
    report_.holds.back().released_at = now_;
    report_.timeline.push_back(
        {TimelineEntry::Kind::kHoldReleased, now_, attempt_, 0, 0});
    log_chips(static_cast<double>(sc_.chips));
    phase_ = Phase::kRestoring;
    schedule(now_ + sc_.restore_us, EvKind::kRestoreDone, gen_);
  }

  void on_tick() {
    if (phase_ != Phase::kRunning) return;
    const double fullness =
        static_cast<double>(buffer_count_) / sc_.host_buffer_capacity;
    const int next = std::min(sc_.max_in_flight,
                              autoscale_readers(fullness, target_, sc_.bands));
    if (next != target_) {
      target_ = next;
      log_readers();
    }
    issue_work_units();
    schedule(now_ + sc_.bands.interval, EvKind::kAutoscaleTick, gen_);
  }

  const SimScenario sc_;
  Rng rng_;
  SimTime coverage_ = 1;
  SimReport report_;

  std::priority_queue<Ev, std::vector<Ev>, EvLater> queue_;
  std::uint64_t seq_ = 0;
  SimTime now_ = 0;
  std::uint64_t gen_ = 1;
  Phase phase_ = Phase::kIdle;

  std::int64_t committed_ = 0;  // durable watermark (event count)
  std::int64_t cursor_ = 0;     // next event to assign
  int next_attempt_ = 0;
  int attempt_ = 0;
  std::int64_t epoch_first_ = 0;
  SimTime epoch_start_ = 0;

  std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>> wu_ranges_;
  std::int64_t next_wu_ = 0;
  int active_wus_ = 0;
  std::int64_t undelivered_events_ = 0;
  std::deque<std::pair<std::uint64_t, std::uint64_t>> buffer_;
  std::deque<std::pair<std::uint64_t, std::uint64_t>> pending_;
  std::int64_t buffer_count_ = 0;
  bool trainer_busy_ = false;
  std::uint64_t run_lo_ = 0, run_hi_ = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> attempt_runs_;

  int target_ = 1;
  int last_checkpoint_id_ = 0;
  SimTime checkpoint_done_at_ = 0;

  struct Pending {
    std::size_t record;
    SimTime deadline;
  };
  std::optional<Pending> preempt_pending_;
  SimTime rejoin_until_ = 0;
  SimTime stall_clear_at_ = -1;
};

SimReport Simulator::run() {
  target_ = sc_.initial_in_flight;
  log_readers();
  log_chips(static_cast<double>(sc_.chips));
  log_fullness();
  for (std::size_t i = 0; i < sc_.faults.size(); ++i)
    schedule(sc_.faults[i].at, EvKind::kFault, 0, static_cast<std::int64_t>(i));
  if (sc_.events_total == 0) {
    phase_ = Phase::kDone;
    report_.reached_stream_end = true;
  } else {
    schedule(0, EvKind::kStartEpoch, gen_);
  }

  while (!queue_.empty()) {
    const Ev ev = queue_.top();
    queue_.pop();
    if (sc_.max_sim_time > 0 && ev.at > sc_.max_sim_time) {
      report_.hit_horizon = true;
      break;
    }
    now_ = ev.at;
    if (ev.gen != 0 && ev.gen != gen_) continue;
    switch (ev.kind) {
      case EvKind::kStartEpoch: start_epoch(); break;
      case EvKind::kEpochEnd:
        if (phase_ == Phase::kRunning) {
          phase_ = Phase::kDraining;
          check_drain();
        }
        break;
      case EvKind::kWorkUnitDone: on_wu_done(ev.payload); break;
      case EvKind::kTrainDone:
        if (trainer_busy_) on_train_done();
        break;
      case EvKind::kAutoscaleTick: on_tick(); break;
      case EvKind::kMaybeIssue:
        if (phase_ == Phase::kRunning) issue_work_units();
        break;
      case EvKind::kCheckpointDone:
        if (phase_ == Phase::kCheckpointing) commit_epoch();
        break;
      case EvKind::kRestoreDone:
        if (phase_ == Phase::kRestoring) {
          phase_ = Phase::kIdle;
          schedule(std::max(now_, rejoin_until_), EvKind::kStartEpoch, gen_);
        }
        break;
      case EvKind::kFault:
        on_fault(sc_.faults[static_cast<std::size_t>(ev.payload)]);
        break;
      case EvKind::kStallClear: on_stall_clear(ev.at); break;
      case EvKind::kDeadline: on_deadline(ev.at); break;
    }
  }

  report_.end_time = now_;
  report_.final_watermark = static_cast<std::uint64_t>(committed_);
  report_.overall_advancing_rate =
      now_ > 0 ? static_cast<double>(committed_) * coverage_ /
                     static_cast<double>(now_)
               : 0.0;
  return report_;
}

}  // namespace

SimReport run(const SimScenario& scenario, std::uint64_t seed) {
  Simulator sim(scenario, seed);
  return sim.run();
}

AuditResult audit_exactly_once(const SimReport& report) {
  AuditResult result;
  // Recount committed training from the raw timeline only.
  std::map<int, std::vector<std::pair<std::uint64_t, std::uint64_t>>> trained;
  std::vector<std::uint32_t> counts(
      static_cast<std::size_t>(report.events_total), 0);
  for (const auto& e : report.timeline) {
    switch (e.kind) {
      case TimelineEntry::Kind::kTrain:
        trained[e.attempt].push_back({e.lo, e.hi});
        break;
      case TimelineEntry::Kind::kDiscard:
        trained.erase(e.attempt);
        break;
      case TimelineEntry::Kind::kCommit: {
        auto it = trained.find(e.attempt);
        if (it != trained.end()) {
          for (const auto& [lo, hi] : it->second)
            for (std::uint64_t id = lo; id < hi; ++id) {
              if (id < counts.size()) ++counts[static_cast<std::size_t>(id)];
            }
          trained.erase(it);
        }
        break;
      }
      default:
        break;
    }
  }
  for (std::uint64_t id = 0; id < counts.size(); ++id) {
    const std::uint32_t expected = id < report.final_watermark ? 1u : 0u;
    if (counts[static_cast<std::size_t>(id)] != expected)
      result.violations.push_back(id);
  }
  result.pass = result.violations.empty();
  if (!result.pass) {
    result.detail = "events with wrong committed-training count: " +
                    std::to_string(result.violations.size());
  }
  return result;
}

// --- JSON --------------------------------------------------------------------

namespace {

const char* timeline_kind_name(TimelineEntry::Kind k) {
  switch (k) {
    case TimelineEntry::Kind::kTrain: return "train";
    case TimelineEntry::Kind::kCommit: return "commit";
    case TimelineEntry::Kind::kDiscard: return "discard";
    case TimelineEntry::Kind::kHoldPlaced: return "hold_placed";
    case TimelineEntry::Kind::kHoldReleased: return "hold_released";
    case TimelineEntry::Kind::kPreemptNotice: return "preempt_notice";
  }
  return "?";
}

TimelineEntry::Kind timeline_kind_from(const std::string& s) {
  if (s == "train") return TimelineEntry::Kind::kTrain;
  if (s == "commit") return TimelineEntry::Kind::kCommit;
  if (s == "discard") return TimelineEntry::Kind::kDiscard;
  if (s == "hold_placed") return TimelineEntry::Kind::kHoldPlaced;
  if (s == "hold_released") return TimelineEntry::Kind::kHoldReleased;
  if (s == "preempt_notice") return TimelineEntry::Kind::kPreemptNotice;
  throw ValidationError("unknown timeline kind: " + s);
}

json series_to_json(const std::vector<SeriesPoint>& series) {
  json arr = json::array();
  for (const auto& p : series) arr.push_back({p.at, p.value});
  return arr;
}

std::vector<SeriesPoint> series_from_json(const json& arr) {
  std::vector<SeriesPoint> out;
  for (const auto& p : arr) out.push_back({p.at(0), p.at(1)});
  return out;
}

}  // namespace

std::string SimReport::to_json() const {
  json j;
  j["version"] = 1;
  j["events_total"] = events_total;
  j["final_watermark"] = final_watermark;
  j["reached_stream_end"] = reached_stream_end;
  j["ended_in_permanent_hold"] = ended_in_permanent_hold;
  j["hit_horizon"] = hit_horizon;
  j["end_time"] = end_time;
  j["overall_advancing_rate"] = overall_advancing_rate;
  j["timeline"] = json::array();
  for (const auto& e : timeline)
    j["timeline"].push_back({{"kind", timeline_kind_name(e.kind)},
                             {"at", e.at},
                             {"attempt", e.attempt},
                             {"lo", e.lo},
                             {"hi", e.hi}});
  j["epochs"] = json::array();
  for (const auto& e : epochs) {
    json je = {{"index", e.index},
               {"first_event", e.first_event},
               {"end_event", e.end_event},
               {"committed", e.committed},
               {"ended_early", e.ended_early},
               {"start_time", e.start_time},
               {"end_time", e.end_time}};
    if (e.checkpoint_id) je["checkpoint_id"] = *e.checkpoint_id;
    if (e.reason) {
      const char* names[] = {"component_failure", "preemption_timeout", "hold"};
      je["reason"] = names[static_cast<int>(*e.reason)];
    }
    j["epochs"].push_back(je);
  }
  j["checkpoints"] = json::array();
  for (const auto& c : checkpoints)
    j["checkpoints"].push_back({{"id", c.id},
                                {"epoch_index", c.epoch_index},
                                {"high_watermark", c.high_watermark},
                                {"state_digest", c.state_digest}});
  j["holds"] = json::array();
  for (const auto& h : holds) {
    json jh = {{"kind", h.kind == HoldKind::kPermanentError ? "permanent_error"
                                                            : "transient_stall"},
               {"placed_at", h.placed_at},
               {"resources_released", h.resources_released}};
    if (h.released_at) jh["released_at"] = *h.released_at;
    j["holds"].push_back(jh);
  }
  j["preemptions"] = json::array();
  for (const auto& p : preemptions)
    j["preemptions"].push_back(
        {{"job", p.job},
         {"notice_time", p.notice_time},
         {"shutdown_deadline", p.shutdown_deadline},
         {"acknowledged", p.acknowledged},
         {"interrupted_running_epoch", p.interrupted_running_epoch},
         {"outcome", p.outcome == PreemptionOutcome::kCommittedEarly
                         ? "committed_early"
                         : "restart_from_checkpoint"},
         {"rejoin_time", p.rejoin_time}});
  j["committed_counts"] = committed_counts;
  j["series"] = {{"buffer_fullness", series_to_json(buffer_fullness)},
                 {"reader_tasks", series_to_json(reader_tasks)},
                 {"advancing_rate", series_to_json(advancing_rate)},
                 {"chips_active", series_to_json(chips_active)}};
  return j.dump(2);
}

SimReport SimReport::from_json(const std::string& text) {
  const json j = json::parse(text);
  SimReport r;
  r.events_total = j.at("events_total");
  r.final_watermark = j.at("final_watermark");
  r.reached_stream_end = j.at("reached_stream_end");
  r.ended_in_permanent_hold = j.at("ended_in_permanent_hold");
  r.hit_horizon = j.at("hit_horizon");
  r.end_time = j.at("end_time");
  r.overall_advancing_rate = j.at("overall_advancing_rate");
  for (const auto& e : j.at("timeline"))
    r.timeline.push_back({timeline_kind_from(e.at("kind")), e.at("at"),
                          e.at("attempt"), e.at("lo"), e.at("hi")});
  for (const auto& je : j.at("epochs")) {
    EpochRecord e;
    e.index = je.at("index");
    e.first_event = je.at("first_event");
    e.end_event = je.at("end_event");
    e.committed = je.at("committed");
    e.ended_early = je.at("ended_early");
    e.start_time = je.at("start_time");
    e.end_time = je.at("end_time");
    if (je.contains("checkpoint_id")) e.checkpoint_id = je.at("checkpoint_id").get<int>();
    if (je.contains("reason")) {
      const std::string s = je.at("reason");
      e.reason = s == "component_failure" ? UncommittedReason::kComponentFailure
                 : s == "preemption_timeout" ? UncommittedReason::kPreemptionTimeout
                                             : UncommittedReason::kHold;
    }
    r.epochs.push_back(e);
  }
  for (const auto& c : j.at("checkpoints"))
    r.checkpoints.push_back(
        {c.at("id"), c.at("epoch_index"), c.at("high_watermark"), c.at("state_digest")});
  for (const auto& jh : j.at("holds")) {
    TrainingHold h;
    h.kind = jh.at("kind") == "permanent_error" ? HoldKind::kPermanentError
                                                : HoldKind::kTransientStall;
    h.placed_at = jh.at("placed_at");
    h.resources_released = jh.at("resources_released");
    if (jh.contains("released_at")) h.released_at = jh.at("released_at").get<SimTime>();
    r.holds.push_back(h);
  }
  for (const auto& p : j.at("preemptions")) {
    PreemptionRecord rec;
    rec.job = p.at("job");
    rec.notice_time = p.at("notice_time");
    rec.shutdown_deadline = p.at("shutdown_deadline");
    rec.acknowledged = p.at("acknowledged");
    rec.interrupted_running_epoch = p.at("interrupted_running_epoch");
    rec.outcome = p.at("outcome") == "committed_early"
                      ? PreemptionOutcome::kCommittedEarly
                      : PreemptionOutcome::kRestartFromCheckpoint;
    rec.rejoin_time = p.at("rejoin_time");
    r.preemptions.push_back(rec);
  }
  r.committed_counts = j.at("committed_counts").get<std::vector<std::uint32_t>>();
  const auto& s = j.at("series");
  r.buffer_fullness = series_from_json(s.at("buffer_fullness"));
  r.reader_tasks = series_from_json(s.at("reader_tasks"));
  r.advancing_rate = series_from_json(s.at("advancing_rate"));
  r.chips_active = series_from_json(s.at("chips_active"));
  return r;
}

}  // namespace trainsim::sim
