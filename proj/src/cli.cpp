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

#include "trainsim/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "trainsim/errors.hpp"
#include "trainsim/fdp.hpp"

namespace trainsim {

namespace fs = std::filesystem;
using json = nlohmann::json;

GeneratedSigWorkload generate_sig_pool(
    const SigPoolConfig& pool, const std::vector<SigClientConfig>& clients) {
  GeneratedSigWorkload out;
  for (int c = 0; c < pool.components; ++c) {
    sig::TransformGraph g;
    const std::string fa = "f" + std::to_string(c) + "_a";
    const std::string fb = "f" + std::to_string(c) + "_b";
    const std::string fc = "f" + std::to_string(c) + "_c";
    switch (c % 3) {
      case 0:
        g.nodes = {{"r", "read", {fa}, {}}, {"u", "unigrams", {}, {"r"}}};
        g.outputs = {"u"};
        break;
      case 1:
        g.nodes = {{"ra", "read", {fa}, {}},
                   {"rb", "read", {fb}, {}},
                   {"ua", "unigrams", {}, {"ra"}},
                   {"ub", "unigrams", {}, {"rb"}},
                   {"i", "intersect", {}, {"ua", "ub"}}};
        g.outputs = {"i"};
        break;
      default:
        g.nodes = {{"ra", "read", {fa}, {}},
                   {"rb", "read", {fb}, {}},
                   {"ua", "unigrams", {}, {"ra"}},
                   {"ub", "unigrams", {}, {"rb"}},
                   {"i", "intersect", {}, {"ua", "ub"}},
                   {"rc", "read", {fc}, {}},
                   {"k", "concat", {}, {"i", "rc"}}};
        g.outputs = {"k"};
        break;
    }
    out.graphs["pool" + std::to_string(c)] = std::move(g);
  }
  for (int m = 0; m < pool.models; ++m) {
    std::set<int> chosen;
    if (pool.selection == "shared") {
      for (int j = 0; j < pool.components_per_model && j < pool.components; ++j)
        chosen.insert(j);
    } else {
      for (int j = 0; chosen.size() <
                      static_cast<std::size_t>(
                          std::min(pool.components_per_model, pool.components));
           ++j)
        chosen.insert(static_cast<int>(
            mix_hash(static_cast<std::uint64_t>(m) * 131 + j, 0x9001) %
            static_cast<std::uint64_t>(pool.components)));
    }
    const std::string client =
        clients.empty() ? "default"
                        : clients[static_cast<std::size_t>(m) % clients.size()].id;
    for (int c : chosen) {
      SigSubmission s;
      s.model = "model" + std::to_string(m);
      s.pipeline = "pipe" + std::to_string(m);
      s.client = client;
      s.graph = "pool" + std::to_string(c);
      s.range = pool.range;
      s.at = m;
      out.submissions.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write: " + path.string());
  out << content;
}

void write_series_csv(const fs::path& path, const std::string& column,
                      const std::vector<sim::SeriesPoint>& series) {
  std::ostringstream os;
  os << "time_us," << column << "\n";
  for (const auto& p : series) os << p.at << "," << p.value << "\n";
  write_file(path, os.str());
}

int cmd_partition(const Scenario& scenario, const std::string& model_name,
                  const fs::path& out, bool oracle) {
  if (!scenario.partitioner)
    throw ValidationError("scenario has no partitioner section");
  if (scenario.models.empty())
    throw ValidationError("scenario has no models");
  const ModelSpec& model =
      model_name.empty() ? scenario.models.front() : scenario.model(model_name);
  const PartitionerConfig& cfg = *scenario.partitioner;
  const TrafficStats stats = scenario_traffic(model, cfg);

  const ScoredPlan plan =
      hybrid_partition(model, cfg.node_count, stats, cfg.mem_capacity_per_node,
                       cfg.search_budget, cfg.search);
  const auto mem = memory_bytes(plan.plan, model.tables);

  json report;
  report["model"] = model.name;
  report["objective"] = plan.objective;
  report["imbalance"] = plan.load.imbalance;
  report["bytes_per_node"] = plan.load.bytes_per_node;
  report["memory_per_node"] = mem;
  report["mem_capacity_per_node"] = cfg.mem_capacity_per_node;
  report["zero_traffic"] = plan.load.zero_traffic;
  std::cout << "plan objective " << plan.objective << ", load imbalance "
            << plan.load.imbalance << " over " << cfg.node_count << " nodes\n";
  if (oracle) {
    const ScoredPlan exact =
        exact_partition_oracle(model, cfg.node_count, stats, cfg.search);
    report["oracle_objective"] = exact.objective;
    std::cout << "heuristic objective " << plan.objective
              << " vs exact oracle " << exact.objective << "\n";
  }
  write_file(out / "plan.json", plan_to_json(plan.plan));
  write_file(out / "report.json", report.dump(2));
  return 0;
}

int cmd_simulate(const Scenario& scenario, const fs::path& out,
                 std::optional<std::uint64_t> seed_override, int seeds) {
  if (!scenario.sim) throw ValidationError("scenario has no sim section");
  const std::uint64_t base = seed_override.value_or(scenario.seed);
  int passed = 0;
  sim::SimReport first;
  for (int i = 0; i < seeds; ++i) {
    const sim::SimReport report = sim::run(*scenario.sim, base + i);
    const sim::AuditResult audit = sim::audit_exactly_once(report);
    if (audit.pass) ++passed;
    if (i == 0) first = report;
  }
  write_file(out / "report.json", first.to_json());
  write_series_csv(out / "series" / "buffer_fullness.csv", "fullness",
                   first.buffer_fullness);
  write_series_csv(out / "series" / "reader_tasks.csv", "readers",
                   first.reader_tasks);
  write_series_csv(out / "series" / "advancing_rate.csv", "rate",
                   first.advancing_rate);
  write_series_csv(out / "series" / "chips_active.csv", "chips",
                   first.chips_active);
  if (seeds == 1) {
    std::cout << "exactly-once: " << (passed == 1 ? "PASS" : "FAIL") << "\n";
  } else {
    std::cout << "exactly-once: " << passed << "/" << seeds << " seeds passed\n";
  }
  std::cout << "advancing rate " << first.overall_advancing_rate
            << ", watermark " << first.final_watermark << "/"
            << first.events_total
            << (first.ended_in_permanent_hold ? ", ended in HOLD(permanent)" : "")
            << "\n";
  return passed == seeds ? 0 : 3;
}

struct SigActionFlags {
  std::string raw_field;
  std::string pipeline;
  std::string key_hex;
  std::string state_path;
  std::string graph;
  std::string model = "adhoc";
  std::vector<std::int64_t> range = {0, 16};
};

void replay_workload(sig::SigService& service, const SigScenarioConfig& cfg) {
  for (const auto& c : cfg.clients) service.register_client(c.id, c.priority);

  std::map<std::string, sig::TransformGraph> graphs = cfg.graphs;
  std::vector<SigSubmission> submissions = cfg.submissions;
  if (cfg.pool) {
    GeneratedSigWorkload generated = generate_sig_pool(*cfg.pool, cfg.clients);
    graphs.insert(generated.graphs.begin(), generated.graphs.end());
    submissions.insert(submissions.end(), generated.submissions.begin(),
                       generated.submissions.end());
  }
  std::stable_sort(submissions.begin(), submissions.end(),
                   [](const SigSubmission& a, const SigSubmission& b) {
                     return a.at < b.at;
                   });
  std::set<std::string> fields;
  for (const auto& [_, g] : graphs)
    for (const auto& f : g.raw_reads()) fields.insert(f);
  sig::SyntheticRawSource raw(
      std::vector<std::string>(fields.begin(), fields.end()),
      cfg.raw_tokens_per_field, cfg.raw_vocab, 0x5eed);

  for (const auto& s : submissions) {
    auto it = graphs.find(s.graph);
    if (it == graphs.end()) throw NotFoundError("unknown graph: " + s.graph);
    service.submit(it->second, s.model, s.pipeline, s.client, s.range, s.at);
    if (cfg.ttl > 0) service.evict_stale(s.at, cfg.ttl);
  }
  while (service.pending_tasks() > 0)
    service.worker_poll_execute(raw, service.pending_tasks(), 0);
}

void print_metrics(const sig::SigMetrics& m) {
  std::cout << "hit rate " << m.hit_rate << " (" << m.hits << " hits, "
            << m.misses << " misses), mean reuse "
            << m.mean_consumers_per_ready_block << ", peak reuse "
            << m.peak_consumers << ", worker evaluations "
            << m.worker_evaluations << ", failed tasks " << m.failed_tasks
            << "\n";
}

int cmd_sig(const Scenario& scenario, const std::string& action,
            const fs::path& out, const SigActionFlags& flags) {
  const fs::path state_path =
      flags.state_path.empty() ? out / "sig_state.json" : fs::path(flags.state_path);
  sig::SigService service;
  if (action == "replay") {
    if (!scenario.sig) throw ValidationError("scenario has no sig section");
    replay_workload(service, *scenario.sig);
    const auto m = service.metrics();
    print_metrics(m);
    write_file(state_path, service.snapshot_json());
    json mj = {{"hit_rate", m.hit_rate},
               {"hits", m.hits},
               {"misses", m.misses},
               {"mean_consumers_per_ready_block", m.mean_consumers_per_ready_block},
               {"peak_consumers", m.peak_consumers},
               {"worker_evaluations", m.worker_evaluations}};
    write_file(out / "sig_metrics.json", mj.dump(2));
    return 0;
  }
  if (action == "evict") {
    std::ifstream in(state_path);
    if (!in) throw NotFoundError("no cache state at " + state_path.string() +
                                 "; run replay first");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    service.load_snapshot(text);
    sig::EvictPredicate predicate;
    if (!flags.raw_field.empty()) {
      predicate = sig::EvictPredicate::ByRawField(flags.raw_field);
    } else if (!flags.pipeline.empty()) {
      predicate = sig::EvictPredicate::ByPipeline(flags.pipeline);
    } else if (!flags.key_hex.empty()) {
      sig::CanonicalKey key;
      if (flags.key_hex.size() != 64)
        throw ValidationError("--key expects 64 hex digits");
      for (std::size_t i = 0; i < 32; ++i)
        key.digest[i] = static_cast<std::uint8_t>(
            std::stoi(flags.key_hex.substr(2 * i, 2), nullptr, 16));
      predicate = sig::EvictPredicate::ByKey(key);
    } else {
      throw ValidationError(
          "evict needs one of --raw-field, --pipeline, --key");
    }
    const auto evicted = service.evict_query(predicate);
    std::cout << "evicted " << evicted.size() << " entries\n";
    write_file(state_path, service.snapshot_json());
    return 0;
  }
  if (action == "metrics") {
    std::ifstream in(state_path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      service.load_snapshot(text);
    }
    print_metrics(service.metrics());
    return 0;
  }
  if (action == "submit") {
    if (!scenario.sig) throw ValidationError("scenario has no sig section");
    if (flags.graph.empty())
      throw ValidationError("submit needs --graph NAME from the scenario");
    std::ifstream in(state_path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)),
                       std::istreambuf_iterator<char>());
      service.load_snapshot(text);
    }
    std::map<std::string, sig::TransformGraph> graphs = scenario.sig->graphs;
    if (scenario.sig->pool) {
      auto generated = generate_sig_pool(*scenario.sig->pool, scenario.sig->clients);
      graphs.insert(generated.graphs.begin(), generated.graphs.end());
    }
    auto it = graphs.find(flags.graph);
    if (it == graphs.end()) throw NotFoundError("unknown graph: " + flags.graph);
    if (flags.range.size() != 2)
      throw ValidationError("--range expects two values");
    const auto solution = service.submit(
        it->second, flags.model, flags.model, "default",
        {static_cast<std::uint64_t>(flags.range[0]),
         static_cast<std::uint64_t>(flags.range[1])},
        0);
    for (const auto& item : solution.inputs)
      std::cout << item.output_node << " -> " << item.storage_location << " ("
                << (item.cache_hit ? "hit" : "miss") << ")\n";
    write_file(state_path, service.snapshot_json());
    return 0;
  }
  throw ValidationError("unknown sig action: " + action);
}

int cmd_cost(const Scenario& scenario, const fs::path& out,
             const std::string& format) {
  if (!scenario.tco) throw ValidationError("scenario has no tco section");
  const auto& cfg = *scenario.tco;
  const CostComparison cmp = compare_sig_lig(cfg.models, cfg.params, cfg.pool);
  write_file(out / "cost.csv", cost_report_csv(cmp));
  if (format == "csv") {
    std::cout << cost_report_csv(cmp);
  } else if (format == "json") {
    json j;
    j["models"] = json::array();
    for (const auto& m : cmp.models)
      j["models"].push_back({{"model", m.model},
                             {"total_sig", m.total_sig},
                             {"total_lig", m.total_lig},
                             {"reduction", m.reduction}});
    j["geomean_reduction"] = cmp.geomean_reduction;
    std::cout << j.dump(2) << "\n";
  } else {
    for (const auto& m : cmp.models)
      std::cout << m.model << ": SIG " << m.total_sig << "  LIG " << m.total_lig
                << "  reduction " << m.reduction * 100.0 << "%\n";
    std::cout << "geomean reduction " << cmp.geomean_reduction * 100.0 << "%\n";
  }
  return 0;
}

int cmd_ladder(const Scenario& scenario, const std::string& model_name,
               const fs::path& out) {
  if (!scenario.exec || !scenario.partitioner)
    throw ValidationError("ladder needs exec and partitioner sections");
  const ModelSpec& model =
      model_name.empty() ? scenario.models.front() : scenario.model(model_name);
  const PartitionerConfig& cfg = *scenario.partitioner;
  const TrafficStats true_stats = scenario_traffic(model, cfg);
  // Compile-time view: the declared access profile is known, the measured
  // valency is not, so every table is assumed single-valent.
  TrafficStats naive;
  for (const auto& t : model.tables) {
    EmbeddingTableSpec assumed = t;
    assumed.mean_valency = 1.0;
    naive.rows[t.name] = synthesize_row_traffic(assumed, cfg.traffic_batch_size,
                                                std::nullopt);
  }
  LadderOptions opts;
  opts.nodes = cfg.node_count;
  opts.tc_us = scenario.exec->tc_us;
  opts.sc_balanced_us = scenario.exec->sc_balanced_us;
  opts.contention = scenario.exec->contention;
  opts.search = cfg.search;
  opts.search_budget = cfg.search_budget;
  const auto rows = optimization_ladder(model, true_stats, naive, opts);
  write_file(out / "ladder.csv", step_cost_csv(rows));
  for (const auto& r : rows)
    std::cout << r.mode << ": step " << r.step_us << " us (speedup " << r.speedup
              << ")\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"deterministic toolkit for embedding partitioning, shared "
               "input-generation memoization, and training-pipeline simulation"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  std::string model_name;
  std::string format = "table";
  std::uint64_t seed_flag = 0;
  bool seed_given = false;
  int seeds = 1;
  bool oracle = false;
  SigActionFlags sig_flags;
  std::string sig_action;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON path")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& v) {
          seed_flag = v;
          seed_given = true;
        },
        "seed override");
    cmd->add_option("--format", format, "output format: json, csv, table");
  };

  CLI::App* partition = app.add_subcommand("partition", "plan embedding placement");
  add_common(partition);
  partition->add_option("--model", model_name, "model name (default: first)");
  partition->add_flag("--oracle", oracle, "compare against the exact oracle");

  CLI::App* simulate = app.add_subcommand("simulate", "run the pipeline simulation");
  add_common(simulate);
  simulate->add_option("--seeds", seeds, "number of seeds to sweep");

  CLI::App* sig_cmd = app.add_subcommand("sig", "input-generation cache operations");
  add_common(sig_cmd);
  sig_cmd->add_option("action", sig_action, "submit | replay | evict | metrics")
      ->required();
  sig_cmd->add_option("--raw-field", sig_flags.raw_field, "evict by raw field");
  sig_cmd->add_option("--pipeline", sig_flags.pipeline, "evict by pipeline id");
  sig_cmd->add_option("--key", sig_flags.key_hex, "evict by canonical key (hex)");
  sig_cmd->add_option("--state", sig_flags.state_path, "cache state file");
  sig_cmd->add_option("--graph", sig_flags.graph, "graph name for submit");
  sig_cmd->add_option("--model", sig_flags.model, "model id for submit");
  sig_cmd->add_option("--range", sig_flags.range, "event range for submit")
      ->expected(2);

  CLI::App* cost = app.add_subcommand("cost", "SIG vs LIG cost report");
  add_common(cost);

  CLI::App* ladder = app.add_subcommand("ladder", "step-time optimization ladder");
  add_common(ladder);
  ladder->add_option("--model", model_name, "model name (default: first)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    Scenario scenario = Scenario::load(scenario_path);
    if (seed_given) scenario.seed = seed_flag;
    const fs::path out(out_dir);
    if (partition->parsed()) return cmd_partition(scenario, model_name, out, oracle);
    if (simulate->parsed())
      return cmd_simulate(scenario, out,
                          seed_given ? std::optional<std::uint64_t>(seed_flag)
                                     : std::nullopt,
                          seeds);
    if (sig_cmd->parsed()) return cmd_sig(scenario, sig_action, out, sig_flags);
    if (cost->parsed()) return cmd_cost(scenario, out, format);
    if (ladder->parsed()) return cmd_ladder(scenario, model_name, out);
    return 1;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConstraintViolationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace trainsim
