// Command-line front end: generate, run, train, eval, experiment, render, oracle, serve.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nasim/engine.hpp"
#include "nasim/instancer.hpp"
#include "nasim/oracle.hpp"
#include "nasim/policy.hpp"
#include "nasim/protocol.hpp"
#include "nasim/scenario.hpp"
#include "nasim/scripted_agents.hpp"
#include "nasim/trainer.hpp"
#include "nasim/vecenv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nasim;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Bad input detected before or while reading user-supplied files.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

// A scenario argument is a JSON file path or the name of a bundled scenario.
ScenarioSpec load_scenario(const std::string& arg) {
  if (!fs::exists(arg)) {
    const auto& all = bundled_scenarios();
    if (auto it = all.find(arg); it != all.end()) return it->second;
    throw ValidationError("scenario '" + arg + "' is neither a file nor a bundled scenario");
  }
  try {
    return parse_scenario(read_file(arg));
  } catch (const ScenarioError& e) {
    throw ValidationError(arg + ": " + e.what());
  }
}

std::vector<ScenarioSpec> load_scenarios(const std::vector<std::string>& args) {
  std::vector<ScenarioSpec> out;
  for (const auto& a : args) out.push_back(load_scenario(a));
  return out;
}

ScenarioInstance load_instance(const std::string& path) {
  try {
    return instance_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const InstanceError& e) {
    throw ValidationError(path + ": " + e.what());
  } catch (const ScenarioError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::unique_ptr<Policy> load_policy_for(const std::string& path, const std::vector<ScenarioSpec>& specs,
                                        FeatureSchema& schema_out) {
  try {
    const json doc = read_checkpoint(path);
    schema_out = checkpoint_schema(doc);
    for (const auto& s : specs)
      if (!schema_out.covers(s))
        throw ValidationError("checkpoint '" + path + "' was trained under a feature schema that does not cover '" +
                              s.name + "'");
    return checkpoint_from_json(doc, schema_out);
  } catch (const CheckpointError& e) {
    throw ValidationError(e.what());
  }
}

TrainConfig train_config(int n_envs, int epochs, std::uint64_t seed, int step_cap, double p_fail, double lr,
                         bool greedy_eval) {
  TrainConfig c;
  c.learning_rate = lr;
  c.greedy_eval = greedy_eval;
  c.n_envs = n_envs;
  c.epochs = epochs;
  c.seed = seed;
  c.step_cap = step_cap;
  c.p_fail = p_fail;
  return c;
}

json summary_json(const EngineState& st, bool truncated) {
  json looted = json::array();
  for (auto a : looted_hosts(st)) looted.push_back(json::array({a.subnet, a.host}));
  return {{"summary",
           {{"total_reward", st.total_reward}, {"steps", st.steps}, {"terminated", st.done}, {"truncated", truncated},
            {"looted", looted}}}};
}

// Replays the actions of a trace; returns the observations before each step.
struct Replay {
  std::vector<Observation> before;  // observation before each record's action
  std::vector<Action> actions;
  std::vector<StepResult> results;
};

Replay replay_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read trace '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("trace '" + path + "' is empty");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError("trace header: " + std::string(e.what()));
  }
  auto inst = std::make_shared<const ScenarioInstance>(instance_from_json(header.at("instance")));
  auto backend = make_backend(header.value("p_fail", 0.0), header.at("seed").get<std::uint64_t>());
  Replay r;
  Observation obs = backend->reset(inst, header.at("seed").get<std::uint64_t>());
  while (std::getline(in, line)) {
    const json rec = json::parse(line);
    if (!rec.contains("action")) continue;
    const Action a = action_from_json(rec.at("action"));
    r.before.push_back(obs);
    r.actions.push_back(a);
    r.results.push_back(backend->step(a));
    obs = r.results.back().observation;
    if (r.results.back().reward != rec.at("reward").get<double>())
      throw std::runtime_error("trace replay diverged at t=" + rec.at("t").dump());
  }
  return r;
}

int cmd_generate(const std::vector<std::string>& scenarios, std::uint64_t seed, int count, const std::string& out) {
  for (const auto& spec : load_scenarios(scenarios)) {
    for (int k = 0; k < count; ++k) {
      const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
      const auto inst = instantiate(spec, s);
      write_file(fs::path(out) / (spec.name + "_seed" + std::to_string(s) + ".json"), instance_to_json(inst).dump(2) + "\n");
    }
  }
  return 0;
}

int cmd_run(const std::vector<std::string>& scenarios, const std::string& instance_path, const std::string& agent,
            const std::string& checkpoint, std::uint64_t seed, int step_cap, double p_fail, const std::string& out) {
  if (scenarios.empty() == instance_path.empty()) throw ValidationError("run: give exactly one of --scenario or --instance");
  if (scenarios.size() > 1) throw ValidationError("run: one scenario per run");
  if (agent == "checkpoint" && checkpoint.empty()) throw ValidationError("run: --agent checkpoint needs --checkpoint");

  auto inst = std::make_shared<const ScenarioInstance>(
      instance_path.empty() ? instantiate(load_scenario(scenarios.front()), seed) : load_instance(instance_path));
  const ScenarioSpec& spec = *inst->spec;

  FeatureSchema schema = unify_feature_schema({spec});
  std::unique_ptr<Policy> policy;
  if (agent == "checkpoint") policy = load_policy_for(checkpoint, {spec}, schema);
  Rng rng = Rng::derive(seed, Stream::agent);
  auto choose = [&](const Observation& obs) -> Action {
    if (agent == "random") return random_step(obs, schema, rng);
    if (agent == "greedy") return greedy_marker_step(obs, spec);
    const auto o = policy->forward(encode_hosts(obs, schema));
    return decode_action(obs, schema, sample_action(o, rng, true));
  };

  std::ostringstream trace;
  trace << json{{"instance", instance_to_json(*inst)}, {"agent", agent}, {"seed", seed}, {"step_cap", step_cap},
                {"p_fail", p_fail}}
               .dump()
        << '\n';
  auto backend = make_backend(p_fail, seed);
  Observation obs = backend->reset(inst, seed);
  int t = 0;
  bool truncated = false;
  while (!backend->state().done) {
    if (backend->state().steps >= step_cap) {
      truncated = true;
      break;
    }
    const StepResult r = backend->step(choose(obs));
    trace << trace_record(++t, r).dump() << '\n';
    obs = r.observation;
  }
  const json summary = summary_json(backend->state(), truncated);
  trace << summary.dump() << '\n';
  if (out.empty())
    std::cout << trace.str();
  else {
    write_file(out, trace.str());
    std::cout << summary.dump() << '\n';
  }
  return 0;
}

int cmd_train(const std::vector<std::string>& scenarios, const std::vector<std::string>& eval_scenarios,
              const std::string& model, TrainConfig config, const std::string& out) {
  if (scenarios.empty()) throw ValidationError("train: --scenario is required");
  if (out.empty()) throw ValidationError("train: --out is required");
  const ModelKind kind = model_kind_from_string(model);
  config.train_set = load_scenarios(scenarios);
  config.eval_set = load_scenarios(eval_scenarios);
  config.validate();
  std::vector<ScenarioSpec> all = config.train_set;
  all.insert(all.end(), config.eval_set.begin(), config.eval_set.end());
  const FeatureSchema schema = unify_feature_schema(all);

  Trainer trainer(config, kind, schema);
  std::vector<MetricRow> rows;
  for (int e = 1; e <= config.epochs; ++e) {
    trainer.train_epoch();
    std::vector<std::pair<std::string, const std::vector<ScenarioSpec>*>> sets{{"train", &config.train_set}};
    if (!config.eval_set.empty()) sets.emplace_back("novel", &config.eval_set);
    for (std::uint64_t k = 0; k < sets.size(); ++k) {
      const auto rep = evaluate(trainer.policy(), schema, *sets[k].second, config.eval_episodes,
                                mix64(config.seed ^ mix64(k + 101)), config.step_cap, config.greedy_eval);
      rows.push_back({e, config.seed, model, sets[k].first, rep.avg_reward_per_step, rep.ci_half_width});
      std::cerr << "epoch " << e << " " << sets[k].first << " " << rep.avg_reward_per_step << "\n";
    }
  }
  fs::create_directories(out);
  save_checkpoint(trainer.policy(), schema, (fs::path(out) / (model + ".json")).string());
  write_file(fs::path(out) / "metrics.csv", metrics_csv(rows));
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::vector<std::string>& scenarios, int episodes,
             std::uint64_t seed, int step_cap, bool stochastic) {
  if (checkpoint.empty() || scenarios.empty()) throw ValidationError("eval: --checkpoint and --scenario are required");
  const auto specs = load_scenarios(scenarios);
  FeatureSchema schema;
  const auto policy = load_policy_for(checkpoint, specs, schema);
  const auto rep = evaluate(*policy, schema, specs, episodes, seed, step_cap, !stochastic);
  std::cout << json{{"avg_reward_per_step", rep.avg_reward_per_step},
                    {"ci_half_width", rep.ci_half_width},
                    {"episodes", rep.episodes},
                    {"zero_length_episodes", rep.zero_length_episodes},
                    {"total_reward", rep.total_reward},
                    {"total_steps", rep.total_steps}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_experiment(const std::string& name, int seeds, TrainConfig config, const std::string& out) {
  if (out.empty()) throw ValidationError("experiment: --out is required");
  experiment_sets(name);  // validates the name before any work
  run_experiment(name, config, seeds, out, [](const MetricRow& r) {
    std::cerr << r.model << " seed " << r.seed << " epoch " << r.epoch << " " << r.eval_set << " "
              << r.avg_reward_per_step << "\n";
  });
  return 0;
}

int cmd_render(const std::string& trace_path, const std::string& out) {
  if (trace_path.empty() || out.empty()) throw ValidationError("render: --trace and --out are required");
  const Replay r = replay_trace(trace_path);
  // One frame per cost-bearing step: the knowledge the agent acted on.
  int frame = 0;
  for (std::size_t k = 0; k < r.actions.size(); ++k) {
    if (r.actions[k].kind == ActionKind::terminal) continue;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.dot", frame++);
    write_file(fs::path(out) / name, render_dot(r.before[k]));
  }
  std::cout << frame << " frames written to " << out << '\n';
  return 0;
}

int cmd_oracle(const std::vector<std::string>& scenarios, const std::string& instance_path, std::uint64_t seed,
               int step_cap) {
  if (scenarios.empty() == instance_path.empty())
    throw ValidationError("oracle: give exactly one of --scenario or --instance");
  const ScenarioInstance inst =
      instance_path.empty() ? instantiate(load_scenario(scenarios.front()), seed) : load_instance(instance_path);
  try {
    std::cout << plan_to_json(optimal_plan(inst, step_cap)).dump(2) << '\n';
  } catch (const OracleLimitError& e) {
    throw ValidationError(e.what());
  }
  return 0;
}

int cmd_serve(const std::vector<std::string>& scenarios, int n_envs, std::uint64_t seed, std::optional<int> step_cap,
              double p_fail) {
  if (scenarios.empty()) throw ValidationError("serve: --scenario is required");
  VecEnvConfig c;
  c.specs = load_scenarios(scenarios);
  c.n_envs = n_envs;
  c.seed = seed;
  c.step_cap = step_cap;
  c.p_fail = p_fail;
  RemoteEnvServer server(std::move(c));
  server.serve(std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penetration-testing simulator and RL harness"};
  app.require_subcommand(1);

  std::vector<std::string> scenarios, eval_scenarios;
  std::string instance_path, out, agent = "greedy", checkpoint, model = "invariant", trace;
  std::uint64_t seed = 0;
  int count = 1, n_envs = 16, step_cap = 20, epochs = 30, seeds = 6, episodes = 32;
  double p_fail = 0.0;
  bool stochastic = false;
  double lr = TrainConfig{}.learning_rate;
  bool greedy_eval = TrainConfig{}.greedy_eval;
  std::string experiment_name;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Master seed")->capture_default_str(); };
  auto add_cap = [&](CLI::App* c) {
    c->add_option("--step-cap", step_cap, "Cost-bearing step limit per episode")->check(CLI::PositiveNumber)->capture_default_str();
  };
  auto add_learning = [&](CLI::App* c) {
    c->add_option("--lr", lr, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_flag("--greedy-eval", greedy_eval, "Evaluate with argmax actions instead of sampling");
  };
  auto add_pfail = [&](CLI::App* c) {
    c->add_option("--p-fail", p_fail, "Failure-injection probability (enables the flaky backend)")->check(CLI::Range(0.0, 0.999999));
  };

  auto* gen = app.add_subcommand("generate", "Sample scenario instances to JSON");
  gen->add_option("--scenario", scenarios, "Scenario file or bundled name")->required();
  add_seed(gen);
  gen->add_option("--count", count, "Instances per scenario (seeds s, s+1, ...)")->check(CLI::PositiveNumber);
  gen->add_option("--out", out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run one episode and write a JSONL trace");
  run->add_option("--scenario", scenarios, "Scenario file or bundled name");
  run->add_option("--instance", instance_path, "Instance JSON file");
  run->add_option("--agent", agent, "Agent")->check(CLI::IsMember({"random", "greedy", "checkpoint"}))->capture_default_str();
  run->add_option("--checkpoint", checkpoint, "Policy checkpoint for --agent checkpoint");
  add_seed(run);
  add_cap(run);
  add_pfail(run);
  run->add_option("--out", out, "Trace file (stdout when omitted)");

  auto* train = app.add_subcommand("train", "Train one policy with PPO");
  train->add_option("--scenario", scenarios, "Training scenarios")->required();
  train->add_option("--eval-scenario", eval_scenarios, "Held-out scenarios evaluated each epoch");
  train->add_option("--model", model, "Architecture")->check(CLI::IsMember({"mlp", "invariant"}))->capture_default_str();
  train->add_option("--epochs", epochs, "Epochs of 100 updates")->check(CLI::NonNegativeNumber)->capture_default_str();
  train->add_option("--n-envs", n_envs, "Parallel environments")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(train);
  add_cap(train);
  add_pfail(train);
  add_learning(train);
  train->add_option("--out", out, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  eval->add_option("--scenario", scenarios, "Scenarios to evaluate on")->required();
  eval->add_option("--episodes", episodes, "Episodes")->check(CLI::PositiveNumber)->capture_default_str();
  eval->add_flag("--stochastic", stochastic, "Sample actions instead of taking the argmax");
  add_seed(eval);
  add_cap(eval);

  auto* exp = app.add_subcommand("experiment", "Run the sm2md or md2sm generalization experiment");
  exp->add_option("name", experiment_name, "sm2md or md2sm")->required()->check(CLI::IsMember({"sm2md", "md2sm"}));
  exp->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber)->capture_default_str();
  exp->add_option("--epochs", epochs, "Epochs per run")->check(CLI::NonNegativeNumber)->capture_default_str();
  exp->add_option("--n-envs", n_envs, "Parallel environments")->check(CLI::PositiveNumber)->capture_default_str();
  add_seed(exp);
  add_cap(exp);
  add_learning(exp);
  exp->add_option("--out", out, "Output directory")->required();

  auto* render = app.add_subcommand("render", "Render a trace as DOT frames");
  render->add_option("--trace", trace, "Trace written by run")->required();
  render->add_option("--out", out, "Output directory")->required();

  auto* oracle = app.add_subcommand("oracle", "Optimal plan on a small instance");
  oracle->add_option("--scenario", scenarios, "Scenario file or bundled name");
  oracle->add_option("--instance", instance_path, "Instance JSON file");
  add_seed(oracle);
  oracle->add_option("--step-cap", step_cap, "Planning horizon")->check(CLI::NonNegativeNumber)->capture_default_str();

  auto* serve = app.add_subcommand("serve", "Serve the remote-env protocol on stdin/stdout");
  serve->add_option("--scenario", scenarios, "Scenarios")->required();
  serve->add_option("--n-envs", n_envs, "Parallel environments")->check(CLI::PositiveNumber);
  bool serve_cap_set = false;
  serve->add_option("--step-cap", step_cap, "Episode step cap")->check(CLI::PositiveNumber)->each([&](const std::string&) {
    serve_cap_set = true;
  });
  add_seed(serve);
  add_pfail(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) return cmd_generate(scenarios, seed, count, out);
    if (*run) return cmd_run(scenarios, instance_path, agent, checkpoint, seed, step_cap, p_fail, out);
    if (*train) return cmd_train(scenarios, eval_scenarios, model, train_config(n_envs, epochs, seed, step_cap, p_fail, lr, greedy_eval), out);
    if (*eval) return cmd_eval(checkpoint, scenarios, episodes, seed, step_cap, stochastic);
    if (*exp) return cmd_experiment(experiment_name, seeds, train_config(n_envs, epochs, seed, step_cap, 0.0, lr, greedy_eval), out);
    if (*render) return cmd_render(trace, out);
    if (*oracle) return cmd_oracle(scenarios, instance_path, seed, step_cap);
    if (*serve)
      return cmd_serve(scenarios, *serve->get_option("--n-envs") ? n_envs : 1, seed,
                       serve_cap_set ? std::optional<int>(step_cap) : std::nullopt, p_fail);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
