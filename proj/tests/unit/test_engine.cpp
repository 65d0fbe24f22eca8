#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "doctest.h"
#include "nasim/engine.hpp"
#include "nasim/scripted_agents.hpp"
#include "support.hpp"

using namespace nasim;

namespace {

std::shared_ptr<const ScenarioInstance> with_hosts(const ScenarioInstance& base, std::vector<HostConfig> hosts) {
  auto inst = std::make_shared<ScenarioInstance>(base);
  inst->hosts = std::move(hosts);
  return inst;
}

// The service host runs ElasticSearch on windows instead.
std::shared_ptr<const ScenarioInstance> t1_elasticsearch() {
  auto hosts = test::t1_instance()->hosts;
  hosts[1].os = "windows";
  hosts[1].services = {"elasticsearch", "mysql"};
  return with_hosts(*test::t1_instance(), hosts);
}

// Subnets reachable by a path from the internet whose interior subnets each hold a compromised host.
std::set<int> bfs_reachable(const ScenarioInstance& inst, const std::vector<bool>& compromised) {
  std::set<int> out;
  std::deque<int> frontier;
  for (int e : inst.entry) {
    out.insert(e);
    frontier.push_back(e);
  }
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop_front();
    if (!compromised[static_cast<std::size_t>(s)]) continue;
    for (int n : inst.neighbours(s))
      if (out.insert(n).second) frontier.push_back(n);
  }
  return out;
}

ScenarioSpec chain_spec(int subnets, const std::vector<std::pair<int, int>>& links) {
  ScenarioSpec s = test::small_spec();
  s.subnets.clear();
  s.topology.clear();
  for (int i = 0; i < subnets; ++i) s.subnets.push_back({"s" + std::to_string(i), {1, 1}, 0.0});
  s.topology.emplace_back("internet", "s0");
  for (auto [a, b] : links) s.topology.emplace_back("s" + std::to_string(a), "s" + std::to_string(b));
  s.entry = {"s0"};
  validate_scenario(s);
  return s;
}

}  // namespace

TEST_CASE("reset exposes exactly the entry hosts") {
  auto [st, obs] = reset(test::t1_instance());
  REQUIRE(obs.hosts.size() == 1);
  CHECK(obs.hosts[0].address == HostAddress{0, 0});
  CHECK(obs.hosts[0].reached);
  CHECK_FALSE(obs.hosts[0].services_scanned);
  CHECK(obs.hosts[0].services.empty());
  CHECK(st.steps == 0);
  for (const auto& h : st.hosts) CHECK(h.access == AccessLevel::none);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto one = std::make_shared<const ScenarioInstance>(instantiate(bundled_scenario("sm_entry_dmz_one_subnet"), seed));
    CHECK(reset(one).second.hosts.size() == 1);
    auto user = std::make_shared<const ScenarioInstance>(
        instantiate(bundled_scenario("sm_entry_user_three_subnets"), seed));
    const auto o = reset(user).second;
    const int u = user->spec->subnet_index("user");
    CHECK(static_cast<int>(o.hosts.size()) == user->subnet_sizes[static_cast<std::size_t>(u)]);
    for (std::size_t i = 0; i < o.hosts.size(); ++i) {
      CHECK(o.hosts[i].address.subnet == u);
      CHECK(o.hosts[i].discovery_order == static_cast<int>(i));
    }
  }
}

TEST_CASE("T1 plan earns 96") {
  auto [st, obs] = reset(test::t1_instance());
  const auto plan = test::t1_plan();
  double total = 0.0;
  std::vector<StepResult> results;
  for (const auto& a : plan) {
    results.push_back(step(st, a));
    total += results.back().reward;
  }
  CHECK(total == 96.0);
  CHECK(st.total_reward == 96.0);
  CHECK(st.steps == 4);
  CHECK(results[0].info.success);
  CHECK(results[0].reward == -1.0);
  CHECK(results[1].info.newly_discovered == 1);
  CHECK(results[1].observation.hosts.size() == 2);
  CHECK(results[2].observation.hosts[1].access == AccessLevel::user);
  CHECK(results[2].observation.hosts[1].sensitivity_known);
  CHECK(results[3].reward == 99.0);
  CHECK(results[4].done);
  CHECK(results[4].reward == 0.0);
  for (std::size_t i = 0; i + 1 < results.size(); ++i) CHECK_FALSE(results[i].done);
  CHECK(looted_hosts(st) == std::vector<HostAddress>{{1, 0}});
  CHECK_THROWS_AS(step(st, Action::terminal()), std::logic_error);
}

TEST_CASE("exploit outcomes") {
  SUBCASE("WordPress gives user") {
    auto [st, obs] = reset(test::t1_instance());
    const auto r = step(st, Action::exploit({0, 0}, "e_wp_ninja"));
    CHECK(r.info.success);
    CHECK(st.hosts[0].access == AccessLevel::user);
    CHECK(st.hosts[0].sensitivity_known);
    CHECK(r.observation.hosts[0].services == std::vector<std::string>{"wordpress"});
  }
  SUBCASE("ElasticSearch gives root and loots without privesc") {
    auto [st, obs] = reset(t1_elasticsearch());
    step(st, Action::exploit({0, 0}, "e_wp_ninja"));
    step(st, Action::subnet_scan({0, 0}));
    const auto r = step(st, Action::exploit({1, 0}, "e_elasticsearch"));
    CHECK(r.info.success);
    CHECK(st.hosts[1].access == AccessLevel::root);
    CHECK(st.hosts[1].looted);
    CHECK(r.reward == 99.0);
  }
  SUBCASE("missing service fails at step cost") {
    auto [st, obs] = reset(test::t1_instance());
    const auto r = step(st, Action::exploit({0, 0}, "e_drupal"));
    CHECK_FALSE(r.info.success);
    CHECK(r.reward == -1.0);
    CHECK(st.hosts[0].access == AccessLevel::none);
    CHECK(st.steps == 1);
  }
  SUBCASE("undiscovered and unreachable targets fail") {
    auto [st, obs] = reset(test::t1_instance());
    CHECK_FALSE(step(st, Action::exploit({1, 0}, "e_drupal")).info.success);
    CHECK_FALSE(step(st, Action::service_scan({1, 0})).info.success);
    CHECK(obs.hosts.size() == 1);
  }
  SUBCASE("unknown exploit id fails") {
    auto [st, obs] = reset(test::t1_instance());
    CHECK_FALSE(step(st, Action::exploit({0, 0}, "e_nope")).info.success);
  }
}

TEST_CASE("scans") {
  auto [st, obs] = reset(test::t1_instance());
  CHECK_FALSE(step(st, Action::subnet_scan({0, 0})).info.success);
  CHECK_FALSE(step(st, Action::process_scan({0, 0})).info.success);
  auto r = step(st, Action::service_scan({0, 0}));
  CHECK(r.info.success);
  CHECK(r.observation.hosts[0].services_scanned);
  CHECK(r.observation.hosts[0].services == std::vector<std::string>{"wordpress"});
  r = step(st, Action::os_scan({0, 0}));
  CHECK(r.observation.hosts[0].os == std::optional<std::string>("windows"));
  step(st, Action::exploit({0, 0}, "e_wp_ninja"));
  CHECK(step(st, Action::process_scan({0, 0})).info.success);
  CHECK_FALSE(step(st, Action::privesc({0, 0}, "pe_kernel")).info.success);  // windows host

  const auto first = step(st, Action::subnet_scan({0, 0}));
  CHECK(first.info.newly_discovered == 1);
  CHECK(first.observation.known_links == std::vector<std::pair<int, int>>{{0, 1}});
  const auto again = step(st, Action::subnet_scan({0, 0}));
  CHECK(again.info.success);
  CHECK(again.info.newly_discovered == 0);
  CHECK(again.observation.hosts == first.observation.hosts);
  CHECK(again.observation.known_links == first.observation.known_links);
  CHECK(st.steps == 9);
}

TEST_CASE("malformed addresses are rejected before stepping") {
  auto [st, obs] = reset(test::t1_instance());
  CHECK_THROWS_AS(step(st, Action::service_scan({5, 0})), std::out_of_range);
  CHECK_THROWS_AS(step(st, Action::service_scan({0, 3})), std::out_of_range);
  CHECK(st.steps == 0);
}

TEST_CASE("reachability agrees with path search on every compromise pattern") {
  const std::vector<std::vector<std::pair<int, int>>> topologies = {
      {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}},
      {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {4, 5}},
      {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {2, 4}, {4, 5}},
      {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}},
      {{0, 1}, {1, 2}, {2, 0}, {2, 3}},
  };
  int checked = 0;
  for (const auto& links : topologies) {
    int n = 0;
    for (auto [a, b] : links) n = std::max({n, a + 1, b + 1});
    const auto inst = std::make_shared<const ScenarioInstance>(instantiate(chain_spec(n, links), 1));
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      std::vector<bool> comp(static_cast<std::size_t>(n));
      for (int s = 0; s < n; ++s) comp[static_cast<std::size_t>(s)] = (mask >> s) & 1u;
      // Only patterns the engine can produce: every compromised subnet was reachable.
      const auto reach = bfs_reachable(*inst, comp);
      bool feasible = true;
      for (int s = 0; s < n; ++s) feasible = feasible && (!comp[static_cast<std::size_t>(s)] || reach.count(s));
      if (!feasible) continue;
      auto [st, obs] = reset(inst);
      for (int s = 0; s < n; ++s) {
        if (!comp[static_cast<std::size_t>(s)]) continue;
        st.hosts[static_cast<std::size_t>(inst->host_index({s, 0}))].access = AccessLevel::user;
        st.compromised_hosts_per_subnet[static_cast<std::size_t>(s)] = 1;
      }
      for (int s = 0; s < n; ++s) {
        CHECK(reachable(st, {s, 0}) == (reach.count(s) == 1));
        ++checked;
      }
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("random episodes: monotone knowledge, reward accounting, replay") {
  const auto& spec = bundled_scenario("sm_entry_dmz_three_subnets");
  const auto schema = unify_feature_schema({spec});
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    auto inst = std::make_shared<const ScenarioInstance>(instantiate(spec, seed));
    auto [st, obs] = reset(inst);
    Rng rng(seed);
    std::vector<Action> actions;
    std::vector<StepResult> results;
    double looted_value = 0.0;
    for (int t = 0; t < 60; ++t) {
      const auto before = st;
      const Action a = random_step(obs, schema, rng);
      if (a.kind == ActionKind::terminal) continue;
      auto r = step(st, a);
      actions.push_back(a);
      for (std::size_t i = 0; i < st.hosts.size(); ++i) {
        const auto &h0 = before.hosts[i], &h1 = st.hosts[i];
        CHECK((!h0.discovered || h1.discovered));
        CHECK((!h0.reached || h1.reached));
        CHECK(h1.access >= h0.access);
        CHECK((!h0.services_scanned || h1.services_scanned));
        CHECK((!h0.looted || h1.looted));
        CHECK(h1.sensitivity_known == (h1.access >= AccessLevel::user));
        if (h1.access >= AccessLevel::user) CHECK((h1.discovered && h1.reached));
        if (h1.looted) CHECK((h1.access == AccessLevel::root && inst->hosts[i].sensitive));
        if (h1.looted && !h0.looted) looted_value += inst->hosts[i].value;
      }
      CHECK_FALSE(r.done);
      obs = r.observation;
      results.push_back(std::move(r));
    }
    CHECK(st.total_reward == doctest::Approx(looted_value - st.steps * spec.rewards.step_cost));
    std::set<int> orders;
    for (const auto& h : st.hosts)
      if (h.discovered) CHECK(orders.insert(*h.discovery_order).second);

    auto [st2, obs2] = reset(inst);
    for (std::size_t i = 0; i < actions.size(); ++i) {
      const auto r = step(st2, actions[i]);
      CHECK(r.reward == results[i].reward);
      CHECK(r.info.success == results[i].info.success);
      CHECK(r.observation == results[i].observation);
    }
  }
}

TEST_CASE("trace records") {
  auto [st, obs] = reset(test::t1_instance());
  const auto rec = trace_record(1, step(st, Action::exploit({0, 0}, "e_wp_ninja")));
  CHECK(rec.at("t") == 1);
  CHECK(rec.at("action").at("kind") == "Exploit");
  CHECK(rec.at("action").at("id") == "e_wp_ninja");
  CHECK(rec.at("success") == true);
  CHECK(rec.at("reward") == -1.0);
  CHECK(rec.at("newly_discovered") == 0);
  CHECK(rec.at("done") == false);
}

TEST_CASE("flaky backend") {
  const auto& spec = bundled_scenario("sm_entry_dmz_three_subnets");
  SUBCASE("p_fail = 0 matches the simulator") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto inst = std::make_shared<const ScenarioInstance>(instantiate(spec, seed));
      SimBackend sim;
      FlakyBackend flaky(std::make_unique<SimBackend>(), 0.0, seed);
      auto o1 = sim.reset(inst, seed);
      auto o2 = flaky.reset(inst, seed);
      CHECK(o1 == o2);
      for (int t = 0; t < 30 && !sim.state().done; ++t) {
        const Action a = greedy_marker_step(o1, spec);
        const auto r1 = sim.step(a);
        const auto r2 = flaky.step(a);
        CHECK(trace_record(t, r1).dump() == trace_record(t, r2).dump());
        CHECK(r1.observation == r2.observation);
        o1 = r1.observation;
      }
    }
  }
  SUBCASE("injected failure rate") {
    FlakyBackend flaky(std::make_unique<SimBackend>(), 0.3, 5);
    flaky.reset(test::t1_instance(), 5);
    while (flaky.attempted_successes() < 10000) {
      const auto r = flaky.step(Action::service_scan({0, 0}));
      if (!r.info.success) CHECK(flaky.state().hosts[0].services_scanned == false);
      if (flaky.state().hosts[0].services_scanned) flaky.reset(test::t1_instance(), 5 + flaky.attempted_successes());
    }
    const double rate = static_cast<double>(flaky.injected_failures()) / static_cast<double>(flaky.attempted_successes());
    CHECK(std::abs(rate - 0.3) <= 0.02);
  }
  SUBCASE("injected failures cost a step and change nothing") {
    FlakyBackend flaky(std::make_unique<SimBackend>(), 0.99, 1);
    flaky.reset(test::t1_instance(), 1);
    const auto r = flaky.step(Action::exploit({0, 0}, "e_wp_ninja"));
    CHECK_FALSE(r.info.success);
    CHECK(r.reward == -1.0);
    CHECK(flaky.state().hosts[0].access == AccessLevel::none);
    CHECK(flaky.injected_failures() == 1);
  }
  CHECK_THROWS(FlakyBackend(std::make_unique<SimBackend>(), 1.0, 0));
}
