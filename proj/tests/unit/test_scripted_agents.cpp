#include <set>

#include "doctest.h"
#include "nasim/engine.hpp"
#include "nasim/scripted_agents.hpp"
#include "support.hpp"

using namespace nasim;

TEST_CASE("greedy marker on T1") {
  const auto& spec = *test::t1_instance()->spec;
  auto [st, obs] = reset(test::t1_instance());
  // Rule 3 precedes rule 5: the unscanned entry host is scanned first.
  CHECK(greedy_marker_step(obs, spec) == Action::service_scan({0, 0}));
  std::vector<Action> taken;
  while (!st.done && st.steps < 20) {
    const Action a = greedy_marker_step(obs, spec);
    taken.push_back(a);
    obs = step(st, a).observation;
  }
  CHECK(st.done);
  CHECK(st.total_reward > 0.0);
  CHECK(looted_hosts(st) == std::vector<HostAddress>{{1, 0}});
  CHECK(taken.back() == Action::terminal());
  // Identical observations give identical actions.
  CHECK(greedy_marker_step(obs, spec) == greedy_marker_step(obs, spec));
}

TEST_CASE("greedy marker prefers the marker and escalates known-sensitive hosts") {
  const auto& spec = *test::t1_instance()->spec;
  auto [st, obs] = reset(test::t1_instance());
  for (const auto& a : {Action::exploit({0, 0}, "e_wp_ninja"), Action::subnet_scan({0, 0}),
                        Action::service_scan({1, 0})})
    obs = step(st, a).observation;
  // The service host shows MySQL: exploit it through Drupal (rule 2).
  const Action a = greedy_marker_step(obs, spec);
  CHECK(a == Action::exploit({1, 0}, "e_drupal"));
  obs = step(st, a).observation;
  // Sensitive and user access: escalate, after learning the OS (rule 1).
  CHECK(greedy_marker_step(obs, spec) == Action::os_scan({1, 0}));
  obs = step(st, Action::os_scan({1, 0})).observation;
  CHECK(greedy_marker_step(obs, spec) == Action::privesc({1, 0}, "pe_kernel"));
  obs = step(st, Action::privesc({1, 0}, "pe_kernel")).observation;
  // The entry host was exploited blind and is still unscanned (rule 3).
  CHECK(greedy_marker_step(obs, spec) == Action::service_scan({0, 0}));
}

TEST_CASE("random agent covers the action space") {
  const auto& spec = bundled_scenario("sm_entry_dmz_two_subnets");
  const auto schema = unify_feature_schema({spec});
  auto [st, obs] = reset(std::make_shared<const ScenarioInstance>(instantiate(spec, 1)));
  Rng rng(1);
  std::set<int> prims;
  for (int i = 0; i < 2000; ++i) prims.insert(primitive_index(schema, random_step(obs, schema, rng)));
  CHECK(static_cast<int>(prims.size()) == schema.action_dim());
}

TEST_CASE("replay agent") {
  auto [st, obs] = reset(test::t1_instance());
  ReplayAgent agent(test::t1_plan());
  for (const auto& expected : test::t1_plan()) {
    const Action a = agent.next(obs);
    CHECK(a == expected);
    obs = step(st, a).observation;
    if (st.done) break;
  }
  CHECK(st.total_reward == 96.0);
  CHECK(agent.next(obs) == Action::terminal());

  auto [st2, obs2] = reset(test::t1_instance());
  ReplayAgent bad({Action::exploit({1, 0}, "e_drupal")});
  CHECK_THROWS_AS(bad.next(obs2), std::invalid_argument);
}

TEST_CASE("greedy marker recovers from injected failures") {
  const auto& spec = bundled_scenario("sm_entry_dmz_three_subnets");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto inst = std::make_shared<const ScenarioInstance>(instantiate(spec, seed));
    auto run = [&](double p_fail) {
      auto backend = make_backend(p_fail, seed);
      auto obs = backend->reset(inst, seed);
      while (!backend->state().done && backend->state().steps < 200)
        obs = backend->step(greedy_marker_step(obs, spec)).observation;
      return looted_hosts(backend->state());
    };
    CHECK(run(0.3) == run(0.0));
  }
}
