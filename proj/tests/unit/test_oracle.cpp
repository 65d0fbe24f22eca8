#include "doctest.h"
#include "nasim/engine.hpp"
#include "nasim/oracle.hpp"
#include "nasim/scripted_agents.hpp"
#include "support.hpp"

using namespace nasim;

namespace {

double replay(const ScenarioInstance& inst, const std::vector<Action>& plan) {
  auto [st, obs] = reset(std::make_shared<const ScenarioInstance>(inst));
  for (const auto& a : plan) step(st, a);
  return st.total_reward;
}

}  // namespace

TEST_CASE("T1 optimum") {
  const auto& t1 = *test::t1_instance();
  const auto r = optimal_plan(t1, 20 > kOracleMaxSteps ? kOracleMaxSteps : 20);
  CHECK(r.optimal_reward == 96.0);
  CHECK(r.steps() == 4);
  CHECK(r.plan.back().kind == ActionKind::terminal);
  CHECK(replay(t1, r.plan) == 96.0);
  CHECK(r.solvable);
  CHECK(r.states_explored > 0);

  CHECK(optimal_plan(t1, 4).optimal_reward == 96.0);
  const auto short_cap = optimal_plan(t1, 3);
  CHECK(short_cap.optimal_reward == 0.0);
  CHECK(short_cap.plan == std::vector<Action>{Action::terminal()});
}

TEST_CASE("no sensitive hosts: stop at once") {
  const auto inst = instantiate(bundled_scenario("sm_entry_dmz_one_subnet"), 4);
  const auto r = optimal_plan(inst, 6);
  CHECK(r.optimal_reward == 0.0);
  CHECK(r.plan.size() == 1);
  CHECK(solvable(inst).solvable);
}

TEST_CASE("solvability") {
  CHECK(solvable(*test::t1_instance()).solvable);
  // A sensitive host running only MySQL has nothing to exploit.
  auto inst = *test::t1_instance();
  inst.hosts[1].services = {"mysql"};
  const auto rep = solvable(inst);
  CHECK_FALSE(rep.solvable);
  CHECK(rep.unreachable == std::vector<HostAddress>{{1, 0}});
  const auto plan = optimal_plan(inst, 8);
  CHECK_FALSE(plan.solvable);
  CHECK(plan.optimal_reward == 0.0);
}

TEST_CASE("size guard") {
  const auto big = instantiate(bundled_scenario("md_entry_dmz_two_subnets"), 1);
  CHECK_THROWS_AS(optimal_plan(big, 5), OracleLimitError);
  CHECK_THROWS_AS(optimal_plan(*test::t1_instance(), kOracleMaxSteps + 1), OracleLimitError);
}

TEST_CASE("plans replay exactly, dominate agents, and grow with the cap") {
  const auto& spec = test::small_spec();
  const auto schema = unify_feature_schema({spec});
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto inst = instantiate(spec, seed);
    double prev = -1e9;
    for (int cap : {2, 4, 6, 8}) {
      const auto r = optimal_plan(inst, cap);
      CHECK(r.steps() <= cap);
      CHECK(replay(inst, r.plan) == r.optimal_reward);
      CHECK(r.optimal_reward >= prev);
      prev = r.optimal_reward;
    }
    const auto best = optimal_plan(inst, 8);
    Rng rng(seed);
    for (int e = 0; e < 50; ++e) {
      auto [st, obs] = reset(std::make_shared<const ScenarioInstance>(inst));
      while (!st.done && st.steps < 8) obs = step(st, random_step(obs, schema, rng)).observation;
      CHECK(st.total_reward <= best.optimal_reward);
    }
    auto [st, obs] = reset(std::make_shared<const ScenarioInstance>(inst));
    while (!st.done && st.steps < 8) obs = step(st, greedy_marker_step(obs, spec)).observation;
    CHECK(st.total_reward <= best.optimal_reward);
  }
}

TEST_CASE("report JSON") {
  const auto r = optimal_plan(*test::t1_instance(), 6);
  const auto j = plan_to_json(r);
  CHECK(j.at("optimal_reward") == 96.0);
  CHECK(j.at("plan").size() == 5);
  CHECK(j.at("solvable") == true);
  CHECK(j.at("unreachable").empty());
  CHECK(j.at("states_explored").get<std::size_t>() == r.states_explored);
}
