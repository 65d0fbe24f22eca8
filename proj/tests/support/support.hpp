#pragma once

#include <memory>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "nasim/action.hpp"
#include "nasim/instancer.hpp"
#include "nasim/observation.hpp"
#include "nasim/policy.hpp"
#include "nasim/rng.hpp"
#include "nasim/trainer.hpp"

namespace nasim {
inline std::ostream& operator<<(std::ostream& os, const Action& a) { return os << describe(a); }
inline std::ostream& operator<<(std::ostream& os, const HostAddress& a) { return os << to_string(a); }
}  // namespace nasim

namespace nasim::test {

std::string data_path(std::string_view name);
std::string read_file(const std::string& path);

/// internet - dmz - service. The dmz host runs WordPress; the service host is
/// sensitive and runs Drupal and MySQL on linux.
std::shared_ptr<const ScenarioInstance> t1_instance();
/// Exploit the dmz host, SubnetScan, exploit Drupal, escalate, Terminal.
std::vector<Action> t1_plan();

/// Scenario with at most six hosts used by the oracle checks.
const ScenarioSpec& small_spec();

/// Checks `text` against the Graphviz DOT grammar (graph, subgraph, node,
/// edge and attribute statements; quoted, numeral and plain IDs).
bool parse_dot(std::string_view text, std::string* error = nullptr);

/// Advantages by explicit summation of discounted TD residuals over each
/// episode segment, without the backward recursion.
Advantages gae_by_summation(const Trajectory& traj, double gamma, double lambda, double reward_scale = 1.0);

/// Random host matrix with `hosts` columns of width `d`, entries in {0, 1}
/// plus a real-valued last row.
EncodedObs random_obs(int d, int hosts, Rng& rng);

/// Uniform random parameters in [-scale, scale].
void randomize(Policy& policy, Rng& rng, double scale = 1.0);

struct GradCheck {
  double max_rel_error = 0.0;  // max |a - n| / max(|a|, |n|, 1e-8) over parameters
  double max_abs_error = 0.0;
  double clip_fraction = 0.0;
  std::size_t parameters = 0;
};

/// Analytic PPO-loss gradient against central differences for a d=6, h=k=8,
/// A=3 model on a random batch in which some ratios fall outside the clip range.
GradCheck ppo_gradient_check(ModelKind kind, std::uint64_t seed, double step = 1e-5);

}  // namespace nasim::test
