#include "support.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "nasim/scenario.hpp"

#ifndef NASIM_TEST_DATA_DIR
#error "NASIM_TEST_DATA_DIR must be defined"
#endif

namespace nasim::test {

std::string data_path(std::string_view name) { return std::string(NASIM_TEST_DATA_DIR) + "/" + std::string(name); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const ScenarioInstance> t1_instance() {
  static const auto inst = std::make_shared<const ScenarioInstance>(
      instance_from_json(nlohmann::json::parse(read_file(data_path("t1_instance.json")))));
  return inst;
}

std::vector<Action> t1_plan() {
  return {Action::exploit({0, 0}, "e_wp_ninja"), Action::subnet_scan({0, 0}), Action::exploit({1, 0}, "e_drupal"),
          Action::privesc({1, 0}, "pe_kernel"), Action::terminal()};
}

const ScenarioSpec& small_spec() {
  static const ScenarioSpec spec = parse_scenario(read_file(data_path("small_scenario.json")));
  return spec;
}

// DOT ---------------------------------------------------------------------------

namespace {

struct Token {
  enum Kind { id, punct, edge_op, end } kind;
  std::string text;
};

class DotParser {
 public:
  explicit DotParser(std::string_view text) : text_(text) {}

  bool run(std::string* error) {
    try {
      tokenize();
      graph();
      if (peek().kind != Token::end) fail("trailing input after graph");
      return true;
    } catch (const std::runtime_error& e) {
      if (error) *error = e.what();
      return false;
    }
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(what + " (token " + std::to_string(pos_) + ")");
  }

  void tokenize() {
    std::size_t i = 0;
    while (i < text_.size()) {
      const char c = text_[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '/' && i + 1 < text_.size() && text_[i + 1] == '/') {
        while (i < text_.size() && text_[i] != '\n') ++i;
      } else if (c == '/' && i + 1 < text_.size() && text_[i + 1] == '*') {
        const auto close = text_.find("*/", i + 2);
        if (close == std::string_view::npos) fail("unterminated comment");
        i = close + 2;
      } else if (c == '"') {
        std::string s;
        ++i;
        for (;;) {
          if (i >= text_.size()) fail("unterminated string");
          if (text_[i] == '\\' && i + 1 < text_.size()) {
            s += text_[i];
            s += text_[i + 1];
            i += 2;
          } else if (text_[i] == '"') {
            ++i;
            break;
          } else {
            s += text_[i++];
          }
        }
        tokens_.push_back({Token::id, s});
      } else if (c == '-' && i + 1 < text_.size() && (text_[i + 1] == '>' || text_[i + 1] == '-')) {
        tokens_.push_back({Token::edge_op, std::string(text_.substr(i, 2))});
        i += 2;
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || static_cast<unsigned char>(c) >= 0x80) {
        const std::size_t start = i;
        while (i < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[i])) || text_[i] == '_' ||
                                    static_cast<unsigned char>(text_[i]) >= 0x80))
          ++i;
        tokens_.push_back({Token::id, std::string(text_.substr(start, i - start))});
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-') {
        const std::size_t start = i;
        if (c == '-') ++i;
        bool digits = false, dot = false;
        while (i < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[i])) || (text_[i] == '.' && !dot))) {
          if (text_[i] == '.') dot = true;
          else digits = true;
          ++i;
        }
        if (!digits) fail("malformed numeral");
        tokens_.push_back({Token::id, std::string(text_.substr(start, i - start))});
      } else if (std::string_view("{}[];,=:").find(c) != std::string_view::npos) {
        tokens_.push_back({Token::punct, std::string(1, c)});
        ++i;
      } else {
        fail(std::string("unexpected character '") + c + "'");
      }
    }
    tokens_.push_back({Token::end, ""});
  }

  const Token& peek(std::size_t ahead = 0) const { return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)]; }
  bool is_punct(const char* p, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::punct && peek(ahead).text == p;
  }
  bool is_keyword(const char* k, std::size_t ahead = 0) const {
    if (peek(ahead).kind != Token::id) return false;
    std::string lower = peek(ahead).text;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return lower == k;
  }
  void expect_punct(const char* p) {
    if (!is_punct(p)) fail(std::string("expected '") + p + "'");
    ++pos_;
  }
  void expect_id() {
    if (peek().kind != Token::id) fail("expected an ID");
    ++pos_;
  }

  void graph() {
    if (is_keyword("strict")) ++pos_;
    if (is_keyword("digraph")) directed_ = true;
    else if (!is_keyword("graph")) fail("expected 'graph' or 'digraph'");
    ++pos_;
    if (peek().kind == Token::id) ++pos_;
    expect_punct("{");
    stmt_list();
    expect_punct("}");
  }

  void stmt_list() {
    while (!is_punct("}") && peek().kind != Token::end) {
      stmt();
      if (is_punct(";")) ++pos_;
    }
  }

  void stmt() {
    if (is_keyword("graph") || is_keyword("node") || is_keyword("edge")) {
      ++pos_;
      if (!is_punct("[")) fail("attribute statement needs an attribute list");
      attr_list();
      return;
    }
    if (peek().kind == Token::id && is_punct("=", 1)) {
      pos_ += 2;
      expect_id();
      return;
    }
    if (is_keyword("subgraph") || is_punct("{")) {
      subgraph();
    } else {
      node_id();
    }
    if (peek().kind == Token::edge_op) {
      while (peek().kind == Token::edge_op) {
        if ((peek().text == "->") != directed_) fail("edge operator does not match graph type");
        ++pos_;
        if (is_keyword("subgraph") || is_punct("{")) subgraph();
        else node_id();
      }
    }
    if (is_punct("[")) attr_list();
  }

  void subgraph() {
    if (is_keyword("subgraph")) {
      ++pos_;
      if (peek().kind == Token::id) ++pos_;
    }
    expect_punct("{");
    stmt_list();
    expect_punct("}");
  }

  void node_id() {
    expect_id();
    if (is_punct(":")) {
      ++pos_;
      expect_id();
      if (is_punct(":")) {
        ++pos_;
        expect_id();
      }
    }
  }

  void attr_list() {
    while (is_punct("[")) {
      ++pos_;
      while (!is_punct("]")) {
        expect_id();
        expect_punct("=");
        expect_id();
        if (is_punct(";") || is_punct(",")) ++pos_;
      }
      ++pos_;
    }
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  bool directed_ = false;
};

}  // namespace

bool parse_dot(std::string_view text, std::string* error) { return DotParser(text).run(error); }

// GAE -------------------------------------------------------------------------

Advantages gae_by_summation(const Trajectory& traj, double gamma, double lambda, double reward_scale) {
  const int n = traj.n_envs;
  const int len = traj.rollout_len;
  auto at = [n](int t, int i) { return static_cast<std::size_t>(t * n + i); };
  Advantages out;
  out.advantages.assign(traj.size(), 0.0);
  out.returns.assign(traj.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    auto value_after = [&](int t) {
      return t + 1 < len ? traj.values[at(t + 1, i)] : traj.bootstrap_values[static_cast<std::size_t>(i)];
    };
    for (int t = 0; t < len; ++t) {
      double sum = 0.0;
      for (int u = t; u < len; ++u) {
        const bool done = traj.dones[at(u, i)] != 0;
        const double delta =
            traj.rewards[at(u, i)] * reward_scale + (done ? 0.0 : gamma * value_after(u)) - traj.values[at(u, i)];
        sum += std::pow(gamma * lambda, u - t) * delta;
        if (done) break;
      }
      out.advantages[at(t, i)] = sum;
      out.returns[at(t, i)] = sum + traj.values[at(t, i)];
    }
  }
  return out;
}

// Random inputs -------------------------------------------------------------------

EncodedObs random_obs(int d, int hosts, Rng& rng) {
  EncodedObs obs;
  obs.hosts.resize(d, hosts);
  for (int j = 0; j < hosts; ++j) {
    for (int r = 0; r + 1 < d; ++r) obs.hosts(r, j) = rng.bernoulli(0.4) ? 1.0 : 0.0;
    obs.hosts(d - 1, j) = rng.uniform();
    obs.positions.push_back(j);
  }
  return obs;
}

void randomize(Policy& policy, Rng& rng, double scale) {
  for (Eigen::Index i = 0; i < policy.params().size(); ++i) policy.params()[i] = (2.0 * rng.uniform() - 1.0) * scale;
}

// Gradient check ------------------------------------------------------------------

GradCheck ppo_gradient_check(ModelKind kind, std::uint64_t seed, double step) {
  PolicyDims dims;
  dims.host_dim = 6;
  dims.action_dim = 3;
  dims.hidden = 8;
  dims.pe_dim = 4;
  dims.max_hosts = 5;
  auto policy = make_policy(kind, dims);
  policy->init(seed);

  TrainConfig config;
  Rng rng = Rng::derive(seed, Stream::agent, {17});
  Trajectory traj;
  traj.n_envs = 3;
  traj.rollout_len = 4;
  for (int k = 0; k < traj.n_envs * traj.rollout_len; ++k) {
    EncodedObs obs = random_obs(dims.host_dim, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(dims.max_hosts))), rng);
    const auto out = policy->forward(obs);
    const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(out.probs.size())));
    // Old log-probs shifted so ratios land on both sides of the clip range,
    // but never within 1e-3 of its kinks.
    double shift = 0.0;
    for (;;) {
      shift = 0.8 * (rng.uniform() - 0.5);
      const double ratio = std::exp(-shift);
      if (std::abs(ratio - (1.0 - config.clip)) > 1e-3 && std::abs(ratio - (1.0 + config.clip)) > 1e-3) break;
    }
    traj.obs.push_back(std::move(obs));
    traj.actions.push_back(a);
    traj.log_probs.push_back(out.log_probs[a] + shift);
    traj.rewards.push_back(2.0 * rng.uniform() - 1.0);
    traj.values.push_back(out.value);
    traj.dones.push_back(rng.bernoulli(0.2) ? 1 : 0);
  }
  traj.bootstrap_values = {0.3, -0.2, 0.1};
  Advantages adv = compute_gae(traj, config.gamma, config.gae_lambda);
  normalize(adv.advantages);

  auto [stats, grad] = ppo_loss_and_gradient(*policy, traj, adv, config);
  GradCheck out;
  out.clip_fraction = stats.clip_fraction;
  out.parameters = policy->parameter_count();
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    const double old = policy->params()[i];
    policy->params()[i] = old + step;
    const double up = ppo_loss_and_gradient(*policy, traj, adv, config).first.total;
    policy->params()[i] = old - step;
    const double down = ppo_loss_and_gradient(*policy, traj, adv, config).first.total;
    policy->params()[i] = old;
    const double numeric = (up - down) / (2.0 * step);
    const double diff = std::abs(numeric - grad[i]);
    out.max_abs_error = std::max(out.max_abs_error, diff);
    out.max_rel_error =
        std::max(out.max_rel_error, diff / std::max({std::abs(numeric), std::abs(grad[i]), 1e-8}));
  }
  return out;
}

}  // namespace nasim::test
