#include "nasim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace nasim {

using nlohmann::json;

std::string_view to_string(ModelKind kind) { return kind == ModelKind::mlp ? "mlp" : "invariant"; }

ModelKind model_kind_from_string(std::string_view text) {
  if (text == "mlp") return ModelKind::mlp;
  if (text == "invariant") return ModelKind::invariant;
  throw std::invalid_argument("unknown model '" + std::string(text) + "' (expected mlp or invariant)");
}

PolicyDims PolicyDims::for_schema(const FeatureSchema& schema, int hidden, int pe_dim) {
  PolicyDims d;
  d.host_dim = schema.host_vector_dim();
  d.action_dim = schema.action_dim();
  d.hidden = hidden;
  d.pe_dim = pe_dim;
  return d;
}

double order_free_sum(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

void softmax(const Eigen::VectorXd& logits, Eigen::VectorXd& probs, Eigen::VectorXd& log_probs) {
  const Eigen::Index n = logits.size();
  probs.resize(n);
  log_probs.resize(n);
  if (n == 0) return;
  const double m = logits.maxCoeff();
  // Scalar exp: exact zeros for masked (-inf) logits and no dependence on
  // vector alignment.
  Eigen::VectorXd e(n);
  for (Eigen::Index i = 0; i < n; ++i) e[i] = std::exp(logits[i] - m);
  const double z = order_free_sum(std::span<const double>(e.data(), static_cast<std::size_t>(n)));
  const double log_z = std::log(z);
  for (Eigen::Index i = 0; i < n; ++i) {
    probs[i] = e[i] / z;
    log_probs[i] = logits[i] - m - log_z;
  }
}

int sample_action(const PolicyOutput& output, Rng& rng, bool greedy) {
  const auto& p = output.probs;
  if (p.size() == 0) throw PolicyError("sample_action: empty distribution");
  if (greedy) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < p.size(); ++i)
      if (p[i] > p[best]) best = i;
    return static_cast<int>(best);
  }
  double u = rng.uniform();
  Eigen::Index last_nonzero = -1;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) continue;
    last_nonzero = i;
    if (u < p[i]) return static_cast<int>(i);
    u -= p[i];
  }
  if (last_nonzero < 0) throw PolicyError("sample_action: distribution has no positive mass");
  return static_cast<int>(last_nonzero);
}

// Policy ---------------------------------------------------------------------

namespace {

// Terminal is the last primitive of each host block.
void mask_terminal_logits(Eigen::VectorXd& logits, int action_dim) {
  for (Eigen::Index i = action_dim - 1; i < logits.size(); i += action_dim)
    logits[i] = -std::numeric_limits<double>::infinity();
}

}  // namespace

void Policy::add_block(std::string name, Eigen::Index rows, Eigen::Index cols, int fan_in) {
  blocks_.push_back({std::move(name), rows, cols, next_offset_, fan_in});
  next_offset_ += rows * cols;
}

Eigen::Map<const Eigen::MatrixXd> Policy::view(std::size_t block) const {
  const Block& b = blocks_[block];
  return {params_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::MatrixXd> Policy::view(Eigen::VectorXd& flat, const Block& b) {
  return {flat.data() + b.offset, b.rows, b.cols};
}

void Policy::init(std::uint64_t seed) {
  Rng rng = Rng::derive(seed, Stream::init, {static_cast<std::uint64_t>(kind())});
  for (const auto& b : blocks_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
    for (Eigen::Index i = 0; i < b.rows * b.cols; ++i)
      params_[b.offset + i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
}

PolicyOutput Policy::forward(const EncodedObs& obs) const {
  auto out = forward_batch(std::span<const EncodedObs>(&obs, 1));
  return std::move(out.front());
}

std::vector<PolicyOutput> Policy::forward_batch(std::span<const EncodedObs> batch, ForwardCache* cache) const {
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c = ForwardCache{};
  for (const auto& obs : batch) {
    if (obs.host_count() < 1) throw PolicyError("policy forward: observation has no hosts");
    if (obs.hosts.rows() != dims_.host_dim)
      throw PolicyError("policy forward: host vectors have dimension " + std::to_string(obs.hosts.rows()) +
                        ", model expects " + std::to_string(dims_.host_dim));
    c.counts.push_back(obs.host_count());
  }
  std::vector<PolicyOutput> out(batch.size());
  forward_logits(batch, c, out);
  for (auto& o : out) {
    if (dims_.mask_terminal) mask_terminal_logits(o.logits, dims_.action_dim);
    softmax(o.logits, o.probs, o.log_probs);
  }
  return out;
}

// MLP ------------------------------------------------------------------------

namespace mlp {
enum : std::size_t { W1, b1, wv, bv, Wp, bp };
}

MlpPolicy::MlpPolicy(PolicyDims dims) : Policy(dims) {
  const Eigen::Index in = static_cast<Eigen::Index>(dims.max_hosts) * dims.host_dim;
  const Eigen::Index out = static_cast<Eigen::Index>(dims.max_hosts) * dims.action_dim;
  const int h = dims.hidden;
  add_block("W1", h, in, static_cast<int>(in));
  add_block("b1", h, 1, static_cast<int>(in));
  add_block("wv", 1, h, h);
  add_block("bv", 1, 1, h);
  add_block("Wp", out, h, h);
  add_block("bp", out, 1, h);
  finish_layout();
}

std::size_t MlpPolicy::expected_parameter_count(const PolicyDims& d) {
  const std::size_t h = static_cast<std::size_t>(d.hidden);
  const std::size_t in = static_cast<std::size_t>(d.max_hosts) * static_cast<std::size_t>(d.host_dim);
  const std::size_t out = static_cast<std::size_t>(d.max_hosts) * static_cast<std::size_t>(d.action_dim);
  return in * h + h + (h + 1) + (h + 1) * out;
}

// Every product is a matrix-vector product into a fresh vector so a sample's
// outputs do not depend on its position in the batch.
void MlpPolicy::forward_logits(std::span<const EncodedObs> batch, ForwardCache& cache,
                               std::vector<PolicyOutput>& out) const {
  const auto W1 = view(mlp::W1);
  const auto b1 = view(mlp::b1);
  const auto wv = view(mlp::wv);
  const double bv = view(mlp::bv)(0, 0);
  const auto Wp = view(mlp::Wp);
  const auto bp = view(mlp::bp);
  const Eigen::Index in = W1.cols();
  const int a = dims_.action_dim;
  const auto n = static_cast<Eigen::Index>(batch.size());

  cache.input = Eigen::MatrixXd::Zero(in, n);
  cache.pre.resize(dims_.hidden, n);
  cache.act.resize(dims_.hidden, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const EncodedObs& obs = batch[static_cast<std::size_t>(j)];
    if (obs.host_count() > dims_.max_hosts)
      throw EncodingError("MLP policy: " + std::to_string(obs.host_count()) + " hosts exceed capacity " +
                          std::to_string(dims_.max_hosts));
    Eigen::VectorXd x = Eigen::VectorXd::Zero(in);
    x.head(obs.hosts.size()) = Eigen::Map<const Eigen::VectorXd>(obs.hosts.data(), obs.hosts.size());
    cache.input.col(j) = x;
    Eigen::VectorXd pre = W1 * x;
    pre += b1.col(0);
    Eigen::VectorXd act = pre.unaryExpr([this](double v) { return leaky(v); });
    cache.pre.col(j) = pre;
    cache.act.col(j) = act;

    const Eigen::Index valid = static_cast<Eigen::Index>(obs.host_count()) * a;
    Eigen::VectorXd logits = Wp.topRows(valid) * act;
    logits += bp.col(0).head(valid);
    auto& o = out[static_cast<std::size_t>(j)];
    o.logits = std::move(logits);
    o.value = wv.row(0).dot(act) + bv;
    o.valid_hosts = obs.host_count();
  }
}

Eigen::VectorXd MlpPolicy::backward(const ForwardCache& cache, std::span<const Eigen::VectorXd> dlogits,
                                    std::span<const double> dvalue) const {
  const auto n = static_cast<Eigen::Index>(cache.counts.size());
  if (static_cast<Eigen::Index>(dlogits.size()) != n || static_cast<Eigen::Index>(dvalue.size()) != n)
    throw PolicyError("MLP backward: upstream sizes do not match the cached batch");
  const auto wv = view(mlp::wv);
  const auto Wp = view(mlp::Wp);

  Eigen::MatrixXd dL = Eigen::MatrixXd::Zero(Wp.rows(), n);
  Eigen::RowVectorXd dV(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& g = dlogits[static_cast<std::size_t>(j)];
    dL.col(j).head(g.size()) = g;
    dV[j] = dvalue[static_cast<std::size_t>(j)];
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count()));
  view(grad, blocks_[mlp::Wp]).noalias() = dL * cache.act.transpose();
  view(grad, blocks_[mlp::bp]) = dL.rowwise().sum();
  view(grad, blocks_[mlp::wv]).noalias() = dV * cache.act.transpose();
  view(grad, blocks_[mlp::bv])(0, 0) = dV.sum();

  Eigen::MatrixXd dH = Wp.transpose() * dL;
  dH.noalias() += wv.transpose() * dV;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index r = 0; r < dH.rows(); ++r) dH(r, j) *= leaky_grad(cache.pre(r, j));
  view(grad, blocks_[mlp::W1]).noalias() = dH * cache.input.transpose();
  view(grad, blocks_[mlp::b1]) = dH.rowwise().sum();
  return grad;
}

PolicyOutput mlp_forward(const MlpPolicy& policy, const MatrixObs& obs) {
  const int valid = obs.valid();
  for (std::size_t i = 0; i < obs.mask.size(); ++i)
    if ((obs.mask[i] != 0) != (static_cast<int>(i) < valid))
      throw EncodingError("mlp_forward: mask must mark a prefix of rows");
  if (obs.matrix.rows() != policy.dims().max_hosts)
    throw EncodingError("mlp_forward: matrix has " + std::to_string(obs.matrix.rows()) + " rows, model expects " +
                        std::to_string(policy.dims().max_hosts));
  EncodedObs enc;
  enc.hosts = obs.matrix.topRows(valid).transpose();
  for (int i = 0; i < valid; ++i) enc.positions.push_back(i);
  PolicyOutput o = policy.forward(enc);

  const Eigen::Index full = static_cast<Eigen::Index>(policy.dims().max_hosts) * policy.dims().action_dim;
  const double ninf = -std::numeric_limits<double>::infinity();
  const Eigen::Index n = o.logits.size();
  Eigen::VectorXd logits = Eigen::VectorXd::Constant(full, ninf);
  Eigen::VectorXd log_probs = Eigen::VectorXd::Constant(full, ninf);
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(full);
  logits.head(n) = o.logits;
  log_probs.head(n) = o.log_probs;
  probs.head(n) = o.probs;
  o.logits = std::move(logits);
  o.log_probs = std::move(log_probs);
  o.probs = std::move(probs);
  return o;
}

// Invariant model ------------------------------------------------------------

namespace inv {
enum : std::size_t { We, be, Wa, ba, wv, bv };
}

InvariantPolicy::InvariantPolicy(PolicyDims dims) : Policy(dims) {
  if (dims.pe_dim < 2 || dims.pe_dim % 2 != 0) throw PolicyError("invariant policy: pe_dim must be even and >= 2");
  const int in = dims.host_dim + dims.pe_dim;
  const int k = dims.hidden;
  add_block("We", k, in, in);
  add_block("be", k, 1, in);
  add_block("Wa", dims.action_dim, 3 * k, 3 * k);
  add_block("ba", dims.action_dim, 1, 3 * k);
  add_block("wv", 1, 2 * k, 2 * k);
  add_block("bv", 1, 1, 2 * k);
  finish_layout();
}

std::size_t InvariantPolicy::expected_parameter_count(const PolicyDims& d) {
  const std::size_t k = static_cast<std::size_t>(d.hidden);
  const std::size_t a = static_cast<std::size_t>(d.action_dim);
  const std::size_t in = static_cast<std::size_t>(d.host_dim + d.pe_dim);
  return in * k + k + 3 * k * a + a + 2 * k + 1;
}

Eigen::MatrixXd InvariantPolicy::augment(const EncodedObs& obs) const {
  if (static_cast<int>(obs.positions.size()) != obs.host_count())
    throw PolicyError("invariant policy: one discovery position per host required");
  Eigen::MatrixXd z(dims_.host_dim + dims_.pe_dim, obs.host_count());
  for (int i = 0; i < obs.host_count(); ++i) {
    z.col(i).head(dims_.host_dim) = obs.hosts.col(i);
    z.col(i).tail(dims_.pe_dim) = positional_embedding(obs.positions[static_cast<std::size_t>(i)], dims_.pe_dim);
  }
  return z;
}

void InvariantPolicy::forward_logits(std::span<const EncodedObs> batch, ForwardCache& cache,
                                     std::vector<PolicyOutput>& out) const {
  Eigen::Index total = 0;
  for (const auto& obs : batch) total += obs.host_count();
  cache.input.resize(dims_.host_dim + dims_.pe_dim, total);
  Eigen::Index off = 0;
  for (const auto& obs : batch) {
    cache.offsets.push_back(static_cast<int>(off));
    cache.input.middleCols(off, obs.host_count()) = augment(obs);
    off += obs.host_count();
  }
  forward_columns(cache, out);
}

PolicyOutput InvariantPolicy::forward_inputs(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != dims_.host_dim + dims_.pe_dim)
    throw PolicyError("invariant policy: inputs must have d + pe_dim rows");
  if (inputs.cols() < 1) throw PolicyError("invariant policy: no hosts");
  ForwardCache cache;
  cache.counts = {static_cast<int>(inputs.cols())};
  cache.offsets = {0};
  cache.input = inputs;
  std::vector<PolicyOutput> out(1);
  forward_columns(cache, out);
  if (dims_.mask_terminal) mask_terminal_logits(out[0].logits, dims_.action_dim);
  softmax(out[0].logits, out[0].probs, out[0].log_probs);
  return std::move(out[0]);
}

// Aggregation sums are order-free and every product is computed per host, so
// permuting the hosts (with their embeddings) permutes the outputs exactly.
void InvariantPolicy::forward_columns(ForwardCache& cache, std::vector<PolicyOutput>& out) const {
  const auto We = view(inv::We);
  const auto be = view(inv::be);
  const auto Wa = view(inv::Wa);
  const auto ba = view(inv::ba);
  const auto wv = view(inv::wv);
  const double bv = view(inv::bv)(0, 0);
  const int k = dims_.hidden;
  const int a = dims_.action_dim;
  const Eigen::Index total = cache.input.cols();
  const auto n = static_cast<Eigen::Index>(cache.counts.size());

  cache.pre.resize(k, total);
  cache.act.resize(k, total);
  for (Eigen::Index t = 0; t < total; ++t) {
    Eigen::VectorXd z = cache.input.col(t);
    Eigen::VectorXd pre = We * z;
    pre += be.col(0);
    cache.pre.col(t) = pre;
    cache.act.col(t) = pre.unaryExpr([this](double v) { return leaky(v); });
  }

  cache.agg.resize(2 * k, n);
  cache.argmax.assign(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(k), 0));
  std::vector<double> scratch;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int off = cache.offsets[static_cast<std::size_t>(j)];
    const int cnt = cache.counts[static_cast<std::size_t>(j)];
    for (int r = 0; r < k; ++r) {
      scratch.clear();
      int best = off;
      for (int t = off; t < off + cnt; ++t) {
        scratch.push_back(cache.act(r, t));
        if (cache.act(r, t) > cache.act(r, best)) best = t;
      }
      cache.agg(r, j) = order_free_sum(scratch) / cnt;
      cache.agg(k + r, j) = cache.act(r, best);
      cache.argmax[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)] = best;
    }

    auto& o = out[static_cast<std::size_t>(j)];
    o.valid_hosts = cnt;
    o.logits.resize(static_cast<Eigen::Index>(cnt) * a);
    Eigen::VectorXd c(3 * k);
    c.tail(2 * k) = cache.agg.col(j);
    for (int h = 0; h < cnt; ++h) {
      c.head(k) = cache.act.col(off + h);
      Eigen::VectorXd l = Wa * c;
      l += ba.col(0);
      o.logits.segment(static_cast<Eigen::Index>(h) * a, a) = l;
    }
    Eigen::VectorXd g = cache.agg.col(j);
    o.value = wv.row(0).dot(g) + bv;
  }
}

Eigen::VectorXd InvariantPolicy::backward(const ForwardCache& cache, std::span<const Eigen::VectorXd> dlogits,
                                          std::span<const double> dvalue) const {
  const auto n = static_cast<Eigen::Index>(cache.counts.size());
  if (static_cast<Eigen::Index>(dlogits.size()) != n || static_cast<Eigen::Index>(dvalue.size()) != n)
    throw PolicyError("invariant backward: upstream sizes do not match the cached batch");
  const auto Wa = view(inv::Wa);
  const auto wv = view(inv::wv);
  const int k = dims_.hidden;
  const int a = dims_.action_dim;
  const Eigen::Index total = cache.input.cols();

  // Per-host logits gradient (A x T) and the concatenated head input (3k x T).
  Eigen::MatrixXd dL(a, total);
  Eigen::MatrixXd C(3 * k, total);
  Eigen::RowVectorXd dV(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int off = cache.offsets[static_cast<std::size_t>(j)];
    const int cnt = cache.counts[static_cast<std::size_t>(j)];
    const auto& g = dlogits[static_cast<std::size_t>(j)];
    if (g.size() != static_cast<Eigen::Index>(cnt) * a) throw PolicyError("invariant backward: dlogits size mismatch");
    dL.middleCols(off, cnt) = Eigen::Map<const Eigen::MatrixXd>(g.data(), a, cnt);
    for (int h = 0; h < cnt; ++h) {
      C.col(off + h).head(k) = cache.act.col(off + h);
      C.col(off + h).tail(2 * k) = cache.agg.col(j);
    }
    dV[j] = dvalue[static_cast<std::size_t>(j)];
  }

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(parameter_count()));
  view(grad, blocks_[inv::Wa]).noalias() = dL * C.transpose();
  view(grad, blocks_[inv::ba]) = dL.rowwise().sum();
  view(grad, blocks_[inv::wv]).noalias() = dV * cache.agg.transpose();
  view(grad, blocks_[inv::bv])(0, 0) = dV.sum();

  const Eigen::MatrixXd dC = Wa.transpose() * dL;
  Eigen::MatrixXd dE = dC.topRows(k);
  for (Eigen::Index j = 0; j < n; ++j) {
    const int off = cache.offsets[static_cast<std::size_t>(j)];
    const int cnt = cache.counts[static_cast<std::size_t>(j)];
    Eigen::VectorXd dAgg = dC.middleCols(off, cnt).bottomRows(2 * k).rowwise().sum();
    dAgg += wv.row(0).transpose() * dV[j];
    for (int h = 0; h < cnt; ++h) dE.col(off + h) += dAgg.head(k) / cnt;
    for (int r = 0; r < k; ++r) dE(r, cache.argmax[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)]) += dAgg[k + r];
  }
  for (Eigen::Index t = 0; t < total; ++t)
    for (int r = 0; r < k; ++r) dE(r, t) *= leaky_grad(cache.pre(r, t));
  view(grad, blocks_[inv::We]).noalias() = dE * cache.input.transpose();
  view(grad, blocks_[inv::be]) = dE.rowwise().sum();
  return grad;
}

std::unique_ptr<Policy> make_policy(ModelKind kind, const PolicyDims& dims) {
  if (kind == ModelKind::mlp) return std::make_unique<MlpPolicy>(dims);
  return std::make_unique<InvariantPolicy>(dims);
}

// Checkpoints ----------------------------------------------------------------

namespace {

constexpr std::string_view kCheckpointFormat = "nasim-policy/1";

json fingerprint_of(ModelKind kind, const PolicyDims& d, std::size_t params, const FeatureSchema& schema) {
  json f;
  f["model"] = std::string(to_string(kind));
  f["host_vector_dim"] = d.host_dim;
  f["action_dim"] = d.action_dim;
  f["hidden"] = d.hidden;
  f["leaky_slope"] = d.leaky_slope;
  f["mask_terminal"] = d.mask_terminal;
  if (kind == ModelKind::mlp)
    f["max_hosts"] = d.max_hosts;
  else
    f["pe_dim"] = d.pe_dim;
  f["parameter_count"] = params;
  f["max_subnets"] = schema.max_subnets;
  f["max_hosts_per_subnet"] = schema.max_hosts_per_subnet;
  f["os"] = schema.os;
  f["services"] = schema.services;
  f["processes"] = schema.processes;
  f["exploits"] = schema.exploits;
  f["privescs"] = schema.privescs;
  return f;
}

}  // namespace

json policy_fingerprint(const Policy& policy, const FeatureSchema& schema) {
  return fingerprint_of(policy.kind(), policy.dims(), policy.parameter_count(), schema);
}

json checkpoint_to_json(const Policy& policy, const FeatureSchema& schema) {
  json doc;
  doc["format"] = std::string(kCheckpointFormat);
  doc["fingerprint"] = policy_fingerprint(policy, schema);
  doc["params"] = std::vector<double>(policy.params().data(), policy.params().data() + policy.params().size());
  return doc;
}

std::unique_ptr<Policy> checkpoint_from_json(const json& doc, const FeatureSchema& schema) {
  try {
    if (!doc.is_object() || doc.value("format", "") != kCheckpointFormat)
      throw CheckpointError("checkpoint: unrecognised format");
    const json& fp = doc.at("fingerprint");
    const ModelKind kind = model_kind_from_string(fp.at("model").get<std::string>());
    PolicyDims dims = PolicyDims::for_schema(schema, fp.at("hidden").get<int>(),
                                             kind == ModelKind::invariant ? fp.at("pe_dim").get<int>() : 8);
    if (kind == ModelKind::mlp) dims.max_hosts = fp.at("max_hosts").get<int>();
    dims.leaky_slope = fp.at("leaky_slope").get<double>();
    dims.mask_terminal = fp.at("mask_terminal").get<bool>();

    const json expected = fingerprint_of(kind, dims, make_policy(kind, dims)->parameter_count(), schema);
    std::vector<std::string> diffs;
    for (const auto& [key, value] : expected.items()) {
      if (!fp.contains(key))
        diffs.push_back(key + ": missing");
      else if (fp.at(key) != value)
        diffs.push_back(key + ": checkpoint " + fp.at(key).dump() + ", expected " + value.dump());
    }
    for (const auto& [key, value] : fp.items())
      if (!expected.contains(key)) diffs.push_back(key + ": unexpected field");
    if (!diffs.empty()) {
      std::string msg = "checkpoint fingerprint mismatch:";
      for (const auto& d : diffs) msg += "\n  " + d;
      throw CheckpointError(msg);
    }

    auto policy = make_policy(kind, dims);
    const auto params = doc.at("params").get<std::vector<double>>();
    if (params.size() != policy->parameter_count())
      throw CheckpointError("checkpoint: " + std::to_string(params.size()) + " parameters, expected " +
                            std::to_string(policy->parameter_count()));
    policy->params() = Eigen::Map<const Eigen::VectorXd>(params.data(), static_cast<Eigen::Index>(params.size()));
    return policy;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Policy& policy, const FeatureSchema& schema, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(policy, schema).dump() << '\n';
  if (!out) throw CheckpointError("failed writing checkpoint '" + path + "'");
}

FeatureSchema checkpoint_schema(const json& doc) {
  try {
    const json& fp = doc.at("fingerprint");
    FeatureSchema s;
    s.max_subnets = fp.at("max_subnets").get<int>();
    s.max_hosts_per_subnet = fp.at("max_hosts_per_subnet").get<int>();
    s.os = fp.at("os").get<std::vector<std::string>>();
    s.services = fp.at("services").get<std::vector<std::string>>();
    s.processes = fp.at("processes").get<std::vector<std::string>>();
    s.exploits = fp.at("exploits").get<std::vector<std::string>>();
    s.privescs = fp.at("privescs").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed fingerprint: ") + e.what());
  }
}

std::unique_ptr<Policy> load_checkpoint(const std::string& path, const FeatureSchema& schema) {
  return checkpoint_from_json(read_checkpoint(path), schema);
}

json read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return doc;
}

}  // namespace nasim
