#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "nasim/observation.hpp"
#include "nasim/rng.hpp"
#include "nasim/scenario.hpp"

namespace nasim {

enum class ModelKind { mlp, invariant };

std::string_view to_string(ModelKind kind);
ModelKind model_kind_from_string(std::string_view text);

struct PolicyDims {
  int host_dim = 0;    // d
  int action_dim = 0;  // A
  int hidden = 64;     // h for the MLP, k for the invariant model
  int pe_dim = 8;      // invariant model only
  int max_hosts = kMaxHosts;  // MLP only
  double leaky_slope = 0.01;
  /// Give the Terminal primitive zero probability on every host.
  bool mask_terminal = false;

  static PolicyDims for_schema(const FeatureSchema& schema, int hidden = 64, int pe_dim = 8);
  friend bool operator==(const PolicyDims&, const PolicyDims&) = default;
};

/// Action distribution over the valid hosts (host-major: index = row * A + primitive).
struct PolicyOutput {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  Eigen::VectorXd log_probs;
  double value = 0.0;
  int valid_hosts = 0;
};

/// Intermediate values of a batched forward pass, consumed by backward().
struct ForwardCache {
  std::vector<int> counts;   // hosts per sample
  std::vector<int> offsets;  // first host column per sample (invariant model)
  Eigen::MatrixXd input;     // MLP: padded inputs (max_hosts*d x N); invariant: host inputs with PE (d+pe x T)
  Eigen::MatrixXd pre;       // pre-activation of the non-linear layer
  Eigen::MatrixXd act;       // post-activation
  Eigen::MatrixXd agg;       // invariant: [mean; max] per sample (2k x N)
  std::vector<std::vector<int>> argmax;  // invariant: host column achieving each max coordinate
};

class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters live in one flat vector; each model views it through named blocks.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual ModelKind kind() const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;

  const PolicyDims& dims() const { return dims_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  /// Uniform in +-1/sqrt(fan_in) per block, drawn from a stream of `seed`.
  void init(std::uint64_t seed);

  PolicyOutput forward(const EncodedObs& obs) const;
  /// Per-sample outputs are bitwise identical to forward() on each sample alone.
  std::vector<PolicyOutput> forward_batch(std::span<const EncodedObs> batch, ForwardCache* cache = nullptr) const;

  /// Gradient of sum_i (dlogits_i . logits_i + dvalue_i * value_i) w.r.t. the
  /// parameters, given upstream derivatives for a cached batch.
  virtual Eigen::VectorXd backward(const ForwardCache& cache, std::span<const Eigen::VectorXd> dlogits,
                                   std::span<const double> dvalue) const = 0;

  struct Block {
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index offset = 0;
    int fan_in = 0;
  };
  const std::vector<Block>& blocks() const { return blocks_; }

 protected:
  explicit Policy(PolicyDims dims) : dims_(dims) {}

  void add_block(std::string name, Eigen::Index rows, Eigen::Index cols, int fan_in);
  void finish_layout() { params_ = Eigen::VectorXd::Zero(next_offset_); }

  Eigen::Map<const Eigen::MatrixXd> view(std::size_t block) const;
  static Eigen::Map<Eigen::MatrixXd> view(Eigen::VectorXd& flat, const Block& b);

  /// Fills logits, value and valid_hosts of each output.
  virtual void forward_logits(std::span<const EncodedObs> batch, ForwardCache& cache,
                              std::vector<PolicyOutput>& out) const = 0;

  double leaky(double x) const { return x > 0.0 ? x : dims_.leaky_slope * x; }
  double leaky_grad(double x) const { return x > 0.0 ? 1.0 : dims_.leaky_slope; }

  PolicyDims dims_;
  std::vector<Block> blocks_;
  Eigen::Index next_offset_ = 0;
  Eigen::VectorXd params_;
};

/// Fixed-capacity MLP: padded host matrix -> LeakyReLU layer -> value head and
/// a 30*A policy head whose padded rows are masked out.
class MlpPolicy final : public Policy {
 public:
  explicit MlpPolicy(PolicyDims dims);

  ModelKind kind() const override { return ModelKind::mlp; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<MlpPolicy>(*this); }
  Eigen::VectorXd backward(const ForwardCache& cache, std::span<const Eigen::VectorXd> dlogits,
                           std::span<const double> dvalue) const override;

  /// (30*d)*h + h + (h+1) + (h+1)*(30*A)
  static std::size_t expected_parameter_count(const PolicyDims& dims);

 protected:
  void forward_logits(std::span<const EncodedObs> batch, ForwardCache& cache,
                      std::vector<PolicyOutput>& out) const override;
};

/// Size-invariant model: shared LeakyReLU host embedding, mean||max
/// aggregation concatenated back to each host, per-host linear action head,
/// value from the aggregation.
class InvariantPolicy final : public Policy {
 public:
  explicit InvariantPolicy(PolicyDims dims);

  ModelKind kind() const override { return ModelKind::invariant; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<InvariantPolicy>(*this); }
  Eigen::VectorXd backward(const ForwardCache& cache, std::span<const Eigen::VectorXd> dlogits,
                           std::span<const double> dvalue) const override;

  /// Forward over host inputs that already carry their positional embeddings
  /// (columns of width d + pe_dim).
  PolicyOutput forward_inputs(const Eigen::MatrixXd& inputs) const;

  /// Host vectors with their positional embeddings appended.
  Eigen::MatrixXd augment(const EncodedObs& obs) const;

  /// (d+pe)*k + k + 3k*A + A + 2k + 1
  static std::size_t expected_parameter_count(const PolicyDims& dims);

 protected:
  void forward_logits(std::span<const EncodedObs> batch, ForwardCache& cache,
                      std::vector<PolicyOutput>& out) const override;

 private:
  void forward_columns(ForwardCache& cache, std::vector<PolicyOutput>& out) const;
};

std::unique_ptr<Policy> make_policy(ModelKind kind, const PolicyDims& dims);

/// MLP forward over the padded matrix form. Returns probabilities over all
/// max_hosts*A slots; masked slots are exactly zero.
PolicyOutput mlp_forward(const MlpPolicy& policy, const MatrixObs& obs);

/// Sum that does not depend on the order of `values`.
double order_free_sum(std::span<const double> values);

/// Softmax with order-independent normalisation, so permuting the logits
/// permutes the outputs exactly.
void softmax(const Eigen::VectorXd& logits, Eigen::VectorXd& probs, Eigen::VectorXd& log_probs);

/// Flat index drawn from `output.probs`; greedy takes the argmax (lowest index on ties).
int sample_action(const PolicyOutput& output, Rng& rng, bool greedy = false);

// Checkpoints ---------------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json policy_fingerprint(const Policy& policy, const FeatureSchema& schema);
nlohmann::json checkpoint_to_json(const Policy& policy, const FeatureSchema& schema);
/// Rejects checkpoints whose fingerprint differs from the one implied by
/// `schema`; the error message lists each differing field.
std::unique_ptr<Policy> checkpoint_from_json(const nlohmann::json& doc, const FeatureSchema& schema);
/// The feature schema a checkpoint was trained under.
FeatureSchema checkpoint_schema(const nlohmann::json& doc);
nlohmann::json read_checkpoint(const std::string& path);
void save_checkpoint(const Policy& policy, const FeatureSchema& schema, const std::string& path);
std::unique_ptr<Policy> load_checkpoint(const std::string& path, const FeatureSchema& schema);

}  // namespace nasim
