#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "scda/matrix.hpp"
#include "scda/rng.hpp"

namespace scda {

enum class Activation { Relu, Tanh, Identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct Layer {
  Matrix weights;            // in x out
  std::vector<double> bias;  // out
  Activation activation = Activation::Identity;
};

/// Feature extractor F. `version` is bumped on every parameter mutation so
/// stale forward caches can be detected.
struct Mlp {
  std::vector<Layer> layers;
  int input_dim = 0;
  int feature_dim = 0;
  std::uint64_t version = 0;
};

/// Linear-softmax classifier C over num_known + k classes. Columns
/// [0, num_known) score the known classes, the rest the implicit ones.
struct SoftmaxClassifier {
  Matrix weights;            // feature_dim x out_dim
  std::vector<double> bias;  // out_dim
  int num_known = 0;
  std::uint64_t version = 0;

  int feature_dim() const { return weights.rows(); }
  int out_dim() const { return weights.cols(); }
};

/// Connector between F and C: identity in the forward pass, multiplies the
/// gradient flowing into F by `lambda` in the backward pass (−1 reverses it).
struct GradScale {
  double lambda = 1.0;
};

/// Hidden layers use relu, the final (width feature_dim) layer is identity.
/// Weights and biases are uniform in ±1/sqrt(fan_in).
Mlp make_mlp(int input_dim, const std::vector<int>& hidden_dims,
             int feature_dim, Rng& rng);

/// out_dim = num_known + k, parameters uniform in ±1/sqrt(feature_dim).
SoftmaxClassifier make_classifier(int feature_dim, int num_known, int k,
                                  Rng& rng);

/// Fresh classifier with out_dim = num_known + new_k; every parameter is
/// re-initialized from `rng` (no warm start). F is not involved.
SoftmaxClassifier restructure(const SoftmaxClassifier& c, int new_k, Rng& rng);

/// Row-wise softmax with max-subtraction; stable for |logit| up to ~700.
Matrix softmax(const Matrix& logits);

/// Intermediates captured by forward. Valid for backward only while both
/// models are unmodified (checked via the version stamps).
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // per layer, before activation
  std::vector<Matrix> post;  // per layer, after activation
  Matrix logits;
  Matrix probs;
  std::uint64_t f_version = 0;
  std::uint64_t c_version = 0;
};

struct ForwardResult {
  Matrix features;  // == cache.post.back()
  Matrix probs;
  ForwardCache cache;
};

ForwardResult forward(const Mlp& f, const SoftmaxClassifier& c,
                      const Matrix& x);

/// Parameter gradients for one (F, C) pair. Addable across loss terms.
struct Gradients {
  std::vector<Matrix> f_weights;
  std::vector<std::vector<double>> f_bias;
  Matrix c_weights;
  std::vector<double> c_bias;

  Gradients& operator+=(const Gradients& other);
};

Gradients zero_gradients(const Mlp& f, const SoftmaxClassifier& c);

/// Backpropagates a loss whose gradient w.r.t. the logits is `d_logits`.
/// `scale.lambda` multiplies the gradient entering F (classifier gradients
/// are unscaled). Pass `d_input` to also get the gradient w.r.t. x.
Gradients backward_from_logits(const Mlp& f, const SoftmaxClassifier& c,
                               const ForwardCache& cache,
                               const Matrix& d_logits,
                               GradScale scale = GradScale{},
                               Matrix* d_input = nullptr);

/// Same, for a loss differentiated w.r.t. the probabilities; applies the
/// softmax Jacobian first.
Gradients backward_from_probs(const Mlp& f, const SoftmaxClassifier& c,
                              const ForwardCache& cache, const Matrix& d_probs,
                              GradScale scale = GradScale{},
                              Matrix* d_input = nullptr);

struct SgdConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// Momentum SGD with L2 folded into the gradient:
///   v <- momentum*v + grad + weight_decay*param;  param <- param - lr*v
struct SgdState {
  SgdConfig config;
  std::vector<Matrix> f_w_velocity;
  std::vector<std::vector<double>> f_b_velocity;
  Matrix c_w_velocity;
  std::vector<double> c_b_velocity;
};

SgdState make_sgd_state(const Mlp& f, const SoftmaxClassifier& c,
                        SgdConfig config);

void sgd_step(Mlp& f, SoftmaxClassifier& c, const Gradients& g, SgdState& s);

/// Checkpoint document: {"format":"scda-checkpoint","version":1,
/// "feature_extractor":{...},"classifier":{...}} with row-major flat
/// parameter arrays. See README for the full layout.
nlohmann::ordered_json checkpoint_to_json(const Mlp& f,
                                          const SoftmaxClassifier& c);
void checkpoint_from_json(const nlohmann::ordered_json& doc, Mlp& f,
                          SoftmaxClassifier& c);
std::string checkpoint_to_string(const Mlp& f, const SoftmaxClassifier& c);
void checkpoint_from_string(const std::string& text, Mlp& f,
                            SoftmaxClassifier& c);
void save_checkpoint(const std::string& path, const Mlp& f,
                     const SoftmaxClassifier& c);
void load_checkpoint(const std::string& path, Mlp& f, SoftmaxClassifier& c);

}  // namespace scda
