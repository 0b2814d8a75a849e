#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spamdet/random.h"

namespace spamdet::nn {

enum class Activation : std::uint8_t { identity = 0, relu = 1, leaky_relu = 2, sigmoid = 3 };
enum class Mode { train, infer };

inline constexpr double kLeakySlope = 0.2;

std::string_view to_string(Activation a);

// How a fully connected layer's floating-point operations are counted.
//   exact_adds:      (2I-1)*O  (I multiplies and I-1 additions per output)
//   two_per_weight:  2*I*O     (one multiply-add pair per weight)
enum class FlopsConvention { exact_adds, two_per_weight };

std::string_view to_string(FlopsConvention c);

struct LayerSpec {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;
  double dropout = 0.0;  // [0,1); applied only in train mode
  bool batchnorm = false;
};

std::size_t param_count(const LayerSpec& spec);  // I*O + O
std::uint64_t flops(const LayerSpec& spec, FlopsConvention convention);

// View of one contiguous parameter block and its gradient buffer.
template <typename T>
struct ParamRef {
  T* value;
  T* grad;
  std::size_t size;
};

// Fully connected layer: z = x W^T + b, optional batch normalisation,
// activation, inverted dropout. Batches are B x I with one sample per row.
template <typename T>
class DenseLayer {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;
  using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

  DenseLayer() = default;
  // Glorot-uniform weights, zero biases.
  DenseLayer(const LayerSpec& spec, Rng& init_rng);

  const LayerSpec& spec() const { return spec_; }
  std::size_t param_count() const { return spec_.in * spec_.out + spec_.out; }
  std::size_t trainable_param_count() const { return param_count() + (spec_.batchnorm ? 2 * spec_.out : 0); }

  // `replay_mask` reuses the dropout mask of the previous train-mode call,
  // which makes repeated evaluations deterministic for gradient checking.
  Matrix forward(const Matrix& x, Mode mode, Rng& rng, bool replay_mask = false);
  // Must follow a train-mode forward. Gradients accumulate until zero_grad().
  Matrix backward(const Matrix& dy, bool need_input_grad, bool accumulate_param_grads);

  void zero_grad();
  std::vector<ParamRef<T>> parameters();

  Matrix& weights() { return W_; }
  const Matrix& weights() const { return W_; }
  Vector& bias() { return b_; }
  const Vector& bias() const { return b_; }
  Vector& bn_scale() { return gamma_; }
  const Vector& bn_scale() const { return gamma_; }
  Vector& bn_shift() { return beta_; }
  const Vector& bn_shift() const { return beta_; }
  Vector& running_mean() { return run_mean_; }
  const Vector& running_mean() const { return run_mean_; }
  Vector& running_var() { return run_var_; }
  const Vector& running_var() const { return run_var_; }
  const Matrix& weight_grad() const { return dW_; }
  const Vector& bias_grad() const { return db_; }
  // Normalised pre-activations of the last train-mode forward (B x O).
  const Matrix& normalized() const { return xhat_; }

  static constexpr double kBnMomentum = 0.1;
  static constexpr double kBnEps = 1e-5;

 private:
  LayerSpec spec_;
  Matrix W_;  // O x I
  Vector b_;
  Vector gamma_, beta_, run_mean_, run_var_;
  Matrix dW_;
  Vector db_, dgamma_, dbeta_;

  // Caches from the last train-mode forward.
  Matrix x_, xhat_, a_, h_, mask_;
  Vector inv_std_;
};

template <typename T>
class Mlp {
 public:
  using Matrix = typename DenseLayer<T>::Matrix;
  using Layer = DenseLayer<T>;

  Mlp() = default;
  Mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed);

  Matrix forward(const Matrix& batch, Mode mode);
  // Returns dL/d(input). Requires a preceding train-mode forward.
  Matrix backward(const Matrix& upstream, bool need_input_grad = true, bool accumulate_param_grads = true);
  void zero_grad();
  // theta <- theta - lr * grad. Throws NumericalError on a non-finite gradient.
  void sgd_step(T learning_rate);
  // zero_grad + backward + sgd_step.
  Matrix backward_sgd(const Matrix& upstream, T learning_rate);

  void clip_weights(T bound);
  void set_mask_replay(bool on) { replay_masks_ = on; }

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().spec().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().spec().out; }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<LayerSpec> specs() const;
  std::uint64_t seed() const { return seed_; }

  // Dense weights and biases only (the accounting used for model size tables).
  std::size_t param_count() const;
  // Adds batch-norm scale and shift.
  std::size_t trainable_param_count() const;
  std::uint64_t flops(FlopsConvention convention) const;

  std::vector<ParamRef<T>> parameters();

  // Binary model format, see docs/model_format.md.
  void save(std::ostream& out) const;
  static Mlp load(std::istream& in);

 private:
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
  Rng dropout_rng_;
  bool replay_masks_ = false;
};

struct GradientCheckResult {
  std::size_t checked = 0;
  std::size_t passed = 0;
  double max_relative_error = 0.0;
  double pass_fraction() const { return checked == 0 ? 1.0 : static_cast<double>(passed) / checked; }
};

// Compares the gradient buffers currently held by `params` against central
// differences of `loss`. A parameter passes when
// |analytic - numeric| <= rel_tol * max(|analytic|, |numeric|) or the
// difference is below abs_floor.
GradientCheckResult check_gradients(const std::vector<ParamRef<double>>& params, const std::function<double()>& loss,
                                    double step = 1e-5, double rel_tol = 1e-4, double abs_floor = 1e-9);

extern template class DenseLayer<float>;
extern template class DenseLayer<double>;
extern template class Mlp<float>;
extern template class Mlp<double>;

}  // namespace spamdet::nn
