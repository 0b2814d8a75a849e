#include "spamdet/neuralnet.h"

#include <cmath>
#include <istream>
#include <ostream>

#include "spamdet/binary_io.h"
#include "spamdet/error.h"

namespace spamdet::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

std::string_view to_string(FlopsConvention c) {
  return c == FlopsConvention::exact_adds ? "(2I-1)*O" : "2*I*O";
}

std::size_t param_count(const LayerSpec& spec) { return spec.in * spec.out + spec.out; }

std::uint64_t flops(const LayerSpec& spec, FlopsConvention convention) {
  const std::uint64_t i = spec.in, o = spec.out;
  return convention == FlopsConvention::exact_adds ? (2 * i - 1) * o : 2 * i * o;
}

namespace {

template <typename T>
T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename M>
void apply_activation(Activation act, const M& a, M& h) {
  using T = typename M::Scalar;
  switch (act) {
    case Activation::identity: h = a; break;
    case Activation::relu: h = a.cwiseMax(T(0)); break;
    case Activation::leaky_relu: h = a.cwiseMax(T(kLeakySlope) * a); break;
    case Activation::sigmoid: h = a.unaryExpr([](T v) { return sigmoid(v); }); break;
  }
}

// dL/da given dL/dh, the pre-activation a and the activation output h.
template <typename M>
void activation_backward(Activation act, const M& a, const M& h, M& grad) {
  using T = typename M::Scalar;
  switch (act) {
    case Activation::identity: break;
    case Activation::relu: grad = grad.cwiseProduct(a.unaryExpr([](T v) { return v > T(0) ? T(1) : T(0); })); break;
    case Activation::leaky_relu:
      grad = grad.cwiseProduct(a.unaryExpr([](T v) { return v > T(0) ? T(1) : T(kLeakySlope); }));
      break;
    case Activation::sigmoid: grad = grad.cwiseProduct(h.cwiseProduct((M::Ones(h.rows(), h.cols()) - h))); break;
  }
}

}  // namespace

template <typename T>
DenseLayer<T>::DenseLayer(const LayerSpec& spec, Rng& init_rng) : spec_(spec) {
  if (spec.in == 0 || spec.out == 0) throw ValidationError("layer dimensions must be positive");
  if (!(spec.dropout >= 0.0 && spec.dropout < 1.0)) throw ValidationError("dropout rate must lie in [0,1)");
  const auto in = static_cast<Eigen::Index>(spec.in), out = static_cast<Eigen::Index>(spec.out);
  const double limit = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  W_.resize(out, in);
  for (Eigen::Index r = 0; r < out; ++r)
    for (Eigen::Index c = 0; c < in; ++c) W_(r, c) = static_cast<T>(dist(init_rng));
  b_ = Vector::Zero(out);
  if (spec.batchnorm) {
    gamma_ = Vector::Ones(out);
    beta_ = Vector::Zero(out);
    run_mean_ = Vector::Zero(out);
    run_var_ = Vector::Ones(out);
  }
  zero_grad();
}

template <typename T>
typename DenseLayer<T>::Matrix DenseLayer<T>::forward(const Matrix& x, Mode mode, Rng& rng, bool replay_mask) {
  if (static_cast<std::size_t>(x.cols()) != spec_.in)
    throw ValidationError("input width " + std::to_string(x.cols()) + " does not match layer input " +
                          std::to_string(spec_.in));
  const bool train = mode == Mode::train;
  Matrix z = x * W_.transpose();
  z.rowwise() += b_.transpose();

  Matrix a;
  if (spec_.batchnorm) {
    if (train) {
      const T n = static_cast<T>(x.rows());
      RowVector mean = z.colwise().mean();
      Matrix centered = z.rowwise() - mean;
      RowVector var = centered.colwise().squaredNorm() / n;
      inv_std_ = (var.array() + T(kBnEps)).rsqrt().transpose();
      xhat_ = centered * inv_std_.asDiagonal();
      run_mean_ = (T(1) - T(kBnMomentum)) * run_mean_ + T(kBnMomentum) * mean.transpose();
      run_var_ = (T(1) - T(kBnMomentum)) * run_var_ + T(kBnMomentum) * var.transpose();
      a = xhat_ * gamma_.asDiagonal();
    } else {
      Vector inv = (run_var_.array() + T(kBnEps)).rsqrt();
      Matrix centered = z.rowwise() - run_mean_.transpose();
      a = centered * inv.asDiagonal() * gamma_.asDiagonal();
    }
    a.rowwise() += beta_.transpose();
  } else {
    a = std::move(z);
  }

  Matrix h;
  apply_activation(spec_.activation, a, h);

  if (!train) return h;

  x_ = x;
  a_ = std::move(a);
  h_ = h;
  if (spec_.dropout > 0.0) {
    if (!replay_mask || mask_.rows() != h.rows() || mask_.cols() != h.cols()) {
      // Four 16-bit draws per engine call; the keep probability is rounded
      // to a multiple of 2^-16. Draws are buffered so the threshold loop
      // stays branch-free.
      const auto threshold = static_cast<std::uint32_t>(std::llround((1.0 - spec_.dropout) * 65536.0));
      const T scale = static_cast<T>(1.0 / (1.0 - spec_.dropout));
      mask_.resize(h.rows(), h.cols());
      const auto n = static_cast<std::size_t>(mask_.size());
      std::vector<std::uint16_t> draws((n + 3) / 4 * 4);
      for (std::size_t w = 0; w < draws.size(); w += 4) {
        const std::uint64_t bits = rng();
        for (std::size_t k = 0; k < 4; ++k) draws[w + k] = static_cast<std::uint16_t>(bits >> (16 * k));
      }
      T* m = mask_.data();
      for (std::size_t i = 0; i < n; ++i) m[i] = draws[i] < threshold ? scale : T(0);
    }
    h = h.cwiseProduct(mask_);
  }
  return h;
}

template <typename T>
typename DenseLayer<T>::Matrix DenseLayer<T>::backward(const Matrix& dy, bool need_input_grad,
                                                       bool accumulate_param_grads) {
  if (x_.size() == 0) throw Error("backward called without a preceding train-mode forward");
  if (dy.rows() != h_.rows() || dy.cols() != h_.cols()) throw ValidationError("upstream gradient shape mismatch");
  Matrix g = spec_.dropout > 0.0 ? Matrix(dy.cwiseProduct(mask_)) : dy;
  activation_backward(spec_.activation, a_, h_, g);

  if (spec_.batchnorm) {
    const T n = static_cast<T>(g.rows());
    if (accumulate_param_grads) {
      dgamma_ += g.cwiseProduct(xhat_).colwise().sum().transpose();
      dbeta_ += g.colwise().sum().transpose();
    }
    Matrix dxhat = g * gamma_.asDiagonal();
    RowVector sum_dxhat = dxhat.colwise().sum();
    RowVector sum_dxhat_xhat = dxhat.cwiseProduct(xhat_).colwise().sum();
    Matrix dz = (dxhat * n).rowwise() - sum_dxhat;
    dz -= xhat_ * sum_dxhat_xhat.asDiagonal();
    g = dz * (inv_std_ / n).asDiagonal();
  }

  if (accumulate_param_grads) {
    dW_.noalias() += g.transpose() * x_;
    db_ += g.colwise().sum().transpose();
  }
  if (!need_input_grad) return Matrix();
  return g * W_;
}

template <typename T>
void DenseLayer<T>::zero_grad() {
  dW_ = Matrix::Zero(W_.rows(), W_.cols());
  db_ = Vector::Zero(b_.size());
  if (spec_.batchnorm) {
    dgamma_ = Vector::Zero(gamma_.size());
    dbeta_ = Vector::Zero(beta_.size());
  }
}

template <typename T>
std::vector<ParamRef<T>> DenseLayer<T>::parameters() {
  std::vector<ParamRef<T>> p{{W_.data(), dW_.data(), static_cast<std::size_t>(W_.size())},
                             {b_.data(), db_.data(), static_cast<std::size_t>(b_.size())}};
  if (spec_.batchnorm) {
    p.push_back({gamma_.data(), dgamma_.data(), static_cast<std::size_t>(gamma_.size())});
    p.push_back({beta_.data(), dbeta_.data(), static_cast<std::size_t>(beta_.size())});
  }
  return p;
}

template <typename T>
Mlp<T>::Mlp(const std::vector<LayerSpec>& specs, std::uint64_t seed)
    : seed_(seed), dropout_rng_(derive_seed(seed, "dropout")) {
  if (specs.empty()) throw ValidationError("an MLP needs at least one layer");
  Rng init(derive_seed(seed, "init"));
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (i > 0 && specs[i].in != specs[i - 1].out)
      throw ValidationError("layer " + std::to_string(i) + " input " + std::to_string(specs[i].in) +
                            " does not match previous output " + std::to_string(specs[i - 1].out));
    layers_.emplace_back(specs[i], init);
  }
}

template <typename T>
typename Mlp<T>::Matrix Mlp<T>::forward(const Matrix& batch, Mode mode) {
  Matrix h = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      h = layers_[i].forward(h, mode, dropout_rng_, replay_masks_);
    } catch (const ValidationError& e) {
      throw ValidationError("layer " + std::to_string(i) + ": " + e.what());
    }
  }
  return h;
}

template <typename T>
typename Mlp<T>::Matrix Mlp<T>::backward(const Matrix& upstream, bool need_input_grad, bool accumulate_param_grads) {
  Matrix g = upstream;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const bool want_input = i > 0 || need_input_grad;
    g = layers_[i].backward(g, want_input, accumulate_param_grads);
  }
  return g;
}

template <typename T>
void Mlp<T>::zero_grad() {
  for (auto& l : layers_) l.zero_grad();
}

template <typename T>
void Mlp<T>::sgd_step(T learning_rate) {
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    for (const auto& p : layers_[li].parameters()) {
      Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> v(p.value, static_cast<Eigen::Index>(p.size));
      Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> g(p.grad, static_cast<Eigen::Index>(p.size));
      if (!g.allFinite()) {
        std::size_t k = 0;
        while (k < p.size && std::isfinite(p.grad[k])) ++k;
        throw NumericalError("non-finite gradient in layer " + std::to_string(li) + " (parameter offset " +
                             std::to_string(k) + ")");
      }
      v -= learning_rate * g;
    }
  }
}

template <typename T>
typename Mlp<T>::Matrix Mlp<T>::backward_sgd(const Matrix& upstream, T learning_rate) {
  zero_grad();
  Matrix g = backward(upstream);
  sgd_step(learning_rate);
  return g;
}

template <typename T>
void Mlp<T>::clip_weights(T bound) {
  for (auto& l : layers_) {
    l.weights() = l.weights().cwiseMax(-bound).cwiseMin(bound);
    l.bias() = l.bias().cwiseMax(-bound).cwiseMin(bound);
  }
}

template <typename T>
std::vector<LayerSpec> Mlp<T>::specs() const {
  std::vector<LayerSpec> s;
  for (const auto& l : layers_) s.push_back(l.spec());
  return s;
}

template <typename T>
std::size_t Mlp<T>::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.param_count();
  return n;
}

template <typename T>
std::size_t Mlp<T>::trainable_param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.trainable_param_count();
  return n;
}

template <typename T>
std::uint64_t Mlp<T>::flops(FlopsConvention convention) const {
  std::uint64_t n = 0;
  for (const auto& l : layers_) n += nn::flops(l.spec(), convention);
  return n;
}

template <typename T>
std::vector<ParamRef<T>> Mlp<T>::parameters() {
  std::vector<ParamRef<T>> all;
  for (auto& l : layers_) {
    auto p = l.parameters();
    all.insert(all.end(), p.begin(), p.end());
  }
  return all;
}

namespace {
constexpr char kMlpMagic[5] = "SDNN";
constexpr std::uint32_t kMlpVersion = 1;

template <typename V>
void write_values(std::ostream& out, const V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) bin::write<double>(out, static_cast<double>(v.data()[i]));
}

template <typename V>
void read_values(std::istream& in, V& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = static_cast<typename V::Scalar>(bin::read<double>(in));
}
}  // namespace

template <typename T>
void Mlp<T>::save(std::ostream& out) const {
  bin::write_magic(out, kMlpMagic);
  bin::write<std::uint32_t>(out, kMlpVersion);
  bin::write<std::uint64_t>(out, seed_);
  bin::write<std::uint32_t>(out, static_cast<std::uint32_t>(layers_.size()));
  for (const auto& l : layers_) {
    const auto& s = l.spec();
    bin::write<std::uint32_t>(out, static_cast<std::uint32_t>(s.in));
    bin::write<std::uint32_t>(out, static_cast<std::uint32_t>(s.out));
    bin::write<std::uint8_t>(out, static_cast<std::uint8_t>(s.activation));
    bin::write<std::uint8_t>(out, s.batchnorm ? 1 : 0);
    bin::write<double>(out, s.dropout);
  }
  for (const auto& l : layers_) {
    // Weights row-major: row o holds the I input weights of output unit o.
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w = l.weights();
    write_values(out, w);
    write_values(out, l.bias());
    if (l.spec().batchnorm) {
      write_values(out, l.bn_scale());
      write_values(out, l.bn_shift());
      write_values(out, l.running_mean());
      write_values(out, l.running_var());
    }
  }
  if (!out) throw Error("failed writing model");
}

template <typename T>
Mlp<T> Mlp<T>::load(std::istream& in) {
  bin::expect_magic(in, kMlpMagic, "network model");
  const auto version = bin::read<std::uint32_t>(in);
  if (version != kMlpVersion) throw ValidationError("unsupported model version " + std::to_string(version));
  const auto seed = bin::read<std::uint64_t>(in);
  const auto n = bin::read<std::uint32_t>(in);
  std::vector<LayerSpec> specs(n);
  for (auto& s : specs) {
    s.in = bin::read<std::uint32_t>(in);
    s.out = bin::read<std::uint32_t>(in);
    const auto act = bin::read<std::uint8_t>(in);
    if (act > static_cast<std::uint8_t>(Activation::sigmoid)) throw ValidationError("unknown activation code");
    s.activation = static_cast<Activation>(act);
    s.batchnorm = bin::read<std::uint8_t>(in) != 0;
    s.dropout = bin::read<double>(in);
  }
  Mlp net(specs, seed);
  for (auto& l : net.layers_) {
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> w(l.weights().rows(), l.weights().cols());
    read_values(in, w);
    l.weights() = w;
    read_values(in, l.bias());
    if (l.spec().batchnorm) {
      read_values(in, l.bn_scale());
      read_values(in, l.bn_shift());
      read_values(in, l.running_mean());
      read_values(in, l.running_var());
    }
  }
  return net;
}

GradientCheckResult check_gradients(const std::vector<ParamRef<double>>& params, const std::function<double()>& loss,
                                    double step, double rel_tol, double abs_floor) {
  GradientCheckResult res;
  for (const auto& p : params) {
    for (std::size_t k = 0; k < p.size; ++k) {
      const double saved = p.value[k];
      p.value[k] = saved + step;
      const double up = loss();
      p.value[k] = saved - step;
      const double down = loss();
      p.value[k] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p.grad[k];
      const double diff = std::abs(analytic - numeric);
      const double scale = std::max(std::abs(analytic), std::abs(numeric));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      ++res.checked;
      if (diff <= abs_floor || rel <= rel_tol) {
        ++res.passed;
      }
      if (diff > abs_floor) res.max_relative_error = std::max(res.max_relative_error, rel);
    }
  }
  return res;
}

template class DenseLayer<float>;
template class DenseLayer<double>;
template class Mlp<float>;
template class Mlp<double>;

}  // namespace spamdet::nn
