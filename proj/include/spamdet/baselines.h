#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "spamdet/neuralnet.h"

namespace spamdet {

// Local outlier factor of each test row against the training rows (Euclidean).
// Training points' own densities use neighbourhoods that exclude themselves.
// Throws ValidationError unless k < number of training rows.
Eigen::VectorXd lof_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, std::size_t k = 10);

struct IForestConfig {
  std::size_t n_trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 1;
};

// Average unsuccessful-search path length in a binary search tree of n items:
// 0 for n <= 1, 1 for n == 2, 2 H(n-1) - 2 (n-1) / n otherwise.
double iforest_path_normalizer(double n);

// 2^(-E[h(x)] / c(psi)), in (0, 1]; higher is more anomalous.
Eigen::VectorXd iforest_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test,
                               const IForestConfig& config = {});

struct VaeConfig {
  std::size_t hidden = 256;
  std::size_t latent = 64;
  int epochs = 100;
  std::size_t batch = 64;
  double learning_rate = 1e-3;  // Adam step size
  int score_samples = 16;     // latent draws per scored point
  double logvar_bound = 5.0;  // log-variances are squashed into (-bound, bound)
  std::uint64_t seed = 1;
};

// Gaussian encoder and Gaussian decoder, trained by Adam on the negative ELBO.
class Vae {
 public:
  Vae(std::size_t input_dim, const VaeConfig& config);

  // Mean ELBO over the rows of x (already standardised) using the given
  // standard-normal draws (rows x latent). With backprop, adds the gradient of
  // -ELBO to the parameter gradient buffers.
  double elbo(const Eigen::MatrixXd& x, const Eigen::MatrixXd& eps, bool backprop);

  // Standardises with the training statistics and trains; returns the mean
  // ELBO of each epoch.
  std::vector<double> fit(const Eigen::MatrixXd& train);

  // Negative log reconstruction probability averaged over latent draws.
  Eigen::VectorXd score(const Eigen::MatrixXd& points);

  void zero_grad();
  void adam_step();
  std::vector<nn::ParamRef<double>> parameters();
  std::size_t input_dim() const { return input_dim_; }

  static double kl_to_standard_normal(const Eigen::VectorXd& mu, const Eigen::VectorXd& logvar);

 private:
  Eigen::MatrixXd standardise(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd squash(const Eigen::MatrixXd& raw) const;

  std::size_t input_dim_;
  VaeConfig cfg_;
  nn::Mlp<double> encoder_, decoder_;
  std::vector<Eigen::VectorXd> adam_m_, adam_v_;
  long adam_t_ = 0;
  Eigen::RowVectorXd shift_, scale_;
  Rng rng_;
};

Eigen::VectorXd vae_scores(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test, const VaeConfig& config = {});

}  // namespace spamdet
