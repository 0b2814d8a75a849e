#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "spamdet/conditions.h"
#include "spamdet/corpus.h"
#include "spamdet/neuralnet.h"

namespace spamdet {

struct AdcganConfig {
  std::size_t noise_dim = 100;
  std::size_t vector_dim = 100;
  std::size_t condition_dim = kConditionDim;
  std::size_t batch = 128;
  int epochs = 2000;  // one epoch = d_steps_per_g discriminator updates + one generator update
  double lr_g = 0.1;
  double lr_d = 0.01;
  int d_steps_per_g = 1;
  double d_dropout = 0.0;
  bool g_batchnorm = true;
  double weight_clip = 0.0;  // 0 disables clipping
  bool standardize = true;   // z-score review vectors with training statistics
  std::uint64_t seed = 1;

  nlohmann::json to_json() const;
  // Unknown keys are rejected.
  static AdcganConfig from_json(const nlohmann::json& j);
  std::uint64_t hash() const;
};

// 128 -> 256 -> 512 -> 256 -> 100 and 128 -> 256 -> 128 -> 64 -> 1 at the defaults.
std::vector<nn::LayerSpec> generator_specs(const AdcganConfig& cfg);
std::vector<nn::LayerSpec> discriminator_specs(const AdcganConfig& cfg);

// loss_d = mean D(fake | c_d) - mean D(x | c_d). Rows of the inputs are
// [vector | condition]. With backprop, adds dloss/dtheta_d to D's gradient
// buffers.
template <typename T>
T discriminator_loss(nn::Mlp<T>& D, const Eigen::Matrix<T, -1, -1>& real_in, const Eigen::Matrix<T, -1, -1>& fake_in,
                     bool backprop);

// loss_g = -mean D(G(z | c_g) | c_g). With backprop, adds dloss/dtheta_g to G's
// gradient buffers; D's parameter gradients are left untouched.
template <typename T>
T generator_loss(nn::Mlp<T>& G, nn::Mlp<T>& D, const Eigen::Matrix<T, -1, -1>& z, const Eigen::Matrix<T, -1, -1>& cg,
                 bool backprop);

struct TrainingHistory {
  std::vector<double> loss_g;
  std::vector<double> loss_d;
  std::vector<double> d_real;  // mean D on real matched pairs, per epoch
  std::vector<double> d_fake;  // mean D on generated mismatched pairs
};

// What the discriminator saw in one update; used to audit the trainer.
struct DiscriminatorBatch {
  int epoch = 0;
  const Eigen::MatrixXf* cg = nullptr;       // conditions the fakes were generated under
  const Eigen::MatrixXf* cd = nullptr;       // conditions paired with the fakes (and the real rows)
  std::size_t collisions = 0;                // rows where cd == cg was accepted
};
using DiscriminatorBatchHook = std::function<void(const DiscriminatorBatch&)>;

class AdcganModel {
 public:
  AdcganModel() = default;
  AdcganModel(std::string user_id, const AdcganConfig& cfg, std::uint64_t catalogue_hash = Catalogue::standard().hash());

  // vectors: N x vector_dim review vectors, conditions: N x condition_dim.
  void train(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions,
             const DiscriminatorBatchHook& hook = nullptr);

  bool trained() const { return trained_; }
  const std::string& user_id() const { return user_id_; }
  const AdcganConfig& config() const { return cfg_; }
  std::uint64_t catalogue_hash() const { return catalogue_hash_; }
  const TrainingHistory& history() const { return history_; }

  // Generator output for given noise and conditions (inference mode), in the
  // model's internal (standardised) vector space.
  Eigen::MatrixXd generate(const Eigen::MatrixXd& z, const Eigen::MatrixXd& cg);
  // D(v | c) in inference mode, one probability per row.
  Eigen::VectorXd discriminate(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions);
  // 1 - D(v | c). Throws ValidationError on an untrained model.
  Eigen::VectorXd score(const Eigen::MatrixXd& vectors, const Eigen::MatrixXd& conditions);
  double score_review(const Eigen::VectorXd& vector, const Eigen::VectorXd& condition);

  nn::Mlp<float>& generator() { return G_; }
  nn::Mlp<float>& discriminator() { return D_; }

  // Binary model file, see docs/model_format.md.
  void save(std::ostream& out) const;
  static AdcganModel load(std::istream& in);
  void save(const std::string& path) const;
  static AdcganModel load(const std::string& path);

 private:
  Eigen::MatrixXf prepare_vectors(const Eigen::MatrixXd& vectors) const;

  std::string user_id_;
  AdcganConfig cfg_;
  std::uint64_t catalogue_hash_ = 0;
  nn::Mlp<float> G_, D_;
  Eigen::VectorXd shift_, scale_;  // standardisation of review vectors
  TrainingHistory history_;
  bool trained_ = false;
};

// deceptive iff score >= threshold.
std::vector<Label> detect(const Eigen::VectorXd& scores, double threshold);

extern template float discriminator_loss<float>(nn::Mlp<float>&, const Eigen::MatrixXf&, const Eigen::MatrixXf&, bool);
extern template double discriminator_loss<double>(nn::Mlp<double>&, const Eigen::MatrixXd&, const Eigen::MatrixXd&,
                                                  bool);
extern template float generator_loss<float>(nn::Mlp<float>&, nn::Mlp<float>&, const Eigen::MatrixXf&,
                                            const Eigen::MatrixXf&, bool);
extern template double generator_loss<double>(nn::Mlp<double>&, nn::Mlp<double>&, const Eigen::MatrixXd&,
                                              const Eigen::MatrixXd&, bool);

}  // namespace spamdet
