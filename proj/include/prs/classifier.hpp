#pragma once

#include "prs/common.hpp"
#include "prs/data.hpp"
#include "prs/projection.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prs {

enum class Activation { kTanh, kSoftplus };

const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

/// Fully connected network with smooth hidden activations and a softmax head.
class MlpClassifier {
 public:
  MlpClassifier() = default;

  /// Glorot-uniform weights and zero biases, deterministic in `seed`.
  static MlpClassifier initialize(std::vector<int> layer_dims, Activation act, std::uint64_t seed);
  /// All parameters zero; its output is uniform over classes.
  static MlpClassifier zeros(std::vector<int> layer_dims, Activation act = Activation::kTanh);

  int input_dim() const { return layer_dims_.front(); }
  int num_classes() const { return layer_dims_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& layer_dims() const { return layer_dims_; }
  Activation activation() const { return activation_; }
  std::uint64_t seed() const { return seed_; }

  // weight(l) is (out x in); rows of a batch are samples.
  Matrix& weight(int layer) { return weights_.at(static_cast<std::size_t>(layer)); }
  const Matrix& weight(int layer) const { return weights_.at(static_cast<std::size_t>(layer)); }
  Vector& bias(int layer) { return biases_.at(static_cast<std::size_t>(layer)); }
  const Vector& bias(int layer) const { return biases_.at(static_cast<std::size_t>(layer)); }

  Vector logits(const Vector& x) const;
  /// Class probabilities; a point of the probability simplex.
  Vector forward(const Vector& x) const;
  Matrix forward_batch(const Matrix& batch) const;
  int predict(const Vector& x) const;
  /// Hard predictions for each row; ties go to the lowest class index.
  void predict_batch(const Matrix& batch, std::span<int> out) const;

  /// Gradient of the cross-entropy loss -log softmax(x)_label with respect to x.
  Vector input_gradient(const Vector& x, int label) const;
  /// Gradient of a single logit with respect to x.
  Vector logit_gradient(const Vector& x, int cls) const;
  double loss(const Vector& x, int label) const;

  bool operator==(const MlpClassifier&) const = default;

 private:
  friend class MlpTrainer;
  std::vector<int> layer_dims_;
  Activation activation_ = Activation::kTanh;
  std::uint64_t seed_ = 0;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  /// Multiplicative learning-rate factor applied after every epoch.
  double lr_decay_per_epoch = 0.95;
  /// Standard deviation of Gaussian data augmentation.
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Minibatch SGD with momentum and weight decay on the cross-entropy loss.
/// Mean loss per epoch is appended to `epoch_losses` when given.
MlpClassifier train(MlpClassifier model, const Dataset& data, const TrainConfig& cfg,
                    std::vector<double>* epoch_losses = nullptr);

/// Like `train`, but each input is replaced by U U'x and the Gaussian
/// augmentation is drawn in the projected space, so the network sees
/// U (U'x + noise), exactly what projected smoothing feeds it.
MlpClassifier finetune_on_reconstruction(MlpClassifier model, const ProjectionBasis& basis,
                                         const Dataset& data, const TrainConfig& cfg,
                                         std::vector<double>* epoch_losses = nullptr);

double accuracy(const MlpClassifier& model, const Dataset& data);
/// Accuracy of the composed classifier f(U U'x).
double projected_accuracy(const MlpClassifier& model, const ProjectionBasis& basis, const Dataset& data);

}  // namespace prs
