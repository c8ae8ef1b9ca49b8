#include "prs/classifier.hpp"

#include "prs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace prs {

const char* to_string(Activation act) {
  return act == Activation::kTanh ? "tanh" : "softplus";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "softplus") return Activation::kSoftplus;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh or softplus)");
}

namespace {

void check_layer_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("MlpClassifier: need at least input and output widths");
  for (int w : dims) {
    if (w < 1) throw std::invalid_argument("MlpClassifier: layer widths must be positive");
  }
  if (dims.back() < 2) throw std::invalid_argument("MlpClassifier: need at least two classes");
}

Matrix activate(const Matrix& z, Activation act) {
  if (act == Activation::kTanh) return z.array().tanh().matrix();
  // softplus(z) = max(z, 0) + log1p(exp(-|z|))
  return (z.array().max(0.0) + (-z.array().abs()).exp().log1p()).matrix();
}

// Derivative expressed through the pre-activation.
Matrix activate_derivative(const Matrix& z, Activation act) {
  if (act == Activation::kTanh) return (1.0 - z.array().tanh().square()).matrix();
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

void softmax_rows(Matrix& logits) {
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

int argmax_lowest(const auto& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

}  // namespace

MlpClassifier MlpClassifier::initialize(std::vector<int> layer_dims, Activation act, std::uint64_t seed) {
  check_layer_dims(layer_dims);
  MlpClassifier m;
  m.layer_dims_ = std::move(layer_dims);
  m.activation_ = act;
  m.seed_ = seed;
  CounterRng rng(seed, 0x1417ULL);
  for (std::size_t l = 0; l + 1 < m.layer_dims_.size(); ++l) {
    const int in = m.layer_dims_[l];
    const int out = m.layer_dims_[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(out, in);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    m.weights_.push_back(std::move(w));
    m.biases_.push_back(Vector::Zero(out));
  }
  return m;
}

MlpClassifier MlpClassifier::zeros(std::vector<int> layer_dims, Activation act) {
  check_layer_dims(layer_dims);
  MlpClassifier m;
  m.layer_dims_ = std::move(layer_dims);
  m.activation_ = act;
  for (std::size_t l = 0; l + 1 < m.layer_dims_.size(); ++l) {
    m.weights_.push_back(Matrix::Zero(m.layer_dims_[l + 1], m.layer_dims_[l]));
    m.biases_.push_back(Vector::Zero(m.layer_dims_[l + 1]));
  }
  return m;
}

Vector MlpClassifier::logits(const Vector& x) const {
  require_dim(x.size(), input_dim(), "MlpClassifier input");
  Vector h = x;
  for (int l = 0; l < num_layers(); ++l) {
    Vector z = weight(l) * h + bias(l);
    h = (l + 1 < num_layers()) ? Vector(activate(z, activation_)) : z;
  }
  return h;
}

Vector MlpClassifier::forward(const Vector& x) const {
  Matrix z = logits(x).transpose();
  softmax_rows(z);
  return z.transpose();
}

Matrix MlpClassifier::forward_batch(const Matrix& batch) const {
  require_dim(batch.cols(), input_dim(), "MlpClassifier batch width");
  Matrix h = batch;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    h = (l + 1 < num_layers()) ? activate(z, activation_) : std::move(z);
  }
  softmax_rows(h);
  return h;
}

int MlpClassifier::predict(const Vector& x) const { return argmax_lowest(logits(x)); }

void MlpClassifier::predict_batch(const Matrix& batch, std::span<int> out) const {
  require_dim(static_cast<Eigen::Index>(out.size()), batch.rows(), "predict_batch output");
  require_dim(batch.cols(), input_dim(), "MlpClassifier batch width");
  Matrix h = batch;
  for (int l = 0; l < num_layers(); ++l) {
    Matrix z = h * weight(l).transpose();
    z.rowwise() += bias(l).transpose();
    h = (l + 1 < num_layers()) ? activate(z, activation_) : std::move(z);
  }
  // argmax of the logits equals argmax of the softmax.
  for (Eigen::Index i = 0; i < h.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax_lowest(h.row(i));
}

namespace {

// Backpropagates d(scalar)/d(logits) = `seed_grad` down to the input.
Vector backprop_to_input(const MlpClassifier& m, const Vector& x, const Vector& seed_grad) {
  std::vector<Vector> pre;  // pre-activations of hidden layers
  Vector h = x;
  for (int l = 0; l + 1 < m.num_layers(); ++l) {
    Vector z = m.weight(l) * h + m.bias(l);
    pre.push_back(z);
    h = activate(z, m.activation());
  }
  Vector g = seed_grad;
  for (int l = m.num_layers() - 1; l >= 0; --l) {
    g = m.weight(l).transpose() * g;
    if (l > 0) g = g.cwiseProduct(Vector(activate_derivative(pre[static_cast<std::size_t>(l - 1)], m.activation())));
  }
  return g;
}

}  // namespace

Vector MlpClassifier::input_gradient(const Vector& x, int label) const {
  if (label < 0 || label >= num_classes()) throw std::out_of_range("input_gradient: label out of range");
  Vector g = forward(x);
  g(label) -= 1.0;
  return backprop_to_input(*this, x, g);
}

Vector MlpClassifier::logit_gradient(const Vector& x, int cls) const {
  if (cls < 0 || cls >= num_classes()) throw std::out_of_range("logit_gradient: class out of range");
  require_dim(x.size(), input_dim(), "MlpClassifier input");
  Vector e = Vector::Zero(num_classes());
  e(cls) = 1.0;
  return backprop_to_input(*this, x, e);
}

double MlpClassifier::loss(const Vector& x, int label) const {
  if (label < 0 || label >= num_classes()) throw std::out_of_range("loss: label out of range");
  const Vector z = logits(x);
  const double zmax = z.maxCoeff();
  return zmax + std::log((z.array() - zmax).exp().sum()) - z(label);
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (learning_rate < 0 || momentum < 0 || weight_decay < 0 || lr_decay_per_epoch < 0) {
    throw std::invalid_argument("TrainConfig: rates must be nonnegative");
  }
  if (noise_sigma < 0) throw std::invalid_argument("TrainConfig: noise_sigma must be nonnegative");
}

class MlpTrainer {
 public:
  // Maps a clean batch (rows) to the batch the network is trained on.
  using Augment = std::function<Matrix(const Matrix&, CounterRng&)>;

  static MlpClassifier run(MlpClassifier model, const Dataset& data, const TrainConfig& cfg,
                           const Augment& augment, std::vector<double>* epoch_losses) {
    cfg.validate();
    if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
    require_dim(data.dim(), model.input_dim(), "train: dataset dimension");
    for (int y : data.labels) {
      if (y < 0 || y >= model.num_classes()) throw std::out_of_range("train: label out of range");
    }
    const Eigen::Index n = data.size();
    const int layers = model.num_layers();
    std::vector<Matrix> vel_w;
    std::vector<Vector> vel_b;
    for (int l = 0; l < layers; ++l) {
      vel_w.push_back(Matrix::Zero(model.weight(l).rows(), model.weight(l).cols()));
      vel_b.push_back(Vector::Zero(model.bias(l).size()));
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      // Separate streams: one for shuffling, one for augmentation noise.
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      CounterRng shuffle(cfg.seed, 0x5401ULL, static_cast<std::uint64_t>(epoch));
      for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[shuffle.below(i)]);
      }
      CounterRng noise(cfg.seed, 0x9015eULL, static_cast<std::uint64_t>(epoch));
      double loss_sum = 0.0;
      for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
        const Eigen::Index bsz = std::min<Eigen::Index>(cfg.batch_size, n - start);
        Matrix batch(bsz, data.dim());
        Matrix target = Matrix::Zero(bsz, model.num_classes());
        for (Eigen::Index i = 0; i < bsz; ++i) {
          const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
          batch.row(i) = data.inputs.row(src);
          target(i, data.labels[static_cast<std::size_t>(src)]) = 1.0;
        }
        if (augment) batch = augment(batch, noise);
        loss_sum += step(model, batch, target, lr, cfg, vel_w, vel_b);
      }
      if (epoch_losses) epoch_losses->push_back(loss_sum / static_cast<double>(n));
      lr *= cfg.lr_decay_per_epoch;
    }
    return model;
  }

 private:
  // One SGD step on the batch; returns the summed loss before the update.
  static double step(MlpClassifier& m, const Matrix& batch, const Matrix& target, double lr,
                     const TrainConfig& cfg, std::vector<Matrix>& vel_w, std::vector<Vector>& vel_b) {
    const int layers = m.num_layers();
    std::vector<Matrix> acts{batch};
    std::vector<Matrix> pre;
    for (int l = 0; l < layers; ++l) {
      Matrix z = acts.back() * m.weight(l).transpose();
      z.rowwise() += m.bias(l).transpose();
      pre.push_back(z);
      if (l + 1 < layers) acts.push_back(activate(z, m.activation_));
    }
    Matrix prob = pre.back();
    softmax_rows(prob);
    const double loss = -(prob.array().max(1e-300).log() * target.array()).sum();
    const double inv_b = 1.0 / static_cast<double>(batch.rows());
    Matrix g = (prob - target) * inv_b;
    for (int l = layers - 1; l >= 0; --l) {
      const auto ul = static_cast<std::size_t>(l);
      Matrix gw = g.transpose() * acts[ul];
      Vector gb = g.colwise().sum().transpose();
      if (l > 0) g = (g * m.weight(l)).cwiseProduct(activate_derivative(pre[ul - 1], m.activation_));
      gw += cfg.weight_decay * m.weight(l);
      gb += cfg.weight_decay * m.bias(l);
      vel_w[ul] = cfg.momentum * vel_w[ul] + gw;
      vel_b[ul] = cfg.momentum * vel_b[ul] + gb;
      m.weight(l) -= lr * vel_w[ul];
      m.bias(l) -= lr * vel_b[ul];
    }
    return loss;
  }
};

MlpClassifier train(MlpClassifier model, const Dataset& data, const TrainConfig& cfg,
                    std::vector<double>* epoch_losses) {
  MlpTrainer::Augment augment;
  if (cfg.noise_sigma > 0.0) {
    const double sigma = cfg.noise_sigma;
    augment = [sigma](const Matrix& batch, CounterRng& rng) {
      Matrix out = batch;
      for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] += sigma * rng.normal();
      return out;
    };
  }
  return MlpTrainer::run(std::move(model), data, cfg, augment, epoch_losses);
}

MlpClassifier finetune_on_reconstruction(MlpClassifier model, const ProjectionBasis& basis, const Dataset& data,
                                         const TrainConfig& cfg, std::vector<double>* epoch_losses) {
  require_dim(basis.ambient_dim(), data.dim(), "finetune_on_reconstruction basis");
  const Matrix& u = basis.u();
  const double sigma = cfg.noise_sigma;
  MlpTrainer::Augment augment = [&u, sigma](const Matrix& batch, CounterRng& rng) {
    Matrix coords = batch * u;
    if (sigma > 0.0) {
      for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] += sigma * rng.normal();
    }
    return Matrix(coords * u.transpose());
  };
  return MlpTrainer::run(std::move(model), data, cfg, augment, epoch_losses);
}

double accuracy(const MlpClassifier& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<int> pred(static_cast<std::size_t>(data.size()));
  model.predict_batch(data.inputs, pred);
  Eigen::Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double projected_accuracy(const MlpClassifier& model, const ProjectionBasis& basis, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  const Matrix recon = data.inputs * basis.u() * basis.u().transpose();
  std::vector<int> pred(static_cast<std::size_t>(data.size()));
  model.predict_batch(recon, pred);
  Eigen::Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace prs
