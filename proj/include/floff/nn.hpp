#pragma once

#include <cstdint>
#include <vector>

#include "floff/model.hpp"

namespace floff {

// Flattened numeric examples: row i is x[i*width .. (i+1)*width).
// For sequence models a row is the whole window, time-major.
struct Examples {
  size_t width = 0;
  size_t classes = 2;
  std::vector<double> x;
  std::vector<int> y;

  size_t count() const { return y.size(); }
  std::span<const double> row(size_t i) const {
    return std::span<const double>(x.data() + i * width, width);
  }
  void push(std::span<const double> features, int label) {
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
  }
};

enum class Optimizer { Adam, SGD };

struct TrainConfig {
  uint64_t epochs = 10;
  uint64_t batch_size = 200;
  Optimizer optimizer = Optimizer::Adam;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 0;
};

struct Metrics {
  double accuracy = 0;
  double precision = 0;  // macro
  double recall = 0;     // macro
  double f1 = 0;         // macro
  double loss = 0;
  std::vector<std::vector<uint64_t>> confusion;  // [actual][predicted]
};

struct TrainResult {
  ModelWeights weights;
  Metrics metrics;  // measured on the training set after the final update
};

// Class probabilities for one example row (softmax output, sums to 1).
std::vector<double> forward_probs(const ModelWeights& w, std::span<const double> input);

TrainResult train(const ModelWeights& start, const Examples& train_set, const TrainConfig& cfg);

Metrics evaluate(const ModelWeights& w, const Examples& test_set);

Metrics metrics_from_confusion(const std::vector<std::vector<uint64_t>>& confusion, double loss);

// Max over trainable parameters of |ga-gn| / max(1e-6, |ga|+|gn|) where gn is
// a central finite difference of the batch cross-entropy loss. The absolute
// floor absorbs finite-difference rounding noise on zero gradients.
double gradient_check(const ModelWeights& w, const Examples& batch, double fd_step = 1e-5);

// argmax with ties resolved to the lowest class index
int argmax_class(std::span<const double> probs);

}  // namespace floff
