#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "curvetransfer/matrix.hpp"

namespace curvetransfer::seqnet {

/// Default number of LSTM hidden units.
inline constexpr std::size_t kDefaultHiddenDim = 32;
/// Default number of consecutive points fed to the network per prediction.
inline constexpr std::size_t kDefaultSequenceLength = 5;

// Single-layer LSTM with a forget gate followed by a linear read-out of the
// last hidden state:
//
//   f = sigmoid(W_fh h' + W_fx x + b_f)      i = sigmoid(W_ih h' + W_ix x + b_i)
//   g = tanh(W_ch h' + W_cx x + b_c)         o = sigmoid(W_oh h' + W_ox x + b_o)
//   c = f * c' + i * g                       h = o * tanh(c)
//   y = W_out h_n + b_out
//
// where h', c' are the previous step's states and * is elementwise.
struct ModelParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  Matrix w_fh, w_fx, w_ih, w_ix, w_ch, w_cx, w_oh, w_ox;
  Vector b_f, b_i, b_c, b_o;
  Matrix w_out;  // 1 x hidden_dim
  double b_out = 0.0;

  /// All-zero parameters of the given shape.
  static ModelParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  /// Calls fn(name, values) for every tensor in a fixed order.
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;
  /// True when every tensor has the documented shape.
  bool shapes_valid() const;
  bool same_shape(const ModelParams& other) const;

  bool operator==(const ModelParams&) const = default;

 private:
  template <class Self, class Fn>
  static void visit(Self& self, Fn& fn) {
    fn(std::string_view("W_fh"), self.w_fh.values());
    fn(std::string_view("W_fx"), self.w_fx.values());
    fn(std::string_view("W_ih"), self.w_ih.values());
    fn(std::string_view("W_ix"), self.w_ix.values());
    fn(std::string_view("W_ch"), self.w_ch.values());
    fn(std::string_view("W_cx"), self.w_cx.values());
    fn(std::string_view("W_oh"), self.w_oh.values());
    fn(std::string_view("W_ox"), self.w_ox.values());
    fn(std::string_view("b_f"), std::span(self.b_f));
    fn(std::string_view("b_i"), std::span(self.b_i));
    fn(std::string_view("b_c"), std::span(self.b_c));
    fn(std::string_view("b_o"), std::span(self.b_o));
    fn(std::string_view("W_out"), self.w_out.values());
    fn(std::string_view("b_out"), std::span(&self.b_out, 1));
  }
};

using Gradients = ModelParams;

struct CellState {
  Vector h;
  Vector c;

  static CellState zeros(std::size_t hidden_dim) { return {Vector(hidden_dim, 0.0), Vector(hidden_dim, 0.0)}; }
};

/// Activations retained from one forward step for backpropagation.
struct StepCache {
  Vector x;
  Vector h_prev, c_prev;
  Vector f, i, g, o;  // g is the candidate cell state
  Vector c, tanh_c, h;
};

struct CellStep {
  CellState next;
  StepCache cache;
};

struct ForwardResult {
  double prediction = 0.0;
  std::vector<StepCache> steps;
};

enum class Optimizer { sgd, adam };

std::string_view to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t epochs = 100;
  std::size_t sequence_length = kDefaultSequenceLength;
  std::size_t hidden_dim = kDefaultHiddenDim;
  Optimizer optimizer = Optimizer::adam;
  std::uint64_t seed = 0;

  /// Throws DataError when a field is out of range.
  void validate() const;
};

struct AdamState {
  std::uint64_t step = 0;
  ModelParams m;
  ModelParams v;

  bool operator==(const AdamState&) const = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)) per matrix,
/// zero biases. Deterministic in `seed`.
ModelParams init_params(std::uint64_t seed, std::size_t input_dim, std::size_t hidden_dim);

CellStep lstm_cell_forward(const ModelParams& params, std::span<const double> x, const CellState& prev);

/// Runs the cell over every row of `window` from a zero state and applies the
/// output layer to the final hidden state.
ForwardResult forward_sequence(const ModelParams& params, const Matrix& window);

/// Prediction only; skips building the cache.
double predict(const ModelParams& params, const Matrix& window);

double loss_mse(std::span<const double> predictions, std::span<const double> targets);

/// Exact gradient of the squared error (prediction - target)^2 of one window
/// with respect to every parameter, by backpropagation through time.
Gradients backward(const ModelParams& params, const ForwardResult& forward, const Matrix& window, double target);

using BackwardFn = std::function<Gradients(const ModelParams&, const Matrix&, double)>;

/// Largest relative disagreement between `backward` and central finite
/// differences with step `delta`, over every parameter entry. Relative error
/// uses max(|analytic|, |numeric|, 1e-8) as denominator.
double gradient_check(const ModelParams& params, const Matrix& window, double target, double delta = 1e-5);
/// Same check against a caller-supplied gradient routine.
double gradient_check(const ModelParams& params, const Matrix& window, double target, const BackwardFn& gradient,
                      double delta = 1e-5);

/// One parameter update. sgd: theta -= lr * grad. adam: bias-corrected
/// first/second moment update (the state is created on first use).
void optimizer_step(ModelParams& params, const Gradients& grads, const TrainConfig& config, AdamState& state);

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_history;  // mean per-window loss of each epoch
  AdamState optimizer_state;         // empty for sgd
};

/// Per-window updates, visiting windows in a freshly shuffled order each
/// epoch. Throws DivergenceError if an epoch's loss is not finite.
TrainResult train(ModelParams params, std::span<const Matrix> windows, std::span<const double> targets,
                  const TrainConfig& config);

/// Mean squared error of `params` over a supervised set, no updates.
double evaluate_loss(const ModelParams& params, std::span<const Matrix> windows, std::span<const double> targets);

}  // namespace curvetransfer::seqnet
