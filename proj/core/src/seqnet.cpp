#include "curvetransfer/seqnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "curvetransfer/error.hpp"

namespace curvetransfer::seqnet {

namespace {

double sigmoid(double z) {
  // Stable for large |z|.
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// out = Wh * h + Wx * x + b
void affine(const Matrix& wh, const Matrix& wx, const Vector& b, std::span<const double> h,
            std::span<const double> x, Vector& out) {
  const std::size_t rows = b.size();
  out.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    const auto wh_row = wh.row(r);
    for (std::size_t k = 0; k < h.size(); ++k) acc += wh_row[k] * h[k];
    const auto wx_row = wx.row(r);
    for (std::size_t k = 0; k < x.size(); ++k) acc += wx_row[k] * x[k];
    out[r] = acc;
  }
}

// m += outer(a, b)
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    auto row = m.row(r);
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

// out += W^T v
void add_transposed(const Matrix& w, std::span<const double> v, Vector& out) {
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double vr = v[r];
    const auto row = w.row(r);
    for (std::size_t c = 0; c < w.cols(); ++c) out[c] += row[c] * vr;
  }
}

void check_input(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.input_dim)
    throw DataError("LSTM input has " + std::to_string(x.size()) + " features, model expects " +
                    std::to_string(params.input_dim));
}

void check_window(const ModelParams& params, const Matrix& window) {
  if (window.rows() == 0) throw DataError("empty input window");
  if (window.cols() != params.input_dim)
    throw DataError("window has " + std::to_string(window.cols()) + " features, model expects " +
                    std::to_string(params.input_dim));
}

// Squared error evaluated in extended precision. Finite differences at
// delta = 1e-5 otherwise carry ~1e-11 of rounding noise, which swamps
// gradient entries near the 1e-8 denominator floor.
long double loss_of(const ModelParams& p, const Matrix& window, double target) {
  using real = long double;
  const std::size_t hd = p.hidden_dim, in = p.input_dim;
  std::vector<real> h(hd, 0.0L), c(hd, 0.0L), h_next(hd);
  const auto gate = [&](const Matrix& wh, const Matrix& wx, const Vector& b, std::size_t j, std::size_t t) {
    real z = b[j];
    for (std::size_t k = 0; k < hd; ++k) z += static_cast<real>(wh(j, k)) * h[k];
    for (std::size_t k = 0; k < in; ++k) z += static_cast<real>(wx(j, k)) * window(t, k);
    return z;
  };
  const auto sig = [](real z) { return 1.0L / (1.0L + std::exp(-z)); };
  for (std::size_t t = 0; t < window.rows(); ++t) {
    for (std::size_t j = 0; j < hd; ++j) {
      const real f = sig(gate(p.w_fh, p.w_fx, p.b_f, j, t));
      const real i = sig(gate(p.w_ih, p.w_ix, p.b_i, j, t));
      const real g = std::tanh(gate(p.w_ch, p.w_cx, p.b_c, j, t));
      const real o = sig(gate(p.w_oh, p.w_ox, p.b_o, j, t));
      c[j] = f * c[j] + i * g;
      h_next[j] = o * std::tanh(c[j]);
    }
    h.swap(h_next);
  }
  real y = p.b_out;
  for (std::size_t k = 0; k < hd; ++k) y += static_cast<real>(p.w_out(0, k)) * h[k];
  const real e = y - target;
  return e * e;
}

}  // namespace

ModelParams ModelParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  ModelParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (Matrix* m : {&p.w_fh, &p.w_ih, &p.w_ch, &p.w_oh}) *m = Matrix(hidden_dim, hidden_dim);
  for (Matrix* m : {&p.w_fx, &p.w_ix, &p.w_cx, &p.w_ox}) *m = Matrix(hidden_dim, input_dim);
  for (Vector* b : {&p.b_f, &p.b_i, &p.b_c, &p.b_o}) b->assign(hidden_dim, 0.0);
  p.w_out = Matrix(1, hidden_dim);
  p.b_out = 0.0;
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each_tensor([&](std::string_view, std::span<const double> v) { n += v.size(); });
  return n;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](std::string_view, std::span<const double> v) {
    ok = ok && std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  });
  return ok;
}

bool ModelParams::shapes_valid() const {
  const auto hh = [&](const Matrix& m) { return m.rows() == hidden_dim && m.cols() == hidden_dim; };
  const auto hx = [&](const Matrix& m) { return m.rows() == hidden_dim && m.cols() == input_dim; };
  return hh(w_fh) && hh(w_ih) && hh(w_ch) && hh(w_oh) && hx(w_fx) && hx(w_ix) && hx(w_cx) && hx(w_ox) &&
         b_f.size() == hidden_dim && b_i.size() == hidden_dim && b_c.size() == hidden_dim &&
         b_o.size() == hidden_dim && w_out.rows() == 1 && w_out.cols() == hidden_dim;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  return input_dim == other.input_dim && hidden_dim == other.hidden_dim && shapes_valid() && other.shapes_valid();
}

std::string_view to_string(Optimizer opt) { return opt == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view text) {
  if (text == "sgd") return Optimizer::sgd;
  if (text == "adam") return Optimizer::adam;
  throw DataError("unknown optimizer '" + std::string(text) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DataError("learning rate must be > 0");
  if (epochs < 1) throw DataError("epochs must be >= 1");
  if (sequence_length < 1) throw DataError("sequence length must be >= 1");
  if (hidden_dim < 1) throw DataError("hidden dimension must be >= 1");
}

ModelParams init_params(std::uint64_t seed, std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1) throw DataError("init_params: dimensions must be >= 1");
  ModelParams p = ModelParams::zeros(input_dim, hidden_dim);
  std::mt19937_64 rng(seed);
  const auto fill = [&](Matrix& m, std::size_t fan_in, std::size_t fan_out) {
    const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-s, s);
    for (double& v : m.values()) v = dist(rng);
  };
  for (Matrix* m : {&p.w_fh, &p.w_fx, &p.w_ih, &p.w_ix, &p.w_ch, &p.w_cx, &p.w_oh, &p.w_ox})
    fill(*m, m->cols(), m->rows());
  fill(p.w_out, hidden_dim, 1);
  return p;
}

CellStep lstm_cell_forward(const ModelParams& params, std::span<const double> x, const CellState& prev) {
  check_input(params, x);
  const std::size_t h_dim = params.hidden_dim;
  if (prev.h.size() != h_dim || prev.c.size() != h_dim) throw DataError("LSTM state has wrong hidden size");

  CellStep step;
  StepCache& s = step.cache;
  s.x.assign(x.begin(), x.end());
  s.h_prev = prev.h;
  s.c_prev = prev.c;
  affine(params.w_fh, params.w_fx, params.b_f, prev.h, x, s.f);
  affine(params.w_ih, params.w_ix, params.b_i, prev.h, x, s.i);
  affine(params.w_ch, params.w_cx, params.b_c, prev.h, x, s.g);
  affine(params.w_oh, params.w_ox, params.b_o, prev.h, x, s.o);
  s.c.resize(h_dim);
  s.tanh_c.resize(h_dim);
  s.h.resize(h_dim);
  for (std::size_t j = 0; j < h_dim; ++j) {
    s.f[j] = sigmoid(s.f[j]);
    s.i[j] = sigmoid(s.i[j]);
    s.g[j] = std::tanh(s.g[j]);
    s.o[j] = sigmoid(s.o[j]);
    s.c[j] = s.f[j] * prev.c[j] + s.i[j] * s.g[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.o[j] * s.tanh_c[j];
  }
  step.next.h = s.h;
  step.next.c = s.c;
  return step;
}

ForwardResult forward_sequence(const ModelParams& params, const Matrix& window) {
  check_window(params, window);
  ForwardResult result;
  result.steps.reserve(window.rows());
  CellState state = CellState::zeros(params.hidden_dim);
  for (std::size_t t = 0; t < window.rows(); ++t) {
    auto step = lstm_cell_forward(params, window.row(t), state);
    state = std::move(step.next);
    result.steps.push_back(std::move(step.cache));
  }
  const auto w = params.w_out.row(0);
  result.prediction = params.b_out + std::inner_product(w.begin(), w.end(), state.h.begin(), 0.0);
  return result;
}

double predict(const ModelParams& params, const Matrix& window) {
  check_window(params, window);
  const std::size_t h_dim = params.hidden_dim;
  Vector h(h_dim, 0.0), c(h_dim, 0.0), f, i, g, o;
  for (std::size_t t = 0; t < window.rows(); ++t) {
    const auto x = window.row(t);
    affine(params.w_fh, params.w_fx, params.b_f, h, x, f);
    affine(params.w_ih, params.w_ix, params.b_i, h, x, i);
    affine(params.w_ch, params.w_cx, params.b_c, h, x, g);
    affine(params.w_oh, params.w_ox, params.b_o, h, x, o);
    for (std::size_t j = 0; j < h_dim; ++j) {
      c[j] = sigmoid(f[j]) * c[j] + sigmoid(i[j]) * std::tanh(g[j]);
      h[j] = sigmoid(o[j]) * std::tanh(c[j]);
    }
  }
  const auto w = params.w_out.row(0);
  return params.b_out + std::inner_product(w.begin(), w.end(), h.begin(), 0.0);
}

double loss_mse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw DataError("loss_mse: length mismatch");
  if (predictions.empty()) throw DataError("loss_mse: empty input");
  double sum = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = predictions[k] - targets[k];
    sum += e * e;
  }
  return sum / static_cast<double>(predictions.size());
}

Gradients backward(const ModelParams& params, const ForwardResult& forward, const Matrix& window, double target) {
  check_window(params, window);
  if (forward.steps.size() != window.rows())
    throw DataError("backward: cache has " + std::to_string(forward.steps.size()) + " steps, window has " +
                    std::to_string(window.rows()));

  const std::size_t h_dim = params.hidden_dim;
  Gradients grad = ModelParams::zeros(params.input_dim, h_dim);
  const double d_pred = 2.0 * (forward.prediction - target);

  const StepCache& last = forward.steps.back();
  grad.b_out = d_pred;
  Vector dh(h_dim);
  for (std::size_t j = 0; j < h_dim; ++j) {
    grad.w_out(0, j) = d_pred * last.h[j];
    dh[j] = d_pred * params.w_out(0, j);
  }

  Vector dc(h_dim, 0.0);
  Vector da_f(h_dim), da_i(h_dim), da_g(h_dim), da_o(h_dim), dh_prev(h_dim);
  for (std::size_t t = forward.steps.size(); t-- > 0;) {
    const StepCache& s = forward.steps[t];
    for (std::size_t j = 0; j < h_dim; ++j) {
      const double d_o = dh[j] * s.tanh_c[j];
      const double d_c = dc[j] + dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
      da_f[j] = d_c * s.c_prev[j] * s.f[j] * (1.0 - s.f[j]);
      da_i[j] = d_c * s.g[j] * s.i[j] * (1.0 - s.i[j]);
      da_g[j] = d_c * s.i[j] * (1.0 - s.g[j] * s.g[j]);
      da_o[j] = d_o * s.o[j] * (1.0 - s.o[j]);
      dc[j] = d_c * s.f[j];
    }
    add_outer(grad.w_fh, da_f, s.h_prev);
    add_outer(grad.w_ih, da_i, s.h_prev);
    add_outer(grad.w_ch, da_g, s.h_prev);
    add_outer(grad.w_oh, da_o, s.h_prev);
    add_outer(grad.w_fx, da_f, s.x);
    add_outer(grad.w_ix, da_i, s.x);
    add_outer(grad.w_cx, da_g, s.x);
    add_outer(grad.w_ox, da_o, s.x);
    for (std::size_t j = 0; j < h_dim; ++j) {
      grad.b_f[j] += da_f[j];
      grad.b_i[j] += da_i[j];
      grad.b_c[j] += da_g[j];
      grad.b_o[j] += da_o[j];
    }
    if (t == 0) break;
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    add_transposed(params.w_fh, da_f, dh_prev);
    add_transposed(params.w_ih, da_i, dh_prev);
    add_transposed(params.w_ch, da_g, dh_prev);
    add_transposed(params.w_oh, da_o, dh_prev);
    std::swap(dh, dh_prev);
  }
  return grad;
}

double gradient_check(const ModelParams& params, const Matrix& window, double target, const BackwardFn& gradient,
                      double delta) {
  const Gradients analytic = gradient(params, window, target);
  if (!analytic.same_shape(params)) throw DataError("gradient_check: gradient shape mismatch");

  ModelParams probe = params;
  std::vector<std::span<double>> probe_tensors;
  probe.for_each_tensor([&](std::string_view, std::span<double> v) { probe_tensors.push_back(v); });
  std::vector<std::span<const double>> grad_tensors;
  analytic.for_each_tensor([&](std::string_view, std::span<const double> v) { grad_tensors.push_back(v); });

  double worst = 0.0;
  for (std::size_t t = 0; t < probe_tensors.size(); ++t) {
    for (std::size_t k = 0; k < probe_tensors[t].size(); ++k) {
      double& entry = probe_tensors[t][k];
      const double saved = entry;
      entry = saved + delta;
      const long double up = loss_of(probe, window, target);
      entry = saved - delta;
      const long double down = loss_of(probe, window, target);
      entry = saved;
      // The step actually taken, after rounding saved +- delta to double.
      const long double step = static_cast<long double>(saved + delta) - static_cast<long double>(saved - delta);
      const double numeric = static_cast<double>((up - down) / step);
      const double g = grad_tensors[t][k];
      const double denom = std::max({std::abs(g), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(g - numeric) / denom);
    }
  }
  return worst;
}

double gradient_check(const ModelParams& params, const Matrix& window, double target, double delta) {
  return gradient_check(
      params, window, target,
      [](const ModelParams& p, const Matrix& w, double y) { return backward(p, forward_sequence(p, w), w, y); },
      delta);
}

void optimizer_step(ModelParams& params, const Gradients& grads, const TrainConfig& config, AdamState& state) {
  if (!grads.same_shape(params)) throw DataError("optimizer_step: gradient shape does not match parameters");

  std::vector<std::span<double>> theta;
  params.for_each_tensor([&](std::string_view, std::span<double> v) { theta.push_back(v); });
  std::vector<std::span<const double>> g;
  grads.for_each_tensor([&](std::string_view, std::span<const double> v) { g.push_back(v); });
  const double lr = config.learning_rate;

  if (config.optimizer == Optimizer::sgd) {
    for (std::size_t t = 0; t < theta.size(); ++t)
      for (std::size_t k = 0; k < theta[t].size(); ++k) theta[t][k] -= lr * g[t][k];
    return;
  }

  if (state.step == 0 || !state.m.same_shape(params)) {
    state.step = 0;
    state.m = ModelParams::zeros(params.input_dim, params.hidden_dim);
    state.v = ModelParams::zeros(params.input_dim, params.hidden_dim);
  }
  ++state.step;
  std::vector<std::span<double>> m;
  state.m.for_each_tensor([&](std::string_view, std::span<double> v) { m.push_back(v); });
  std::vector<std::span<double>> v;
  state.v.for_each_tensor([&](std::string_view, std::span<double> x) { v.push_back(x); });
  const double step = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(kAdamBeta1, step);
  const double bias2 = 1.0 - std::pow(kAdamBeta2, step);
  for (std::size_t t = 0; t < theta.size(); ++t) {
    for (std::size_t k = 0; k < theta[t].size(); ++k) {
      const double gk = g[t][k];
      m[t][k] = kAdamBeta1 * m[t][k] + (1.0 - kAdamBeta1) * gk;
      v[t][k] = kAdamBeta2 * v[t][k] + (1.0 - kAdamBeta2) * gk * gk;
      const double m_hat = m[t][k] / bias1;
      const double v_hat = v[t][k] / bias2;
      theta[t][k] -= lr * m_hat / (std::sqrt(v_hat) + kAdamEpsilon);
    }
  }
}

TrainResult train(ModelParams params, std::span<const Matrix> windows, std::span<const double> targets,
                  const TrainConfig& config) {
  config.validate();
  if (windows.size() != targets.size()) throw DataError("train: windows and targets differ in length");
  if (windows.empty()) throw DataError("train: empty supervised set");

  TrainResult result;
  result.loss_history.reserve(config.epochs);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t idx : order) {
      const auto fwd = forward_sequence(params, windows[idx]);
      const double err = fwd.prediction - targets[idx];
      total += err * err;
      const auto grads = backward(params, fwd, windows[idx], targets[idx]);
      optimizer_step(params, grads, config, adam);
    }
    const double epoch_loss = total / static_cast<double>(windows.size());
    if (!std::isfinite(epoch_loss))
      throw DivergenceError("training diverged: non-finite loss at epoch " + std::to_string(epoch), epoch);
    result.loss_history.push_back(epoch_loss);
  }
  result.params = std::move(params);
  result.optimizer_state = std::move(adam);
  return result;
}

double evaluate_loss(const ModelParams& params, std::span<const Matrix> windows, std::span<const double> targets) {
  if (windows.size() != targets.size()) throw DataError("evaluate_loss: windows and targets differ in length");
  if (windows.empty()) throw DataError("evaluate_loss: empty supervised set");
  double total = 0.0;
  for (std::size_t k = 0; k < windows.size(); ++k) {
    const double e = predict(params, windows[k]) - targets[k];
    total += e * e;
  }
  return total / static_cast<double>(windows.size());
}

}  // namespace curvetransfer::seqnet
