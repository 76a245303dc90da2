#pragma once

#include <cstddef>
#include <string>

#include "feedrec/tensor.hpp"

// Fixed set of differentiable operations with hand-written backward passes.
// Backward functions accumulate into the parameter gradients and return the
// gradients of their inputs.
namespace feedrec::nn {

double sigmoid(double x);
Vector sigmoid(const Vector& x);

// Shift-invariant softmax.
Vector softmax(const Vector& logits);
// Vector-Jacobian product of softmax given its output.
Vector softmax_backward(const Vector& probs, const Vector& d_probs);

// -log p[label], with p floored at 1e-300.
double cross_entropy(const Vector& probs, std::size_t label);
Vector cross_entropy_backward(const Vector& probs, std::size_t label);
// Gradient of cross_entropy(softmax(z), label) with respect to z.
Vector softmax_cross_entropy_backward(const Vector& probs, std::size_t label);

// Binary cross-entropy of a probability p against a {0, 1} target.
double binary_cross_entropy(double p, double target);
double binary_cross_entropy_backward(double p, double target);

// Sum of squared errors (y_hat - y)^2.
double mse(const Vector& y_hat, const Vector& y);
Vector mse_backward(const Vector& y_hat, const Vector& y);

// y = W^T x + b with W of shape (in, out).
struct Dense {
  ParamId weight;
  ParamId bias;
  std::size_t in = 0;
  std::size_t out = 0;

  static Dense create(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out);

  Vector forward(const ParamStore& params, const Vector& x) const;
  Vector backward(ParamStore& params, const Vector& x, const Vector& dy) const;
};

struct RecurrentState {
  Vector h;
  Vector c;

  static RecurrentState zeros(std::size_t hidden) {
    return {Vector::Zero(static_cast<Eigen::Index>(hidden)), Vector::Zero(static_cast<Eigen::Index>(hidden))};
  }
};

struct RecurrentGrads {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

struct LstmCache {
  Vector x, h_prev, c_prev;
  Vector i, f, g, o;
  Vector c, tanh_c;
};

// Standard LSTM cell; gates stacked [input, forget, cell, output].
struct LstmCell {
  ParamId wx;    // (in, 4H)
  ParamId wh;    // (H, 4H)
  ParamId bias;  // (4H)
  std::size_t in = 0;
  std::size_t hidden = 0;

  static LstmCell create(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t hidden);

  RecurrentState forward(const ParamStore& params, const Vector& x, const RecurrentState& prev,
                         LstmCache* cache = nullptr) const;
  RecurrentGrads backward(ParamStore& params, const LstmCache& cache, const Vector& dh,
                          const Vector& dc) const;
};

struct TimeLstmCache {
  Vector x, h_prev, c_prev;
  double dwell = 0.0;
  Vector time_in;  // sigmoid(dwell * w_time)
  Vector g, p, e, a, o;
  Vector c, sig_c;
};

// LSTM with a dwell-controlled time gate:
//   g = sigmoid(x W_ig + sigmoid(d w_gg) + b_g)
//   p = sigmoid(x W_ip + h W_hp + b_p)          forget
//   e = sigmoid(x W_ie + h W_he + b_e)          input
//   c = p * c_prev + e * g * sigmoid(x W_ic + h W_hc + b_c)
//   o = sigmoid(x W_io + d w_do + h W_ho + w_co * c + b_o)
//   h = o * sigmoid(c)
struct TimeLstmCell {
  ParamId time_item, time_dwell, time_bias;
  ParamId forget_item, forget_hidden, forget_bias;
  ParamId input_item, input_hidden, input_bias;
  ParamId cell_item, cell_hidden, cell_bias;
  ParamId out_item, out_dwell, out_hidden, out_peephole, out_bias;
  std::size_t in = 0;
  std::size_t hidden = 0;

  static TimeLstmCell create(ParamStore& params, const std::string& prefix, std::size_t in,
                             std::size_t hidden);

  // Throws std::domain_error for a negative dwell.
  RecurrentState forward(const ParamStore& params, const Vector& x, double dwell,
                         const RecurrentState& prev, TimeLstmCache* cache = nullptr) const;
  RecurrentGrads backward(ParamStore& params, const TimeLstmCache& cache, const Vector& dh,
                          const Vector& dc) const;
};

}  // namespace feedrec::nn
