#include "feedrec/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feedrec::nn {
namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

void check_size(const Vector& v, std::size_t n, const char* what) {
  if (static_cast<std::size_t>(v.size()) != n) {
    throw std::invalid_argument(std::string("shape mismatch: ") + what + " has size " +
                                std::to_string(v.size()) + ", expected " + std::to_string(n));
  }
}

Vector sigmoid_grad(const Vector& s) { return s.array() * (1.0 - s.array()); }

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vector sigmoid(const Vector& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }

Vector softmax(const Vector& logits) {
  const double shift = logits.maxCoeff();
  Vector e = (logits.array() - shift).exp();
  return e / e.sum();
}

Vector softmax_backward(const Vector& probs, const Vector& d_probs) {
  const double dot = probs.dot(d_probs);
  return probs.array() * (d_probs.array() - dot);
}

double cross_entropy(const Vector& probs, std::size_t label) {
  return -std::log(std::max(probs(idx(label)), 1e-300));
}

Vector cross_entropy_backward(const Vector& probs, std::size_t label) {
  Vector d = Vector::Zero(probs.size());
  d(idx(label)) = -1.0 / std::max(probs(idx(label)), 1e-300);
  return d;
}

Vector softmax_cross_entropy_backward(const Vector& probs, std::size_t label) {
  Vector d = probs;
  d(idx(label)) -= 1.0;
  return d;
}

double binary_cross_entropy(double p, double target) {
  const double q = std::clamp(p, 1e-300, 1.0 - 1e-16);
  return -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
}

double binary_cross_entropy_backward(double p, double target) {
  const double q = std::clamp(p, 1e-300, 1.0 - 1e-16);
  return -target / q + (1.0 - target) / (1.0 - q);
}

double mse(const Vector& y_hat, const Vector& y) { return (y_hat - y).squaredNorm(); }

Vector mse_backward(const Vector& y_hat, const Vector& y) { return 2.0 * (y_hat - y); }

Dense Dense::create(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out) {
  Dense d;
  d.weight = params.add(prefix + ".weight", {in, out});
  d.bias = params.add(prefix + ".bias", {out});
  d.in = in;
  d.out = out;
  return d;
}

Vector Dense::forward(const ParamStore& params, const Vector& x) const {
  check_size(x, in, "dense input");
  return params.matrix(weight).transpose() * x + params.vector(bias);
}

Vector Dense::backward(ParamStore& params, const Vector& x, const Vector& dy) const {
  check_size(x, in, "dense input");
  check_size(dy, out, "dense output gradient");
  params.grad_matrix(weight).noalias() += x * dy.transpose();
  params.grad_vector(bias) += dy;
  return params.matrix(weight) * dy;
}

LstmCell LstmCell::create(ParamStore& params, const std::string& prefix, std::size_t in,
                          std::size_t hidden) {
  LstmCell cell;
  cell.wx = params.add(prefix + ".input_weight", {in, 4 * hidden});
  cell.wh = params.add(prefix + ".hidden_weight", {hidden, 4 * hidden});
  cell.bias = params.add(prefix + ".bias", {4 * hidden});
  cell.in = in;
  cell.hidden = hidden;
  return cell;
}

RecurrentState LstmCell::forward(const ParamStore& params, const Vector& x, const RecurrentState& prev,
                                 LstmCache* cache) const {
  check_size(x, in, "lstm input");
  check_size(prev.h, hidden, "lstm hidden state");
  check_size(prev.c, hidden, "lstm cell state");
  const auto H = idx(hidden);
  Vector z = params.vector(bias);
  z.noalias() += params.matrix(wx).transpose() * x;
  z.noalias() += params.matrix(wh).transpose() * prev.h;
  Vector i = sigmoid(Vector(z.segment(0, H)));
  Vector f = sigmoid(Vector(z.segment(H, H)));
  Vector g = z.segment(2 * H, H).array().tanh();
  Vector o = sigmoid(Vector(z.segment(3 * H, H)));
  RecurrentState next;
  next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(g);
  Vector tanh_c = next.c.array().tanh();
  next.h = o.cwiseProduct(tanh_c);
  if (cache) {
    *cache = LstmCache{x, prev.h, prev.c, std::move(i), std::move(f), std::move(g), std::move(o),
                       next.c, std::move(tanh_c)};
  }
  return next;
}

RecurrentGrads LstmCell::backward(ParamStore& params, const LstmCache& k, const Vector& dh,
                                  const Vector& dc) const {
  const auto H = idx(hidden);
  const Vector d_o = dh.cwiseProduct(k.tanh_c);
  const Vector dc_total =
      dc + dh.cwiseProduct(k.o).cwiseProduct((1.0 - k.tanh_c.array().square()).matrix());
  Vector dz(4 * H);
  dz.segment(0, H) = dc_total.cwiseProduct(k.g).cwiseProduct(sigmoid_grad(k.i));
  dz.segment(H, H) = dc_total.cwiseProduct(k.c_prev).cwiseProduct(sigmoid_grad(k.f));
  dz.segment(2 * H, H) = dc_total.cwiseProduct(k.i).cwiseProduct((1.0 - k.g.array().square()).matrix());
  dz.segment(3 * H, H) = d_o.cwiseProduct(sigmoid_grad(k.o));

  params.grad_matrix(wx).noalias() += k.x * dz.transpose();
  params.grad_matrix(wh).noalias() += k.h_prev * dz.transpose();
  params.grad_vector(bias) += dz;

  RecurrentGrads g;
  g.dx = params.matrix(wx) * dz;
  g.dh_prev = params.matrix(wh) * dz;
  g.dc_prev = dc_total.cwiseProduct(k.f);
  return g;
}

TimeLstmCell TimeLstmCell::create(ParamStore& params, const std::string& prefix, std::size_t in,
                                  std::size_t hidden) {
  TimeLstmCell c;
  c.in = in;
  c.hidden = hidden;
  c.time_item = params.add(prefix + ".time_gate.item", {in, hidden});
  c.time_dwell = params.add(prefix + ".time_gate.dwell", {hidden});
  c.time_bias = params.add(prefix + ".time_gate.bias", {hidden});
  c.forget_item = params.add(prefix + ".forget.item", {in, hidden});
  c.forget_hidden = params.add(prefix + ".forget.hidden", {hidden, hidden});
  c.forget_bias = params.add(prefix + ".forget.bias", {hidden});
  c.input_item = params.add(prefix + ".input.item", {in, hidden});
  c.input_hidden = params.add(prefix + ".input.hidden", {hidden, hidden});
  c.input_bias = params.add(prefix + ".input.bias", {hidden});
  c.cell_item = params.add(prefix + ".cell.item", {in, hidden});
  c.cell_hidden = params.add(prefix + ".cell.hidden", {hidden, hidden});
  c.cell_bias = params.add(prefix + ".cell.bias", {hidden});
  c.out_item = params.add(prefix + ".output.item", {in, hidden});
  c.out_dwell = params.add(prefix + ".output.dwell", {hidden});
  c.out_hidden = params.add(prefix + ".output.hidden", {hidden, hidden});
  c.out_peephole = params.add(prefix + ".output.peephole", {hidden});
  c.out_bias = params.add(prefix + ".output.bias", {hidden});
  return c;
}

RecurrentState TimeLstmCell::forward(const ParamStore& params, const Vector& x, double dwell,
                                     const RecurrentState& prev, TimeLstmCache* cache) const {
  if (!(dwell >= 0.0)) throw std::domain_error("time-lstm dwell must be nonnegative");
  check_size(x, in, "time-lstm input");
  check_size(prev.h, hidden, "time-lstm hidden state");
  check_size(prev.c, hidden, "time-lstm cell state");
  auto gate = [&](ParamId wi, ParamId wh, ParamId b) {
    Vector z = params.vector(b);
    z.noalias() += params.matrix(wi).transpose() * x;
    z.noalias() += params.matrix(wh).transpose() * prev.h;
    return sigmoid(z);
  };
  Vector time_in = sigmoid(Vector(dwell * params.vector(time_dwell)));
  Vector zg = params.vector(time_bias) + time_in;
  zg.noalias() += params.matrix(time_item).transpose() * x;
  Vector g = sigmoid(zg);
  Vector p = gate(forget_item, forget_hidden, forget_bias);
  Vector e = gate(input_item, input_hidden, input_bias);
  Vector a = gate(cell_item, cell_hidden, cell_bias);

  RecurrentState next;
  next.c = p.cwiseProduct(prev.c) + e.cwiseProduct(g).cwiseProduct(a);
  Vector zo = params.vector(out_bias) + dwell * params.vector(out_dwell) +
              params.vector(out_peephole).cwiseProduct(next.c);
  zo.noalias() += params.matrix(out_item).transpose() * x;
  zo.noalias() += params.matrix(out_hidden).transpose() * prev.h;
  Vector o = sigmoid(zo);
  Vector sig_c = sigmoid(next.c);
  next.h = o.cwiseProduct(sig_c);
  if (cache) {
    cache->x = x;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->dwell = dwell;
    cache->time_in = std::move(time_in);
    cache->g = std::move(g);
    cache->p = std::move(p);
    cache->e = std::move(e);
    cache->a = std::move(a);
    cache->o = std::move(o);
    cache->c = next.c;
    cache->sig_c = std::move(sig_c);
  }
  return next;
}

RecurrentGrads TimeLstmCell::backward(ParamStore& params, const TimeLstmCache& k, const Vector& dh,
                                      const Vector& dc) const {
  const Vector d_o = dh.cwiseProduct(k.sig_c);
  Vector dc_total = dc + dh.cwiseProduct(k.o).cwiseProduct(sigmoid_grad(k.sig_c));
  const Vector dz_o = d_o.cwiseProduct(sigmoid_grad(k.o));
  dc_total += dz_o.cwiseProduct(params.vector(out_peephole));

  params.grad_vector(out_peephole) += dz_o.cwiseProduct(k.c);
  params.grad_vector(out_dwell) += k.dwell * dz_o;
  params.grad_vector(out_bias) += dz_o;
  params.grad_matrix(out_item).noalias() += k.x * dz_o.transpose();
  params.grad_matrix(out_hidden).noalias() += k.h_prev * dz_o.transpose();

  const Vector dz_p = dc_total.cwiseProduct(k.c_prev).cwiseProduct(sigmoid_grad(k.p));
  const Vector dz_e = dc_total.cwiseProduct(k.g).cwiseProduct(k.a).cwiseProduct(sigmoid_grad(k.e));
  const Vector dz_a = dc_total.cwiseProduct(k.e).cwiseProduct(k.g).cwiseProduct(sigmoid_grad(k.a));
  const Vector dz_g = dc_total.cwiseProduct(k.e).cwiseProduct(k.a).cwiseProduct(sigmoid_grad(k.g));
  const Vector dz_time = dz_g.cwiseProduct(sigmoid_grad(k.time_in));

  params.grad_matrix(time_item).noalias() += k.x * dz_g.transpose();
  params.grad_vector(time_bias) += dz_g;
  params.grad_vector(time_dwell) += k.dwell * dz_time;

  auto accumulate = [&](ParamId wi, ParamId wh, ParamId b, const Vector& dz) {
    params.grad_matrix(wi).noalias() += k.x * dz.transpose();
    params.grad_matrix(wh).noalias() += k.h_prev * dz.transpose();
    params.grad_vector(b) += dz;
  };
  accumulate(forget_item, forget_hidden, forget_bias, dz_p);
  accumulate(input_item, input_hidden, input_bias, dz_e);
  accumulate(cell_item, cell_hidden, cell_bias, dz_a);

  RecurrentGrads g;
  g.dx = params.matrix(time_item) * dz_g + params.matrix(forget_item) * dz_p +
         params.matrix(input_item) * dz_e + params.matrix(cell_item) * dz_a +
         params.matrix(out_item) * dz_o;
  g.dh_prev = params.matrix(forget_hidden) * dz_p + params.matrix(input_hidden) * dz_e +
              params.matrix(cell_hidden) * dz_a + params.matrix(out_hidden) * dz_o;
  g.dc_prev = dc_total.cwiseProduct(k.p);
  return g;
}

}  // namespace feedrec::nn
