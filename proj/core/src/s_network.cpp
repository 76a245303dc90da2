#include "feedrec/s_network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "feedrec/checkpoint.hpp"
#include "feedrec/q_network.hpp"

namespace feedrec::model {

using nn::Vector;

namespace {

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

Vector concat(const Vector& a, const Vector& b) {
  Vector z(a.size() + b.size());
  z << a, b;
  return z;
}

}  // namespace

std::vector<std::vector<double>> importance_weights(std::span<const Trajectory> batch, const Policy& pi,
                                                    const CandidatePool& pool, double cap) {
  if (!(cap >= 1.0)) throw std::invalid_argument("importance cap must be at least 1");
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& t = batch[k];
    for (std::size_t s = 0; s < t.propensities.size(); ++s) {
      if (!(t.propensities[s] > 0.0)) {
        throw std::invalid_argument("trajectory " + std::to_string(k) + " (user " + std::to_string(t.user) +
                                    ") has a non-positive propensity at step " + std::to_string(s));
      }
    }
    const auto probs = pi.trajectory_probabilities(t, pool);
    std::vector<double> w(probs.size());
    double ratio = 1.0;
    for (std::size_t s = 0; s < probs.size(); ++s) {
      ratio *= probs[s] / t.propensities[s];
      w[s] = std::min(ratio, cap);
    }
    out.push_back(std::move(w));
  }
  return out;
}

SNetwork::SNetwork(const SNetConfig& cfg) : cfg_(cfg), stack_(params_, "s", cfg.stack) {
  const auto in = stack_.state_dim() + stack_.item_dim();
  const auto M = cfg.trunk_hidden;
  heads_.trunk_f = nn::Dense::create(params_, "s.trunk_f", in, M);
  heads_.feedback = nn::Dense::create(params_, "s.head.feedback", M, kFeedbackTypeCount);
  heads_.dwell = nn::Dense::create(params_, "s.head.dwell", M, 1);
  heads_.trunk_l = nn::Dense::create(params_, "s.trunk_l", in, M);
  heads_.leave = nn::Dense::create(params_, "s.head.leave", M, 1);
  heads_.return_time = nn::Dense::create(params_, "s.head.return_time", M, 1);
}

void SNetwork::init(Rng& rng, double scale) { params_.init_uniform(-scale, scale, rng); }

SNetPrediction SNetwork::predict(const Vector& state_vec, ItemId item) const {
  if (item >= cfg_.stack.n_items) throw std::out_of_range("item " + std::to_string(item) + " has no embedding");
  const Vector z = concat(state_vec, stack_.item_embedding(params_, item));
  const Vector xf = heads_.trunk_f.forward(params_, z).array().tanh();
  const Vector xl = heads_.trunk_l.forward(params_, z).array().tanh();
  SNetPrediction p;
  p.feedback = nn::softmax(heads_.feedback.forward(params_, xf));
  p.dwell = heads_.dwell.forward(params_, xf)[0];
  p.leave = nn::sigmoid(heads_.leave.forward(params_, xl)[0]);
  p.return_time = heads_.return_time.forward(params_, xl)[0];
  return p;
}

SNetPrediction SNetwork::predict(const SessionState& state, ItemId item) const {
  return predict(stack_.embed(params_, state.user(), state.history()), item);
}

double SNetwork::trajectory_loss(const Trajectory& t, std::span<const double> weights, const LossWeights& w,
                                 double scale, nn::ParamStore* grads) const {
  const bool backprop = grads != nullptr;
  const std::size_t T = t.interactions.size();
  if (weights.size() != T) throw std::invalid_argument("one importance weight per step");
  if (T == 0) return 0.0;
  // States before each step: prefixes of length 0..T-1.
  StackTrace trace;
  trace.user = t.user;
  trace.steps.assign(T - 1, StepTrace{});
  std::vector<Vector> states;
  states.reserve(T);
  StackState st = stack_.initial();
  states.push_back(stack_.state_vector(params_, t.user, st));
  for (std::size_t k = 0; k + 1 < T; ++k) {
    st = stack_.step(params_, st, t.interactions[k], backprop ? &trace.steps[k] : nullptr);
    states.push_back(stack_.state_vector(params_, t.user, st));
  }

  const auto S = static_cast<Eigen::Index>(stack_.state_dim());
  std::vector<Vector> d_states(backprop ? T : 0);
  double total = 0.0;
  double discount = 1.0;
  for (std::size_t k = 0; k < T; ++k, discount *= w.gamma) {
    const auto& x = t.interactions[k];
    const bool last = k + 1 == T;
    const double a = scale * discount * weights[k];

    const Vector z = concat(states[k], stack_.item_embedding(params_, x.item));
    const Vector xf = heads_.trunk_f.forward(params_, z).array().tanh();
    const Vector xl = heads_.trunk_l.forward(params_, z).array().tanh();
    const Vector probs = nn::softmax(heads_.feedback.forward(params_, xf));
    const double d_hat = heads_.dwell.forward(params_, xf)[0];
    const double l_logit = heads_.leave.forward(params_, xl)[0];
    const double v_hat = heads_.return_time.forward(params_, xl)[0];

    const std::size_t label = index_of(x.feedback);
    const double d_err = d_hat - x.dwell / 60.0;
    const double leave = last ? 1.0 : 0.0;
    const double v_err = v_hat - t.return_gap;
    double delta = w.feedback * nn::cross_entropy(probs, label) + w.dwell * d_err * d_err +
                   w.leave * (softplus(l_logit) - leave * l_logit);
    if (last) delta += w.return_time * v_err * v_err;
    total += a * delta;

    if (!backprop || a == 0.0) continue;
    Vector d_xf = heads_.feedback.backward(*grads, xf, a * w.feedback * nn::softmax_cross_entropy_backward(probs, label));
    d_xf += heads_.dwell.backward(*grads, xf, Vector::Constant(1, a * w.dwell * 2.0 * d_err));
    Vector d_xl = heads_.leave.backward(*grads, xl, Vector::Constant(1, a * w.leave * (nn::sigmoid(l_logit) - leave)));
    if (last) d_xl += heads_.return_time.backward(*grads, xl, Vector::Constant(1, a * w.return_time * 2.0 * v_err));
    const Vector d_pre_f = d_xf.array() * (1.0 - xf.array().square());
    const Vector d_pre_l = d_xl.array() * (1.0 - xl.array().square());
    Vector dz = heads_.trunk_f.backward(*grads, z, d_pre_f);
    dz += heads_.trunk_l.backward(*grads, z, d_pre_l);
    d_states[k] = dz.head(S);
    stack_.backward_item(*grads, x.item, dz.tail(dz.size() - S));
  }
  if (backprop) stack_.backward(*grads, trace, d_states);
  return total;
}

double SNetwork::loss(std::span<const Trajectory> batch, std::span<const std::vector<double>> weights,
                      const LossWeights& w) const {
  if (batch.size() != weights.size()) throw std::invalid_argument("one weight row per trajectory");
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) total += trajectory_loss(batch[k], weights[k], w, scale, nullptr);
  return total;
}

double SNetwork::accumulate_gradients(std::span<const Trajectory> batch, std::span<const std::vector<double>> weights,
                                      const LossWeights& w) {
  if (batch.size() != weights.size()) throw std::invalid_argument("one weight row per trajectory");
  if (batch.empty()) return 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) total += trajectory_loss(batch[k], weights[k], w, scale, &params_);
  return total;
}

void SNetwork::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  nn::save_checkpoint(dir / "snet.ckpt", params_);
  nn::save_manifest(dir / "snet.manifest", layout_manifest(cfg_.stack, cfg_.trunk_hidden));
}

void SNetwork::load(const std::filesystem::path& dir) {
  const auto m = nn::load_manifest(dir / "snet.manifest");
  if (m != layout_manifest(cfg_.stack, cfg_.trunk_hidden)) {
    throw std::runtime_error("s-network manifest in " + dir.string() + " does not match the model layout");
  }
  nn::load_checkpoint(dir / "snet.ckpt", params_);
}

double snet_loss(SNetwork& net, std::span<const Trajectory> batch, const Policy& pi, const CandidatePool& pool,
                 const LossWeights& w, bool accumulate) {
  const auto weights = importance_weights(batch, pi, pool, w.cap);
  return accumulate ? net.accumulate_gradients(batch, weights, w) : net.loss(batch, weights, w);
}

PretrainResult pretrain(SNetwork& net, std::span<const Trajectory> dataset, const Policy& pi,
                        const CandidatePool& pool, const LossWeights& w, const PretrainOptions& opt) {
  PretrainResult r;
  if (dataset.empty()) throw std::invalid_argument("pretraining needs a nonempty dataset");
  if (opt.batch_trajectories == 0) throw std::invalid_argument("batch size must be positive");
  // pi is fixed during pretraining, so the weights are computed once.
  const auto weights = importance_weights(dataset, pi, pool, w.cap);
  r.initial_loss = net.loss(dataset, weights, w);
  r.final_loss = r.initial_loss;
  if (opt.epochs == 0) return r;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(opt.seed, 3);
  std::vector<Trajectory> batch;
  std::vector<std::vector<double>> batch_w;
  for (std::size_t e = 0; e < opt.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += opt.batch_trajectories) {
      const auto end = std::min(order.size(), begin + opt.batch_trajectories);
      batch.clear();
      batch_w.clear();
      for (auto k = begin; k < end; ++k) {
        batch.push_back(dataset[order[k]]);
        batch_w.push_back(weights[order[k]]);
      }
      net.params().zero_grad();
      net.accumulate_gradients(batch, batch_w, w);
      nn::sgd_update(net.params(), opt.lr);
    }
    r.epoch_losses.push_back(net.loss(dataset, weights, w));
  }
  r.final_loss = r.epoch_losses.back();
  r.improved = r.final_loss < r.initial_loss;
  return r;
}

SimulatedEpisode simulate_episode(const Policy& policy, UserId user, const SNetwork& net,
                                  const CandidatePool& pool, Rng& rng, const SimulationOptions& opt) {
  if (opt.max_depth == 0) throw std::invalid_argument("max_depth must be positive");
  SimulatedEpisode ep;
  ep.trajectory.user = user;
  auto session = policy.start(SessionState(user, pool));
  const auto& stack = net.stack();
  StackState st = stack.initial();
  while (session->state().candidate_count() > 0) {
    const ItemId item = session->sample(rng);
    const double prop = session->probability(item);
    const auto pred = net.predict(stack.state_vector(net.params(), user, st), item);

    // Feedback is drawn from the non-leave classes only.
    double mass = 0.0;
    for (std::size_t f = 0; f < kFeedbackTypeCount; ++f) {
      if (f != index_of(FeedbackType::Leave)) mass += pred.feedback[static_cast<Eigen::Index>(f)];
    }
    double u = uniform01(rng) * mass;
    FeedbackType fb = FeedbackType::Skip;
    for (auto f : {FeedbackType::Click, FeedbackType::Purchase, FeedbackType::Skip}) {
      u -= pred.feedback[static_cast<Eigen::Index>(index_of(f))];
      if (u < 0.0) {
        fb = f;
        break;
      }
    }
    double dwell = std::max(pred.dwell, 0.0) * 60.0;
    if (fb != FeedbackType::Skip) dwell = std::max(dwell, opt.min_dwell);
    const Interaction x{item, fb, dwell};

    const bool leave_draw = bernoulli(rng, pred.leave);
    const auto next = session->state().advance(x);
    const bool leave = leave_draw || ep.trajectory.interactions.size() + 1 >= opt.max_depth ||
                       next.candidate_count() == 0;
    const double gap = leave ? std::max(pred.return_time, opt.min_return_gap) : 0.0;

    ep.transitions.push_back({session->state(), item, compute_metrics(fb, 1.0, gap, opt.beta), next, leave});
    ep.trajectory.interactions.push_back(x);
    ep.trajectory.propensities.push_back(std::min(prop, 1.0));
    if (leave) {
      ep.trajectory.return_gap = gap;
      break;
    }
    session->advance(x);
    st = stack.step(net.params(), st, x);
  }
  return ep;
}

}  // namespace feedrec::model
