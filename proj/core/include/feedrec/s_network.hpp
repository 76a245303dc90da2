#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/embedding_stack.hpp"
#include "feedrec/layers.hpp"
#include "feedrec/policy.hpp"
#include "feedrec/random.hpp"

namespace feedrec::model {

struct SNetConfig {
  StackDims stack;
  std::size_t trunk_hidden = 50;
};

struct SNetPrediction {
  nn::Vector feedback;  // distribution over FeedbackType
  double dwell = 0.0;   // minutes
  double leave = 0.0;   // probability
  double return_time = 0.0;  // days
};

struct LossWeights {
  double feedback = 1.0;
  double dwell = 0.1;
  double leave = 1.0;
  double return_time = 0.1;
  double cap = 5.0;
  double gamma = 0.9;
};

// Capped cumulative importance weights min(prod pi/pi_b, cap) for each
// step of each trajectory. Throws std::invalid_argument naming the
// trajectory when a logged propensity is not positive.
std::vector<std::vector<double>> importance_weights(std::span<const Trajectory> batch, const Policy& pi,
                                                    const CandidatePool& pool, double cap);

// Environment model: its own embedding stack plus two tanh trunks,
//   x_f -> feedback softmax and dwell,  x_l -> leave sigmoid and return time.
class SNetwork {
 public:
  explicit SNetwork(const SNetConfig& cfg);

  const SNetConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const EmbeddingStack& stack() const { return stack_; }

  struct Heads {
    nn::Dense trunk_f, feedback, dwell, trunk_l, leave, return_time;
  };
  const Heads& heads() const { return heads_; }

  void init(Rng& rng, double scale = 0.1);

  SNetPrediction predict(const SessionState& state, ItemId item) const;
  SNetPrediction predict(const nn::Vector& state_vec, ItemId item) const;

  // Per-step training targets; dwell converted to minutes.
  double loss(std::span<const Trajectory> batch, std::span<const std::vector<double>> weights,
              const LossWeights& w) const;
  // Adds gradients of the same loss; returns the loss.
  double accumulate_gradients(std::span<const Trajectory> batch, std::span<const std::vector<double>> weights,
                              const LossWeights& w);

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

 private:
  double trajectory_loss(const Trajectory& t, std::span<const double> weights, const LossWeights& w,
                         double scale, nn::ParamStore* grads) const;

  SNetConfig cfg_;
  nn::ParamStore params_;
  EmbeddingStack stack_;
  Heads heads_;
};

// Importance-weighted multi-task loss under `pi`, with gradients.
double snet_loss(SNetwork& net, std::span<const Trajectory> batch, const Policy& pi, const CandidatePool& pool,
                 const LossWeights& w, bool accumulate = true);

struct PretrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_trajectories = 32;
  double lr = 0.005;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
  bool improved = false;
};

// Mini-batch descent on the importance-weighted loss with pi fixed to the
// given policy. Losses are reported over the whole dataset.
PretrainResult pretrain(SNetwork& net, std::span<const Trajectory> dataset, const Policy& pi,
                        const CandidatePool& pool, const LossWeights& w, const PretrainOptions& opt);

struct SimulationOptions {
  std::size_t max_depth = 50;
  double beta = 1.0;
  // Floor applied to the simulated return gap (days).
  double min_return_gap = 0.5;
  // Smallest dwell (seconds) for click and purchase feedback.
  double min_dwell = 1e-3;
};

struct SimulatedEpisode {
  Trajectory trajectory;  // propensities hold pi(i|s) of the acting policy
  std::vector<Transition> transitions;
};

// Rolls one session out of the S-network with `policy` choosing items.
SimulatedEpisode simulate_episode(const Policy& policy, UserId user, const SNetwork& net,
                                  const CandidatePool& pool, Rng& rng, const SimulationOptions& opt);

}  // namespace feedrec::model
