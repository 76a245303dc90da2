#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "feedrec/domain.hpp"
#include "feedrec/q_network.hpp"
#include "feedrec/s_network.hpp"

namespace feedrec::train {

struct TrainConfig {
  std::size_t iterations = 200;
  std::size_t logged_per_iteration = 256;  // N
  // Simulated transitions added per logged transition.
  double sim_ratio = 1.0;
  bool simulate = true;
  std::size_t q_steps = 4;  // L
  std::size_t s_steps = 1;  // K
  std::size_t batch_size = 256;
  // Transitions drawn per S-update; their source sessions form the batch.
  std::size_t s_batch_transitions = 32;
  double gamma = 0.9;
  double lr = 0.005;
  double s_lr = 0.005;
  double eps0 = 0.5;
  double eps_decay = 0.99;
  double eps_min = 0.05;
  std::size_t buffer_capacity = 10000;
  RewardWeights omega;
  double beta = 1.0;
  model::LossWeights loss;
  model::SimulationOptions sim;
  // Plateau stop on the evaluation depth.
  bool early_stop = false;
  std::size_t plateau_window = 20;
  double plateau_tol = 0.01;
  std::size_t min_iterations = 0;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on a bad setting.
  void validate() const;
};

double epsilon_at(std::size_t iteration, const TrainConfig& cfg);

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct EvalPoint {
  double clicks = kNaN;
  double depth = kNaN;
  double return_gap = kNaN;
  double entropy = kNaN;
};

struct CurveRow {
  std::size_t iteration = 0;
  double td_loss = 0.0;
  double s_loss = 0.0;
  double epsilon = 0.0;
  EvalPoint eval;
  double max_abs_q = 0.0;
  std::size_t logged = 0;
  std::size_t simulated = 0;
};

struct TrainingCurves {
  std::vector<CurveRow> rows;
  bool stopped_early = false;
};

void write_curves(std::ostream& out, const TrainingCurves& curves);
void save_curves(const std::filesystem::path& path, const TrainingCurves& curves);
TrainingCurves load_curves(const std::filesystem::path& path);

using EvalFn = std::function<EvalPoint(const model::QNetwork&, std::size_t iteration)>;

struct TrainState {
  std::size_t next_iteration = 0;
  TrainingCurves curves;
};

// Offline loop: logged and simulated transitions enter the replay buffer,
// then L Q-updates and K S-updates per iteration. Continues from `resume`
// when given (the replay buffer starts empty again).
TrainingCurves run_training(std::span<const Trajectory> data, const CandidatePool& pool, const TrainConfig& cfg,
                            model::QNetwork& q, model::SNetwork& s, const EvalFn& eval = {},
                            TrainState resume = {});

// Reads the iteration counter and curves written next to a checkpoint.
TrainState load_train_state(const std::filesystem::path& dir);

}  // namespace feedrec::train
