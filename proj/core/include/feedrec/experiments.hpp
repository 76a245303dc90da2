#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "feedrec/config.hpp"
#include "feedrec/evaluation.hpp"
#include "feedrec/q_network.hpp"
#include "feedrec/s_network.hpp"
#include "feedrec/synthetic_env.hpp"
#include "feedrec/trainer.hpp"

namespace feedrec::exp {

// Everything a run needs, read from a flat config.
struct Setup {
  sim::SimConfig sim;
  bool calibrate = true;
  std::size_t n_users = 100;
  std::size_t n_items = 500;
  std::size_t episodes = 10000;
  double train_fraction = 0.88;
  double behavior_temperature = 1.0;
  double behavior_mix = 0.1;

  model::StackDims dims;  // user/item counts filled from the world
  std::size_t mlp_hidden = 50;
  std::size_t trunk_hidden = 50;
  double init_scale = 0.1;

  train::TrainConfig train;
  model::PretrainOptions pretrain;

  std::size_t eval_episodes = 200;
  double eval_epsilon = 0.0;
  std::size_t final_eval_episodes = 1000;
  double ncis_cap = 5.0;
  double scatter_threshold = 0.01;
  std::size_t scatter_points = 300;
  std::uint64_t seed = 0;
};

Setup setup_from_config(const Config& cfg);

// Config for one simulation-study run: sets the style and, unless the caller
// chose omega.* explicitly, rewards the delayed metrics only (depth and
// return), which is what the diversity experiments are meant to optimize.
Config simulation_study_config(Config base, const std::string& style);

struct Dataset {
  std::shared_ptr<const sim::World> world;
  sim::SimConfig sim;  // calibrated laws
  sim::EntropyRange range;
  std::vector<Trajectory> train;
  std::vector<Trajectory> test;
};

// World, calibrated laws and behavior-policy logs split by generation order.
Dataset build_dataset(const Setup& setup);
// users.tsv, items.tsv, env.manifest, trajectories.tsv
void save_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& dir, const Setup& setup);

struct Models {
  std::unique_ptr<model::QNetwork> q;
  std::unique_ptr<model::SNetwork> s;
};

// Fresh networks sized for `world`, initialized from the setup seed.
Models make_models(const Setup& setup, const sim::World& world);

// Ground-truth rollouts of the Q-policy at eval_epsilon, same users and
// randomness at every call.
train::EvalFn env_evaluator(const Dataset& data, const Setup& setup);

struct StudyResult {
  Models models;
  model::PretrainResult pretrain;
  train::TrainingCurves curves;
  sim::RolloutStats random;
  sim::RolloutStats trained;
};

// Pretraining, then the training loop with per-iteration simulator
// evaluation, then final rollouts of the trained and uniform policies.
StudyResult run_study(const Setup& setup, const Dataset& data);

// (iteration, entropy, depth, return_gap) rows behind the depth/entropy plots.
void write_probe_table(const std::filesystem::path& path, const train::TrainingCurves& curves);

}  // namespace feedrec::exp
