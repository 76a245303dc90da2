#include "feedrec/experiments.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "feedrec/checkpoint.hpp"
#include "feedrec/errors.hpp"
#include "feedrec/trajectory_io.hpp"

namespace feedrec::exp {
namespace {

constexpr std::uint64_t kWorldStream = 10;
constexpr std::uint64_t kCalibrationStream = 11;
constexpr std::uint64_t kModelStream = 12;
constexpr std::uint64_t kEvalSeedSalt = 0x9e3779b97f4a7c15ULL;

std::size_t split_point(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace

Config simulation_study_config(Config base, const std::string& style) {
  base.set("style", style);
  for (const auto& [key, value] : {std::pair{"omega.clicks", "0"}, {"omega.scans", "1"}, {"omega.return", "1"}}) {
    if (!base.has(key)) base.set(key, value);
  }
  return base;
}

Setup setup_from_config(const Config& c) {
  Setup s;
  auto& sim = s.sim;
  sim.style = sim::parse_style(c.get_string("style", "linear"));
  sim.kappa = c.get_double("kappa", sim.kappa);
  sim.dim = c.get_size("topics", sim.dim);
  sim.max_depth = c.get_size("max_depth", sim.max_depth);
  sim.eps_kl = c.get_double("eps_kl", sim.eps_kl);
  sim.dwell_base = c.get_double("dwell_base", sim.dwell_base);
  sim.v_min = c.get_double("v_min", sim.v_min);
  sim.a = c.get_double("linear.a", sim.a);
  sim.b = c.get_double("linear.b", sim.b);
  sim.V = c.get_double("return.V", sim.V);
  sim.d_coef = c.get_double("linear.d", sim.d_coef);
  sim.mu = c.get_double("quadratic.mu", sim.mu);
  sim.sigma = c.get_double("quadratic.sigma", sim.sigma);
  s.calibrate = c.get_bool("calibrate", s.calibrate);

  s.n_users = c.get_size("users", s.n_users);
  s.n_items = c.get_size("items", s.n_items);
  s.episodes = c.get_size("episodes", s.episodes);
  s.train_fraction = c.get_double("train_fraction", s.train_fraction);
  s.behavior_temperature = c.get_double("behavior.temperature", s.behavior_temperature);
  s.behavior_mix = c.get_double("behavior.uniform_mix", s.behavior_mix);

  s.dims.item_dim = c.get_size("item_dim", s.dims.item_dim);
  s.dims.user_dim = c.get_size("user_dim", s.dims.user_dim);
  s.dims.hidden = c.get_size("hidden", s.dims.hidden);
  s.dims.dwell_scale = c.get_double("dwell_scale", s.dims.dwell_scale);
  s.mlp_hidden = c.get_size("mlp_hidden", s.mlp_hidden);
  s.trunk_hidden = c.get_size("trunk_hidden", s.trunk_hidden);
  s.init_scale = c.get_double("init_scale", s.init_scale);

  auto& t = s.train;
  t.iterations = c.get_size("iterations", t.iterations);
  t.logged_per_iteration = c.get_size("logged_per_iteration", t.logged_per_iteration);
  t.sim_ratio = c.get_double("sim_ratio", t.sim_ratio);
  t.simulate = c.get_bool("simulate", t.simulate);
  t.q_steps = c.get_size("q_steps", t.q_steps);
  t.s_steps = c.get_size("s_steps", t.s_steps);
  t.batch_size = c.get_size("batch_size", t.batch_size);
  t.s_batch_transitions = c.get_size("s_batch_transitions", t.s_batch_transitions);
  t.gamma = c.get_double("gamma", t.gamma);
  t.lr = c.get_double("lr", t.lr);
  t.s_lr = c.get_double("s_lr", t.s_lr);
  t.eps0 = c.get_double("eps0", t.eps0);
  t.eps_decay = c.get_double("eps_decay", t.eps_decay);
  t.eps_min = c.get_double("eps_min", t.eps_min);
  t.buffer_capacity = c.get_size("buffer", t.buffer_capacity);
  t.omega.w[0] = c.get_double("omega.clicks", t.omega.w[0]);
  t.omega.w[1] = c.get_double("omega.scans", t.omega.w[1]);
  t.omega.w[2] = c.get_double("omega.return", t.omega.w[2]);
  t.beta = c.get_double("beta", t.beta);
  t.loss.feedback = c.get_double("lambda.feedback", t.loss.feedback);
  t.loss.dwell = c.get_double("lambda.dwell", t.loss.dwell);
  t.loss.leave = c.get_double("lambda.leave", t.loss.leave);
  t.loss.return_time = c.get_double("lambda.return", t.loss.return_time);
  t.loss.cap = c.get_double("cap", t.loss.cap);
  t.loss.gamma = t.gamma;
  t.sim.max_depth = sim.max_depth;
  t.sim.beta = t.beta;
  t.sim.min_return_gap = c.get_double("sim.min_return_gap", sim.v_min);
  t.early_stop = c.get_bool("early_stop", t.early_stop);
  t.plateau_window = c.get_size("plateau_window", t.plateau_window);
  t.plateau_tol = c.get_double("plateau_tol", t.plateau_tol);
  t.min_iterations = c.get_size("min_iterations", t.min_iterations);
  t.checkpoint_every = c.get_size("checkpoint_every", t.checkpoint_every);

  s.pretrain.epochs = c.get_size("pretrain_epochs", s.pretrain.epochs);
  s.pretrain.batch_trajectories = c.get_size("pretrain_batch", s.pretrain.batch_trajectories);
  s.pretrain.lr = c.get_double("pretrain_lr", t.s_lr);

  s.eval_episodes = c.get_size("eval_episodes", s.eval_episodes);
  s.eval_epsilon = c.get_double("eval_epsilon", s.eval_epsilon);
  s.final_eval_episodes = c.get_size("final_eval_episodes", s.final_eval_episodes);
  s.ncis_cap = c.get_double("ncis_cap", t.loss.cap);
  s.scatter_threshold = c.get_double("scatter_threshold", s.scatter_threshold);
  s.scatter_points = c.get_size("scatter_points", s.scatter_points);

  s.seed = c.get_u64("seed", s.seed);
  t.seed = s.seed;
  s.pretrain.seed = s.seed;

  if (!(s.train_fraction > 0.0 && s.train_fraction <= 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1]");
  }
  sim::validate(sim);
  t.validate();
  return s;
}

Dataset build_dataset(const Setup& setup) {
  Dataset d;
  Rng world_rng = make_rng(setup.seed, kWorldStream);
  auto world = std::make_shared<sim::World>(sim::make_world(setup.n_users, setup.n_items, setup.sim, world_rng));
  d.sim = setup.sim;
  if (setup.calibrate) {
    Rng cal_rng = make_rng(setup.seed, kCalibrationStream);
    d.range = sim::calibrate_entropy_range(*world, setup.sim, cal_rng);
    d.sim = sim::calibrated(setup.sim, d.range);
  }
  d.world = world;
  const sim::BehaviorPolicy behavior(world, setup.behavior_temperature, setup.behavior_mix);
  auto logs = sim::generate_logged_data(*world, setup.episodes, behavior, d.sim, setup.seed);
  const auto cut = split_point(logs.size(), setup.train_fraction);
  d.train.assign(logs.begin(), logs.begin() + static_cast<std::ptrdiff_t>(cut));
  d.test.assign(logs.begin() + static_cast<std::ptrdiff_t>(cut), logs.end());
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  sim::save_world(dir, *data.world);
  const auto& s = data.sim;
  nn::save_manifest(dir / "env.manifest", {
                                              {"style", std::string(sim::to_string(s.style))},
                                              {"linear.a", format_double(s.a)},
                                              {"linear.b", format_double(s.b)},
                                              {"linear.d", format_double(s.d_coef)},
                                              {"return.V", format_double(s.V)},
                                              {"quadratic.mu", format_double(s.mu)},
                                              {"quadratic.sigma", format_double(s.sigma)},
                                              {"v_min", format_double(s.v_min)},
                                              {"entropy.low", format_double(data.range.low)},
                                              {"entropy.high", format_double(data.range.high)},
                                              {"train_sessions", std::to_string(data.train.size())},
                                          });
  std::vector<Trajectory> all = data.train;
  all.insert(all.end(), data.test.begin(), data.test.end());
  save_trajectories(dir / "trajectories.tsv", all);
}

Dataset load_dataset(const std::filesystem::path& dir, const Setup& setup) {
  if (!std::filesystem::exists(dir / "trajectories.tsv")) {
    throw MissingInput("no dataset in " + dir.string() + " (trajectories.tsv missing)");
  }
  Dataset d;
  d.world = std::make_shared<sim::World>(sim::load_world(dir));
  const auto m = nn::load_manifest(dir / "env.manifest");
  auto num = [&](const char* key) {
    auto it = m.find(key);
    if (it == m.end()) throw std::runtime_error(std::string("env manifest lacks ") + key);
    return parse_double(it->second);
  };
  d.sim = setup.sim;
  d.sim.style = sim::parse_style(m.at("style"));
  d.sim.a = num("linear.a");
  d.sim.b = num("linear.b");
  d.sim.d_coef = num("linear.d");
  d.sim.V = num("return.V");
  d.sim.mu = num("quadratic.mu");
  d.sim.sigma = num("quadratic.sigma");
  d.sim.v_min = num("v_min");
  d.range = {num("entropy.low"), num("entropy.high")};
  auto all = load_trajectories(dir / "trajectories.tsv");
  const auto cut = split_point(all.size(), setup.train_fraction);
  d.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(cut));
  d.test.assign(all.begin() + static_cast<std::ptrdiff_t>(cut), all.end());
  return d;
}

Models make_models(const Setup& setup, const sim::World& world) {
  model::StackDims dims = setup.dims;
  dims.n_users = world.n_users();
  dims.n_items = world.n_items();
  Models m;
  m.q = std::make_unique<model::QNetwork>(model::QNetConfig{dims, setup.mlp_hidden});
  m.s = std::make_unique<model::SNetwork>(model::SNetConfig{dims, setup.trunk_hidden});
  Rng q_rng = make_rng(setup.seed, kModelStream, 0);
  Rng s_rng = make_rng(setup.seed, kModelStream, 1);
  m.q->init(q_rng, setup.init_scale);
  m.s->init(s_rng, setup.init_scale);
  return m;
}

train::EvalFn env_evaluator(const Dataset& data, const Setup& setup) {
  auto world = data.world;
  const auto cfg = data.sim;
  const auto episodes = setup.eval_episodes;
  const auto eps = setup.eval_epsilon;
  const auto seed = setup.seed ^ kEvalSeedSalt;
  return [world, cfg, episodes, eps, seed](const model::QNetwork& q, std::size_t) {
    train::EvalPoint p;
    if (episodes == 0) return p;
    const model::QPolicy pi(std::make_shared<const model::QNetwork>(q), eps);
    const auto st = sim::rollout_stats(*world, pi, cfg, episodes, seed);
    p.clicks = st.clicks;
    p.depth = st.depth;
    p.return_gap = st.return_gap;
    p.entropy = st.entropy;
    return p;
  };
}

StudyResult run_study(const Setup& setup, const Dataset& data) {
  StudyResult r;
  r.models = make_models(setup, *data.world);
  auto& q = *r.models.q;
  auto& s = *r.models.s;
  const auto& pool = data.world->pool;
  {
    const model::QPolicy pi(std::make_shared<const model::QNetwork>(q), train::epsilon_at(0, setup.train));
    r.pretrain = model::pretrain(s, data.train, pi, pool, setup.train.loss, setup.pretrain);
  }
  r.curves = train::run_training(data.train, pool, setup.train, q, s, env_evaluator(data, setup));

  const auto seed = setup.seed ^ (kEvalSeedSalt + 1);
  const model::QPolicy trained(std::make_shared<const model::QNetwork>(q), setup.eval_epsilon);
  r.trained = sim::rollout_stats(*data.world, trained, data.sim, setup.final_eval_episodes, seed);
  r.random = sim::rollout_stats(*data.world, UniformPolicy{}, data.sim, setup.final_eval_episodes, seed);
  return r;
}

void write_probe_table(const std::filesystem::path& path, const train::TrainingCurves& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iteration\tentropy\tdepth\treturn_gap\n";
  for (const auto& row : curves.rows) {
    out << row.iteration << '\t' << format_double(row.eval.entropy) << '\t' << format_double(row.eval.depth) << '\t'
        << format_double(row.eval.return_gap) << '\n';
  }
}

}  // namespace feedrec::exp
