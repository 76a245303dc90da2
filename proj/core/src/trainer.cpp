#include "feedrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>

#include "feedrec/checkpoint.hpp"
#include "feedrec/errors.hpp"
#include "feedrec/replay_buffer.hpp"
#include "feedrec/trajectory_io.hpp"

namespace feedrec::train {
namespace {

constexpr std::uint64_t kTrainStream = 4;
constexpr const char* kCurveHeader =
    "iteration\ttd_loss\ts_loss\tepsilon\tclicks\tdepth\treturn_gap\tentropy\tmax_abs_q\tlogged\tsimulated";

double mean_of(std::span<const CurveRow> rows) {
  double s = 0.0;
  for (const auto& r : rows) s += r.eval.depth;
  return s / static_cast<double>(rows.size());
}

bool plateaued(const TrainingCurves& c, const TrainConfig& cfg) {
  const auto w = cfg.plateau_window;
  if (w == 0 || c.rows.size() < 2 * w) return false;
  const std::span<const CurveRow> rows(c.rows);
  const double now = mean_of(rows.last(w));
  const double before = mean_of(rows.subspan(rows.size() - 2 * w, w));
  if (!std::isfinite(now) || !std::isfinite(before)) return false;
  return std::abs(now - before) < cfg.plateau_tol * std::max(std::abs(before), 1e-12);
}

void save_state(const TrainConfig& cfg, const model::QNetwork& q, const model::SNetwork& s,
                const TrainingCurves& curves, std::size_t next_iteration) {
  const auto& dir = cfg.checkpoint_dir;
  q.save(dir);
  s.save(dir);
  save_curves(dir / "curves.tsv", curves);
  nn::save_manifest(dir / "train.manifest", {{"next_iteration", std::to_string(next_iteration)},
                                             {"seed", std::to_string(cfg.seed)}});
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(lr > 0.0) || !(s_lr > 0.0)) fail("learning rates must be positive");
  if (batch_size == 0 || s_batch_transitions == 0) fail("batch sizes must be positive");
  if (logged_per_iteration == 0) fail("logged samples per iteration must be positive");
  if (buffer_capacity == 0) fail("buffer capacity must be positive");
  if (!(sim_ratio >= 0.0)) fail("simulation ratio must be nonnegative");
  if (!(eps0 >= 0.0 && eps0 <= 1.0 && eps_min >= 0.0 && eps_min <= 1.0)) fail("epsilon outside [0, 1]");
  if (!(eps_decay > 0.0 && eps_decay <= 1.0)) fail("epsilon decay must lie in (0, 1]");
  if (checkpoint_every > 0 && checkpoint_dir.empty()) fail("checkpointing needs a directory");
}

double epsilon_at(std::size_t iteration, const TrainConfig& cfg) {
  return std::max(cfg.eps_min, cfg.eps0 * std::pow(cfg.eps_decay, static_cast<double>(iteration)));
}

void write_curves(std::ostream& out, const TrainingCurves& curves) {
  out << kCurveHeader << '\n';
  for (const auto& r : curves.rows) {
    out << r.iteration << '\t' << format_double(r.td_loss) << '\t' << format_double(r.s_loss) << '\t'
        << format_double(r.epsilon) << '\t' << format_double(r.eval.clicks) << '\t' << format_double(r.eval.depth)
        << '\t' << format_double(r.eval.return_gap) << '\t' << format_double(r.eval.entropy) << '\t'
        << format_double(r.max_abs_q) << '\t' << r.logged << '\t' << r.simulated << '\n';
  }
}

void save_curves(const std::filesystem::path& path, const TrainingCurves& curves) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_curves(out, curves);
}

TrainingCurves load_curves(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInput("cannot read curves " + path.string());
  TrainingCurves c;
  std::string line;
  std::getline(in, line);
  if (line != kCurveHeader) throw std::runtime_error(path.string() + " is not a curves table");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::vector<std::string> f;
    for (std::string tok; std::getline(fields, tok, '\t');) f.push_back(tok);
    if (f.size() != 11) throw std::runtime_error("malformed curves row: " + line);
    CurveRow r;
    r.iteration = std::stoul(f[0]);
    r.td_loss = parse_double(f[1]);
    r.s_loss = parse_double(f[2]);
    r.epsilon = parse_double(f[3]);
    r.eval = {parse_double(f[4]), parse_double(f[5]), parse_double(f[6]), parse_double(f[7])};
    r.max_abs_q = parse_double(f[8]);
    r.logged = std::stoul(f[9]);
    r.simulated = std::stoul(f[10]);
    c.rows.push_back(r);
  }
  return c;
}

TrainState load_train_state(const std::filesystem::path& dir) {
  const auto m = nn::load_manifest(dir / "train.manifest");
  auto it = m.find("next_iteration");
  if (it == m.end()) throw std::runtime_error("train manifest lacks next_iteration");
  TrainState st;
  st.next_iteration = std::stoul(it->second);
  st.curves = load_curves(dir / "curves.tsv");
  std::erase_if(st.curves.rows, [&](const CurveRow& r) { return r.iteration >= st.next_iteration; });
  return st;
}

TrainingCurves run_training(std::span<const Trajectory> data, const CandidatePool& pool, const TrainConfig& cfg,
                            model::QNetwork& q, model::SNetwork& s, const EvalFn& eval, TrainState resume) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("training needs logged data");

  // Logged transitions, flattened for uniform sampling.
  struct Logged {
    std::shared_ptr<const Trajectory> source;
    std::vector<Transition> transitions;
  };
  std::vector<Logged> logged;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  logged.reserve(data.size());
  for (const auto& t : data) {
    auto src = std::make_shared<const Trajectory>(t);
    auto tr = to_transitions(t, pool, cfg.beta);
    for (std::size_t k = 0; k < tr.size(); ++k) index.emplace_back(logged.size(), k);
    logged.push_back({std::move(src), std::move(tr)});
  }
  if (index.empty()) throw std::invalid_argument("logged data has no transitions");

  ReplayBuffer buffer(cfg.buffer_capacity);
  TrainingCurves curves = std::move(resume.curves);
  const auto n_users = q.config().stack.n_users;

  for (std::size_t it = resume.next_iteration; it < cfg.iterations; ++it) {
    Rng rng = make_rng(cfg.seed, kTrainStream, it);
    CurveRow row;
    row.iteration = it;
    row.epsilon = epsilon_at(it, cfg);
    // Frozen snapshot acting for rollouts and importance ratios.
    const model::QPolicy pi(std::make_shared<const model::QNetwork>(q), row.epsilon);

    for (std::size_t j = 0; j < cfg.logged_per_iteration; ++j) {
      const auto [k, step] = index[uniform_index(rng, index.size())];
      buffer.push({logged[k].transitions[step], logged[k].source, step});
    }
    row.logged = cfg.logged_per_iteration;

    if (cfg.simulate) {
      const auto target = static_cast<std::size_t>(std::llround(cfg.sim_ratio * static_cast<double>(row.logged)));
      while (row.simulated < target) {
        const auto user = static_cast<UserId>(uniform_index(rng, n_users));
        auto ep = model::simulate_episode(pi, user, s, pool, rng, cfg.sim);
        auto src = std::make_shared<const Trajectory>(std::move(ep.trajectory));
        for (std::size_t k = 0; k < ep.transitions.size(); ++k) buffer.push({std::move(ep.transitions[k]), src, k});
        row.simulated += ep.transitions.size();
        if (ep.transitions.empty()) break;
      }
    }

    std::vector<const Transition*> batch;
    for (std::size_t l = 0; l < cfg.q_steps; ++l) {
      const auto sample = buffer.sample(cfg.batch_size, rng);
      batch.clear();
      for (const auto* e : sample) batch.push_back(&e->transition);
      double max_q = 0.0;
      row.td_loss += q.q_update(batch, cfg.omega, cfg.gamma, cfg.lr, &max_q);
      row.max_abs_q = std::max(row.max_abs_q, max_q);
    }
    if (cfg.q_steps > 0) row.td_loss /= static_cast<double>(cfg.q_steps);

    std::vector<Trajectory> sessions;
    for (std::size_t k = 0; k < cfg.s_steps; ++k) {
      const auto sample = buffer.sample(cfg.s_batch_transitions, rng);
      std::vector<const Trajectory*> unique;
      for (const auto* e : sample) {
        if (std::find(unique.begin(), unique.end(), e->source.get()) == unique.end()) unique.push_back(e->source.get());
      }
      sessions.clear();
      for (const auto* t : unique) sessions.push_back(*t);
      s.params().zero_grad();
      row.s_loss += model::snet_loss(s, sessions, pi, pool, cfg.loss);
      nn::sgd_update(s.params(), cfg.s_lr);
    }
    if (cfg.s_steps > 0) row.s_loss /= static_cast<double>(cfg.s_steps);

    if (!q.params().values_finite() || !s.params().values_finite() || !std::isfinite(row.td_loss) ||
        !std::isfinite(row.s_loss)) {
      throw NumericFailure("non-finite value during training iteration " + std::to_string(it));
    }

    if (eval) row.eval = eval(q, it);
    curves.rows.push_back(row);

    if (cfg.checkpoint_every > 0 && ((it + 1) % cfg.checkpoint_every == 0 || it + 1 == cfg.iterations)) {
      save_state(cfg, q, s, curves, it + 1);
    }
    if (cfg.early_stop && it + 1 >= cfg.min_iterations && plateaued(curves, cfg)) {
      curves.stopped_early = true;
      if (cfg.checkpoint_every > 0) save_state(cfg, q, s, curves, it + 1);
      break;
    }
  }
  return curves;
}

}  // namespace feedrec::train
