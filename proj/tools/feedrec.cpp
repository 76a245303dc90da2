#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feedrec/config.hpp"
#include "feedrec/errors.hpp"
#include "feedrec/evaluation.hpp"
#include "feedrec/experiments.hpp"
#include "feedrec/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace feedrec;

namespace {

constexpr int kUsage = 1;
constexpr int kMissing = 2;
constexpr int kNumeric = 3;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "feedrec-out";
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "master seed");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--set", c.overrides, "override a config key (key=value), repeatable");
}

Config resolve(const Common& c) {
  Config cfg = c.config.empty() ? Config{} : Config::load(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed_set) cfg.set("seed", std::to_string(c.seed));
  return cfg;
}

void warn_unused(const Config& cfg) {
  for (const auto& k : cfg.unused_keys()) std::cerr << "feedrec: warning: unused config key '" << k << "'\n";
}

fs::path ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::runtime_error("cannot create output directory " + dir.string());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

void print_summary(const char* label, const std::vector<Trajectory>& t) {
  if (t.empty()) {
    std::cout << label << "\tsessions=0\n";
    return;
  }
  const auto r = eval::session_metrics(t);
  std::cout << label << "\tsessions=" << r.sessions << "\tavg_depth=" << format_double(r.avg_depth)
            << "\tavg_clicks=" << format_double(r.avg_clicks) << "\tavg_return_gap=" << format_double(r.avg_return_time)
            << '\n';
}

void write_stats_row(std::ostream& out, const std::string& name, const sim::RolloutStats& s) {
  out << name << '\t' << format_double(s.clicks) << '\t' << format_double(s.depth) << '\t'
      << format_double(s.return_gap) << '\t' << format_double(s.entropy) << '\n';
}

int cmd_gen_data(const Common& c) {
  const auto cfg = resolve(c);
  const auto setup = exp::setup_from_config(cfg);
  warn_unused(cfg);
  const fs::path dir = ensure_dir(fs::path(c.out) / "data");
  const auto data = exp::build_dataset(setup);
  exp::save_dataset(dir, data);
  std::vector<Trajectory> all = data.train;
  all.insert(all.end(), data.test.begin(), data.test.end());
  print_summary("logged", all);
  return 0;
}

fs::path data_dir(const Config& cfg, const Common& c) {
  return cfg.has("data") ? fs::path(cfg.get_string("data", "")) : fs::path(c.out) / "data";
}

int cmd_train(const Common& c, bool resume) {
  const auto cfg = resolve(c);
  auto setup = exp::setup_from_config(cfg);
  const auto data = exp::load_dataset(data_dir(cfg, c), setup);
  warn_unused(cfg);
  const fs::path dir = ensure_dir(fs::path(c.out) / "model");
  setup.train.checkpoint_dir = dir;
  if (setup.train.checkpoint_every == 0) setup.train.checkpoint_every = setup.train.iterations;

  auto models = exp::make_models(setup, *data.world);
  train::TrainState state;
  if (resume) {
    models.q->load(dir);
    models.s->load(dir);
    state = train::load_train_state(dir);
    std::cout << "resuming at iteration " << state.next_iteration << '\n';
  } else {
    const model::QPolicy pi(std::make_shared<const model::QNetwork>(*models.q),
                            train::epsilon_at(0, setup.train));
    const auto pre = model::pretrain(*models.s, data.train, pi, data.world->pool, setup.train.loss, setup.pretrain);
    std::cout << "pretrain\tinitial_loss=" << format_double(pre.initial_loss)
              << "\tfinal_loss=" << format_double(pre.final_loss) << (pre.improved ? "" : "\tNOT-IMPROVED") << '\n';
    models.q->save(dir);
    models.s->save(dir);
  }
  const auto curves = train::run_training(data.train, data.world->pool, setup.train, *models.q, *models.s,
                                          exp::env_evaluator(data, setup), std::move(state));
  train::save_curves(dir / "curves.tsv", curves);
  if (!curves.rows.empty()) {
    const auto& last = curves.rows.back();
    std::cout << "trained\titerations=" << curves.rows.size() << "\ttd_loss=" << format_double(last.td_loss)
              << "\ts_loss=" << format_double(last.s_loss) << "\tdepth=" << format_double(last.eval.depth) << '\n';
  }
  return 0;
}

int cmd_eval(const Common& c, const std::string& policy_name) {
  const auto cfg = resolve(c);
  const auto setup = exp::setup_from_config(cfg);
  const auto data = exp::load_dataset(data_dir(cfg, c), setup);
  const fs::path model_dir = cfg.has("model") ? fs::path(cfg.get_string("model", "")) : fs::path(c.out) / "model";
  warn_unused(cfg);

  std::unique_ptr<Policy> pi;
  if (policy_name == "uniform") {
    pi = std::make_unique<UniformPolicy>();
  } else if (policy_name == "model") {
    auto models = exp::make_models(setup, *data.world);
    models.q->load(model_dir);
    pi = std::make_unique<model::QPolicy>(std::shared_ptr<const model::QNetwork>(std::move(models.q)),
                                          setup.eval_epsilon);
  } else {
    throw CLI::ValidationError("--policy", "expected model or uniform");
  }
  if (data.test.empty()) throw std::invalid_argument("test split is empty");
  const auto report = eval::evaluate(data.test, *pi, data.world->pool, setup.ncis_cap, setup.train.beta);
  const fs::path dir = ensure_dir(c.out);
  auto out = open_out(dir / ("report_" + policy_name + ".tsv"));
  eval::write_report(out, report);
  const auto truth = sim::rollout_stats(*data.world, *pi, data.sim, setup.final_eval_episodes, setup.seed);
  out << "sim_clicks\t" << format_double(truth.clicks) << '\n'
      << "sim_depth\t" << format_double(truth.depth) << '\n'
      << "sim_return_gap\t" << format_double(truth.return_gap) << '\n';
  eval::write_report(std::cout, report);
  return 0;
}

int cmd_sim_study(const Common& c, const std::vector<std::string>& styles, bool ablation) {
  const auto base = resolve(c);
  const fs::path dir = ensure_dir(c.out);
  for (const auto& style : styles) {
    Config cfg = exp::simulation_study_config(base, style);
    auto setup = exp::setup_from_config(cfg);
    warn_unused(cfg);
    const auto data = exp::build_dataset(setup);
    const auto study = exp::run_study(setup, data);
    train::save_curves(dir / ("curves_" + style + ".tsv"), study.curves);
    exp::write_probe_table(dir / ("probes_" + style + ".tsv"), study.curves);

    const double eps = study.curves.rows.empty() ? setup.train.eps0
                                                 : study.curves.rows.back().epsilon;
    const model::QPolicy acting(std::make_shared<const model::QNetwork>(*study.models.q), eps);
    const auto points = eval::diversity_engagement_points(acting, data.test, data.world->pool, data.world->items,
                                                          setup.scatter_threshold, setup.scatter_points, setup.seed,
                                                          setup.ncis_cap, data.sim.eps_kl);
    auto scatter = open_out(dir / ("scatter_" + style + ".tsv"));
    eval::write_points(scatter, points);

    auto summary = open_out(dir / ("summary_" + style + ".tsv"));
    summary << "policy\tclicks\tdepth\treturn_gap\tentropy\n";
    write_stats_row(summary, "random", study.random);
    write_stats_row(summary, "feedrec", study.trained);
    const auto seed = setup.seed + 1;
    for (double q : {0.0, 1.0}) {
      const sim::ScriptedDiversityPolicy scripted(data.world, q, data.sim.eps_kl);
      write_stats_row(summary, q == 0.0 ? "scripted_low" : "scripted_high",
                      sim::rollout_stats(*data.world, scripted, data.sim, setup.final_eval_episodes, seed));
    }
    std::cout << style << "\trandom_depth=" << format_double(study.random.depth)
              << "\tfeedrec_depth=" << format_double(study.trained.depth)
              << "\tfeedrec_entropy=" << format_double(study.trained.entropy) << '\n';

    if (ablation) {
      setup.train.simulate = false;
      const auto naive = exp::run_study(setup, data);
      train::save_curves(dir / ("curves_" + style + "_naive.tsv"), naive.curves);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FeedRec: offline RL recommender for long-term feed engagement"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen-data", "simulate users, items and logged sessions");
  add_common(gen, common);

  bool resume = false;
  auto* trn = app.add_subcommand("train", "pretrain the S-network, then run the offline training loop");
  add_common(trn, common);
  trn->add_flag("--resume", resume, "continue from the checkpoint in <out>/model");

  std::string policy = "model";
  auto* evl = app.add_subcommand("eval", "session metrics and NCIS estimates on the test split");
  add_common(evl, common);
  evl->add_option("--policy", policy, "model or uniform")->check(CLI::IsMember({"model", "uniform"}));

  std::vector<std::string> styles{"linear", "quadratic"};
  bool ablation = false;
  auto* study = app.add_subcommand("sim-study", "linear and quadratic simulation experiments");
  add_common(study, common);
  study->add_option("--styles", styles, "styles to run")->delimiter(',')->check(CLI::IsMember({"linear", "quadratic"}));
  study->add_flag("--ablation", ablation, "also train without simulated rollouts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(common);
    if (trn->parsed()) return cmd_train(common, resume);
    if (evl->parsed()) return cmd_eval(common, policy);
    if (study->parsed()) return cmd_sim_study(common, styles, ablation);
  } catch (const MissingInput& e) {
    std::cerr << "feedrec: " << e.what() << '\n';
    return kMissing;
  } catch (const NumericFailure& e) {
    std::cerr << "feedrec: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "feedrec: " << e.what() << '\n';
    return kUsage;
  }
  std::cerr << app.help();
  return kUsage;
}
