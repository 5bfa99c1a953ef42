// ltlrl: translate, check, train, evaluate and plot LTL-guided navigation
// tasks.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ltlrl/automaton.hpp"
#include "ltlrl/config.hpp"
#include "ltlrl/ddpg.hpp"
#include "ltlrl/ltl.hpp"
#include "ltlrl/plot.hpp"
#include "ltlrl/product.hpp"
#include "ltlrl/world.hpp"

namespace fs = std::filesystem;
using namespace ltlrl;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string summary(const Ldba& a) {
  std::string sink;
  for (auto q : a.sink_states()) sink += (sink.empty() ? "" : " ") + a.state_name(q);
  return "states: " + std::to_string(a.state_count()) + "\naccepting sets: " + std::to_string(a.accepting_count()) +
         "\nsink: {" + sink + "}\n";
}

Ldba translate_or_explain(const ltl::Formula& f) {
  try {
    return translate_sequential(f);
  } catch (const FragmentError& e) {
    throw ValidationError(std::string(e.what()) + "; supply an automaton file with --ldba instead");
  }
}

// ---------------------------------------------------------------------------

int cmd_translate(const std::string& formula, const std::string& out) {
  auto a = translate_or_explain(ltl::parse(formula));
  if (out.empty()) {
    std::cout << print_ldba(a);
  } else {
    write_file(out, print_ldba(a));
  }
  std::cerr << summary(a);
  return kOk;
}

int cmd_check(const std::string& formula, const std::string& ldba_path, const std::string& word) {
  if (formula.empty() && ldba_path.empty()) throw ValidationError("check needs --formula, --ldba or both");
  std::optional<Ldba> automaton;
  if (!ldba_path.empty()) automaton = load_ldba(read_file(ldba_path));
  std::optional<ltl::Formula> f;
  if (!formula.empty()) f = ltl::parse(formula);

  Alphabet alphabet = automaton ? automaton->alphabet() : Alphabet();
  if (f)
    for (const auto& a : f->atoms()) alphabet.add(a);
  auto w = ltl::parse_lasso(word, alphabet, !automaton);
  if (!automaton && f) {
    try {
      automaton = translate_sequential(*f);
    } catch (const FragmentError&) {
      std::cout << "automaton: (formula outside the translatable fragment)\n";
    }
  }

  std::optional<bool> by_automaton, by_formula;
  if (automaton) {
    for (const auto& name : w.alphabet.names())
      if (!automaton->alphabet().contains(name))
        throw ValidationError("alphabet mismatch: '" + name + "' is not an automaton proposition");
    by_automaton = accepts_lasso(*automaton, w);
    std::cout << "automaton: " << (*by_automaton ? "accept" : "reject") << '\n';
  }
  if (f) {
    by_formula = ltl::eval_lasso(*f, w);
    std::cout << "formula: " << (*by_formula ? "accept" : "reject") << '\n';
  }
  if (by_automaton && by_formula) {
    if (*by_automaton != *by_formula) {
      std::cout << "DISAGREEMENT between automaton and formula\n";
      return kValidation;
    }
    std::cout << "agree\n";
  }
  return kOk;
}

struct Loaded {
  RunConfig cfg;
  Product product;
};

Loaded load_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
                std::optional<std::size_t> episodes) {
  auto cfg = parse_run_config(read_file(config_path), fs::path(config_path).parent_path());
  if (seed) cfg.training.seed = *seed;
  if (!out.empty()) cfg.out = out;
  if (episodes) cfg.training.episodes = *episodes;
  cfg.validate();
  auto world = load_world(read_file(cfg.world));
  auto ldba = cfg.ldba ? load_ldba(read_file(*cfg.ldba)) : translate_or_explain(ltl::parse(*cfg.formula));
  return {cfg, Product(std::move(world), std::move(ldba))};
}

int cmd_train(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
              std::optional<std::size_t> episodes) {
  auto run = load_run(config, seed, out, episodes);
  const auto& t = run.cfg.training;
  const auto start = std::chrono::steady_clock::now();
  std::string log = ddpg::log_header() + "\n";
  std::size_t window_success = 0;
  const std::size_t window = 100;
  std::vector<bool> recent;
  auto result = ddpg::run_training(run.product, t, [&](const ddpg::EpisodeRecord& r, const ddpg::Agent&) {
    log += ddpg::format_log_row(r.row) + "\n";
    recent.push_back(r.row.outcome == Outcome::Success);
    window_success += recent.back();
    if (recent.size() > window) window_success -= recent[recent.size() - window - 1];
    if ((r.row.episode + 1) % 250 == 0)
      std::cerr << "episode " << r.row.episode + 1 << "/" << t.episodes << "  success(last "
                << std::min(window, recent.size()) << ") "
                << static_cast<double>(window_success) / static_cast<double>(std::min(window, recent.size()))
                << "  noise " << r.row.noise << '\n';
  });
  const fs::path dir(run.cfg.out);
  write_file(dir / "train_log.csv", log);
  std::ostringstream ckpt;
  save_bundle(ckpt, result.agent);
  write_file(dir / "agent.ckpt", ckpt.str());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << "trained " << t.episodes << " episodes in " << secs << " s; wrote " << (dir / "train_log.csv").string()
            << " and " << (dir / "agent.ckpt").string() << '\n';
  return kOk;
}

int cmd_eval(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out,
             std::optional<std::size_t> episodes, const std::string& checkpoint, bool sweep) {
  auto run = load_run(config, seed, out, std::nullopt);
  const fs::path dir(run.cfg.out);
  const std::string ckpt_path = checkpoint.empty() ? (dir / "agent.ckpt").string() : checkpoint;
  std::istringstream in(read_file(ckpt_path));
  auto agent = load_bundle(in);
  if (agent.state_count() != run.product.ldba().state_count())
    throw ValidationError("checkpoint was trained for a different automaton");
  const std::size_t n = episodes ? *episodes : run.cfg.eval_episodes;
  std::vector<WorldState> starts;
  if (sweep) starts = run.product.world().safe_cell_centres();
  auto r = ddpg::evaluate(agent, run.product, n, run.cfg.training.max_steps, run.cfg.training.seed,
                          sweep ? &starts : nullptr, true);
  if (!r.runs.empty()) write_file(dir / "eval_trace.csv", trace_csv(r.runs.front(), run.product.ldba()));
  std::printf("%-10s %-8s %-8s %-8s %s\n", "episodes", "success", "fail", "timeout", "mean_steps");
  std::printf("%-10zu %-8.3f %-8.3f %-8.3f %.1f\n", r.episodes, r.success_rate(), r.failure_rate(), r.timeout_rate(),
              r.mean_steps);
  return kOk;
}

int cmd_plot(const std::string& trace, const std::string& world, const std::string& out) {
  auto w = load_world(read_file(world));
  auto points = parse_trace_csv(read_file(trace));
  for (const auto& p : points)
    if (!w.in_bounds({p.x, p.y})) throw ValidationError("trace point outside the world");
  write_file(out, render_svg(w, points));
  std::cout << "wrote " << out << " (" << points.size() << " points)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LTL-guided modular DDPG for labelled continuous worlds"};
  app.require_subcommand(1);

  std::string formula, out, ldba, word, config, checkpoint, trace, world;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> episodes;
  bool sweep = false;

  auto* translate = app.add_subcommand("translate", "Translate a formula into an automaton file");
  translate->add_option("formula", formula, "LTL formula")->required();
  translate->add_option("--out", out, "Output file (default: stdout)");

  auto* check = app.add_subcommand("check", "Decide a lasso word against a formula and/or an automaton");
  check->add_option("--formula", formula, "LTL formula");
  check->add_option("--ldba", ldba, "Automaton file");
  check->add_option("--word", word, "Lasso word, e.g. 'prefix: {a}{} loop: {b}'")->required();

  auto* train = app.add_subcommand("train", "Train an agent from a run config");
  train->add_option("--config", config, "Run config file")->required();
  train->add_option("--seed", seed, "Override the seed");
  train->add_option("--out", out, "Override the output directory");
  train->add_option("--episodes", episodes, "Override the episode count");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained agent greedily");
  eval->add_option("--config", config, "Run config file")->required();
  eval->add_option("--checkpoint", checkpoint, "Checkpoint (default: <out>/agent.ckpt)");
  eval->add_option("--seed", seed, "Override the seed");
  eval->add_option("--out", out, "Override the output directory");
  eval->add_option("--episodes", episodes, "Evaluation episodes");
  eval->add_flag("--sweep-starts", sweep, "One episode from every safe cell centre");

  auto* plot = app.add_subcommand("plot", "Render a trace over its world as SVG");
  plot->add_option("--trace", trace, "Trace CSV")->required();
  plot->add_option("--world", world, "World file")->required();
  plot->add_option("--out", out, "SVG output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*translate) return cmd_translate(formula, out);
    if (*check) return cmd_check(formula, ldba, word);
    if (*train) return cmd_train(config, seed, out, episodes);
    if (*eval) return cmd_eval(config, seed, out, episodes, checkpoint, sweep);
    if (*plot) return cmd_plot(trace, world, out);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return kRuntime;
  }
  return kRuntime;
}
