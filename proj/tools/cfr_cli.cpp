// cfr: train, evaluate and sweep critical-flow rerouting policies.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfr/cfr.hpp"

namespace fs = std::filesystem;
using namespace cfr;

namespace {

// Bad arguments or option combinations; exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Settings {
  std::uint64_t seed = 1;
  std::string out = "out";
  int actors = 1;
  bool sync = false;
  long checkpoint_every = 0;
  std::string dump_lp;

  std::string topology;
  double capacity_scale = kDefaultCapacityScale;
  std::string tm;
  std::string tm_format = "dense-rowmajor";
  std::string generate;
  int count = 100;
  double target_util = 0.9;
  double train_fraction = 0.7;

  int k = 0;
  double k_fraction = 0.1;
  long iterations = 1000;
  double alpha0 = 0.001;
  double alpha_min = 0.0001;
  long decay_every = 500;
  double decay_base = 0.96;
  double beta = 0.1;
  int batch_size = 20;
  int filters = 128;
  int hidden = 128;
  std::string resume;
  bool no_timing = false;
  bool no_experiences = false;

  std::string checkpoint;
  std::string methods = "ecmp,top_k,top_k_critical,random";
  std::string method = "brute_force";
  std::string fractions = "0.05,0.1,0.15,0.2";
  std::uint64_t brute_force_cap = kDefaultBruteForceCap;
  bool no_delay_scale = false;
  unsigned threads = 0;

  std::string grid_alpha = "0.01,0.001,0.0001";
  std::string grid_width = "64,128,256";
  std::string grid_beta = "0.1,0.01";
  long hyper_iterations = 200;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> number_list(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& item : split_list(s)) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw UsageError(what + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(what + " is empty");
  return out;
}

fs::path prepare_out(const Settings& s) {
  fs::path dir(s.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

// Flat key=value dump of every option, readable back with --config.
void echo_config(const CLI::App& app, const std::string& command, const fs::path& dir) {
  std::ofstream f = open_out(dir / "config.txt");
  f << "# cfr " << command << "\n";
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const std::string& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    if (opt->get_expected_max() == 0 && value.empty()) value = "false";
    f << name << "=" << value << "\n";
  }
}

Topology topology_of(const Settings& s) {
  if (s.topology.empty()) throw UsageError("--topology is required");
  return load_topology(s.topology, s.capacity_scale);
}

std::vector<TrafficMatrix> matrices_of(const Settings& s, const Topology& topo) {
  if (s.tm_format != "dense-rowmajor")
    throw UsageError("unsupported --tm-format '" + s.tm_format + "'");
  if (!s.tm.empty() && !s.generate.empty())
    throw UsageError("--tm and --generate are mutually exclusive");
  if (!s.tm.empty()) {
    std::vector<std::string> warnings;
    auto tms = load_tms(s.tm, topo.node_count(), &warnings);
    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    if (tms.empty()) throw Error("no traffic matrices in " + s.tm);
    return tms;
  }
  if (!s.generate.empty()) {
    TrafficModel model;
    try {
      model = parse_traffic_model(s.generate);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    return generate_tms(topo, model, s.count, s.target_util, s.seed);
  }
  throw UsageError("one of --tm or --generate is required");
}

// A train fraction of 1 uses every matrix for both training and testing.
Dataset dataset_of(const Settings& s, std::vector<TrafficMatrix> tms) {
  if (!(s.train_fraction > 0.0 && s.train_fraction <= 1.0))
    throw UsageError("--train-fraction must lie in (0, 1]");
  if (s.train_fraction == 1.0) {
    Dataset ds;
    ds.seed = s.seed;
    for (int i = 0; i < static_cast<int>(tms.size()); ++i) {
      ds.train_indices.push_back(i);
      ds.test_indices.push_back(i);
    }
    ds.matrices = std::move(tms);
    return ds;
  }
  return split_dataset(std::move(tms), s.train_fraction, s.seed);
}

int k_of(const Settings& s, const Topology& topo) {
  if (s.k > 0) {
    if (s.k > topo.flow_count()) throw UsageError("--k exceeds the number of flows");
    return s.k;
  }
  if (!(s.k_fraction > 0.0 && s.k_fraction <= 1.0))
    throw UsageError("--k-fraction must lie in (0, 1]");
  return resolve_k(s.k_fraction, topo.node_count());
}

TrainerConfig trainer_config(const Settings& s, int k) {
  TrainerConfig c;
  c.alpha0 = s.alpha0;
  c.alpha_min = s.alpha_min;
  c.decay_every = s.decay_every;
  c.decay_base = s.decay_base;
  c.beta = s.beta;
  c.batch_size = s.batch_size;
  c.k = k;
  c.actor_count = s.actors;
  c.total_iterations = s.iterations;
  c.seed = s.seed;
  c.filters = s.filters;
  c.hidden = s.hidden;
  c.checkpoint_every = s.checkpoint_every;
  c.sync = s.sync;
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  return c;
}

SuiteOptions suite_options(const Settings& s) {
  SuiteOptions o;
  o.seed = s.seed;
  o.brute_force_cap = s.brute_force_cap;
  o.scale_for_delay = !s.no_delay_scale;
  o.threads = s.threads;
  return o;
}

std::vector<Method> methods_of(const std::string& list) {
  std::vector<Method> out;
  for (const std::string& name : split_list(list)) {
    try {
      out.push_back(parse_method(name));
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  if (out.empty()) throw UsageError("--methods is empty");
  return out;
}

void dump_lp(const Settings& s, const Topology& topo, const TrafficMatrix& tm) {
  if (s.dump_lp.empty()) return;
  // Zero-demand flows carry nothing and are left out, as in the solver.
  std::vector<int> routed;
  for (int f = 0; f < topo.flow_count(); ++f) {
    auto [src, dst] = flow_of_index(f, topo.node_count());
    if (tm.at(src, dst) > 0.0) routed.push_back(f);
  }
  std::vector<double> zero(topo.link_count(), 0.0);
  const double eps = default_epsilon(topo.link_count(), topo.flow_count());
  std::ofstream f = open_out(s.dump_lp);
  write_lp_format(build_rerouting_lp(topo, tm, routed, zero, eps), f);
}

std::string ckpt_name(std::uint64_t it) { return "ckpt_" + std::to_string(it) + ".bin"; }

TrainResult run_training(const Settings& s, const Topology& topo, const Dataset& ds,
                         const TrainerConfig& cfg, const fs::path& dir, bool record) {
  std::vector<std::string> warnings;
  std::vector<TrainingState> states = training_states(ds, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  TrainHooks hooks;
  hooks.record_experiences = record;
  if (!s.resume.empty()) hooks.resume = load_checkpoint(s.resume);
  if (cfg.checkpoint_every > 0)
    hooks.on_checkpoint = [dir](const Checkpoint& ck) {
      save_checkpoint(ck, (dir / ckpt_name(ck.iteration)).string());
    };
  TrainResult r = train(topo, states, cfg, hooks);
  for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
  return r;
}

int cmd_train(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  Dataset ds = dataset_of(s, matrices_of(s, topo));
  const TrainerConfig cfg = trainer_config(s, k_of(s, topo));
  TrainResult r = run_training(s, topo, ds, cfg, dir, !s.no_experiences);
  const std::uint64_t final_it = static_cast<std::uint64_t>(cfg.total_iterations);
  save_checkpoint({r.params, final_it, r.baseline}, (dir / "checkpoint.bin").string());
  {
    std::ofstream f = open_out(dir / "train_log.csv");
    write_training_log(r.log, f, !s.no_timing);
  }
  if (!s.no_experiences) {
    std::ofstream f = open_out(dir / "experiences.csv");
    write_experiences(r.experiences, f);
  }
  std::printf("trained %ld iterations (%ld updates), K=%d, checkpoint %s\n",
              cfg.total_iterations, r.updates, cfg.k, (dir / "checkpoint.bin").c_str());
  return 0;
}

int cmd_eval(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  const std::vector<Method> methods = methods_of(s.methods);
  const bool wants_policy = std::find(methods.begin(), methods.end(), Method::kPolicy) != methods.end();
  if (wants_policy && s.checkpoint.empty())
    throw UsageError("method 'policy' needs a trained model: pass --checkpoint");
  Dataset ds = dataset_of(s, matrices_of(s, topo));
  const int k = k_of(s, topo);
  std::optional<PolicyParams> policy;
  if (!s.checkpoint.empty()) policy = load_checkpoint(s.checkpoint).params;
  auto test = ds.test();
  dump_lp(s, topo, test.front());
  SuiteResult r = eval_suite(topo, test, methods, policy ? &*policy : nullptr, k, suite_options(s));
  {
    std::ofstream f = open_out(dir / "results.csv");
    write_records_csv(r.records, f);
  }
  {
    std::ofstream f = open_out(dir / "summary.csv");
    write_summary_csv(r, f);
  }
  {
    std::ofstream f = open_out(dir / "cdf.csv");
    write_cdf_csv(r, f);
  }
  for (Method m : methods) {
    const auto& sm = r.summary[to_string(m)];
    std::printf("%-15s pr_u %.4f  pr_omega %.4f  rd %.4f  (K=%d, %zu matrices)\n",
                to_string(m).c_str(), sm.at("pr_u").mean, sm.at("pr_omega").mean,
                sm.at("rd").mean, m == Method::kEcmp ? 0 : k, test.size());
  }
  return 0;
}

int cmd_sweep_k(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  std::vector<double> fractions = number_list(s.fractions, "--fractions");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw UsageError("--fractions values must lie in (0, 1]");
  Method method;
  try {
    method = parse_method(s.method);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
  if (method == Method::kEcmp) throw UsageError("sweep-k needs a flow selector, not ecmp");
  if (method == Method::kPolicy && s.checkpoint.empty())
    throw UsageError("method 'policy' needs a trained model: pass --checkpoint");
  Dataset ds = dataset_of(s, matrices_of(s, topo));
  std::optional<PolicyParams> policy;
  if (!s.checkpoint.empty()) policy = load_checkpoint(s.checkpoint).params;
  auto rows = sweep_k(topo, ds.test(), fractions, method, policy ? &*policy : nullptr,
                      suite_options(s));
  std::ofstream f = open_out(dir / "sweep_k.csv");
  write_sweep_csv(rows, method, f);
  for (const SweepRow& r : rows) std::printf("K=%-4d mean pr_u %.6f\n", r.k, r.pr_u.mean);
  return 0;
}

int cmd_sweep_hyper(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  std::vector<HyperCell> grid;
  for (double a : number_list(s.grid_alpha, "--grid-alpha"))
    for (double w : number_list(s.grid_width, "--grid-width"))
      for (double b : number_list(s.grid_beta, "--grid-beta")) {
        if (w < 1 || w != static_cast<int>(w)) throw UsageError("--grid-width needs positive integers");
        grid.push_back({a, static_cast<int>(w), b});
      }
  Dataset ds = dataset_of(s, matrices_of(s, topo));
  const int k = k_of(s, topo);
  Settings budget = s;
  budget.iterations = s.hyper_iterations;
  const TrainerConfig base = trainer_config(budget, k);
  std::ofstream f = open_out(dir / "sweep_hyper.csv");
  f << "alpha0,width,beta,iterations,mean_pr_u,stddev_pr_u,count\n";
  SuiteOptions opt = suite_options(s);
  for (const HyperCell& cell : grid) {
    TrainerConfig cfg = apply_cell(base, cell);
    try {
      cfg.validate();
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
    cfg.checkpoint_every = 0;
    TrainResult r = run_training(s, topo, ds, cfg, dir, false);
    SuiteResult eval = eval_suite(topo, ds.test(), {Method::kPolicy}, &r.params, k, opt);
    const Summary& pr = eval.summary["policy"]["pr_u"];
    char buf[200];
    std::snprintf(buf, sizeof buf, "%.6g,%d,%.6g,%ld,%.10g,%.10g,%d\n", cell.alpha0, cell.width,
                  cell.beta, cfg.total_iterations, pr.mean, pr.stddev, pr.count);
    f << buf;
    f.flush();
    std::printf("alpha0 %-7g width %-4d beta %-5g mean pr_u %.6f\n", cell.alpha0, cell.width,
                cell.beta, pr.mean);
  }
  return 0;
}

int cmd_generate_tm(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  if (s.generate.empty()) throw UsageError("--generate is required (exponential or uniform)");
  auto tms = matrices_of(s, topo);
  std::ofstream f = open_out(dir / "tms.txt");
  write_tms(tms, f);
  std::printf("wrote %zu matrices to %s\n", tms.size(), (dir / "tms.txt").c_str());
  return 0;
}

int cmd_inspect_topology(const Settings& s, const fs::path& dir) {
  Topology topo = topology_of(s);
  EcmpFractions fr(topo);
  std::printf("topology %s: %d nodes, %d links, %d flows\n", topo.name().c_str(),
              topo.node_count(), topo.link_count(), topo.flow_count());
  std::ofstream f = open_out(dir / "links.csv");
  f << "link,src,dst,capacity,cost,out_degree_src\n";
  for (int e = 0; e < topo.link_count(); ++e) {
    const Link& l = topo.link(e);
    f << e << ',' << l.src << ',' << l.dst << ',' << l.capacity << ',' << l.cost << ','
      << topo.out_links(l.src).size() << '\n';
  }
  if (!s.tm.empty() || !s.generate.empty()) {
    auto tms = matrices_of(s, topo);
    dump_lp(s, topo, tms.front());
    std::ofstream u = open_out(dir / "utilization.csv");
    u << "tm_id,u_ecmp,u_opt\n";
    for (const TrafficMatrix& tm : tms) {
      u << tm.id() << ',' << ecmp_max_utilization(topo, tm, fr) << ','
        << solve_optimal_all_flows(topo, tm, fr).u_opt << '\n';
    }
  } else if (!s.dump_lp.empty()) {
    throw UsageError("--dump-lp needs traffic: pass --tm or --generate");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Critical flow rerouting with reinforcement learning"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "flat key=value config file; command-line flags win");

  Settings s;
  app.add_option("--seed", s.seed, "random seed");
  app.add_option("--out", s.out, "output directory");
  app.add_option("--actors", s.actors, "actor threads (1 = serial)");
  app.add_flag("--sync", s.sync, "synchronous rounds instead of async updates");
  app.add_option("--checkpoint-every", s.checkpoint_every, "save ckpt_<it>.bin every N updates (0 = off)");
  app.add_option("--dump-lp", s.dump_lp, "write the all-flows LP of the first matrix to this file");

  app.add_option("--topology", s.topology, "topology file");
  app.add_option("--capacity-scale", s.capacity_scale, "scale for capacities inferred from costs");
  app.add_option("--tm", s.tm, "traffic matrix file");
  app.add_option("--tm-format", s.tm_format, "traffic matrix layout")->check(CLI::IsMember({"dense-rowmajor"}));
  app.add_option("--generate", s.generate, "synthesize matrices: exponential or uniform");
  app.add_option("--count", s.count, "matrices to synthesize");
  app.add_option("--target-util", s.target_util, "ECMP max utilization of synthesized matrices");
  app.add_option("--train-fraction", s.train_fraction, "train share of the dataset (1 = train and test on all)");
  app.add_option("--k", s.k, "critical flows per matrix (overrides --k-fraction)");
  app.add_option("--k-fraction", s.k_fraction, "critical flows as a share of N(N-1)");

  app.add_option("--iterations", s.iterations, "learner updates");
  app.add_option("--alpha0", s.alpha0, "initial learning rate");
  app.add_option("--alpha-min", s.alpha_min, "learning rate floor");
  app.add_option("--decay-every", s.decay_every, "iterations per learning rate decay step");
  app.add_option("--decay-base", s.decay_base, "learning rate decay factor");
  app.add_option("--beta", s.beta, "entropy weight");
  app.add_option("--batch-size", s.batch_size, "samples per update");
  app.add_option("--filters", s.filters, "convolution filters");
  app.add_option("--hidden", s.hidden, "hidden layer width");
  app.add_option("--resume", s.resume, "checkpoint to resume training from");
  app.add_flag("--no-timing", s.no_timing, "write 0 in the wall_ms log column");
  app.add_flag("--no-experiences", s.no_experiences, "skip experiences.csv");

  app.add_option("--checkpoint", s.checkpoint, "trained checkpoint for the policy method");
  app.add_option("--methods", s.methods, "comma list: ecmp,policy,top_k,top_k_critical,random,brute_force")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--method", s.method, "selector for sweep-k");
  app.add_option("--fractions", s.fractions, "comma list of K fractions for sweep-k")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--brute-force-cap", s.brute_force_cap, "max subsets brute force may enumerate");
  app.add_flag("--no-delay-scale", s.no_delay_scale, "evaluate matrices as given, without rescaling to ECMP 0.9");
  app.add_option("--threads", s.threads, "evaluation threads (0 = all cores)");

  app.add_option("--grid-alpha", s.grid_alpha, "comma list of initial learning rates")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--grid-width", s.grid_width, "comma list of layer widths")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--grid-beta", s.grid_beta, "comma list of entropy weights")
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::Join);
  app.add_option("--hyper-iterations", s.hyper_iterations, "training budget per grid cell");

  auto* train = app.add_subcommand("train", "train a policy");
  auto* eval = app.add_subcommand("eval", "evaluate selectors on the test set");
  auto* sweep_k_cmd = app.add_subcommand("sweep-k", "mean pr_u against the number of critical flows");
  auto* sweep_hyper = app.add_subcommand("sweep-hyper", "train and evaluate one policy per grid cell");
  auto* generate_tm = app.add_subcommand("generate-tm", "write synthetic traffic matrices");
  auto* inspect = app.add_subcommand("inspect-topology", "summarize a topology");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s.actors < 1) throw UsageError("--actors must be at least 1");
    if (s.checkpoint_every < 0) throw UsageError("--checkpoint-every must be non-negative");
    const CLI::App* cmd = app.get_subcommands().front();
    const fs::path dir = prepare_out(s);
    echo_config(app, cmd->get_name(), dir);
    if (cmd == train) return cmd_train(s, dir);
    if (cmd == eval) return cmd_eval(s, dir);
    if (cmd == sweep_k_cmd) return cmd_sweep_k(s, dir);
    if (cmd == sweep_hyper) return cmd_sweep_hyper(s, dir);
    if (cmd == generate_tm) return cmd_generate_tm(s, dir);
    if (cmd == inspect) return cmd_inspect_topology(s, dir);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
