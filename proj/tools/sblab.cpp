// sblab: command-line driver for the simplicity-bias experiments.
//
// Every subcommand accepts --config FILE (flat key = value, flags win over
// file values) and writes a manifest next to its outputs that can be fed
// straight back through --config to reproduce them.

#include "sblab/analysis.hpp"
#include "sblab/config.hpp"
#include "sblab/datasets.hpp"
#include "sblab/dynamics.hpp"
#include "sblab/gfield.hpp"
#include "sblab/io.hpp"
#include "sblab/rng.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace sblab;

namespace {

int g_verbosity = 1;  // 0 quiet, 1 normal, 2 verbose

void say(const std::string& s) {
  if (g_verbosity >= 1) std::cout << s << '\n';
}
void trace(const std::string& s) {
  if (g_verbosity >= 2) std::cerr << "[sblab] " << s << '\n';
}

// Raised for bad values that CLI11 cannot see (config keys, enum spellings).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

long long parse_integer(const std::string& text, const std::string& key) {
  long long v = 0;
  std::size_t pos = 0;
  try {
    v = std::stoll(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size()) throw UsageError(key + ": expected an integer, got '" + text + "'");
  return v;
}

// One flag bound to one config key.
struct Binding {
  std::string key;
  CLI::Option* opt;
  std::function<void(const std::string&)> load;
  std::function<std::string()> save;
};

class Command {
 public:
  Command(CLI::App& parent, const std::string& name, const std::string& about)
      : app(parent.add_subcommand(name, about)), name_(name) {
    app->add_option("--config", config_path, "key = value file; flags override it");
  }

  CLI::Option* real(const std::string& flag, const std::string& key, double& var, const std::string& help) {
    auto* o = app->add_option(flag, var, help)->capture_default_str();
    binds_.push_back({key, o, [&var, key](const std::string& s) { var = parse_real(s, key); },
                      [&var] { return format_real(var); }});
    return o;
  }
  CLI::Option* angle(const std::string& flag, const std::string& key, std::string& var, const std::string& help) {
    auto* o = app->add_option(flag, var, help)->capture_default_str();
    binds_.push_back({key, o, [&var](const std::string& s) { var = s; },
                      [&var] { return format_real(parse_angle_expr(var)); }});
    return o;
  }
  template <class Int>
  CLI::Option* integer(const std::string& flag, const std::string& key, Int& var, const std::string& help) {
    auto* o = app->add_option(flag, var, help)->capture_default_str();
    binds_.push_back({key, o, [&var, key](const std::string& s) { var = static_cast<Int>(parse_integer(s, key)); },
                      [&var] { return std::to_string(var); }});
    return o;
  }
  CLI::Option* text(const std::string& flag, const std::string& key, std::string& var, const std::string& help) {
    auto* o = app->add_option(flag, var, help)->capture_default_str();
    binds_.push_back({key, o, [&var](const std::string& s) { var = s; }, [&var] { return var; }});
    return o;
  }
  CLI::Option* toggle(const std::string& flag, const std::string& key, bool& var, const std::string& help) {
    auto* o = app->add_flag(flag, var, help);
    binds_.push_back({key, o,
                      [&var, key](const std::string& s) {
                        if (s != "true" && s != "false") throw UsageError(key + ": expected true or false");
                        var = s == "true";
                      },
                      [&var] { return std::string(var ? "true" : "false"); }});
    return o;
  }

  /// Marks a key that must come from the command line or the config file.
  void require(const std::string& key) { required_.push_back(key); }

  /// Fills every flag not given on the command line from the config file.
  void apply_config() {
    Config c;
    if (!config_path.empty()) c = Config::load(config_path);
    for (const auto& [k, v] : c.entries()) {
      bool known = false;
      for (const auto& b : binds_) known = known || b.key == k;
      if (!known) throw UsageError(config_path + ": unknown key '" + k + "' for " + name_);
    }
    for (const auto& b : binds_)
      if (b.opt->count() == 0)
        if (auto v = c.get(b.key)) b.load(*v);
    for (const auto& key : required_)
      for (const auto& b : binds_)
        if (b.key == key && b.opt->count() == 0 && !c.has(key))
          throw UsageError(b.opt->get_name() + " is required (flag or config key '" + key + "')");
  }

  Config snapshot() const {
    Config c;
    for (const auto& b : binds_) c.set(b.key, b.save());
    return c;
  }

  /// Manifest: the effective config plus provenance comments.
  void write_manifest(const fs::path& path, double wall_seconds) const {
    auto out = open_output(path);
    snapshot().write(out, {"sblab " + name_, "version: " + std::string(build_version()),
                           "wall_time_s: " + format_real(wall_seconds),
                           "re-run: sblab " + name_ + " --config " + path.filename().string()});
  }

  CLI::App* app;
  std::string config_path;

 private:
  std::string name_;
  std::vector<Binding> binds_;
  std::vector<std::string> required_;
};

fs::path file_manifest(const std::string& out) { return fs::path(out + ".manifest.txt"); }

ActivationCfg make_activation(const std::string& kind, double xi, int d) {
  if (kind == "relu") return ActivationCfg::relu(d);
  if (kind == "smoothed") return ActivationCfg::smoothed(xi, d);
  throw UsageError("--activation must be relu or smoothed, got '" + kind + "'");
}

InitLaw make_law(const std::string& s) {
  if (s == "sphere") return InitLaw::Sphere;
  if (s == "box") return InitLaw::UniformBox;
  throw UsageError("--init-law must be sphere or box, got '" + s + "'");
}

template <class F>
void with_file(const fs::path& p, F&& f) {
  auto out = open_output(p);
  f(out);
  if (!out) throw IoError("write failed: " + p.string());
}

std::string describe_extrema(const GLandscape& ls) {
  std::ostringstream s;
  s << "lambda = " << format_real(ls.lambda) << ", " << ls.extrema.size() << " extrema";
  for (const auto& e : ls.extrema) {
    s << "\n  G = " << format_real(e.value) << "  dir = (";
    for (Eigen::Index k = 0; k < e.direction.size(); ++k) s << (k ? ", " : "") << format_real(e.direction(k));
    s << ")";
  }
  return s.str();
}

// ---- dataset options shared by several subcommands ---------------------------

struct XorOpts {
  int d = 2;
  int per_cluster = 8;
  double delta = 0.05;
  double delta0 = 0.01;
  double xi = 0.0;

  void bind(Command& c) {
    c.integer("--d", "d", d, "ambient dimension");
    c.integer("--per-cluster", "per_cluster", per_cluster, "base draws per cluster (each closed under the symmetries)");
    c.real("--delta", "delta", delta, "cluster radius");
    c.real("--Delta0", "delta0_margin", delta0, "regularity margin: |x1|, |x2| >= xi + 2 Delta0");
  }
  XorSpec spec(std::uint64_t seed) const {
    XorSpec s;
    s.d = d;
    s.per_cluster = per_cluster;
    s.delta = delta;
    s.Delta0 = delta0;
    s.xi = xi;
    s.seed = seed;
    return s;
  }
};

struct SkewOpts {
  std::string alpha = "pi/2";
  int per_cluster = 8;
  double delta = 0.05;
  double delta0 = 0.0;
  double xi = 0.0;

  void bind(Command& c) {
    c.angle("--alpha", "alpha_rad", alpha, "angle between cluster axes (accepts pi/3 etc.)");
    c.integer("--per-cluster", "per_cluster", per_cluster, "base draws per cluster");
    c.real("--delta", "delta", delta, "cluster radius");
    c.real("--Delta0", "delta0_margin", delta0, "regularity margin in the cluster frame");
  }
  SkewSpec spec(std::uint64_t seed) const {
    SkewSpec s;
    s.alpha = parse_angle_expr(alpha);
    s.per_cluster = per_cluster;
    s.delta = delta;
    s.Delta0 = delta0;
    s.xi = xi;
    s.seed = seed;
    return s;
  }
};

using Runner = std::function<int()>;

// ---- subcommands ---------------------------------------------------------------

Runner add_gen_xor(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "gen-xor", "generate symmetric XOR-like data");
  auto st = std::make_shared<XorOpts>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  st->bind(*c);
  c->real("--xi", "xi", st->xi, "smoothing radius the data must be regular for");
  c->integer("--seed", "seed", *seed, "master seed");
  c->text("-o,--out", "out", *out, "output CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st, seed, out] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = gen_xor(st->spec(stream_seed(*seed, "dataset")));
    save_dataset(*out, data);
    cp->write_manifest(file_manifest(*out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say("wrote " + *out + " (" + std::to_string(data.size()) + " points)");
    return 0;
  };
}

Runner add_gen_skew(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "gen-skew", "generate skewed XOR-like data in the plane");
  auto st = std::make_shared<SkewOpts>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto out = std::make_shared<std::string>();
  st->bind(*c);
  c->real("--xi", "xi", st->xi, "smoothing radius the data must be regular for");
  c->integer("--seed", "seed", *seed, "master seed");
  c->text("-o,--out", "out", *out, "output CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st, seed, out] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = gen_skewed_xor(st->spec(stream_seed(*seed, "dataset")));
    save_dataset(*out, data);
    cp->write_manifest(file_manifest(*out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say("wrote " + *out + " (" + std::to_string(data.size()) + " points)");
    return 0;
  };
}

struct LandscapeState {
  std::string data;
  std::string activation = "relu";
  double xi = 0.01;
  int starts = 64;
  double dedup = 0.01;
  std::uint64_t seed = 0;
  std::string out;
};

Runner add_landscape(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "landscape", "global extrema of |G| on the unit sphere");
  auto st = std::make_shared<LandscapeState>();
  c->text("--data", "data", st->data, "dataset CSV");
  c->require("data");
  c->text("--activation", "activation", st->activation, "relu or smoothed");
  c->real("--xi", "xi", st->xi, "smoothing radius (smoothed only)");
  c->integer("--starts", "starts", st->starts, "random ascent starts per sign");
  c->real("--dedup-angle", "dedup_angle_rad", st->dedup, "merge terminals closer than this");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "output CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = load_dataset(st->data);
    const auto cfg = make_activation(st->activation, st->xi, static_cast<int>(data.dim()));
    ExtremaOptions eo;
    eo.n_starts = st->starts;
    eo.seed = stream_seed(st->seed, "landscape");
    eo.dedup_angle = st->dedup;
    const auto ls = find_extrema(data, cfg, eo);
    with_file(st->out, [&](std::ostream& o) { write_landscape_csv(o, ls); });
    cp->write_manifest(file_manifest(st->out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say(describe_extrema(ls));
    return 0;
  };
}

struct TrainState {
  std::string data;
  SkewOpts skew;
  std::string activation = "relu";
  double xi = 0.01;
  int m = 4096;
  double sigma = 0.0078125;
  std::string law = "sphere";
  double lr = 0.0625;
  long epochs = 8192;
  long log_every = 64;
  int tracked = 16;
  double align_tol = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

Runner add_train(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "train", "wide-network gradient descent with alignment analysis");
  auto st = std::make_shared<TrainState>();
  c->text("--data", "data", st->data, "dataset CSV (default: generate skewed XOR data)");
  st->skew.bind(*c);
  c->text("--activation", "activation", st->activation, "relu or smoothed");
  c->real("--xi", "xi", st->xi, "smoothing radius (smoothed only)");
  c->integer("--m", "m", st->m, "hidden width");
  c->real("--sigma", "sigma", st->sigma, "initialization scale");
  c->text("--init-law", "init_law", st->law, "sphere (unit-norm v0) or box (v0 uniform in [-1/sqrt(d), 1/sqrt(d)]^d)");
  c->real("--lr", "lr", st->lr, "constant learning rate");
  c->integer("--epochs", "epochs", st->epochs, "full-batch steps");
  c->integer("--log-every", "log_every", st->log_every, "logging cadence in epochs");
  c->integer("--track", "tracked_neurons", st->tracked, "neurons with per-neuron trajectory columns");
  c->real("--align-tol", "align_tol_rad", st->align_tol, "alignment tolerance");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "output directory");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(st->out);
    const auto data = st->data.empty() ? gen_skewed_xor(st->skew.spec(stream_seed(st->seed, "dataset")))
                                       : load_dataset(st->data);
    const int d = static_cast<int>(data.dim());
    const auto cfg = make_activation(st->activation, st->xi, d);
    ExtremaOptions eo;
    eo.seed = stream_seed(st->seed, "landscape");
    const auto ls = find_extrema(data, cfg, eo);
    trace(describe_extrema(ls));

    InitSpec is;
    is.sigma = st->sigma;
    is.m = st->m;
    is.d = d;
    is.seed = stream_seed(st->seed, "init");
    is.law = make_law(st->law);
    const Params theta0 = init_params(is, cfg);
    RunOptions ro;
    ro.log_every = st->log_every;
    ro.refs = ls.directions();
    ro.max_tracked = st->tracked;
    ro.observer = [&](long e, double, const Params&) {
      if (e % (ro.log_every * 16) == 0) trace("epoch " + std::to_string(e));
    };
    const auto traj = gd_run(theta0, cfg, data, ConstantLr{st->lr}, st->epochs, ro);
    const auto rep = alignment_report(traj.final_state, ls.directions(), st->align_tol);

    save_dataset(dir / "dataset.csv", data);
    with_file(dir / "landscape.csv", [&](std::ostream& o) { write_landscape_csv(o, ls); });
    with_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
    with_file(dir / "alignment.csv", [&](std::ostream& o) { write_alignment_csv(o, rep); });
    with_file(dir / "final_params.csv", [&](std::ostream& o) { write_params_csv(o, traj.final_state); });
    std::ostringstream sum;
    sum << "first_layer_scale_initial = " << format_real(traj.records.front().first_layer_scale) << '\n'
        << "first_layer_scale_final = " << format_real(rep.first_layer_scale) << '\n'
        << "aligned_mass = " << format_real(rep.aligned_mass) << '\n'
        << "aligned_neurons = " << rep.aligned_count << '\n'
        << "aligned_median_relative_scale = " << format_real(rep.aligned_median_scale) << '\n'
        << "unaligned_max_relative_scale = " << format_real(rep.unaligned_max_scale) << '\n'
        << "final_loss = " << format_real(traj.records.back().loss) << '\n'
        << "sign_flips = " << traj.sign_flips << '\n'
        << "aborted = " << (traj.aborted ? traj.abort_reason : "no") << '\n';
    with_file(dir / "summary.txt", [&](std::ostream& o) { o << sum.str(); });
    cp->write_manifest(dir / "manifest.txt",
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say(sum.str() + "wrote " + dir.string());
    if (traj.aborted) {
      std::cerr << "sblab train: " << traj.abort_reason << '\n';
      return 1;
    }
    return 0;
  };
}

struct Train4State {
  std::string data;
  XorOpts xor_opts{2, 8, 0.01, 0.001, 0.0};
  std::string init = "1e-4,-1e-5,1e-7,-1e-6";
  std::string schedule = "four-neuron";
  double lr = 0.0078125;
  long epochs = 20000;
  long log_every = 16;
  std::uint64_t seed = 0;
  std::string out;
};

Runner add_train4(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "train4", "four-neuron ReLU network aligned with the cluster axes");
  auto st = std::make_shared<Train4State>();
  c->text("--data", "data", st->data, "dataset CSV (default: generate XOR data in the plane)");
  c->integer("--per-cluster", "per_cluster", st->xor_opts.per_cluster, "base draws per cluster");
  c->real("--delta", "delta", st->xor_opts.delta, "cluster radius");
  c->real("--Delta0", "delta0_margin", st->xor_opts.delta0, "regularity margin");
  c->text("--init", "init_u", st->init, "signed u_k(0) for the neurons at e1, e2, -e1, -e2");
  c->text("--schedule", "schedule", st->schedule, "four-neuron (adaptive) or constant");
  c->real("--lr", "lr", st->lr, "learning rate for --schedule constant");
  c->integer("--epochs", "epochs", st->epochs, "full-batch steps");
  c->integer("--log-every", "log_every", st->log_every, "logging cadence in epochs");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "output directory");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const fs::path dir(st->out);
    const auto data =
        st->data.empty() ? gen_xor(st->xor_opts.spec(stream_seed(st->seed, "dataset"))) : load_dataset(st->data);
    if (data.dim() != 2) throw UsageError("train4 expects planar data");
    const auto cfg = ActivationCfg::relu(2);
    Schedule sched;
    if (st->schedule == "four-neuron")
      sched = FourNeuronLr{};
    else if (st->schedule == "constant")
      sched = ConstantLr{st->lr};
    else
      throw UsageError("--schedule must be four-neuron or constant");
    const Params theta0 = four_neuron_init(parse_real_list(st->init), 2);

    std::ostringstream evo;
    CsvWriter w(evo);
    w.header({"epoch", "time", "lr", "loss", "min_margin", "alpha_1", "alpha_2", "alpha_3", "alpha_4", "scale_1",
              "scale_2", "scale_3", "scale_4", "u_1", "u_2", "u_3", "u_4", "angle_to_breve"});
    RunOptions ro;
    ro.log_every = st->log_every;
    ro.refs = four_neuron_refs(2);
    ro.observer = [&](long e, double t, const Params& p) {
      const Vector z = margins(p, cfg, data);
      double l = 0.0;
      for (Eigen::Index i = 0; i < z.size(); ++i) l += logistic_loss(z(i));
      w.field(e).field(t).field(schedule_eval(sched, e)).field(l / static_cast<double>(z.size())).field(z.minCoeff());
      for (int k = 0; k < 4; ++k) w.field(four_neuron_signed_angle(p, k));
      for (int k = 0; k < 4; ++k) w.field(p.V.row(k).norm());
      for (int k = 0; k < 4; ++k) w.field(p.u(k));
      w.field(angle_to_theta_breve(p));
      w.end_row();
    };
    const auto traj = gd_run(theta0, cfg, data, sched, st->epochs, ro);
    const auto hit = accuracy_time_detector(traj.records);

    save_dataset(dir / "dataset.csv", data);
    with_file(dir / "trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, traj); });
    with_file(dir / "evo.csv", [&](std::ostream& o) { o << evo.str(); });
    with_file(dir / "final_params.csv", [&](std::ostream& o) { write_params_csv(o, traj.final_state); });
    std::ostringstream sum;
    sum << "final_min_margin = " << format_real(traj.records.back().min_margin) << '\n'
        << "first_epoch_margin_above_4.67 = " << (hit ? std::to_string(*hit) : "none") << '\n'
        << "final_angle_to_breve = " << format_real(angle_to_theta_breve(traj.final_state)) << '\n'
        << "sign_flips = " << traj.sign_flips << '\n'
        << "aborted = " << (traj.aborted ? traj.abort_reason : "no") << '\n';
    with_file(dir / "summary.txt", [&](std::ostream& o) { o << sum.str(); });
    cp->write_manifest(dir / "manifest.txt",
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say(sum.str() + "wrote " + dir.string());
    if (traj.aborted) {
      std::cerr << "sblab train4: " << traj.abort_reason << '\n';
      return 1;
    }
    return 0;
  };
}

struct CoupleState {
  std::string data;
  XorOpts xor_opts{3, 8, 0.05, 0.01, 0.01};
  double xi = 0.01;
  int m = 32;
  std::string r_list = "0.2,0.1,0.05,0.025";
  double kappa = 0.5;
  double h = 0.01;
  std::uint64_t seed = 0;
  bool probes = true;
  std::string out;
};

Runner add_couple(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "couple", "phase-1 sweep: full vs linearized dynamics over r");
  auto st = std::make_shared<CoupleState>();
  c->text("--data", "data", st->data, "dataset CSV (default: generate XOR data in R^3)");
  st->xor_opts.bind(*c);
  c->real("--xi", "xi", st->xi, "smoothing radius");
  c->integer("--m", "m", st->m, "random neurons (multiple of 4), before the two axis probes");
  c->text("--r-list", "r_list", st->r_list, "comma-separated target scales r");
  c->real("--kappa-star", "kappa_star", st->kappa, "exponent in sigma = r^(1 + kappa*)");
  c->real("--rk4-step", "rk4_step", st->h, "RK4 step");
  c->toggle("--probes,!--no-probes", "axis_probes", st->probes, "add the two probes on the last axis");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "output CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = st->xor_opts.spec(stream_seed(st->seed, "dataset"));
    spec.xi = st->xi;
    const auto data = st->data.empty() ? gen_xor(spec) : load_dataset(st->data);
    const auto cfg = ActivationCfg::smoothed(st->xi, static_cast<int>(data.dim()));
    ExtremaOptions eo;
    eo.seed = stream_seed(st->seed, "landscape");
    const auto ls = find_extrema(data, cfg, eo);
    const auto base = coupling_base(st->m, static_cast<int>(data.dim()), stream_seed(st->seed, "init"), st->probes);
    const auto rep = phase1_coupling(data, cfg, base, parse_real_list(st->r_list), st->kappa, ls);
    with_file(st->out, [&](std::ostream& o) { write_coupling_csv(o, rep); });
    cp->write_manifest(file_manifest(st->out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::ostringstream s;
    s << "lambda = " << format_real(rep.lambda) << ", |P| = " << rep.prominent.size();
    for (const auto& r : rep.rows)
      s << "\n  r = " << format_real(r.r) << "  dir_error = " << format_real(r.dir_error)
        << "  scale_gap = " << format_real(r.scale_gap) << "  dist/r = " << format_real(r.full_lin_dist);
    say(s.str());
    return 0;
  };
}

struct MarginState {
  std::string data;
  std::string params;
  bool breve = false;
  std::string activation = "relu";
  double xi = 0.01;
  std::string out;
};

void bind_margin_common(Command& c, MarginState& st) {
  c.text("--data", "data", st.data, "dataset CSV");
  c.require("data");
  c.text("--params", "params", st.params, "parameter CSV (u, v_0..)");
  c.toggle("--breve", "breve", st.breve, "use the canonical four-neuron direction instead of --params");
  c.text("--activation", "activation", st.activation, "relu or smoothed");
  c.real("--xi", "xi", st.xi, "smoothing radius (smoothed only)");
}

Params margin_params(const MarginState& st, int d) {
  if (st.breve == !st.params.empty()) throw UsageError("give exactly one of --params and --breve");
  return st.breve ? theta_breve(d) : read_params_csv(st.params);
}

Runner add_margin(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "margin", "normalized margin of a parameter vector");
  auto st = std::make_shared<MarginState>();
  bind_margin_common(*c, *st);
  c->text("-o,--out", "out", st->out, "per-point margin CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = load_dataset(st->data);
    const auto cfg = make_activation(st->activation, st->xi, static_cast<int>(data.dim()));
    const Params theta = margin_params(*st, static_cast<int>(data.dim()));
    const auto rep = normalized_margin(theta, cfg, data);
    with_file(st->out, [&](std::ostream& o) {
      CsvWriter w(o);
      w.header({"point", "margin", "normalized"});
      const double sq = theta.squared_norm();
      for (Eigen::Index i = 0; i < rep.margins.size(); ++i) {
        w.field(static_cast<long>(i)).field(rep.margins(i)).field(rep.margins(i) / sq);
        w.end_row();
      }
    });
    cp->write_manifest(file_manifest(st->out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say("gamma = " + format_real(rep.gamma) + " (point " + std::to_string(rep.argmin) + ")");
    return 0;
  };
}

struct ProbeState : MarginState {
  long samples = 10000;
  double radius = 1e-3;
  int unbalance_neuron = -1;
  double unbalance_factor = 2.0;
  std::uint64_t seed = 0;
};

Runner add_probe(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "probe-margin", "random local search around a margin direction");
  auto st = std::make_shared<ProbeState>();
  bind_margin_common(*c, *st);
  c->integer("--samples", "samples", st->samples, "random perturbations");
  c->real("--radius", "radius", st->radius, "perturbation norm (direction is unit-normalized first)");
  c->integer("--unbalance", "unbalance_neuron", st->unbalance_neuron, "scale u of this neuron before probing (-1: off)");
  c->real("--unbalance-factor", "unbalance_factor", st->unbalance_factor, "factor for --unbalance");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "report CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = load_dataset(st->data);
    const auto cfg = make_activation(st->activation, st->xi, static_cast<int>(data.dim()));
    Params theta = margin_params(*st, static_cast<int>(data.dim()));
    if (st->unbalance_neuron >= 0) {
      if (st->unbalance_neuron >= theta.m()) throw UsageError("--unbalance index out of range");
      theta.u(st->unbalance_neuron) *= st->unbalance_factor;
    }
    const auto rep = local_max_margin_probe(theta, cfg, data, st->samples, st->radius, stream_seed(st->seed, "probe"));
    with_file(st->out, [&](std::ostream& o) {
      CsvWriter w(o);
      w.header({"gamma0", "max_improvement", "best_sample", "samples", "improved", "tol", "pass"});
      w.field(rep.gamma0).field(rep.max_improvement).field(rep.best_sample).field(rep.samples).field(rep.improved)
          .field(rep.tol).field(rep.pass ? 1 : 0);
      w.end_row();
    });
    cp->write_manifest(file_manifest(st->out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    say("gamma0 = " + format_real(rep.gamma0) + ", max improvement = " + format_real(rep.max_improvement) + ", " +
        std::to_string(rep.improved) + "/" + std::to_string(rep.samples) + " samples improve");
    return 0;
  };
}

struct CaptureState {
  std::string data;
  XorOpts xor_opts{3, 2, 0.01, 0.0001, 0.001};
  double xi = 0.001;
  std::string m_list = "1,2,4,8,16,32";
  long trials = 2000;
  double angle_tol = 0.1;
  std::uint64_t seed = 0;
  std::string out;
};

Runner add_capture(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds, const int& threads) {
  auto c = std::make_unique<Command>(root, "capture-mc", "probability that m random neurons capture every extremum");
  auto st = std::make_shared<CaptureState>();
  c->text("--data", "data", st->data, "dataset CSV (default: generate XOR data in R^3)");
  st->xor_opts.bind(*c);
  c->real("--xi", "xi", st->xi, "smoothing radius");
  c->text("--m-list", "m_list", st->m_list, "comma-separated widths");
  c->integer("--trials", "trials", st->trials, "Monte Carlo trials");
  c->real("--angle-tol", "angle_tol_rad", st->angle_tol, "capture tolerance");
  c->integer("--seed", "seed", st->seed, "master seed");
  c->text("-o,--out", "out", st->out, "output CSV");
  c->require("out");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st, &threads] {
    const auto t0 = std::chrono::steady_clock::now();
    auto spec = st->xor_opts.spec(stream_seed(st->seed, "dataset"));
    spec.xi = st->xi;
    const auto data = st->data.empty() ? gen_xor(spec) : load_dataset(st->data);
    const auto cfg = ActivationCfg::smoothed(st->xi, static_cast<int>(data.dim()));
    ExtremaOptions eo;
    eo.seed = stream_seed(st->seed, "landscape");
    const auto ls = find_extrema(data, cfg, eo);
    CaptureOptions co;
    co.angle_tol = st->angle_tol;
    const auto rows = capture_probability_mc(data, cfg, ls, parse_int_list(st->m_list), st->trials,
                                             stream_seed(st->seed, "mc"), co, threads);
    with_file(st->out, [&](std::ostream& o) { write_capture_csv(o, rows); });
    cp->write_manifest(file_manifest(st->out),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::ostringstream s;
    for (const auto& r : rows)
      s << "m = " << r.m << "  frequency = " << format_real(r.frequency) << "  bound = " << format_real(r.bound)
        << '\n';
    say(s.str());
    return 0;
  };
}

struct ValidateState {
  std::string data;
  double xi = 0.0;
  double delta0 = 0.0;
  std::string out;
};

Runner add_validate(CLI::App& root, std::vector<std::unique_ptr<Command>>& cmds) {
  auto c = std::make_unique<Command>(root, "validate", "check the XOR-data assumptions clause by clause");
  auto st = std::make_shared<ValidateState>();
  c->text("--data", "data", st->data, "dataset CSV");
  c->require("data");
  c->real("--xi", "xi", st->xi, "smoothing radius");
  c->real("--Delta0", "delta0_margin", st->delta0, "regularity margin");
  c->text("-o,--out", "out", st->out, "report CSV (optional)");
  Command* cp = c.get();
  cmds.push_back(std::move(c));
  return [cp, st] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = load_dataset(st->data);
    const auto rep = validate_xor_assumptions(data, st->xi, st->delta0);
    if (!st->out.empty()) {
      with_file(st->out, [&](std::ostream& o) { write_validation_csv(o, rep); });
      cp->write_manifest(file_manifest(st->out),
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::ostringstream s;
    const std::pair<const char*, const ClauseCheck*> clauses[] = {
        {"clusters", &rep.clusters}, {"reflections", &rep.reflections},
        {"permutation", &rep.permutation}, {"regularity", &rep.regularity}};
    for (const auto& [name, cl] : clauses)
      s << name << ": " << (cl->pass ? "ok" : "FAIL (point " + std::to_string(cl->worst_index) + ": " + cl->detail + ")")
        << '\n';
    s << "achieved delta = " << format_real(rep.achieved_delta);
    say(s.str());
    if (!rep.all_pass()) {
      std::cerr << "sblab validate: " << st->data << " violates the XOR assumptions\n";
      return 1;
    }
    return 0;
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App root{"sblab: simplicity-bias experiments on XOR-like data"};
  root.require_subcommand(1);
  root.set_version_flag("--version", std::string(build_version()));
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool quiet = false, verbose = false;
  root.add_option("--threads", threads, "parallel workers for Monte Carlo sweeps")->capture_default_str();
  root.add_flag("-q,--quiet", quiet, "print nothing on success");
  root.add_flag("-v,--verbose", verbose, "progress on stderr");
  root.fallthrough();

  std::vector<std::unique_ptr<Command>> cmds;
  std::vector<std::pair<CLI::App*, Runner>> runners;
  auto reg = [&](Runner r) { runners.emplace_back(cmds.back()->app, std::move(r)); };
  reg(add_gen_xor(root, cmds));
  reg(add_gen_skew(root, cmds));
  reg(add_landscape(root, cmds));
  reg(add_train(root, cmds));
  reg(add_train4(root, cmds));
  reg(add_couple(root, cmds));
  reg(add_margin(root, cmds));
  reg(add_probe(root, cmds));
  reg(add_capture(root, cmds, threads));
  reg(add_validate(root, cmds));

  try {
    root.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return root.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return root.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "sblab: " << e.what() << "\n\n";
    const auto subs = root.get_subcommands();
    std::cerr << (subs.empty() ? root.help() : subs.front()->help());
    return 2;
  }
  g_verbosity = quiet ? 0 : (verbose ? 2 : 1);

  for (std::size_t k = 0; k < runners.size(); ++k) {
    if (!runners[k].first->parsed()) continue;
    try {
      cmds[k]->apply_config();
      return runners[k].second();
    } catch (const UsageError& e) {
      std::cerr << "sblab: " << e.what() << "\n\n" << runners[k].first->help();
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "sblab " << runners[k].first->get_name() << ": " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
