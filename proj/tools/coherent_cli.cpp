// coherent: forward simulation of predictive sequences from the command line.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coherent/coherent.hpp"
#include "coherent/io.hpp"

namespace fs = std::filesystem;
using namespace coherent;
using io::Json;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit : int { ok = 0, invalid = 1, usage = 2, io_failure = 3, parse_failure = 4 };

struct usage_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct validity_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string model = "kde";
  std::string data;
  std::string builtin;
  std::vector<double> pseudo;
  std::optional<std::size_t> n;
  std::optional<std::size_t> m;
  std::size_t N = 1000;
  std::optional<std::size_t> padding;
  std::optional<double> tau;
  bool rule_of_thumb = false;
  std::string mixing = "geometric";
  double prior_alpha = 1.0, prior_beta = 1.0;
  double mu0 = 0.0, phi0 = 0.0;
  std::size_t paths = 1000;
  double level = 0.9;
  std::optional<double> grid_min, grid_max;
  std::size_t grid_points = 512;
  std::optional<std::uint64_t> seed;
  std::string out;
  unsigned workers = 0;
  double epsilon = 0.5;
  double alpha = 0.05;
  std::vector<std::size_t> cone;
  std::size_t nodes = 2000;
  std::optional<double> tolerance;
};

// ---------------------------------------------------------------------------
// Resolution of options into a run.
// ---------------------------------------------------------------------------

bool interactive() { return isatty(STDIN_FILENO) && isatty(STDOUT_FILENO); }

std::uint64_t resolve_seed(Options& o) {
  if (o.seed) return *o.seed;
  if (!interactive()) throw usage_error("--seed is required when not running interactively");
  o.seed = std::random_device{}() | (static_cast<std::uint64_t>(std::random_device{}()) << 32);
  std::cerr << "no --seed given; using " << *o.seed << '\n';
  return *o.seed;
}

fs::path output_dir(const Options& o) {
  fs::path dir = ".";
  if (!o.out.empty()) {
    dir = o.out;
  } else if (const char* env = std::getenv("COHERENT_OUT_DIR"); env && *env) {
    dir = env;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw io::io_error("cannot create output directory " + dir.string());
  return dir;
}

struct Loaded {
  ObservedSample sample;
  std::string source;
  std::string units;
};

Loaded load_sample(const Options& o) {
  if (!o.data.empty() && !o.builtin.empty()) throw usage_error("give only one of --data and --builtin");
  if (o.data.empty() && o.builtin.empty()) throw usage_error("one of --data or --builtin is required");
  Loaded l;
  ObservedSample raw;
  if (!o.builtin.empty()) {
    raw = io::builtin_sample(o.builtin);
    l.source = "builtin:" + o.builtin;
    l.units = o.builtin == "galaxy" ? "1e3 km/s" : "synthetic";
  } else {
    raw = io::read_sample(o.data);
    l.source = o.data;
    l.units = "as given";
  }
  std::vector<double> values(raw.values().begin(), raw.values().end());
  if (o.n) {
    if (*o.n < 1 || *o.n > values.size())
      throw usage_error("--n must lie in [1, " + std::to_string(values.size()) + "]");
    values.resize(*o.n);
  }
  l.sample = ObservedSample::with_pseudo(o.pseudo, values);
  return l;
}

bool is_kde(const std::string& model) { return model == "kde" || model == "kde-series"; }

HorizonConfig resolve_horizon(Options& o, const ObservedSample& sample) {
  if (!o.padding) o.padding = is_kde(o.model) ? 30 : 0;
  if (is_kde(o.model)) {
    if (o.rule_of_thumb) {
      if (o.tau) throw usage_error("--tau and --rule-of-thumb are exclusive");
      o.tau = silverman_tau(sample.values());
    }
    if (!o.tau) throw usage_error("--tau is required for the kde model (or pass --rule-of-thumb)");
  }
  if (o.N < sample.size())
    throw usage_error("--N=" + std::to_string(o.N) + " is below the sample size " + std::to_string(sample.size()));
  return make_horizon(sample, o.N, *o.padding, o.tau.value_or(1.0));
}

Json metadata(const std::string& command, const Options& o, const Loaded* data, const HorizonConfig* cfg) {
  Json j;
  j["schema_version"] = io::kSchemaVersion;
  j["tool"] = std::string("coherent ") + kVersion;
  j["command"] = command;
  j["model"] = o.model;
  if (o.model == "kde") j["mixing"] = o.mixing;
  if (o.model == "beta-bernoulli") j["prior"] = {o.prior_alpha, o.prior_beta};
  if (o.model == "gaussian") j["prior"] = {{"mu0", o.mu0}, {"phi0", o.phi0}};
  if (data) {
    j["data"] = {{"source", data->source}, {"units", data->units}, {"pseudo", o.pseudo}};
  }
  if (cfg) {
    j["n"] = cfg->n;
    j["N"] = cfg->N;
    j["m"] = cfg->steps();
    j["padding"] = cfg->padding;
    if (is_kde(o.model)) {
      j["tau"] = cfg->tau;
      j["tau_rule"] = o.rule_of_thumb ? "silverman" : "given";
    }
  }
  j["seed"] = o.seed ? Json(*o.seed) : Json(nullptr);
  return j;
}

std::vector<double> resolve_grid(const Options& o, std::span<const double> values, double spread_var) {
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double pad = 4.0 * std::sqrt(spread_var);
  const double lo = o.grid_min.value_or(*lo_it - pad);
  const double hi = o.grid_max.value_or(*hi_it + pad);
  if (!(hi > lo)) throw usage_error("--grid-max must exceed --grid-min");
  if (o.grid_points < 2) throw usage_error("--grid-points must be at least 2");
  return uniform_grid(lo, hi, o.grid_points);
}

template <PredictiveModel Model>
std::vector<double> model_grid(const Options& o, const Model& model, const ObservedSample& sample,
                               const typename Model::state_type& state) {
  if constexpr (Model::support == Support::binary) {
    return {0.0, 1.0};
  } else if constexpr (std::is_same_v<Model, KdeModel>) {
    return resolve_grid(o, sample.values(), model.effective_tau(sample.size()));
  } else {
    return resolve_grid(o, sample.values(), model.variance(state));
  }
}

template <typename F>
int with_model(const Options& o, const HorizonConfig& cfg, F&& f) {
  if (o.model == "kde") return f(KdeModel(cfg, {parse_mixing_rule(o.mixing)}));
  if (o.model == "beta-bernoulli") return f(BetaBernoulliModel(o.prior_alpha, o.prior_beta));
  if (o.model == "backward-bernoulli") return f(BackwardBernoulliModel{});
  if (o.model == "gaussian") return f(GaussianKnownVarModel(o.mu0, o.phi0));
  if (o.model == "backward-gaussian") return f(BackwardGaussianModel{});
  if (o.model == "kde-series") throw usage_error("model kde-series is only available to coherence-check");
  throw usage_error("unknown --model '" + o.model + "'");
}

void check_density(const DensityGrid& d, const std::string& what) {
  if (!d.is_valid())
    throw validity_failure(what + " is not a valid density on the grid (integral " +
                           std::to_string(d.integral()) + "); widen the grid");
}

fs::path write(const fs::path& dir, const std::string& name, const auto& writer) {
  const fs::path path = dir / name;
  io::OutputFile file(path);
  writer(file.stream());
  file.close();
  std::cout << "wrote " << path.string() << '\n';
  return path;
}

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

int cmd_fit(Options o) {
  const Loaded data = load_sample(o);
  const HorizonConfig cfg = resolve_horizon(o, data.sample);
  const fs::path dir = output_dir(o);
  return with_model(o, cfg, [&](const auto& model) -> int {
    using Model = std::decay_t<decltype(model)>;
    const auto state = model.init_state(data.sample, cfg);
    const auto grid = model_grid(o, model, data.sample, state);
    const DensityGrid d = model.density_on_grid(state, grid);
    Json meta = metadata("fit", o, &data, &cfg);
    meta["grid"] = {{"min", grid.front()}, {"max", grid.back()}, {"points", grid.size()}};
    write(dir, "fit.csv", [&](std::ostream& os) { io::write_density_csv(os, d, meta); });

    // Predictive mean and variance after each prefix y_{1:t}.
    const auto values = data.sample.values();
    write(dir, "fit_moments.csv", [&](std::ostream& os) {
      io::write_metadata(os, meta);
      os << "t,mean,variance\n";
      for (std::size_t t = 1; t <= values.size(); ++t) {
        const ObservedSample prefix(std::vector<double>(values.begin(), values.begin() + t));
        HorizonConfig pc = cfg;
        pc.n = t;
        const auto s = model.init_state(prefix, pc);
        os << t << ',' << model.mean(s) << ',' << model.variance(s) << '\n';
      }
    });
    if constexpr (Model::support == Support::continuous) check_density(d, "fitted predictive");
    return Exit::ok;
  });
}

int cmd_simulate(Options o) {
  const Loaded data = load_sample(o);
  const HorizonConfig cfg = resolve_horizon(o, data.sample);
  const std::uint64_t seed = resolve_seed(o);
  const fs::path dir = output_dir(o);
  return with_model(o, cfg, [&](const auto& model) -> int {
    using Model = std::decay_t<decltype(model)>;
    model.init_state(data.sample, cfg);
    const std::size_t keep = std::min<std::size_t>(o.paths, 1000);
    std::vector<double> means(o.paths), vars(o.paths);
    std::vector<std::vector<double>> kept(keep);
    for_each_path(model, data.sample, cfg, o.paths, seed, o.workers, [&](SimulationPath<Model>&& p) {
      means[p.path_index] = model.mean(p.terminal_state);
      vars[p.path_index] = model.variance(p.terminal_state);
      if (p.path_index < keep) kept[p.path_index] = std::move(p.simulated);
    });

    Json meta = metadata("simulate", o, &data, &cfg);
    meta["paths"] = o.paths;
    write(dir, "paths.csv", [&](std::ostream& os) {
      io::write_metadata(os, meta);
      os << 't';
      for (std::size_t j = 0; j < keep; ++j) os << ",path_" << j;
      os << '\n';
      for (std::size_t s = 0; s < cfg.steps(); ++s) {
        os << cfg.n + s + 1;
        for (const auto& path : kept) os << ',' << path[s];
        os << '\n';
      }
    });
    write(dir, "functionals.csv", [&](std::ostream& os) {
      io::write_metadata(os, meta);
      os << "path,mean,variance\n";
      for (std::size_t j = 0; j < o.paths; ++j) os << j << ',' << means[j] << ',' << vars[j] << '\n';
    });
    const auto ci = credible_interval(means, o.level);
    std::cout << "terminal mean: " << ci.mean << "  " << o.level * 100 << "% interval [" << ci.lower << ", "
              << ci.upper << "]\n";
    return Exit::ok;
  });
}

int cmd_bands(Options o) {
  const Loaded data = load_sample(o);
  const HorizonConfig cfg = resolve_horizon(o, data.sample);
  const std::uint64_t seed = resolve_seed(o);
  validate_level(o.level);
  const fs::path dir = output_dir(o);
  return with_model(o, cfg, [&](const auto& model) -> int {
    using Model = std::decay_t<decltype(model)>;
    if constexpr (Model::support == Support::binary) {
      throw usage_error("bands needs a continuous-support model; use simulate for Bernoulli models");
    } else {
      const auto state = model.init_state(data.sample, cfg);
      const auto grid = model_grid(o, model, data.sample, state);
      const auto ens = run_ensemble(model, data.sample, cfg, o.paths, seed, functional::Density{grid},
                                    {o.workers, 0});
      const auto densities = ens.densities();
      const CredibleBand band = credible_band(densities, o.level);
      for (const auto& w : band.warnings) std::cerr << "warning: " << w << '\n';

      Json meta = metadata("bands", o, &data, &cfg);
      meta["paths"] = o.paths;
      meta["level"] = o.level;
      meta["grid"] = {{"min", grid.front()}, {"max", grid.back()}, {"points", grid.size()}};
      write(dir, "band.csv", [&](std::ostream& os) { io::write_band_csv(os, band, meta); });
      write(dir, "draws.csv", [&](std::ostream& os) { io::write_draws_csv(os, densities, 0, meta); });
      check_density(band.mean_density(), "ensemble mean density");
      return Exit::ok;
    }
  });
}

int cmd_coherence(Options o) {
  const Loaded data = load_sample(o);
  const HorizonConfig cfg = resolve_horizon(o, data.sample);
  const fs::path dir = output_dir(o);
  auto finish = [&](const CoherenceReport& report) -> int {
    Json j = io::to_json(report);
    j["metadata"] = metadata("coherence-check", o, &data, &cfg);
    write(dir, "coherence.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    std::cout << "sup residual " << report.sup_residual << " (quadrature error estimate "
              << report.quadrature_error << ")\n";
    if (o.tolerance && !(report.sup_residual <= *o.tolerance))
      throw validity_failure("coherence residual exceeds --tolerance");
    return Exit::ok;
  };
  auto nodes_for = [&](std::span<const double> grid) {
    const double width = grid.back() - grid.front();
    return IntegrationSpec::trapezoid_on(grid.front() - 0.5 * width, grid.back() + 0.5 * width, o.nodes);
  };

  if (o.model == "kde-series") {
    const OneStepSeriesModel model(cfg.tau, cfg.backward_start());
    const OneStepSeriesModel::state_type state{data.sample.canonical()};
    const auto grid = resolve_grid(o, data.sample.values(), 4.0 * cfg.tau);
    return finish(check_coherence(model, state, grid, nodes_for(grid)));
  }
  return with_model(o, cfg, [&](const auto& model) -> int {
    using Model = std::decay_t<decltype(model)>;
    const auto state = model.init_state(data.sample, cfg);
    const auto grid = model_grid(o, model, data.sample, state);
    if constexpr (Model::support == Support::binary)
      return finish(check_coherence(model, state, grid, IntegrationSpec::binary()));
    else
      return finish(check_coherence(model, state, grid, nodes_for(grid)));
  });
}

int cmd_bound(Options o) {
  std::size_t n = 0;
  std::optional<Loaded> data;
  if (!o.data.empty() || !o.builtin.empty()) {
    data = load_sample(o);
    n = data->sample.size();
  } else if (o.n) {
    n = *o.n;
  } else if (o.cone.empty() || !o.m) {
    throw usage_error("bound needs --n (or a data source), or --cone with --m");
  }
  if (!o.tau) throw usage_error("--tau is required for bound");
  std::size_t m = 0;
  if (o.m) {
    m = *o.m;
  } else {
    if (o.N < n) throw usage_error("--N must be at least --n");
    m = o.N - n;
  }
  const auto rows = uncertainty_cone(o.cone.empty() ? std::vector<std::size_t>{n} : o.cone, m, *o.tau,
                                     o.epsilon, o.alpha);
  Json meta = metadata("bound", o, data ? &*data : nullptr, nullptr);
  meta["tau"] = *o.tau;
  meta["m"] = m;
  meta["epsilon"] = o.epsilon;
  meta["alpha"] = o.alpha;
  const fs::path dir = output_dir(o);
  write(dir, "bound.csv", [&](std::ostream& os) { io::write_cone_csv(os, rows, *o.tau, o.epsilon, o.alpha, meta); });
  for (const auto& r : rows)
    std::cout << "n=" << r.n << " m=" << r.m << " bound=" << r.bound << " half_width=" << r.half_width << '\n';
  return Exit::ok;
}

int cmd_synth(Options o) {
  if (!o.n) throw usage_error("synth needs --n");
  const std::uint64_t seed = resolve_seed(o);
  const auto sample = io::synth_two_gaussians(*o.n, seed);
  Json meta = metadata("synth", o, nullptr, nullptr);
  meta["generator"] = "two-gaussians";
  meta["n"] = *o.n;
  write(output_dir(o), "data.csv", [&](std::ostream& os) { io::write_sample_csv(os, sample, meta); });
  return Exit::ok;
}

// ---------------------------------------------------------------------------

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--model", o.model, "beta-bernoulli | backward-bernoulli | gaussian | backward-gaussian | kde")
      ->capture_default_str();
  cmd->add_option("--data", o.data, "single-column numeric file, optional header");
  cmd->add_option("--builtin", o.builtin, "galaxy | two-gaussians");
  cmd->add_option("--pseudo", o.pseudo, "pseudo-observations prepended to the data")->delimiter(',');
  cmd->add_option("--n", o.n, "use the first n data values");
  cmd->add_option("--N", o.N, "horizon")->capture_default_str();
  cmd->add_option("--padding", o.padding, "extra backward steps a for kde (default 30)");
  cmd->add_option("--tau", o.tau, "kernel variance, squared data units")->check(CLI::PositiveNumber);
  cmd->add_flag("--rule-of-thumb", o.rule_of_thumb, "pick tau by the Silverman rule");
  cmd->add_option("--mixing", o.mixing, "kde scale law: geometric | lognormal | product")->capture_default_str();
  cmd->add_option("--prior-alpha", o.prior_alpha)->capture_default_str();
  cmd->add_option("--prior-beta", o.prior_beta)->capture_default_str();
  cmd->add_option("--mu0", o.mu0)->capture_default_str();
  cmd->add_option("--phi0", o.phi0, "prior precision; 0 is the flat start")->capture_default_str();
}

void add_grid_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--grid-min", o.grid_min);
  cmd->add_option("--grid-max", o.grid_max);
  cmd->add_option("--grid-points", o.grid_points)->capture_default_str();
}

void add_run_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--paths", o.paths, "ensemble size M")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--workers", o.workers, "threads; 0 uses every core")->capture_default_str();
  cmd->add_option("--level", o.level, "credible level")->capture_default_str();
}

void add_out(CLI::App* cmd, Options& o) {
  cmd->add_option("--out", o.out, "output directory (default $COHERENT_OUT_DIR or .)");
}

int run(int argc, char** argv) {
  CLI::App app{"Forward simulation of sequentially coherent predictive models", "coherent"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "predictive density and moments at time n");
  add_data_options(fit, o);
  add_grid_options(fit, o);
  add_out(fit, o);

  auto* simulate = app.add_subcommand("simulate", "forward paths and terminal functionals");
  add_data_options(simulate, o);
  add_run_options(simulate, o);
  add_out(simulate, o);

  auto* bands = app.add_subcommand("bands", "ensemble of terminal densities and credible band");
  add_data_options(bands, o);
  add_grid_options(bands, o);
  add_run_options(bands, o);
  add_out(bands, o);

  auto* coherence = app.add_subcommand("coherence-check", "one-step coherence residual at time n");
  add_data_options(coherence, o);
  add_grid_options(coherence, o);
  coherence->add_option("--nodes", o.nodes, "trapezoid nodes over x")->capture_default_str();
  coherence->add_option("--tolerance", o.tolerance, "exit 1 if the sup residual exceeds this");
  add_out(coherence, o);

  auto* bound = app.add_subcommand("bound", "concentration bound and uncertainty cone");
  add_data_options(bound, o);
  bound->add_option("--m", o.m, "forward steps (default N - n)");
  bound->add_option("--epsilon", o.epsilon)->capture_default_str()->check(CLI::PositiveNumber);
  bound->add_option("--alpha", o.alpha, "level for the half-width column")->capture_default_str();
  bound->add_option("--cone", o.cone, "comma-separated n values")->delimiter(',');
  add_out(bound, o);

  auto* synth = app.add_subcommand("synth", "two-Gaussian synthetic sample");
  synth->add_option("--n", o.n, "sample size")->required();
  synth->add_option("--seed", o.seed);
  add_out(synth, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return Exit::usage;
  }

  if (*fit) return cmd_fit(o);
  if (*simulate) return cmd_simulate(o);
  if (*bands) return cmd_bands(o);
  if (*coherence) return cmd_coherence(o);
  if (*bound) return cmd_bound(o);
  return cmd_synth(o);
}

void print_nested(const std::exception& e) {
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    std::cerr << "  caused by: " << inner.what() << '\n';
    print_nested(inner);
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const validity_failure& e) {
    std::cerr << "validity check failed: " << e.what() << '\n';
    return Exit::invalid;
  } catch (const parse_error& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return Exit::parse_failure;
  } catch (const io::io_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return Exit::io_failure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return Exit::io_failure;
  } catch (const numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return Exit::invalid;
  } catch (const path_error& e) {
    std::cerr << "simulation failed: " << e.what() << '\n';
    print_nested(e);
    return Exit::invalid;
  } catch (const capability_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return Exit::usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return Exit::usage;
  } catch (const std::domain_error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return Exit::usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::invalid;
  }
}
