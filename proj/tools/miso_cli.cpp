#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <miso/miso.hpp>

namespace {

using nlohmann::json;

miso::Scheme parse_scheme(const std::string& s) {
  if (s == "batch_mm") return miso::Scheme::batch_mm;
  if (s == "miso0") return miso::Scheme::miso0;
  if (s == "miso1") return miso::Scheme::miso1;
  if (s == "miso2") return miso::Scheme::miso2;
  if (s == "miso_mu") return miso::Scheme::miso_mu;
  if (s == "sag") return miso::Scheme::sag;
  if (s == "sgd_h") return miso::Scheme::sgd_h;
  throw std::invalid_argument("unknown scheme: " + s);
}

miso::ProblemKind parse_problem(const std::string& s) {
  if (s == "logistic_l2") return miso::ProblemKind::logistic_l2;
  if (s == "sparse_log") return miso::ProblemKind::sparse_log;
  throw std::invalid_argument("unknown problem: " + s);
}

miso::DataKind parse_data_kind(const std::string& s) {
  if (s == "dense_gaussian") return miso::DataKind::dense_gaussian;
  if (s == "sparse_bernoulli_gaussian") return miso::DataKind::sparse_bernoulli_gaussian;
  throw std::invalid_argument("unknown data kind: " + s);
}

miso::LabelModel parse_label_model(const std::string& s) {
  if (s == "logistic_planted") return miso::LabelModel::logistic_planted;
  if (s == "linear_noise") return miso::LabelModel::linear_noise;
  throw std::invalid_argument("unknown label model: " + s);
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    const std::string tok = s.substr(pos, comma == std::string::npos ? comma : comma - pos);
    std::size_t used = 0;
    out.push_back(std::stod(tok, &used));
    if (used != tok.size()) throw std::invalid_argument("bad number in list: " + tok);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    out.push_back(s.substr(pos, comma == std::string::npos ? comma : comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || item.key() == k;
    if (!ok) throw std::invalid_argument("config: unknown key \"" + item.key() + "\" in " + where);
  }
}

void apply_solver_json(const json& j, miso::SolverConfig& cfg) {
  check_keys(j,
             {"scheme", "L0", "mu", "minibatch", "epochs", "seed", "eta", "per_component_L",
              "lsearch_kmax", "resum_every", "divergence_factor"},
             "solver");
  if (j.contains("scheme")) cfg.scheme = parse_scheme(j.at("scheme").get<std::string>());
  if (j.contains("L0")) cfg.L0 = j.at("L0").get<double>();
  if (j.contains("mu")) cfg.mu = j.at("mu").get<double>();
  if (j.contains("minibatch")) cfg.minibatch = j.at("minibatch").get<int>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("eta")) cfg.eta = j.at("eta").get<double>();
  if (j.contains("per_component_L")) cfg.per_component_L = j.at("per_component_L").get<bool>();
  if (j.contains("lsearch_kmax")) cfg.lsearch_kmax = j.at("lsearch_kmax").get<int>();
  if (j.contains("resum_every")) cfg.resum_every = j.at("resum_every").get<int>();
  if (j.contains("divergence_factor")) cfg.divergence_factor = j.at("divergence_factor").get<double>();
}

void apply_generator_json(const json& j, miso::DataGenSpec& g) {
  check_keys(j, {"kind", "T", "p", "density", "label_model", "sigma", "theta_scale", "planted_nnz", "seed"},
             "generator");
  if (j.contains("kind")) g.kind = parse_data_kind(j.at("kind").get<std::string>());
  if (j.contains("T")) g.T = j.at("T").get<miso::Index>();
  if (j.contains("p")) g.p = j.at("p").get<miso::Index>();
  if (j.contains("density")) g.density = j.at("density").get<double>();
  if (j.contains("label_model")) g.label_model = parse_label_model(j.at("label_model").get<std::string>());
  if (j.contains("sigma")) g.sigma = j.at("sigma").get<double>();
  if (j.contains("theta_scale")) g.theta_scale = j.at("theta_scale").get<double>();
  if (j.contains("planted_nnz")) g.planted_nnz = j.at("planted_nnz").get<miso::Index>();
  if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
}

void apply_experiment_json(const json& j, miso::ExperimentSpec& spec) {
  check_keys(j,
             {"problem", "data", "p_override", "lambda", "lambda_path", "epsilon", "preprocess",
              "generator", "solver", "trace", "theta"},
             "config");
  if (j.contains("problem")) spec.problem = parse_problem(j.at("problem").get<std::string>());
  if (j.contains("data")) spec.data_path = j.at("data").get<std::string>();
  if (j.contains("p_override")) spec.p_override = j.at("p_override").get<miso::Index>();
  if (j.contains("lambda")) spec.lambda = j.at("lambda").get<double>();
  if (j.contains("lambda_path")) spec.lambda_path = j.at("lambda_path").get<std::vector<double>>();
  if (j.contains("epsilon")) spec.epsilon = j.at("epsilon").get<double>();
  if (j.contains("preprocess")) spec.preprocess = j.at("preprocess").get<bool>();
  if (j.contains("trace")) spec.output_path = j.at("trace").get<std::string>();
  if (j.contains("theta")) spec.theta_output = j.at("theta").get<std::string>();
  if (j.contains("generator")) {
    miso::DataGenSpec g;
    apply_generator_json(j.at("generator"), g);
    spec.generator = g;
  }
  if (j.contains("solver")) apply_solver_json(j.at("solver"), spec.solver);
}

// Flag storage for solve/bench; values only count when the flag was given.
struct ExperimentFlags {
  std::string config, problem, data, lambda_path, scheme, trace, theta_out;
  std::string gen_kind, gen_label_model;
  double lambda = 0.1, epsilon = 0.01, L0 = 0.0, mu = 0.0, eta = 0.05, divergence_factor = 1e3;
  double gen_density = 1.0, gen_sigma = 0.1, gen_theta_scale = 5.0;
  long p_override = 0, gen_T = 100, gen_p = 10, gen_nnz = 0;
  int epochs = 50, minibatch = 1, kmax = 20, resum_every = 10;
  std::uint64_t seed = 0, gen_seed = 0;
  bool no_preprocess = false, uniform_L = false;
};

void add_experiment_flags(CLI::App* cmd, ExperimentFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its fields");
  cmd->add_option("--problem", f.problem, "logistic_l2 | sparse_log");
  cmd->add_option("--data", f.data, "LIBSVM input file");
  cmd->add_option("--p-override", f.p_override, "feature count when trailing columns are all-zero");
  cmd->add_option("--lambda", f.lambda, "regularization weight");
  cmd->add_option("--lambda-path", f.lambda_path, "comma list, strictly decreasing (warm restart)");
  cmd->add_option("--epsilon", f.epsilon, "log-penalty epsilon (sparse_log)");
  cmd->add_flag("--no-preprocess", f.no_preprocess, "skip standardize/normalize preprocessing");
  cmd->add_option("--scheme", f.scheme,
                  "batch_mm | miso0 | miso1 | miso2 | miso_mu | sag | sgd_h");
  cmd->add_option("--epochs", f.epochs, "passes over the data");
  cmd->add_option("--L0", f.L0, "initial majorization constant (0: from data bounds)");
  cmd->add_option("--mu", f.mu, "strong-convexity constant for miso_mu (0: problem's own)");
  cmd->add_option("--minibatch", f.minibatch, "components refreshed per update");
  cmd->add_option("--seed", f.seed, "solver RNG seed (MISO_SEED env overrides)");
  cmd->add_option("--eta", f.eta, "L-search subsample fraction; also the miso2 shrink factor");
  cmd->add_flag("--uniform-L", f.uniform_L, "one shared L instead of per-component constants");
  cmd->add_option("--kmax", f.kmax, "halving steps in the miso1 L search");
  cmd->add_option("--resum-every", f.resum_every, "passes between aggregate re-summations");
  cmd->add_option("--divergence-factor", f.divergence_factor, "abort when objective exceeds this multiple of the initial value");
  cmd->add_option("--trace", f.trace, "trace CSV output path");
  cmd->add_option("--theta", f.theta_out, "plain-text theta dump path");
  cmd->add_option("--gen-kind", f.gen_kind, "dense_gaussian | sparse_bernoulli_gaussian");
  cmd->add_option("--gen-T", f.gen_T, "generated examples");
  cmd->add_option("--gen-p", f.gen_p, "generated features");
  cmd->add_option("--gen-density", f.gen_density, "nonzero probability for the sparse kind");
  cmd->add_option("--gen-label-model", f.gen_label_model, "logistic_planted | linear_noise");
  cmd->add_option("--gen-sigma", f.gen_sigma, "label noise for linear_noise");
  cmd->add_option("--gen-theta-scale", f.gen_theta_scale, "norm of the planted parameter");
  cmd->add_option("--gen-nnz", f.gen_nnz, "planted support size (0: dense)");
  cmd->add_option("--gen-seed", f.gen_seed, "generator seed");
}

bool any_gen_flag(const CLI::App* cmd) {
  for (const char* name : {"--gen-kind", "--gen-T", "--gen-p", "--gen-density",
                           "--gen-label-model", "--gen-sigma", "--gen-theta-scale", "--gen-nnz",
                           "--gen-seed"})
    if (cmd->count(name)) return true;
  return false;
}

miso::ExperimentSpec build_spec(const CLI::App* cmd, const ExperimentFlags& f) {
  miso::ExperimentSpec spec;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw std::invalid_argument("cannot open config " + f.config);
    json j;
    in >> j;
    apply_experiment_json(j, spec);
  }
  if (cmd->count("--data") && any_gen_flag(cmd))
    throw std::invalid_argument("give either --data or --gen-* flags, not both");

  if (cmd->count("--problem")) spec.problem = parse_problem(f.problem);
  if (cmd->count("--data")) {
    spec.data_path = f.data;
    spec.generator.reset();
  }
  if (cmd->count("--p-override")) spec.p_override = f.p_override;
  if (cmd->count("--lambda")) spec.lambda = f.lambda;
  if (cmd->count("--lambda-path")) spec.lambda_path = parse_double_list(f.lambda_path);
  if (cmd->count("--epsilon")) spec.epsilon = f.epsilon;
  if (cmd->count("--no-preprocess")) spec.preprocess = false;
  if (cmd->count("--trace")) spec.output_path = f.trace;
  if (cmd->count("--theta")) spec.theta_output = f.theta_out;

  if (any_gen_flag(cmd)) {
    miso::DataGenSpec g = spec.generator.value_or(miso::DataGenSpec{});
    if (cmd->count("--gen-kind")) g.kind = parse_data_kind(f.gen_kind);
    if (cmd->count("--gen-T")) g.T = f.gen_T;
    if (cmd->count("--gen-p")) g.p = f.gen_p;
    if (cmd->count("--gen-density")) g.density = f.gen_density;
    if (cmd->count("--gen-label-model")) g.label_model = parse_label_model(f.gen_label_model);
    if (cmd->count("--gen-sigma")) g.sigma = f.gen_sigma;
    if (cmd->count("--gen-theta-scale")) g.theta_scale = f.gen_theta_scale;
    if (cmd->count("--gen-nnz")) g.planted_nnz = f.gen_nnz;
    if (cmd->count("--gen-seed")) g.seed = f.gen_seed;
    spec.generator = g;
    spec.data_path.clear();
  }

  if (cmd->count("--scheme")) spec.solver.scheme = parse_scheme(f.scheme);
  if (cmd->count("--epochs")) spec.solver.epochs = f.epochs;
  if (cmd->count("--L0")) spec.solver.L0 = f.L0;
  if (cmd->count("--mu")) spec.solver.mu = f.mu;
  if (cmd->count("--minibatch")) spec.solver.minibatch = f.minibatch;
  if (cmd->count("--seed")) spec.solver.seed = f.seed;
  if (cmd->count("--eta")) spec.solver.eta = f.eta;
  if (cmd->count("--uniform-L")) spec.solver.per_component_L = false;
  if (cmd->count("--kmax")) spec.solver.lsearch_kmax = f.kmax;
  if (cmd->count("--resum-every")) spec.solver.resum_every = f.resum_every;
  if (cmd->count("--divergence-factor")) spec.solver.divergence_factor = f.divergence_factor;
  return spec;
}

void print_summary(const std::string& label, const miso::ExperimentResult& res) {
  const miso::TraceRecord& last = res.trace.back();
  std::printf("%s passes=%g objective=%.12g", label.c_str(), last.pass_count, res.objective);
  if (res.final_gap) std::printf(" duality_gap=%.6e", *res.final_gap);
  std::printf(" stationarity=%.6e nnz=%lld\n", last.stationarity,
              static_cast<long long>(last.nnz));
}

int run_solve(const CLI::App* cmd, ExperimentFlags& f) {
  miso::ExperimentSpec spec = build_spec(cmd, f);
  if (spec.output_path.empty()) spec.output_path = "trace.csv";
  const miso::ExperimentResult res = miso::run_experiment(spec);
  print_summary("solve", res);
  std::printf("trace written to %s\n", spec.output_path.c_str());
  return 0;
}

int run_bench(const CLI::App* cmd, ExperimentFlags& f, const std::string& schemes_arg) {
  miso::ExperimentSpec base = build_spec(cmd, f);
  std::string merged_path = base.output_path.empty() ? "bench.csv" : base.output_path;
  base.output_path.clear();
  base.theta_output.clear();

  std::vector<std::string> names;
  if (!schemes_arg.empty()) {
    names = parse_string_list(schemes_arg);
  } else if (base.problem == miso::ProblemKind::logistic_l2) {
    names = {"batch_mm", "miso1", "miso2", "miso_mu", "sag"};
  } else {
    names = {"batch_mm", "miso0", "miso1", "miso2"};
  }

  std::ofstream out(merged_path);
  if (!out) throw std::runtime_error("cannot open " + merged_path);
  out << "scheme," << miso::kTraceCsvHeader << '\n';
  for (const std::string& name : names) {
    miso::ExperimentSpec spec = base;
    spec.solver.scheme = parse_scheme(name);
    const miso::ExperimentResult res = miso::run_experiment(spec);
    for (const miso::TraceRecord& r : res.trace) {
      out << name << ',';
      miso::write_trace_csv(out, {r}, false);
    }
    print_summary(name, res);
  }
  if (!out) throw std::runtime_error("write failed for " + merged_path);
  std::printf("merged trace written to %s\n", merged_path.c_str());
  return 0;
}

int run_gen_data(const miso::DataGenSpec& g, const std::string& out_path,
                 const std::string& theta_path) {
  miso::DataGenSpec spec = g;
  spec.seed = miso::detail::seed_with_env_override(spec.seed);
  const miso::GeneratedData gen = miso::gen_data(spec);
  miso::write_libsvm(out_path, gen.data);
  if (!theta_path.empty()) miso::write_theta(theta_path, gen.theta_true);
  std::printf("wrote T=%lld p=%lld nnz=%lld to %s\n", static_cast<long long>(gen.data.rows()),
              static_cast<long long>(gen.data.cols()), static_cast<long long>(gen.data.nnz()),
              out_path.c_str());
  return 0;
}

int run_check_surrogates(int problems, int samples, std::uint64_t seed) {
  const std::vector<miso::CertifySummary> all = miso::certify_all(problems, samples, seed);
  std::printf("%-22s %9s %11s %15s %14s %13s  %s\n", "family", "problems", "violations",
              "worst_tightness", "worst_grad_gap", "ratio_margin", "status");
  bool ok = true;
  for (const miso::CertifySummary& s : all) {
    std::printf("%-22s %9d %11d %15.3e %14.3e %13.6f  %s\n", s.family.c_str(), s.problems,
                s.majorization_violations, s.worst_tightness, s.worst_grad_gap,
                s.worst_ratio_margin, s.ok ? "ok" : "FAIL");
    ok = ok && s.ok;
  }
  if (!ok) {
    std::fprintf(stderr, "error: surrogate certification failed\n");
    return 2;
  }
  std::printf("all families certified\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"miso: incremental majorization-minimization solvers"};
  app.require_subcommand(1);

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic LIBSVM dataset");
  miso::DataGenSpec gen_spec;
  std::string gen_out, gen_kind_s = "dense_gaussian", gen_label_s = "logistic_planted",
              gen_theta_out;
  gen->add_option("--out", gen_out, "output LIBSVM path")->required();
  gen->add_option("--kind", gen_kind_s, "dense_gaussian | sparse_bernoulli_gaussian");
  gen->add_option("--T", gen_spec.T, "examples");
  gen->add_option("--p", gen_spec.p, "features");
  gen->add_option("--density", gen_spec.density, "nonzero probability for the sparse kind");
  gen->add_option("--label-model", gen_label_s, "logistic_planted | linear_noise");
  gen->add_option("--sigma", gen_spec.sigma, "label noise for linear_noise");
  gen->add_option("--theta-scale", gen_spec.theta_scale, "norm of the planted parameter");
  gen->add_option("--planted-nnz", gen_spec.planted_nnz, "planted support size (0: dense)");
  gen->add_option("--seed", gen_spec.seed, "generator seed (MISO_SEED env overrides)");
  gen->add_option("--theta-out", gen_theta_out, "dump the planted parameter here");

  ExperimentFlags solve_flags;
  CLI::App* solve = app.add_subcommand("solve", "run one solver and write its trace CSV");
  add_experiment_flags(solve, solve_flags);

  ExperimentFlags bench_flags;
  std::string bench_schemes;
  CLI::App* bench = app.add_subcommand("bench", "run a scheme grid and merge the traces");
  add_experiment_flags(bench, bench_flags);
  bench->add_option("--schemes", bench_schemes, "comma list of schemes (default picked per problem)");

  CLI::App* check = app.add_subcommand("check-surrogates", "certify every surrogate family");
  int check_problems = 10, check_samples = 1000;
  std::uint64_t check_seed = 20240901;
  check->add_option("--problems", check_problems, "random problems per family");
  check->add_option("--samples", check_samples, "majorization samples per problem");
  check->add_option("--seed", check_seed, "certification RNG seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      gen_spec.kind = parse_data_kind(gen_kind_s);
      gen_spec.label_model = parse_label_model(gen_label_s);
      return run_gen_data(gen_spec, gen_out, gen_theta_out);
    }
    if (solve->parsed()) return run_solve(solve, solve_flags);
    if (bench->parsed()) return run_bench(bench, bench_flags, bench_schemes);
    if (check->parsed()) return run_check_surrogates(check_problems, check_samples, check_seed);
  } catch (const miso::DivergenceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
