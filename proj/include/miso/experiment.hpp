#pragma once

#include <cstdlib>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "miso/datagen.hpp"
#include "miso/dataset.hpp"
#include "miso/io.hpp"
#include "miso/problems.hpp"
#include "miso/solvers.hpp"

namespace miso {

enum class ProblemKind { logistic_l2, sparse_log };

struct ExperimentSpec {
  ProblemKind problem = ProblemKind::logistic_l2;
  std::string data_path;                  // LIBSVM input; empty: use generator
  std::optional<DataGenSpec> generator;
  Index p_override = 0;
  double lambda = 0.1;
  std::vector<double> lambda_path;        // strictly decreasing; overrides lambda
  double epsilon = 0.01;
  SolverConfig solver;
  bool preprocess = true;
  std::string output_path;                // trace CSV; empty: skip
  std::string theta_output;               // plain-text theta dump; empty: skip
};

struct ExperimentResult {
  ParamVector theta;
  std::vector<TraceRecord> trace;
  double objective = 0.0;
  std::optional<double> final_gap;
};

namespace detail {

inline std::uint64_t seed_with_env_override(std::uint64_t seed) {
  if (const char* env = std::getenv("MISO_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument("MISO_SEED must be an unsigned integer");
    return static_cast<std::uint64_t>(v);
  }
  return seed;
}

inline void append_trace(std::vector<TraceRecord>& into, std::vector<TraceRecord> stage,
                         double pass_offset, double seconds_offset) {
  for (TraceRecord& r : stage) {
    r.pass_count += pass_offset;
    r.wall_seconds += seconds_offset;
    into.push_back(std::move(r));
  }
}

}  // namespace detail

inline Dataset load_experiment_data(const ExperimentSpec& spec) {
  Dataset data;
  if (!spec.data_path.empty()) {
    data = read_libsvm(spec.data_path, spec.p_override);
  } else if (spec.generator) {
    data = gen_data(*spec.generator).data;
  } else {
    throw std::invalid_argument("experiment: no data path and no generator");
  }
  if (!spec.preprocess) return data;
  return data.is_sparse() ? normalize_rows(data) : standardize(data);
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  SolverConfig solver = spec.solver;
  solver.seed = detail::seed_with_env_override(solver.seed);

  std::vector<double> lambdas = spec.lambda_path;
  if (lambdas.empty()) lambdas.push_back(spec.lambda);
  for (std::size_t i = 1; i < lambdas.size(); ++i)
    if (lambdas[i] >= lambdas[i - 1])
      throw std::invalid_argument("experiment: lambda_path must be strictly decreasing");

  const Dataset data = load_experiment_data(spec);
  ExperimentResult result;
  double pass_offset = 0.0, seconds_offset = 0.0;

  if (spec.problem == ProblemKind::logistic_l2) {
    for (Index t = 0; t < data.rows(); ++t)
      if (data.label(t) != 1.0 && data.label(t) != -1.0)
        throw std::invalid_argument("experiment: logistic labels must be +1/-1");
    ParamVector theta = ParamVector::Zero(data.cols());
    std::optional<ComponentState> state;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      LogisticL2Problem prob(data, lambdas[i]);
      if (state) state->shift_fold_lambda(lambdas[i] - lambdas[i - 1]);
      RunResult r = run(solver, prob, theta, state ? &*state : nullptr);
      theta = r.theta;
      state = std::move(r.state);
      detail::append_trace(result.trace, std::move(r.trace), pass_offset, seconds_offset);
      pass_offset = result.trace.back().pass_count;
      seconds_offset = result.trace.back().wall_seconds;
      if (i + 1 == lambdas.size()) {
        result.objective = prob.objective(theta);
        result.final_gap = prob.duality_gap(theta).relative;
      }
    }
    result.theta = theta;
  } else {
    ParamVector theta = sparse_init(data);
    std::optional<ComponentState> state;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
      SparseLogPenaltyProblem prob(data, lambdas[i], spec.epsilon);
      RunResult r = run(solver, prob, theta, state ? &*state : nullptr);
      theta = r.theta;
      state = std::move(r.state);
      detail::append_trace(result.trace, std::move(r.trace), pass_offset, seconds_offset);
      pass_offset = result.trace.back().pass_count;
      seconds_offset = result.trace.back().wall_seconds;
      if (i + 1 == lambdas.size()) result.objective = prob.objective(theta);
    }
    result.theta = theta;
  }

  if (!spec.output_path.empty()) write_trace_csv(spec.output_path, result.trace);
  if (!spec.theta_output.empty()) write_theta(spec.theta_output, result.theta);
  return result;
}

// Picks lambda so the final iterate of a batch run has about `target` nonzero
// coordinates: log-scale bisection, returning the closest candidate seen.
inline double lambda_for_target_nnz(const Dataset& data, double epsilon, Index target,
                                    double lambda_lo, double lambda_hi, int rounds = 12,
                                    int batch_iterations = 150) {
  if (lambda_lo <= 0.0 || lambda_hi <= lambda_lo)
    throw std::invalid_argument("lambda_for_target_nnz: need 0 < lambda_lo < lambda_hi");
  const ParamVector theta0 = sparse_init(data);
  double best_lambda = lambda_hi;
  Index best_miss = std::numeric_limits<Index>::max();
  double lo = lambda_lo, hi = lambda_hi;
  for (int r = 0; r < rounds; ++r) {
    const double mid = std::sqrt(lo * hi);
    SparseLogPenaltyProblem prob(data, mid, epsilon);
    RunResult res = batch_mm(prob, SurrogateFamily::dc_linearized, theta0, batch_iterations, 0.0,
                             batch_iterations);
    const Index n = nnz(res.theta);
    const Index miss = std::abs(n - target);
    if (miss < best_miss || (miss == best_miss && mid > best_lambda)) {
      best_miss = miss;
      best_lambda = mid;
    }
    if (n == target) break;
    if (n > target)
      lo = mid;  // not sparse enough: raise lambda
    else
      hi = mid;
  }
  return best_lambda;
}

}  // namespace miso
