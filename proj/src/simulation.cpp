#include "nslfa/simulation.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <Eigen/SVD>

#include "nslfa/rng.hpp"

namespace nslfa {

namespace {

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Repeating row blocks of the paper's designs, one block per scenario.
std::vector<std::vector<int>> scenario_block(const std::string& name) {
  if (name == "k2-scenario1") return {{1, 0}, {0, 1}};
  if (name == "k2-scenario2") return {{1, 0}, {1, 1}};
  if (name == "k3-scenario1") return {{1, 1, 0}, {1, 0, 1}, {0, 1, 1}};
  if (name == "k3-scenario2") return {{1, 0, 0}, {1, 0, 1}, {0, 1, 1}};
  if (name == "k5-scenario1") {
    return {{1, 1, 1, 0, 0},
            {0, 1, 1, 1, 0},
            {0, 0, 1, 1, 1},
            {1, 0, 0, 1, 1},
            {1, 1, 0, 0, 1}};
  }
  if (name == "k5-scenario2") {
    return {{1, 1, 1, 1, 0},
            {0, 1, 1, 1, 0},
            {0, 0, 1, 1, 1},
            {1, 0, 0, 1, 1},
            {1, 1, 0, 0, 1}};
  }
  throw UnknownScenario("unknown scenario '" + name + "'");
}

}  // namespace

ScenarioSpec ScenarioSpec::by_name(const std::string& name) {
  const auto block = scenario_block(name);  // validates the name
  ScenarioSpec spec;
  spec.name = name;
  spec.k = static_cast<Index>(block.front().size());
  spec.block = static_cast<int>(block.size());
  if (spec.k == 2) {
    spec.j_list = {6, 10, 20};
  } else if (spec.k == 3) {
    spec.j_list = {6, 12, 21};
  } else {
    spec.j_list = {10, 20};
  }
  return spec;
}

std::vector<std::string> ScenarioSpec::known_names() {
  return {"k2-scenario1", "k2-scenario2", "k3-scenario1",
          "k3-scenario2", "k5-scenario1", "k5-scenario2"};
}

DesignMatrix gen_design(const std::string& scenario, Index j) {
  const auto block = scenario_block(scenario);
  const Index b = static_cast<Index>(block.size());
  const Index k = static_cast<Index>(block.front().size());
  if (j < b || j % b != 0) {
    throw IndivisibleJ("J = " + std::to_string(j) +
                       " is not a positive multiple of " + std::to_string(b));
  }
  IntMatrix q(j, k);
  if (k == 2) {
    // contiguous halves: first J/2 rows take the first block row
    for (Index r = 0; r < j; ++r) {
      const auto& row = block[static_cast<std::size_t>(r < j / 2 ? 0 : 1)];
      for (Index c = 0; c < k; ++c) q(r, c) = row[static_cast<std::size_t>(c)];
    }
  } else {
    for (Index r = 0; r < j; ++r) {
      const auto& row = block[static_cast<std::size_t>(r % b)];
      for (Index c = 0; c < k; ++c) q(r, c) = row[static_cast<std::size_t>(c)];
    }
  }
  return DesignMatrix(q);
}

SimDraw gen_data(const DesignMatrix& q, Index n, const ScenarioSpec& spec,
                 std::uint64_t seed) {
  const Index nj = q.items();
  const Index nk = q.factors();
  Rng rng(seed);

  Matrix x(n, nk);
  bool ok = false;
  for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
    for (Index i = 0; i < n; ++i) {
      x.row(i) = rng.in_ball(nk, spec.ball_radius).transpose();
    }
    // gamma-condition proxy: smallest singular value must not collapse
    Eigen::JacobiSVD<Matrix> svd(x);
    ok = svd.singularValues()(nk - 1) / std::sqrt(static_cast<double>(n)) >
         0.05;
  }
  if (!ok) {
    throw DegenerateDraw("score draw failed the singular-value proxy");
  }

  Matrix a = Matrix::Zero(nj, nk);
  for (Index j = 0; j < nj; ++j) {
    std::vector<Index> free;
    for (Index k = 0; k < nk; ++k) {
      if (q.loads(j, k)) free.push_back(k);
    }
    const Index nf = static_cast<Index>(free.size());
    // resample until no free loading is effectively zero
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      const Vector sub = rng.in_ball(nf, spec.ball_radius);
      if (sub.cwiseAbs().minCoeff() >= spec.min_abs_loading) {
        for (Index c = 0; c < nf; ++c) a(j, free[c]) = sub(c);
        placed = true;
      }
    }
    if (!placed) {
      throw DegenerateDraw("free-loading rejection sampling stalled");
    }
  }

  Matrix f(n, nj);
  Matrix y(n, nj);
  const double noise_sd = std::sqrt(spec.sigma2_true);
  const Matrix t = x * a.transpose();
  for (Index j = 0; j < nj; ++j) {
    for (Index i = 0; i < n; ++i) {
      f(i, j) = logistic(t(i, j));
      y(i, j) = f(i, j) + noise_sd * rng.normal();
    }
  }

  return SimDraw{Dataset(y), FactorScores{x, spec.ball_radius},
                 Loadings{a, spec.ball_radius}, f};
}

std::string to_string(SimMethod m) {
  switch (m) {
    case SimMethod::nslfa_joint: return "nslfa-joint";
    case SimMethod::nslfa_iterative: return "nslfa-iterative";
    case SimMethod::linear_fa: return "linear-fa";
    case SimMethod::unconstrained: return "unconstrained";
  }
  return "?";
}

SimMethod parse_method(const std::string& token) {
  if (token == "nslfa" || token == "nslfa-joint") return SimMethod::nslfa_joint;
  if (token == "nslfa-iterative") return SimMethod::nslfa_iterative;
  if (token == "lfa" || token == "linear-fa") return SimMethod::linear_fa;
  if (token == "gplvm" || token == "unconstrained") {
    return SimMethod::unconstrained;
  }
  throw UnknownScenario("unknown method '" + token + "'");
}

int worker_count(int jobs) {
  if (jobs <= 1) return 1;
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("NSLFA_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) hw = cap;
  }
  return std::min(hw, jobs);
}

namespace {

struct RepOutcome {
  bool ok = false;
  EvalSummary eval;
};

RepOutcome run_one(const ScenarioSpec& spec, const DesignMatrix& q, Index n,
                   SimMethod method, const FitConfig& base_cfg,
                   std::uint64_t seed) {
  RepOutcome out;
  try {
    const SimDraw draw = gen_data(q, n, spec, seed);
    Matrix x_hat, a_hat, f_hat;
    if (method == SimMethod::linear_fa) {
      const LinearFaFit lf = fit_linear_fa(draw.data, q);
      x_hat = lf.x_hat.x;
      a_hat = lf.a_hat.a;
      f_hat = x_hat * a_hat.transpose();
      // the linear fit models centered data; restore the column means to
      // compare link values on the original scale
      f_hat.rowwise() += draw.data.y().colwise().mean();
    } else {
      FitConfig cfg = base_cfg;
      cfg.k = q.factors();
      cfg.seed = seed;
      cfg.method = method == SimMethod::nslfa_iterative
                       ? FitConfig::Method::iterative
                       : FitConfig::Method::joint_map;
      const FitResult fit =
          method == SimMethod::unconstrained
              ? fit_unconstrained(draw.data, q.factors(), cfg)
              : nslfa::fit(draw.data, q, cfg);
      x_hat = fit.x_hat.x;
      a_hat = fit.a_hat.a;
      f_hat = fit.f_hat;
    }
    out.eval = evaluate_fit(draw.x_true.x, draw.a_true.a, draw.f_true, x_hat,
                            a_hat, f_hat);
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

SummaryTable run_replications(const ScenarioSpec& spec,
                              const std::vector<SimMethod>& methods,
                              const FitConfig& base_cfg) {
  SummaryTable table;
  table.scenario = spec.name;
  table.k = spec.k;
  if (spec.replications <= 0) return table;

  for (const Index j : spec.j_list) {
    const DesignMatrix q = gen_design(spec.name, j);
    const Index n = spec.n_for(j);
    for (const SimMethod method : methods) {
      ScenarioCell cell;
      cell.method = to_string(method);
      cell.j = j;
      cell.n = n;
      cell.replications = spec.replications;

      std::vector<RepOutcome> outcomes(
          static_cast<std::size_t>(spec.replications));
      std::atomic<int> next{0};
      const int workers = worker_count(spec.replications);
      auto work = [&]() {
        for (;;) {
          const int r = next.fetch_add(1);
          if (r >= spec.replications) return;
          const std::uint64_t rep_seed = mix_seed(
              spec.seed,
              (static_cast<std::uint64_t>(j) << 24) ^
                  static_cast<std::uint64_t>(r));
          outcomes[static_cast<std::size_t>(r)] =
              run_one(spec, q, n, method, base_cfg, rep_seed);
        }
      };
      if (workers <= 1) {
        work();
      } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
      }

      cell.mean_corr = Vector::Zero(spec.k);
      cell.mean_sin = Vector::Zero(spec.k);
      int ok = 0;
      for (const RepOutcome& o : outcomes) {
        if (!o.ok) {
          ++cell.failures;
          continue;
        }
        ++ok;
        cell.mean_corr += o.eval.corr;
        cell.mean_sin += o.eval.sin;
        cell.mean_d_xa += o.eval.d_xa;
        cell.mean_d_f += o.eval.d_f;
        cell.per_replication.push_back(o.eval);
      }
      if (ok > 0) {
        cell.mean_corr /= ok;
        cell.mean_sin /= ok;
        cell.mean_d_xa /= ok;
        cell.mean_d_f /= ok;
      }
      table.cells.push_back(std::move(cell));
    }
  }
  return table;
}

}  // namespace nslfa
