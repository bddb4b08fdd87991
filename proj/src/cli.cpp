#include "nslfa/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nslfa/identifiability.hpp"
#include "nslfa/io.hpp"
#include "nslfa/metrics.hpp"
#include "nslfa/rng.hpp"
#include "nslfa/simulation.hpp"

namespace nslfa {

namespace fs = std::filesystem;

namespace {

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string subset_to_string(const std::vector<int>& s) {
  if (s.empty()) return "{}";
  std::string out = "{";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += (i ? "," : "") + std::to_string(s[i] + 1);
  }
  return out + "}";
}

}  // namespace

int cmd_check_q(const std::string& design_path, std::ostream& out,
                std::ostream& err) {
  try {
    const DesignMatrix q = validate_design(read_design_csv(design_path));
    const IdentifiabilityReport report = identifiability_report(q);

    out << "design: " << q.items() << " items x " << q.factors()
        << " factors\n\n";
    out << "factor  identifiable  witness intersection\n";
    for (Index k = 0; k < q.factors(); ++k) {
      const auto idx = static_cast<std::size_t>(k);
      out << std::left << std::setw(8) << k + 1 << std::setw(14)
          << (report.per_factor[idx] ? "yes" : "no")
          << subset_to_string(report.witness[idx]) << "\n";
    }

    // distinct loading patterns are exactly the subsets with non-empty R_Q
    std::vector<std::uint32_t> seen;
    out << "\nnon-empty R_Q(S):\n";
    for (Index j = 0; j < q.items(); ++j) {
      const std::uint32_t m = q.row_mask(j);
      if (std::find(seen.begin(), seen.end(), m) != seen.end()) continue;
      seen.push_back(m);
      std::vector<int> s;
      for (int k = 0; k < q.factors(); ++k) {
        if (m & (1u << k)) s.push_back(k);
      }
      const auto items = r_q(q, m);
      out << "  S=" << subset_to_string(s) << " -> " << items.size()
          << " item(s):";
      for (const Index it : items) out << " " << it + 1;
      out << "\n";
    }

    return report.all_identifiable() ? kExitOk : kExitVerdict;
  } catch (const std::exception& e) {
    err << "check-q: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_fit(const FitArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const CsvTable table = read_csv(args.data_path);
    const DesignMatrix q = validate_design(read_design_csv(args.design_path));
    if (table.values.cols() != q.items()) {
      throw DimensionMismatch(
          "data has " + std::to_string(table.values.cols()) +
          " columns but the design has " + std::to_string(q.items()) +
          " rows");
    }
    if (args.k != 0 && args.k != q.factors()) {
      throw DimensionMismatch("--k disagrees with the design width");
    }
    const Dataset data(table.values, table.labels, table.header);

    FitConfig cfg;
    cfg.k = q.factors();
    cfg.seed = args.seed;
    if (args.method == "joint-map") {
      cfg.method = FitConfig::Method::joint_map;
    } else if (args.method == "iterative") {
      cfg.method = FitConfig::Method::iterative;
    } else {
      throw ParseError("unknown --method '" + args.method + "'");
    }
    if (args.x_prior == "normal") {
      cfg.prior.x_prior = XPrior::standard_normal;
    } else if (args.x_prior == "uniform") {
      cfg.prior.x_prior = XPrior::uniform;
    } else {
      throw ParseError("unknown --x-prior '" + args.x_prior + "'");
    }
    if (args.algorithm == "scg") {
      cfg.optim.algorithm = OptimOptions::Algorithm::scg;
    } else if (args.algorithm == "gd") {
      cfg.optim.algorithm = OptimOptions::Algorithm::gd;
    } else {
      throw ParseError("unknown --algorithm '" + args.algorithm + "'");
    }

    const FitResult result = fit(data, q, cfg);

    RunManifest manifest;
    manifest.command = "fit";
    manifest.config = {{"method", args.method},
                       {"x_prior", args.x_prior},
                       {"algorithm", args.algorithm},
                       {"k", cfg.k},
                       {"links_grid", args.links_grid}};
    manifest.seed = args.seed;
    manifest.input_paths = {args.data_path, args.design_path};
    manifest.output_paths = {join_path(args.out_dir, "fit.json")};

    std::vector<std::string> link_files;
    if (args.links_grid > 0) {
      for (Index j = 0; j < q.items(); ++j) {
        link_files.push_back(
            join_path(args.out_dir, "links_item" + std::to_string(j + 1) +
                                        ".csv"));
        manifest.output_paths.push_back(link_files.back());
      }
    }
    write_manifest(manifest, args.out_dir);

    {
      std::ofstream f(join_path(args.out_dir, "fit.json"));
      f << fit_to_json(result, "manifest.json").dump(2) << "\n";
    }

    if (args.links_grid > 0) {
      const Matrix t_all = result.x_hat.x * result.a_hat.a.transpose();
      for (Index j = 0; j < q.items(); ++j) {
        const double lo = t_all.col(j).minCoeff();
        const double hi = t_all.col(j).maxCoeff();
        const double pad = 0.1 * std::max(hi - lo, 1e-12);
        Vector grid(args.links_grid);
        for (int g = 0; g < args.links_grid; ++g) {
          grid(g) = lo - pad + (hi - lo + 2 * pad) * g /
                                   std::max(1, args.links_grid - 1);
        }
        const Vector fj = predict_links(result, grid, j);
        Matrix curve(grid.size(), 2);
        curve.col(0) = grid;
        curve.col(1) = fj;
        write_matrix_csv(link_files[static_cast<std::size_t>(j)], curve,
                         {"t", "f_hat"}, "manifest.json");
      }
    }

    out << "fit: method=" << result.method
        << " converged=" << (result.converged ? "yes" : "no")
        << " iterations=" << result.iterations << " w=" << result.theta_hat.w
        << " tau=" << result.theta_hat.tau
        << " sigma2=" << result.theta_hat.sigma2 << "\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "fit: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_simulate(const SimulateArgs& args, std::ostream& out,
                 std::ostream& err) {
  try {
    ScenarioSpec spec = ScenarioSpec::by_name(args.scenario);
    if (!args.j_list.empty()) spec.j_list = args.j_list;
    spec.replications = args.full ? 100 : args.reps;
    if (spec.replications < 0) throw ParseError("--reps must be >= 0");
    spec.seed = args.seed;

    std::vector<SimMethod> methods;
    for (const auto& m : args.methods) methods.push_back(parse_method(m));

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config = {{"scenario", args.scenario},
                       {"j_list", spec.j_list},
                       {"replications", spec.replications},
                       {"methods", args.methods}};
    manifest.seed = args.seed;
    manifest.output_paths = {join_path(args.out_dir, "table.csv"),
                             join_path(args.out_dir, "report.txt")};
    if (args.dump_replications) {
      manifest.output_paths.push_back(
          join_path(args.out_dir, "replications.jsonl"));
    }
    write_manifest(manifest, args.out_dir);

    SummaryTable table;
    if (spec.replications > 0) {
      table = run_replications(spec, methods);
    } else {
      table.scenario = spec.name;
      table.k = spec.k;
    }

    // CSV: one row per (method, J)
    {
      std::ofstream f(join_path(args.out_dir, "table.csv"));
      f << "# manifest: manifest.json\n";
      f << "method,J,N,replications,failures";
      for (Index k = 0; k < spec.k; ++k) f << ",corr_x" << k + 1;
      for (Index k = 0; k < spec.k; ++k) f << ",sin_x" << k + 1;
      f << ",d_xa,d_f\n";
      f.precision(6);
      for (const auto& cell : table.cells) {
        f << cell.method << "," << cell.j << "," << cell.n << ","
          << cell.replications << "," << cell.failures;
        for (Index k = 0; k < spec.k; ++k) f << "," << cell.mean_corr(k);
        for (Index k = 0; k < spec.k; ++k) f << "," << cell.mean_sin(k);
        f << "," << cell.mean_d_xa << "," << cell.mean_d_f << "\n";
      }
    }

    // text report
    std::ostringstream rep;
    rep << "scenario " << spec.name << "  (K=" << spec.k
        << ", N=5J, sigma2=" << spec.sigma2_true
        << ", replications=" << spec.replications << ", seed=" << spec.seed
        << ")\n\n";
    rep << std::left << std::setw(16) << "method" << std::setw(6) << "J";
    for (Index k = 0; k < spec.k; ++k) {
      rep << std::setw(10) << ("Corr_x" + std::to_string(k + 1));
    }
    for (Index k = 0; k < spec.k; ++k) {
      rep << std::setw(10) << ("Sin_x" + std::to_string(k + 1));
    }
    rep << std::setw(10) << "d_XA" << std::setw(10) << "d_f" << "\n";
    rep << std::fixed << std::setprecision(3);
    for (const auto& cell : table.cells) {
      rep << std::left << std::setw(16) << cell.method << std::setw(6)
          << cell.j;
      for (Index k = 0; k < spec.k; ++k) {
        rep << std::setw(10) << cell.mean_corr(k);
      }
      for (Index k = 0; k < spec.k; ++k) {
        rep << std::setw(10) << cell.mean_sin(k);
      }
      rep << std::setw(10) << cell.mean_d_xa << std::setw(10) << cell.mean_d_f
          << "\n";
    }
    {
      std::ofstream f(join_path(args.out_dir, "report.txt"));
      f << rep.str();
    }
    out << rep.str();

    if (args.dump_replications) {
      std::ofstream f(join_path(args.out_dir, "replications.jsonl"));
      for (const auto& cell : table.cells) {
        int r = 0;
        for (const auto& ev : cell.per_replication) {
          nlohmann::json line;
          line["method"] = cell.method;
          line["J"] = cell.j;
          line["replication"] = r++;
          line["corr"] = std::vector<double>(ev.corr.data(),
                                             ev.corr.data() + ev.corr.size());
          line["sin"] = std::vector<double>(ev.sin.data(),
                                            ev.sin.data() + ev.sin.size());
          line["d_xa"] = ev.d_xa;
          line["d_f"] = ev.d_f;
          f << line.dump() << "\n";
        }
      }
    }

    return kExitOk;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_oil(const OilArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const CsvTable table = read_csv(args.data_path);
    if (table.values.cols() != 12) {
      throw WrongColumnCount("expected 12 feature columns, found " +
                             std::to_string(table.values.cols()));
    }
    if (!table.has_labels()) {
      throw MissingLabels("a trailing label column is required");
    }

    Matrix y = table.values;
    std::vector<int> labels = table.labels;

    // seeded subsample without replacement
    if (args.subsample > 0 &&
        static_cast<Index>(args.subsample) < y.rows()) {
      std::vector<Index> idx(static_cast<std::size_t>(y.rows()));
      std::iota(idx.begin(), idx.end(), Index{0});
      Rng rng(mix_seed(args.seed, 0x011u));
      for (Index i = 0; i < args.subsample; ++i) {
        const auto r =
            i + static_cast<Index>(rng.uniform() *
                                   static_cast<double>(idx.size() - i));
        std::swap(idx[static_cast<std::size_t>(i)],
                  idx[static_cast<std::size_t>(r)]);
      }
      Matrix sub(args.subsample, y.cols());
      std::vector<int> sub_labels(static_cast<std::size_t>(args.subsample));
      for (Index i = 0; i < args.subsample; ++i) {
        sub.row(i) = y.row(idx[static_cast<std::size_t>(i)]);
        sub_labels[static_cast<std::size_t>(i)] =
            labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      }
      y = std::move(sub);
      labels = std::move(sub_labels);
    }

    if (args.standardize) {
      y.rowwise() -= y.colwise().mean().eval();
      for (Index c = 0; c < y.cols(); ++c) {
        const double sd =
            std::sqrt(y.col(c).squaredNorm() / static_cast<double>(y.rows() - 1));
        if (sd > 0.0) y.col(c) /= sd;
      }
    }

    const Dataset data(y, labels);

    // 1) unconstrained linear FA -> varimax -> threshold -> derived design
    const DesignMatrix all_ones(IntMatrix::Ones(data.items(), 2));
    const LinearFaFit lfa0 = fit_linear_fa(data, all_ones);
    const VarimaxResult vmax = varimax(lfa0.a_hat.a);
    const DesignMatrix derived = threshold_design(vmax.rotated, args.threshold);

    // 2) constrained LFA and NSLFA on the derived design
    const LinearFaFit lfa = fit_linear_fa(data, derived);
    FitConfig cfg;
    cfg.k = 2;
    cfg.seed = args.seed;
    const FitResult nslfa_fit = fit_joint_map(data, derived, cfg);

    const int err_lfa = nn_class_error(lfa.x_hat.x, labels);
    const int err_nslfa = nn_class_error(nslfa_fit.x_hat.x, labels);

    RunManifest manifest;
    manifest.command = "oil";
    manifest.config = {{"subsample", args.subsample},
                       {"threshold", args.threshold},
                       {"standardize", args.standardize}};
    manifest.seed = args.seed;
    manifest.input_paths = {args.data_path};
    manifest.output_paths = {join_path(args.out_dir, "lfa_embedding.csv"),
                             join_path(args.out_dir, "nslfa_embedding.csv"),
                             join_path(args.out_dir, "derived_design.csv"),
                             join_path(args.out_dir, "oil_report.txt")};
    write_manifest(manifest, args.out_dir);

    auto write_embedding = [&](const std::string& name, const Matrix& z) {
      Matrix with_labels(z.rows(), 3);
      with_labels.leftCols(2) = z;
      for (Index i = 0; i < z.rows(); ++i) {
        with_labels(i, 2) = labels[static_cast<std::size_t>(i)];
      }
      write_matrix_csv(join_path(args.out_dir, name), with_labels,
                       {"z1", "z2", "label"}, "manifest.json");
    };
    write_embedding("lfa_embedding.csv", lfa.x_hat.x);
    write_embedding("nslfa_embedding.csv", nslfa_fit.x_hat.x);
    write_matrix_csv(join_path(args.out_dir, "derived_design.csv"),
                     derived.q().cast<double>(), {}, "manifest.json");

    std::ostringstream rep;
    rep << "oil pipeline on " << data.n() << " points, "
        << (args.standardize ? "standardized" : "raw") << " features\n"
        << "derived design (varimax threshold " << args.threshold << "):\n";
    for (Index j = 0; j < derived.items(); ++j) {
      rep << "  item " << j + 1 << ":";
      for (Index k = 0; k < derived.factors(); ++k) {
        rep << " " << derived.q()(j, k);
      }
      rep << "\n";
    }
    rep << "nearest-neighbor classification errors:\n"
        << "  LFA:   " << err_lfa << "\n"
        << "  NSLFA: " << err_nslfa << "\n";
    {
      std::ofstream f(join_path(args.out_dir, "oil_report.txt"));
      f << rep.str();
    }
    out << rep.str();
    return kExitOk;
  } catch (const std::exception& e) {
    err << "oil: " << e.what() << "\n";
    return kExitError;
  }
}

}  // namespace nslfa
