#include "bregsmooth/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bregsmooth/asymptotic.hpp"
#include "bregsmooth/dataset.hpp"
#include "bregsmooth/divergence.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/locfit.hpp"
#include "bregsmooth/loocv.hpp"
#include "bregsmooth/parallel.hpp"
#include "bregsmooth/semipar.hpp"
#include "bregsmooth/simlab.hpp"
#include "bregsmooth/varcoef.hpp"

#ifndef BREGSMOOTH_VERSION
#define BREGSMOOTH_VERSION "0.0.0"
#endif

namespace bregsmooth {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Provenance {
  std::string command;
  std::optional<std::uint64_t> seed;
};

std::string csv_provenance(const Provenance& p) {
  std::string s = "# bregsmooth " BREGSMOOTH_VERSION "\n# command: " + p.command + "\n";
  if (p.seed) s += "# seed: " + std::to_string(*p.seed) + "\n";
  return s;
}

ordered_json json_provenance(const Provenance& p) {
  ordered_json j;
  j["version"] = BREGSMOOTH_VERSION;
  j["command"] = p.command;
  if (p.seed) j["seed"] = *p.seed;
  return j;
}

void write_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed on " + tmp.string());
  }
  fs::rename(tmp, target);
}

void require_input(const std::string& path) {
  if (!fs::exists(path)) throw std::invalid_argument("input file not found: " + path);
}

std::vector<double> linspace(double lo, double hi, int k) {
  std::vector<double> v(k);
  for (int i = 0; i < k; ++i) v[i] = lo + (hi - lo) * i / (k - 1);
  return v;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// ---- shared option bundles ----------------------------------------------

struct FitOpts {
  int degree = 1;
  double bandwidth = 0.0;
  std::string kernel = "epanechnikov";
  std::string algorithm = "nr";
  double ridge = 1e-8;
  double tolerance = 1e-8;
  int max_iterations = 0;

  void attach(CLI::App* cmd, bool need_h) {
    cmd->add_option("--degree", degree, "local polynomial degree")->capture_default_str();
    auto* h = cmd->add_option("--bandwidth", bandwidth, "kernel bandwidth");
    if (need_h) h->required();
    cmd->add_option("--kernel", kernel, "epanechnikov | uniform | triangular")
        ->capture_default_str();
    cmd->add_option("--algorithm", algorithm, "nr | lb")->capture_default_str();
    cmd->add_option("--ridge", ridge, "relative ridge added to the local gram diagonal")
        ->capture_default_str();
    cmd->add_option("--tol", tolerance, "step convergence tolerance")->capture_default_str();
    cmd->add_option("--max-iter", max_iterations, "0 picks the per-algorithm default")
        ->capture_default_str();
  }

  LocalFitConfig config() const {
    LocalFitConfig c;
    c.degree = degree;
    c.bandwidth = bandwidth;
    c.kernel = Kernel::parse(kernel);
    c.algorithm = parse_algorithm(algorithm);
    c.ridge = ridge;
    c.tolerance = tolerance;
    c.max_iterations = max_iterations;
    return c;
  }
};

struct GridOpts {
  double h_min = 0.0;
  double h_max = 0.0;
  int points = 30;
  double mult = 3.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--h-min", h_min, "grid floor; 0 uses the spacing rule")
        ->capture_default_str();
    cmd->add_option("--h-max", h_max, "grid ceiling; 0 uses half the support length")
        ->capture_default_str();
    cmd->add_option("--h-points", points, "geometric grid size")->capture_default_str();
    cmd->add_option("--h-min-mult", mult, "spacing-rule multiplier for the floor")
        ->capture_default_str();
  }

  GridSpec spec() const {
    GridSpec g;
    g.lo = h_min;
    g.hi = h_max;
    g.npoints = points;
    g.h_min_multiplier = mult;
    return g;
  }
};

struct FamilyOpts {
  std::string family = "gaussian";
  double dispersion = 1.0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--family", family, "gaussian | poisson | bernoulli")->required();
    cmd->add_option("--dispersion", dispersion, "gaussian dispersion a(psi)")
        ->capture_default_str();
  }

  ExponentialFamily make() const {
    ExponentialFamily f = ExponentialFamily::parse(family);
    if (dispersion != 1.0) f = ExponentialFamily(f.kind(), dispersion);
    return f;
  }
};

struct SupportOpts {
  double lo = 0.0;
  double hi = 0.0;
  bool has_lo = false;
  bool has_hi = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--support-lo", lo, "declared design support lower end")
        ->trigger_on_parse()
        ->each([this](const std::string&) { has_lo = true; });
    cmd->add_option("--support-hi", hi, "declared design support upper end")
        ->trigger_on_parse()
        ->each([this](const std::string&) { has_hi = true; });
  }

  std::optional<std::pair<double, double>> range() const {
    if (has_lo != has_hi)
      throw std::invalid_argument("--support-lo and --support-hi must be given together");
    if (!has_lo) return std::nullopt;
    return std::make_pair(lo, hi);
  }
};

// ---- fit ------------------------------------------------------------------

struct FitCmd {
  std::string in, out, format = "csv";
  FamilyOpts family;
  FitOpts fit;
  SupportOpts support;
  int grid_points = 200;
  bool at_observations = false;

  void run(const Provenance& prov) const {
    require_input(in);
    Dataset data = read_dataset_csv(in, support.range());
    ExponentialFamily fam = family.make();
    data.check_family(fam);
    LocalFitConfig cfg = fit.config();
    LocalFitResult res = at_observations
                             ? fit_observations(data, fam, cfg, true)
                             : fit_curve(data, fam, cfg,
                                         linspace(data.support_lo, data.support_hi,
                                                  std::max(grid_points, 2)));
    if (format == "json") {
      ordered_json j;
      j["provenance"] = json_provenance(prov);
      j["eval"] = res.eval_points;
      j["theta"] = res.theta_hat;
      j["m"] = res.m_hat;
      j["iterations"] = res.iterations;
      j["converged"] = std::vector<int>(res.converged.begin(), res.converged.end());
      j["saturated"] = std::vector<int>(res.saturated.begin(), res.saturated.end());
      j["failed"] = std::vector<int>(res.failed.begin(), res.failed.end());
      if (at_observations) {
        j["y"] = res.y;
        j["H"] = res.H;
        j["S"] = res.S_diag;
      }
      write_atomic(out, j.dump(2) + "\n");
      return;
    }
    std::ostringstream os;
    os << csv_provenance(prov);
    os << (at_observations ? "x,y,theta,m,H,S,iterations,converged,saturated,failed\n"
                           : "x,theta,m,iterations,converged,saturated,failed\n");
    for (int i = 0; i < res.n(); ++i) {
      os << fmt(res.eval_points[i]) << ',';
      if (at_observations) os << fmt(res.y[i]) << ',';
      os << fmt(res.theta_hat[i]) << ',' << fmt(res.m_hat[i]) << ',';
      if (at_observations) os << fmt(res.H[i]) << ',' << fmt(res.S_diag[i]) << ',';
      os << res.iterations[i] << ',' << int(res.converged[i]) << ','
         << int(res.saturated[i]) << ',' << int(res.failed[i]) << '\n';
    }
    write_atomic(out, os.str());
  }
};

// ---- fit-vc ----------------------------------------------------------------

struct FitVcCmd {
  std::string in, out, format = "csv";
  FamilyOpts family;
  FitOpts fit;
  SupportOpts support;
  int grid_points = 200;
  bool at_observations = false;

  void run(const Provenance& prov) const {
    require_input(in);
    VCDataset data = read_vc_csv(in, support.range());
    ExponentialFamily fam = family.make();
    data.check_family(fam);
    LocalFitConfig cfg = fit.config();
    VCFitResult res =
        at_observations
            ? fit_vc_observations(data, fam, cfg, true)
            : fit_vc(data, fam, cfg,
                     linspace(data.support_lo, data.support_hi, std::max(grid_points, 2)));
    const int d = res.d;
    if (format == "json") {
      ordered_json j;
      j["provenance"] = json_provenance(prov);
      j["eval"] = res.eval_points;
      for (int k = 0; k < d; ++k) {
        std::vector<double> a(res.n()), se(res.n());
        for (int i = 0; i < res.n(); ++i) {
          a[i] = res.A_hat(i, k);
          se[i] = res.A_se(i, k);
        }
        j["a" + std::to_string(k + 1)] = a;
        if (!at_observations) j["se_a" + std::to_string(k + 1)] = se;
      }
      if (at_observations) {
        j["theta"] = res.theta_hat;
        j["m"] = res.m_hat;
        j["H"] = res.H_star;
        j["S"] = res.S_star;
      }
      j["iterations"] = res.iterations;
      j["converged"] = std::vector<int>(res.converged.begin(), res.converged.end());
      j["saturated"] = std::vector<int>(res.saturated.begin(), res.saturated.end());
      j["failed"] = std::vector<int>(res.failed.begin(), res.failed.end());
      write_atomic(out, j.dump(2) + "\n");
      return;
    }
    std::ostringstream os;
    os << csv_provenance(prov);
    os << "u";
    for (int k = 1; k <= d; ++k) os << ",a" << k;
    if (!at_observations)
      for (int k = 1; k <= d; ++k) os << ",se_a" << k;
    if (at_observations) os << ",theta,m,H,S";
    os << ",iterations,converged,saturated,failed\n";
    for (int i = 0; i < res.n(); ++i) {
      os << fmt(res.eval_points[i]);
      for (int k = 0; k < d; ++k) os << ',' << fmt(res.A_hat(i, k));
      if (!at_observations)
        for (int k = 0; k < d; ++k) os << ',' << fmt(res.A_se(i, k));
      if (at_observations)
        os << ',' << fmt(res.theta_hat[i]) << ',' << fmt(res.m_hat[i]) << ','
           << fmt(res.H_star[i]) << ',' << fmt(res.S_star[i]);
      os << ',' << res.iterations[i] << ',' << int(res.converged[i]) << ','
         << int(res.saturated[i]) << ',' << int(res.failed[i]) << '\n';
    }
    write_atomic(out, os.str());
  }
};

// ---- select / select-vc -----------------------------------------------------

void write_selection(const std::string& out, const std::string& format, const Provenance& prov,
                     const BandwidthSelection& sel) {
  if (format == "json") {
    ordered_json j;
    j["provenance"] = json_provenance(prov);
    j["criterion"] = criterion_name(sel.criterion);
    j["h_min_rule"] = sel.h_min_rule;
    j["grid"] = sel.grid;
    j["criterion_values"] = sel.criterion_values;
    j["failed"] = std::vector<int>(sel.failed.begin(), sel.failed.end());
    j["selected_index"] = sel.selected_index;
    j["selected_h"] = sel.selected_h;
    write_atomic(out, j.dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  os << csv_provenance(prov);
  os << "# criterion: " << criterion_name(sel.criterion) << "\n";
  os << "# h_min_rule: " << sel.h_min_rule << "\n";
  os << "# selected_h: " << fmt(sel.selected_h) << "\n";
  os << "h,criterion_value,failed,selected\n";
  for (size_t k = 0; k < sel.grid.size(); ++k)
    os << fmt(sel.grid[k]) << ',' << fmt(sel.criterion_values[k]) << ',' << int(sel.failed[k])
       << ',' << (static_cast<int>(k) == sel.selected_index ? 1 : 0) << '\n';
  write_atomic(out, os.str());
}

struct SelectCmd {
  std::string in, out, format = "csv";
  std::string divergence = "deviance";
  std::string criterion = "ecv";
  FamilyOpts family;
  FitOpts fit;
  GridOpts grid;
  SupportOpts support;
  int threads = 0;
  bool vc = false;

  void run(const Provenance& prov) const {
    require_input(in);
    ExponentialFamily fam = family.make();
    BregmanDivergence div = BregmanDivergence::parse(divergence, &fam);
    Criterion crit = parse_criterion(criterion);
    const int nthreads = resolve_thread_count(threads);
    BandwidthSelection sel;
    if (vc) {
      VCDataset data = read_vc_csv(in, support.range());
      data.check_family(fam);
      sel = select_bandwidth_vc(data, fam, div, crit, fit.config(), grid.spec(), nthreads);
    } else {
      Dataset data = read_dataset_csv(in, support.range());
      data.check_family(fam);
      sel = select_bandwidth(data, fam, div, crit, fit.config(), grid.spec(), nthreads);
    }
    write_selection(out, format, prov, sel);
  }
};

// ---- semipar ----------------------------------------------------------------

struct SemiparCmd {
  std::string in, out;
  std::string divergence = "deviance";
  std::string criterion = "ecv";
  FamilyOpts family;
  FitOpts fit;
  GridOpts grid;
  SupportOpts support;
  int threads = 0;

  void run(const Provenance& prov) const {
    require_input(in);
    ExponentialFamily fam = family.make();
    BregmanDivergence div = BregmanDivergence::parse(divergence, &fam);
    Criterion crit = parse_criterion(criterion);
    PLDataset data = read_pl_csv(in, support.range());
    TwoStageResult res = two_stage_select(data, fam, div, crit, fit.config(), grid.spec(),
                                          resolve_thread_count(threads));
    ordered_json j;
    j["provenance"] = json_provenance(prov);
    j["beta_diff"] = std::vector<double>(res.beta_diff.begin(), res.beta_diff.end());
    j["h_hat"] = res.h_hat();
    ordered_json sel;
    sel["criterion"] = criterion_name(res.selection.criterion);
    sel["h_min_rule"] = res.selection.h_min_rule;
    sel["grid"] = res.selection.grid;
    sel["criterion_values"] = res.selection.criterion_values;
    sel["selected_index"] = res.selection.selected_index;
    j["selection"] = sel;
    j["beta_profile"] = std::vector<double>(res.beta_profile.begin(), res.beta_profile.end());
    j["profile_rounds"] = res.profile_rounds;
    j["profile_converged"] = res.profile_converged;
    j["a_hat"] = ordered_json{{"u", res.a_hat.eval_points}, {"value", res.a_hat.m_hat}};
    write_atomic(out, j.dump(2) + "\n");
  }
};

// ---- simulate ----------------------------------------------------------------

struct SimulateCmd {
  std::string design_token = "uni_poisson_1";
  int n = 400;
  int reps = 100;
  std::uint64_t seed = 0;
  std::string criterion;  // empty keeps the study default
  std::string out_dir = ".";
  int threads = 0;
  int grid_points = 201;

  void run(const Provenance& prov) const {
    SimDesign design;
    design.model = parse_sim_model(design_token);
    design.n = n;
    design.seed = seed;
    design.validate();
    StudyConfig sc = study_config(design.model);
    if (!criterion.empty()) sc.criterion = parse_criterion(criterion);
    const ExponentialFamily fam{sim_family(design.model)};
    const BregmanDivergence div = BregmanDivergence::deviance(fam);
    ReplicateSummary sum = replicate(design, reps, sc, resolve_thread_count(threads));
    const bool vc = is_vc_model(design.model);

    ordered_json j;
    j["provenance"] = json_provenance(prov);
    j["design"] = sim_model_name(design.model);
    j["family"] = fam.name();
    j["n"] = design.n;
    j["reps"] = sum.reps;
    j["failures"] = sum.failures;
    j["criterion"] = criterion_name(sc.criterion);
    j["h_ampec"] = sum.h_ampec;
    j["h_amise"] = sum.h_amise;
    j["rep_index"] = sum.rep_index;
    j["selected_h"] = sum.selected_h;
    j["ase"] = sum.ase_values;
    j["rel_err_ampec"] = sum.rel_err_ampec;
    j["rel_err_amise"] = sum.rel_err_amise;
    j["median_rel_err_ampec"] = median_of(sum.rel_err_ampec);
    j["median_rel_err_amise"] = median_of(sum.rel_err_amise);
    j["typical"] = ordered_json{{"p25", sum.rep_index[sum.idx25]},
                                {"p50", sum.rep_index[sum.idx50]},
                                {"p75", sum.rep_index[sum.idx75]}};

    std::ostringstream box;
    box << csv_provenance(prov);
    box << "rep,selected_h,ase,rel_err_ampec,rel_err_amise\n";
    for (size_t i = 0; i < sum.rep_index.size(); ++i) {
      box << sum.rep_index[i] << ',' << fmt(sum.selected_h[i]) << ',' << fmt(sum.ase_values[i])
          << ',' << (vc ? "nan" : fmt(sum.rel_err_ampec[i])) << ','
          << (vc ? "nan" : fmt(sum.rel_err_amise[i])) << '\n';
    }

    // refit the three typical replications on a display grid
    std::ostringstream typ;
    typ << csv_provenance(prov);
    const std::vector<double> grid = linspace(0.0, 1.0, std::max(grid_points, 2));
    const int pos[3] = {sum.idx25, sum.idx50, sum.idx75};
    const char* tag[3] = {"p25", "p50", "p75"};
    if (!vc) {
      typ << "x,theta_truth,fit_p25,fit_p50,fit_p75\n";
      std::vector<std::vector<double>> fits(3);
      for (int t = 0; t < 3; ++t) {
        SimData sim = generate(design, static_cast<std::uint64_t>(sum.rep_index[pos[t]]));
        LocalFitResult fit = fit_curve(sim.data, fam, sc.fit.with_bandwidth(sum.selected_h[pos[t]]), grid);
        fits[t] = fit.theta_hat;
      }
      for (size_t i = 0; i < grid.size(); ++i) {
        typ << fmt(grid[i]) << ',' << fmt(sim_theta(design.model, grid[i]));
        for (int t = 0; t < 3; ++t) typ << ',' << fmt(fits[t][i]);
        typ << '\n';
      }
    } else {
      const int d = sim_dimension(design.model);
      typ << "u";
      for (int k = 1; k <= d; ++k) {
        typ << ",a" << k << "_truth";
        for (int t = 0; t < 3; ++t) typ << ",a" << k << '_' << tag[t];
      }
      typ << '\n';
      std::vector<Eigen::MatrixXd> fits(3);
      for (int t = 0; t < 3; ++t) {
        SimData sim = generate(design, static_cast<std::uint64_t>(sum.rep_index[pos[t]]));
        VCFitResult fit =
            fit_vc(sim.vcdata, fam, sc.fit.with_bandwidth(sum.selected_h[pos[t]]), grid);
        fits[t] = fit.A_hat;
      }
      for (size_t i = 0; i < grid.size(); ++i) {
        typ << fmt(grid[i]);
        for (int k = 0; k < d; ++k) {
          typ << ',' << fmt(sim_coefficient(design.model, k, grid[i]));
          for (int t = 0; t < 3; ++t) typ << ',' << fmt(fits[t](i, k));
        }
        typ << '\n';
      }
    }
    (void)div;

    const fs::path dir(out_dir);
    write_atomic((dir / "summary.json").string(), j.dump(2) + "\n");
    write_atomic((dir / "boxplot.csv").string(), box.str());
    write_atomic((dir / "typical_fits.csv").string(), typ.str());
  }
};

// ---- table1 -------------------------------------------------------------------

struct Table1Cmd {
  std::string out;
  int n = 400;

  void run(const Provenance& prov) const {
    std::vector<Table1Row> rows = table1_rows(n);
    std::ostringstream os;
    os << csv_provenance(prov);
    os << "family,example,h_ampec,h_amise,published_h_ampec,published_h_amise,delta\n";
    for (const Table1Row& r : rows) {
      const double delta = std::max(std::abs(r.h_ampec - r.published_h_ampec),
                                    std::abs(r.h_amise - r.published_h_amise));
      os << r.family << ',' << r.example << ',' << fmt(r.h_ampec) << ',' << fmt(r.h_amise)
         << ',' << fmt(r.published_h_ampec) << ',' << fmt(r.published_h_amise) << ',' << fmt(delta)
         << '\n';
    }
    write_atomic(out, os.str());
  }
};

// ---- dof ----------------------------------------------------------------------

struct DofCmd {
  std::string out;
  std::string family_token = "poisson";
  std::string design_token = "uni_poisson_1";
  int n = 400;
  std::uint64_t seed = 0;
  int degree = 1;
  std::string kernel = "epanechnikov";
  GridOpts grid;
  int threads = 0;

  void run(const Provenance& prov) const {
    SimDesign design;
    design.model = parse_sim_model(design_token);
    design.n = n;
    design.seed = seed;
    design.validate();
    const ExponentialFamily fam = ExponentialFamily::parse(family_token);
    if (fam.kind() != sim_family(design.model))
      throw std::invalid_argument(std::string("--family ") + fam.name() +
                                  " does not match design " + sim_model_name(design.model));
    SimData sim = generate(design, 0);
    const Kernel kern = Kernel::parse(kernel);
    const DFConstants constants = default_hat_constants(fam.kind(), degree);
    LocalFitConfig cfg;
    cfg.degree = degree;
    cfg.kernel = kern;
    cfg.algorithm =
        fam.kind() == FamilyKind::bernoulli ? FitAlgorithm::lower_bound : FitAlgorithm::newton_raphson;

    std::vector<double> hs;
    std::string rule;
    const bool vc = is_vc_model(design.model);
    if (vc)
      hs = bandwidth_grid_vc(sim.vcdata, grid.spec(), &rule);
    else
      hs = bandwidth_grid(sim.data, grid.spec(), &rule);

    std::vector<double> actual(hs.size()), empirical(hs.size());
    std::vector<char> bad(hs.size(), 0);
    parallel_for(static_cast<int>(hs.size()), resolve_thread_count(threads), [&](int k) {
      try {
        double sumh = 0.0;
        if (vc) {
          VCFitResult fit = fit_vc_observations(sim.vcdata, fam, cfg.with_bandwidth(hs[k]), true);
          for (double v : fit.H_star)
            if (std::isfinite(v)) sumh += v;
          empirical[k] = empirical_df_vc(sim.vcdata.d(), degree, sim.vcdata.n(), hs[k], kern,
                                         sim.vcdata.support_length(), constants);
        } else {
          LocalFitResult fit = fit_observations(sim.data, fam, cfg.with_bandwidth(hs[k]), true);
          for (double v : fit.H)
            if (std::isfinite(v)) sumh += v;
          empirical[k] = empirical_df(degree, sim.data.n(), hs[k], kern,
                                      sim.data.support_length(), constants);
        }
        actual[k] = sumh;
      } catch (const std::exception&) {
        bad[k] = 1;
        actual[k] = empirical[k] = std::numeric_limits<double>::quiet_NaN();
      }
    });

    std::ostringstream os;
    os << csv_provenance(prov);
    os << "# design: " << sim_model_name(design.model) << "\n";
    os << "# h_min_rule: " << rule << "\n";
    os << "h,sum_H_actual,sum_H_empirical\n";
    for (size_t k = 0; k < hs.size(); ++k)
      os << fmt(hs[k]) << ',' << fmt(actual[k]) << ',' << fmt(empirical[k]) << '\n';
    write_atomic(out, os.str());
  }
};

// ---- losses ---------------------------------------------------------------------

struct LossesCmd {
  std::string out;
  double from = -2.0;
  double to = 4.0;
  int points = 301;

  void run(const Provenance& prov) const {
    if (points < 2) throw std::invalid_argument("losses: need at least two points");
    if (!(from < to)) throw std::invalid_argument("losses: need --from < --to");
    std::ostringstream os;
    os << csv_provenance(prov);
    os << "margin,misclass,hinge,exploss,deviance,quadratic\n";
    for (double u : linspace(from, to, points)) {
      os << fmt(u) << ',' << fmt(margin_loss(DivergenceKind::misclassification, u)) << ','
         << fmt(margin_loss(DivergenceKind::hinge, u)) << ','
         << fmt(margin_loss(DivergenceKind::exponential_binary, u)) << ','
         << fmt(margin_loss(DivergenceKind::deviance, u)) << ','
         << fmt(margin_loss(DivergenceKind::quadratic, u)) << '\n';
    }
    write_atomic(out, os.str());
  }
};

std::string rebuild_command(int argc, const char* const* argv) {
  std::string s = fs::path(argv[0]).filename().string();
  for (int i = 1; i < argc; ++i) {
    s += ' ';
    s += argv[i];
  }
  return s;
}

}  // namespace

const char* library_version() { return BREGSMOOTH_VERSION; }

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"local likelihood fitting with prediction-error bandwidth selection"};
  app.set_version_flag("--version", BREGSMOOTH_VERSION);
  app.require_subcommand(1);

  FitCmd fit_cmd;
  FitVcCmd fitvc_cmd;
  SelectCmd select_cmd, selectvc_cmd;
  selectvc_cmd.vc = true;
  SemiparCmd semipar_cmd;
  SimulateCmd simulate_cmd;
  Table1Cmd table1_cmd;
  DofCmd dof_cmd;
  LossesCmd losses_cmd;

  CLI::App* fit = app.add_subcommand("fit", "fit one curve at a grid or at the observations");
  fit->add_option("--in", fit_cmd.in, "input csv with columns x,y")->required();
  fit->add_option("--out", fit_cmd.out, "output path")->required();
  fit->add_option("--format", fit_cmd.format, "csv | json")->capture_default_str();
  fit->add_option("--grid-points", fit_cmd.grid_points, "evaluation grid size")
      ->capture_default_str();
  fit->add_flag("--at-observations", fit_cmd.at_observations,
                "evaluate at the design points and emit leverage diagnostics");
  fit_cmd.family.attach(fit);
  fit_cmd.fit.attach(fit, true);
  fit_cmd.support.attach(fit);

  CLI::App* fitvc = app.add_subcommand("fit-vc", "fit varying coefficients along u");
  fitvc->add_option("--in", fitvc_cmd.in, "input csv with columns u,x1..xd,y")->required();
  fitvc->add_option("--out", fitvc_cmd.out, "output path")->required();
  fitvc->add_option("--format", fitvc_cmd.format, "csv | json")->capture_default_str();
  fitvc->add_option("--grid-points", fitvc_cmd.grid_points, "evaluation grid size")
      ->capture_default_str();
  fitvc->add_flag("--at-observations", fitvc_cmd.at_observations,
                  "evaluate at the design points and emit leverage diagnostics");
  fitvc_cmd.family.attach(fitvc);
  fitvc_cmd.fit.attach(fitvc, true);
  fitvc_cmd.support.attach(fitvc);

  auto attach_select = [](CLI::App* cmd, SelectCmd& c, const char* incols) {
    cmd->add_option("--in", c.in, incols)->required();
    cmd->add_option("--out", c.out, "output path")->required();
    cmd->add_option("--format", c.format, "csv | json")->capture_default_str();
    cmd->add_option("--divergence", c.divergence,
                    "quadratic | deviance | exploss | misclass | hinge")
        ->capture_default_str();
    cmd->add_option("--criterion", c.criterion, "cv | acv | ecv | hybrid | hybrid-ecv")
        ->capture_default_str();
    cmd->add_option("--threads", c.threads, "0 resolves BREGSMOOTH_THREADS, then cores")
        ->capture_default_str();
    c.family.attach(cmd);
    c.fit.attach(cmd, false);
    c.grid.attach(cmd);
    c.support.attach(cmd);
  };
  attach_select(app.add_subcommand("select", "search the bandwidth grid on one curve"),
                select_cmd, "input csv with columns x,y");
  attach_select(
      app.add_subcommand("select-vc", "search the bandwidth grid for varying coefficients"),
      selectvc_cmd, "input csv with columns u,x1..xd,y");

  CLI::App* semipar =
      app.add_subcommand("semipar", "two-stage partially linear fit (gaussian)");
  semipar->add_option("--in", semipar_cmd.in, "input csv with columns u,z1..zq,y")->required();
  semipar->add_option("--out", semipar_cmd.out, "output json path")->required();
  semipar->add_option("--divergence", semipar_cmd.divergence, "stage-2 divergence")
      ->capture_default_str();
  semipar->add_option("--criterion", semipar_cmd.criterion, "stage-2 criterion")
      ->capture_default_str();
  semipar->add_option("--threads", semipar_cmd.threads, "grid worker cap")
      ->capture_default_str();
  semipar_cmd.family.attach(semipar);
  semipar_cmd.fit.attach(semipar, false);
  semipar_cmd.grid.attach(semipar);
  semipar_cmd.support.attach(semipar);

  CLI::App* simulate = app.add_subcommand("simulate", "replicate a study design");
  simulate->add_option("--design", simulate_cmd.design_token,
                       "uni_{poisson,bernoulli}_{1..3} | vc_{poisson,bernoulli}_{1,2}")
      ->capture_default_str();
  simulate->add_option("--n", simulate_cmd.n, "sample size")->capture_default_str();
  simulate->add_option("--reps", simulate_cmd.reps, "replication count")->capture_default_str();
  simulate->add_option("--seed", simulate_cmd.seed, "base seed")->capture_default_str();
  simulate->add_option("--criterion", simulate_cmd.criterion,
                       "override the design's selection criterion");
  simulate->add_option("--out-dir", simulate_cmd.out_dir, "artifact directory")
      ->capture_default_str();
  simulate->add_option("--threads", simulate_cmd.threads, "replication worker cap")
      ->capture_default_str();
  simulate->add_option("--grid-points", simulate_cmd.grid_points, "typical-fit grid size")
      ->capture_default_str();

  CLI::App* table1 = app.add_subcommand("table1", "asymptotic bandwidths for the six designs");
  table1->add_option("--out", table1_cmd.out, "output csv path")->required();
  table1->add_option("--n", table1_cmd.n, "sample size in the rate")->capture_default_str();

  CLI::App* dof = app.add_subcommand("dof", "actual vs empirical degrees of freedom");
  dof->add_option("--out", dof_cmd.out, "output csv path")->required();
  dof->add_option("--family", dof_cmd.family_token, "must match the design")->required();
  dof->add_option("--design", dof_cmd.design_token, "study design")->required();
  dof->add_option("--n", dof_cmd.n, "sample size")->capture_default_str();
  dof->add_option("--seed", dof_cmd.seed, "seed")->capture_default_str();
  dof->add_option("--degree", dof_cmd.degree, "local polynomial degree")->capture_default_str();
  dof->add_option("--kernel", dof_cmd.kernel, "kernel")->capture_default_str();
  dof->add_option("--threads", dof_cmd.threads, "grid worker cap")->capture_default_str();
  dof_cmd.grid.attach(dof);

  CLI::App* losses = app.add_subcommand("losses", "margin-scale loss curves");
  losses->add_option("--out", losses_cmd.out, "output csv path")->required();
  losses->add_option("--from", losses_cmd.from, "margin start")->capture_default_str();
  losses->add_option("--to", losses_cmd.to, "margin end")->capture_default_str();
  losses->add_option("--points", losses_cmd.points, "grid size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }

  Provenance prov;
  prov.command = rebuild_command(argc, argv);
  if (simulate->parsed() || dof->parsed())
    prov.seed = simulate->parsed() ? simulate_cmd.seed : dof_cmd.seed;

  try {
    if (fit->parsed()) fit_cmd.run(prov);
    else if (fitvc->parsed()) fitvc_cmd.run(prov);
    else if (app.got_subcommand("select")) select_cmd.run(prov);
    else if (app.got_subcommand("select-vc")) selectvc_cmd.run(prov);
    else if (semipar->parsed()) semipar_cmd.run(prov);
    else if (simulate->parsed()) simulate_cmd.run(prov);
    else if (table1->parsed()) table1_cmd.run(prov);
    else if (dof->parsed()) dof_cmd.run(prov);
    else if (losses->parsed()) losses_cmd.run(prov);
    return 0;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    ordered_json diag;
    diag["error"] = e.what();
    diag["command"] = prov.command;
    std::cerr << diag.dump() << std::endl;
    return 1;
  }
}

}  // namespace bregsmooth
