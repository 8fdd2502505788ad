#include "bregsmooth/simlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "bregsmooth/divergence.hpp"
#include "bregsmooth/parallel.hpp"
#include "bregsmooth/rng.hpp"
#include "bregsmooth/varcoef.hpp"

namespace bregsmooth {

namespace {

constexpr double kPi = 3.14159265358979323846;

double bump_pair(double x) {
  const double z1 = 4.0 * x - 1.0;
  const double z2 = 4.0 * x - 3.0;
  return std::exp(-z1 * z1) + std::exp(-z2 * z2);
}

// d^2/dx^2 exp(-(4x-c)^2) = 32 exp(-z^2)(2z^2 - 1), z = 4x - c
double bump_pair_dd(double x) {
  const double z1 = 4.0 * x - 1.0;
  const double z2 = 4.0 * x - 3.0;
  return 32.0 * (std::exp(-z1 * z1) * (2.0 * z1 * z1 - 1.0) +
                 std::exp(-z2 * z2) * (2.0 * z2 * z2 - 1.0));
}

struct DesignRow {
  SimModel model;
  const char* name;
  FamilyKind family;
  int d;  // 1 marks the univariate designs
  double (*theta)(double);
  double (*theta2)(double);
  double (*coef[3])(double);
  double grid_lo;    // absolute bandwidth floor; 0 means use the multiplier
  double grid_mult;  // times the spacing statistic h0
};

const DesignRow kDesigns[] = {
    {SimModel::uni_poisson_1, "uni_poisson_1", FamilyKind::poisson, 1,
     [](double x) { return 3.5 * bump_pair(x) - 1.5; },
     [](double x) { return 3.5 * bump_pair_dd(x); },
     {nullptr, nullptr, nullptr},
     0.0,
     3.0},
    {SimModel::uni_poisson_2, "uni_poisson_2", FamilyKind::poisson, 1,
     [](double x) { return std::sin(2.0 * (4.0 * x - 2.0)) + 1.0; },
     [](double x) { return -64.0 * std::sin(2.0 * (4.0 * x - 2.0)); },
     {nullptr, nullptr, nullptr},
     0.0,
     3.0},
    {SimModel::uni_poisson_3, "uni_poisson_3", FamilyKind::poisson, 1,
     [](double x) { return 2.0 - 0.5 * (4.0 * x - 2.0) * (4.0 * x - 2.0); },
     [](double) { return -16.0; },
     {nullptr, nullptr, nullptr},
     0.0,
     3.0},
    {SimModel::uni_bernoulli_1, "uni_bernoulli_1", FamilyKind::bernoulli, 1,
     [](double x) { return 7.0 * bump_pair(x) - 5.5; },
     [](double x) { return 7.0 * bump_pair_dd(x); },
     {nullptr, nullptr, nullptr},
     0.0,
     5.0},
    {SimModel::uni_bernoulli_2, "uni_bernoulli_2", FamilyKind::bernoulli, 1,
     [](double x) { return 2.5 * std::sin(2.0 * kPi * x); },
     [](double x) { return -2.5 * 4.0 * kPi * kPi * std::sin(2.0 * kPi * x); },
     {nullptr, nullptr, nullptr},
     0.1,
     3.0},
    {SimModel::uni_bernoulli_3, "uni_bernoulli_3", FamilyKind::bernoulli, 1,
     [](double x) { return 2.0 - (4.0 * x - 2.0) * (4.0 * x - 2.0); },
     [](double) { return -32.0; },
     {nullptr, nullptr, nullptr},
     0.1,
     3.0},
    {SimModel::vc_poisson_1, "vc_poisson_1", FamilyKind::poisson, 2, nullptr, nullptr,
     {[](double u) { return 5.5 + 0.1 * std::exp(2.0 * u - 1.0); },
      [](double u) { return 0.8 * u * (1.0 - u); }, nullptr},
     0.0,
     3.0},
    {SimModel::vc_poisson_2, "vc_poisson_2", FamilyKind::poisson, 3, nullptr, nullptr,
     {[](double u) { return 5.5 + 0.1 * std::exp(2.0 * u - 1.0); },
      [](double u) { return 0.8 * u * (1.0 - u); },
      [](double u) {
        const double s = std::sin(2.0 * kPi * u);
        return 0.2 * s * s;
      }},
     0.0,
     3.0},
    {SimModel::vc_bernoulli_1, "vc_bernoulli_1", FamilyKind::bernoulli, 2, nullptr, nullptr,
     {[](double u) { return 1.3 * (std::exp(2.0 * u - 1.0) - 1.5); },
      [](double u) { return 1.2 * (8.0 * u * (1.0 - u) - 1.0); }, nullptr},
     0.1,
     3.0},
    {SimModel::vc_bernoulli_2, "vc_bernoulli_2", FamilyKind::bernoulli, 3, nullptr, nullptr,
     {[](double u) { return std::exp(2.0 * u - 1.0) - 1.5; },
      [](double u) { return 0.8 * (8.0 * u * (1.0 - u) - 1.0); },
      [](double u) { return 0.9 * (2.0 * std::sin(kPi * u) - 1.0); }},
     0.1,
     3.0},
};

const DesignRow& design_row(SimModel model) {
  for (const DesignRow& row : kDesigns)
    if (row.model == model) return row;
  throw std::invalid_argument("unknown simulation model");
}

int quantile_position(int k, double q) {
  if (k <= 1) return 0;
  return static_cast<int>(std::lround(q * (k - 1)));
}

}  // namespace

SimModel parse_sim_model(std::string_view token) {
  for (const DesignRow& row : kDesigns)
    if (token == row.name) return row.model;
  throw std::invalid_argument("unknown design '" + std::string(token) + "'");
}

const char* sim_model_name(SimModel model) { return design_row(model).name; }

bool is_vc_model(SimModel model) { return design_row(model).d > 1; }

FamilyKind sim_family(SimModel model) { return design_row(model).family; }

int sim_dimension(SimModel model) { return design_row(model).d; }

void SimDesign::validate() const {
  design_row(model);
  if (n < 50) throw std::invalid_argument("sim design: need n >= 50");
}

double sim_theta(SimModel model, double x) {
  const DesignRow& row = design_row(model);
  if (!row.theta) throw std::invalid_argument("sim_theta: not a univariate design");
  return row.theta(x);
}

double sim_theta_second(SimModel model, double x) {
  const DesignRow& row = design_row(model);
  if (!row.theta2) throw std::invalid_argument("sim_theta_second: not a univariate design");
  return row.theta2(x);
}

double sim_coefficient(SimModel model, int k, double u) {
  const DesignRow& row = design_row(model);
  if (row.d < 2) throw std::invalid_argument("sim_coefficient: not a varying-coefficient design");
  if (k < 0 || k >= row.d) throw std::invalid_argument("sim_coefficient: index out of range");
  return row.coef[k](u);
}

double sim_theta_vc(SimModel model, double u, const Eigen::VectorXd& x) {
  const DesignRow& row = design_row(model);
  if (row.d < 2) throw std::invalid_argument("sim_theta_vc: not a varying-coefficient design");
  if (x.size() != row.d) throw std::invalid_argument("sim_theta_vc: covariate length mismatch");
  double theta = 0.0;
  for (int k = 0; k < row.d; ++k) theta += row.coef[k](u) * x(k);
  return theta;
}

SimData generate(const SimDesign& design, std::uint64_t stream) {
  design.validate();
  const DesignRow& row = design_row(design.model);
  CounterRng rng(design.seed, stream);
  SimData out;
  auto draw_response = [&](double theta) {
    if (row.family == FamilyKind::poisson)
      return static_cast<double>(rng.poisson(std::exp(theta)));
    return static_cast<double>(rng.bernoulli(1.0 / (1.0 + std::exp(-theta))));
  };
  if (row.d == 1) {
    std::vector<double> x(design.n), y(design.n);
    for (int i = 0; i < design.n; ++i) {
      x[i] = rng.uniform01();
      y[i] = draw_response(row.theta(x[i]));
    }
    out.data = Dataset::from_xy(std::move(x), std::move(y), {{0.0, 1.0}});
    out.theta_truth.resize(design.n);
    for (int i = 0; i < design.n; ++i) out.theta_truth[i] = row.theta(out.data.x[i]);
  } else {
    out.vc = true;
    std::vector<double> u(design.n), y(design.n);
    Eigen::MatrixXd X(design.n, row.d);
    const bool correlated = row.family == FamilyKind::poisson;  // corr 1/sqrt(2)
    for (int i = 0; i < design.n; ++i) {
      u[i] = rng.uniform01();
      X(i, 0) = 1.0;
      if (row.d >= 2) X(i, 1) = rng.normal();
      if (row.d >= 3) {
        const double z = rng.normal();
        X(i, 2) = correlated ? (X(i, 1) + z) / std::sqrt(2.0) : z;
      }
      y[i] = draw_response(sim_theta_vc(design.model, u[i], X.row(i)));
    }
    out.vcdata = VCDataset::from_parts(std::move(u), std::move(X), std::move(y), {{0.0, 1.0}});
    out.theta_truth.resize(design.n);
    for (int i = 0; i < design.n; ++i)
      out.theta_truth[i] = sim_theta_vc(design.model, out.vcdata.u[i], out.vcdata.X.row(i));
  }
  return out;
}

double ase(const std::vector<double>& theta_hat, const std::vector<double>& theta_truth) {
  if (theta_hat.size() != theta_truth.size())
    throw std::invalid_argument("ase: length mismatch");
  if (theta_hat.empty()) throw std::invalid_argument("ase: empty input");
  double acc = 0.0;
  for (size_t i = 0; i < theta_hat.size(); ++i) {
    const double d = theta_hat[i] - theta_truth[i];
    acc += d * d;
  }
  return acc / theta_hat.size();
}

StudyConfig study_config(SimModel model) {
  const DesignRow& row = design_row(model);
  StudyConfig sc;
  sc.fit.degree = 1;
  sc.fit.kernel = Kernel(KernelKind::epanechnikov);
  sc.fit.algorithm = row.family == FamilyKind::bernoulli ? FitAlgorithm::lower_bound
                                                         : FitAlgorithm::newton_raphson;
  sc.criterion =
      row.family == FamilyKind::bernoulli ? Criterion::hybrid_ecv : Criterion::ecv;
  sc.grid.lo = row.grid_lo;
  sc.grid.h_min_multiplier = row.grid_mult;
  return sc;
}

ModelSpec asymptotic_spec(SimModel model, int n) {
  const DesignRow& row = design_row(model);
  if (row.d != 1)
    throw std::invalid_argument(
        "asymptotic_spec: closed-form targets cover the univariate designs only");
  ModelSpec spec;
  spec.family = ExponentialFamily(row.family);
  spec.theta = row.theta;
  spec.theta_deriv = row.theta2;
  spec.density = [](double) { return 1.0; };
  spec.lo = 0.0;
  spec.hi = 1.0;
  spec.degree = 1;
  spec.kernel = Kernel(KernelKind::epanechnikov);
  spec.n = n;
  return spec;
}

ReplicateSummary replicate(const SimDesign& design, int reps, int threads) {
  return replicate(design, reps, study_config(design.model), threads);
}

ReplicateSummary replicate(const SimDesign& design, int reps, const StudyConfig& sc,
                           int threads) {
  design.validate();
  if (reps < 1) throw std::invalid_argument("replicate: need reps >= 1");
  const ExponentialFamily family{sim_family(design.model)};
  const BregmanDivergence divergence = BregmanDivergence::deviance(family);
  const bool vc = is_vc_model(design.model);

  struct Slot {
    bool ok = false;
    double h = 0.0;
    double err = 0.0;
  };
  std::vector<Slot> slots(reps);
  parallel_for(reps, threads, [&](int r) {
    try {
      SimData sim = generate(design, static_cast<std::uint64_t>(r));
      double hsel, err;
      if (!vc) {
        BandwidthSelection sel =
            select_bandwidth(sim.data, family, divergence, sc.criterion, sc.fit, sc.grid, 1);
        LocalFitResult fit =
            fit_observations(sim.data, family, sc.fit.with_bandwidth(sel.selected_h), false);
        hsel = sel.selected_h;
        err = ase(fit.theta_hat, sim.theta_truth);
      } else {
        BandwidthSelection sel = select_bandwidth_vc(sim.vcdata, family, divergence,
                                                     sc.criterion, sc.fit, sc.grid, 1);
        VCFitResult fit = fit_vc_observations(sim.vcdata, family,
                                              sc.fit.with_bandwidth(sel.selected_h), false);
        hsel = sel.selected_h;
        err = ase(fit.theta_hat, sim.theta_truth);
      }
      if (std::isfinite(err)) slots[r] = {true, hsel, err};
    } catch (const std::exception&) {
      // failed replication; recorded below
    }
  });

  ReplicateSummary out;
  out.design = design;
  out.reps = reps;
  if (!vc) {
    ModelSpec spec = asymptotic_spec(design.model, design.n);
    out.h_ampec = h_ampec(spec, divergence);
    out.h_amise = h_amise(spec);
  } else {
    out.h_ampec = std::numeric_limits<double>::quiet_NaN();
    out.h_amise = std::numeric_limits<double>::quiet_NaN();
  }
  for (int r = 0; r < reps; ++r) {
    if (!slots[r].ok) continue;
    out.rep_index.push_back(r);
    out.selected_h.push_back(slots[r].h);
    out.ase_values.push_back(slots[r].err);
    if (!vc) {
      out.rel_err_ampec.push_back((slots[r].h - out.h_ampec) / out.h_ampec);
      out.rel_err_amise.push_back((slots[r].h - out.h_amise) / out.h_amise);
    }
  }
  const int k = static_cast<int>(out.rep_index.size());
  out.failures = reps - k;
  if (k == 0) throw std::runtime_error("replicate: every replication failed");
  std::vector<int> by_ase(k);
  std::iota(by_ase.begin(), by_ase.end(), 0);
  std::stable_sort(by_ase.begin(), by_ase.end(),
                   [&](int a, int b) { return out.ase_values[a] < out.ase_values[b]; });
  out.idx25 = by_ase[quantile_position(k, 0.25)];
  out.idx50 = by_ase[quantile_position(k, 0.50)];
  out.idx75 = by_ase[quantile_position(k, 0.75)];
  return out;
}

std::vector<Table1Row> table1_rows(int n) {
  // published reference values, same row order as the design table
  static const double kPublished[6][2] = {{0.070, 0.079}, {0.089, 0.099}, {0.127, 0.136},
                                      {0.106, 0.108}, {0.151, 0.146}, {0.184, 0.188}};
  const SimModel models[6] = {SimModel::uni_poisson_1,   SimModel::uni_poisson_2,
                              SimModel::uni_poisson_3,   SimModel::uni_bernoulli_1,
                              SimModel::uni_bernoulli_2, SimModel::uni_bernoulli_3};
  std::vector<Table1Row> rows;
  rows.reserve(6);
  for (int i = 0; i < 6; ++i) {
    ModelSpec spec = asymptotic_spec(models[i], n);
    Table1Row row;
    row.family = spec.family.name();
    row.example = i % 3 + 1;
    row.h_ampec = h_ampec(spec, BregmanDivergence::deviance(spec.family));
    row.h_amise = h_amise(spec);
    row.published_h_ampec = kPublished[i][0];
    row.published_h_amise = kPublished[i][1];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bregsmooth
