#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bregsmooth/asymptotic.hpp"
#include "bregsmooth/dataset.hpp"
#include "bregsmooth/family.hpp"
#include "bregsmooth/locfit.hpp"
#include "bregsmooth/loocv.hpp"

namespace bregsmooth {

// The ten study designs.  Univariate models draw X uniform on (0,1);
// varying-coefficient models draw U uniform on (0,1) with X1 = 1 and
// normal X2 (and X3: correlation 1/sqrt(2) for poisson, independent for
// bernoulli).
enum class SimModel {
  uni_poisson_1,
  uni_poisson_2,
  uni_poisson_3,
  uni_bernoulli_1,
  uni_bernoulli_2,
  uni_bernoulli_3,
  vc_poisson_1,
  vc_poisson_2,
  vc_bernoulli_1,
  vc_bernoulli_2,
};

SimModel parse_sim_model(std::string_view token);
const char* sim_model_name(SimModel model);
bool is_vc_model(SimModel model);
FamilyKind sim_family(SimModel model);
int sim_dimension(SimModel model);  // 1 for univariate, d otherwise

struct SimDesign {
  SimModel model = SimModel::uni_poisson_1;
  int n = 400;
  std::uint64_t seed = 0;

  void validate() const;  // n >= 50
};

// truth functions, verbatim from the study table
double sim_theta(SimModel model, double x);
double sim_theta_second(SimModel model, double x);
double sim_coefficient(SimModel model, int k, double u);  // k in [0, d)
double sim_theta_vc(SimModel model, double u, const Eigen::VectorXd& x);

struct SimData {
  bool vc = false;
  Dataset data;                     // univariate designs
  VCDataset vcdata;                 // varying-coefficient designs
  std::vector<double> theta_truth;  // canonical parameter at the sorted rows

  int n() const { return vc ? vcdata.n() : data.n(); }
};

// deterministic: covariates then response, row by row, from the
// counter-based generator on (seed, stream); one stream per replication
SimData generate(const SimDesign& design, std::uint64_t stream = 0);

// mean squared error on the canonical scale
double ase(const std::vector<double>& theta_hat, const std::vector<double>& theta_truth);

// the settings the study prescribes: local-linear, Epanechnikov, deviance
// loss; poisson searches [3 h0, L/2] with the df-based criterion and
// newton, bernoulli uses the hybrid criterion with the lower-bound solver
// and its own grid floor (5 h0 for the bump design, 0.1 otherwise)
struct StudyConfig {
  LocalFitConfig fit;
  Criterion criterion = Criterion::ecv;
  GridSpec grid;
};
StudyConfig study_config(SimModel model);

// closed-form bandwidth targets for the univariate designs
ModelSpec asymptotic_spec(SimModel model, int n);

struct ReplicateSummary {
  SimDesign design;
  int reps = 0;
  int failures = 0;
  std::vector<int> rep_index;    // surviving replications, ascending
  std::vector<double> selected_h;
  std::vector<double> ase_values;
  std::vector<double> rel_err_ampec;  // (h - h_ampec) / h_ampec; univariate only
  std::vector<double> rel_err_amise;
  double h_ampec = 0.0;  // NaN for vc designs
  double h_amise = 0.0;
  // positions into the surviving arrays whose ASE sits at the quartiles
  int idx25 = 0;
  int idx50 = 0;
  int idx75 = 0;
};

ReplicateSummary replicate(const SimDesign& design, int reps, int threads = 1);
ReplicateSummary replicate(const SimDesign& design, int reps, const StudyConfig& config,
                           int threads);

struct Table1Row {
  std::string family;
  int example = 0;
  double h_ampec = 0.0;
  double h_amise = 0.0;
  double published_h_ampec = 0.0;
  double published_h_amise = 0.0;
};

// the six univariate designs against the published values
std::vector<Table1Row> table1_rows(int n = 400);

}  // namespace bregsmooth
