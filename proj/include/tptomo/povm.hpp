#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "tptomo/fock.hpp"

namespace tptomo {

enum class PovmModel { Simple, PerfectOverlap, ImperfectOverlap };

const char* to_string(PovmModel model);
PovmModel povm_model_from_string(const std::string& name);

/// One thermal-probe configuration.
struct ProbeSetting {
    int id = 0;
    double mean = 0.0;  // mean photon number of the probe thermal state
};

/// Scheme calibration parameters shared by all measurement settings.
struct SchemeParams {
    double eta = 0.15;            // detector efficiency
    double transmissivity = 0.9;  // BS signal transmission
    double overlap = 1.0;         // mode overlap between signal and probe
    int signal_cutoff = 3;        // N: reconstruct rho_00..rho_NN
    int probe_cutoff = -1;        // probe truncation; -1 = auto per setting
    double tail_tol = 1e-9;       // admissible truncated probe tail mass

    void validate() const;  // throws ConfigError on out-of-range values
};

/// Serial path runs the same row kernels on one thread; kept as the
/// reference for the OpenMP path.
enum class Execution { Parallel, Serial };

/// J x (N+1) matrix of no-click POVM diagonal elements; the design matrix of
/// the linear inverse problem.
struct PovmMatrix {
    Eigen::MatrixXd elements;
    std::vector<ProbeSetting> settings;
    SchemeParams params;
    PovmModel model = PovmModel::Simple;
    std::optional<std::vector<double>> per_setting_eta;
    std::vector<std::string> warnings;

    int num_settings() const { return static_cast<int>(elements.rows()); }
};

/// Fully-overlapping probe without a beam splitter:
/// Pi_jm = y_j (1 - y_j eta)^m, y_j = 1/(1 + eta n_j).
PovmMatrix povm_simple(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                       Execution exec = Execution::Parallel);

/// No-click probability for the signal alone: sum_k (1 - T eta)^k rho_kk.
double signal_only_prob(const SchemeParams& params, const PhotonDistribution& rho);

/// Effective probe mean under imperfect overlap:
/// nbar_j = mu n_j / (1 + (1-mu)(1-T) eta n_j).
double effective_probe_mean(const SchemeParams& params, const ProbeSetting& setting);

/// Beam-splitter model with perfect overlap (mu treated as 1):
/// Pi_jm = sum_{n,k,l} (1-eta)^k sigma_nj |U^{kl}_{mn}|^2, k+l = m+n.
PovmMatrix povm_bs_perfect(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                           Execution exec = Execution::Parallel);

/// Beam-splitter model with imperfect overlap: the perfect-overlap sum taken
/// at the effective mean nbar_j and scaled by nbar_j/(mu n_j); the n_j = 0
/// and mu = 0 rows use the closed-form limits.
PovmMatrix povm_bs_overlap(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                           Execution exec = Execution::Parallel);

/// Dispatches to the model builder; when per_setting_eta is given, row j is
/// built with its own drift-corrected efficiency.
PovmMatrix design_matrix(PovmModel model, const SchemeParams& params,
                         const std::vector<ProbeSetting>& settings,
                         const std::optional<std::vector<double>>& per_setting_eta = std::nullopt,
                         Execution exec = Execution::Parallel);

struct ConditioningReport {
    Eigen::VectorXd singular_values;
    double condition_number = 0.0;
    int effective_rank = 0;
    bool underdetermined = false;                 // J < N+1
    std::vector<std::pair<int, int>> duplicates;  // setting index pairs with equal probe mean
    std::vector<std::string> warnings;
};

ConditioningReport conditioning_report(const PovmMatrix& povm);

}  // namespace tptomo
