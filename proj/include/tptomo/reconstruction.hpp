#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tptomo/calibration.hpp"
#include "tptomo/fock.hpp"
#include "tptomo/povm.hpp"

namespace tptomo {

struct NnlsSolution {
    Eigen::VectorXd x;
    double residual_norm = 0.0;  // weighted ||Ax - b||
    int outer_iterations = 0;
    Eigen::VectorXd gradient;  // weighted A^T (b - Ax) at the solution
};

/// Weighted nonnegative least squares, argmin ||diag(sqrt(w))(Ax - b)||^2
/// s.t. x >= 0, by the Lawson-Hanson active-set method. Terminates on an
/// exact KKT certificate: active coordinates have gradient <= tol, free ones
/// |gradient| <= tol.
NnlsSolution nnls_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& weights, double kkt_tol = 1e-10,
                        int max_outer = -1);

/// Max KKT violation of x for the weighted problem; the solver's certificate,
/// assertable by callers.
double nnls_kkt_violation(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& weights, const Eigen::VectorXd& x);

struct ReconstructOptions {
    bool drift_correction = false;
    std::optional<PhotonDistribution> reference_state;  // required for drift correction
    int smoothing_window = 5;
    bool uniform_weights = false;
    double kkt_tol = 1e-10;
};

struct ReconstructionResult {
    PhotonDistribution estimate;
    double residual_norm = 0.0;
    double pre_normalization_total = 0.0;  // model-fit indicator
    bool weighted = true;
    double condition_number = 0.0;
    std::optional<std::vector<double>> per_setting_eta_used;
    std::optional<Eigen::VectorXd> bootstrap_mean;
    std::optional<Eigen::VectorXd> bootstrap_std;
    std::vector<double> fitted_probabilities;  // model p_j at the estimate
    std::vector<std::string> diagnostics;
};

ReconstructionResult reconstruct(const std::vector<ClickRecord>& records,
                                 const std::vector<ProbeSetting>& settings,
                                 const SchemeParams& params, PovmModel model,
                                 const ReconstructOptions& options = {});

struct BootstrapResult {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev;
    Eigen::MatrixXd replicates;  // B x (N+1), failed replicates dropped
    int failures = 0;
};

/// Parametric bootstrap: resample no_clicks ~ Binomial(M_j, c_j/M_j) per
/// setting and refit. Replicates run on independent RNG substreams.
BootstrapResult bootstrap(const std::vector<ClickRecord>& records,
                          const std::vector<ProbeSetting>& settings, const SchemeParams& params,
                          PovmModel model, const ReconstructOptions& options, int num_replicates,
                          std::uint64_t seed, Execution exec = Execution::Parallel);

}  // namespace tptomo
