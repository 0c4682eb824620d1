#include "tptomo/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "tptomo/errors.hpp"
#include "tptomo/simulator.hpp"

namespace tptomo {

namespace {

constexpr double kZeroThreshold = 1e-12;

Eigen::VectorXd weighted_gradient(const Eigen::MatrixXd& aw, const Eigen::VectorXd& bw,
                                  const Eigen::VectorXd& x) {
    return aw.transpose() * (bw - aw * x);
}

}  // namespace

double nnls_kkt_violation(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                          const Eigen::VectorXd& weights, const Eigen::VectorXd& x) {
    const Eigen::VectorXd sw = weights.array().sqrt();
    const Eigen::MatrixXd aw = sw.asDiagonal() * a;
    const Eigen::VectorXd bw = sw.asDiagonal() * b;
    const Eigen::VectorXd g = weighted_gradient(aw, bw, x);
    double viol = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (x(i) > kZeroThreshold)
            viol = std::max(viol, std::abs(g(i)));
        else
            viol = std::max(viol, g(i));  // pushing into the feasible region must not pay off
    }
    return viol;
}

NnlsSolution nnls_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                        const Eigen::VectorXd& weights, double kkt_tol, int max_outer) {
    const Eigen::Index rows = a.rows();
    const Eigen::Index cols = a.cols();
    if (rows == 0 || cols == 0) throw SolverError("nnls_solve: empty system");
    if (b.size() != rows || weights.size() != rows)
        throw SolverError("nnls_solve: dimension mismatch");
    for (Eigen::Index j = 0; j < rows; ++j)
        if (!(weights(j) > 0.0)) throw SolverError("nnls_solve: nonpositive weight");
    if (max_outer < 0) max_outer = 10 * static_cast<int>(cols);

    const Eigen::VectorXd sw = weights.array().sqrt();
    const Eigen::MatrixXd aw = sw.asDiagonal() * a;
    const Eigen::VectorXd bw = sw.asDiagonal() * b;

    Eigen::VectorXd x = Eigen::VectorXd::Zero(cols);
    std::vector<bool> passive(cols, false);
    Eigen::VectorXd grad = weighted_gradient(aw, bw, x);

    auto solve_passive = [&](const std::vector<int>& idx) {
        Eigen::MatrixXd sub(rows, idx.size());
        for (std::size_t c = 0; c < idx.size(); ++c) sub.col(c) = aw.col(idx[c]);
        return Eigen::VectorXd(sub.colPivHouseholderQr().solve(bw));
    };

    NnlsSolution sol;
    int outer = 0;
    while (true) {
        // pick the most violated inactive coordinate
        int best = -1;
        double best_grad = kkt_tol;
        for (Eigen::Index i = 0; i < cols; ++i)
            if (!passive[i] && grad(i) > best_grad) {
                best_grad = grad(i);
                best = static_cast<int>(i);
            }
        if (best < 0) break;  // KKT satisfied
        if (++outer > max_outer) {
            sol.x = x;
            sol.outer_iterations = outer;
            throw SolverError("nnls_solve: iteration cap reached, KKT violation " +
                              std::to_string(nnls_kkt_violation(a, b, weights, x)));
        }
        passive[best] = true;

        for (int guard = 0; guard < 3 * static_cast<int>(cols) + 10; ++guard) {
            std::vector<int> idx;
            for (Eigen::Index i = 0; i < cols; ++i)
                if (passive[i]) idx.push_back(static_cast<int>(i));
            const Eigen::VectorXd z = solve_passive(idx);

            double min_z = 0.0;
            for (Eigen::Index c = 0; c < z.size(); ++c) min_z = std::min(min_z, z(c));
            if (min_z > 0.0) {
                x.setZero();
                for (std::size_t c = 0; c < idx.size(); ++c) x(idx[c]) = z(c);
                break;
            }
            // step toward z until the first coordinate hits zero
            double alpha = 1.0;
            for (std::size_t c = 0; c < idx.size(); ++c)
                if (z(c) <= 0.0) {
                    const double xi = x(idx[c]);
                    alpha = std::min(alpha, xi / (xi - z(c)));
                }
            for (std::size_t c = 0; c < idx.size(); ++c) {
                const int i = idx[c];
                x(i) += alpha * (z(c) - x(i));
                if (x(i) <= kZeroThreshold) {
                    x(i) = 0.0;
                    passive[i] = false;
                }
            }
        }
        grad = weighted_gradient(aw, bw, x);
    }

    sol.x = x;
    sol.outer_iterations = outer;
    sol.gradient = grad;
    sol.residual_norm = (bw - aw * x).norm();
    return sol;
}

namespace {

struct Problem {
    PovmMatrix povm;
    std::vector<ClickRecord> records;  // ordered to match povm rows
    std::optional<std::vector<double>> etas;
    std::vector<std::string> diagnostics;
};

Problem build_problem(const std::vector<ClickRecord>& records,
                      const std::vector<ProbeSetting>& settings, const SchemeParams& params,
                      PovmModel model, const ReconstructOptions& options) {
    params.validate();
    if (records.empty()) throw DataError("reconstruct: no click records");
    for (const auto& r : records) r.validate();

    std::unordered_map<int, ProbeSetting> by_id;
    for (const auto& s : settings) by_id[s.id] = s;

    Problem prob;
    prob.records = records;
    std::sort(prob.records.begin(), prob.records.end(),
              [](const ClickRecord& a, const ClickRecord& b) { return a.setting_id < b.setting_id; });

    std::vector<ProbeSetting> ordered;
    ordered.reserve(prob.records.size());
    for (const auto& r : prob.records) {
        const auto it = by_id.find(r.setting_id);
        if (it == by_id.end())
            throw DataError("reconstruct: no probe setting for record id " +
                            std::to_string(r.setting_id));
        ordered.push_back(it->second);
    }

    if (static_cast<int>(ordered.size()) < params.signal_cutoff + 1)
        prob.diagnostics.push_back("fewer settings than components: system is underdetermined");

    if (options.drift_correction) {
        if (!options.reference_state)
            throw ConfigError("drift correction requested without a reference state");
        // The analytic detector model has no splitter in the signal path, so
        // the signal-only inversion must not attenuate by the transmissivity.
        SchemeParams drift_params = params;
        if (model == PovmModel::Simple) drift_params.transmissivity = 1.0;
        const DriftSeries series = drift_series(drift_params, *options.reference_state,
                                                prob.records, options.smoothing_window);
        prob.etas = series.etas();
        int low_conf = 0;
        for (const auto& e : series.estimates) low_conf += e.low_confidence ? 1 : 0;
        if (low_conf > 0)
            prob.diagnostics.push_back(std::to_string(low_conf) +
                                       " drift estimates from <1000 pulses (low confidence)");
    }

    prob.povm = design_matrix(model, params, ordered, prob.etas);
    for (const auto& w : prob.povm.warnings) prob.diagnostics.push_back(w);
    return prob;
}

// b_j = c_j / M_j with inverse-binomial-variance weights. Degenerate all- or
// no-click rows get the variance of a count shrunk into the open interval,
// which bounds their weight at M(M+2).
void targets_and_weights(const std::vector<ClickRecord>& records, bool uniform,
                         Eigen::VectorXd& b, Eigen::VectorXd& w,
                         std::vector<std::string>* diagnostics) {
    const int num = static_cast<int>(records.size());
    b.resize(num);
    w.resize(num);
    for (int j = 0; j < num; ++j) {
        const double pulses = static_cast<double>(records[j].pulses);
        const double p_hat = static_cast<double>(records[j].no_clicks) / pulses;
        b(j) = p_hat;
        if (uniform) {
            w(j) = 1.0;
            continue;
        }
        const double lo = std::max(1e-9, 1.0 / (pulses + 2.0));
        const double p_w = std::clamp(p_hat, lo, 1.0 - lo);
        w(j) = pulses / (p_w * (1.0 - p_w));
        if (diagnostics && (records[j].no_clicks == 0 || records[j].no_clicks == records[j].pulses))
            diagnostics->push_back("setting " + std::to_string(records[j].setting_id) +
                                   ": degenerate count, weight bounded");
    }
}

}  // namespace

ReconstructionResult reconstruct(const std::vector<ClickRecord>& records,
                                 const std::vector<ProbeSetting>& settings,
                                 const SchemeParams& params, PovmModel model,
                                 const ReconstructOptions& options) {
    Problem prob = build_problem(records, settings, params, model, options);

    Eigen::VectorXd b, w;
    targets_and_weights(prob.records, options.uniform_weights, b, w, &prob.diagnostics);

    const NnlsSolution sol = nnls_solve(prob.povm.elements, b, w, options.kkt_tol);

    ReconstructionResult result;
    result.pre_normalization_total = sol.x.sum();
    if (result.pre_normalization_total <= 0.0)
        throw SolverError("reconstruct: solver returned an all-zero distribution");

    std::vector<double> probs(sol.x.data(), sol.x.data() + sol.x.size());
    result.estimate = PhotonDistribution(std::move(probs));
    result.estimate.normalize();
    result.residual_norm = sol.residual_norm;
    result.weighted = !options.uniform_weights;
    result.per_setting_eta_used = prob.etas;
    result.condition_number = conditioning_report(prob.povm).condition_number;
    const Eigen::VectorXd fitted = prob.povm.elements * sol.x;
    result.fitted_probabilities.assign(fitted.data(), fitted.data() + fitted.size());
    result.diagnostics = std::move(prob.diagnostics);
    return result;
}

BootstrapResult bootstrap(const std::vector<ClickRecord>& records,
                          const std::vector<ProbeSetting>& settings, const SchemeParams& params,
                          PovmModel model, const ReconstructOptions& options, int num_replicates,
                          std::uint64_t seed, Execution exec) {
    if (num_replicates < 2) throw ConfigError("bootstrap: need at least 2 replicates");

    // Signal-only counts are not resampled, so the (possibly drift-corrected)
    // design matrix is shared across replicates.
    const Problem prob = build_problem(records, settings, params, model, options);
    const int num = static_cast<int>(prob.records.size());
    const int cols = static_cast<int>(prob.povm.elements.cols());

    std::vector<double> p_hats(num);
    for (int j = 0; j < num; ++j)
        p_hats[j] = static_cast<double>(prob.records[j].no_clicks) /
                    static_cast<double>(prob.records[j].pulses);

    Eigen::MatrixXd reps(num_replicates, cols);
    std::vector<char> ok(num_replicates, 0);

    auto run_replicate = [&](int r) {
        std::mt19937_64 rng(mix_seed(seed, 0xb0075ULL + static_cast<std::uint64_t>(r)));
        std::vector<ClickRecord> resampled = prob.records;
        for (int j = 0; j < num; ++j)
            resampled[j].no_clicks =
                std::binomial_distribution<std::int64_t>(prob.records[j].pulses, p_hats[j])(rng);
        Eigen::VectorXd b, w;
        targets_and_weights(resampled, options.uniform_weights, b, w, nullptr);
        try {
            const NnlsSolution sol = nnls_solve(prob.povm.elements, b, w, options.kkt_tol);
            const double total = sol.x.sum();
            if (total <= 0.0) return;
            reps.row(r) = sol.x.transpose() / total;
            ok[r] = 1;
        } catch (const SolverError&) {
            // counted below
        }
    };

    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < num_replicates; ++r) run_replicate(r);
    } else {
        for (int r = 0; r < num_replicates; ++r) run_replicate(r);
    }

    BootstrapResult result;
    int kept = 0;
    for (int r = 0; r < num_replicates; ++r) kept += ok[r];
    result.failures = num_replicates - kept;
    if (result.failures * 10 > num_replicates)
        throw SolverError("bootstrap: more than 10% of replicates failed");

    result.replicates.resize(kept, cols);
    int row = 0;
    for (int r = 0; r < num_replicates; ++r)
        if (ok[r]) result.replicates.row(row++) = reps.row(r);

    result.mean = result.replicates.colwise().mean();
    Eigen::MatrixXd centered = result.replicates.rowwise() - result.mean.transpose();
    result.std_dev = (centered.array().square().colwise().sum() / (kept - 1)).sqrt();
    return result;
}

}  // namespace tptomo
