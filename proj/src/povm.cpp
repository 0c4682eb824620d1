#include "tptomo/povm.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tptomo/errors.hpp"

namespace tptomo {

const char* to_string(PovmModel model) {
    switch (model) {
        case PovmModel::Simple: return "simple";
        case PovmModel::PerfectOverlap: return "perfect";
        case PovmModel::ImperfectOverlap: return "overlap";
    }
    return "?";
}

PovmModel povm_model_from_string(const std::string& name) {
    if (name == "simple") return PovmModel::Simple;
    if (name == "perfect") return PovmModel::PerfectOverlap;
    if (name == "overlap") return PovmModel::ImperfectOverlap;
    throw ConfigError("unknown POVM model '" + name + "' (expected simple|perfect|overlap)");
}

void SchemeParams::validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("SchemeParams: eta outside (0,1]");
    if (!(transmissivity > 0.0 && transmissivity <= 1.0))
        throw ConfigError("SchemeParams: transmissivity outside (0,1]");
    if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("SchemeParams: overlap outside [0,1]");
    if (signal_cutoff < 0) throw ConfigError("SchemeParams: negative signal cutoff");
    if (!(tail_tol > 0.0 && tail_tol <= 1e-3))
        throw ConfigError("SchemeParams: tail_tol outside (0, 1e-3]");
}

namespace {

void check_settings(const std::vector<ProbeSetting>& settings) {
    if (settings.empty()) throw ConfigError("no probe settings given");
    std::map<int, int> seen;
    for (const auto& s : settings) {
        if (s.mean < 0.0) throw ConfigError("probe setting with negative mean");
        if (++seen[s.id] > 1) throw ConfigError("duplicate probe setting id " + std::to_string(s.id));
    }
}

std::vector<double> resolve_etas(const SchemeParams& params, std::size_t count,
                                 const std::optional<std::vector<double>>& per_setting_eta) {
    if (!per_setting_eta) return std::vector<double>(count, params.eta);
    if (per_setting_eta->size() != count)
        throw ConfigError("per_setting_eta length does not match number of settings");
    for (double e : *per_setting_eta)
        if (!(e > 0.0 && e <= 1.0)) throw ConfigError("per-setting eta outside (0,1]");
    return *per_setting_eta;
}

// Squared beam-splitter amplitudes |U^{k,s-k}_{m,s-m}|^2 for the signal
// columns m <= n_sig only. For small m the Kronecker deltas leave at most
// m+1 terms per element, so the table costs O(max_total^2 * n_sig) instead
// of the O(max_total^4) of the full rank-4 operator.
class SignalColumnTable {
public:
    SignalColumnTable(double transmissivity, int max_total, int n_sig)
        : max_total_(max_total), n_sig_(n_sig) {
        const double t = std::sqrt(transmissivity);
        const double r = std::sqrt(1.0 - transmissivity);
        const double logt = t > 0.0 ? std::log(t) : 0.0;
        const double logr = r > 0.0 ? std::log(r) : 0.0;
        std::vector<double> lf(2 * max_total + 2);
        for (std::size_t i = 0; i < lf.size(); ++i) lf[i] = std::lgamma(i + 1.0);

        offsets_.resize(max_total + 1);
        std::size_t total = 0;
        for (int s = 0; s <= max_total; ++s) {
            offsets_[s] = total;
            total += static_cast<std::size_t>(s + 1) * (n_sig + 1);
        }
        amp2_.assign(total, 0.0);

        for (int s = 0; s <= max_total; ++s)
            for (int k = 0; k <= s; ++k) {
                const int l = s - k;
                for (int m = 0; m <= std::min(n_sig, s); ++m) {
                    const int n = s - m;
                    const double pref = 0.5 * (lf[k] + lf[l] + lf[m] + lf[n]);
                    double acc = 0.0;
                    for (int g = std::max(0, m - l); g <= std::min(k, m); ++g) {
                        const int h = l + g - m;
                        const int tp = g + h;
                        const int rp = k + l - g - h;
                        if (t == 0.0 && tp > 0) continue;
                        if (r == 0.0 && rp > 0) continue;
                        const double logmag = pref + tp * logt + rp * logr - lf[g] - lf[h] -
                                              lf[k - g] - lf[l - h];
                        const double sign = ((k - g) % 2 == 0) ? 1.0 : -1.0;
                        acc += sign * std::exp(logmag);
                    }
                    amp2_[offsets_[s] + static_cast<std::size_t>(k) * (n_sig_ + 1) + m] =
                        acc * acc;
                }
            }
    }

    double amp2(int s, int k, int m) const {
        return amp2_[offsets_[s] + static_cast<std::size_t>(k) * (n_sig_ + 1) + m];
    }

private:
    int max_total_;
    int n_sig_;
    std::vector<std::size_t> offsets_;
    std::vector<double> amp2_;
};

// No-click row for one setting of the beam-splitter model with perfect
// overlap at probe mean `probe_mean`, written into row[0..N].
void bs_perfect_row(double probe_mean, double eta, const SchemeParams& params,
                    const SignalColumnTable& table, int probe_cutoff, double* row) {
    const int n_sig = params.signal_cutoff;
    if (probe_mean == 0.0) {
        // vacuum probe: closed form (1 - T eta)^m, no 0/0 prefactor games
        const double base = 1.0 - params.transmissivity * eta;
        double v = 1.0;
        for (int m = 0; m <= n_sig; ++m) {
            row[m] = v;
            v *= base;
        }
        return;
    }
    const ThermalDiagonal sigma = thermal_diagonal(probe_mean, probe_cutoff);
    const double loss = 1.0 - eta;
    std::vector<double> loss_pow(n_sig + probe_cutoff + 1);
    loss_pow[0] = 1.0;
    for (std::size_t k = 1; k < loss_pow.size(); ++k) loss_pow[k] = loss_pow[k - 1] * loss;
    for (int m = 0; m <= n_sig; ++m) {
        double acc = 0.0;
        for (int n = 0; n <= probe_cutoff; ++n) {
            const int s = m + n;
            double inner = 0.0;
            for (int k = 0; k <= s; ++k) inner += loss_pow[k] * table.amp2(s, k, m);
            acc += sigma.probs[n] * inner;
        }
        row[m] = acc;
    }
}

int setting_probe_cutoff(const SchemeParams& params, double mean, std::vector<std::string>& warnings,
                         int setting_id) {
    if (params.probe_cutoff >= 0) {
        const ThermalDiagonal td = thermal_diagonal(mean, params.probe_cutoff);
        if (td.tail_mass() > params.tail_tol)
            warnings.push_back("setting " + std::to_string(setting_id) + ": probe tail mass " +
                               std::to_string(td.tail_mass()) + " exceeds tail_tol");
        return params.probe_cutoff;
    }
    return probe_cutoff_for(mean, params.tail_tol);
}

PovmMatrix build_bs(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                    const std::vector<double>& etas, bool imperfect, Execution exec) {
    const int n_sig = params.signal_cutoff;
    const int num = static_cast<int>(settings.size());

    PovmMatrix povm;
    povm.params = params;
    povm.settings = settings;
    povm.model = imperfect ? PovmModel::ImperfectOverlap : PovmModel::PerfectOverlap;
    povm.elements.resize(num, n_sig + 1);

    const double mu = imperfect ? params.overlap : 1.0;

    // Per-setting probe mean entering the Fock sum, its truncation, and the
    // overlap prefactor.
    std::vector<double> sum_means(num), prefactors(num, 1.0);
    std::vector<int> cutoffs(num, 0);
    int max_total = n_sig;
    for (int j = 0; j < num; ++j) {
        const double nj = settings[j].mean;
        double mean = nj;
        if (imperfect) {
            const double denom =
                1.0 + (1.0 - mu) * (1.0 - params.transmissivity) * etas[j] * nj;
            mean = mu * nj / denom;
            prefactors[j] = 1.0 / denom;  // nbar_j / (mu n_j), limit value 1 at mu n_j = 0
        }
        sum_means[j] = mean;
        cutoffs[j] = mean > 0.0 ? setting_probe_cutoff(params, mean, povm.warnings, settings[j].id) : 0;
        max_total = std::max(max_total, n_sig + cutoffs[j]);
    }

    const SignalColumnTable table(params.transmissivity, max_total, n_sig);

    auto fill_row = [&](int j) {
        std::vector<double> row(n_sig + 1);
        bs_perfect_row(sum_means[j], etas[j], params, table, cutoffs[j], row.data());
        for (int m = 0; m <= n_sig; ++m) povm.elements(j, m) = prefactors[j] * row[m];
    };

    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int j = 0; j < num; ++j) fill_row(j);
    } else {
        for (int j = 0; j < num; ++j) fill_row(j);
    }
    return povm;
}

PovmMatrix build_simple(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                        const std::vector<double>& etas, Execution exec) {
    const int n_sig = params.signal_cutoff;
    const int num = static_cast<int>(settings.size());

    PovmMatrix povm;
    povm.params = params;
    povm.settings = settings;
    povm.model = PovmModel::Simple;
    povm.elements.resize(num, n_sig + 1);

    auto fill_row = [&](int j) {
        const double y = 1.0 / (1.0 + etas[j] * settings[j].mean);
        const double base = 1.0 - y * etas[j];
        double v = y;
        for (int m = 0; m <= n_sig; ++m) {
            povm.elements(j, m) = v;
            v *= base;
        }
    };

    if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < num; ++j) fill_row(j);
    } else {
        for (int j = 0; j < num; ++j) fill_row(j);
    }
    return povm;
}

}  // namespace

PovmMatrix povm_simple(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                       Execution exec) {
    params.validate();
    check_settings(settings);
    return build_simple(params, settings, resolve_etas(params, settings.size(), std::nullopt), exec);
}

double signal_only_prob(const SchemeParams& params, const PhotonDistribution& rho) {
    const double base = 1.0 - params.transmissivity * params.eta;
    double p = 0.0;
    double v = 1.0;
    for (double rk : rho.probs) {
        p += v * rk;
        v *= base;
    }
    return p;
}

double effective_probe_mean(const SchemeParams& params, const ProbeSetting& setting) {
    params.validate();
    const double denom = 1.0 + (1.0 - params.overlap) * (1.0 - params.transmissivity) *
                                   params.eta * setting.mean;
    return params.overlap * setting.mean / denom;
}

PovmMatrix povm_bs_perfect(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                           Execution exec) {
    params.validate();
    check_settings(settings);
    return build_bs(params, settings, resolve_etas(params, settings.size(), std::nullopt), false,
                    exec);
}

PovmMatrix povm_bs_overlap(const SchemeParams& params, const std::vector<ProbeSetting>& settings,
                           Execution exec) {
    params.validate();
    check_settings(settings);
    return build_bs(params, settings, resolve_etas(params, settings.size(), std::nullopt), true,
                    exec);
}

PovmMatrix design_matrix(PovmModel model, const SchemeParams& params,
                         const std::vector<ProbeSetting>& settings,
                         const std::optional<std::vector<double>>& per_setting_eta,
                         Execution exec) {
    params.validate();
    check_settings(settings);
    const auto etas = resolve_etas(params, settings.size(), per_setting_eta);
    PovmMatrix povm = [&] {
        switch (model) {
            case PovmModel::Simple: return build_simple(params, settings, etas, exec);
            case PovmModel::PerfectOverlap: return build_bs(params, settings, etas, false, exec);
            case PovmModel::ImperfectOverlap: return build_bs(params, settings, etas, true, exec);
        }
        throw ConfigError("unknown POVM model");
    }();
    if (per_setting_eta) povm.per_setting_eta = per_setting_eta;
    return povm;
}

ConditioningReport conditioning_report(const PovmMatrix& povm) {
    ConditioningReport report;
    const auto& a = povm.elements;
    const int n_cols = static_cast<int>(a.cols());

    if (a.rows() < n_cols) {
        report.underdetermined = true;
        report.warnings.push_back("underdetermined: fewer settings than reconstructed components");
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    report.singular_values = svd.singularValues();
    const double smax = report.singular_values(0);
    const double smin = report.singular_values(report.singular_values.size() - 1);
    report.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

    const double rank_tol = smax * std::max<Eigen::Index>(a.rows(), a.cols()) * 1e-14;
    report.effective_rank = 0;
    for (Eigen::Index i = 0; i < report.singular_values.size(); ++i)
        if (report.singular_values(i) > rank_tol) ++report.effective_rank;

    for (std::size_t i = 0; i < povm.settings.size(); ++i)
        for (std::size_t j = i + 1; j < povm.settings.size(); ++j) {
            const double a_mean = povm.settings[i].mean, b_mean = povm.settings[j].mean;
            if (std::abs(a_mean - b_mean) <= 1e-12 * std::max(1.0, std::abs(a_mean))) {
                report.duplicates.emplace_back(povm.settings[i].id, povm.settings[j].id);
            }
        }
    if (!report.duplicates.empty())
        report.warnings.push_back("duplicate probe means present; design matrix may be rank deficient");
    return report;
}

}  // namespace tptomo
