#include "tptomo/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "tptomo/errors.hpp"

namespace tptomo {

void ClickRecord::validate() const {
    auto check = [this](std::int64_t clicks, std::int64_t total, const char* what) {
        if (total <= 0)
            throw DataError("setting " + std::to_string(setting_id) + ": " + what +
                            " pulses must be positive");
        if (clicks < 0 || clicks > total)
            throw DataError("setting " + std::to_string(setting_id) + ": " + what +
                            " no-click count outside [0, pulses]");
    };
    check(no_clicks, pulses, "measurement");
    if (blocked_no_clicks) check(*blocked_no_clicks, blocked_pulses.value_or(pulses), "blocked");
    if (signal_only_no_clicks)
        check(*signal_only_no_clicks, signal_only_pulses.value_or(pulses), "signal-only");
}

double probe_mean_from_blocked(const SchemeParams& params, std::int64_t blocked_no_clicks,
                               std::int64_t pulses) {
    params.validate();
    const double reflect_eta = (1.0 - params.transmissivity) * params.eta;
    if (reflect_eta <= 0.0)
        throw ConfigError("probe_mean_from_blocked: (1-T)*eta must be positive");
    if (pulses <= 0) throw DataError("probe_mean_from_blocked: pulses must be positive");
    if (blocked_no_clicks == 0)
        throw DataError("probe_mean_from_blocked: zero blocked no-clicks, probe too bright");
    if (blocked_no_clicks > pulses)
        throw DataError("probe_mean_from_blocked: no-click count exceeds pulses");
    if (blocked_no_clicks == pulses) return 0.0;
    return (static_cast<double>(pulses) / static_cast<double>(blocked_no_clicks) - 1.0) /
           reflect_eta;
}

double efficiency_from_reference(const SchemeParams& params, const PhotonDistribution& rho_ref,
                                 double p_signal_hat) {
    params.validate();
    if (!rho_ref.is_normalized(1e-6))
        throw DataError("efficiency_from_reference: reference state not normalized");
    if (!(p_signal_hat > 0.0 && p_signal_hat <= 1.0))
        throw DataError("efficiency_from_reference: probability outside (0,1]");
    if (rho_ref.probs[0] >= 1.0 - 1e-12)
        throw DataError("efficiency_from_reference: vacuum reference carries no efficiency information");

    const double t = params.transmissivity;
    auto p_of = [&](double eta) {
        SchemeParams p = params;
        p.eta = eta;
        return signal_only_prob(p, rho_ref);
    };

    const double eta_max = 1.0 / t;  // where 1 - T eta reaches 0
    const double floor = p_of(eta_max);
    if (p_signal_hat < floor - 1e-12)
        throw DataError("efficiency_from_reference: probability below the eta = 1/T floor");
    if (p_signal_hat >= 1.0) return 0.0;

    double lo = 0.0, hi = eta_max;
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (p_of(mid) > p_signal_hat)
            lo = mid;  // too little loss, increase eta
        else
            hi = mid;
    }
    const double eta = 0.5 * (lo + hi);
    return std::min(eta, 1.0);  // physical clamp; callers see the warning via drift_series
}

std::vector<double> DriftSeries::etas() const {
    std::vector<double> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back(e.eta);
    return out;
}

DriftSeries drift_series(const SchemeParams& params, const PhotonDistribution& rho_ref,
                         const std::vector<ClickRecord>& records, int smoothing_window) {
    if (smoothing_window < 1) throw ConfigError("drift_series: smoothing window must be >= 1");
    DriftSeries series;
    series.raw_eta.reserve(records.size());
    std::vector<bool> low_conf(records.size(), false);

    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.signal_only_no_clicks)
            throw DataError("setting " + std::to_string(rec.setting_id) +
                            ": signal-only counts required for drift correction");
        const std::int64_t pulses = rec.signal_only_pulses.value_or(rec.pulses);
        const double p_hat =
            static_cast<double>(*rec.signal_only_no_clicks) / static_cast<double>(pulses);
        try {
            series.raw_eta.push_back(efficiency_from_reference(params, rho_ref, p_hat));
        } catch (const DataError& err) {
            throw DataError("setting " + std::to_string(rec.setting_id) + ": " + err.what());
        }
        low_conf[i] = pulses < 1000;
    }

    const int half = smoothing_window / 2;
    const int n = static_cast<int>(records.size());
    series.estimates.reserve(records.size());
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - half);
        const int hi = std::min(n - 1, i + half);
        double acc = 0.0;
        for (int k = lo; k <= hi; ++k) acc += series.raw_eta[k];
        series.estimates.push_back(
            {records[i].setting_id, acc / static_cast<double>(hi - lo + 1), low_conf[i]});
    }
    return series;
}

}  // namespace tptomo
