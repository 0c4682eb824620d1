#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tptomo/fock.hpp"
#include "tptomo/povm.hpp"

namespace tptomo {

/// Raw counts for one probe setting.
struct ClickRecord {
    int setting_id = 0;
    std::int64_t pulses = 0;
    std::int64_t no_clicks = 0;
    std::optional<std::int64_t> blocked_no_clicks;  // probe only, signal blocked
    std::optional<std::int64_t> blocked_pulses;
    std::optional<std::int64_t> signal_only_no_clicks;  // signal only, probe blocked
    std::optional<std::int64_t> signal_only_pulses;

    void validate() const;  // throws DataError on count/pulse inconsistencies
};

/// Probe mean from blocked-signal counts, inverting
/// p_term = 1/(1 + (1-T) eta n_j).
double probe_mean_from_blocked(const SchemeParams& params, std::int64_t blocked_no_clicks,
                               std::int64_t pulses);

/// Detector efficiency from a known reference state and its measured
/// signal-only no-click probability; bisection on the strictly decreasing
/// map eta -> sum_k (1 - T eta)^k rho_kk.
double efficiency_from_reference(const SchemeParams& params, const PhotonDistribution& rho_ref,
                                 double p_signal_hat);

struct DriftEstimate {
    int setting_id = 0;
    double eta = 0.0;
    bool low_confidence = false;  // fewer than 1e3 signal-only pulses
};

struct DriftSeries {
    std::vector<DriftEstimate> estimates;  // smoothed, one per record
    std::vector<double> raw_eta;           // before smoothing

    std::vector<double> etas() const;
};

/// Per-setting efficiencies from signal-only counts, smoothed with a centered
/// moving average (window 1 = no smoothing).
DriftSeries drift_series(const SchemeParams& params, const PhotonDistribution& rho_ref,
                         const std::vector<ClickRecord>& records, int smoothing_window = 5);

}  // namespace tptomo
