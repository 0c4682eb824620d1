#pragma once

#include <cstdint>
#include <vector>

#include "tptomo/calibration.hpp"
#include "tptomo/fock.hpp"
#include "tptomo/povm.hpp"

namespace tptomo {

enum class DriftProfile { Linear, Sinusoidal, Step };

DriftProfile drift_profile_from_string(const std::string& name);

/// Full description of a synthetic experiment.
struct ExperimentPlan {
    SchemeParams params;
    PovmModel model = PovmModel::ImperfectOverlap;
    PhotonDistribution true_state;
    std::vector<ProbeSetting> settings;
    std::int64_t pulses_per_setting = 1000000;
    std::vector<double> eta_multipliers;  // empty = no drift
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<double> per_setting_eta() const;  // eta scaled by the drift profile
};

/// Binomial no-click counts for every setting, plus blocked-probe and
/// signal-only counts from their closed-form probabilities. Per-setting RNG
/// substreams make the output independent of scheduling.
std::vector<ClickRecord> simulate_clicks(const ExperimentPlan& plan,
                                         Execution exec = Execution::Parallel);

struct ThermalSample {
    std::vector<double> intensities;
    double g2 = 0.0;  // <I^2>/<I>^2
};

/// Exponentially distributed intensities (rotating speckle disk model) with
/// their empirical second-order correlation.
ThermalSample simulate_thermal_intensities(double mean, int samples, std::uint64_t seed);

/// Returns a copy of the plan with per-setting efficiency multipliers
/// following the profile; peak-to-peak relative change equals magnitude.
ExperimentPlan inject_drift(const ExperimentPlan& plan, DriftProfile profile, double magnitude);

/// Seeded substream mixer shared by simulator and bootstrap.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace tptomo
