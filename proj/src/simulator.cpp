#include "tptomo/simulator.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "tptomo/errors.hpp"

namespace tptomo {

DriftProfile drift_profile_from_string(const std::string& name) {
    if (name == "linear") return DriftProfile::Linear;
    if (name == "sinusoidal") return DriftProfile::Sinusoidal;
    if (name == "step") return DriftProfile::Step;
    throw ConfigError("unknown drift profile '" + name + "' (expected linear|sinusoidal|step)");
}

void ExperimentPlan::validate() const {
    params.validate();
    if (pulses_per_setting <= 0) throw ConfigError("ExperimentPlan: pulses_per_setting must be > 0");
    if (settings.empty()) throw ConfigError("ExperimentPlan: no probe settings");
    if (!true_state.is_normalized(1e-9))
        throw ConfigError("ExperimentPlan: true state is not a normalized distribution");
    if (!eta_multipliers.empty() && eta_multipliers.size() != settings.size())
        throw ConfigError("ExperimentPlan: drift multiplier count does not match settings");
    for (double m : eta_multipliers)
        if (!(m > 0.0 && m * params.eta <= 1.0))
            throw ConfigError("ExperimentPlan: drift multiplier pushes eta outside (0,1]");
}

std::vector<double> ExperimentPlan::per_setting_eta() const {
    std::vector<double> etas(settings.size(), params.eta);
    for (std::size_t j = 0; j < eta_multipliers.size(); ++j) etas[j] = params.eta * eta_multipliers[j];
    return etas;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the (seed, stream) pair
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<ClickRecord> simulate_clicks(const ExperimentPlan& plan, Execution exec) {
    plan.validate();
    const int num = static_cast<int>(plan.settings.size());
    const auto etas = plan.per_setting_eta();

    // Truncate the design matrix at the support of the true state, not at the
    // reconstruction cutoff a later consumer might pick.
    SchemeParams sim_params = plan.params;
    sim_params.signal_cutoff = plan.true_state.cutoff;
    const PovmMatrix povm = design_matrix(plan.model, sim_params, plan.settings, etas, exec);

    std::vector<ClickRecord> records(num);
    auto run_setting = [&](int j) {
        const auto& setting = plan.settings[j];
        const double eta_j = etas[j];

        double p = 0.0;
        for (int m = 0; m <= plan.true_state.cutoff; ++m)
            p += povm.elements(j, m) * plan.true_state.probs[m];
        if (p < -1e-12 || p > 1.0 + 1e-12)
            throw ConsistencyError("simulate_clicks: no-click probability " + std::to_string(p) +
                                   " outside [0,1] at setting " + std::to_string(setting.id));
        p = std::clamp(p, 0.0, 1.0);

        // blocked probe: vacuum signal reflected probe; Simple model sees the
        // probe directly
        const double p_blocked =
            plan.model == PovmModel::Simple
                ? 1.0 / (1.0 + eta_j * setting.mean)
                : 1.0 / (1.0 + (1.0 - plan.params.transmissivity) * eta_j * setting.mean);

        SchemeParams so_params = plan.params;
        so_params.eta = eta_j;
        const double p_signal_only = plan.model == PovmModel::Simple
                                         ? [&] {
                                               SchemeParams sp = so_params;
                                               sp.transmissivity = 1.0;  // no BS in this model
                                               return signal_only_prob(sp, plan.true_state);
                                           }()
                                         : signal_only_prob(so_params, plan.true_state);

        std::mt19937_64 rng(mix_seed(plan.seed, static_cast<std::uint64_t>(setting.id)));
        const auto m_pulses = plan.pulses_per_setting;
        ClickRecord rec;
        rec.setting_id = setting.id;
        rec.pulses = m_pulses;
        rec.no_clicks = std::binomial_distribution<std::int64_t>(m_pulses, p)(rng);
        rec.blocked_pulses = m_pulses;
        rec.blocked_no_clicks = std::binomial_distribution<std::int64_t>(m_pulses, p_blocked)(rng);
        rec.signal_only_pulses = m_pulses;
        rec.signal_only_no_clicks =
            std::binomial_distribution<std::int64_t>(m_pulses, p_signal_only)(rng);
        records[j] = rec;
    };

    if (exec == Execution::Parallel) {
        std::exception_ptr failure;
#pragma omp parallel for schedule(static)
        for (int j = 0; j < num; ++j) {
            try {
                run_setting(j);
            } catch (...) {
#pragma omp critical
                if (!failure) failure = std::current_exception();
            }
        }
        if (failure) std::rethrow_exception(failure);
    } else {
        for (int j = 0; j < num; ++j) run_setting(j);
    }
    return records;
}

ThermalSample simulate_thermal_intensities(double mean, int samples, std::uint64_t seed) {
    if (!(mean > 0.0)) throw ConfigError("simulate_thermal_intensities: mean must be positive");
    if (samples < 2) throw ConfigError("simulate_thermal_intensities: need at least 2 samples");

    ThermalSample out;
    out.intensities.resize(samples);
    std::mt19937_64 rng(mix_seed(seed, 0));
    std::exponential_distribution<double> dist(1.0 / mean);
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double v = dist(rng);
        out.intensities[i] = v;
        s1 += v;
        s2 += v * v;
    }
    const double m1 = s1 / samples;
    out.g2 = (s2 / samples) / (m1 * m1);
    return out;
}

ExperimentPlan inject_drift(const ExperimentPlan& plan, DriftProfile profile, double magnitude) {
    if (!(magnitude >= 0.0 && magnitude <= 0.5))
        throw ConfigError("inject_drift: magnitude outside [0, 0.5]");
    ExperimentPlan out = plan;
    const int num = static_cast<int>(plan.settings.size());
    out.eta_multipliers.assign(num, 1.0);
    if (magnitude == 0.0 || num < 2) {
        out.eta_multipliers.clear();
        return out;
    }
    for (int j = 0; j < num; ++j) {
        const double frac = static_cast<double>(j) / static_cast<double>(num - 1);
        double mult = 1.0;
        switch (profile) {
            case DriftProfile::Linear:
                mult = 1.0 - magnitude * frac;
                break;
            case DriftProfile::Sinusoidal:
                // one full period, peak-to-peak = magnitude
                mult = 1.0 - 0.5 * magnitude * (1.0 - std::cos(2.0 * std::numbers::pi * frac));
                break;
            case DriftProfile::Step:
                mult = (j < num / 2) ? 1.0 : 1.0 - magnitude;
                break;
        }
        out.eta_multipliers[j] = mult;
    }
    return out;
}

}  // namespace tptomo
