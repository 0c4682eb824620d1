// Batch front end: simulate / reconstruct / calibrate / diagnose pipelines
// driven by a JSON config plus command-line overrides.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "tptomo/errors.hpp"
#include "tptomo/io.hpp"
#include "tptomo/reconstruction.hpp"
#include "tptomo/simulator.hpp"

using nlohmann::json;
using namespace tptomo;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitSolver = 4;
constexpr int kExitConsistency = 5;

struct RunConfig {
    std::string mode = "reconstruct";
    SchemeParams scheme;
    PovmModel model = PovmModel::ImperfectOverlap;
    std::uint64_t seed = 0;
    int bootstrap_b = 0;
    bool drift_correction = false;
    std::optional<PhotonDistribution> reference_state;
    int smoothing_window = 5;
    bool uniform_weights = false;
    std::string data_path;
    std::string out_path;
    json raw;  // echoed into the report
};

PhotonDistribution distribution_from(const json& arr) {
    if (!arr.is_array() || arr.empty()) throw ConfigError("state must be a nonempty array");
    std::vector<double> probs = arr.get<std::vector<double>>();
    PhotonDistribution d(std::move(probs));
    d.normalize();
    return d;
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config parse error: " + std::string(e.what()));
    }
    cfg.raw = j;

    cfg.mode = j.value("mode", cfg.mode);
    if (j.contains("scheme")) {
        const auto& s = j["scheme"];
        cfg.scheme.eta = s.value("eta", cfg.scheme.eta);
        cfg.scheme.transmissivity = s.value("transmissivity", cfg.scheme.transmissivity);
        cfg.scheme.overlap = s.value("overlap", cfg.scheme.overlap);
        cfg.scheme.signal_cutoff = s.value("signal_cutoff", cfg.scheme.signal_cutoff);
        cfg.scheme.probe_cutoff = s.value("probe_cutoff", cfg.scheme.probe_cutoff);
        cfg.scheme.tail_tol = s.value("tail_tol", cfg.scheme.tail_tol);
    }
    if (j.contains("model")) cfg.model = povm_model_from_string(j["model"].get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.bootstrap_b = j.value("bootstrap_B", cfg.bootstrap_b);
    if (j.contains("drift_correction")) {
        const auto& d = j["drift_correction"];
        cfg.drift_correction = d.value("enabled", false);
        cfg.smoothing_window = d.value("smoothing_window", cfg.smoothing_window);
        if (d.contains("reference_state"))
            cfg.reference_state = distribution_from(d["reference_state"]);
    }
    cfg.uniform_weights = j.value("uniform_weights", cfg.uniform_weights);
    cfg.data_path = j.value("data", cfg.data_path);
    cfg.out_path = j.value("out", cfg.out_path);
    return cfg;
}

json scheme_to_json(const SchemeParams& p) {
    return {{"eta", p.eta},
            {"transmissivity", p.transmissivity},
            {"overlap", p.overlap},
            {"signal_cutoff", p.signal_cutoff},
            {"probe_cutoff", p.probe_cutoff},
            {"tail_tol", p.tail_tol}};
}

json rounded(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(report_round(x));
    return arr;
}

json rounded(const Eigen::VectorXd& v) {
    return rounded(std::vector<double>(v.data(), v.data() + v.size()));
}

void write_report(const std::string& path, const json& report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open report file '" + path + "' for writing");
    out << report.dump(2) << "\n";
}

ExperimentPlan plan_from_config(const RunConfig& cfg) {
    if (!cfg.raw.contains("simulate"))
        throw ConfigError("simulate mode requires a 'simulate' section in the config");
    const auto& s = cfg.raw["simulate"];

    ExperimentPlan plan;
    plan.params = cfg.scheme;
    plan.model = cfg.model;
    plan.seed = cfg.seed;
    if (!s.contains("true_state")) throw ConfigError("simulate: true_state missing");
    plan.true_state = distribution_from(s["true_state"]);
    plan.pulses_per_setting = s.value("pulses_per_setting", std::int64_t{1000000});

    if (s.contains("settings") && s["settings"].is_object()) {
        const auto& sp = s["settings"];
        const int count = sp.value("count", 0);
        if (count < 1) throw ConfigError("simulate.settings.count must be >= 1");
        const double lo = sp.value("mean_min", 0.0);
        const double hi = sp.value("mean_max", 1.0);
        for (int i = 0; i < count; ++i) {
            const double frac = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
            plan.settings.push_back({i, lo + frac * (hi - lo)});
        }
    } else if (s.contains("means")) {
        const auto means = s["means"].get<std::vector<double>>();
        for (std::size_t i = 0; i < means.size(); ++i)
            plan.settings.push_back({static_cast<int>(i), means[i]});
    } else {
        throw ConfigError("simulate: settings (count/mean range) or means list required");
    }

    if (s.contains("drift")) {
        const auto& d = s["drift"];
        plan = inject_drift(plan, drift_profile_from_string(d.value("profile", "linear")),
                            d.value("magnitude", 0.0));
    }
    return plan;
}

int run_simulate(const RunConfig& cfg) {
    if (cfg.out_path.empty()) throw ConfigError("simulate mode requires --out");
    if (!cfg.data_path.empty())
        std::cerr << "warning: --data is ignored in simulate mode\n";
    const ExperimentPlan plan = plan_from_config(cfg);
    MeasurementSet data;
    data.records = simulate_clicks(plan);
    data.settings = plan.settings;
    const std::string col = cfg.raw["simulate"].value("probe_column", "mean");
    emit_measurements(cfg.out_path, data,
                      col == "blocked" ? ProbeColumn::BlockedCounts : ProbeColumn::Mean);
    std::cout << "wrote " << data.records.size() << " settings to " << cfg.out_path << "\n";
    return 0;
}

json per_setting_table(const MeasurementSet& data, const ReconstructionResult& result) {
    // (n_j, p_hat, p_model) triples, plot-ready
    json rows = json::array();
    // records were sorted by id inside reconstruct; mirror that order
    std::vector<std::size_t> order(data.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.records[a].setting_id < data.records[b].setting_id;
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& rec = data.records[order[k]];
        const double p_hat = static_cast<double>(rec.no_clicks) / rec.pulses;
        const double p_model = result.fitted_probabilities[k];
        rows.push_back({{"setting_id", rec.setting_id},
                        {"probe_mean", report_round(data.settings[order[k]].mean)},
                        {"p_hat", report_round(p_hat)},
                        {"p_model", report_round(p_model)},
                        {"residual", report_round(p_hat - p_model)}});
    }
    return rows;
}

int run_reconstruct(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("reconstruct mode requires --data");
    if (cfg.out_path.empty()) throw ConfigError("reconstruct mode requires --out");
    const MeasurementSet data = ingest_measurements(cfg.data_path, cfg.scheme);

    ReconstructOptions options;
    options.drift_correction = cfg.drift_correction;
    options.reference_state = cfg.reference_state;
    options.smoothing_window = cfg.smoothing_window;
    options.uniform_weights = cfg.uniform_weights;

    const ReconstructionResult result =
        reconstruct(data.records, data.settings, cfg.scheme, cfg.model, options);

    json report;
    report["mode"] = "reconstruct";
    report["config"] = cfg.raw.is_null() ? json::object() : cfg.raw;
    report["scheme"] = scheme_to_json(cfg.scheme);
    report["model"] = to_string(cfg.model);
    report["seed"] = cfg.seed;
    report["input"] = {{"path", cfg.data_path},
                       {"content_hash", file_content_hash(cfg.data_path)},
                       {"num_settings", data.records.size()}};
    report["estimate"] = rounded(result.estimate.probs);
    report["pre_normalization_total"] = report_round(result.pre_normalization_total);
    report["residual_norm"] = report_round(result.residual_norm);
    report["condition_number"] = report_round(result.condition_number);
    report["weighted"] = result.weighted;
    report["diagnostics"] = result.diagnostics;
    if (result.per_setting_eta_used) report["drift_eta"] = rounded(*result.per_setting_eta_used);
    report["settings"] = per_setting_table(data, result);

    if (cfg.bootstrap_b > 0) {
        const BootstrapResult bs = bootstrap(data.records, data.settings, cfg.scheme, cfg.model,
                                             options, cfg.bootstrap_b, cfg.seed);
        report["bootstrap"] = {{"replicates", cfg.bootstrap_b},
                               {"failures", bs.failures},
                               {"mean", rounded(bs.mean)},
                               {"std", rounded(bs.std_dev)}};
    }

    // closed-loop runs carry the truth in the config; compare when present
    if (cfg.raw.contains("simulate") && cfg.raw["simulate"].contains("true_state")) {
        const PhotonDistribution truth = distribution_from(cfg.raw["simulate"]["true_state"]);
        json cmp;
        cmp["truth"] = rounded(truth.probs);
        double max_err = 0.0, tv = 0.0;
        const std::size_t n = std::max(truth.probs.size(), result.estimate.probs.size());
        for (std::size_t i = 0; i < n; ++i) {
            const double t = i < truth.probs.size() ? truth.probs[i] : 0.0;
            const double e = i < result.estimate.probs.size() ? result.estimate.probs[i] : 0.0;
            max_err = std::max(max_err, std::abs(t - e));
            tv += 0.5 * std::abs(t - e);
        }
        cmp["max_norm_error"] = report_round(max_err);
        cmp["total_variation"] = report_round(tv);
        report["truth_comparison"] = cmp;
    }

    write_report(cfg.out_path, report);
    std::cout << "estimate:";
    for (double p : result.estimate.probs) std::cout << ' ' << report_round(p);
    std::cout << "\nreport written to " << cfg.out_path << "\n";
    return 0;
}

int run_calibrate(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("calibrate mode requires --data");
    if (cfg.out_path.empty()) throw ConfigError("calibrate mode requires --out");
    const MeasurementSet data = ingest_measurements(cfg.data_path, cfg.scheme);

    json report;
    report["mode"] = "calibrate";
    report["scheme"] = scheme_to_json(cfg.scheme);
    report["input"] = {{"path", cfg.data_path}, {"content_hash", file_content_hash(cfg.data_path)}};
    json means = json::array();
    for (const auto& s : data.settings)
        means.push_back({{"setting_id", s.id}, {"probe_mean", report_round(s.mean)}});
    report["probe_means"] = means;

    if (cfg.reference_state && !data.records.empty() &&
        data.records.front().signal_only_no_clicks) {
        const DriftSeries series =
            drift_series(cfg.scheme, *cfg.reference_state, data.records, cfg.smoothing_window);
        json etas = json::array();
        for (const auto& e : series.estimates)
            etas.push_back({{"setting_id", e.setting_id},
                            {"eta", report_round(e.eta)},
                            {"low_confidence", e.low_confidence}});
        report["drift_series"] = etas;
    }
    write_report(cfg.out_path, report);
    return 0;
}

int run_diagnose(const RunConfig& cfg) {
    if (cfg.data_path.empty()) throw ConfigError("diagnose mode requires --data");
    if (cfg.out_path.empty()) throw ConfigError("diagnose mode requires --out");
    const MeasurementSet data = ingest_measurements(cfg.data_path, cfg.scheme);
    const PovmMatrix povm = design_matrix(cfg.model, cfg.scheme, data.settings);
    const ConditioningReport cr = conditioning_report(povm);

    json report;
    report["mode"] = "diagnose";
    report["scheme"] = scheme_to_json(cfg.scheme);
    report["model"] = to_string(cfg.model);
    report["input"] = {{"path", cfg.data_path}, {"content_hash", file_content_hash(cfg.data_path)}};
    report["singular_values"] = rounded(cr.singular_values);
    report["condition_number"] = report_round(cr.condition_number);
    report["effective_rank"] = cr.effective_rank;
    report["underdetermined"] = cr.underdetermined;
    json dups = json::array();
    for (const auto& [a, b] : cr.duplicates) dups.push_back({a, b});
    report["duplicate_settings"] = dups;
    report["warnings"] = cr.warnings;
    write_report(cfg.out_path, report);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon-number distribution reconstruction from thermal-probe no-click statistics"};

    std::string config_path, mode, data_path, out_path, model_name;
    std::optional<std::uint64_t> seed;
    std::optional<int> bootstrap_b;
    bool drift_correct = false;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--mode", mode, "reconstruct|simulate|calibrate|diagnose");
    app.add_option("--data", data_path, "measurement file");
    app.add_option("--out", out_path, "output file (report or simulated measurements)");
    app.add_option("--seed", seed, "RNG seed override");
    app.add_option("--bootstrap", bootstrap_b, "number of bootstrap replicates");
    app.add_flag("--drift-correct", drift_correct, "enable per-setting efficiency correction");
    app.add_option("--model", model_name, "POVM model: simple|perfect|overlap");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg = load_config(config_path);
        if (!mode.empty()) cfg.mode = mode;
        if (!data_path.empty()) cfg.data_path = data_path;
        if (!out_path.empty()) cfg.out_path = out_path;
        if (seed) cfg.seed = *seed;
        if (bootstrap_b) cfg.bootstrap_b = *bootstrap_b;
        if (drift_correct) cfg.drift_correction = true;
        if (!model_name.empty()) cfg.model = povm_model_from_string(model_name);
        cfg.scheme.validate();

        if (cfg.mode == "simulate") return run_simulate(cfg);
        if (cfg.mode == "reconstruct") return run_reconstruct(cfg);
        if (cfg.mode == "calibrate") return run_calibrate(cfg);
        if (cfg.mode == "diagnose") return run_diagnose(cfg);
        throw ConfigError("unknown mode '" + cfg.mode + "'");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const SolverError& e) {
        std::cerr << "solver error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const ConsistencyError& e) {
        std::cerr << "consistency error: " << e.what() << "\n";
        return kExitConsistency;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
