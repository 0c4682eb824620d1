#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "test_util.hpp"
#include "tptomo/errors.hpp"
#include "tptomo/reconstruction.hpp"
#include "tptomo/simulator.hpp"

using namespace tptomo;
using testutil::linspace_settings;

namespace {

SchemeParams default_params(int cutoff = 3) {
    SchemeParams p;
    p.eta = 0.15;
    p.transmissivity = 0.9;
    p.overlap = 0.45;
    p.signal_cutoff = cutoff;
    return p;
}

// records with counts c = round(p * M) at enormous M, i.e. probabilities that
// are exact to ~1e-15
std::vector<ClickRecord> exact_records(const Eigen::MatrixXd& povm,
                                       const PhotonDistribution& truth) {
    const std::int64_t pulses = 1000000000000000LL;
    std::vector<ClickRecord> records;
    for (int j = 0; j < povm.rows(); ++j) {
        double p = 0.0;
        for (int m = 0; m < povm.cols(); ++m) p += povm(j, m) * truth.probs[m];
        ClickRecord rec;
        rec.setting_id = j;
        rec.pulses = pulses;
        rec.no_clicks = static_cast<std::int64_t>(std::llround(p * pulses));
        records.push_back(rec);
    }
    return records;
}

}  // namespace

TEST_CASE("nnls basic behavior") {
    const Eigen::VectorXd w2 = Eigen::VectorXd::Ones(2);
    SUBCASE("identity with feasible target") {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
        Eigen::VectorXd b(2);
        b << 0.3, 0.7;
        const auto sol = nnls_solve(a, b, w2);
        CHECK((sol.x - b).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("infeasible coordinate clamps to zero") {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
        Eigen::VectorXd b(2);
        b << -1.0, 2.0;
        const auto sol = nnls_solve(a, b, w2);
        CHECK(sol.x(0) == 0.0);
        CHECK(sol.x(1) == doctest::Approx(2.0).epsilon(1e-14));
    }
    SUBCASE("dimension and weight validation") {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
        Eigen::VectorXd b(2);
        b << 1.0, 1.0;
        Eigen::VectorXd bad_w(2);
        bad_w << 1.0, 0.0;
        CHECK_THROWS_AS(nnls_solve(a, b, bad_w), SolverError);
        CHECK_THROWS_AS(nnls_solve(a, Eigen::VectorXd::Ones(3), w2), SolverError);
    }
}

TEST_CASE("nnls recovery with KKT certificate and grid oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
        Eigen::MatrixXd a(6, 3);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 3; ++j) a(i, j) = unit(rng);
        a += 0.5 * Eigen::MatrixXd::Identity(6, 3);  // keep it well conditioned
        Eigen::Vector3d x_true(unit(rng), 0.0, unit(rng));
        if (trial % 2) x_true(1) = unit(rng);
        const Eigen::VectorXd b = a * x_true;
        const Eigen::VectorXd w = Eigen::VectorXd::Ones(6);

        const auto sol = nnls_solve(a, b, w);
        CHECK((sol.x - x_true).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(nnls_kkt_violation(a, b, w, sol.x) < 1e-10);

        if (trial < 2) {
            const Eigen::Vector3d grid = testutil::nnls_grid_oracle(a, b);
            CHECK((sol.x - grid).cwiseAbs().maxCoeff() < 1.5e-3);
        }
    }
}

TEST_CASE("nnls weight scaling invariance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    Eigen::MatrixXd a(5, 3);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = unit(rng);
    Eigen::VectorXd b(5);
    for (int i = 0; i < 5; ++i) b(i) = unit(rng) - 0.3;
    Eigen::VectorXd w(5);
    for (int i = 0; i < 5; ++i) w(i) = unit(rng);

    const auto base = nnls_solve(a, b, w);
    const auto scaled = nnls_solve(a, b, Eigen::VectorXd(1000.0 * w));
    CHECK((base.x - scaled.x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("noiseless reconstruction recovers the truth") {
    SchemeParams p = default_params(1);
    const PhotonDistribution truth({0.095, 0.905});
    const auto settings = linspace_settings(4, 0.0, 2.0);
    const auto povm = design_matrix(PovmModel::Simple, p, settings);
    const auto records = exact_records(povm.elements, truth);

    const auto result = reconstruct(records, settings, p, PovmModel::Simple);
    CHECK(std::abs(result.estimate.probs[0] - 0.095) < 1e-9);
    CHECK(std::abs(result.estimate.probs[1] - 0.905) < 1e-9);
    CHECK(result.estimate.is_normalized());
    CHECK(result.pre_normalization_total == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("reconstruction permutation invariance") {
    SchemeParams p = default_params(2);
    const PhotonDistribution truth({0.2, 0.5, 0.3});
    const auto settings = linspace_settings(8, 0.0, 2.0);
    const auto povm = design_matrix(PovmModel::ImperfectOverlap, p, settings);
    auto records = exact_records(povm.elements, truth);

    const auto base = reconstruct(records, settings, p, PovmModel::ImperfectOverlap);
    std::mt19937_64 rng(1);
    auto shuffled_records = records;
    auto shuffled_settings = settings;
    std::shuffle(shuffled_records.begin(), shuffled_records.end(), rng);
    const auto shuffled =
        reconstruct(shuffled_records, shuffled_settings, p, PovmModel::ImperfectOverlap);
    for (int m = 0; m <= 2; ++m)
        CHECK(std::abs(base.estimate.probs[m] - shuffled.estimate.probs[m]) < 1e-12);
}

TEST_CASE("reconstruction from a sampled synthetic run") {
    ExperimentPlan plan;
    plan.params = default_params(3);
    plan.model = PovmModel::ImperfectOverlap;
    plan.true_state = PhotonDistribution({0.095, 0.905, 0.0, 0.0});
    plan.settings = linspace_settings(60, 0.0, 150.0);
    plan.pulses_per_setting = 10000000;
    plan.seed = 70;
    const auto records = simulate_clicks(plan);

    const auto result =
        reconstruct(records, plan.settings, plan.params, PovmModel::ImperfectOverlap);
    CHECK(std::abs(result.estimate.probs[1] - 0.905) < 0.03);
    CHECK(result.condition_number > 1.0);
    CHECK(result.fitted_probabilities.size() == 60);
}

TEST_CASE("bootstrap statistics") {
    SchemeParams p = default_params(1);
    const PhotonDistribution truth({0.095, 0.905});
    const auto settings = linspace_settings(6, 0.0, 2.0);
    const auto povm = design_matrix(PovmModel::Simple, p, settings);
    const auto records = exact_records(povm.elements, truth);

    SUBCASE("two replicates match the sample-std definition") {
        const auto bs =
            bootstrap(records, settings, p, PovmModel::Simple, {}, 2, 9, Execution::Serial);
        REQUIRE(bs.replicates.rows() == 2);
        for (int m = 0; m < 2; ++m) {
            const double expect =
                std::abs(bs.replicates(0, m) - bs.replicates(1, m)) / std::sqrt(2.0);
            CHECK(bs.std_dev(m) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
    SUBCASE("exact counts at huge M leave almost no scatter") {
        const auto bs = bootstrap(records, settings, p, PovmModel::Simple, {}, 20, 9);
        CHECK(bs.std_dev.maxCoeff() < 1e-6);
        CHECK(bs.failures == 0);
    }
    SUBCASE("parallel replicates are deterministic") {
        const auto a = bootstrap(records, settings, p, PovmModel::Simple, {}, 16, 3);
        const auto b =
            bootstrap(records, settings, p, PovmModel::Simple, {}, 16, 3, Execution::Serial);
        CHECK((a.replicates - b.replicates).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("reconstruction input validation") {
    SchemeParams p = default_params(1);
    CHECK_THROWS_AS(reconstruct({}, {}, p, PovmModel::Simple), DataError);

    ClickRecord rec;
    rec.setting_id = 0;
    rec.pulses = 100;
    rec.no_clicks = 50;
    CHECK_THROWS_AS(reconstruct({rec}, {}, p, PovmModel::Simple), DataError);  // no setting

    ReconstructOptions opt;
    opt.drift_correction = true;  // no reference state
    CHECK_THROWS_AS(reconstruct({rec}, {{0, 0.5}}, p, PovmModel::Simple, opt), ConfigError);
}
