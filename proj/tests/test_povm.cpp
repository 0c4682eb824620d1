#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tptomo/errors.hpp"
#include "tptomo/povm.hpp"

using namespace tptomo;
using testutil::linspace_settings;

namespace {

SchemeParams default_params() {
    SchemeParams p;
    p.eta = 0.15;
    p.transmissivity = 0.9;
    p.overlap = 0.45;
    p.signal_cutoff = 3;
    return p;
}

}  // namespace

TEST_CASE("simple model closed form") {
    SchemeParams p = default_params();
    SUBCASE("vacuum probe") {
        const auto povm = povm_simple(p, {{0, 0.0}});
        CHECK(povm.elements(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(povm.elements(0, 1) == doctest::Approx(0.85).epsilon(1e-15));
    }
    SUBCASE("unit mean probe") {
        const auto povm = povm_simple(p, {{0, 1.0}});
        const double y = 1.0 / 1.15;
        CHECK(povm.elements(0, 0) == doctest::Approx(y).epsilon(1e-12));
        CHECK(povm.elements(0, 1) == doctest::Approx(y * (1.0 - y * 0.15)).epsilon(1e-12));
    }
    SUBCASE("bright probe saturates") {
        const auto povm = povm_simple(p, {{0, 1e9}});
        for (int m = 0; m <= p.signal_cutoff; ++m) CHECK(povm.elements(0, m) < 1e-8);
    }
}

TEST_CASE("signal-only no-click probability") {
    SchemeParams p = default_params();
    CHECK(signal_only_prob(p, PhotonDistribution({1.0})) == 1.0);
    CHECK(signal_only_prob(p, PhotonDistribution({0.0, 1.0})) ==
          doctest::Approx(0.865).epsilon(1e-15));
    // weighted sum cross-checked against the per-component expectation
    const PhotonDistribution rho({0.095, 0.905});
    const double expect = 0.095 * 1.0 + 0.905 * 0.865;
    CHECK(expect == doctest::Approx(0.877825).epsilon(1e-12));
    CHECK(signal_only_prob(p, rho) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("effective probe mean") {
    SchemeParams p = default_params();
    SUBCASE("perfect overlap is the identity") {
        p.overlap = 1.0;
        for (double n : {0.0, 0.5, 3.0, 100.0})
            CHECK(effective_probe_mean(p, {0, n}) == doctest::Approx(n).epsilon(1e-14));
    }
    SUBCASE("spot value") {
        CHECK(effective_probe_mean(p, {0, 10.0}) == doctest::Approx(4.5 / 1.0825).epsilon(1e-12));
    }
    SUBCASE("saturation for a strong probe") {
        const double limit = 0.45 / (0.55 * 0.1 * 0.15);
        CHECK(effective_probe_mean(p, {0, 1e9}) == doctest::Approx(limit).epsilon(1e-6));
        // monotone non-decreasing in n_j
        double prev = 0.0;
        for (double n = 0.0; n < 50.0; n += 0.7) {
            const double cur = effective_probe_mean(p, {0, n});
            CHECK(cur >= prev - 1e-14);
            prev = cur;
        }
        CHECK(prev <= limit + 1e-12);
    }
}

TEST_CASE("beam-splitter POVM vacuum row and limits") {
    SchemeParams p = default_params();
    p.tail_tol = 1e-9;
    const auto settings = std::vector<ProbeSetting>{{0, 0.0}, {1, 0.5}, {2, 1.3}};

    SUBCASE("vacuum probe row equals (1 - T eta)^m") {
        const auto povm = povm_bs_perfect(p, settings);
        for (int m = 0; m <= p.signal_cutoff; ++m)
            CHECK(povm.elements(0, m) == doctest::Approx(std::pow(0.865, m)).epsilon(1e-13));
    }
    SUBCASE("near-blind detector never clicks") {
        SchemeParams blind = p;
        blind.eta = 1e-12;
        const auto povm = povm_bs_perfect(blind, settings);
        CHECK((povm.elements.array() - 1.0).abs().maxCoeff() < 1e-9);
    }
    SUBCASE("mu=1 reduction to the perfect-overlap model") {
        SchemeParams full = p;
        full.overlap = 1.0;
        const auto a = povm_bs_overlap(full, settings);
        const auto b = povm_bs_perfect(full, settings);
        CHECK((a.elements - b.elements).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("mu=0 factorization") {
        SchemeParams zero = p;
        zero.overlap = 0.0;
        const auto povm = povm_bs_overlap(zero, settings);
        for (int j = 0; j < 3; ++j) {
            const double p_term = 1.0 / (1.0 + 0.1 * 0.15 * settings[j].mean);
            for (int m = 0; m <= p.signal_cutoff; ++m)
                CHECK(povm.elements(j, m) ==
                      doctest::Approx(std::pow(0.865, m) * p_term).epsilon(1e-12));
        }
    }
    SUBCASE("weak-probe two-mode picture") {
        // overlap row ~ perfect row at mean mu*n_j, scaled by the prefactor
        const double nj = 0.2;
        const auto ov = povm_bs_overlap(p, {{0, nj}});
        SchemeParams pf = p;
        pf.overlap = 1.0;
        const auto base = povm_bs_perfect(pf, {{0, p.overlap * nj}});
        const double pref = 1.0 / (1.0 + (1.0 - p.overlap) * 0.1 * p.eta * nj);
        for (int m = 0; m <= p.signal_cutoff; ++m) {
            const double rel =
                std::abs(ov.elements(0, m) - pref * base.elements(0, m)) / base.elements(0, m);
            CHECK(rel < 1e-3);
        }
    }
}

TEST_CASE("beam-splitter POVM against the matrix-exponential oracle") {
    SchemeParams p = default_params();
    p.signal_cutoff = 5;
    p.tail_tol = 1e-12;
    const auto settings = std::vector<ProbeSetting>{{0, 0.3}, {1, 1.0}, {2, 2.0}};
    const auto povm = povm_bs_perfect(p, settings);
    for (int j = 0; j < 3; ++j)
        for (int m = 0; m <= 5; ++m) {
            const double oracle =
                testutil::no_click_oracle(m, settings[j].mean, p.eta, p.transmissivity);
            CHECK(povm.elements(j, m) == doctest::Approx(oracle).epsilon(1e-8));
        }
}

TEST_CASE("POVM monotonicity") {
    SchemeParams p = default_params();
    const auto settings = linspace_settings(12, 0.0, 3.0);
    const std::vector<PovmMatrix> matrices = {povm_simple(p, settings),
                                              povm_bs_perfect(p, settings),
                                              povm_bs_overlap(p, settings)};
    for (const auto& povm : matrices) {
        const auto& e = povm.elements;
        CHECK((e.array() >= -1e-15).all());
        CHECK((e.array() <= 1.0 + 1e-12).all());
        // non-increasing in m for fixed j
        for (int j = 0; j < e.rows(); ++j)
            for (int m = 0; m + 1 < e.cols(); ++m) CHECK(e(j, m + 1) <= e(j, m) + 1e-12);
        // non-increasing in n_j for fixed m
        for (int m = 0; m < e.cols(); ++m)
            for (int j = 0; j + 1 < e.rows(); ++j) CHECK(e(j + 1, m) <= e(j, m) + 1e-12);
    }
}

TEST_CASE("forward model reproduces the blocked-probe formula") {
    SchemeParams p = default_params();
    p.tail_tol = 1e-12;
    const PhotonDistribution vac({1.0, 0.0, 0.0, 0.0});
    const auto settings = std::vector<ProbeSetting>{{0, 0.2}, {1, 1.0}, {2, 4.0}};
    SchemeParams perfect = p;
    perfect.overlap = 1.0;
    const auto povm = povm_bs_perfect(perfect, settings);
    for (int j = 0; j < 3; ++j) {
        double pj = 0.0;
        for (int m = 0; m <= p.signal_cutoff; ++m) pj += povm.elements(j, m) * vac.probs[m];
        const double blocked = 1.0 / (1.0 + 0.1 * p.eta * settings[j].mean);
        CHECK(pj == doctest::Approx(blocked).epsilon(1e-10));
    }
}

TEST_CASE("design matrix dispatch and per-setting efficiencies") {
    SchemeParams p = default_params();
    const auto settings = linspace_settings(150, 0.0, 2.0);

    SUBCASE("shape of the full-sized run") {
        const auto povm = design_matrix(PovmModel::ImperfectOverlap, p, settings);
        CHECK(povm.elements.rows() == 150);
        CHECK(povm.elements.cols() == 4);
    }
    SUBCASE("constant per-setting eta equals the plain builder") {
        const std::vector<double> etas(settings.size(), p.eta);
        const auto a = design_matrix(PovmModel::ImperfectOverlap, p, settings, etas);
        const auto b = povm_bs_overlap(p, settings);
        CHECK((a.elements - b.elements).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("rows vary monotonically with eta") {
        const auto few = linspace_settings(5, 0.4, 0.4);  // identical means, ids differ
        std::vector<double> etas = {0.1275, 0.1400, 0.1500, 0.1600, 0.1725};  // +-15%
        const auto povm = design_matrix(PovmModel::ImperfectOverlap, p, few, etas);
        for (int m = 1; m <= p.signal_cutoff; ++m)
            for (int j = 0; j + 1 < 5; ++j) CHECK(povm.elements(j + 1, m) < povm.elements(j, m));
    }
    SUBCASE("length mismatch rejected") {
        CHECK_THROWS_AS(design_matrix(PovmModel::Simple, p, settings, std::vector<double>{0.15}),
                        ConfigError);
    }
}

TEST_CASE("conditioning report") {
    SchemeParams p = default_params();
    SUBCASE("distinct settings give full Vandermonde rank") {
        const auto povm = povm_simple(p, {{0, 0.0}, {1, 0.5}, {2, 1.0}, {3, 2.0}});
        const auto report = conditioning_report(povm);
        CHECK(report.effective_rank == 4);
        CHECK_FALSE(report.underdetermined);
        CHECK(report.duplicates.empty());
    }
    SUBCASE("duplicate settings lose rank") {
        const auto povm = povm_simple(p, {{0, 0.5}, {1, 0.5}, {2, 1.0}, {3, 2.0}});
        const auto report = conditioning_report(povm);
        CHECK(report.effective_rank <= 3);
        CHECK(report.duplicates.size() == 1);
    }
    SUBCASE("condition number matches a direct SVD of the closed-form matrix") {
        const std::vector<double> means = {0.0, 0.5, 1.0, 2.0};
        Eigen::MatrixXd a(4, 4);
        for (int j = 0; j < 4; ++j) {
            const double y = 1.0 / (1.0 + p.eta * means[j]);
            for (int m = 0; m < 4; ++m) a(j, m) = y * std::pow(1.0 - y * p.eta, m);
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const double kappa =
            svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);

        std::vector<ProbeSetting> settings;
        for (int j = 0; j < 4; ++j) settings.push_back({j, means[j]});
        const auto report = conditioning_report(povm_simple(p, settings));
        CHECK(report.condition_number == doctest::Approx(kappa).epsilon(1e-8));
    }
    SUBCASE("underdetermined flagged, not fatal") {
        const auto povm = povm_simple(p, {{0, 0.0}, {1, 1.0}});
        const auto report = conditioning_report(povm);
        CHECK(report.underdetermined);
    }
}

TEST_CASE("serial and parallel builders agree") {
    SchemeParams p = default_params();
    const auto settings = linspace_settings(40, 0.0, 2.5);
    for (auto model :
         {PovmModel::Simple, PovmModel::PerfectOverlap, PovmModel::ImperfectOverlap}) {
        const auto par = design_matrix(model, p, settings, std::nullopt, Execution::Parallel);
        const auto ser = design_matrix(model, p, settings, std::nullopt, Execution::Serial);
        CHECK((par.elements - ser.elements).cwiseAbs().maxCoeff() == 0.0);
    }
}
