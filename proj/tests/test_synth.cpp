#include <catch2/catch.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "dsa/core/random.hpp"
#include "dsa/synth/kalman.hpp"
#include "dsa/synth/lgssm.hpp"

using namespace dsa;
using namespace dsa::synth;

namespace {

LgssmSpec scalar_spec(double a, double c, double q, double r, double m0, double p0) {
    LgssmSpec s;
    s.transition = Eigen::MatrixXd::Constant(1, 1, a);
    s.emission = Eigen::MatrixXd::Constant(1, 1, c);
    s.process_var = Eigen::VectorXd::Constant(1, q);
    s.obs_var = Eigen::VectorXd::Constant(1, r);
    s.initial_mean = Eigen::VectorXd::Constant(1, m0);
    s.initial_var = Eigen::VectorXd::Constant(1, p0);
    return s;
}

LgssmSpec random_spec(int k, int d, RandomStream& rng) {
    LgssmSpec s;
    s.transition = Eigen::MatrixXd(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            s.transition(i, j) = rng.uniform(-0.6, 0.6) / k + (i == j ? 0.5 : 0.0);
    s.emission = Eigen::MatrixXd(d, k);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < k; ++j) s.emission(i, j) = rng.uniform(-1.0, 1.0);
    s.process_var = Eigen::VectorXd(k);
    s.initial_var = Eigen::VectorXd(k);
    s.initial_mean = Eigen::VectorXd(k);
    for (int i = 0; i < k; ++i) {
        s.process_var(i) = rng.uniform(0.2, 1.5);
        s.initial_var(i) = rng.uniform(0.2, 1.5);
        s.initial_mean(i) = rng.normal();
    }
    s.obs_var = Eigen::VectorXd(d);
    for (int i = 0; i < d; ++i) s.obs_var(i) = rng.uniform(0.2, 1.5);
    return s;
}

ObservationSeries masked_series(const Eigen::MatrixXd& x, const std::vector<std::uint8_t>& mask) {
    return series_from_matrix("p", x, mask);
}

// Joint distribution of (z_1..z_T, x_1..x_T) for a scalar LGSSM, assembled by
// forward recursion; the conditioning oracle below uses it directly.
struct ScalarJoint {
    Eigen::MatrixXd cov;
    Eigen::VectorXd mean;
};

ScalarJoint scalar_joint(const LgssmSpec& s, int T) {
    const double a = s.transition(0, 0);
    const double c = s.emission(0, 0);
    const double q = s.process_var(0);
    const double r = s.obs_var(0);
    Eigen::MatrixXd zz(T, T);
    Eigen::VectorXd zm(T);
    zm(0) = s.initial_mean(0);
    for (int t = 1; t < T; ++t) zm(t) = a * zm(t - 1);
    zz(0, 0) = s.initial_var(0);
    for (int t = 1; t < T; ++t) zz(t, t) = a * zz(t - 1, t - 1) * a + q;
    for (int i = 0; i < T; ++i)
        for (int j = i + 1; j < T; ++j) {
            zz(i, j) = zz(i, j - 1) * a;
            zz(j, i) = zz(i, j);
        }
    ScalarJoint out;
    out.mean.resize(2 * T);
    out.cov.resize(2 * T, 2 * T);
    for (int i = 0; i < T; ++i) {
        out.mean(i) = zm(i);
        out.mean(T + i) = c * zm(i);
    }
    for (int i = 0; i < T; ++i)
        for (int j = 0; j < T; ++j) {
            out.cov(i, j) = zz(i, j);
            out.cov(i, T + j) = zz(i, j) * c;
            out.cov(T + i, j) = c * zz(i, j);
            out.cov(T + i, T + j) = c * zz(i, j) * c + (i == j ? r : 0.0);
        }
    return out;
}

double logpdf_mvn(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::VectorXd d = x - mean;
    const Eigen::VectorXd alpha = llt.solve(d);
    double logdet = 0.0;
    for (int i = 0; i < cov.rows(); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * (cov.rows() * dsa::nn::kLog2Pi + logdet + d.dot(alpha));
}

}  // namespace

TEST_CASE("kalman loglik closed forms", "[synth]") {
    SECTION("single observation marginal is N(0, P0 + R)") {
        auto s = scalar_spec(1.0, 1.0, 1.0, 1.0, 0.0, 1.0);
        Eigen::MatrixXd x(1, 1);
        x(0, 0) = 0.0;
        const double ll = kalman_loglik(s, series_from_matrix("p", x));
        REQUIRE(ll == Approx(-0.5 * std::log(4.0 * 3.14159265358979323846)).epsilon(1e-12));
    }
    SECTION("fully masked sequence contributes nothing") {
        auto s = scalar_spec(0.9, 1.2, 0.5, 0.4, 0.3, 1.0);
        Eigen::MatrixXd x(4, 1);
        x.setConstant(123.0);
        const double ll = kalman_loglik(s, masked_series(x, {0, 0, 0, 0}));
        REQUIRE(ll == 0.0);
    }
    SECTION("T=2 matches the hand-assembled bivariate marginal") {
        RandomStream rng(2024);
        for (int rep = 0; rep < 20; ++rep) {
            auto s = scalar_spec(rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5),
                                 rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2), rng.normal(),
                                 rng.uniform(0.3, 1.5));
            Eigen::MatrixXd x(2, 1);
            x(0, 0) = rng.normal();
            x(1, 0) = rng.normal();
            const auto joint = scalar_joint(s, 2);
            const double direct =
                logpdf_mvn(x.col(0), joint.mean.tail(2), joint.cov.bottomRightCorner(2, 2));
            const double ll = kalman_loglik(s, series_from_matrix("p", x));
            REQUIRE(ll == Approx(direct).margin(1e-10));
        }
    }
}

TEST_CASE("kalman smoother oracles", "[synth]") {
    SECTION("noiseless identity emission pins the smoother to the data") {
        auto s = scalar_spec(0.8, 1.0, 0.7, 1e-12, 0.0, 1.0);
        RandomStream rng(5);
        auto [z, x] = sample_lgssm(s, 20, rng);
        (void)z;
        auto sm = kalman_smoother(s, series_from_matrix("p", x));
        for (int t = 0; t < 20; ++t) REQUIRE(sm[t].mean[0] == Approx(x(t, 0)).margin(1e-5));
    }
    SECTION("fully masked sequence returns prior-propagated marginals") {
        auto s = scalar_spec(0.5, 1.0, 0.3, 0.2, 2.0, 1.0);
        Eigen::MatrixXd x(3, 1);
        x.setZero();
        auto sm = kalman_smoother(s, masked_series(x, {0, 0, 0}));
        // Prior propagation: m_t = a m_{t-1}, P_t = a^2 P_{t-1} + q.
        double m = 2.0, p = 1.0;
        for (int t = 0; t < 3; ++t) {
            if (t > 0) {
                m = 0.5 * m;
                p = 0.25 * p + 0.3;
            }
            REQUIRE(sm[t].mean[0] == Approx(m).margin(1e-12));
            REQUIRE(sm[t].variance[0] == Approx(p).margin(1e-12));
        }
    }
    SECTION("T=3 marginals match explicit joint conditioning") {
        RandomStream rng(77);
        for (int rep = 0; rep < 20; ++rep) {
            auto s = scalar_spec(rng.uniform(-1.0, 1.0), rng.uniform(0.5, 1.5),
                                 rng.uniform(0.2, 1.2), rng.uniform(0.2, 1.2), rng.normal(),
                                 rng.uniform(0.3, 1.5));
            Eigen::MatrixXd x(3, 1);
            for (int t = 0; t < 3; ++t) x(t, 0) = rng.normal();
            const auto joint = scalar_joint(s, 3);
            const Eigen::MatrixXd zz = joint.cov.topLeftCorner(3, 3);
            const Eigen::MatrixXd zx = joint.cov.topRightCorner(3, 3);
            const Eigen::MatrixXd xx = joint.cov.bottomRightCorner(3, 3);
            const Eigen::VectorXd resid = x.col(0) - joint.mean.tail(3);
            const Eigen::MatrixXd gain = zx * xx.inverse();
            const Eigen::VectorXd cond_mean = joint.mean.head(3) + gain * resid;
            const Eigen::MatrixXd cond_cov = zz - gain * zx.transpose();
            auto sm = kalman_smoother(s, series_from_matrix("p", x));
            for (int t = 0; t < 3; ++t) {
                REQUIRE(sm[t].mean[0] == Approx(cond_mean(t)).margin(1e-9));
                REQUIRE(sm[t].variance[0] == Approx(cond_cov(t, t)).margin(1e-9));
            }
        }
    }
    SECTION("smoother variances never exceed filter variances") {
        RandomStream rng(91);
        for (int rep = 0; rep < 10; ++rep) {
            auto s = random_spec(2, 3, rng);
            auto [z, x] = sample_lgssm(s, 15, rng);
            (void)z;
            std::vector<std::uint8_t> mask(45, 1);
            for (auto& m : mask) m = rng.bernoulli(0.7) ? 1 : 0;
            auto series = masked_series(x, mask);
            auto filt = kalman_filter(s, series);
            auto sm = kalman_smoother(s, series);
            for (int t = 0; t < 15; ++t)
                for (int i = 0; i < 2; ++i)
                    REQUIRE(sm[t].variance[i] <= filt.marginals[t].variance[i] + 1e-12);
        }
    }
}

TEST_CASE("lgssm sampling determinism and validation", "[synth]") {
    RandomStream rng(3);
    auto s = random_spec(2, 4, rng);
    RandomStream a(99), b(99);
    auto [za, xa] = sample_lgssm(s, 30, a);
    auto [zb, xb] = sample_lgssm(s, 30, b);
    REQUIRE(za == zb);
    REQUIRE(xa == xb);

    auto bad = s;
    bad.obs_var(0) = 0.0;
    REQUIRE_THROWS_AS(sample_lgssm(bad, 5, rng), DomainError);
}

#include "dsa/preprocess/pipeline.hpp"
#include "dsa/synth/simulate.hpp"

TEST_CASE("cohort simulator basics", "[synth]") {
    SECTION("single complete patient has an all-ones mask") {
        CohortSpec spec = desk_scale_spec();
        spec.patients = 1;
        spec.min_steps = 50;
        spec.max_steps = 50;
        spec.target_missing_rate = 0.0;
        spec.duplicate_day_prob = 0.0;
        auto [raw, truth] = simulate_cohort(spec, 5);
        preprocess::BuildRules rules{50, 238};
        auto tensor = preprocess::build_cohort(raw, rules);
        REQUIRE(tensor.patients.size() == 1);
        REQUIRE(tensor.patients[0].steps == static_cast<int>(truth.patients[0].regimes.size()));
        for (auto m : tensor.patients[0].mask) REQUIRE(m == 1);
        REQUIRE(tensor.missing_rate == 0.0);
    }

    SECTION("infeasible missing rate is rejected") {
        CohortSpec spec = desk_scale_spec();
        spec.target_missing_rate = 1.0;
        REQUIRE_THROWS_AS(simulate_cohort(spec, 1), DataError);
    }

    SECTION("determinism given the seed") {
        CohortSpec spec = desk_scale_spec();
        spec.patients = 5;
        auto [a, ta] = simulate_cohort(spec, 99);
        auto [b, tb] = simulate_cohort(spec, 99);
        REQUIRE(a.patients.size() == b.patients.size());
        for (std::size_t i = 0; i < a.patients.size(); ++i) {
            REQUIRE(a.patients[i].observations.size() == b.patients[i].observations.size());
            for (std::size_t j = 0; j < a.patients[i].observations.size(); ++j) {
                REQUIRE(a.patients[i].observations[j].date == b.patients[i].observations[j].date);
                REQUIRE(a.patients[i].observations[j].item == b.patients[i].observations[j].item);
                REQUIRE(a.patients[i].observations[j].value == b.patients[i].observations[j].value);
            }
        }
        REQUIRE(ta.patients[2].regimes == tb.patients[2].regimes);
    }
}

TEST_CASE("cohort simulator hits the target missing rate", "[synth]") {
    CohortSpec spec = desk_scale_spec();
    spec.patients = 60;
    spec.duplicate_day_prob = 0.0;

    SECTION("half missing") {
        spec.target_missing_rate = 0.5;
        auto [raw, truth] = simulate_cohort(spec, 11);
        (void)truth;
        preprocess::BuildRules rules{spec.min_steps, spec.max_steps};
        preprocess::BuildReport report;
        preprocess::build_cohort(raw, rules, &report);
        REQUIRE(report.missing_rate == Approx(0.5).margin(0.02));
    }

    SECTION("reference rate 59.23%") {
        auto [raw, truth] = simulate_cohort(spec, 12);
        (void)truth;
        preprocess::BuildRules rules{spec.min_steps, spec.max_steps};
        preprocess::BuildReport report;
        auto tensor = preprocess::build_cohort(raw, rules, &report);
        REQUIRE(report.missing_rate == Approx(0.5923).margin(0.005));
        REQUIRE(report.excluded_short == 0);
        REQUIRE(report.excluded_missing_item == 0);
        REQUIRE(tensor.patients.size() == static_cast<std::size_t>(spec.patients));
    }
}

TEST_CASE("designed terminal signature is recoverable", "[synth]") {
    CohortSpec spec = desk_scale_spec();
    spec.patients = 80;
    auto [raw, truth] = simulate_cohort(spec, 21);

    // Recount signal codes over terminal-regime steps for the three
    // designated items, straight from the raw tables.
    std::map<std::string, const ItemSpec*> catalog;
    for (const auto& item : raw.items) catalog[item.name] = &item;
    std::map<std::string, std::pair<double, long>> acc;
    for (std::size_t p = 0; p < raw.patients.size(); ++p) {
        const auto& pt = truth.patients[p];
        for (const auto& obs : raw.patients[p].observations) {
            bool designated = false;
            for (const auto& name : spec.signature_items) designated |= obs.item == name;
            if (!designated) continue;
            if (pt.regimes[static_cast<std::size_t>(obs.date)] !=
                static_cast<int>(Regime::Terminal))
                continue;
            const auto enc = preprocess::encode_abnormality(obs.value, *catalog[obs.item]);
            acc[obs.item].first += enc.signal;
            acc[obs.item].second++;
        }
    }
    for (const auto& name : spec.signature_items) {
        REQUIRE(acc[name].second > 100);
        REQUIRE(acc[name].first / acc[name].second <= -0.5);
    }

    SECTION("dead patients end in the terminal regime") {
        int dead = 0;
        for (const auto& pt : truth.patients)
            if (pt.dead) {
                ++dead;
                REQUIRE(pt.regimes.back() == static_cast<int>(Regime::Terminal));
                REQUIRE(pt.death_step == static_cast<int>(pt.regimes.size()) - 1);
                REQUIRE(static_cast<int>(pt.regimes.size()) >= 50);
            }
        REQUIRE(dead > 0);
    }
}
