#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "disac/filter.hpp"
#include "disac/rng.hpp"

using namespace disac;

namespace {

BsConfig wide_bs() {
    BsConfig bs;
    bs.id = 1;
    bs.position = Vec3::Zero();
    bs.fov_radius = 200.0;
    bs.detection_prob_inside = 0.9;
    bs.clutter_rate = 3.0;
    // delay noise equivalent to a 0.1 m range standard deviation
    const double toa_sigma = 2.0 * 0.1 / kSpeedOfLight;
    bs.measurement_noise_cov =
        Vec3(toa_sigma * toa_sigma, 0.01 * 0.01, 0.01 * 0.01).asDiagonal();
    return bs;
}

FilterConfig filter_cfg(const BsConfig& bs) {
    FilterConfig cfg;
    cfg.birth = {make_birth_component(bs)};
    return cfg;
}

TrajectoryBernoulli bern_at(const Vec6& mean, const Mat6& cov, double r, int step = 1) {
    TrajectoryBernoulli b;
    b.existence = r;
    b.track_uid = 1;
    b.density = TrajectoryGaussian::single(step, mean, cov, 5);
    return b;
}

Measurement noisy_measurement(const BsConfig& bs, const Vec3& pos, RngStream& rng) {
    Measurement z = measurement_fn(bs, pos);
    z.toa += rng.gaussian(0.0, std::sqrt(bs.measurement_noise_cov(0, 0)));
    z.azimuth += rng.gaussian(0.0, std::sqrt(bs.measurement_noise_cov(1, 1)));
    z.elevation += rng.gaussian(0.0, std::sqrt(bs.measurement_noise_cov(2, 2)));
    return z;
}

}  // namespace

TEST_CASE("birth component shape") {
    const BsConfig bs = wide_bs();
    const PppComponent c = make_birth_component(bs, 0.05);
    CHECK(c.weight == 0.05);
    CHECK((c.density.newest_mean().head<3>() - bs.position).norm() == 0.0);
    CHECK(c.density.newest_cov()(0, 0) ==
          doctest::Approx(bs.fov_radius * bs.fov_radius / 3.0).epsilon(1e-12));
    CHECK(c.density.newest_cov()(3, 3) == doctest::Approx(225.0));
}

TEST_CASE("predict") {
    const BsConfig bs = wide_bs();
    const FilterConfig cfg = filter_cfg(bs);
    MotionConfig motion;

    SUBCASE("empty density gains exactly the birth intensity") {
        TpmbmDensity d = TpmbmDensity::empty();
        predict(d, motion, cfg, 1);
        REQUIRE(d.ppp.size() == 1);
        CHECK(d.ppp[0].weight == 0.05);
        CHECK(d.ppp[0].density.birth_step == 1);
        CHECK(d.ppp[0].density.end_step == 1);
        CHECK(d.pool.empty());
    }

    SUBCASE("static target with unit survival keeps its mean") {
        motion.survival_prob = 1.0;
        motion.accel_std.setZero();
        TpmbmDensity d = TpmbmDensity::empty();
        Vec6 mean;
        mean << 10, 5, 2, 0, 0, 0;
        d.pool.push_back(bern_at(mean, Mat6::Identity(), 0.8));
        d.hypotheses[0].bernoulli_refs = {0};
        predict(d, motion, cfg, 2);
        CHECK(d.pool[0].density.window_states() == 2);
        CHECK((d.pool[0].density.newest_mean() - mean).norm() < 1e-12);
        CHECK(d.pool[0].density.alive_prob == 1.0);
    }

    SUBCASE("newest marginal equals the Kalman prediction") {
        TpmbmDensity d = TpmbmDensity::empty();
        RngStream rng(1);
        Vec6 mean;
        for (int i = 0; i < 6; ++i) mean(i) = rng.uniform(-10, 10);
        Mat6 a;
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) a(i, j) = rng.uniform(-1, 1);
        const Mat6 p = a * a.transpose() + 0.5 * Mat6::Identity();
        d.pool.push_back(bern_at(mean, p, 0.7));
        d.hypotheses[0].bernoulli_refs = {0};

        const Mat6 f = cv_transition_matrix(motion);
        const Mat6 q = process_noise_cov(motion);
        predict(d, motion, cfg, 2);
        CHECK((d.pool[0].density.newest_mean() - f * mean).norm() < 1e-12);
        CHECK((d.pool[0].density.newest_cov() - (f * p * f.transpose() + q)).norm() < 1e-12);
        CHECK(d.pool[0].density.alive_prob == doctest::Approx(0.99));
    }
}

TEST_CASE("empty measurement set applies the misdetection Bayes update") {
    const BsConfig bs = wide_bs();
    const FilterConfig cfg = filter_cfg(bs);
    TpmbmDensity d = TpmbmDensity::empty();
    Vec6 mean;
    mean << 30, 0, 0, 0, 0, 0;  // inside the FoV, p_D = 0.9
    d.pool.push_back(bern_at(mean, Mat6::Identity(), 0.5));
    d.hypotheses[0].bernoulli_refs = {0};

    MeasurementSet empty;
    update(d, empty, bs, cfg);
    REQUIRE(d.hypotheses.size() == 1);
    CHECK(d.hypotheses[0].weight == doctest::Approx(1.0));
    REQUIRE(d.hypotheses[0].bernoulli_refs.size() == 1);
    const double r = d.pool[d.hypotheses[0].bernoulli_refs[0]].existence;
    CHECK(r == doctest::Approx(0.5 * 0.1 / (1.0 - 0.45)).epsilon(1e-12));
    CHECK(r == doctest::Approx(0.0909).epsilon(1e-3));
}

TEST_CASE("gate") {
    const BsConfig bs = wide_bs();
    const FilterConfig cfg = filter_cfg(bs);
    Vec6 mean;
    mean << 40, 10, 2, 1, 0, 0;
    const Mat6 p = 1e-4 * Mat6::Identity();
    const TrajectoryBernoulli b = bern_at(mean, p, 0.9);

    SUBCASE("predicted measurement passes") {
        CHECK(gate(b, measurement_fn(bs, mean.head<3>()), bs, cfg));
    }

    SUBCASE("threshold boundary") {
        const auto h = measurement_jacobian(bs, mean.head<3>());
        Mat3 s = h * p * h.transpose() + bs.measurement_noise_cov;
        const Mat3 l = s.llt().matrixL();
        const Measurement zhat = measurement_fn(bs, mean.head<3>());
        for (double m2 : {cfg.gate_threshold - 0.01, cfg.gate_threshold + 0.01}) {
            const Vec3 innov = std::sqrt(m2) * (l * Vec3(1, 0, 0));
            Measurement z = zhat;
            z.toa += innov(0);
            z.azimuth += innov(1);
            z.elevation += innov(2);
            CHECK(gate(b, z, bs, cfg) == (m2 <= cfg.gate_threshold));
        }
    }

    SUBCASE("acceptance rate of true detections") {
        RngStream rng(9);
        int accepted = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            accepted += gate(b, noisy_measurement(bs, mean.head<3>(), rng), bs, cfg) ? 1 : 0;
        CHECK(accepted >= static_cast<int>(0.998 * n));
    }
}

TEST_CASE("far measurement is never associated with an existing track") {
    const BsConfig bs = wide_bs();
    FilterConfig cfg = filter_cfg(bs);
    cfg.birth.clear();  // no new-target support: far measurement must go to clutter
    TpmbmDensity d = TpmbmDensity::empty();
    Vec6 mean;
    mean << 30, 0, 0, 0, 0, 0;
    d.pool.push_back(bern_at(mean, Mat6::Identity(), 0.8));
    d.hypotheses[0].bernoulli_refs = {0};

    MeasurementSet z;
    z.items.push_back(measurement_fn(bs, Vec3(-150.0, 80.0, 5.0)));
    update(d, z, bs, cfg);

    // the surviving track's existence must follow the misdetection formula
    const double expect = 0.8 * 0.1 / (1.0 - 0.8 * 0.9);
    bool found = false;
    for (const auto& b : d.pool)
        if (std::abs(b.existence - expect) < 1e-9) found = true;
    CHECK(found);
    // no pool entry carries existence 1 (which a detection update would set)
    for (const auto& b : d.pool) CHECK(b.existence < 0.999);
}

TEST_CASE("hypothesis weights normalize and existences stay in range") {
    const BsConfig bs = wide_bs();
    const FilterConfig cfg = filter_cfg(bs);
    MotionConfig motion;
    RngStream truth_rng(12), meas_rng(13);

    TpmbmDensity d = TpmbmDensity::empty();
    Vec3 pos(50, 20, 1.5);
    const Vec3 vel(-2, 0.5, 0);
    for (int step = 1; step <= 15; ++step) {
        predict(d, motion, cfg, step);
        MeasurementSet z;
        z.time_step = step;
        z.items.push_back(noisy_measurement(bs, pos, meas_rng));
        // some clutter
        const int n_c = meas_rng.poisson(3.0);
        for (int c = 0; c < n_c; ++c) {
            Measurement m;
            m.toa = meas_rng.uniform(0.0, 2.0 * bs.fov_radius / kSpeedOfLight);
            m.azimuth = meas_rng.uniform(-3.14, 3.14);
            m.elevation = meas_rng.uniform(-1.5, 1.5);
            z.items.push_back(m);
        }
        update(d, z, bs, cfg);

        double sum = 0.0;
        for (const auto& h : d.hypotheses) sum += h.weight;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        for (const auto& b : d.pool) {
            CHECK(b.existence >= -1e-12);
            CHECK(b.existence <= 1.0 + 1e-12);
            CHECK(b.density.alive_prob >= -1e-12);
            CHECK(b.density.alive_prob <= 1.0 + 1e-12);
        }
        pos += motion.dt * vel;
    }
}

TEST_CASE("measurement permutation leaves the posterior invariant") {
    const BsConfig bs = wide_bs();
    const FilterConfig cfg = filter_cfg(bs);
    MotionConfig motion;
    RngStream rng(21);

    auto build = [&] {
        TpmbmDensity d = TpmbmDensity::empty();
        predict(d, motion, cfg, 1);
        return d;
    };
    MeasurementSet z;
    z.time_step = 1;
    z.items.push_back(noisy_measurement(bs, Vec3(40, 10, 1), rng));
    z.items.push_back(noisy_measurement(bs, Vec3(-30, 50, 2), rng));
    z.items.push_back(noisy_measurement(bs, Vec3(10, -60, 0), rng));

    MeasurementSet z_perm = z;
    std::swap(z_perm.items[0], z_perm.items[2]);

    TpmbmDensity a = build(), b = build();
    update(a, z, bs, cfg);
    update(b, z_perm, bs, cfg);

    auto weights = [](const TpmbmDensity& d) {
        std::vector<double> w;
        for (const auto& h : d.hypotheses) w.push_back(h.weight);
        std::sort(w.begin(), w.end());
        return w;
    };
    auto existences = [](const TpmbmDensity& d) {
        std::vector<double> r;
        for (const auto& bn : d.pool) r.push_back(bn.existence);
        std::sort(r.begin(), r.end());
        return r;
    };
    const auto wa = weights(a), wb = weights(b);
    REQUIRE(wa.size() == wb.size());
    for (size_t i = 0; i < wa.size(); ++i) CHECK(wa[i] == doctest::Approx(wb[i]).epsilon(1e-12));
    const auto ra = existences(a), rb = existences(b);
    REQUIRE(ra.size() == rb.size());
    for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i] == doctest::Approx(rb[i]).epsilon(1e-12));
}

TEST_CASE("more clutter never raises a new target's existence") {
    BsConfig bs = wide_bs();
    const MotionConfig motion;
    RngStream rng(31);
    const Measurement z1 = noisy_measurement(bs, Vec3(40, 10, 1), rng);

    auto new_target_existence = [&](double clutter_rate) {
        BsConfig b = bs;
        b.clutter_rate = clutter_rate;
        FilterConfig cfg = filter_cfg(b);
        TpmbmDensity d = TpmbmDensity::empty();
        predict(d, motion, cfg, 1);
        MeasurementSet z;
        z.time_step = 1;
        z.items.push_back(z1);
        update(d, z, b, cfg);
        double best = 0.0;
        for (const auto& bn : d.pool) best = std::max(best, bn.existence);
        return best;
    };

    double prev = 1.0;
    for (double rate : {0.5, 1.0, 3.0, 10.0, 30.0}) {
        const double r = new_target_existence(rate);
        CHECK(r <= prev + 1e-12);
        prev = r;
    }
}

TEST_CASE("extract_estimates") {
    const BsConfig bs = wide_bs();
    FilterConfig cfg = filter_cfg(bs);

    SUBCASE("everything below threshold yields nothing") {
        TpmbmDensity d = TpmbmDensity::empty();
        Vec6 m = Vec6::Zero();
        m(0) = 20;
        d.pool.push_back(bern_at(m, Mat6::Identity(), 0.4));
        d.hypotheses[0].bernoulli_refs = {0};
        CHECK(extract_estimates(d, cfg).empty());
        CHECK(extract_estimates(TpmbmDensity{}, cfg).empty());
    }

    SUBCASE("confident track is returned") {
        TpmbmDensity d = TpmbmDensity::empty();
        Vec6 m = Vec6::Zero();
        m(0) = 20;
        d.pool.push_back(bern_at(m, Mat6::Identity(), 0.9));
        d.hypotheses[0].bernoulli_refs = {0};
        const auto est = extract_estimates(d, cfg);
        REQUIRE(est.size() == 1);
        CHECK((est[0].states[0].x - m).norm() == 0.0);
    }

    SUBCASE("only the argmax hypothesis contributes") {
        TpmbmDensity d;
        Vec6 m1 = Vec6::Zero(), m2 = Vec6::Zero();
        m1(0) = 20;
        m2(0) = -20;
        d.pool.push_back(bern_at(m1, Mat6::Identity(), 0.9));
        d.pool.push_back(bern_at(m2, Mat6::Identity(), 0.9));
        d.hypotheses.push_back({0.7, {0}});
        d.hypotheses.push_back({0.3, {1}});
        const auto est = extract_estimates(d, cfg);
        REQUIRE(est.size() == 1);
        CHECK(est[0].states[0].x(0) == 20.0);
    }
}

TEST_CASE("single-target p_D=1 zero-clutter run matches a standalone EKF") {
    BsConfig bs = wide_bs();
    bs.detection_prob_inside = 1.0;
    bs.clutter_rate = 0.0;
    FilterConfig cfg = filter_cfg(bs);
    cfg.gate_threshold = 1e9;
    MotionConfig motion;
    motion.survival_prob = 1.0;

    const Mat6 f = cv_transition_matrix(motion);
    const Mat6 q = process_noise_cov(motion);

    RngStream rng(55);
    Vec3 pos(30, 5, 1.5);
    const Vec3 vel(-2, 1, 0);

    TpmbmDensity d = TpmbmDensity::empty();
    Vec6 ekf_m;
    Mat6 ekf_p;
    bool ekf_init = false;

    for (int step = 1; step <= 60; ++step) {
        predict(d, motion, cfg, step);
        const Measurement z = noisy_measurement(bs, pos, rng);
        MeasurementSet zs;
        zs.time_step = step;
        zs.items.push_back(z);
        update(d, zs, bs, cfg);

        REQUIRE(d.hypotheses.size() >= 1);
        CHECK(d.hypotheses[0].weight == doctest::Approx(1.0).epsilon(1e-9));
        REQUIRE(d.hypotheses[0].bernoulli_refs.size() == 1);
        const auto& track = d.pool[d.hypotheses[0].bernoulli_refs[0]];
        CHECK(track.existence == doctest::Approx(1.0).epsilon(1e-12));

        if (!ekf_init) {
            // anchor the oracle at the filter's birth posterior
            ekf_m = track.density.newest_mean();
            ekf_p = track.density.newest_cov();
            ekf_init = true;
        } else {
            // independent EKF recursion: predict, then linearized update
            ekf_m = f * ekf_m;
            ekf_p = f * ekf_p * f.transpose() + q;
            const auto h = measurement_jacobian(bs, ekf_m.head<3>());
            const Measurement zhat = measurement_fn(bs, ekf_m.head<3>());
            Vec3 innov = z.vec() - zhat.vec();
            innov(1) = wrap_angle(innov(1));
            const Mat3 s = h * ekf_p * h.transpose() + bs.measurement_noise_cov;
            const Eigen::Matrix<double, 6, 3> k = ekf_p * h.transpose() * s.inverse();
            ekf_m += k * innov;
            ekf_p = ekf_p - k * h * ekf_p;
            ekf_p = 0.5 * (ekf_p + ekf_p.transpose()).eval();

            CHECK((track.density.newest_mean() - ekf_m).norm() < 1e-9);
            CHECK((track.density.newest_cov() - ekf_p).norm() < 1e-9);
        }
        pos += motion.dt * vel;
    }
}
