#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "disac/motion.hpp"
#include "disac/rng.hpp"
#include "disac/trajectory.hpp"

using namespace disac;

namespace {

TrajectoryBernoulli make_bern(double r, uint64_t uid) {
    TrajectoryBernoulli b;
    b.existence = r;
    b.track_uid = uid;
    b.density = TrajectoryGaussian::single(1, Vec6::Zero(), Mat6::Identity(), 5);
    return b;
}

Mat6 random_spd(RngStream& rng) {
    Mat6 a;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) a(i, j) = rng.uniform(-1, 1);
    return a * a.transpose() + 0.1 * Mat6::Identity();
}

}  // namespace

TEST_CASE("normalize_hypotheses") {
    TpmbmDensity d;
    d.hypotheses.push_back({2.0, {}});
    d.hypotheses.push_back({2.0, {}});
    normalize_hypotheses(d);
    CHECK(d.hypotheses[0].weight == doctest::Approx(0.5));
    CHECK(d.hypotheses[1].weight == doctest::Approx(0.5));

    TpmbmDensity single;
    single.hypotheses.push_back({0.3, {}});
    normalize_hypotheses(single);
    CHECK(single.hypotheses[0].weight == doctest::Approx(1.0));

    TpmbmDensity pair;
    pair.hypotheses.push_back({1.0, {}});
    pair.hypotheses.push_back({3.0, {}});
    normalize_hypotheses(pair);
    CHECK(pair.hypotheses[0].weight == doctest::Approx(0.25));
    CHECK(pair.hypotheses[1].weight == doctest::Approx(0.75));

    TpmbmDensity zero;
    zero.hypotheses.push_back({0.0, {}});
    CHECK_THROWS_AS(normalize_hypotheses(zero), std::runtime_error);
}

TEST_CASE("prune removes weak ppp components") {
    TpmbmDensity d = TpmbmDensity::empty();
    PppComponent weak;
    weak.weight = 1e-6;
    weak.density = TrajectoryGaussian::single(1, Vec6::Zero(), Mat6::Identity(), 5);
    PppComponent strong = weak;
    strong.weight = 0.5;
    d.ppp = {weak, strong};
    prune(d, 1e-5, 1e-5, 200);
    REQUIRE(d.ppp.size() == 1);
    CHECK(d.ppp[0].weight == 0.5);
}

TEST_CASE("prune caps hypotheses at the top weights") {
    TpmbmDensity d;
    for (int i = 0; i < 250; ++i) {
        d.pool.push_back(make_bern(0.9, static_cast<uint64_t>(i + 1)));
        d.hypotheses.push_back({static_cast<double>(i + 1), {i}});
    }
    prune(d, 1e-5, 1e-5, 200);
    REQUIRE(d.hypotheses.size() == 200);
    // the survivors are the 200 largest prior weights, renormalized
    double sum = 0.0;
    for (const auto& h : d.hypotheses) sum += h.weight;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // top prior weight 250 survives with the largest share
    CHECK(d.hypotheses[0].weight >= d.hypotheses.back().weight);
    // every surviving reference resolves
    for (const auto& h : d.hypotheses)
        for (int ref : h.bernoulli_refs) CHECK(ref < static_cast<int>(d.pool.size()));
}

TEST_CASE("prune leaves a clean density unchanged up to renormalization") {
    TpmbmDensity d;
    d.pool.push_back(make_bern(0.8, 1));
    d.pool.push_back(make_bern(0.6, 2));
    d.hypotheses.push_back({0.7, {0, 1}});
    d.hypotheses.push_back({0.3, {0}});
    PppComponent c;
    c.weight = 0.05;
    c.density = TrajectoryGaussian::single(1, Vec6::Zero(), Mat6::Identity(), 5);
    d.ppp.push_back(c);

    prune(d, 1e-5, 1e-5, 200);
    REQUIRE(d.pool.size() == 2);
    REQUIRE(d.hypotheses.size() == 2);
    REQUIRE(d.ppp.size() == 1);
    CHECK(d.hypotheses[0].weight == doctest::Approx(0.7));
    CHECK(d.hypotheses[1].weight == doctest::Approx(0.3));
}

TEST_CASE("prune drops weak bernoullis and remaps shared references") {
    TpmbmDensity d;
    d.pool.push_back(make_bern(1e-7, 1));  // below threshold
    d.pool.push_back(make_bern(0.9, 2));
    d.hypotheses.push_back({0.6, {0, 1}});
    d.hypotheses.push_back({0.4, {1}});
    prune(d, 1e-5, 1e-5, 200);
    REQUIRE(d.pool.size() == 1);
    CHECK(d.pool[0].track_uid == 2);
    // both hypotheses now reference the same surviving pool entry
    REQUIRE(d.hypotheses.size() >= 1);
    for (const auto& h : d.hypotheses)
        for (int ref : h.bernoulli_refs) CHECK(d.pool[ref].track_uid == 2);
}

TEST_CASE("window_append_predict matches Kalman prediction on the newest marginal") {
    const MotionConfig motion;  // defaults: dt 0.1
    const Mat6 f = cv_transition_matrix(motion);
    const Mat6 q = process_noise_cov(motion);

    RngStream rng(4);
    Vec6 m0;
    for (int i = 0; i < 6; ++i) m0(i) = rng.uniform(-5, 5);
    const Mat6 p0 = random_spd(rng);

    TrajectoryGaussian g = TrajectoryGaussian::single(1, m0, p0, 5);
    window_append_predict(g, f, q);
    CHECK(g.window_states() == 2);
    CHECK((g.newest_mean() - f * m0).norm() < 1e-12);
    CHECK((g.newest_cov() - (f * p0 * f.transpose() + q)).norm() < 1e-12);
    // the old state's marginal is untouched
    CHECK((g.mean.head<6>() - m0).norm() == 0.0);
    CHECK((g.cov.topLeftCorner<6, 6>() - p0).norm() == 0.0);
}

TEST_CASE("lscan_slide marginalization") {
    const MotionConfig motion;
    const Mat6 f = cv_transition_matrix(motion);
    const Mat6 q = process_noise_cov(motion);
    RngStream rng(5);

    SUBCASE("window shorter than L: no-op") {
        TrajectoryGaussian g = TrajectoryGaussian::single(1, Vec6::Ones(), Mat6::Identity(), 5);
        window_append_predict(g, f, q);
        const auto before = g.mean;
        lscan_slide(g);
        CHECK(g.frozen_history.empty());
        CHECK(g.mean.size() == before.size());
    }

    SUBCASE("block-diagonal joint: slide removes exactly the oldest block") {
        TrajectoryGaussian g;
        g.birth_step = 1;
        g.end_step = 3;
        g.window_len = 2;
        g.mean = Eigen::VectorXd::Zero(18);
        g.cov = Eigen::MatrixXd::Zero(18, 18);
        for (int s = 0; s < 3; ++s) {
            g.mean.segment<6>(6 * s).setConstant(s + 1.0);
            g.cov.block<6, 6>(6 * s, 6 * s) = (s + 1.0) * Mat6::Identity();
        }
        lscan_slide(g);
        REQUIRE(g.window_states() == 2);
        REQUIRE(g.frozen_history.size() == 1);
        CHECK((g.frozen_history[0] - Vec6::Constant(1.0)).norm() == 0.0);
        CHECK((g.mean.head<6>() - Vec6::Constant(2.0)).norm() == 0.0);
        CHECK((g.cov.topLeftCorner<6, 6>() - 2.0 * Mat6::Identity()).norm() == 0.0);
        CHECK((g.cov.bottomRightCorner<6, 6>() - 3.0 * Mat6::Identity()).norm() == 0.0);
    }

    SUBCASE("generic joint: sliding equals brute-force marginalization over 10 steps") {
        Vec6 m0;
        for (int i = 0; i < 6; ++i) m0(i) = rng.uniform(-3, 3);
        const Mat6 p0 = random_spd(rng);
        TrajectoryGaussian wide = TrajectoryGaussian::single(1, m0, p0, 20);  // never slides
        TrajectoryGaussian narrow = TrajectoryGaussian::single(1, m0, p0, 5);
        for (int step = 2; step <= 10; ++step) {
            window_append_predict(wide, f, q);
            window_append_predict(narrow, f, q);
        }
        REQUIRE(wide.window_states() == 10);
        REQUIRE(narrow.window_states() == 5);
        REQUIRE(narrow.frozen_history.size() == 5);
        // newest-5 marginal of the full joint
        const auto sub_mean = wide.mean.tail(30);
        const auto sub_cov = wide.cov.bottomRightCorner(30, 30);
        CHECK((narrow.mean - sub_mean).norm() < 1e-10);
        CHECK((narrow.cov - sub_cov).norm() < 1e-10);
        // frozen means equal the marginal means of the discarded states
        for (int s = 0; s < 5; ++s)
            CHECK((narrow.frozen_history[s] - wide.mean.segment<6>(6 * s)).norm() < 1e-10);
    }
}

TEST_CASE("map_trajectory_estimate") {
    SUBCASE("single-state window") {
        TrajectoryBernoulli b = make_bern(0.9, 1);
        b.density.mean = (Vec6() << 1, 2, 3, 4, 5, 6).finished();
        const TrajectoryState t = map_trajectory_estimate(b);
        CHECK(t.birth_step == 1);
        CHECK(t.end_step == 1);
        REQUIRE(t.states.size() == 1);
        CHECK((t.states[0].x - b.density.mean).norm() == 0.0);
    }

    SUBCASE("eight states with a five-state window") {
        const MotionConfig motion;
        const Mat6 f = cv_transition_matrix(motion);
        const Mat6 q = process_noise_cov(motion);
        TrajectoryBernoulli b = make_bern(0.9, 1);
        b.density = TrajectoryGaussian::single(1, Vec6::Ones(), Mat6::Identity(), 5);
        for (int step = 2; step <= 8; ++step) window_append_predict(b.density, f, q);
        const TrajectoryState t = map_trajectory_estimate(b);
        CHECK(t.birth_step == 1);
        CHECK(t.end_step == 8);
        CHECK(t.states.size() == 8);
    }

    SUBCASE("zero-covariance round trip reproduces the sequence") {
        const MotionConfig motion;
        const Mat6 f = cv_transition_matrix(motion);
        TrajectoryBernoulli b = make_bern(1.0, 1);
        Vec6 x0;
        x0 << 0, 0, 0, 2, -1, 0;
        b.density = TrajectoryGaussian::single(1, x0, Mat6::Zero(), 3);
        std::vector<Vec6> expected{x0};
        for (int step = 2; step <= 6; ++step) {
            window_append_predict(b.density, f, Mat6::Zero());
            expected.push_back(f * expected.back());
        }
        const TrajectoryState t = map_trajectory_estimate(b);
        REQUIRE(t.states.size() == expected.size());
        for (size_t i = 0; i < expected.size(); ++i)
            CHECK((t.states[i].x - expected[i]).norm() < 1e-12);
    }
}
