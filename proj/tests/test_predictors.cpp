#include <doctest.h>

#include <gpfuse/predictors.hpp>

#include "oracles.hpp"
#include "test_support.hpp"

using namespace gpfuse;
using namespace gpfuse::testing;

namespace {

struct Instance {
    Hyperparams h;
    SupportSet s;
    std::vector<Dataset> blocks;
    std::vector<LocalSummary> locals;
    GlobalSummary global;
};

Instance make_instance(Rng& rng, int max_agents = 4, bool ensure_data = true) {
    Instance inst;
    inst.h = rand_hyper(rng);
    inst.s = rand_support(rng, 80, 5 + static_cast<int>(rng.uniform_int(14)), 0, 50);
    const int n = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(max_agents)));
    for (int i = 0; i < n; ++i) {
        const int m = static_cast<int>(rng.uniform_int(31));
        inst.blocks.push_back(rand_dataset(rng, (ensure_data && i == 0) ? std::max(m, 1) : m, 0, 50));
    }
    for (const Dataset& b : inst.blocks)
        inst.locals.push_back(build_local_summary(b, inst.s, inst.h));
    inst.global = aggregate_global(inst.locals, inst.s, inst.h);
    return inst;
}

} // namespace

TEST_CASE("gpddf recovers the prior from the no-data global summary") {
    Rng rng(60);
    const Hyperparams h = rand_hyper(rng);
    const SupportSet s = rand_support(rng, 81, 9, 0, 50);
    const GlobalSummary g = aggregate_global({}, s, h);
    const PredictiveDistribution p = gpddf_predict(g, rand_location(rng, 0, 50), s, h);
    CHECK(p.mean == doctest::Approx(h.prior_mean).epsilon(1e-10));
    CHECK(p.variance ==
          doctest::Approx(h.signal_var + h.noise_var).epsilon(1e-8));
}

TEST_CASE("gpddf equals the reference model across random instances") {
    Rng rng(61);
    for (int t = 0; t < 40; ++t) {
        const Instance inst = make_instance(rng);
        for (int q = 0; q < 4; ++q) {
            const Location x = rand_location(rng, 0, 50);
            const PredictiveDistribution got = gpddf_predict(inst.global, x, inst.s, inst.h);
            const PredictiveDistribution want = pitc_predict(inst.blocks, inst.s, x, inst.h);
            CHECK(got.mean == doctest::Approx(want.mean).epsilon(0).scale(1).epsilon(1e-9));
            CHECK(std::abs(got.mean - want.mean) < 1e-8);
            CHECK(std::abs(got.variance - want.variance) < 1e-8);
        }
    }
}

TEST_CASE("gpddf rejects a mismatched support") {
    Rng rng(62);
    const Instance inst = make_instance(rng);
    SupportSet other = inst.s;
    other.id = 999;
    CHECK_THROWS_AS(gpddf_predict(inst.global, Location(1, 1), other, inst.h), ArgumentError);
}

TEST_CASE("gpddfplus with empty own data degenerates to gpddf") {
    Rng rng(63);
    for (int t = 0; t < 10; ++t) {
        const Instance inst = make_instance(rng);
        const LocalSummary empty_local = LocalSummary::zero(inst.s);
        const Dataset no_data;
        const Location x = rand_location(rng, 0, 50);
        const PredictiveDistribution plus =
            gpddfplus_predict(inst.global, empty_local, no_data, x, inst.s, inst.h);
        const PredictiveDistribution plain = gpddf_predict(inst.global, x, inst.s, inst.h);
        CHECK(plus.mean == doctest::Approx(plain.mean).epsilon(1e-10));
        CHECK(plus.variance == doctest::Approx(plain.variance).epsilon(1e-10));
    }
}

TEST_CASE("gpddfplus equals the PIC reference across random instances") {
    Rng rng(64);
    for (int t = 0; t < 40; ++t) {
        const Instance inst = make_instance(rng);
        const int qb = static_cast<int>(rng.uniform_int(inst.blocks.size()));
        for (int q = 0; q < 3; ++q) {
            const Location x = rand_location(rng, 0, 50);
            const PredictiveDistribution got =
                gpddfplus_predict(inst.global, inst.locals[static_cast<std::size_t>(qb)],
                                  inst.blocks[static_cast<std::size_t>(qb)], x, inst.s, inst.h);
            const PredictiveDistribution want =
                pic_predict(inst.blocks, inst.s, x, qb, inst.h);
            CHECK(std::abs(got.mean - want.mean) < 1e-8);
            CHECK(std::abs(got.variance - want.variance) < 1e-8);
        }
    }
}

TEST_CASE("pitc with one empty block returns the prior") {
    Rng rng(65);
    const Hyperparams h = rand_hyper(rng);
    const SupportSet s = rand_support(rng, 82, 8, 0, 50);
    const std::vector<Dataset> blocks{Dataset{}};
    const PredictiveDistribution p = pitc_predict(blocks, s, rand_location(rng, 0, 50), h);
    CHECK(p.mean == doctest::Approx(h.prior_mean).epsilon(1e-12));
    CHECK(p.variance == doctest::Approx(h.signal_var + h.noise_var).epsilon(1e-12));
}

TEST_CASE("pitc with support equal to data locations matches the full GP") {
    Rng rng(66);
    for (int t = 0; t < 15; ++t) {
        Hyperparams h = rand_hyper(rng);
        h.length_scales = Eigen::VectorXd::Constant(2, rng.uniform(1.0, 4.0));
        const Dataset d = rand_dataset(rng, 10, 0, 50);
        SupportSet s;
        s.id = 83;
        s.points = d.locations;
        for (int q = 0; q < 3; ++q) {
            const Location x = rand_location(rng, 0, 50);
            const PredictiveDistribution got = pitc_predict({&d, 1}, s, x, h);
            const PredictiveDistribution want = full_gp_predict(x, d, h);
            CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-6).scale(1.0));
            CHECK(std::abs(got.variance - want.variance) < 1e-6);
        }
    }
}

TEST_CASE("pic mirrors pitc behaviour in the degenerate cases") {
    Rng rng(67);
    const Hyperparams h = rand_hyper(rng);
    const SupportSet s = rand_support(rng, 84, 8, 0, 50);
    const std::vector<Dataset> empty{Dataset{}};
    const PredictiveDistribution p = pic_predict(empty, s, Location(1, 1), 0, h);
    CHECK(p.mean == doctest::Approx(h.prior_mean).epsilon(1e-12));

    // support = data: PIC's exact block makes it the full GP too
    const Dataset d = rand_dataset(rng, 8, 0, 50);
    SupportSet sd;
    sd.id = 85;
    sd.points = d.locations;
    const Location x = rand_location(rng, 0, 50);
    const PredictiveDistribution got = pic_predict({&d, 1}, sd, x, 0, h);
    const PredictiveDistribution want = full_gp_predict(x, d, h);
    CHECK(std::abs(got.mean - want.mean) < 1e-6);
    CHECK(std::abs(got.variance - want.variance) < 1e-6);

    CHECK_THROWS_AS(pic_predict({&d, 1}, sd, x, 3, h), ArgumentError);
}

TEST_CASE("local_gp_predict covers the empty and full cases") {
    Rng rng(68);
    const Hyperparams h = rand_hyper(rng);
    const PredictiveDistribution prior = local_gp_predict(Dataset{}, Location(3, 3), h);
    CHECK(prior.mean == h.prior_mean);
    CHECK(prior.variance == h.signal_var + h.noise_var);

    const Dataset d = rand_dataset(rng, 9, 0, 50);
    const Location x = rand_location(rng, 0, 50);
    const PredictiveDistribution a = local_gp_predict(d, x, h);
    const PredictiveDistribution b = full_gp_predict(x, d, h);
    CHECK(a.mean == b.mean);
    CHECK(a.variance == b.variance);
}

TEST_CASE("two-area local GPs equal per-area full GPs") {
    Rng rng(69);
    const Hyperparams h = rand_hyper(rng);
    const Dataset left = rand_dataset(rng, 8, 0, 25);
    const Dataset right = rand_dataset(rng, 8, 25, 50);
    const Location x(10.0, 10.0);
    const PredictiveDistribution got = local_gp_predict(left, x, h);
    const PredictiveDistribution want = oracles::gp_regression(x, left, h);
    CHECK(got.mean == doctest::Approx(want.mean).epsilon(1e-9));
    const PredictiveDistribution got_r = local_gp_predict(right, Location(40.0, 40.0), h);
    const PredictiveDistribution want_r = oracles::gp_regression(Location(40.0, 40.0), right, h);
    CHECK(got_r.mean == doctest::Approx(want_r.mean).epsilon(1e-9));
}

TEST_CASE("all predictors return variances inside the valid band") {
    Rng rng(70);
    for (int t = 0; t < 20; ++t) {
        const Instance inst = make_instance(rng);
        const Location x = rand_location(rng, 0, 50);
        const double hi = inst.h.signal_var + inst.h.noise_var + 1e-9;
        CHECK(gpddf_predict(inst.global, x, inst.s, inst.h).variance <= hi);
        CHECK(pitc_predict(inst.blocks, inst.s, x, inst.h).variance <= hi);
        CHECK(pitc_predict(inst.blocks, inst.s, x, inst.h).variance >= 0.0);
        const PredictiveDistribution plus = gpddfplus_predict(
            inst.global, inst.locals[0], inst.blocks[0], x, inst.s, inst.h);
        CHECK(plus.variance <= hi);
        CHECK(plus.variance >= 0.0);
    }
}

TEST_CASE("batch prediction agrees with pointwise calls") {
    Rng rng(71);
    const Instance inst = make_instance(rng);
    std::vector<Location> xs;
    for (int i = 0; i < 10; ++i) xs.push_back(rand_location(rng, 0, 50));
    const auto batch = gpddf_predict_batch(inst.global, xs, inst.s, inst.h);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const PredictiveDistribution p = gpddf_predict(inst.global, xs[i], inst.s, inst.h);
        CHECK(batch[i].mean == p.mean);
        CHECK(batch[i].variance == p.variance);
    }
    const auto bplus =
        gpddfplus_predict_batch(inst.global, inst.locals[0], inst.blocks[0], xs, inst.s, inst.h);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const PredictiveDistribution p = gpddfplus_predict(
            inst.global, inst.locals[0], inst.blocks[0], xs[i], inst.s, inst.h);
        CHECK(bplus[i].mean == p.mean);
        CHECK(bplus[i].variance == p.variance);
    }
}
