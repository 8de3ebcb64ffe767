#include <doctest.h>

#include <algorithm>
#include <set>

#include "fixtures.hpp"
#include "pinnbridge/core.hpp"
#include "pinnbridge/error.hpp"

using namespace pinnbridge;

namespace {

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::ContractError;
}

Dataset numbered(std::size_t n) {
    Dataset ds;
    for (std::size_t i = 0; i < n; ++i) {
        BridgeSample s;
        s.params = fixtures::default_bridge();
        s.weight_g = 1.0 + static_cast<double>(i);
        ds.samples.push_back(s);
    }
    return ds;
}

}  // namespace

TEST_SUITE("core") {

TEST_CASE("feature vector of the default bridge") {
    const auto v = to_feature_vector(fixtures::default_bridge());
    const FeatureVector want{20, 1000, 50, 1.9, 45, 1.4, 3.8, 30};
    for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(v[i] == doctest::Approx(want[i]).epsilon(1e-15));
}

TEST_CASE("single beam gives equal total and mean length") {
    BridgeParameters p;
    p.geometry.beam_count = 1;
    p.geometry.beam_lengths_mm = {100.0};
    const auto v = to_feature_vector(p);
    CHECK(v[static_cast<std::size_t>(Feature::TotalLength)] == 100.0);
    CHECK(v[static_cast<std::size_t>(Feature::MeanLength)] == 100.0);
}

TEST_CASE("empty lengths are invalid geometry") {
    auto p = fixtures::default_bridge();
    p.geometry.beam_lengths_mm.clear();
    CHECK(kind_of([&] { to_feature_vector(p); }) == ErrorKind::InvalidGeometry);
    CHECK(kind_of([&] { p.validate(); }) == ErrorKind::InvalidGeometry);
}

TEST_CASE("geometry validation") {
    auto p = fixtures::default_bridge();
    CHECK_FALSE(p.validate());

    auto q = p;
    q.geometry.beam_count = 0;
    CHECK(kind_of([&] { q.validate(); }) == ErrorKind::InvalidGeometry);

    q = p;
    q.geometry.beam_count = 19;
    CHECK(kind_of([&] { q.validate(); }) == ErrorKind::InvalidGeometry);

    q = p;
    q.geometry.beam_lengths_mm[3] = -1.0;
    CHECK(kind_of([&] { q.validate(); }) == ErrorKind::InvalidGeometry);

    q = p;
    q.geometry.mean_angle_deg = 91.0;
    CHECK(kind_of([&] { q.validate(); }) == ErrorKind::InvalidGeometry);

    q = p;
    q.geometry.beam_diameter_mm = 2.5;
    CHECK(q.validate());  // outside the strand band: warning only

    q = p;
    q.material.density_g_cm3 = 0.0;
    CHECK(kind_of([&] { q.validate(); }) == ErrorKind::InvalidMaterial);
}

TEST_CASE("aggregate geometry round-trips through the feature vector") {
    const FeatureVector v{12, 600, 50, 1.85, 37, 1.4, 3.8, 30};
    const auto p = from_feature_vector(v);
    CHECK(p.geometry.beam_lengths_mm.empty());
    REQUIRE(p.geometry.aggregate);
    CHECK(to_feature_vector(p) == v);
}

TEST_CASE("feature schema is stable") {
    CHECK(feature_names().size() == kFeatureCount);
    CHECK(feature_names()[0] == "beam_count");
    CHECK(feature_schema_hash() == feature_schema_hash());
    CHECK_FALSE(feature_schema_hash().empty());
}

TEST_CASE("standardization of slot values {0, 2}") {
    FeatureVector a{}, b{};
    a.fill(0.0);
    b.fill(2.0);
    const auto s = standardize_fit({a, b});
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(s.mean[i] == 1.0);
        CHECK(s.std[i] == 1.0);
        CHECK_FALSE(s.degenerate[i]);
    }
}

TEST_CASE("identical vectors flag every slot") {
    const auto v = to_feature_vector(fixtures::default_bridge());
    const auto s = standardize_fit({v, v});
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(s.degenerate[i]);
        CHECK(s.std[i] == 1.0);
    }
}

TEST_CASE("standardization needs two vectors") {
    CHECK(kind_of([] { standardize_fit({FeatureVector{}}); }) == ErrorKind::InsufficientData);
}

TEST_CASE("standardize apply and invert") {
    FeatureVector a{1, 2, 3, 4, 5, 6, 7, 8}, b{3, 6, 9, 12, 15, 18, 21, 24}, c{2, 2, 2, 2, 2, 2, 2, 2};
    const auto s = standardize_fit({a, b, c});
    const auto z = standardize_apply(s.mean, s);
    for (double x : z) CHECK(x == 0.0);

    FeatureVector up{};
    for (std::size_t i = 0; i < kFeatureCount; ++i) up[i] = s.mean[i] + s.std[i];
    for (double x : standardize_apply(up, s)) CHECK(x == doctest::Approx(1.0).epsilon(1e-14));

    const auto back = standardize_invert(standardize_apply(b, s), s);
    for (std::size_t i = 0; i < kFeatureCount; ++i) CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-14));
}

TEST_CASE("split sizes") {
    const auto ds = split_train_test(numbered(100), 0.2, 42);
    REQUIRE(ds.split);
    CHECK(ds.split->train.size() == 80);
    CHECK(ds.split->test.size() == 20);

    const auto small = split_train_test(numbered(5), 0.2, 1);
    CHECK(small.split->train.size() == 4);
    CHECK(small.split->test.size() == 1);
}

TEST_CASE("split is a deterministic partition") {
    const auto a = split_train_test(numbered(37), 0.3, 9);
    const auto b = split_train_test(numbered(37), 0.3, 9);
    CHECK(a.split->train == b.split->train);
    CHECK(a.split->test == b.split->test);

    std::set<std::size_t> all(a.split->train.begin(), a.split->train.end());
    all.insert(a.split->test.begin(), a.split->test.end());
    CHECK(all.size() == 37);
    CHECK(*all.rbegin() == 36);

    const auto c = split_train_test(numbered(37), 0.3, 10);
    CHECK(c.split->test != a.split->test);
}

TEST_CASE("split rejects tiny datasets and bad fractions") {
    CHECK(kind_of([] { split_train_test(numbered(4), 0.2, 1); }) == ErrorKind::InsufficientData);
    CHECK(kind_of([] { split_train_test(numbered(10), 0.0, 1); }) == ErrorKind::InvalidConfig);
    CHECK(kind_of([] { split_train_test(numbered(10), 1.0, 1); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("dataset subset keeps order") {
    const auto ds = numbered(6);
    const auto sub = ds.subset({4, 1});
    REQUIRE(sub.size() == 2);
    CHECK(sub.samples[0].weight_g == 5.0);
    CHECK(sub.samples[1].weight_g == 2.0);
}

}
