#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "oracles.hpp"
#include "umtf/common.hpp"
#include "umtf/eval.hpp"

using namespace umtf;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::MatrixXd rows(const std::vector<std::vector<double>>& data) {
    Eigen::MatrixXd m(data.size(), data.front().size());
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[i].size(); ++j) m(i, j) = data[i][j];
    return m;
}

Eigen::MatrixXd random_orthogonal(int d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = rng.gaussian();
    return Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
}

} // namespace

TEST_CASE("AP is 1 when the single correct match ranks first") {
    // query (id 0, cam 0) + two gallery videos at cam 1
    const auto f = rows({{1, 0, 0}, {0.9, 0.1, 0}, {0, 1, 0}});
    const auto m = cmc_map(f, {0, 1, 1}, {0, 0, 1});
    // query 0: correct at rank 1 -> AP 1; query 1: gallery {0}, AP 1; query 2 skipped
    CHECK(m.n_valid_queries == 2);
    CHECK(m.n_skipped_queries == 1);
    CHECK_THAT(m.map, WithinAbs(1.0, 1e-12));
    CHECK_THAT(m.rank1, WithinAbs(1.0, 1e-12));
}

TEST_CASE("hand-computed AP with correct items at ranks 1 and 3") {
    // query q (id 0, cam 0); gallery at cam 1 ranked g1(id0) > g2(id1) > g3(id0)
    const auto f = rows({{1.0, 0.0}, {0.9, 0.1}, {0.8, 0.3}, {0.7, 0.5}});
    Eigen::MatrixXd fn = f;
    for (int i = 0; i < 4; ++i) fn.row(i) /= fn.row(i).norm();
    const std::vector<int> cams{0, 1, 1, 1};
    const std::vector<int> gt{0, 0, 1, 0};
    const auto m = cmc_map(fn, cams, gt);
    // q: AP = (1/1 + 2/3)/2 = 5/6 ; g1: gallery {q}, AP 1 ; g2 skipped ; g3: AP 1
    const double expected = (5.0 / 6.0 + 1.0 + 1.0) / 3.0;
    CHECK(m.n_valid_queries == 3);
    CHECK_THAT(m.map, WithinAbs(expected, 1e-12));
}

TEST_CASE("ranking ties break toward the lower video id") {
    // two gallery videos with identical features; the correct one has the
    // higher id, so it ranks second
    const auto f = rows({{1, 0}, {0.6, 0.8}, {0.6, 0.8}});
    const std::vector<int> cams{0, 1, 1};
    const std::vector<int> gt{0, 1, 0};
    const auto m = cmc_map(f, cams, gt);
    // query 0: correct at rank 2 -> AP = 1/2 ; query 1 skipped? id1's gallery
    // {0} has no match -> skipped ; query 2: gallery {0}, correct rank 1
    CHECK(m.n_valid_queries == 2);
    CHECK_THAT(m.map, WithinAbs((0.5 + 1.0) / 2.0, 1e-12));
}

TEST_CASE("perfect features give perfect retrieval") {
    std::vector<std::vector<double>> data;
    std::vector<int> cams, gt;
    for (int ident = 0; ident < 4; ++ident) {
        std::vector<double> proto(4, 0.0);
        proto[ident] = 1.0;
        for (int cam = 0; cam < 3; ++cam) {
            data.push_back(proto);
            cams.push_back(cam);
            gt.push_back(ident);
        }
    }
    const auto m = cmc_map(rows(data), cams, gt);
    CHECK_THAT(m.map, WithinAbs(1.0, 1e-12));
    CHECK_THAT(m.rank1, WithinAbs(1.0, 1e-12));
    CHECK(m.n_skipped_queries == 0);
}

TEST_CASE("retrieval requires at least one valid query") {
    const auto f = rows({{1, 0}, {0, 1}});
    CHECK_THROWS_AS(cmc_map(f, {0, 1}, {0, 1}), EvalError);
    // same identities but one camera only: no cross-camera gallery
    CHECK_THROWS_AS(cmc_map(f, {0, 0}, {0, 0}), EvalError);
}

TEST_CASE("cmc rates are non-decreasing and invariant to rotation") {
    Rng rng(5150);
    const int n = 40, d = 8;
    Eigen::MatrixXd f(n, d);
    std::vector<int> cams(n), gt(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) f(i, j) = rng.gaussian();
        cams[i] = static_cast<int>(rng.uniform_int(0, 2));
        gt[i] = static_cast<int>(rng.uniform_int(0, 9));
    }
    const auto m = cmc_map(f, cams, gt);
    CHECK(m.rank1 <= m.rank5);
    CHECK(m.rank5 <= m.rank10);
    CHECK(m.map >= 0.0);
    CHECK(m.map <= 1.0);

    const Eigen::MatrixXd q = random_orthogonal(d, 99);
    const auto mr = cmc_map(f * q, cams, gt);
    CHECK_THAT(mr.map, WithinAbs(m.map, 1e-9));
    CHECK_THAT(mr.rank1, WithinAbs(m.rank1, 1e-9));
}

// Frozen oracle values from an independent implementation of the exact
// AMI formula (hypergeometric expected MI, arithmetic-mean normalizer).
TEST_CASE("AMI matches the independent exact-formula oracle") {
    CHECK_THAT(ami({0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}), WithinAbs(0.298792458171, 1e-9));
    CHECK_THAT(ami({0, 0, 1, 1, 2, 2}, {0, 0, 0, 1, 1, 1}), WithinAbs(0.298792458171, 1e-9));
    CHECK_THAT(ami({0, 0, 0, 0, 1, 1, 2, 2}, {0, 1, 0, 1, 2, 2, 2, 3}),
               WithinAbs(0.424719789526, 1e-9));
    CHECK_THAT(ami({0, 0, 0, 1, 1, 1, 2, 2, 2, 2}, {0, 0, 1, 1, 2, 2, 0, 1, 2, 2}),
               WithinAbs(-0.002712434599, 1e-9));
}

TEST_CASE("AMI degenerate and invariance properties") {
    CHECK_THAT(ami({0, 0, 1, 1}, {1, 1, 0, 0}), WithinAbs(1.0, 1e-12));
    CHECK_THAT(ami({0, 1, 2, 3, 4, 5}, {0, 0, 0, 0, 0, 0}), WithinAbs(0.0, 1e-12));
    CHECK_THAT(ami({7, 7, 7}, {3, 3, 3}), WithinAbs(1.0, 1e-12)); // both trivial

    // symmetry and label-renaming invariance on random partitions
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_int(0, 20));
        std::vector<int> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng.uniform_int(0, 3));
            b[i] = static_cast<int>(rng.uniform_int(0, 4));
        }
        CHECK_THAT(ami(a, b), WithinAbs(ami(b, a), 1e-9));
        std::vector<int> a2(n);
        for (int i = 0; i < n; ++i) a2[i] = 17 - 3 * a[i]; // injective relabel
        CHECK_THAT(ami(a2, b), WithinAbs(ami(a, b), 1e-12));
    }
}

TEST_CASE("AMI rejects mismatched id sets") {
    CHECK_THROWS_AS(ami({0, 1}, {0, 1, 2}), EvalError);
    CHECK_THROWS_AS(ami({}, {}), EvalError);
}
