#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "gtdl/core.hpp"
#include "gtdl/linalg.hpp"
#include "gtdl/rng.hpp"
#include "oracles.hpp"

using namespace gtdl;

TEST_CASE("binary adjacency rejects diagonal and non-binary entries") {
    CHECK_THROWS_AS(BinaryAdjacency::from_rows({{1, 0}, {0, 0}}), DataError);
    CHECK_THROWS_AS(BinaryAdjacency::from_rows({{0, 2}, {0, 0}}), DataError);
    CHECK_THROWS_AS(BinaryAdjacency::from_rows({{0, 1}, {0}}), DataError);
    BinaryAdjacency a(3);
    CHECK_THROWS_AS(a.set(1, 1, true), DataError);
    a.set(0, 2, true);
    CHECK(a(0, 2));
    CHECK_FALSE(a(2, 0));
    CHECK(a.edge_count() == 1);
    CHECK(BinaryAdjacency::from_rows(a.to_rows()) == a);
}

TEST_CASE("weighted adjacency validates range and hollowness") {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 1) = 0.5;
    CHECK_NOTHROW(WeightedAdjacency{m});
    m(0, 0) = 0.1;
    CHECK_THROWS_AS(WeightedAdjacency{m}, DataError);
    m(0, 0) = 0.0;
    m(1, 0) = 1.5;
    CHECK_THROWS_AS(WeightedAdjacency{m}, DataError);
    m(1, 0) = -0.1;
    CHECK_THROWS_AS(WeightedAdjacency{m}, DataError);
    m(1, 0) = std::nan("");
    CHECK_THROWS_AS(WeightedAdjacency{m}, DataError);
}

TEST_CASE("symmetrize") {
    BinaryAdjacency zero(4);
    CHECK(symmetrize(zero) == zero);

    BinaryAdjacency one(3);
    one.set(0, 1, true);
    const auto s = symmetrize(one);
    CHECK(s(0, 1));
    CHECK(s(1, 0));
    CHECK(s.edge_count() == 2);

    CHECK(symmetrize(s) == s);
    for (std::size_t j = 0; j < 3; ++j) CHECK_FALSE(s(j, j));
}

TEST_CASE("dataset validation") {
    Dataset ds;
    ds.values = Matrix::Ones(4, 3);
    ds.truth = BinaryAdjacency(3);
    ds.target_index = 2;
    CHECK_NOTHROW(ds.validate());
    ds.target_index = 3;
    CHECK_THROWS_AS(ds.validate(), DataError);
    ds.target_index = 0;
    ds.truth = BinaryAdjacency(2);
    CHECK_THROWS_AS(ds.validate(), DataError);
    ds.truth = BinaryAdjacency(3);
    ds.values(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(ds.validate(), DataError);

    ds.values(1, 1) = 7.0;
    const auto sub = ds.rows({1, 3});
    CHECK(sub.n() == 2);
    CHECK(sub.values(0, 1) == 7.0);
}

// ------------------------------------------------------------------- rng

TEST_CASE("rng matches the reference xoshiro256** stream") {
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0xdeadbeefULL}) {
        SeededRng rng(seed);
        oracle::Xoshiro ref(seed);
        for (int i = 0; i < 1000; ++i) REQUIRE(rng.next_u64() == ref.next());
    }
}

TEST_CASE("splitmix64 and fnv1a64 known values") {
    std::uint64_t state = 0;
    CHECK(splitmix64(state) == 0xe220a8397b1dcdafULL);
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("identical seeds give identical streams, different seeds differ") {
    SeededRng a(7), b(7), c(8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        differs |= x != c.next_u64();
    }
    CHECK(differs);
}

TEST_CASE("derive_seed separates tags") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(1, {t}));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) == derive_seed(1, {2}));
    CHECK(derive_seed(1, {}) != derive_seed(2, {}));
}

TEST_CASE("uniform, index and normal distributions") {
    SeededRng rng(99);
    const int n = 200000;
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // mean of U[0,1): sd of the sample mean is sqrt(1/12/n)
    CHECK(std::abs(sum / n - 0.5) < 4 * std::sqrt(1.0 / 12.0 / n));

    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto k = rng.uniform_index(7);
        REQUIRE(k < 7);
        ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 4 * std::sqrt(10000.0 * 6.0 / 7.0));

    sum = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sum_sq += z * z;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 4 / std::sqrt(double(n)));
    CHECK(std::abs(sum_sq / n - mean * mean - 1.0) < 4 * std::sqrt(2.0 / n));
}

TEST_CASE("permutation and sampling without replacement") {
    SeededRng rng(3);
    auto perm = rng.permutation(50);
    std::sort(perm.begin(), perm.end());
    std::vector<std::size_t> iota(50);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(perm == iota);

    const auto pick = rng.sample_without_replacement(100, 30);
    CHECK(pick.size() == 30);
    CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 30);
    for (auto v : pick) CHECK(v < 100);
    CHECK_THROWS(rng.sample_without_replacement(3, 4));
}

// ---------------------------------------------------------------- linalg

TEST_CASE("cholesky examples") {
    CHECK(cholesky(Matrix::Identity(3, 3)).isApprox(Matrix::Identity(3, 3)));

    Matrix m(2, 2);
    m << 4, 2, 2, 3;
    Matrix expected(2, 2);
    expected << 2, 0, 1, std::sqrt(2.0);
    CHECK((cholesky(m) - expected).norm() < 1e-15);

    Matrix indefinite(2, 2);
    indefinite << 1, 2, 2, 1;
    CHECK_THROWS_AS(cholesky(indefinite), NotPositiveDefinite);

    Matrix asym(2, 2);
    asym << 2, 1, 0.5, 2;
    CHECK_THROWS_AS(cholesky(asym), NotPositiveDefinite);
}

TEST_CASE("cholesky reconstructs random SPD matrices") {
    SeededRng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int p = 2 + static_cast<int>(rng.uniform_index(9));
        Matrix a(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
        const Matrix m = a * a.transpose() + 0.1 * Matrix::Identity(p, p);
        const Matrix l = cholesky(m);
        CHECK((l * l.transpose() - m).norm() / m.norm() < Tolerances::reconstruction);
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j) CHECK(l(i, j) == 0.0);
    }
}

TEST_CASE("invert_spd examples") {
    CHECK(invert_spd(Matrix::Identity(4, 4)).isApprox(Matrix::Identity(4, 4)));

    Matrix d = Matrix::Zero(2, 2);
    d(0, 0) = 2;
    d(1, 1) = 4;
    Matrix d_inv = Matrix::Zero(2, 2);
    d_inv(0, 0) = 0.5;
    d_inv(1, 1) = 0.25;
    CHECK((invert_spd(d) - d_inv).norm() < 1e-15);

    Matrix m(2, 2);
    m << 2, 1, 1, 2;
    Matrix expected(2, 2);
    expected << 2.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3;
    CHECK((invert_spd(m) - expected).norm() < 1e-14);
}

TEST_CASE("invert_spd property: m * inverse == I and symmetric") {
    SeededRng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const int p = 2 + static_cast<int>(rng.uniform_index(8));
        Matrix a(p, p);
        for (int i = 0; i < p; ++i)
            for (int j = 0; j < p; ++j) a(i, j) = rng.normal();
        const Matrix m = a * a.transpose() + Matrix::Identity(p, p);
        const Matrix inv = invert_spd(m);
        CHECK((m * inv - Matrix::Identity(p, p)).norm() < 1e-8);
        CHECK((inv - inv.transpose()).norm() == 0.0);
    }
}
