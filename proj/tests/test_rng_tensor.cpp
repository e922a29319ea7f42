#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "velab/rng.hpp"
#include "velab/tensor.hpp"

using namespace velab;

TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform();
        REQUIRE(x == b.uniform());
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
    // different seed diverges immediately with overwhelming probability
    REQUIRE(a.uniform() != c.uniform());
}

TEST_CASE("normal draws have roughly standard moments") {
    Rng rng(7);
    const int n = 20000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    REQUIRE(std::abs(sum / n) < 0.05);
    REQUIRE(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("uniform_int covers inclusive bounds") {
    Rng rng(11);
    std::set<int> seen;
    for (int i = 0; i < 500; ++i) {
        const int v = rng.uniform_int(3, 7);
        REQUIRE(v >= 3);
        REQUIRE(v <= 7);
        seen.insert(v);
    }
    REQUIRE(seen.size() == 5);
}

TEST_CASE("sample_without_replacement yields distinct indices") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ids = rng.sample_without_replacement(14, 5);
        REQUIRE(ids.size() == 5);
        REQUIRE(std::set<int>(ids.begin(), ids.end()).size() == 5);
        for (int id : ids) {
            REQUIRE(id >= 0);
            REQUIRE(id < 14);
        }
    }
}

TEST_CASE("derive_seed separates indices and masters") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m = 0; m < 10; ++m)
        for (std::uint64_t i = 0; i < 100; ++i) seen.insert(derive_seed(m, i));
    REQUIRE(seen.size() == 1000);
    REQUIRE(derive_seed(3, 4) == derive_seed(3, 4));
}

TEST_CASE("matmul helpers against hand-computed products") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]] -> AB = [[19,22],[43,50]]
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 2}, {5, 6, 7, 8});
    Tensor c({2, 2});
    matmul_acc(a.data.data(), b.data.data(), c.data.data(), 2, 2, 2);
    REQUIRE(c.data == std::vector<double>{19, 22, 43, 50});

    // A B^T = [[17,23],[39,53]]
    Tensor cbt({2, 2});
    matmul_bt_acc(a.data.data(), b.data.data(), cbt.data.data(), 2, 2, 2);
    REQUIRE(cbt.data == std::vector<double>{17, 23, 39, 53});

    // A^T B = [[26,30],[38,44]]
    Tensor cat({2, 2});
    matmul_at_acc(a.data.data(), b.data.data(), cat.data.data(), 2, 2, 2);
    REQUIRE(cat.data == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("tensor shape helpers") {
    Tensor t({2, 3});
    REQUIRE(t.numel() == 6);
    t.at2(1, 2) = 9.0;
    REQUIRE(t[5] == 9.0);
    REQUIRE(Tensor::zeros({4}).numel() == 4);
    Rng rng(1);
    const Tensor x = Tensor::xavier(8, 4, rng);
    REQUIRE(x.dim(0) == 8);
    REQUIRE(x.dim(1) == 4);
    for (long i = 0; i < x.numel(); ++i) REQUIRE(std::abs(x[i]) < 1.0);
}
