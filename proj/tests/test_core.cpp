#include <catch2/catch_amalgamated.hpp>

#include "maskflow/config.hpp"
#include "maskflow/linalg.hpp"
#include "maskflow/rng.hpp"
#include "maskflow/tensor.hpp"

using namespace maskflow;

TEST_CASE("tensor basics") {
    TensorF t({2, 3, 4, 5});
    REQUIRE(t.numel() == 120);
    t.at4(1, 2, 3, 4) = 7.0f;
    REQUIRE(t[t.numel() - 1] == 7.0f);
    TensorF u = t;
    REQUIRE(max_abs_diff(t, u) == 0.0);
    u[0] = 1.0f;
    REQUIRE(max_abs_diff(t, u) == 1.0);
}

TEST_CASE("seed derivation is stable and namespaced") {
    REQUIRE(derive_seed(1, "a", 0) == derive_seed(1, "a", 0));
    REQUIRE(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
    REQUIRE(derive_seed(1, "a", 0) != derive_seed(1, "b", 0));
    REQUIRE(derive_seed(1, "a", 0) != derive_seed(2, "a", 0));
}

TEST_CASE("rng streams are deterministic and reasonable") {
    Rng a(42, "test"), b(42, "test");
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    Rng r(7, "moments");
    double sum = 0, sum2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        double x = r.normal();
        sum += x;
        sum2 += x * x;
    }
    REQUIRE(std::abs(sum / n) < 0.05);
    REQUIRE(std::abs(sum2 / n - 1.0) < 0.05);

    Rng u(9, "uniform");
    for (int i = 0; i < 1000; ++i) {
        double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
}

TEST_CASE("matmul against a naive reference") {
    Rng rng(3, "matmul");
    const int M = 7, K = 5, N = 9;
    TensorD A({M, K}), B({K, N}), C({M, N}), Cref({M, N});
    for (auto& x : A.v) x = rng.normal();
    for (auto& x : B.v) x = rng.normal();
    matmul(A.data(), B.data(), C.data(), M, K, N);
    for (int i = 0; i < M; ++i)
        for (int j = 0; j < N; ++j) {
            double s = 0;
            for (int k = 0; k < K; ++k) s += A.at2(i, k) * B.at2(k, j);
            Cref.at2(i, j) = s;
        }
    REQUIRE(max_abs_diff(C, Cref) < 1e-12);

    TensorD D({N, M});
    matmul(B.data(), A.data(), D.data(), N, K, M, true, true);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < M; ++j) REQUIRE(std::abs(D.at2(i, j) - Cref.at2(j, i)) < 1e-12);
}

TEST_CASE("im2col/col2im adjointness") {
    // <im2col(x), y> == <x, col2im(y)> for random y: the pair is an exact
    // linear transpose, which is what conv backward relies on.
    Rng rng(5, "im2col");
    TensorD x({3, 4, 8, 8});
    for (auto& v : x.v) v = rng.normal();
    ConvGeom g;
    g.cin = 4;
    g.cout = 1;
    g.kt = 3;
    g.kh = 3;
    g.kw = 3;
    g.st = 1;
    g.sh = 2;
    g.sw = 2;
    g.pt = 1;
    g.ph = 1;
    g.pw = 1;
    TensorD cols;
    im2col(x, g, cols);
    TensorD y(cols.shape);
    for (auto& v : y.v) v = rng.normal();
    TensorD xt({3, 4, 8, 8});
    col2im(y, g, xt);
    double lhs = 0, rhs = 0;
    for (int64_t i = 0; i < cols.numel(); ++i) lhs += cols[i] * y[i];
    for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * xt[i];
    REQUIRE(std::abs(lhs - rhs) < 1e-9);
}

TEST_CASE("token raster round trip") {
    Rng rng(11, "raster");
    TensorD x({3, 5, 4, 6});
    for (auto& v : x.v) v = rng.normal();
    TensorD tok = grid_to_tokens(x);
    TensorD back = tokens_to_grid(tok, 3, 5, 4, 6);
    REQUIRE(max_abs_diff(x, back) == 0.0);
}

TEST_CASE("config parsing") {
    KeyValueConfig c = KeyValueConfig::parse(
        "# comment\n"
        "global_seed = 42\n"
        "model.d_model = 128   # inline comment\n"
        "train.lr = 1e-3\n"
        "data.mix = circular_swap:0.5,linear:0.5\n"
        "flag = true\n");
    REQUIRE(c.get_u64("global_seed", 0) == 42);
    REQUIRE(c.get_int("model.d_model", 0) == 128);
    REQUIRE(c.get_double("train.lr", 0) == Catch::Approx(1e-3));
    REQUIRE(c.get_bool("flag", false));
    auto mix = c.get_mix("data.mix", {});
    REQUIRE(mix.size() == 2);
    REQUIRE(mix.at("circular_swap") == Catch::Approx(0.5));
    c.apply_override("model.d_model=96");
    REQUIRE(c.get_int("model.d_model", 0) == 96);
    REQUIRE_THROWS_AS(c.apply_override("oops"), ValidationError);
    REQUIRE_THROWS_AS(KeyValueConfig::parse("novalue\n"), ValidationError);
    REQUIRE_THROWS_AS(c.get_int("flag", 0), ValidationError);
}
