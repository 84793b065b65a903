#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dualmae/ops.hpp"
#include "dualmae/rng.hpp"
#include "dualmae/tensor.hpp"
#include "helpers.hpp"

using namespace dualmae;
using dualmae::testing::bit_equal;
using dualmae::testing::random_tensor;

TEST_CASE("rng determinism and split independence") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(42);
  Rng s0 = c.split(0), s1 = c.split(1);
  CHECK(s0.next_u64() != s1.next_u64());

  // split is a pure function of (state, stream)
  Rng d(42);
  Rng s0_again = d.split(0);
  Rng s0_ref = Rng(42).split(0);
  CHECK(s0_again.next_u64() == s0_ref.next_u64());
}

TEST_CASE("rng sample_without_replacement") {
  Rng rng(7);
  auto s = rng.sample_without_replacement(10, 4);
  CHECK(s.size() == 4);
  std::sort(s.begin(), s.end());
  for (size_t i = 1; i < s.size(); ++i) CHECK(s[i] != s[i - 1]);
  for (int64_t v : s) {
    CHECK(v >= 0);
    CHECK(v < 10);
  }
}

TEST_CASE("matmul identity and hand arithmetic") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  Tensor c = matmul(eye, b);
  CHECK(bit_equal(c, b));

  Tensor row = Tensor::from_data({1, 2}, {1, 2});
  Tensor col = Tensor::from_data({2, 1}, {3, 4});
  CHECK(matmul(row, col).value() == 11.0);

  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), ShapeError);
}

TEST_CASE("matmul gradients vs finite differences") {
  Rng rng(11);
  Tensor a = random_tensor({5, 4}, rng);
  Tensor b = random_tensor({4, 3}, rng);
  double err_a = grad_check([&](const Tensor& x) { return sum_all(matmul(x, b)); }, a, 1e-5);
  double err_b = grad_check([&](const Tensor& x) { return sum_all(matmul(a, x)); }, b, 1e-5);
  CHECK(err_a < 1e-6);
  CHECK(err_b < 1e-6);
}

TEST_CASE("layer_norm basics") {
  Tensor gamma = Tensor::full({3}, 1.0);
  Tensor beta = Tensor::zeros({3});
  Tensor x = Tensor::from_data({1, 3}, {1, 1, 1});
  Tensor y = layer_norm(x, gamma, beta, 1e-6);
  for (double v : y.data()) CHECK(std::abs(v) < 1e-9);

  Tensor g2 = Tensor::full({2}, 1.0), b2 = Tensor::zeros({2});
  Tensor x2 = Tensor::from_data({1, 2}, {0, 2});
  Tensor y2 = layer_norm(x2, g2, b2, 1e-12);
  CHECK(y2.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(y2.data()[1] == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(layer_norm(Tensor::zeros({2, 3}), Tensor::zeros({4}), Tensor::zeros({4}), 1e-6),
                  ShapeError);
  CHECK_THROWS_AS(layer_norm(Tensor::zeros({2, 3}), Tensor::zeros({3}), Tensor::zeros({3}), 0.0),
                  ConfigError);
}

TEST_CASE("layer_norm gradient and row-mean property") {
  Rng rng(13);
  Tensor x = random_tensor({3, 8}, rng);
  Tensor gamma = random_tensor({8}, rng, 0.5, 1.5);
  Tensor beta = random_tensor({8}, rng);
  Tensor dir = random_tensor({3, 8}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(layer_norm(t, gamma, beta, 1e-6), dir)); },
                   x, 1e-5) < 1e-5);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(layer_norm(t, gamma, beta, 1e-6)); }, x,
                   1e-5) < 1e-5);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(layer_norm(x, t, beta, 1e-6)); }, gamma,
                   1e-5) < 1e-5);

  Tensor unit_g = Tensor::full({8}, 1.0), zero_b = Tensor::zeros({8});
  Tensor y = layer_norm(x, unit_g, zero_b, 1e-9);
  for (int64_t r = 0; r < 3; ++r) {
    double mean = 0.0;
    for (int64_t c = 0; c < 8; ++c) mean += y.data()[static_cast<size_t>(r * 8 + c)];
    CHECK(std::abs(mean / 8.0) < 1e-10);
  }
}

TEST_CASE("softmax basics, stability, gradient") {
  Tensor u = softmax(Tensor::from_data({4}, {0, 0, 0, 0}));
  for (double v : u.data()) CHECK(v == doctest::Approx(0.25));

  Tensor big = softmax(Tensor::from_data({2}, {1000, 1000}));
  CHECK(big.data()[0] == doctest::Approx(0.5));
  CHECK(all_finite(big));

  Rng rng(17);
  Tensor x = random_tensor({2, 6}, rng, -2, 2);
  Tensor dir = random_tensor({2, 6}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(softmax(t), dir)); }, x, 1e-5) < 1e-5);

  // rows sum to one
  Tensor s = softmax(random_tensor({5, 7}, rng, -3, 3));
  for (int64_t r = 0; r < 5; ++r) {
    double sum = 0.0;
    for (int64_t c = 0; c < 7; ++c) sum += s.data()[static_cast<size_t>(r * 7 + c)];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("log_softmax matches softmax log") {
  Rng rng(19);
  Tensor x = random_tensor({3, 5}, rng, -2, 2);
  Tensor ls = log_softmax(x);
  Tensor s = softmax(x);
  for (size_t i = 0; i < ls.data().size(); ++i)
    CHECK(ls.data()[i] == doctest::Approx(std::log(s.data()[i])).epsilon(1e-12));
  Tensor dir = random_tensor({3, 5}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(log_softmax(t), dir)); }, x, 1e-5) <
        1e-5);
}

TEST_CASE("gelu") {
  CHECK(gelu(Tensor::scalar(0.0)).value() == 0.0);
  Rng rng(23);
  Tensor x = random_tensor({4, 4}, rng, -2, 2);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(gelu(t)); }, x, 1e-5) < 1e-4);
}

TEST_CASE("gather, scatter, round trip") {
  Tensor x = Tensor::from_data({4, 2}, {0, 1, 10, 11, 20, 21, 30, 31});
  Tensor g = gather_rows(x, {2, 0});
  CHECK(g.data()[0] == 20);
  CHECK(g.data()[1] == 21);
  CHECK(g.data()[2] == 0);
  CHECK(g.data()[3] == 1);
  CHECK_THROWS_AS(gather_rows(x, {4}), IndexError);
  CHECK_THROWS_AS(scatter_rows(g, {0, 0}, 4), IndexError);

  Rng rng(29);
  Tensor y = random_tensor({3, 5}, rng);
  std::vector<int64_t> idx = {5, 1, 6};
  Tensor placed = scatter_rows(y, idx, 8);
  Tensor back = gather_rows(placed, idx);
  CHECK(bit_equal(back, y));

  Tensor dir = random_tensor({2, 5}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(gather_rows(t, {2, 0}), dir)); }, y,
                   1e-5) < 1e-4);
  Tensor dir8 = random_tensor({8, 5}, rng);
  CHECK(grad_check([&](const Tensor& t) { return sum_all(mul(scatter_rows(t, idx, 8), dir8)); }, y,
                   1e-5) < 1e-4);
}

TEST_CASE("grad_check contracts and exact cases") {
  Tensor x = Tensor::from_data({3}, {1, -2, 3});
  // gradient of sum is exactly one everywhere; the central difference only
  // carries float rounding
  Tensor sum_probe = Tensor::from_data({3}, {1, -2, 3}, true);
  sum_all(sum_probe).backward();
  for (double g : sum_probe.grad()) CHECK(g == 1.0);
  CHECK(grad_check([](const Tensor& t) { return sum_all(t); }, x, 1e-5) < 1e-10);

  Tensor q = Tensor::from_data({2}, {1, 2});
  Tensor probe = Tensor::from_data({2}, {1, 2}, true);
  Tensor loss = sum_all(mul(probe, probe));
  loss.backward();
  CHECK(probe.grad()[0] == doctest::Approx(2.0));
  CHECK(probe.grad()[1] == doctest::Approx(4.0));
  CHECK(grad_check([](const Tensor& t) { return sum_all(mul(t, t)); }, q, 1e-5) < 1e-8);

  CHECK_THROWS_AS(grad_check([](const Tensor& t) { return add(t, t); }, x, 1e-5), ContractError);
  CHECK_THROWS_AS(grad_check([](const Tensor& t) { return sum_all(t); }, x, 0.0), ContractError);
}

TEST_CASE("remaining op gradients at h=1e-5") {
  Rng rng(31);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor bias = random_tensor({4}, rng);
  Tensor dir34 = random_tensor({3, 4}, rng);
  Tensor dir43 = random_tensor({4, 3}, rng);

  auto probe = [&](auto f, const Tensor& x) { return grad_check(f, x, 1e-5); };

  CHECK(probe([&](const Tensor& t) { return sum_all(mul(add(t, b), dir34)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(sub(a, t), dir34)); }, b) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(mul(t, b), dir34)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(scale(t, -2.5), dir34)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(add_row_bias(a, t), dir34)); }, bias) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(broadcast_row(t, 3), dir34)); }, bias) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(transpose(t), dir43)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(reshape(t, {4, 3}), dir43)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(slice_rows(t, 1, 2), slice_rows(dir34, 0, 2))); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(slice_cols(t, 1, 2), slice_cols(dir34, 0, 2))); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(concat({t, b}, 0), concat({dir34, dir34}, 0))); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(concat({t, b}, 1), concat({dir34, dir34}, 1))); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return sum_all(mul(mean_rows(t), bias)); }, a) < 1e-4);
  CHECK(probe([&](const Tensor& t) { return mean_all(t); }, a) < 1e-4);
}

TEST_CASE("op determinism: same inputs, bit-identical outputs") {
  Rng rng1(77), rng2(77);
  Tensor a1 = random_tensor({6, 6}, rng1);
  Tensor a2 = random_tensor({6, 6}, rng2);
  CHECK(bit_equal(a1, a2));
  CHECK(bit_equal(matmul(a1, a1), matmul(a2, a2)));
  CHECK(bit_equal(softmax(a1), softmax(a2)));
  Tensor g = Tensor::full({6}, 1.0), bz = Tensor::zeros({6});
  CHECK(bit_equal(layer_norm(a1, g, bz, 1e-6), layer_norm(a2, g, bz, 1e-6)));
}

TEST_CASE("backward accumulates across reuse") {
  Tensor w = Tensor::from_data({2}, {3, 4}, true);
  Tensor y = add(mul(w, w), w);  // y_i = w_i^2 + w_i
  Tensor loss = sum_all(y);
  loss.backward();
  CHECK(w.grad()[0] == doctest::Approx(7.0));
  CHECK(w.grad()[1] == doctest::Approx(9.0));

  // a second backward accumulates again unless cleared
  Tensor w2 = Tensor::wrap(w.node());
  w2.zero_grad();
  Tensor loss2 = sum_all(mul(w2, w2));
  loss2.backward();
  CHECK(w2.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("finiteness helper flags NaN") {
  Tensor x = Tensor::from_data({2}, {1.0, std::nan("")});
  CHECK_FALSE(all_finite(x));
  CHECK(all_finite(Tensor::from_data({2}, {1.0, 2.0})));
}
