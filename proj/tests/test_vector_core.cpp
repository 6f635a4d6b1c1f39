#include <cmath>
#include <numeric>

#include "doctest.h"
#include "streamweave/vector_core.hpp"
#include "support.hpp"

using namespace streamweave;

using swt::code_of;

TEST_CASE("l2_normalize") {
  const Vec v = l2_normalize(Vec{3, 4});
  CHECK(v[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(v[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(l2_normalize(Vec{1, 0}) == Vec{1, 0});
  CHECK(code_of([] { l2_normalize(Vec{0, 0}); }) == ErrorCode::ZeroVector);

  swt::Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vec x = rng.vec(1 + rng.index(40), rng.uniform(1e-3, 1e3));
    const Vec u = l2_normalize(x);
    CHECK(norm(u) == doctest::Approx(1.0).epsilon(1e-9));
    const Vec uu = l2_normalize(u);
    for (std::size_t k = 0; k < u.size(); ++k) CHECK(std::abs(uu[k] - u[k]) <= 1e-9);
  }
}

TEST_CASE("cosine_sim") {
  CHECK(cosine_sim(Vec{1, 0}, Vec{1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_sim(Vec{1, 0}, Vec{0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_sim(Vec{3, 4}, Vec{4, 3}) == doctest::Approx(24.0 / 25.0).epsilon(1e-12));
  CHECK(code_of([] { cosine_sim(Vec{1, 0}, Vec{1, 0, 0}); }) == ErrorCode::DimensionMismatch);
  CHECK(code_of([] { cosine_sim(Vec{0, 0}, Vec{1, 0}); }) == ErrorCode::ZeroVector);

  swt::Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t d = 2 + rng.index(30);
    const Vec a = rng.vec(d), b = rng.vec(d);
    const double alpha = rng.uniform(0.01, 100), beta = rng.uniform(0.01, 100);
    Vec sa = a, sb = b;
    for (auto& x : sa) x *= alpha;
    for (auto& x : sb) x *= beta;
    const double c = cosine_sim(a, b);
    CHECK(std::abs(cosine_sim(sa, sb) - c) <= 1e-9);
    CHECK(std::abs(cosine_sim(b, a) - c) <= 1e-12);
    double num = 0, na = 0, nb = 0;
    for (std::size_t k = 0; k < d; ++k) {
      num += a[k] * b[k];
      na += a[k] * a[k];
      nb += b[k] * b[k];
    }
    CHECK(std::abs(c - num / std::sqrt(na * nb)) <= 1e-12);
  }
}

TEST_CASE("mean_pool") {
  CHECK(mean_pool(std::vector<Vec>{{1, 1}}) == Vec{1, 1});
  const Vec m = mean_pool(std::vector<Vec>{{0, 2}, {2, 0}});
  CHECK(m[0] == doctest::Approx(1.0));
  CHECK(m[1] == doctest::Approx(1.0));
  CHECK(mean_pool(std::vector<Vec>{{0.3}, {0.3}, {0.3}})[0] == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(code_of([] { mean_pool(std::vector<Vec>{}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { mean_pool(std::vector<Vec>{{1, 2}, {1}}); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("compress_adjacent") {
  const std::vector<Vec> four{{1, 0}, {3, 0}, {0, 2}, {0, 4}};
  const auto c = compress_adjacent(four);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == Vec{2, 0});
  CHECK(c[1] == Vec{0, 3});
  CHECK(compress_adjacent(std::vector<Vec>{{5, 6}}) == std::vector<Vec>{{5, 6}});
  CHECK(compress_adjacent(std::vector<Vec>{}).empty());
  CHECK(code_of([] { compress_adjacent(std::vector<Vec>{{1, 2}, {1, 2}, {1}}); }) ==
        ErrorCode::DimensionMismatch);

  swt::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(40), d = 2 + rng.index(8);
    std::vector<Vec> vs;
    for (std::size_t i = 0; i < n; ++i) vs.push_back(rng.vec(d));
    const auto out = compress_adjacent(vs);
    CHECK(out.size() == (n + 1) / 2);
    for (std::size_t k = 0; k < out.size(); ++k) {
      for (std::size_t j = 0; j < d; ++j) {
        const double want = 2 * k + 1 < n ? (vs[2 * k][j] + vs[2 * k + 1][j]) / 2 : vs[2 * k][j];
        CHECK(std::abs(out[k][j] - want) <= 1e-12);
      }
    }
    if (n % 2 == 0) {
      const Vec a = mean_pool(vs), b = mean_pool(out);
      for (std::size_t j = 0; j < d; ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-12);
    }
  }
}

TEST_CASE("softmax") {
  auto p = softmax(std::vector<double>{0, 0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));
  p = softmax(std::vector<double>{7, 7, 7, 7});
  for (double x : p.probs) CHECK(x == doctest::Approx(0.25));
  p = softmax(std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  CHECK(p[0] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(2.0 / 6).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(3.0 / 6).epsilon(1e-12));
  CHECK(code_of([] { softmax(std::vector<double>{}); }) == ErrorCode::EmptyInput);
  CHECK(code_of([] { softmax(std::vector<double>{1, NAN}); }) == ErrorCode::NonFiniteInput);
  p = softmax(std::vector<double>{1000, 0});
  CHECK(p[0] == doctest::Approx(1.0));

  swt::Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> s(1 + rng.index(20));
    for (auto& x : s) x = rng.gauss(10);
    const auto a = softmax(s);
    CHECK(std::abs(std::accumulate(a.probs.begin(), a.probs.end(), 0.0) - 1.0) <= 1e-9);
    const double c = rng.gauss(100);
    for (auto& x : s) x += c;
    const auto b = softmax(s);
    for (std::size_t k = 0; k < s.size(); ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
  }
}

TEST_CASE("bce_with_grad") {
  CHECK(bce_with_grad(1 - kProbEpsilon, 1).loss < 1e-6);
  CHECK(bce_with_grad(0.5, 1).loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_with_grad(0.5, 0).loss == doctest::Approx(bce_with_grad(0.5, 1).loss).epsilon(1e-15));
  CHECK(std::isfinite(bce_with_grad(0.0, 1).loss));
  CHECK(std::isfinite(bce_with_grad(1.0, 0).grad[0]));
  const auto g = bce_with_grad(0.25, 1);
  REQUIRE(g.grad.size() == 1);
  CHECK(g.grad[0] == doctest::Approx((0.25 - 1) / (0.25 * 0.75)));
}

TEST_CASE("retrieval_loss_with_grad") {
  CHECK(retrieval_loss_with_grad(Distribution{{0, 1, 0}}, std::vector<std::size_t>{1}).loss == doctest::Approx(0.0));
  for (std::size_t k = 1; k <= 6; ++k) {
    Distribution p{std::vector<double>(k + 2, 0.0)};
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < k; ++i) {
      p.probs[i + 1] = 1.0 / static_cast<double>(k);
      r.push_back(i + 1);
    }
    CHECK(std::abs(retrieval_loss_with_grad(p, r).loss - std::log(double(k)) / double(k)) <= 1e-12);
  }
  const auto four = retrieval_loss_with_grad(Distribution{{0.25, 0.25, 0.25, 0.25}}, std::vector<std::size_t>{0, 1});
  CHECK(std::abs(four.loss - 0.5 * std::log(4.0)) <= 1e-12);
  CHECK(four.grad[0] == doctest::Approx(-1.0 / (4 * 0.25)));
  CHECK(four.grad[2] == 0.0);
  CHECK(code_of([] { retrieval_loss_with_grad(Distribution{{1}}, std::vector<std::size_t>{}); }) ==
        ErrorCode::EmptyRelevantSet);
  CHECK(code_of([] { retrieval_loss_with_grad(Distribution{{1}}, std::vector<std::size_t>{1}); }) ==
        ErrorCode::IndexOutOfRange);
}

TEST_CASE("retrieval loss is minimised at uniform over R on a grid") {
  // N = 4, R = {0, 1, 2}; distributions on R with step 1/30
  const std::vector<std::size_t> r{0, 1, 2};
  const double at_uniform = retrieval_loss_with_grad(Distribution{{1.0 / 3, 1.0 / 3, 1.0 / 3, 0}}, r).loss;
  const int steps = 30;
  for (int a = 1; a < steps; ++a) {
    for (int b = 1; a + b < steps; ++b) {
      const double pa = double(a) / steps, pb = double(b) / steps;
      const double loss = retrieval_loss_with_grad(Distribution{{pa, pb, 1 - pa - pb, 0}}, r).loss;
      CHECK(loss >= at_uniform - 1e-12);
    }
  }
}

TEST_CASE("distribution argmax") {
  Distribution d{{0.1, 0.7, 0.2}};
  CHECK(d.argmax() == 1);
  CHECK(d.max() == doctest::Approx(0.7));
  CHECK(code_of([] { Distribution{}.argmax(); }) == ErrorCode::EmptyInput);
}
