#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "gradcheck.hpp"
#include "streamweave/retrieval.hpp"
#include "support.hpp"

using namespace streamweave;
using swt::code_of;

namespace {

Vec axis(std::size_t d, std::size_t i) {
  Vec v(d, 0.0);
  v[i] = 1.0;
  return v;
}

}  // namespace

TEST_CASE("score_clips") {
  const auto id = RetrievalHead::identity(4);
  CHECK(score_clips(Vec{1, 2, 3, 4}, std::vector<Vec>{axis(4, 2)}, id).probs == std::vector<double>{1.0});

  const std::vector<Vec> sym{axis(2, 0), axis(2, 1)};
  const auto u = score_clips(Vec{1, 1}, sym, RetrievalHead::identity(2));
  CHECK(u[0] == doctest::Approx(0.5));

  std::vector<Vec> ortho;
  for (std::size_t i = 0; i < 5; ++i) ortho.push_back(axis(5, i));
  const auto sharp = score_clips(axis(5, 3), ortho, RetrievalHead::identity(5, 0.1));
  CHECK(sharp.argmax() == 3);
  // e^10 / (e^10 + 4)
  CHECK(sharp[3] == doctest::Approx(std::exp(10.0) / (std::exp(10.0) + 4)).epsilon(1e-12));
  CHECK(sharp[3] > 0.95);

  CHECK(code_of([&] { score_clips(Vec{1, 0}, std::vector<Vec>{}, id); }) == ErrorCode::EmptyClipSet);
  CHECK(code_of([&] { score_clips(Vec{1, 0}, sym, id); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("score_clips reference computation and properties") {
  swt::Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.index(6), n = 1 + rng.index(7);
    RetrievalHead head = RetrievalHead::identity(d, rng.uniform(0.1, 3));
    for (auto& w : head.projection) w += rng.gauss(0.3);
    const Vec todo = rng.vec(d);
    std::vector<Vec> ind;
    for (std::size_t i = 0; i < n; ++i) ind.push_back(rng.unit(d));
    const auto p = score_clips(todo, ind, head);

    Vec y(d, 0.0);
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c) y[r] += head.projection[r * d + c] * todo[c];
    double ny = 0;
    for (double v : y) ny += v * v;
    std::vector<double> e(n);
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < d; ++k) s += y[k] * ind[i][k];
      e[i] = std::exp(s / std::sqrt(ny) / head.temperature);
      total += e[i];
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - e[i] / total) <= 1e-12);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng.engine());
    std::vector<Vec> shuffled;
    for (std::size_t i : perm) shuffled.push_back(ind[i]);
    const auto ps = score_clips(todo, shuffled, head);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(ps[i] - p[perm[i]]) <= 1e-12);

    RetrievalHead colder = head;
    colder.temperature = head.temperature / 2;
    CHECK(score_clips(todo, ind, colder).max() >= p.max() - 1e-12);
  }
}

TEST_CASE("select_grounded") {
  SelectionPolicy top1{SelectionPolicy::Kind::TopK, 1};
  CHECK(select_grounded(Distribution{{0.1, 0.7, 0.2}}, top1).clip_indices == std::vector<std::size_t>{1});
  SelectionPolicy top2{SelectionPolicy::Kind::TopK, 2};
  CHECK(select_grounded(Distribution{{0.4, 0.2, 0.4}}, top2).clip_indices == std::vector<std::size_t>{0, 2});
  SelectionPolicy alpha1{SelectionPolicy::Kind::Threshold, 1, 1.0};
  CHECK(select_grounded(Distribution{{0.25, 0.25, 0.25, 0.25}}, alpha1).clip_indices.size() == 4);
  SelectionPolicy alpha2{SelectionPolicy::Kind::Threshold, 1, 2.0};
  CHECK(select_grounded(Distribution{{0.55, 0.25, 0.15, 0.05}}, alpha2).clip_indices == std::vector<std::size_t>{0});
  CHECK(select_grounded(Distribution{{0.3, 0.35, 0.35}}, alpha2).clip_indices == std::vector<std::size_t>{1});
  SelectionPolicy capped{SelectionPolicy::Kind::Threshold, 1, 0.5, 2};
  CHECK(select_grounded(Distribution{{0.25, 0.25, 0.25, 0.25}}, capped).clip_indices.size() == 2);

  SelectionPolicy bad{SelectionPolicy::Kind::TopK, 0};
  CHECK(code_of([&] { select_grounded(Distribution{{1}}, bad); }) == ErrorCode::InvalidPolicy);
  bad = {SelectionPolicy::Kind::Threshold, 1, 0.0};
  CHECK(code_of([&] { select_grounded(Distribution{{1}}, bad); }) == ErrorCode::InvalidPolicy);

  swt::Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(2 + rng.index(8));
    for (auto& v : s) v = rng.gauss();
    const auto p = softmax(s);
    SelectionPolicy k{SelectionPolicy::Kind::TopK, 1 + rng.index(3)};
    Distribution warped = p;
    for (auto& v : warped.probs) v = std::pow(v, 3.0) + 0.1;
    CHECK(select_grounded(p, k).clip_indices == select_grounded(warped, k).clip_indices);
  }
}

TEST_CASE("gradients match finite differences") {
  swt::Rng rng(14);
  double worst = 0;
  for (int i = 0; i < 200; ++i) worst = std::max(worst, swt::retrieval_loss_draw(rng));
  for (int i = 0; i < 30; ++i) worst = std::max(worst, swt::retrieval_draw(rng));
  for (int i = 0; i < 200; ++i) worst = std::max(worst, swt::decision_draw(rng));
  for (int i = 0; i < 200; ++i) worst = std::max(worst, swt::bce_draw(rng));
  CHECK(worst <= 1e-4);
}

TEST_CASE("stationary point and frozen training") {
  // relevant clip equals the query, the other one is opposite
  RetrievalSample s{{1, 0}, {{1, 0}, {-1, 0}}, {0}};
  const auto head = RetrievalHead::identity(2, 0.02);
  const auto obj = retrieval_objective(head, std::vector<RetrievalSample>{s});
  double g = 0;
  for (double v : obj.grad) g += v * v;
  CHECK(std::sqrt(g) < 1e-6);

  swt::Rng rng(15);
  std::vector<RetrievalSample> data(4);
  for (auto& d : data) {
    d.todo_embed = rng.vec(3);
    d.indicators = {rng.unit(3), rng.unit(3)};
    d.relevant = {0};
  }
  const auto init = RetrievalHead::identity(3);
  const auto frozen = train_retrieval(data, 20, 0.0, init);
  CHECK(frozen.head.projection == init.projection);
  CHECK(frozen.loss_curve.size() == 21);

  data[1].relevant.clear();
  CHECK(code_of([&] { train_retrieval(data, 1, 0.1, init); }) == ErrorCode::EmptyRelevantSet);
  CHECK(code_of([&] { train_retrieval(std::vector<RetrievalSample>{}, 1, 0.1, init); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("training raises recall on a planted direction") {
  swt::Rng rng(16);
  const std::size_t d = 8;
  const Vec planted = rng.unit(d);
  auto make = [&](std::size_t count) {
    std::vector<RetrievalSample> out;
    for (std::size_t i = 0; i < count; ++i) {
      RetrievalSample s;
      // the query leans towards the planted direction under heavy noise
      s.todo_embed = rng.unit(d);
      for (std::size_t k = 0; k < d; ++k) s.todo_embed[k] = 0.7 * s.todo_embed[k] + 0.6 * planted[k];
      const std::size_t n = 4, hit = rng.index(n);
      for (std::size_t c = 0; c < n; ++c) {
        Vec v = c == hit ? planted : rng.unit(d);
        for (auto& x : v) x += rng.gauss(0.05);
        s.indicators.push_back(l2_normalize(v));
      }
      s.relevant = {hit};
      out.push_back(s);
    }
    return out;
  };
  const auto train = make(60), held = make(40);
  const auto init = RetrievalHead::identity(d, 0.2);
  const auto r = train_retrieval(train, 300, 0.5, init);
  CHECK(r.loss_curve.back() < r.loss_curve.front());
  CHECK(recall_at_1(r.head, held) >= 0.9);
  CHECK(recall_at_1(r.head, held) >= recall_at_1(init, held));
  const auto back = retrieval_head_from_json(retrieval_head_to_json(r.head));
  CHECK(back.projection == r.head.projection);
  CHECK(back.temperature == r.head.temperature);
}
