#include "streamweave/retrieval.hpp"

#include <algorithm>
#include <numeric>

#include "streamweave/simd/kernels.hpp"

namespace streamweave {

RetrievalHead RetrievalHead::identity(std::size_t dim, double temperature) {
  RetrievalHead head;
  head.dim = dim;
  head.temperature = temperature;
  head.projection.assign(dim * dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i) head.projection[i * dim + i] = 1.0;
  return head;
}

Vec RetrievalHead::project(VecView v) const {
  if (v.size() != dim || projection.size() != dim * dim) {
    throw Error(ErrorCode::DimensionMismatch, "retrieval head expects dim " + std::to_string(dim));
  }
  Vec out(dim);
  simd::active().gemv(projection.data(), v.data(), out.data(), dim, dim);
  return out;
}

Distribution score_clips(VecView todo_embed, std::span<const Vec> indicators,
                         const RetrievalHead& head) {
  if (indicators.empty()) throw Error(ErrorCode::EmptyClipSet, "no clips to score");
  if (!(head.temperature > 0.0)) throw Error(ErrorCode::InvalidConfig, "temperature must be > 0");
  const Vec query = l2_normalize(head.project(todo_embed));
  std::vector<double> scores;
  scores.reserve(indicators.size());
  for (const Vec& ind : indicators) scores.push_back(cosine_sim(query, ind) / head.temperature);
  return softmax(scores);
}

GroundedSelection select_grounded(const Distribution& predicted, const SelectionPolicy& policy) {
  if (policy.kind == SelectionPolicy::Kind::TopK && policy.k < 1) {
    throw Error(ErrorCode::InvalidPolicy, "top_k requires k >= 1");
  }
  if (policy.kind == SelectionPolicy::Kind::Threshold && (!(policy.alpha > 0.0) || policy.cap < 1)) {
    throw Error(ErrorCode::InvalidPolicy, "threshold requires alpha > 0 and cap >= 1");
  }
  const std::size_t n = predicted.size();
  GroundedSelection sel;
  sel.predicted = predicted;
  sel.policy = policy;
  if (n == 0) return sel;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predicted[a] > predicted[b]; });

  std::size_t take = 0;
  if (policy.kind == SelectionPolicy::Kind::TopK) {
    take = std::min(policy.k, n);
  } else {
    const double bound = policy.alpha / static_cast<double>(n) - 1e-12;
    take = static_cast<std::size_t>(
        std::count_if(order.begin(), order.end(), [&](std::size_t i) { return predicted[i] >= bound; }));
    take = std::clamp<std::size_t>(take, 1, policy.cap);
  }
  sel.clip_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
  std::sort(sel.clip_indices.begin(), sel.clip_indices.end());
  return sel;
}

LossWithGrad retrieval_objective(const RetrievalHead& head, std::span<const RetrievalSample> data) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no retrieval samples");
  const std::size_t d = head.dim;
  const auto& k = simd::active();
  LossWithGrad out;
  out.grad.assign(d * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(data.size());

  Vec a(d);
  Vec dy(d);
  for (const RetrievalSample& s : data) {
    if (s.indicators.empty()) throw Error(ErrorCode::EmptyClipSet, "sample without clips");
    const Vec y = head.project(s.todo_embed);
    const double y_norm = norm(y);
    if (!(y_norm >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "projected query is zero");
    const Vec u = l2_normalize(y);

    std::vector<Vec> units;
    units.reserve(s.indicators.size());
    std::vector<double> scores;
    scores.reserve(s.indicators.size());
    for (const Vec& ind : s.indicators) {
      units.push_back(l2_normalize(ind));
      scores.push_back(dot(u, units.back()) / head.temperature);
    }
    const Distribution p = softmax(scores);
    const LossWithGrad lg = retrieval_loss_with_grad(p, s.relevant);
    out.loss += lg.loss * inv_n;

    // softmax backward: dz_j = P_j (g_j - sum_i g_i P_i)
    double gp = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) gp += lg.grad[i] * p[i];
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double ds = p[j] * (lg.grad[j] - gp) / head.temperature;
      k.axpy(ds, units[j].data(), a.data(), d);
    }
    // normalization backward: dy = (a - (a.u) u) / |y|
    const double au = dot(a, u);
    for (std::size_t i = 0; i < d; ++i) dy[i] = (a[i] - au * u[i]) / y_norm;
    k.ger(inv_n, dy.data(), s.todo_embed.data(), out.grad.data(), d, d);
  }
  return out;
}

RetrievalTrainResult train_retrieval(std::span<const RetrievalSample> data, int epochs, double lr,
                                     RetrievalHead init) {
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no retrieval samples");
  for (const auto& s : data) {
    if (s.relevant.empty()) throw Error(ErrorCode::EmptyRelevantSet, "sample without relevant clips");
  }
  RetrievalTrainResult result{std::move(init), {}};
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const LossWithGrad obj = retrieval_objective(result.head, data);
    result.loss_curve.push_back(obj.loss);
    simd::active().axpy(-lr, obj.grad.data(), result.head.projection.data(), obj.grad.size());
  }
  result.loss_curve.push_back(retrieval_objective(result.head, data).loss);
  return result;
}

double recall_at_1(const RetrievalHead& head, std::span<const RetrievalSample> data) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : data) {
    const std::size_t top = score_clips(s.todo_embed, s.indicators, head).argmax();
    if (std::find(s.relevant.begin(), s.relevant.end(), top) != s.relevant.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

nlohmann::json retrieval_head_to_json(const RetrievalHead& head) {
  return {{"dim", head.dim}, {"temperature", head.temperature}, {"projection", head.projection}};
}

RetrievalHead retrieval_head_from_json(const nlohmann::json& doc) {
  try {
    RetrievalHead head;
    head.dim = doc.at("dim").get<std::size_t>();
    head.temperature = doc.value("temperature", 1.0);
    head.projection = doc.at("projection").get<std::vector<double>>();
    if (head.projection.size() != head.dim * head.dim) {
      throw Error(ErrorCode::SchemaError, "retrieval head: projection must hold dim*dim entries");
    }
    return head;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("retrieval head: ") + e.what());
  }
}

}  // namespace streamweave
