#include "streamweave/vector_core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "streamweave/simd/kernels.hpp"

namespace streamweave {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::EmptyRelevantSet: return "EmptyRelevantSet";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::SinkClosed: return "SinkClosed";
    case ErrorCode::NonConsecutiveClip: return "NonConsecutiveClip";
    case ErrorCode::QuestionAlreadyActive: return "QuestionAlreadyActive";
    case ErrorCode::NoActiveQuestion: return "NoActiveQuestion";
    case ErrorCode::NonMonotonicAnswer: return "NonMonotonicAnswer";
    case ErrorCode::MalformedSequence: return "MalformedSequence";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::EmptyClipSet: return "EmptyClipSet";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::IncompleteTimeline: return "IncompleteTimeline";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

std::size_t Distribution::argmax() const {
  if (probs.empty()) throw Error(ErrorCode::EmptyInput, "argmax of empty distribution");
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double Distribution::max() const { return probs[argmax()]; }

namespace {

void require_same_dim(VecView a, VecView b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
}

}  // namespace

double dot(VecView a, VecView b) {
  require_same_dim(a, b);
  return simd::active().dot(a.data(), b.data(), a.size());
}

double norm(VecView v) { return std::sqrt(simd::active().sum_squares(v.data(), v.size())); }

Vec l2_normalize(VecView v) {
  const double n = norm(v);
  if (!(n >= kZeroNorm)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  Vec out(v.begin(), v.end());
  simd::active().scale(1.0 / n, out.data(), out.size());
  return out;
}

double cosine_sim(VecView a, VecView b) {
  require_same_dim(a, b);
  const double na = norm(a);
  const double nb = norm(b);
  if (!(na >= kZeroNorm) || !(nb >= kZeroNorm)) {
    throw Error(ErrorCode::ZeroVector, "cosine similarity with a zero vector");
  }
  const double c = dot(a, b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Vec mean_pool(std::span<const Vec> vs) {
  if (vs.empty()) throw Error(ErrorCode::EmptyInput, "mean_pool of an empty list");
  const auto& k = simd::active();
  Vec acc(vs.front().size(), 0.0);
  for (const Vec& v : vs) {
    require_same_dim(acc, v);
    k.axpy(1.0, v.data(), acc.data(), acc.size());
  }
  k.scale(1.0 / static_cast<double>(vs.size()), acc.data(), acc.size());
  return acc;
}

std::vector<Vec> compress_adjacent(std::span<const Vec> vs) {
  std::vector<Vec> out;
  out.reserve((vs.size() + 1) / 2);
  for (std::size_t i = 0; i < vs.size(); i += 2) {
    if (i + 1 < vs.size()) {
      out.push_back(mean_pool(vs.subspan(i, 2)));
    } else {
      if (!out.empty()) require_same_dim(out.front(), vs[i]);
      out.push_back(vs[i]);
    }
  }
  return out;
}

Distribution softmax(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::EmptyInput, "softmax of an empty score list");
  for (double s : scores) {
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFiniteInput, "softmax score is not finite");
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  Distribution d;
  d.probs.resize(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    d.probs[i] = std::exp(scores[i] - top);
    total += d.probs[i];
  }
  for (double& p : d.probs) p /= total;
  return d;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LossWithGrad bce_with_grad(double p, int y) {
  const double q = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  const double target = y != 0 ? 1.0 : 0.0;
  LossWithGrad out;
  out.loss = -(target * std::log(q) + (1.0 - target) * std::log(1.0 - q));
  out.grad = {(q - target) / (q * (1.0 - q))};
  return out;
}

LossWithGrad retrieval_loss_with_grad(const Distribution& predicted,
                                      std::span<const std::size_t> relevant) {
  if (relevant.empty()) throw Error(ErrorCode::EmptyRelevantSet, "relevant clip set is empty");
  const std::set<std::size_t> unique(relevant.begin(), relevant.end());
  for (std::size_t i : unique) {
    if (i >= predicted.size()) {
      throw Error(ErrorCode::IndexOutOfRange, "relevant index " + std::to_string(i) + " >= " +
                                                  std::to_string(predicted.size()));
    }
  }
  const double k = static_cast<double>(unique.size());
  LossWithGrad out;
  out.grad.assign(predicted.size(), 0.0);
  for (std::size_t i : unique) {
    const double p = std::max(predicted[i], kProbEpsilon);
    out.loss -= (1.0 / k) * (1.0 / k) * std::log(p);
    out.grad[i] = -1.0 / (k * k * p);
  }
  return out;
}

}  // namespace streamweave
