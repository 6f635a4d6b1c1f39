#pragma once
// Numeric building blocks shared by the perception, decision and retrieval
// stages. All functions are pure; errors are reported as streamweave::Error.

#include <cstddef>
#include <span>
#include <vector>

#include "streamweave/error.hpp"

namespace streamweave {

using Vec = std::vector<double>;
using VecView = std::span<const double>;

/// Probability vector; entries in [0,1] summing to 1.
struct Distribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  std::size_t argmax() const;
  double max() const;
};

struct LossWithGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

inline constexpr double kProbEpsilon = 1e-7;
inline constexpr double kZeroNorm = 1e-12;

double dot(VecView a, VecView b);
double norm(VecView v);

Vec l2_normalize(VecView v);
double cosine_sim(VecView a, VecView b);

/// Componentwise arithmetic mean.
Vec mean_pool(std::span<const Vec> vs);

/// Pairwise mean of adjacent vectors; an odd tail passes through unchanged.
std::vector<Vec> compress_adjacent(std::span<const Vec> vs);

/// Max-subtracted softmax.
Distribution softmax(std::span<const double> scores);

double logistic(double z);

/// Binary cross-entropy on a probability; grad is d loss / d p (size 1).
/// p is clamped to [kProbEpsilon, 1 - kProbEpsilon].
LossWithGrad bce_with_grad(double p, int y);

/// Relevance loss over a predicted clip distribution:
///   loss = -(1/|R|) * sum_{i in R} (1/|R|) * ln P(i)
/// grad has one entry per clip (d loss / d P(i)), zero outside R.
LossWithGrad retrieval_loss_with_grad(const Distribution& predicted,
                                      std::span<const std::size_t> relevant);

}  // namespace streamweave
