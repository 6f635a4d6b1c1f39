#pragma once
// Clip retrieval for grounding answers: the TODO embedding is projected,
// compared to every historical clip indicator by cosine similarity, and the
// temperature-scaled scores are turned into a distribution by softmax.

#include <cstddef>
#include <span>
#include <vector>

#include "json.hpp"
#include "streamweave/vector_core.hpp"

namespace streamweave {

struct RetrievalHead {
  std::size_t dim = 0;
  std::vector<double> projection;  // dim x dim, row-major
  double temperature = 1.0;

  static RetrievalHead identity(std::size_t dim, double temperature = 1.0);
  Vec project(VecView v) const;
};

Distribution score_clips(VecView todo_embed, std::span<const Vec> indicators,
                         const RetrievalHead& head);

struct SelectionPolicy {
  enum class Kind { TopK, Threshold };
  Kind kind = Kind::Threshold;
  std::size_t k = 1;
  double alpha = 2.0;
  std::size_t cap = 8;  // upper bound on threshold selections
};

struct GroundedSelection {
  std::vector<std::size_t> clip_indices;  // sorted ascending
  Distribution predicted;
  SelectionPolicy policy;
};

GroundedSelection select_grounded(const Distribution& predicted, const SelectionPolicy& policy);

struct RetrievalSample {
  Vec todo_embed;
  std::vector<Vec> indicators;
  std::vector<std::size_t> relevant;
};

/// Mean relevance loss over the samples and its gradient w.r.t. the
/// projection (row-major, dim*dim entries), chained through softmax, the
/// temperature, cosine similarity, normalization and the projection.
LossWithGrad retrieval_objective(const RetrievalHead& head, std::span<const RetrievalSample> data);

struct RetrievalTrainResult {
  RetrievalHead head;
  std::vector<double> loss_curve;  // epochs + 1 entries
};

RetrievalTrainResult train_retrieval(std::span<const RetrievalSample> data, int epochs, double lr,
                                     RetrievalHead init);

/// Fraction of samples whose top-scored clip is relevant.
double recall_at_1(const RetrievalHead& head, std::span<const RetrievalSample> data);

nlohmann::json retrieval_head_to_json(const RetrievalHead& head);
RetrievalHead retrieval_head_from_json(const nlohmann::json& doc);

}  // namespace streamweave
