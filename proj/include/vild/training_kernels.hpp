#pragma once

// Per-proposal loss/gradient accumulation shared by the parallel dataset
// kernel and its serial reference.

#include <span>
#include <vector>

#include "vild/training.hpp"

namespace vild::detail {

struct Workspace {
  std::vector<double> e;
  std::vector<double> grad_e;
  std::vector<double> cos;
  std::vector<double> gcos;
  std::vector<double> unorm;

  void resize(std::size_t dim, std::size_t slots) {
    e.resize(dim);
    grad_e.resize(dim);
    cos.resize(slots);
    gcos.resize(slots);
    unorm.resize(slots);
  }
};

void check_head_against(const RegionHead& head, const TextClassifier& clf);

// acc += weight * (loss, gradient) of one labelled proposal.
void accumulate_text_proposal(const RegionHead& head, const TextClassifier& clf, const OnlineProposal& proposal,
                              double weight, LossResult& acc, Workspace& ws);

void accumulate_image_proposal(const RegionHead& head, const OfflineProposal& proposal, DistillNorm norm,
                               double weight, LossResult& acc, Workspace& ws);

// grad.W += weight * grad_e f^T, grad.b += weight * grad_e.
void accumulate_affine(const RegionHead& head, std::span<const double> feature, std::span<const double> grad_e,
                       double weight, HeadGradient& grad);

}  // namespace vild::detail
