#pragma once

#include "flowid/autodiff.hpp"

namespace flowid {

struct ContrastConfig {
  double tau_n = 0.5;
  double tau_g = 0.5;
  /// 0 = strict: a zero-norm row raises DegenerateEmbeddingError. Otherwise
  /// rows are divided by (‖x‖ + cosine_eps).
  double cosine_eps = 0.0;
};

/// Symmetric InfoNCE over cosine similarities: row i of `a` is the positive of
/// row i of `b`, every row of the opposite view is in the denominator.
/// Returns (1/2N)·Σ_i [ℓ(a_i, b) + ℓ(b_i, a)] as a 1×1 node.
Var symmetric_infonce(Var a, Var b, double tau, double cosine_eps = 0.0);

/// Flow-flow loss over projected node embeddings of the two views.
Var node_node_loss(Var v1, Var v2, double tau_n, double cosine_eps = 0.0);
/// Group-group loss over projected hyperedge embeddings of the two views.
Var group_group_loss(Var e1, Var e2, double tau_g, double cosine_eps = 0.0);

/// Plain-tensor evaluation (no gradients).
double node_node_loss(const Tensor& v1, const Tensor& v2, double tau_n, double cosine_eps = 0.0);
double group_group_loss(const Tensor& e1, const Tensor& e2, double tau_g,
                        double cosine_eps = 0.0);

}  // namespace flowid
