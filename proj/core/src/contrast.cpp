#include "flowid/contrast.hpp"

#include "flowid/error.hpp"

namespace flowid {

Var symmetric_infonce(Var a, Var b, double tau, double cosine_eps) {
  if (!(tau > 0)) throw ConfigError("contrastive temperature must be positive");
  if (cosine_eps < 0) throw ConfigError("cosine epsilon must be nonnegative");
  if (!a.value().same_shape(b.value()) || a.value().rows() == 0)
    throw ShapeError("contrastive views must have equal, non-empty shapes");
  const double rows = static_cast<double>(a.value().rows());
  Var an = ad::row_normalize(a, cosine_eps);
  Var bn = ad::row_normalize(b, cosine_eps);
  Var sim = ad::scale(ad::matmul_bt(an, bn), 1.0 / tau);
  // Diagonal of log_softmax(sim) scores anchors from a; of log_softmax(simᵀ) anchors from b.
  Var forward = ad::trace(ad::log_softmax_rows(sim));
  Var backward = ad::trace(ad::log_softmax_rows(ad::transpose(sim)));
  return ad::scale(ad::add(forward, backward), -1.0 / (2.0 * rows));
}

Var node_node_loss(Var v1, Var v2, double tau_n, double cosine_eps) {
  return symmetric_infonce(v1, v2, tau_n, cosine_eps);
}

Var group_group_loss(Var e1, Var e2, double tau_g, double cosine_eps) {
  return symmetric_infonce(e1, e2, tau_g, cosine_eps);
}

namespace {
double evaluate(const Tensor& a, const Tensor& b, double tau, double eps) {
  Tape tape;
  return symmetric_infonce(tape.constant(a), tape.constant(b), tau, eps).value().item();
}
}  // namespace

double node_node_loss(const Tensor& v1, const Tensor& v2, double tau_n, double cosine_eps) {
  return evaluate(v1, v2, tau_n, cosine_eps);
}

double group_group_loss(const Tensor& e1, const Tensor& e2, double tau_g, double cosine_eps) {
  return evaluate(e1, e2, tau_g, cosine_eps);
}

}  // namespace flowid
