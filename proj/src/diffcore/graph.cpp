#include "oplab/diffcore/graph.hpp"

#include "oplab/diffcore/mlp.hpp"

#include <cmath>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace oplab::diffcore {

namespace {
// The tape allocates and frees tens of batch-sized matrices per gradient
// step; with default glibc settings the freed top-of-heap is returned to the
// kernel and re-faulted immediately, which roughly doubles the step cost.
// Raising the trim/mmap thresholds keeps that memory pooled.
[[maybe_unused]] const bool malloc_tuned = [] {
#if defined(__GLIBC__)
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
#endif
  return true;
}();
}  // namespace

Var Graph::param(ParamStore& store, const std::string& name) {
  const auto key = std::make_pair(static_cast<const ParamStore*>(&store), name);
  auto it = param_cache_.find(key);
  if (it != param_cache_.end()) return Var(this, it->second);
  Var v = push(store.at(name).value, {}, nullptr);
  bindings_.emplace_back(&store, name, v.index());
  param_cache_[key] = v.index();
  return v;
}

void Graph::backward(Var loss, const std::string& loss_name) {
  Node& top = nodes_[loss.index()];
  if (top.val.size() != 1)
    throw DimensionError("backward: loss must be a scalar node");
  if (!std::isfinite(top.val(0, 0)))
    throw NumericError("non-finite loss in " + loss_name);
  top.grad = Matrix::Ones(1, 1);
  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.back) continue;
    n.back(*this, i, n.parents);
  }
  for (const auto& [store, name, idx] : bindings_) {
    const Node& n = nodes_[idx];
    if (n.grad.size() != 0) store->at(name).grad += n.grad;
  }
}

}  // namespace oplab::diffcore
