#include "tvts/tape.hpp"

#include "tvts/kernels.hpp"

namespace tvts {

bool Tape::Sink::needs(size_t slot) const {
  const auto& in = tape_.nodes_[static_cast<size_t>(node_)].inputs;
  return slot < in.size() && in[slot] >= 0;
}

void Tape::Sink::add(size_t slot, const Tensor& grad) {
  const auto& in = tape_.nodes_[static_cast<size_t>(node_)].inputs;
  if (slot >= in.size() || in[slot] < 0) return;
  tape_.accumulate(in[slot], grad);
}

int Tape::track(Tensor& t) {
  if (!t.defined()) throw ContractError("cannot track an undefined tensor");
  nodes_.push_back(Node{{}, nullptr});
  t.node = static_cast<int>(nodes_.size()) - 1;
  return t.node;
}

int Tape::record(std::vector<int> inputs, BackwardFn fn) {
  nodes_.push_back(Node{std::move(inputs), std::move(fn)});
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::accumulate(int node, const Tensor& grad) {
  Tensor& slot = grads_[static_cast<size_t>(node)];
  if (!slot.defined()) {
    slot = grad.clone();
    return;
  }
  if (slot.numel() != grad.numel() || slot.dtype() != grad.dtype()) {
    throw ShapeError("gradient accumulation shape/dtype mismatch: " + shape_str(slot.shape()) + " vs " +
                     shape_str(grad.shape()));
  }
  if (slot.dtype() == DType::f32) kern::add<float>(slot.numel(), slot.f32(), grad.f32(), slot.f32_mut());
  else kern::add<double>(slot.numel(), slot.f64(), grad.f64(), slot.f64_mut());
}

GradMap Tape::backward(const Tensor& loss) {
  if (!loss.tracked()) throw ContractError("backward: loss is not tracked on this tape");
  if (loss.numel() != 1) throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));

  grads_.assign(nodes_.size(), Tensor());
  grads_[static_cast<size_t>(loss.node)] = Tensor::full({1}, 1.0, loss.dtype());

  for (int i = loss.node; i >= 0; --i) {
    Node& node = nodes_[static_cast<size_t>(i)];
    Tensor& g = grads_[static_cast<size_t>(i)];
    if (!g.defined() || !node.fn) continue;
    Sink sink(*this, i);
    node.fn(g, sink);
    g = Tensor();  // interior gradient no longer needed
  }

  GradMap out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].fn && grads_[i].defined()) out.emplace(static_cast<int>(i), std::move(grads_[i]));
  }
  grads_.clear();
  return out;
}

}  // namespace tvts
