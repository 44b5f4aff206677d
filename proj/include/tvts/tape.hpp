#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "tvts/tensor.hpp"

namespace tvts {

using GradMap = std::unordered_map<int, Tensor>;  // leaf node id -> gradient

// Reverse-mode tape. Operations append nodes in execution order, which is a
// topological order by construction; backward() walks it once in reverse.
class Tape {
 public:
  // Receives gradients from a node's backward rule and accumulates them into
  // the per-node gradient buffers.
  class Sink {
   public:
    // True when the given input slot is tracked and its gradient is wanted.
    bool needs(size_t slot) const;
    void add(size_t slot, const Tensor& grad);

   private:
    friend class Tape;
    Sink(Tape& tape, int node) : tape_(tape), node_(node) {}
    Tape& tape_;
    int node_;
  };

  using BackwardFn = std::function<void(const Tensor& grad_out, Sink& sink)>;

  // Registers t as a tracked leaf (parameter or probed input).
  int track(Tensor& t);

  // Records an interior op node; inputs may contain -1 for untracked operands.
  int record(std::vector<int> inputs, BackwardFn fn);

  // Gradients of a tracked scalar loss w.r.t. every tracked leaf.
  // Leaves that received no gradient are absent from the map.
  GradMap backward(const Tensor& loss);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::vector<int> inputs;
    BackwardFn fn;  // null for leaves
  };

  void accumulate(int node, const Tensor& grad);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;  // live only during backward()
};

}  // namespace tvts
