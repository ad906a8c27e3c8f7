#pragma once

#include "fdz/layers.hpp"

#include <map>
#include <set>
#include <string>

namespace fdz::nn {

// A directed acyclic computation graph over Layer nodes. Nodes are appended
// in topological order; inputs are placeholder nodes bound at forward time.
// Named taps expose intermediate activations (and accept loss gradients) so
// composite objectives can reach inside the network.
template <typename S>
class Graph {
 public:
  int add_input(std::string name) {
    nodes_.push_back(NodeRec{std::move(name), nullptr, {}});
    input_nodes_.push_back(static_cast<int>(nodes_.size()) - 1);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int add(std::string name, std::unique_ptr<Layer<S>> layer, std::vector<int> inputs) {
    const int id = static_cast<int>(nodes_.size());
    for (int i : inputs)
      if (i < 0 || i >= id) throw std::invalid_argument("graph: inputs must precede the node");
    nodes_.push_back(NodeRec{std::move(name), std::move(layer), std::move(inputs)});
    return id;
  }

  void mark_tap(const std::string& label, int node) { taps_[label] = node; }
  int tap_node(const std::string& label) const { return taps_.at(label); }
  bool has_tap(const std::string& label) const { return taps_.count(label) > 0; }
  const std::map<std::string, int>& taps() const { return taps_; }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int input_count() const { return static_cast<int>(input_nodes_.size()); }
  const std::string& node_name(int id) const { return nodes_[id].name; }

  // Nodes at which backward propagation stops (their inputs receive no
  // gradient and their parameters no updates). Used for stage freezing.
  void set_gradient_barriers(std::set<int> barriers) { barriers_ = std::move(barriers); }
  void clear_gradient_barriers() { barriers_.clear(); }

  void forward(const std::vector<const Tensor4<S>*>& inputs, bool training) {
    if (inputs.size() != input_nodes_.size())
      throw std::invalid_argument("graph: wrong number of inputs");
    ++forward_count_;
    acts_.assign(nodes_.size(), Tensor4<S>());
    for (size_t i = 0; i < inputs.size(); ++i) acts_[input_nodes_[i]] = *inputs[i];
    std::vector<const Tensor4<S>*> in_ptrs;
    for (size_t id = 0; id < nodes_.size(); ++id) {
      if (!nodes_[id].layer) continue;
      in_ptrs.clear();
      for (int i : nodes_[id].inputs) in_ptrs.push_back(&acts_[i]);
      acts_[id] = nodes_[id].layer->forward(in_ptrs, training);
    }
  }

  const Tensor4<S>& value(int node) const { return acts_.at(node); }
  const Tensor4<S>& tap_value(const std::string& label) const { return acts_.at(taps_.at(label)); }

  // Seeds output gradients at the given nodes, then runs the reverse sweep.
  // Only ancestors of seeded nodes are processed. Parameter gradients
  // accumulate; call zero_param_grads() between steps.
  void backward(const std::vector<std::pair<int, const Tensor4<S>*>>& seeds,
                bool want_input_grads = false) {
    grads_.assign(nodes_.size(), Tensor4<S>());
    std::vector<bool> active(nodes_.size(), false);
    for (const auto& [node, g] : seeds) {
      if (!g->same_shape(acts_[node])) throw std::invalid_argument("graph: bad seed shape");
      if (grads_[node].empty())
        grads_[node] = *g;
      else
        grads_[node].flat() += g->flat();
      active[node] = true;
    }
    std::vector<const Tensor4<S>*> in_ptrs;
    std::vector<Tensor4<S>*> grad_ptrs;
    for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
      if (!active[id] || !nodes_[id].layer) continue;
      if (barriers_.count(id)) continue;
      in_ptrs.clear();
      grad_ptrs.clear();
      for (int i : nodes_[id].inputs) {
        in_ptrs.push_back(&acts_[i]);
        const bool is_input_node = !nodes_[i].layer;
        if (is_input_node && !want_input_grads) {
          grad_ptrs.push_back(nullptr);
          continue;
        }
        if (grads_[i].empty()) grads_[i] = Tensor4<S>::zeros_like(acts_[i]);
        grad_ptrs.push_back(&grads_[i]);
        active[i] = true;
      }
      nodes_[id].layer->backward(in_ptrs, acts_[id], grads_[id], grad_ptrs);
    }
  }

  const Tensor4<S>& input_grad(int input_index) const {
    return grads_.at(input_nodes_.at(input_index));
  }

  std::vector<Param<S>*> params() {
    std::vector<Param<S>*> out;
    for (auto& n : nodes_)
      if (n.layer)
        for (auto* p : n.layer->params()) out.push_back(p);
    return out;
  }

  std::vector<Param<S>*> state() {
    std::vector<Param<S>*> out;
    for (auto& n : nodes_)
      if (n.layer)
        for (auto* p : n.layer->state()) out.push_back(p);
    return out;
  }

  size_t param_count() {
    size_t n = 0;
    for (auto* p : params()) n += p->value.count();
    return n;
  }

  void zero_param_grads() {
    for (auto* p : params()) p->value.zero_grad();
  }

  // Instrumentation for the benchmark protocol tests.
  long forward_count() const { return forward_count_; }
  void reset_forward_count() { forward_count_ = 0; }

 private:
  struct NodeRec {
    std::string name;
    std::unique_ptr<Layer<S>> layer;
    std::vector<int> inputs;
  };

  std::vector<NodeRec> nodes_;
  std::vector<int> input_nodes_;
  std::map<std::string, int> taps_;
  std::set<int> barriers_;
  std::vector<Tensor4<S>> acts_;
  std::vector<Tensor4<S>> grads_;
  long forward_count_ = 0;
};

}  // namespace fdz::nn
