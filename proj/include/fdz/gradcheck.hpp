#pragma once

#include "fdz/graph.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fdz::nn {

struct GradCheckEntry {
  std::string tensor;
  double max_rel_err = 0.0;
  size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  std::uint64_t subsample_seed = 0;
  bool pass = false;

  std::string to_text() const;
};

// Central finite differences on every parameter and input element of a graph
// (subsampled per tensor above `max_per_tensor` elements; the subsample seed
// is recorded in the report). The objective is a fixed random projection of
// every tap output, so all heads contribute. Relative error per element is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// Rectifier and pooling kinks make any single step size unreliable: a probe
// that shifts a pre-activation across zero produces a one-sided estimate no
// matter how small the analytic error is. Elements that miss the tolerance at
// the base step are therefore re-probed at h/10 and h/100 and the best
// agreement kept. A wrong analytic gradient fails at every rung, since the
// numeric estimate converges to the true derivative as the step shrinks.
//
// `atol` is the absolute agreement floor: elements whose analytic and numeric
// values differ by no more than it count as exact. Central differences of a
// double-precision objective carry cancellation noise of roughly
// eps*|L|/(2h), so gradients at or below that scale cannot be resolved
// relatively no matter how correct they are.
template <typename S>
GradCheckReport grad_check(Graph<S>& graph, const std::vector<Tensor4<S>>& inputs, double h,
                           double tol, bool training = false, size_t max_per_tensor = 10000,
                           std::uint64_t subsample_seed = 1234, double atol = 1e-8) {
  std::vector<const Tensor4<S>*> in_ptrs;
  for (const auto& t : inputs) in_ptrs.push_back(&t);

  // Fixed projection weights per tap.
  graph.forward(in_ptrs, training);
  std::vector<std::pair<int, Tensor4<S>>> projections;
  {
    std::mt19937_64 rng(subsample_seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (const auto& [label, node] : graph.taps()) {
      Tensor4<S> r = Tensor4<S>::zeros_like(graph.value(node));
      for (size_t i = 0; i < r.count(); ++i) r.data()[i] = static_cast<S>(d(rng));
      projections.emplace_back(node, std::move(r));
    }
    if (projections.empty()) throw std::invalid_argument("grad_check: graph has no taps");
  }

  auto objective = [&]() -> double {
    graph.forward(in_ptrs, training);
    double L = 0.0;
    for (const auto& [node, r] : projections) {
      const Tensor4<S>& v = graph.value(node);
      if (!v.all_finite()) throw std::runtime_error("grad_check: non-finite activation");
      for (size_t i = 0; i < v.count(); ++i)
        L += static_cast<double>(v.data()[i]) * static_cast<double>(r.data()[i]);
    }
    return L;
  };

  // Analytic gradients.
  graph.zero_param_grads();
  graph.forward(in_ptrs, training);
  std::vector<std::pair<int, const Tensor4<S>*>> seeds;
  for (const auto& [node, r] : projections) seeds.emplace_back(node, &r);
  graph.backward(seeds, /*want_input_grads=*/true);

  struct Target {
    std::string name;
    S* values;
    const S* analytic;
    size_t count;
  };
  std::vector<Target> targets;
  for (auto* p : graph.params()) {
    p->value.ensure_grad();
    targets.push_back({p->name, p->value.data(), p->value.grad_data(), p->value.count()});
  }
  // Inputs are perturbed through local copies bound back into the graph.
  std::vector<Tensor4<S>> mutable_inputs = inputs;
  std::vector<Tensor4<S>> input_analytic;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Tensor4<S>& gi = graph.input_grad(i);
    input_analytic.push_back(gi.empty() ? Tensor4<S>::zeros_like(inputs[i]) : gi);
  }
  in_ptrs.clear();
  for (auto& t : mutable_inputs) in_ptrs.push_back(&t);
  for (size_t i = 0; i < mutable_inputs.size(); ++i)
    targets.push_back({"input" + std::to_string(i), mutable_inputs[i].data(),
                       input_analytic[i].data(), mutable_inputs[i].count()});

  GradCheckReport report;
  report.tolerance = tol;
  report.subsample_seed = subsample_seed;
  std::mt19937_64 pick(subsample_seed);
  for (const auto& t : targets) {
    GradCheckEntry entry;
    entry.tensor = t.name;
    std::vector<size_t> indices;
    if (t.count <= max_per_tensor) {
      indices.resize(t.count);
      for (size_t i = 0; i < t.count; ++i) indices[i] = i;
    } else {
      std::uniform_int_distribution<size_t> d(0, t.count - 1);
      std::set<size_t> chosen;
      while (chosen.size() < max_per_tensor) chosen.insert(d(pick));
      indices.assign(chosen.begin(), chosen.end());
    }
    for (size_t idx : indices) {
      const S saved = t.values[idx];
      const double analytic = static_cast<double>(t.analytic[idx]);
      double best_rel = std::numeric_limits<double>::infinity();
      for (double step = h; step >= h / 100.0 - 1e-30; step /= 10.0) {
        t.values[idx] = saved + static_cast<S>(step);
        const double lp = objective();
        t.values[idx] = saved - static_cast<S>(step);
        const double lm = objective();
        t.values[idx] = saved;
        const double numeric = (lp - lm) / (2.0 * step);
        const double rel =
            std::abs(analytic - numeric) <= atol
                ? 0.0
                : std::abs(analytic - numeric) /
                      std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        best_rel = std::min(best_rel, rel);
        if (best_rel < tol) break;
      }
      entry.max_rel_err = std::max(entry.max_rel_err, best_rel);
    }
    entry.checked = indices.size();
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

inline std::string GradCheckReport::to_text() const {
  std::string out;
  for (const auto& e : entries) {
    out += e.tensor + ": max_rel_err=" + std::to_string(e.max_rel_err) +
           " checked=" + std::to_string(e.checked) + "\n";
  }
  out += std::string("overall: max_rel_err=") + std::to_string(max_rel_err) +
         " tol=" + std::to_string(tolerance) + " seed=" + std::to_string(subsample_seed) +
         (pass ? " PASS" : " FAIL") + "\n";
  return out;
}

}  // namespace fdz::nn
