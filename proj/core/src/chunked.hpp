#pragma once

// Chunked, deterministic evaluation of a sum of scalar graph terms together
// with its parameter gradient. Internal to the library.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lyanet/diff.hpp"
#include "lyanet/nn.hpp"

namespace lyanet::detail {

/// Builds the scalar loss node of item `index` on `graph`. bindings[i] is
/// networks[i] bound trainable on the same graph.
using TermBuilder =
    std::function<diff::NodeId(diff::Graph& graph, std::span<const nn::MlpBinding> bindings, std::size_t index)>;

struct ChunkedResult {
  /// Per-item loss values.
  std::vector<double> values;
  /// One flat gradient per network: sum over items (not averaged).
  std::vector<std::vector<double>> gradients;
};

/// Items are split into kReductionChunks contiguous chunks, one graph per
/// chunk; chunk gradients are added in chunk order, so the result does not
/// depend on `workers`.
ChunkedResult evaluate_chunked(std::span<const nn::ParamVector* const> networks, std::size_t count,
                               std::size_t workers, bool want_gradient, const TermBuilder& term);

}  // namespace lyanet::detail
