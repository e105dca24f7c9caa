#include "chunked.hpp"

#include <algorithm>

#include "lyanet/parallel.hpp"

namespace lyanet::detail {

ChunkedResult evaluate_chunked(std::span<const nn::ParamVector* const> networks, std::size_t count,
                               std::size_t workers, bool want_gradient, const TermBuilder& term) {
  ChunkedResult result;
  result.values.assign(count, 0.0);
  result.gradients.resize(networks.size());
  for (std::size_t i = 0; i < networks.size(); ++i) result.gradients[i].assign(networks[i]->size(), 0.0);
  if (count == 0) return result;

  const std::size_t chunks = std::min(kReductionChunks, count);
  std::vector<std::vector<std::vector<double>>> partial(chunks);
  parallel_chunks(count, chunks, resolve_workers(workers),
                  [&](std::size_t chunk, std::size_t begin, std::size_t end) {
                    diff::Graph graph;
                    std::vector<nn::MlpBinding> bindings;
                    bindings.reserve(networks.size());
                    diff::LeafId next_leaf = 0;
                    for (const nn::ParamVector* net : networks) {
                      bindings.push_back(nn::MlpBinding::trainable(graph, *net, next_leaf));
                      next_leaf += static_cast<diff::LeafId>(bindings.back().leaf_count());
                    }
                    diff::NodeId total = 0;
                    for (std::size_t i = begin; i < end; ++i) {
                      const diff::NodeId node = term(graph, bindings, i);
                      result.values[i] = graph.scalar(node);
                      total = i == begin ? node : graph.add(total, node);
                    }
                    if (!want_gradient) return;
                    auto& grads = partial[chunk];
                    grads.resize(networks.size());
                    for (std::size_t n = 0; n < networks.size(); ++n) grads[n].assign(networks[n]->size(), 0.0);
                    graph.backward(total, [&](diff::LeafId leaf, std::span<const double> adjoint) {
                      for (std::size_t n = 0; n < bindings.size(); ++n) {
                        if (bindings[n].accumulate(leaf, adjoint, grads[n])) return;
                      }
                    });
                  });
  if (want_gradient) {
    for (const auto& grads : partial) {
      for (std::size_t n = 0; n < grads.size(); ++n) {
        for (std::size_t j = 0; j < grads[n].size(); ++j) result.gradients[n][j] += grads[n][j];
      }
    }
  }
  return result;
}

}  // namespace lyanet::detail
