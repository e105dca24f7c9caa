#pragma once

#include <cstddef>
#include <functional>

namespace lyanet {

/// Number of workers to use when the caller asks for `requested` (0 = all cores).
std::size_t resolve_workers(std::size_t requested);

/// Splits [0, count) into `chunks` contiguous ranges and runs
/// fn(chunk, begin, end) for each one on up to `workers` threads.
///
/// The partition depends only on (count, chunks), never on the worker count,
/// so per-chunk results reduced in chunk order are bitwise reproducible.
void parallel_chunks(std::size_t count, std::size_t chunks, std::size_t workers,
                     const std::function<void(std::size_t chunk, std::size_t begin, std::size_t end)>& fn);

/// Fixed chunk count used by the trainers and evaluators.
inline constexpr std::size_t kReductionChunks = 16;

}  // namespace lyanet
