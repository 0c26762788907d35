#pragma once

#include <cstddef>
#include <functional>

namespace rsprice {

/// Splits [0, n) into contiguous chunks and runs `body(begin, end)` on up to
/// `threads` workers. Work items must be independent; callers reduce results
/// afterwards in index order so the outcome never depends on `threads`.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rsprice
