#pragma once

#include <cstdint>

namespace sevo {

#ifdef SEVO_REAL_FLOAT
using real = float;
#else
using real = double;
#endif

// Row/column indices and counts. Signed so that arithmetic on products of
// dimensions (up to ~2.5e11 positions for the largest layers) never wraps.
using index_t = std::int64_t;

} // namespace sevo
