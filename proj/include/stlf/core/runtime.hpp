#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace stlf {

/// Keeps large, short-lived activation buffers on the heap instead of
/// mapping and unmapping them on every allocation.
inline void tune_allocator() {
#if defined(__GLIBC__)
	mallopt(M_MMAP_THRESHOLD, 256 << 20);
	mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
}

} // namespace stlf
