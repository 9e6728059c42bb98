#pragma once

#include "ghostlink/kernels.hpp"

namespace ghostlink::kernels::detail {

// Defined by the per-ISA translation units that are compiled in.
const KernelTable& avx2_table();
const KernelTable& neon_table();

}  // namespace ghostlink::kernels::detail
