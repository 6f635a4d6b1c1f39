#include <cstdlib>
#include <string_view>

#include "streamweave/simd/kernels.hpp"

namespace streamweave::simd {

const KernelTable& active() noexcept {
  static const KernelTable& table = []() -> const KernelTable& {
    const char* forced = std::getenv("STREAMWEAVE_SIMD");
    if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
    if (const KernelTable* wide = avx2_kernels()) return *wide;
    return scalar_kernels();
  }();
  return table;
}

}  // namespace streamweave::simd
