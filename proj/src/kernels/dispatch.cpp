#include <cstdlib>
#include <mutex>
#include <string>

#include "margiheat/errors.hpp"
#include "margiheat/kernels.hpp"

namespace margiheat::kernels {
namespace {

const Ops* select() {
  if (const char* env = std::getenv("MARGIHEAT_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return &scalar_ops();
    if (want == "avx2") {
      const Ops* ops = avx2_ops();
      if (!ops)
        throw InvalidParameter(
            "MARGIHEAT_KERNELS=avx2 but AVX2+FMA is not available");
      return ops;
    }
    throw InvalidParameter("MARGIHEAT_KERNELS must be 'scalar' or 'avx2', got '" +
                           want + "'");
  }
  if (const Ops* ops = avx2_ops()) return ops;
  return &scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops* chosen = select();
  return *chosen;
}

std::string active_name() { return active().name; }

}  // namespace margiheat::kernels
