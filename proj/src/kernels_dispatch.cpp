#include <cstring>

#include "fef/kernels.hpp"

namespace fef::kernels {

const Ops* avx2_ops();
const Ops* neon_ops();

namespace {

const Ops* detect() {
#if defined(__x86_64__)
  if (const Ops* t = avx2_ops()) {
    if (__builtin_cpu_supports("avx2")) return t;
  }
#endif
  if (const Ops* t = neon_ops()) return t;  // baseline on aarch64
  return &scalar_ops();
}

const Ops* g_active = nullptr;

}  // namespace

const Ops& ops() {
  if (!g_active) g_active = detect();
  return *g_active;
}

const char* active_backend() { return ops().name; }

void force_backend(const char* name) {
  if (std::strcmp(name, "scalar") == 0) {
    g_active = &scalar_ops();
    return;
  }
  if (std::strcmp(name, "avx2") == 0) {
    const Ops* t = avx2_ops();
#if defined(__x86_64__)
    if (t && __builtin_cpu_supports("avx2")) {
      g_active = t;
      return;
    }
#endif
    throw Error("avx2 backend unavailable on this machine");
  }
  if (std::strcmp(name, "neon") == 0) {
    if (const Ops* t = neon_ops()) {
      g_active = t;
      return;
    }
    throw Error("neon backend unavailable on this machine");
  }
  throw Error(detail::msg("unknown kernel backend: ", name));
}

void reset_backend() { g_active = nullptr; }

}  // namespace fef::kernels
