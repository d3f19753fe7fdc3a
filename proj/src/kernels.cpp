#include "doors/kernels.hpp"

#include <cstdlib>
#include <string>

namespace doors::kern {

extern const Ops kScalarOps;
#if defined(DOORS_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
extern const Ops kAvx2Ops;
#endif
#if defined(DOORS_HAVE_NEON) && defined(__aarch64__)
extern const Ops kNeonOps;
#endif

namespace {

const Ops* best_available() {
#if defined(DOORS_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2Ops;
#endif
#if defined(DOORS_HAVE_NEON) && defined(__aarch64__)
  return &kNeonOps;
#endif
  return &kScalarOps;
}

const Ops* initial() {
  if (const char* env = std::getenv("DOORS_KERNELS")) {
    const std::string want(env);
    for (const Ops* o : available())
      if (want == o->name) return o;
  }
  return best_available();
}

const Ops*& active_slot() {
  static const Ops* slot = initial();
  return slot;
}

}  // namespace

const Ops& active() { return *active_slot(); }

const Ops& scalar_ops() { return kScalarOps; }

std::vector<const Ops*> available() {
  std::vector<const Ops*> out{&kScalarOps};
#if defined(DOORS_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) out.push_back(&kAvx2Ops);
#endif
#if defined(DOORS_HAVE_NEON) && defined(__aarch64__)
  out.push_back(&kNeonOps);
#endif
  return out;
}

bool select(std::string_view name) {
  for (const Ops* o : available()) {
    if (name == o->name) {
      active_slot() = o;
      return true;
    }
  }
  return false;
}

}  // namespace doors::kern
