#include "pslam/kernels.hpp"

#include <cstdlib>

namespace pslam::kernels {

const Ops* avx2_ops_internal();  // defined in kernels_avx2.cpp

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

struct Selected {
  const Ops* ops;
  std::string_view name;
};

Selected select() {
  const char* env = std::getenv("PSLAM_KERNELS");
  if (env) {
    if (const Ops* o = ops_by_name(env)) {
      return {o, std::string_view(env) == "scalar" ? "scalar" : "avx2"};
    }
    // Unknown or unsupported request falls back to the reference kernels.
    return {&scalar_ops(), "scalar"};
  }
  if (cpu_has_avx2()) {
    if (const Ops* o = avx2_ops_internal()) return {o, "avx2"};
  }
  return {&scalar_ops(), "scalar"};
}

const Selected& selected() {
  static Selected s = select();
  return s;
}

}  // namespace

const Ops& active() { return *selected().ops; }

std::string_view active_name() { return selected().name; }

const Ops* ops_by_name(std::string_view name) {
  if (name == "scalar") return &scalar_ops();
  if (name == "avx2" && cpu_has_avx2()) return avx2_ops_internal();
  return nullptr;
}

}  // namespace pslam::kernels
