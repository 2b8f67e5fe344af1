#include "kfr/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "kfr/errors.hpp"

namespace kfr::kernels {
namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64) || defined(__i386__)) && \
    (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend env_request() {
    const char* env = std::getenv("KFR_SIMD");
    if (!env) return Backend::Auto;
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0) return Backend::Avx2;
    if (std::strcmp(env, "neon") == 0) return Backend::Neon;
    return Backend::Auto;
}

Backend pick_auto() {
    if (avx2_ops() && cpu_has_avx2()) return Backend::Avx2;
    if (neon_ops()) return Backend::Neon;
    return Backend::Scalar;
}

Backend initial_backend() {
    const Backend req = env_request();
    if (req != Backend::Auto && backend_available(req)) return req;
    return pick_auto();
}

Backend& current() {
    static Backend b = initial_backend();
    return b;
}

}  // namespace

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return avx2_ops() != nullptr && cpu_has_avx2();
        case Backend::Neon: return neon_ops() != nullptr;
        case Backend::Auto: return true;
    }
    return false;
}

const Ops& active() {
    switch (current()) {
        case Backend::Avx2: return *avx2_ops();
        case Backend::Neon: return *neon_ops();
        default: return scalar_ops();
    }
}

Backend active_backend() { return current(); }

void set_backend(Backend b) {
    if (b == Backend::Auto) {
        current() = pick_auto();
        return;
    }
    if (!backend_available(b)) throw Error("requested SIMD backend is not available");
    current() = b;
}

}  // namespace kfr::kernels
