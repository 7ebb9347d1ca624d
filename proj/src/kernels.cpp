#include "rnsde/kernels.hpp"

namespace rnsde::kern {
namespace {

const KernelTable* pick() {
#if RNSDE_HAVE_AVX2
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &avx2_table;
#endif
    return &scalar_table;
}

const KernelTable* g_active = nullptr;

}  // namespace

const KernelTable& active() {
    if (!g_active) g_active = pick();
    return *g_active;
}

void force(const KernelTable& t) { g_active = &t; }
void reset_dispatch() { g_active = pick(); }
std::string active_name() { return active().name; }

}  // namespace rnsde::kern
