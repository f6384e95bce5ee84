#include "ouctrl/fft.hpp"
#include "ouctrl/errors.hpp"

#include <fftw3.h>

#include <array>
#include <map>
#include <mutex>
#include <vector>

namespace ouctrl::fft {

namespace {

struct PlanKey {
    std::array<int, 4> dims{};
    int rank = 0;
    int sign = 0;
    auto operator<=>(const PlanKey&) const = default;
};

// Planner access is serialized (the FFTW planner is not thread-safe); the
// new-array execute below is. FFTW_UNALIGNED keeps plans valid for any
// caller-provided buffers.
fftw_plan get_plan(const PlanKey& key) {
    static std::mutex mtx;
    static std::map<PlanKey, fftw_plan> cache;
    std::scoped_lock lock(mtx);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    std::size_t total = 1;
    for (int i = 0; i < key.rank; ++i) total *= static_cast<std::size_t>(key.dims[i]);
    std::vector<kern::cplx> dummy(total);
    auto* buf = reinterpret_cast<fftw_complex*>(dummy.data());
    fftw_plan plan = fftw_plan_dft(key.rank, key.dims.data(), buf, buf,
                                   key.sign == kForward ? FFTW_FORWARD : FFTW_BACKWARD,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan) throw Error("fft: FFTW planning failed");
    cache.emplace(key, plan);
    return plan;
}

} // namespace

void dft(int rank, const int* dims, const kern::cplx* in, kern::cplx* out, int sign) {
    if (rank < 1 || rank > 4) throw Error("fft: rank out of range");
    PlanKey key;
    key.rank = rank;
    key.sign = sign;
    for (int i = 0; i < rank; ++i) key.dims[i] = dims[i];
    fftw_plan plan = get_plan(key);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<kern::cplx*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

} // namespace ouctrl::fft
