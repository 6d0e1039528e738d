#include "holo/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "holo/error.hpp"

namespace holo {

namespace {

std::mutex g_plan_mutex;
std::map<std::tuple<int, int, int>, fftw_plan> g_plans;

// FFTW_UNALIGNED lets one cached plan execute on any caller buffer.
fftw_plan plan_for(int width, int height, int sign) {
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto key = std::make_tuple(width, height, sign);
    auto it = g_plans.find(key);
    if (it != g_plans.end()) return it->second;
    std::vector<std::complex<double>> dummy(static_cast<size_t>(width) * height);
    fftw_plan p = fftw_plan_dft_2d(height, width, reinterpret_cast<fftw_complex*>(dummy.data()),
                                   reinterpret_cast<fftw_complex*>(dummy.data()), sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) fail_runtime("FftPlanFailed", "fftw_plan_dft_2d returned null");
    g_plans.emplace(key, p);
    return p;
}

void execute(std::vector<std::complex<double>>& data, int width, int height, int sign) {
    require(width >= 1 && height >= 1, "BadDims", "fft2 dimensions must be >= 1");
    require(data.size() == static_cast<size_t>(width) * height, "BadDims",
            "fft2 buffer does not match dimensions");
    fftw_plan p = plan_for(width, height, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(data.data()),
                     reinterpret_cast<fftw_complex*>(data.data()));
}

}  // namespace

void fft2(std::vector<std::complex<double>>& data, int width, int height) {
    execute(data, width, height, FFTW_FORWARD);
}

void ifft2(std::vector<std::complex<double>>& data, int width, int height) {
    execute(data, width, height, FFTW_BACKWARD);
    const double inv = 1.0 / (static_cast<double>(width) * height);
    for (auto& v : data) v *= inv;
}

}  // namespace holo
