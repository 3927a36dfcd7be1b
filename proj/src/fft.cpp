#include "coversynth/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

#include "coversynth/errors.hpp"

namespace coversynth::fft {

namespace {

// FFTW's planner is not thread-safe; executions on distinct buffers are.
// Plans use FFTW_ESTIMATE so algorithm choice (and thus output bits) is
// reproducible run to run.
std::mutex g_planner_mutex;

fftw_plan get_c2c_plan(int n, int sign) {
    static std::map<std::pair<int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    auto key = std::make_pair(n, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    fftw_plan p = fftw_plan_dft_1d(n, nullptr, nullptr, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, p);
    return p;
}

fftw_plan get_r2c_plan(int n) {
    static std::map<int, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    fftw_plan p = fftw_plan_dft_r2c_1d(n, nullptr, nullptr, FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(n, p);
    return p;
}

fftw_plan get_c2r_plan(int n) {
    static std::map<int, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    fftw_plan p = fftw_plan_dft_c2r_1d(n, nullptr, nullptr, FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(n, p);
    return p;
}

}  // namespace

void transform(std::vector<std::complex<double>>& data, int sign) {
    if (data.empty()) return;
    if (sign != -1 && sign != 1) throw Error("fft: sign must be +-1");
    fftw_plan p = get_c2c_plan(static_cast<int>(data.size()), sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD);
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(p, buf, buf);
}

std::vector<std::complex<double>> real_forward(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    std::vector<std::complex<double>> out(n / 2 + 1);
    if (n == 0) return out;
    fftw_plan p = get_r2c_plan(n);
    std::vector<double> in(x);  // r2c destroys input in some fftw paths
    fftw_execute_dft_r2c(p, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
    return out;
}

std::vector<double> real_backward(const std::vector<std::complex<double>>& spec, int n) {
    if (static_cast<int>(spec.size()) != n / 2 + 1) throw Error("fft: bin count mismatch in real_backward");
    std::vector<double> out(n, 0.0);
    if (n == 0) return out;
    fftw_plan p = get_c2r_plan(n);
    std::vector<std::complex<double>> in(spec);  // c2r destroys input
    fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(in.data()), out.data());
    return out;
}

int next_fast_len(int n, int multiple) {
    if (multiple <= 0) throw Error("next_fast_len: multiple must be positive");
    auto smooth = [](long long v) {
        for (long long f : {2LL, 3LL, 5LL, 7LL}) {
            while (v % f == 0) v /= f;
        }
        return v == 1;
    };
    long long k = (n + multiple - 1) / multiple;
    if (k < 1) k = 1;
    while (!smooth(k * multiple)) ++k;
    return static_cast<int>(k * multiple);
}

}  // namespace coversynth::fft
