#include "coversynth/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include "coversynth/errors.hpp"

namespace coversynth {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'T', 'N'};
constexpr std::uint8_t kVersion = 1;

void put_u64(std::ofstream& f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<char*>(b), 8);
}

std::uint64_t take_u64(std::ifstream& f) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void dump_tensor(const Tensor& t, const std::string& path) {
    if (t.data.size() != t.element_count()) throw ConfigError("dump_tensor: dims and data size disagree");
    for (double v : t.data)
        if (!std::isfinite(v)) throw ConfigError("dump_tensor: non-finite entry");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("dump_tensor: cannot open " + path);
    f.write(kMagic, 4);
    f.put(static_cast<char>(kVersion));
    f.put(static_cast<char>(t.dims.size()));
    for (auto d : t.dims) put_u64(f, d);
    static_assert(sizeof(double) == 8);
    for (double v : t.data) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(f, bits);
    }
    if (!f) throw StageError("tensor_io", "write failed: " + path);
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("load_tensor: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0)
        throw ConfigError("load_tensor: bad magic number in " + path);
    const int version = f.get();
    if (version != kVersion) throw ConfigError("load_tensor: unsupported version in " + path);
    const int ndim = f.get();
    if (ndim < 0 || ndim > 8) throw ConfigError("load_tensor: implausible axis count in " + path);

    Tensor t;
    t.dims.resize(static_cast<std::size_t>(ndim));
    for (auto& d : t.dims) d = take_u64(f);
    if (!f) throw ConfigError("load_tensor: truncated header in " + path);
    const std::uint64_t count = t.element_count();
    if (count > (1ULL << 32)) throw ConfigError("load_tensor: implausible element count in " + path);
    t.data.resize(count);
    for (auto& v : t.data) {
        const std::uint64_t bits = take_u64(f);
        if (!f) throw ConfigError("load_tensor: truncated data in " + path);
        std::memcpy(&v, &bits, 8);
    }
    return t;
}

Tensor tensor_from_matrix(const Mat& m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.data.resize(static_cast<std::size_t>(m.size()));
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) t.data[i++] = m(r, c);
    return t;
}

Mat matrix_from_tensor(const Tensor& t) {
    if (t.dims.size() != 2) throw ConfigError("matrix_from_tensor: expected 2 axes");
    Mat m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = t.data[i++];
    return m;
}

Tensor tensor_from_templates(const nmf2d::TemplateTensor& w) {
    Tensor t;
    const std::uint64_t M = static_cast<std::uint64_t>(w.rows());
    const std::uint64_t K = static_cast<std::uint64_t>(w.components());
    const std::uint64_t T = static_cast<std::uint64_t>(w.lag_count());
    t.dims = {M, K, T};
    t.data.resize(static_cast<std::size_t>(M * K * T));
    std::size_t i = 0;
    for (std::uint64_t m = 0; m < M; ++m)
        for (std::uint64_t k = 0; k < K; ++k)
            for (std::uint64_t tau = 0; tau < T; ++tau)
                t.data[i++] = w.at(static_cast<int>(m), static_cast<int>(k), static_cast<int>(tau));
    return t;
}

nmf2d::TemplateTensor templates_from_tensor(const Tensor& t) {
    if (t.dims.size() != 3) throw ConfigError("templates_from_tensor: expected 3 axes [M,K,T]");
    nmf2d::TemplateTensor w;
    const auto M = static_cast<Eigen::Index>(t.dims[0]);
    const auto K = static_cast<Eigen::Index>(t.dims[1]);
    const auto T = static_cast<std::size_t>(t.dims[2]);
    w.lags.assign(T, Mat(M, K));
    std::size_t i = 0;
    for (Eigen::Index m = 0; m < M; ++m)
        for (Eigen::Index k = 0; k < K; ++k)
            for (std::size_t tau = 0; tau < T; ++tau) w.lags[tau](m, k) = t.data[i++];
    return w;
}

Tensor tensor_from_activations(const nmf2d::ActivationTensor& h) {
    Tensor t;
    const std::uint64_t K = static_cast<std::uint64_t>(h.components());
    const std::uint64_t N = static_cast<std::uint64_t>(h.frames());
    const std::uint64_t F = static_cast<std::uint64_t>(h.shift_count());
    t.dims = {K, N, F};
    t.data.resize(static_cast<std::size_t>(K * N * F));
    std::size_t i = 0;
    for (std::uint64_t k = 0; k < K; ++k)
        for (std::uint64_t n = 0; n < N; ++n)
            for (std::uint64_t phi = 0; phi < F; ++phi)
                t.data[i++] = h.at(static_cast<int>(k), static_cast<int>(n), static_cast<int>(phi));
    return t;
}

nmf2d::ActivationTensor activations_from_tensor(const Tensor& t) {
    if (t.dims.size() != 3) throw ConfigError("activations_from_tensor: expected 3 axes [K,N,F]");
    nmf2d::ActivationTensor h;
    const auto K = static_cast<Eigen::Index>(t.dims[0]);
    const auto N = static_cast<Eigen::Index>(t.dims[1]);
    const auto F = static_cast<std::size_t>(t.dims[2]);
    h.shifts.assign(F, Mat(K, N));
    std::size_t i = 0;
    for (Eigen::Index k = 0; k < K; ++k)
        for (Eigen::Index n = 0; n < N; ++n)
            for (std::size_t phi = 0; phi < F; ++phi) h.shifts[phi](k, n) = t.data[i++];
    return h;
}

}  // namespace coversynth
