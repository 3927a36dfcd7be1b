#include "coversynth/nmf2d.hpp"

#include <cmath>
#include <random>
#include <string>

#include "coversynth/errors.hpp"

namespace coversynth::nmf2d {

void Nmf2dConfig::validate(int rows, int frames) const {
    if (components < 1 || time_lags < 1 || freq_shifts < 1 || iterations < 1)
        throw ConfigError("Nmf2dConfig: K, T, F, iterations must all be >= 1");
    if (mask_exponent < 1.0) throw ConfigError("Nmf2dConfig: mask exponent p must be >= 1");
    if (epsilon <= 0.0) throw ConfigError("Nmf2dConfig: epsilon must be positive");
    if (time_lags > frames)
        throw ConfigError("Nmf2dConfig: time_lags " + std::to_string(time_lags) + " exceeds frame count " +
                          std::to_string(frames));
    if (freq_shifts > rows)
        throw ConfigError("Nmf2dConfig: freq_shifts " + std::to_string(freq_shifts) + " exceeds bin count " +
                          std::to_string(rows));
}

namespace {

void check_shift(const char* name, int amount, int limit) {
    if (amount < 0 || amount > limit)
        throw ConfigError(std::string(name) + ": shift " + std::to_string(amount) +
                          " outside [0, " + std::to_string(limit) + "]");
}

}  // namespace

Mat shift_down(const Mat& x, int amount) {
    check_shift("shift_down", amount, static_cast<int>(x.rows()));
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (amount < x.rows()) out.bottomRows(x.rows() - amount) = x.topRows(x.rows() - amount);
    return out;
}

Mat shift_up(const Mat& x, int amount) {
    check_shift("shift_up", amount, static_cast<int>(x.rows()));
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (amount < x.rows()) out.topRows(x.rows() - amount) = x.bottomRows(x.rows() - amount);
    return out;
}

Mat shift_right(const Mat& x, int amount) {
    check_shift("shift_right", amount, static_cast<int>(x.cols()));
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (amount < x.cols()) out.rightCols(x.cols() - amount) = x.leftCols(x.cols() - amount);
    return out;
}

Mat shift_left(const Mat& x, int amount) {
    check_shift("shift_left", amount, static_cast<int>(x.cols()));
    Mat out = Mat::Zero(x.rows(), x.cols());
    if (amount < x.cols()) out.leftCols(x.cols() - amount) = x.rightCols(x.cols() - amount);
    return out;
}

namespace {

void check_pair(const TemplateTensor& W, const ActivationTensor& H) {
    if (W.lag_count() == 0 || H.shift_count() == 0)
        throw ConfigError("nmf2d: empty tensor");
    if (W.components() != H.components())
        throw ConfigError("nmf2d: component mismatch (W has " + std::to_string(W.components()) +
                          ", H has " + std::to_string(H.components()) + ")");
    for (const auto& m : W.lags)
        if (m.rows() != W.rows() || m.cols() != W.components()) throw ConfigError("nmf2d: ragged template tensor");
    for (const auto& m : H.shifts)
        if (m.rows() != H.components() || m.cols() != H.frames()) throw ConfigError("nmf2d: ragged activation tensor");
}

// Stack of all activation shift maps, one block per shift: (K*F) x N.
Mat stack_activations(const ActivationTensor& H) {
    const int K = H.components(), N = H.frames(), F = H.shift_count();
    Mat s(static_cast<Eigen::Index>(K) * F, N);
    for (int phi = 0; phi < F; ++phi) s.middleRows(static_cast<Eigen::Index>(phi) * K, K) = H.shifts[static_cast<std::size_t>(phi)];
    return s;
}

// Templates for one lag with every frequency shift applied: M x (K*F),
// block phi holding the templates shifted down by phi.
void stack_shifted_templates(const Mat& w_lag, int F, Mat& out) {
    const int M = static_cast<int>(w_lag.rows());
    const int K = static_cast<int>(w_lag.cols());
    out.setZero(M, static_cast<Eigen::Index>(K) * F);
    for (int phi = 0; phi < F; ++phi)
        out.block(phi, static_cast<Eigen::Index>(phi) * K, M - phi, K) = w_lag.topRows(M - phi);
}

Mat model_of(const TemplateTensor& W, const ActivationTensor& H) {
    const int M = W.rows(), N = H.frames(), T = W.lag_count(), F = H.shift_count();
    const Mat h_stack = stack_activations(H);
    Mat model = Mat::Zero(M, N);
    Mat w_tilde, g;
    for (int tau = 0; tau < T && tau < N; ++tau) {
        stack_shifted_templates(W.lags[static_cast<std::size_t>(tau)], F, w_tilde);
        g.noalias() = w_tilde * h_stack;
        model.middleCols(tau, N - tau) += g.leftCols(N - tau);
    }
    return model;
}

}  // namespace

Mat reconstruct(const TemplateTensor& W, const ActivationTensor& H) {
    check_pair(W, H);
    return model_of(W, H);
}

Mat component_reconstruct(const TemplateTensor& W, const ActivationTensor& H, int k) {
    check_pair(W, H);
    if (k < 0 || k >= W.components())
        throw ConfigError("component_reconstruct: k " + std::to_string(k) + " out of range");
    TemplateTensor Wk;
    ActivationTensor Hk;
    for (const auto& m : W.lags) Wk.lags.push_back(m.col(k));
    for (const auto& m : H.shifts) Hk.shifts.push_back(m.row(k));
    return model_of(Wk, Hk);
}

double kl_divergence(const Mat& x, const Mat& y, double epsilon) {
    if (x.rows() != y.rows() || x.cols() != y.cols())
        throw ConfigError("kl_divergence: shape mismatch");
    double total = 0.0;
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const double xv = x(r, c);
            const double yv = y(r, c);
            if (xv > 0.0) total += xv * std::log(xv / std::max(yv, epsilon)) - xv + yv;
            else total += yv;  // 0 log 0 := 0
        }
    return std::max(0.0, total);
}

namespace {

struct Song {
    const Mat* x = nullptr;
    TemplateTensor* w = nullptr;
    bool update_w = true;
};

Mat ratio_of(const Mat& x, const Mat& model, double eps) {
    return x.array() / (model.array() + eps);
}

// Multiplicative update of every template lag at once. The normalizer
// carries the same shifts as the numerator (clipped row sums), which is the
// exact majorizer for this linear model, so each call cannot increase the
// song's KL term.
void update_templates(const Mat& x, TemplateTensor& W, const ActivationTensor& H, double eps) {
    const int M = W.rows(), K = W.components(), T = W.lag_count(), F = H.shift_count();
    const int N = H.frames();
    const Mat model = model_of(W, H);
    const Mat r = ratio_of(x, model, eps);

    Mat h_stack_t(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K) * F);
    for (int phi = 0; phi < F; ++phi)
        h_stack_t.middleCols(static_cast<Eigen::Index>(phi) * K, K) = H.shifts[static_cast<std::size_t>(phi)].transpose();

    // Prefix sums over frames for the normalizer's clipped column sums.
    std::vector<Mat> h_prefix(static_cast<std::size_t>(F));
    for (int phi = 0; phi < F; ++phi) {
        const Mat& h = H.shifts[static_cast<std::size_t>(phi)];
        Mat p(K, N);
        for (int k = 0; k < K; ++k) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n) {
                acc += h(k, n);
                p(k, n) = acc;
            }
        }
        h_prefix[static_cast<std::size_t>(phi)] = std::move(p);
    }

    Mat y, numer(M, K), denom(M, K);
    for (int tau = 0; tau < T && tau < N; ++tau) {
        const int span = N - tau;
        y.noalias() = r.middleCols(tau, span) * h_stack_t.topRows(span);
        numer.setZero();
        for (int phi = 0; phi < F; ++phi)
            numer.topRows(M - phi) += y.block(phi, static_cast<Eigen::Index>(phi) * K, M - phi, K);

        Eigen::VectorXd full = Eigen::VectorXd::Zero(K);
        Mat hsum(F, K);
        for (int phi = 0; phi < F; ++phi)
            for (int k = 0; k < K; ++k) {
                hsum(phi, k) = h_prefix[static_cast<std::size_t>(phi)](k, span - 1);
                full(k) += hsum(phi, k);
            }
        for (int m = 0; m < M; ++m) {
            const int phi_max = std::min(F - 1, M - 1 - m);
            if (phi_max == F - 1) {
                denom.row(m) = full.transpose();
            } else {
                Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(K);
                for (int phi = 0; phi <= phi_max; ++phi) acc += hsum.row(phi);
                denom.row(m) = acc;
            }
        }
        Mat& w = W.lags[static_cast<std::size_t>(tau)];
        w.array() *= numer.array() / (denom.array() + eps);
    }
}

// Joint multiplicative update of every activation shift at once across all
// songs sharing H; exact normalizer as above.
void update_activations(const std::vector<Song>& songs, ActivationTensor& H, double eps) {
    const int K = H.components(), N = H.frames(), F = H.shift_count();
    const int T = songs.front().w->lag_count();
    const int M = songs.front().w->rows();

    Mat numer = Mat::Zero(static_cast<Eigen::Index>(K) * F, N);
    Mat wsum = Mat::Zero(static_cast<Eigen::Index>(K) * F, T);  // clipped column sums per (phi,k,tau)

    Mat l_stack(static_cast<Eigen::Index>(K) * F, M), z;
    for (const auto& song : songs) {
        const Mat model = model_of(*song.w, H);
        const Mat r = ratio_of(*song.x, model, eps);
        for (int tau = 0; tau < T && tau < N; ++tau) {
            const Mat& w = song.w->lags[static_cast<std::size_t>(tau)];
            l_stack.setZero();
            for (int phi = 0; phi < F; ++phi)
                l_stack.block(static_cast<Eigen::Index>(phi) * K, phi, K, M - phi) =
                    w.topRows(M - phi).transpose();
            const int span = N - tau;
            z.noalias() = l_stack * r.middleCols(tau, span);
            numer.leftCols(span) += z;

            for (int phi = 0; phi < F; ++phi) {
                const auto col_sums = w.topRows(M - phi).colwise().sum();
                for (int k = 0; k < K; ++k) wsum(static_cast<Eigen::Index>(phi) * K + k, tau) += col_sums(k);
            }
        }
    }

    Eigen::VectorXd full = wsum.rowwise().sum();
    for (int phi = 0; phi < F; ++phi) {
        Mat& h = H.shifts[static_cast<std::size_t>(phi)];
        for (int k = 0; k < K; ++k) {
            const Eigen::Index row = static_cast<Eigen::Index>(phi) * K + k;
            for (int n = 0; n < N; ++n) {
                double d = full(row);
                for (int tau = N - n; tau < T; ++tau) d -= wsum(row, tau);  // lags running past the edge
                h(k, n) *= numer(row, n) / (d + eps);
            }
        }
    }
}

double joint_objective(const std::vector<Song>& songs, const ActivationTensor& H, double eps) {
    double total = 0.0;
    for (const auto& song : songs) total += kl_divergence(*song.x, model_of(*song.w, H), eps);
    return total;
}

void check_finite(const std::vector<Song>& songs, const ActivationTensor& H, int sweep) {
    for (const auto& song : songs)
        for (const auto& m : song.w->lags)
            if (!m.allFinite())
                throw StageError("nmf2d", "non-finite template entry detected in sweep " + std::to_string(sweep));
    for (const auto& m : H.shifts)
        if (!m.allFinite())
            throw StageError("nmf2d", "non-finite activation entry detected in sweep " + std::to_string(sweep));
}

// Strictly positive init on (0.1, 1.0] keeps multiplicative updates alive.
class UniformInit {
  public:
    explicit UniformInit(std::uint64_t seed) : rng_(seed) {}
    double next() { return 1.0 - 0.9 * dist_(rng_); }
    TemplateTensor templates(int M, int K, int T) {
        TemplateTensor W;
        W.lags.resize(static_cast<std::size_t>(T));
        for (auto& m : W.lags) {
            m.resize(M, K);
            for (Eigen::Index c = 0; c < K; ++c)
                for (Eigen::Index r = 0; r < M; ++r) m(r, c) = next();
        }
        return W;
    }
    ActivationTensor activations(int K, int N, int F) {
        ActivationTensor H;
        H.shifts.resize(static_cast<std::size_t>(F));
        for (auto& m : H.shifts) {
            m.resize(K, N);
            for (Eigen::Index c = 0; c < N; ++c)
                for (Eigen::Index r = 0; r < K; ++r) m(r, c) = next();
        }
        return H;
    }

  private:
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> dist_{0.0, 1.0};
};

void run_sweeps(std::vector<Song>& songs, ActivationTensor& H, const Nmf2dConfig& cfg,
                std::vector<double>& objective) {
    for (int sweep = 0; sweep < cfg.iterations; ++sweep) {
        for (auto& song : songs)
            if (song.update_w) update_templates(*song.x, *song.w, H, cfg.epsilon);
        update_activations(songs, H, cfg.epsilon);
        check_finite(songs, H, sweep);
        objective.push_back(joint_objective(songs, H, cfg.epsilon));
    }
}

}  // namespace

JointFactorization joint_factorize(const Mat& mag_a, const Mat& mag_a_prime, const Nmf2dConfig& cfg) {
    if (mag_a.rows() != mag_a_prime.rows() || mag_a.cols() != mag_a_prime.cols())
        throw ConfigError("joint_factorize: magnitude shapes differ");
    if ((mag_a.array() < 0.0).any() || (mag_a_prime.array() < 0.0).any())
        throw ConfigError("joint_factorize: negative magnitude entries");
    const int M = static_cast<int>(mag_a.rows());
    const int N = static_cast<int>(mag_a.cols());
    cfg.validate(M, N);

    UniformInit init(cfg.rng_seed);
    JointFactorization out;
    out.W1 = init.templates(M, cfg.components, cfg.time_lags);
    out.W2 = init.templates(M, cfg.components, cfg.time_lags);
    out.H1 = init.activations(cfg.components, N, cfg.freq_shifts);

    if (cfg.pretrain_W1) {
        // Factorize song A alone first, then hold W1 fixed during the joint
        // phase (helps when the covers' tempos differ sharply).
        std::vector<Song> solo{{&mag_a, &out.W1, true}};
        std::vector<double> pre_obj;
        run_sweeps(solo, out.H1, cfg, pre_obj);
    }

    std::vector<Song> songs{{&mag_a, &out.W1, !cfg.pretrain_W1}, {&mag_a_prime, &out.W2, true}};
    run_sweeps(songs, out.H1, cfg, out.objective);
    return out;
}

ActivationFit fit_activations(const Mat& mag_b, const TemplateTensor& W, const Nmf2dConfig& cfg) {
    if (mag_b.rows() != W.rows())
        throw ConfigError("fit_activations: magnitude has " + std::to_string(mag_b.rows()) +
                          " rows, templates expect " + std::to_string(W.rows()));
    if ((mag_b.array() < 0.0).any()) throw ConfigError("fit_activations: negative magnitude entries");
    const int N = static_cast<int>(mag_b.cols());
    cfg.validate(W.rows(), N);

    UniformInit init(cfg.rng_seed);
    ActivationFit out;
    out.H = init.activations(W.components(), N, cfg.freq_shifts);
    TemplateTensor W_fixed = W;
    std::vector<Song> songs{{&mag_b, &W_fixed, false}};
    run_sweeps(songs, out.H, cfg, out.objective);
    return out;
}

std::vector<ComplexSpectrogram> soft_mask_filter(const ComplexSpectrogram& c, const TemplateTensor& W,
                                                 const ActivationTensor& H, double p, double epsilon) {
    check_pair(W, H);
    if (p < 1.0) throw ConfigError("soft_mask_filter: p must be >= 1");
    if (c.values.rows() != W.rows() || c.values.cols() != H.frames())
        throw ConfigError("soft_mask_filter: spectrogram shape does not match the factor model");

    const int K = W.components();
    std::vector<Mat> powered(static_cast<std::size_t>(K));
    Mat total = Mat::Zero(c.values.rows(), c.values.cols());
    for (int k = 0; k < K; ++k) {
        powered[static_cast<std::size_t>(k)] = component_reconstruct(W, H, k).array().pow(p);
        total += powered[static_cast<std::size_t>(k)];
    }

    std::vector<ComplexSpectrogram> out(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        ComplexSpectrogram s = c;  // keeps configs and the inversion payload
        for (Eigen::Index col = 0; col < c.values.cols(); ++col)
            for (Eigen::Index row = 0; row < c.values.rows(); ++row) {
                const double denom = total(row, col);
                const double mask = denom > epsilon ? powered[static_cast<std::size_t>(k)](row, col) / denom
                                                    : 1.0 / K;
                s.values(row, col) = c.values(row, col) * mask;
            }
        out[static_cast<std::size_t>(k)] = std::move(s);
    }
    return out;
}

}  // namespace coversynth::nmf2d
