#include "coversynth/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coversynth/errors.hpp"

namespace coversynth::alignment {

namespace {

// Scaled-exponential affinity with local bandwidth (Wang et al. style):
// W(i,j) = exp(-d^2 / (mu * eps_ij)), eps = mean of the two ends' kNN
// distances and d itself.
Mat affinity_kernel(const Mat& dist, int knn, double mu) {
    const int n = static_cast<int>(dist.rows());
    Vec knn_mean(n);
    const int k = std::min(knn, n - 1);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = dist(i, j);
        row.erase(row.begin() + i);
        std::nth_element(row.begin(), row.begin() + (k - 1), row.end());
        knn_mean(i) = std::accumulate(row.begin(), row.begin() + k, 0.0) / k;
    }
    Mat w(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double eps = (knn_mean(i) + knn_mean(j) + dist(i, j)) / 3.0 + 1e-12;
            w(i, j) = std::exp(-dist(i, j) * dist(i, j) / (mu * eps));
        }
    return w;
}

// Full row-stochastic form used as the diffusion state.
Mat full_normalize(const Mat& w) {
    const int n = static_cast<int>(w.rows());
    Mat p(n, n);
    for (int i = 0; i < n; ++i) {
        double off = 0.0;
        for (int j = 0; j < n; ++j)
            if (j != i) off += w(i, j);
        for (int j = 0; j < n; ++j) p(i, j) = (j == i) ? 0.5 : w(i, j) / (2.0 * (off + 1e-12));
    }
    return p;
}

// kNN-sparsified row-normalized kernel used as the diffusion operator.
Mat knn_normalize(const Mat& w, int knn) {
    const int n = static_cast<int>(w.rows());
    const int k = std::min(knn, n - 1);
    Mat s = Mat::Zero(n, n);
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return w(i, a) > w(i, b); });
        double total = 0.0;
        int taken = 0;
        for (int j : idx) {
            if (j == i) continue;
            s(i, j) = w(i, j);
            total += w(i, j);
            if (++taken == k) break;
        }
        if (total > 0.0) s.row(i) /= total;
    }
    return s;
}

}  // namespace

Mat fuse_similarity(const std::vector<FeatureMatrix>& features_a,
                    const std::vector<FeatureMatrix>& features_a_prime, const FusionOptions& opts) {
    if (features_a.empty() || features_a.size() != features_a_prime.size())
        throw ConfigError("fuse_similarity: feature kind lists differ");

    // Pair up kinds by name so the fusion is order-invariant.
    std::vector<std::pair<const FeatureMatrix*, const FeatureMatrix*>> kinds;
    for (const auto& fa : features_a) {
        const FeatureMatrix* match = nullptr;
        for (const auto& fb : features_a_prime)
            if (fb.kind == fa.kind) match = &fb;
        if (!match) throw ConfigError("fuse_similarity: kind '" + fa.kind + "' missing on one side");
        if (fa.values.cols() != match->values.cols())
            throw ConfigError("fuse_similarity: dimension mismatch within kind '" + fa.kind + "'");
        kinds.emplace_back(&fa, match);
    }
    std::stable_sort(kinds.begin(), kinds.end(),
                     [](const auto& x, const auto& y) { return x.first->kind < y.first->kind; });

    const int na = static_cast<int>(kinds[0].first->values.rows());
    const int nb = static_cast<int>(kinds[0].second->values.rows());
    const int n = na + nb;

    std::vector<Mat> kernels;
    for (const auto& [fa, fb] : kinds) {
        Mat joint(n, static_cast<Eigen::Index>(fa->values.cols()));
        joint.topRows(na) = fa->values;
        joint.bottomRows(nb) = fb->values;
        Mat dist(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) dist(i, j) = (joint.row(i) - joint.row(j)).norm();
        kernels.push_back(affinity_kernel(dist, opts.knn, opts.mu));
    }

    Mat fused;
    if (kernels.size() == 1) {
        fused = kernels[0];
    } else {
        std::vector<Mat> p, s;
        for (const auto& w : kernels) {
            p.push_back(full_normalize(w));
            s.push_back(knn_normalize(w, opts.knn));
        }
        for (int it = 0; it < opts.iterations; ++it) {
            std::vector<Mat> next(p.size());
            for (std::size_t v = 0; v < p.size(); ++v) {
                Mat mean_others = Mat::Zero(n, n);
                for (std::size_t u = 0; u < p.size(); ++u)
                    if (u != v) mean_others += p[u];
                mean_others /= static_cast<double>(p.size() - 1);
                next[v] = s[v] * mean_others * s[v].transpose();
                next[v] = 0.5 * (next[v] + next[v].transpose());
            }
            p = std::move(next);
        }
        fused = Mat::Zero(n, n);
        for (const auto& m : p) fused += m;
    }

    Mat cross = fused.block(0, na, na, nb);
    return cross.cwiseMax(0.0);
}

}  // namespace coversynth::alignment
