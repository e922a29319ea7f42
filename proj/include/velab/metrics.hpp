#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "velab/rng.hpp"
#include "velab/video.hpp"

namespace velab {

// -10*log10(MSE) with unit peak; identical inputs report +infinity.
inline double psnr(const VideoTensor& a, const VideoTensor& b) {
    if (a.frames != b.frames || a.height != b.height || a.width != b.width)
        throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(mse);
}

// Standard SSIM on unit range: C1=(0.01)^2, C2=(0.03)^2, 8x8 uniform sliding
// windows, averaged over windows, channels, frames.
inline double ssim(const VideoTensor& a, const VideoTensor& b) {
    if (a.frames != b.frames || a.height != b.height || a.width != b.width)
        throw std::invalid_argument("ssim: shape mismatch");
    constexpr int win = 8;
    if (a.height < win || a.width < win) throw std::invalid_argument("ssim: frame smaller than window");
    constexpr double c1 = 1e-4, c2 = 9e-4;
    double total = 0.0;
    long count = 0;
    const double inv_n = 1.0 / (win * win);
    for (int f = 0; f < a.frames; ++f)
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y + win <= a.height; ++y)
                for (int x = 0; x + win <= a.width; ++x) {
                    double ma = 0.0, mb = 0.0;
                    for (int dy = 0; dy < win; ++dy)
                        for (int dx = 0; dx < win; ++dx) {
                            ma += a.at(f, y + dy, x + dx, c);
                            mb += b.at(f, y + dy, x + dx, c);
                        }
                    ma *= inv_n;
                    mb *= inv_n;
                    double va = 0.0, vb = 0.0, cov = 0.0;
                    for (int dy = 0; dy < win; ++dy)
                        for (int dx = 0; dx < win; ++dx) {
                            const double da = a.at(f, y + dy, x + dx, c) - ma;
                            const double db = b.at(f, y + dy, x + dx, c) - mb;
                            va += da * da;
                            vb += db * db;
                            cov += da * db;
                        }
                    va *= inv_n;
                    vb *= inv_n;
                    cov *= inv_n;
                    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                             ((ma * ma + mb * mb + c1) * (va + vb + c2));
                    ++count;
                }
    return total / count;
}

// ||mu1-mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^{1/2}) on empirical Gaussian fits.
// Covariances get 1e-6*I before the root; the root is taken on the symmetric
// form S1^{1/2} S2 S1^{1/2} with negative eigenvalues clamped to zero.
inline double frechet_distance(const std::vector<std::vector<double>>& feats_a,
                               const std::vector<std::vector<double>>& feats_b) {
    if (feats_a.empty() || feats_b.empty()) throw std::invalid_argument("frechet: empty feature set");
    const int dim = static_cast<int>(feats_a[0].size());
    auto fit = [dim](const std::vector<std::vector<double>>& f) {
        Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
        for (const auto& v : f) mu += Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
        mu /= static_cast<double>(f.size());
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
        for (const auto& v : f) {
            const Eigen::VectorXd d = Eigen::Map<const Eigen::VectorXd>(v.data(), dim) - mu;
            cov += d * d.transpose();
        }
        cov /= std::max<double>(1.0, static_cast<double>(f.size()) - 1.0);
        cov += 1e-6 * Eigen::MatrixXd::Identity(dim, dim);
        return std::make_pair(mu, cov);
    };
    const auto [mu1, s1] = fit(feats_a);
    const auto [mu2, s2] = fit(feats_b);

    auto sqrt_psd = [](const Eigen::MatrixXd& m) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return Eigen::MatrixXd(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
    };
    const Eigen::MatrixXd r1 = sqrt_psd(s1);
    const Eigen::MatrixXd inner = sqrt_psd(r1 * s2 * r1);
    const double d2 = (mu1 - mu2).squaredNorm() + (s1 + s2).trace() - 2.0 * inner.trace();
    return std::max(0.0, d2);
}

// Pluggable video feature extractor. The built-in is deterministic:
// downsample to a fixed grid, flatten, seeded random projection to 64 dims.
struct FeatureExtractor {
    std::function<std::vector<double>(const VideoTensor&)> extract;
    int dim = 64;
};

inline FeatureExtractor builtin_feature_extractor(int out_dim = 64, std::uint64_t seed = 17,
                                                  int grid = 8, double projection_scale = 1.0) {
    // projection matrix is fixed by the seed, shared by every call
    auto proj = std::make_shared<std::vector<double>>();
    FeatureExtractor fe;
    fe.dim = out_dim;
    fe.extract = [out_dim, seed, grid, projection_scale, proj](const VideoTensor& v) {
        const VideoTensor small = resize_bilinear(v, grid, grid);
        // temporal mean + mean absolute temporal difference, flattened
        const int in_dim = grid * grid * 3 * 2;
        std::vector<double> flat(static_cast<std::size_t>(in_dim), 0.0);
        for (int f = 0; f < small.frames; ++f)
            for (int y = 0; y < grid; ++y)
                for (int x = 0; x < grid; ++x)
                    for (int c = 0; c < 3; ++c) {
                        const int base = (y * grid + x) * 3 + c;
                        flat[static_cast<std::size_t>(base)] += small.at(f, y, x, c) / small.frames;
                        if (f > 0)
                            flat[static_cast<std::size_t>(grid * grid * 3 + base)] +=
                                std::abs(small.at(f, y, x, c) - small.at(f - 1, y, x, c)) /
                                std::max(1, small.frames - 1);
                    }
        if (proj->empty()) {
            Rng rng(seed);
            proj->resize(static_cast<std::size_t>(out_dim) * in_dim);
            for (auto& w : *proj) w = rng.normal(0.0, 1.0 / std::sqrt(in_dim));
        }
        std::vector<double> out(static_cast<std::size_t>(out_dim), 0.0);
        for (int o = 0; o < out_dim; ++o)
            for (int i = 0; i < in_dim; ++i)
                out[static_cast<std::size_t>(o)] += projection_scale *
                                                    (*proj)[static_cast<std::size_t>(o) * in_dim + i] *
                                                    flat[static_cast<std::size_t>(i)];
        return out;
    };
    return fe;
}

// Mean Euclidean distance between per-frame features (LPIPS stand-in slot).
inline double perceptual_distance(const VideoTensor& a, const VideoTensor& b,
                                  const FeatureExtractor& fe) {
    if (a.frames != b.frames || a.height != b.height || a.width != b.width)
        throw std::invalid_argument("perceptual_distance: shape mismatch");
    double total = 0.0;
    for (int f = 0; f < a.frames; ++f) {
        VideoTensor fa(1, a.height, a.width), fb(1, b.height, b.width);
        std::copy(a.data.begin() + static_cast<long>(f) * a.height * a.width * 3,
                  a.data.begin() + static_cast<long>(f + 1) * a.height * a.width * 3, fa.data.begin());
        std::copy(b.data.begin() + static_cast<long>(f) * b.height * b.width * 3,
                  b.data.begin() + static_cast<long>(f + 1) * b.height * b.width * 3, fb.data.begin());
        const auto va = fe.extract(fa);
        const auto vb = fe.extract(fb);
        double d2 = 0.0;
        for (std::size_t i = 0; i < va.size(); ++i) d2 += (va[i] - vb[i]) * (va[i] - vb[i]);
        total += std::sqrt(d2);
    }
    return total / a.frames;
}

struct SampleMetrics {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
    double perceptual = 0.0;
    std::optional<double> qscore;
};

struct MetricReport {
    std::vector<SampleMetrics> per_sample;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    double mean_perceptual = 0.0;
    double frechet = 0.0;
    std::optional<double> mean_qscore;
    int sample_count = 0;
};

inline MetricReport aggregate_metrics(std::vector<SampleMetrics> rows, double frechet) {
    MetricReport r;
    r.per_sample = std::move(rows);
    r.sample_count = static_cast<int>(r.per_sample.size());
    if (r.sample_count == 0) return r;
    double qsum = 0.0;
    int qn = 0;
    for (const auto& s : r.per_sample) {
        r.mean_psnr += s.psnr;
        r.mean_ssim += s.ssim;
        r.mean_perceptual += s.perceptual;
        if (s.qscore) {
            qsum += *s.qscore;
            ++qn;
        }
    }
    r.mean_psnr /= r.sample_count;
    r.mean_ssim /= r.sample_count;
    r.mean_perceptual /= r.sample_count;
    if (qn > 0) r.mean_qscore = qsum / qn;
    r.frechet = frechet;
    return r;
}

}  // namespace velab
