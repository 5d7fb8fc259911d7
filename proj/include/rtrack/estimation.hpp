#pragma once

#include <optional>

#include "rtrack/motion_sensing.hpp"
#include "rtrack/types.hpp"
#include "rtrack/world.hpp"

namespace rtrack {

struct EkfConfig {
    bool joseph_form = true;
    bool symmetrize_each_step = true;
    // Per-measurement Mahalanobis gate; rows beyond it are dropped.
    std::optional<double> innovation_gate;
};

/// mean' = A mean + B v, cov' = A cov A^T + Q with the per-target blocks
/// replicated over all targets. An empty `v` means no known input.
inline TargetEstimate ekf_predict(const TargetEstimate& est, const TargetModel& model, const Vec& v = Vec()) {
    const int n = est.targets();
    const Mat a = block_replicate(model.A, n);
    TargetEstimate out;
    out.mean = a * est.mean;
    if (v.size() > 0) out.mean += block_replicate(model.B, n) * v;
    out.covariance = a * est.covariance * a.transpose() + block_replicate(model.Q, n);
    out.covariance = symmetrized(out.covariance);
    return out;
}

namespace detail {

inline TargetEstimate kalman_correct(const TargetEstimate& est, Vec innovation, Mat h, Mat r,
                                     const EkfConfig& cfg) {
    const Mat& p = est.covariance;
    if (cfg.innovation_gate) {
        std::vector<Eigen::Index> keep;
        for (Eigen::Index b = 0; b + 1 < innovation.size(); b += 2) {
            const Mat hb = h.middleRows(b, 2);
            const Mat2 sb = hb * p * hb.transpose() + r.block<2, 2>(b, b);
            const Vec2 nu = innovation.segment<2>(b);
            if (nu.dot(sb.ldlt().solve(nu)) <= *cfg.innovation_gate) {
                keep.push_back(b);
                keep.push_back(b + 1);
            }
        }
        if (keep.size() != static_cast<std::size_t>(innovation.size())) {
            const auto k = static_cast<Eigen::Index>(keep.size());
            Vec nu2(k);
            Mat h2(k, h.cols()), r2 = Mat::Zero(k, k);
            for (Eigen::Index i = 0; i < k; ++i) {
                nu2[i] = innovation[keep[i]];
                h2.row(i) = h.row(keep[i]);
                for (Eigen::Index j = 0; j < k; ++j) r2(i, j) = r(keep[i], keep[j]);
            }
            innovation = std::move(nu2);
            h = std::move(h2);
            r = std::move(r2);
            if (k == 0) return est;
        }
    }
    const Mat s = symmetrized(h * p * h.transpose() + r);
    Eigen::LLT<Mat> llt(s);
    const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
    if (llt.info() != Eigen::Success || !(rcond > 1e-14))
        throw NumericError("innovation covariance is singular (rcond " + std::to_string(rcond) + ")", rcond);
    const Mat k = llt.solve(h * p).transpose();
    TargetEstimate out;
    out.mean = est.mean + k * innovation;
    const Mat ikh = Mat::Identity(p.rows(), p.cols()) - k * h;
    if (cfg.joseph_form)
        out.covariance = ikh * p * ikh.transpose() + k * r * k.transpose();
    else
        out.covariance = ikh * p;
    if (cfg.symmetrize_each_step) out.covariance = symmetrized(out.covariance);
    return out;
}

}  // namespace detail

/// EKF correction with a stacked range-bearing system; bearing innovations
/// are wrapped into (-pi, pi].
inline TargetEstimate ekf_update(const TargetEstimate& est, const MeasurementStack& stack,
                                 const EkfConfig& cfg = {}) {
    if (stack.rows() == 0) return est;
    Vec innovation = stack.z - stack.predicted;
    for (Eigen::Index i = 0; i < innovation.size(); ++i)
        if (stack.angular[static_cast<std::size_t>(i)]) innovation[i] = wrap_angle(innovation[i]);
    return detail::kalman_correct(est, std::move(innovation), stack.H, stack.R, cfg);
}

/// Linear-measurement correction (innovation z - H mean).
inline TargetEstimate ekf_update(const TargetEstimate& est, const Vec& z, const Mat& h, const Mat& r,
                                 const EkfConfig& cfg = {}) {
    if (z.size() == 0) return est;
    if (h.rows() != z.size()) throw DomainError("measurement rows do not match H");
    return detail::kalman_correct(est, z - h * est.mean, h, r, cfg);
}

struct CiResult {
    TargetEstimate fused;
    double lambda = 0.5;
};

namespace detail {

inline Mat spd_inverse(const Mat& m) {
    Eigen::LLT<Mat> llt(m);
    if (llt.info() != Eigen::Success) throw NumericError("covariance is not positive definite", 0.0);
    return llt.solve(Mat::Identity(m.rows(), m.cols()));
}

}  // namespace detail

/// Covariance intersection with the weight chosen to minimize the fused trace
/// (golden-section search on [0, 1], tolerance 1e-6).
inline CiResult ci_fuse(const TargetEstimate& a, const TargetEstimate& b) {
    if (a.mean.size() != b.mean.size() || a.covariance.rows() != b.covariance.rows())
        throw DomainError("ci_fuse: dimension mismatch");
    if (a == b) return {a, 0.5};

    const Mat ia = detail::spd_inverse(a.covariance);
    const Mat ib = detail::spd_inverse(b.covariance);
    auto fused_trace = [&](double lambda) {
        return detail::spd_inverse(lambda * ia + (1.0 - lambda) * ib).trace();
    };

    // trace((lambda Ia + (1 - lambda) Ib)^-1) is convex in lambda.
    constexpr double inv_phi = 0.6180339887498949;
    double lo = 0.0, hi = 1.0;
    double x1 = hi - inv_phi * (hi - lo), x2 = lo + inv_phi * (hi - lo);
    double f1 = fused_trace(x1), f2 = fused_trace(x2);
    while (hi - lo > 1e-6) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = fused_trace(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = fused_trace(x2);
        }
    }
    double lambda = 0.5 * (lo + hi);
    double best = fused_trace(lambda);
    for (double edge : {0.0, 1.0}) {
        const double f = fused_trace(edge);
        if (f < best) {
            best = f;
            lambda = edge;
        }
    }

    CiResult out;
    out.lambda = lambda;
    out.fused.covariance = symmetrized(detail::spd_inverse(lambda * ia + (1.0 - lambda) * ib));
    out.fused.mean = out.fused.covariance * (lambda * ia * a.mean + (1.0 - lambda) * ib * b.mean);
    return out;
}

}  // namespace rtrack
