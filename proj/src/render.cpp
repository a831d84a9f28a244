// Copyright Contributors to the pairsplat Project
// SPDX-License-Identifier: Apache-2.0

#include "pairsplat/render.hpp"

#include "pairsplat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <thread>

namespace pairsplat {
namespace {

constexpr double kQCutoff = kCutoffSigmas * kCutoffSigmas;

Mat3 scale_matrix_squared(const Vec3& log_scale) {
    Mat3 d;
    d(0, 0) = std::exp(2.0 * log_scale.x);
    d(1, 1) = std::exp(2.0 * log_scale.y);
    d(2, 2) = std::exp(2.0 * log_scale.z);
    return d;
}

// Sigma = R diag(exp(ls))^2 R^T
Mat3 covariance3d(const GaussianPrimitive& g) {
    const Mat3 r = quat_to_rotation(g.rotation);
    return r * scale_matrix_squared(g.log_scale) * r.transposed();
}

struct ProjectionFrame {
    Vec3 x_cam;
    Mat3 sigma_cam; // W Sigma W^T
};

ProjectionFrame projection_frame(const GaussianPrimitive& g, const Camera& cam) {
    ProjectionFrame f;
    f.x_cam = cam.to_camera(g.position);
    f.sigma_cam = cam.rotation * covariance3d(g) * cam.rotation.transposed();
    return f;
}

// Rows of the 2x3 perspective Jacobian at the mean.
void projection_jacobian(const Camera& cam, const Vec3& xc, Vec3& j0, Vec3& j1) {
    const double z = xc.z;
    j0 = {cam.fx / z, 0.0, -cam.fx * xc.x / (z * z)};
    j1 = {0.0, cam.fy / z, -cam.fy * xc.y / (z * z)};
}

// Gradient contributions accumulated per splat while walking pixels.
struct SplatGrad {
    double mx = 0, my = 0;         // d/d mean2d
    double pa = 0, pb = 0, pc = 0; // d/d inv_cov (full-matrix convention)
    double a = 0;                  // sum over pixels of d/d alpha * weight
    double cr = 0, cg = 0, cb = 0; // d/d activated color
};

// One contributing splat at one pixel, recorded during the forward replay.
struct PixContribution {
    int splat;      // index into the splat list
    double alpha;   // after clipping
    double weight;  // exp(-Q/2)
    double t;       // transmittance in front of this splat
    Vec2 d;         // pixel - mean2d
    bool clipped;
};

std::vector<std::vector<int>> bucket_rows(const std::vector<Splat>& splats, int height) {
    std::vector<std::vector<int>> rows(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        const double py = y + 0.5;
        auto& bucket = rows[static_cast<std::size_t>(y)];
        for (int i = 0; i < static_cast<int>(splats.size()); ++i) {
            const Splat& s = splats[static_cast<std::size_t>(i)];
            if (py >= s.by0 && py < s.by1) bucket.push_back(i);
        }
    }
    return rows;
}

void require_mask(const GaussianField& field, const DropoutMask& mask, const char* op) {
    if (mask.size() != field.size())
        throw ShapeError(std::string(op) + ": mask length " + std::to_string(mask.size()) +
                         " != field size " + std::to_string(field.size()));
}

// Static row partition; block boundaries, not thread scheduling, decide the
// gradient reduction order.
void for_each_row_block(int height, int jobs, const std::function<void(int, int, int)>& fn) {
    const int blocks = std::max(1, std::min(jobs, height));
    if (blocks == 1) {
        fn(0, 0, height);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(blocks));
    for (int b = 0; b < blocks; ++b) {
        const int y0 = static_cast<int>(static_cast<long long>(height) * b / blocks);
        const int y1 = static_cast<int>(static_cast<long long>(height) * (b + 1) / blocks);
        threads.emplace_back(fn, b, y0, y1);
    }
    for (auto& t : threads) t.join();
}

} // namespace

Splat make_splat(const Projected2D& geo, double opacity, const Vec3& color) {
    Splat s;
    s.geo = geo;
    if (geo.cov2d.det() <= 1e-12)
        throw std::logic_error("make_splat: non-invertible screen covariance");
    s.inv_cov = geo.cov2d.inverse();
    s.opacity = opacity;
    s.color = color;
    const double sx = kCutoffSigmas * std::sqrt(geo.cov2d.a);
    const double sy = kCutoffSigmas * std::sqrt(geo.cov2d.c);
    s.bx0 = geo.mean2d.x - sx;
    s.bx1 = geo.mean2d.x + sx;
    s.by0 = geo.mean2d.y - sy;
    s.by1 = geo.mean2d.y + sy;
    return s;
}

std::optional<Projected2D> project_gaussian(const GaussianPrimitive& g, const Camera& cam) {
    const Vec3 xc = cam.to_camera(g.position);
    if (!(xc.z > cam.near)) return std::nullopt; // also culls non-finite depth

    const Mat3 sigma_cam = cam.rotation * covariance3d(g) * cam.rotation.transposed();
    Vec3 j0, j1;
    projection_jacobian(cam, xc, j0, j1);

    Projected2D p;
    p.mean2d = {cam.fx * xc.x / xc.z + cam.cx, cam.fy * xc.y / xc.z + cam.cy};
    const Vec3 s0 = sigma_cam * j0;
    const Vec3 s1 = sigma_cam * j1;
    p.cov2d = {j0.dot(s0) + kCovarianceFloor, j0.dot(s1), j1.dot(s1) + kCovarianceFloor};
    p.depth = xc.z;

    const double sx = kCullSigmas * std::sqrt(p.cov2d.a);
    const double sy = kCullSigmas * std::sqrt(p.cov2d.c);
    if (p.mean2d.x + sx < 0.0 || p.mean2d.x - sx > cam.width || p.mean2d.y + sy < 0.0 ||
        p.mean2d.y - sy > cam.height)
        return std::nullopt;
    return p;
}

std::vector<Splat> project_field(const GaussianField& field, const DropoutMask& mask,
                                 const Camera& cam, double compensation) {
    require_mask(field, mask, "project_field");
    std::vector<Splat> splats;
    splats.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (!mask.kept(i)) continue;
        const GaussianPrimitive& g = field.primitives[i];
        auto proj = project_gaussian(g, cam);
        if (!proj) continue;
        proj->source_index = static_cast<int>(i);
        splats.push_back(make_splat(*proj, compensation * g.opacity(), g.color()));
    }
    std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
        if (a.geo.depth != b.geo.depth) return a.geo.depth < b.geo.depth;
        return a.geo.source_index < b.geo.source_index;
    });
    return splats;
}

Vec3 composite(const Vec2& pixel, std::span<const Splat> sorted, const Vec3& background,
               double early_stop_transmittance) {
    Vec3 color{0, 0, 0};
    double t = 1.0;
    for (const Splat& s : sorted) {
        if (pixel.x < s.bx0 || pixel.x >= s.bx1 || pixel.y < s.by0 || pixel.y >= s.by1) continue;
        const Vec2 d = pixel - s.geo.mean2d;
        const double q = s.inv_cov.quad(d);
        if (q > kQCutoff) continue;
        const double alpha = std::min(kAlphaClip, s.opacity * std::exp(-0.5 * q));
        color += s.color * (alpha * t);
        t *= 1.0 - alpha;
        if (t < early_stop_transmittance) break;
    }
    return color + background * t;
}

Image render(const GaussianField& field, const DropoutMask& mask, const Camera& cam,
             const Vec3& background, const RenderOptions& opts) {
    require_mask(field, mask, "render");
    const std::vector<Splat> splats = project_field(field, mask, cam, opts.compensation);
    const auto rows = bucket_rows(splats, cam.height);

    Image out(cam.width, cam.height);
    for_each_row_block(cam.height, opts.jobs, [&](int, int y0, int y1) {
        std::vector<const Splat*> cand;
        for (int y = y0; y < y1; ++y) {
            const auto& bucket = rows[static_cast<std::size_t>(y)];
            cand.clear();
            for (int i : bucket) cand.push_back(&splats[static_cast<std::size_t>(i)]);
            const double py = y + 0.5;
            for (int x = 0; x < cam.width; ++x) {
                const double px = x + 0.5;
                Vec3 color{0, 0, 0};
                double t = 1.0;
                for (const Splat* s : cand) {
                    if (px < s->bx0 || px >= s->bx1) continue;
                    const Vec2 d = Vec2{px, py} - s->geo.mean2d;
                    const double q = s->inv_cov.quad(d);
                    if (q > kQCutoff) continue;
                    const double alpha = std::min(kAlphaClip, s->opacity * std::exp(-0.5 * q));
                    color += s->color * (alpha * t);
                    t *= 1.0 - alpha;
                    if (t < opts.early_stop_transmittance) break;
                }
                out.set_pixel(x, y, color + background * t);
            }
        }
    });
    return out;
}

namespace {

// Maps the screen-space gradients accumulated for one splat back to the raw
// parameters of its source primitive.
void projection_backward(const GaussianPrimitive& g, const Camera& cam, const Splat& s,
                         const SplatGrad& acc, double compensation, GaussianPrimitive& grad) {
    // Color: activated -> logit.
    grad.color_logit.x += acc.cr * s.color.x * (1.0 - s.color.x);
    grad.color_logit.y += acc.cg * s.color.y * (1.0 - s.color.y);
    grad.color_logit.z += acc.cb * s.color.z * (1.0 - s.color.z);

    // Opacity: alpha = comp * sigmoid(l) * weight.
    const double sig = s.opacity / compensation;
    grad.opacity_logit += acc.a * compensation * sig * (1.0 - sig);

    // d/d cov2d = -P G P with G the accumulated d/d inv_cov.
    const SymMat2 p = s.inv_cov;
    const double ga = acc.pa, gb = acc.pb, gc = acc.pc;
    // t = G P (general 2x2), then dSigma = -P t
    const double t00 = ga * p.a + gb * p.b, t01 = ga * p.b + gb * p.c;
    const double t10 = gb * p.a + gc * p.b, t11 = gb * p.b + gc * p.c;
    SymMat2 g2; // d/d cov2d, full-matrix convention
    g2.a = -(p.a * t00 + p.b * t10);
    g2.b = -(p.a * t01 + p.b * t11);
    g2.c = -(p.b * t01 + p.c * t11);

    const Vec3 xc = cam.to_camera(g.position);
    const double z = xc.z;
    Vec3 j0, j1;
    projection_jacobian(cam, xc, j0, j1);
    const Mat3 sigma3 = covariance3d(g);
    const Mat3 sigma_cam = cam.rotation * sigma3 * cam.rotation.transposed();

    // d/d SigmaCam = J^T g2 J
    Mat3 gs;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            gs(i, j) = j0[i] * (g2.a * j0[j] + g2.b * j1[j]) + j1[i] * (g2.b * j0[j] + g2.c * j1[j]);

    // d/d J = 2 g2 J SigmaCam (2x3)
    const Vec3 js0 = sigma_cam * j0; // = (J SigmaCam) row 0
    const Vec3 js1 = sigma_cam * j1;
    Vec3 gj0 = (js0 * g2.a + js1 * g2.b) * 2.0;
    Vec3 gj1 = (js0 * g2.b + js1 * g2.c) * 2.0;

    // Mean and Jacobian entries both depend on the camera-space mean.
    Vec3 dxc{0, 0, 0};
    dxc.x += acc.mx * cam.fx / z;
    dxc.y += acc.my * cam.fy / z;
    dxc.z += -acc.mx * cam.fx * xc.x / (z * z) - acc.my * cam.fy * xc.y / (z * z);
    dxc.x += gj0.z * (-cam.fx / (z * z));
    dxc.y += gj1.z * (-cam.fy / (z * z));
    dxc.z += gj0.x * (-cam.fx / (z * z)) + gj0.z * (2.0 * cam.fx * xc.x / (z * z * z)) +
             gj1.y * (-cam.fy / (z * z)) + gj1.z * (2.0 * cam.fy * xc.y / (z * z * z));
    grad.position += cam.rotation.transposed_mul(dxc);

    // d/d Sigma3 = W^T gs W
    const Mat3 g3 = cam.rotation.transposed() * gs * cam.rotation;

    // Sigma3 = R D R^T with D = diag(exp(2 ls)).
    const Mat3 r = quat_to_rotation(g.rotation);
    const Mat3 rt_g3_r = r.transposed() * g3 * r;
    grad.log_scale.x += rt_g3_r(0, 0) * 2.0 * std::exp(2.0 * g.log_scale.x);
    grad.log_scale.y += rt_g3_r(1, 1) * 2.0 * std::exp(2.0 * g.log_scale.y);
    grad.log_scale.z += rt_g3_r(2, 2) * 2.0 * std::exp(2.0 * g.log_scale.z);

    // d/d R = 2 g3 R D
    const Mat3 d2 = scale_matrix_squared(g.log_scale);
    const Mat3 gr = (g3 * r * d2);
    // times 2 folded in below

    // dR/d(qhat) for the normalized quaternion, then back through q/|q|.
    const double qn = g.rotation.norm();
    const double w = g.rotation.w / qn, x = g.rotation.x / qn, y = g.rotation.y / qn,
                 z4 = g.rotation.z / qn;
    const double dRw[9] = {0, -z4, y, z4, 0, -x, -y, x, 0};
    const double dRx[9] = {0, y, z4, y, -2 * x, -w, z4, w, -2 * x};
    const double dRy[9] = {-2 * y, x, w, x, 0, z4, -w, z4, -2 * y};
    const double dRz[9] = {-2 * z4, -w, x, w, -2 * z4, y, x, y, 0};
    const double* tables[4] = {dRw, dRx, dRy, dRz};
    Vec4 dqhat{0, 0, 0, 0};
    for (int t = 0; t < 4; ++t) {
        double acc_t = 0.0;
        for (int e = 0; e < 9; ++e) acc_t += gr.m[static_cast<std::size_t>(e)] * tables[t][e];
        dqhat[t] = 2.0 * 2.0 * acc_t; // one 2 from dR/dq tables, one from d/dR
    }
    const double qdot = w * dqhat[0] + x * dqhat[1] + y * dqhat[2] + z4 * dqhat[3];
    grad.rotation.w += (dqhat[0] - w * qdot) / qn;
    grad.rotation.x += (dqhat[1] - x * qdot) / qn;
    grad.rotation.y += (dqhat[2] - y * qdot) / qn;
    grad.rotation.z += (dqhat[3] - z4 * qdot) / qn;
}

} // namespace

void render_backward(GaussianField& field, const DropoutMask& mask, const Camera& cam,
                     const Vec3& background, const Image& upstream, const RenderOptions& opts) {
    require_mask(field, mask, "render_backward");
    if (upstream.width != cam.width || upstream.height != cam.height)
        throw ShapeError("render_backward: upstream image does not match camera dimensions");

    const std::vector<Splat> splats = project_field(field, mask, cam, opts.compensation);
    if (splats.empty()) return; // only the background contributes; no parameters involved
    const auto rows = bucket_rows(splats, cam.height);

    const int blocks = std::max(1, std::min(opts.jobs, cam.height));
    std::vector<std::vector<SplatGrad>> block_grads(
        static_cast<std::size_t>(blocks), std::vector<SplatGrad>(splats.size()));

    for_each_row_block(cam.height, opts.jobs, [&](int block, int y0, int y1) {
        std::vector<SplatGrad>& acc = block_grads[static_cast<std::size_t>(block)];
        std::vector<PixContribution> recs;
        for (int y = y0; y < y1; ++y) {
            const auto& bucket = rows[static_cast<std::size_t>(y)];
            const double py = y + 0.5;
            for (int x = 0; x < cam.width; ++x) {
                const double px = x + 0.5;
                const Vec3 up = upstream.pixel(x, y);
                // Forward replay with the same skips and early stop.
                recs.clear();
                double t = 1.0;
                for (int i : bucket) {
                    const Splat& s = splats[static_cast<std::size_t>(i)];
                    if (px < s.bx0 || px >= s.bx1) continue;
                    const Vec2 d = Vec2{px, py} - s.geo.mean2d;
                    const double q = s.inv_cov.quad(d);
                    if (q > kQCutoff) continue;
                    const double weight = std::exp(-0.5 * q);
                    const double raw_alpha = s.opacity * weight;
                    const double alpha = std::min(kAlphaClip, raw_alpha);
                    recs.push_back({i, alpha, weight, t, d, raw_alpha > kAlphaClip});
                    t *= 1.0 - alpha;
                    if (t < opts.early_stop_transmittance) break;
                }
                // Suffix pass: rest = contribution of everything behind i.
                Vec3 rest = background * t;
                for (auto it = recs.rbegin(); it != recs.rend(); ++it) {
                    const Splat& s = splats[static_cast<std::size_t>(it->splat)];
                    SplatGrad& sg = acc[static_cast<std::size_t>(it->splat)];
                    const double wt = it->alpha * it->t;
                    sg.cr += up.x * wt;
                    sg.cg += up.y * wt;
                    sg.cb += up.z * wt;
                    if (!it->clipped) {
                        const double dl_dalpha =
                            up.dot(s.color * it->t - rest * (1.0 / (1.0 - it->alpha)));
                        sg.a += dl_dalpha * it->weight;
                        const double dl_dq = -0.5 * it->alpha * dl_dalpha;
                        const Vec2 pd{s.inv_cov.a * it->d.x + s.inv_cov.b * it->d.y,
                                      s.inv_cov.b * it->d.x + s.inv_cov.c * it->d.y};
                        sg.mx -= 2.0 * dl_dq * pd.x;
                        sg.my -= 2.0 * dl_dq * pd.y;
                        sg.pa += dl_dq * it->d.x * it->d.x;
                        sg.pb += dl_dq * it->d.x * it->d.y;
                        sg.pc += dl_dq * it->d.y * it->d.y;
                    }
                    rest += s.color * wt;
                }
            }
        }
    });

    // Deterministic reduction in block order, then one projection backward
    // per splat.
    for (int b = 1; b < blocks; ++b)
        for (std::size_t i = 0; i < splats.size(); ++i) {
            SplatGrad& dst = block_grads[0][i];
            const SplatGrad& src = block_grads[static_cast<std::size_t>(b)][i];
            dst.mx += src.mx;
            dst.my += src.my;
            dst.pa += src.pa;
            dst.pb += src.pb;
            dst.pc += src.pc;
            dst.a += src.a;
            dst.cr += src.cr;
            dst.cg += src.cg;
            dst.cb += src.cb;
        }

    for (std::size_t i = 0; i < splats.size(); ++i) {
        const Splat& s = splats[i];
        const std::size_t src = static_cast<std::size_t>(s.geo.source_index);
        projection_backward(field.primitives[src], cam, s, block_grads[0][i], opts.compensation,
                            field.grads[src]);
    }
}

} // namespace pairsplat
