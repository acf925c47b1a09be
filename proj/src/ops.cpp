#include "sponge/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sponge {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Output extent of a strided window, or 0 when the window does not fit.
std::size_t conv_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                        std::size_t padding) {
    long long span = static_cast<long long>(in) + 2 * static_cast<long long>(padding) -
                     static_cast<long long>(kernel);
    if (span < 0) return 0;
    return static_cast<std::size_t>(span) / stride + 1;
}

}  // namespace

NodeId matmul(Graph& g, NodeId a, NodeId b) {
    const Tensor& A = g.value(a);
    const Tensor& B = g.value(b);
    require(A.rank() == 2 && B.rank() == 2,
            "matmul: expected rank-2 operands, got " + shape_string(A.shape) + " and " +
                shape_string(B.shape));
    require(A.shape[1] == B.shape[0],
            "matmul: inner extents disagree, " + shape_string(A.shape) + " vs " +
                shape_string(B.shape));
    const std::size_t m = A.shape[0], k = A.shape[1], n = B.shape[1];

    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = &out.data[i * n];
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = A.data[i * k + kk];
            const double* b_row = &B.data[kk * n];
            for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
        }
    }

    return g.emplace("matmul", {a, b}, std::move(out), [m, k, n](const BackwardCtx& ctx) {
        const std::vector<double>& go = ctx.out_grad;
        const std::vector<double>& av = ctx.in_values[0]->data;
        const std::vector<double>& bv = ctx.in_values[1]->data;
        std::vector<double>& ga = *ctx.in_grads[0];
        std::vector<double>& gb = *ctx.in_grads[1];
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t kk = 0; kk < k; ++kk) {
                double acc = 0.0;
                const double* go_row = &go[i * n];
                const double* b_row = &bv[kk * n];
                for (std::size_t j = 0; j < n; ++j) acc += go_row[j] * b_row[j];
                ga[i * k + kk] += acc;
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            const double* go_row = &go[i * n];
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double aik = av[i * k + kk];
                double* gb_row = &gb[kk * n];
                for (std::size_t j = 0; j < n; ++j) gb_row[j] += aik * go_row[j];
            }
        }
    });
}

NodeId conv2d(Graph& g, NodeId input, NodeId kernel, std::size_t stride,
              std::size_t padding) {
    const Tensor& in = g.value(input);
    const Tensor& k = g.value(kernel);
    require(stride >= 1, "conv2d: stride must be positive");
    require(in.rank() == 4, "conv2d: input must be [N x C x H x W], got " +
                                shape_string(in.shape));
    require(k.rank() == 4, "conv2d: kernel must be [F x C x kh x kw], got " +
                               shape_string(k.shape));
    require(in.shape[1] == k.shape[1],
            "conv2d: channel mismatch, input " + shape_string(in.shape) + " kernel " +
                shape_string(k.shape));
    const std::size_t N = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::size_t F = k.shape[0], KH = k.shape[2], KW = k.shape[3];
    const std::size_t OH = conv_extent(H, KH, stride, padding);
    const std::size_t OW = conv_extent(W, KW, stride, padding);
    require(OH >= 1 && OW >= 1, "conv2d: non-positive output extent for input " +
                                    shape_string(in.shape) + " kernel " +
                                    shape_string(k.shape));

    Tensor out({N, F, OH, OW});
    const long long pad = static_cast<long long>(padding);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t f = 0; f < F; ++f) {
            double* out_plane = &out.data[(n * F + f) * OH * OW];
            for (std::size_t oh = 0; oh < OH; ++oh) {
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (std::size_t c = 0; c < C; ++c) {
                        const double* in_plane = &in.data[(n * C + c) * H * W];
                        const double* k_plane = &k.data[(f * C + c) * KH * KW];
                        for (std::size_t kh = 0; kh < KH; ++kh) {
                            const long long ih =
                                static_cast<long long>(oh * stride + kh) - pad;
                            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                            const double* in_row = &in_plane[static_cast<std::size_t>(ih) * W];
                            const double* k_row = &k_plane[kh * KW];
                            for (std::size_t kw = 0; kw < KW; ++kw) {
                                const long long iw =
                                    static_cast<long long>(ow * stride + kw) - pad;
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                acc += in_row[static_cast<std::size_t>(iw)] * k_row[kw];
                            }
                        }
                    }
                    out_plane[oh * OW + ow] = acc;
                }
            }
        }
    }

    auto backward = [N, C, H, W, F, KH, KW, OH, OW, stride, pad](const BackwardCtx& ctx) {
        const std::vector<double>& go = ctx.out_grad;
        const std::vector<double>& inv = ctx.in_values[0]->data;
        const std::vector<double>& kv = ctx.in_values[1]->data;
        std::vector<double>& gin = *ctx.in_grads[0];
        std::vector<double>& gk = *ctx.in_grads[1];
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t f = 0; f < F; ++f) {
                const double* go_plane = &go[(n * F + f) * OH * OW];
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const double gval = go_plane[oh * OW + ow];
                        if (gval == 0.0) continue;
                        for (std::size_t c = 0; c < C; ++c) {
                            const double* in_plane = &inv[(n * C + c) * H * W];
                            const double* k_plane = &kv[(f * C + c) * KH * KW];
                            double* gin_plane = &gin[(n * C + c) * H * W];
                            double* gk_plane = &gk[(f * C + c) * KH * KW];
                            for (std::size_t kh = 0; kh < KH; ++kh) {
                                const long long ih =
                                    static_cast<long long>(oh * stride + kh) - pad;
                                if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                                const std::size_t ihs = static_cast<std::size_t>(ih);
                                for (std::size_t kw = 0; kw < KW; ++kw) {
                                    const long long iw =
                                        static_cast<long long>(ow * stride + kw) - pad;
                                    if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                    const std::size_t iws = static_cast<std::size_t>(iw);
                                    gin_plane[ihs * W + iws] += gval * k_plane[kh * KW + kw];
                                    gk_plane[kh * KW + kw] += gval * in_plane[ihs * W + iws];
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    return g.emplace("conv2d", {input, kernel}, std::move(out), std::move(backward));
}

NodeId depthwise_conv2d(Graph& g, NodeId input, NodeId kernel, std::size_t stride,
                        std::size_t padding) {
    const Tensor& in = g.value(input);
    const Tensor& k = g.value(kernel);
    require(stride >= 1, "depthwise_conv2d: stride must be positive");
    require(in.rank() == 4, "depthwise_conv2d: input must be [N x C x H x W], got " +
                                shape_string(in.shape));
    require(k.rank() == 3, "depthwise_conv2d: kernel must be [C x kh x kw], got " +
                               shape_string(k.shape));
    require(in.shape[1] == k.shape[0],
            "depthwise_conv2d: channel mismatch, input " + shape_string(in.shape) +
                " kernel " + shape_string(k.shape));
    const std::size_t N = in.shape[0], C = in.shape[1], H = in.shape[2], W = in.shape[3];
    const std::size_t KH = k.shape[1], KW = k.shape[2];
    const std::size_t OH = conv_extent(H, KH, stride, padding);
    const std::size_t OW = conv_extent(W, KW, stride, padding);
    require(OH >= 1 && OW >= 1,
            "depthwise_conv2d: non-positive output extent for input " +
                shape_string(in.shape) + " kernel " + shape_string(k.shape));

    Tensor out({N, C, OH, OW});
    const long long pad = static_cast<long long>(padding);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* in_plane = &in.data[(n * C + c) * H * W];
            const double* k_plane = &k.data[c * KH * KW];
            double* out_plane = &out.data[(n * C + c) * OH * OW];
            for (std::size_t oh = 0; oh < OH; ++oh) {
                for (std::size_t ow = 0; ow < OW; ++ow) {
                    double acc = 0.0;
                    for (std::size_t kh = 0; kh < KH; ++kh) {
                        const long long ih = static_cast<long long>(oh * stride + kh) - pad;
                        if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                        const double* in_row = &in_plane[static_cast<std::size_t>(ih) * W];
                        const double* k_row = &k_plane[kh * KW];
                        for (std::size_t kw = 0; kw < KW; ++kw) {
                            const long long iw =
                                static_cast<long long>(ow * stride + kw) - pad;
                            if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                            acc += in_row[static_cast<std::size_t>(iw)] * k_row[kw];
                        }
                    }
                    out_plane[oh * OW + ow] = acc;
                }
            }
        }
    }

    auto backward = [N, C, H, W, KH, KW, OH, OW, stride, pad](const BackwardCtx& ctx) {
        const std::vector<double>& go = ctx.out_grad;
        const std::vector<double>& inv = ctx.in_values[0]->data;
        const std::vector<double>& kv = ctx.in_values[1]->data;
        std::vector<double>& gin = *ctx.in_grads[0];
        std::vector<double>& gk = *ctx.in_grads[1];
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t c = 0; c < C; ++c) {
                const double* in_plane = &inv[(n * C + c) * H * W];
                const double* k_plane = &kv[c * KH * KW];
                const double* go_plane = &go[(n * C + c) * OH * OW];
                double* gin_plane = &gin[(n * C + c) * H * W];
                double* gk_plane = &gk[c * KH * KW];
                for (std::size_t oh = 0; oh < OH; ++oh) {
                    for (std::size_t ow = 0; ow < OW; ++ow) {
                        const double gval = go_plane[oh * OW + ow];
                        if (gval == 0.0) continue;
                        for (std::size_t kh = 0; kh < KH; ++kh) {
                            const long long ih =
                                static_cast<long long>(oh * stride + kh) - pad;
                            if (ih < 0 || ih >= static_cast<long long>(H)) continue;
                            const std::size_t ihs = static_cast<std::size_t>(ih);
                            for (std::size_t kw = 0; kw < KW; ++kw) {
                                const long long iw =
                                    static_cast<long long>(ow * stride + kw) - pad;
                                if (iw < 0 || iw >= static_cast<long long>(W)) continue;
                                const std::size_t iws = static_cast<std::size_t>(iw);
                                gin_plane[ihs * W + iws] += gval * k_plane[kh * KW + kw];
                                gk_plane[kh * KW + kw] += gval * in_plane[ihs * W + iws];
                            }
                        }
                    }
                }
            }
        }
    };
    return g.emplace("depthwise_conv2d", {input, kernel}, std::move(out),
                     std::move(backward));
}

NodeId relu(Graph& g, NodeId x) {
    const Tensor& xv = g.value(x);
    Tensor out(xv.shape.empty() ? Tensor::scalar(0.0) : Tensor(xv.shape));
    for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = std::max(0.0, xv.data[i]);
    return g.emplace("relu", {x}, std::move(out), [](const BackwardCtx& ctx) {
        const std::vector<double>& xin = ctx.in_values[0]->data;
        std::vector<double>& gx = *ctx.in_grads[0];
        for (std::size_t i = 0; i < xin.size(); ++i) {
            if (xin[i] > 0.0) gx[i] += ctx.out_grad[i];
        }
    });
}

NodeId global_avg_pool(Graph& g, NodeId x) {
    const Tensor& xv = g.value(x);
    require(xv.rank() == 4, "global_avg_pool: input must be [N x C x H x W], got " +
                                shape_string(xv.shape));
    const std::size_t N = xv.shape[0], C = xv.shape[1], H = xv.shape[2], W = xv.shape[3];
    const std::size_t hw = H * W;
    Tensor out({N, C});
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double* plane = &xv.data[(n * C + c) * hw];
            double acc = 0.0;
            for (std::size_t i = 0; i < hw; ++i) acc += plane[i];
            out.data[n * C + c] = acc / static_cast<double>(hw);
        }
    }
    return g.emplace("global_avg_pool", {x}, std::move(out),
                     [N, C, hw](const BackwardCtx& ctx) {
                         std::vector<double>& gx = *ctx.in_grads[0];
                         for (std::size_t n = 0; n < N; ++n) {
                             for (std::size_t c = 0; c < C; ++c) {
                                 const double gval =
                                     ctx.out_grad[n * C + c] / static_cast<double>(hw);
                                 double* plane = &gx[(n * C + c) * hw];
                                 for (std::size_t i = 0; i < hw; ++i) plane[i] += gval;
                             }
                         }
                     });
}

NodeId add_bias(Graph& g, NodeId x, NodeId bias) {
    const Tensor& xv = g.value(x);
    const Tensor& bv = g.value(bias);
    require(xv.rank() == 2, "add_bias: input must be [N x D], got " +
                                shape_string(xv.shape));
    require(bv.rank() == 1 && bv.shape[0] == xv.shape[1],
            "add_bias: bias " + shape_string(bv.shape) + " does not match input " +
                shape_string(xv.shape));
    const std::size_t N = xv.shape[0], D = xv.shape[1];
    Tensor out({N, D});
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t d = 0; d < D; ++d) {
            out.data[n * D + d] = xv.data[n * D + d] + bv.data[d];
        }
    }
    return g.emplace("add_bias", {x, bias}, std::move(out),
                     [N, D](const BackwardCtx& ctx) {
                         std::vector<double>& gx = *ctx.in_grads[0];
                         std::vector<double>& gb = *ctx.in_grads[1];
                         for (std::size_t n = 0; n < N; ++n) {
                             for (std::size_t d = 0; d < D; ++d) {
                                 gx[n * D + d] += ctx.out_grad[n * D + d];
                                 gb[d] += ctx.out_grad[n * D + d];
                             }
                         }
                     });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
    const Tensor& av = g.value(a);
    const Tensor& bv = g.value(b);
    require(av.same_shape(bv), "mul: shape mismatch, " + shape_string(av.shape) +
                                   " vs " + shape_string(bv.shape));
    Tensor out(av.shape.empty() ? Tensor::scalar(0.0) : Tensor(av.shape));
    for (std::size_t i = 0; i < av.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
    return g.emplace("mul", {a, b}, std::move(out), [](const BackwardCtx& ctx) {
        const std::vector<double>& avd = ctx.in_values[0]->data;
        const std::vector<double>& bvd = ctx.in_values[1]->data;
        std::vector<double>& ga = *ctx.in_grads[0];
        std::vector<double>& gb = *ctx.in_grads[1];
        for (std::size_t i = 0; i < avd.size(); ++i) {
            ga[i] += ctx.out_grad[i] * bvd[i];
            gb[i] += ctx.out_grad[i] * avd[i];
        }
    });
}

NodeId sum(Graph& g, NodeId x) {
    const Tensor& xv = g.value(x);
    double acc = 0.0;
    for (double v : xv.data) acc += v;
    return g.emplace("sum", {x}, Tensor::scalar(acc), [](const BackwardCtx& ctx) {
        std::vector<double>& gx = *ctx.in_grads[0];
        const double gval = ctx.out_grad[0];
        for (double& v : gx) v += gval;
    });
}

NodeId softmax_cross_entropy(Graph& g, NodeId logits, std::vector<std::size_t> labels) {
    const Tensor& lv = g.value(logits);
    require(lv.rank() == 2, "softmax_cross_entropy: logits must be [N x C], got " +
                                shape_string(lv.shape));
    const std::size_t N = lv.shape[0], C = lv.shape[1];
    require(labels.size() == N, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(N) + " rows");
    for (std::size_t n = 0; n < N; ++n) {
        require(labels[n] < C, "softmax_cross_entropy: label " +
                                   std::to_string(labels[n]) + " out of range [0, " +
                                   std::to_string(C) + ")");
    }

    double total = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = &lv.data[n * C];
        double m = row[0];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
        total += std::log(z) - (row[labels[n]] - m);
    }
    const double mean = total / static_cast<double>(N);

    auto backward = [N, C, labels = std::move(labels)](const BackwardCtx& ctx) {
        const double gval = ctx.out_grad[0] / static_cast<double>(N);
        const std::vector<double>& lvd = ctx.in_values[0]->data;
        std::vector<double>& gl = *ctx.in_grads[0];
        for (std::size_t n = 0; n < N; ++n) {
            const double* row = &lvd[n * C];
            double m = row[0];
            for (std::size_t c = 1; c < C; ++c) m = std::max(m, row[c]);
            double z = 0.0;
            for (std::size_t c = 0; c < C; ++c) z += std::exp(row[c] - m);
            for (std::size_t c = 0; c < C; ++c) {
                const double p = std::exp(row[c] - m) / z;
                gl[n * C + c] += gval * (p - (c == labels[n] ? 1.0 : 0.0));
            }
        }
    };
    return g.emplace("softmax_cross_entropy", {logits}, Tensor::scalar(mean),
                     std::move(backward));
}

}  // namespace sponge
