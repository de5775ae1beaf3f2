#include <algorithm>
#include <cmath>
#include <cstring>

#include "lpdm/kernels.h"

// Straight-line reference implementations. No parallelism, no loop tricks;
// these exist so the OpenMP kernels can be checked against something that is
// obviously a transcription of the math.

namespace lpdm::kernels::serial {

void conv2d_forward(const float* x, int ic, int h, int w, const float* wt,
                    const float* bias, int oc, int k, int stride, int pad, float* y,
                    int oh, int ow) {
    for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                float acc = bias ? bias[o] : 0.0f;
                for (int ci = 0; ci < ic; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += wt[((static_cast<size_t>(o) * ic + ci) * k + ky) * k + kx] *
                                   x[(static_cast<size_t>(ci) * h + iy) * w + ix];
                        }
                    }
                }
                y[(static_cast<size_t>(o) * oh + oy) * ow + ox] = acc;
            }
        }
    }
}

void conv2d_backward_data(const float* gy, int oc, int oh, int ow, const float* wt,
                          int ic, int k, int stride, int pad, float* gx, int h, int w) {
    std::memset(gx, 0, static_cast<size_t>(ic) * h * w * sizeof(float));
    for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const float g = gy[(static_cast<size_t>(o) * oh + oy) * ow + ox];
                for (int ci = 0; ci < ic; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            gx[(static_cast<size_t>(ci) * h + iy) * w + ix] +=
                                g * wt[((static_cast<size_t>(o) * ic + ci) * k + ky) * k + kx];
                        }
                    }
                }
            }
        }
    }
}

void conv2d_backward_filter(const float* x, int ic, int h, int w, const float* gy,
                            int oc, int oh, int ow, int k, int stride, int pad,
                            float* gw, float* gb) {
    for (int o = 0; o < oc; ++o) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const float g = gy[(static_cast<size_t>(o) * oh + oy) * ow + ox];
                if (gb) gb[o] += g;
                for (int ci = 0; ci < ic; ++ci) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= w) continue;
                            gw[((static_cast<size_t>(o) * ic + ci) * k + ky) * k + kx] +=
                                g * x[(static_cast<size_t>(ci) * h + iy) * w + ix];
                        }
                    }
                }
            }
        }
    }
}

void group_norm_forward(const float* x, int c, int hw, int groups, float eps,
                        const float* gamma, const float* beta, float* y, float* mean,
                        float* invstd) {
    const int cpg = c / groups;
    const size_t gsize = static_cast<size_t>(cpg) * hw;
    for (int g = 0; g < groups; ++g) {
        const float* xg = x + static_cast<size_t>(g) * gsize;
        double sum = 0.0;
        for (size_t i = 0; i < gsize; ++i) sum += xg[i];
        const double mu = sum / static_cast<double>(gsize);
        double var = 0.0;
        for (size_t i = 0; i < gsize; ++i) var += (xg[i] - mu) * (xg[i] - mu);
        var /= static_cast<double>(gsize);
        mean[g] = static_cast<float>(mu);
        invstd[g] = static_cast<float>(1.0 / std::sqrt(var + eps));
        for (int cc = 0; cc < cpg; ++cc) {
            const int ch = g * cpg + cc;
            for (int i = 0; i < hw; ++i) {
                const size_t idx = static_cast<size_t>(ch) * hw + i;
                y[idx] = gamma[ch] * (x[idx] - mean[g]) * invstd[g] + beta[ch];
            }
        }
    }
}

void group_norm_backward(const float* x, const float* gy, int c, int hw, int groups,
                         const float* gamma, const float* mean, const float* invstd,
                         float* gx, float* ggamma, float* gbeta) {
    const int cpg = c / groups;
    const size_t gsize = static_cast<size_t>(cpg) * hw;
    for (int g = 0; g < groups; ++g) {
        double m1 = 0.0, m2 = 0.0;
        for (int cc = 0; cc < cpg; ++cc) {
            const int ch = g * cpg + cc;
            for (int i = 0; i < hw; ++i) {
                const size_t idx = static_cast<size_t>(ch) * hw + i;
                const float xhat = (x[idx] - mean[g]) * invstd[g];
                const float dxhat = gy[idx] * gamma[ch];
                m1 += dxhat;
                m2 += static_cast<double>(dxhat) * xhat;
                gbeta[ch] += gy[idx];
                ggamma[ch] += gy[idx] * xhat;
            }
        }
        m1 /= static_cast<double>(gsize);
        m2 /= static_cast<double>(gsize);
        for (int cc = 0; cc < cpg; ++cc) {
            const int ch = g * cpg + cc;
            for (int i = 0; i < hw; ++i) {
                const size_t idx = static_cast<size_t>(ch) * hw + i;
                const float xhat = (x[idx] - mean[g]) * invstd[g];
                const float dxhat = gy[idx] * gamma[ch];
                gx[idx] = invstd[g] * (dxhat - static_cast<float>(m1) -
                                       xhat * static_cast<float>(m2));
            }
        }
    }
}

void silu_forward(const float* x, size_t n, float* y) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] / (1.0f + std::exp(-x[i]));
}

void silu_backward(const float* x, const float* gy, size_t n, float* gx) {
    for (size_t i = 0; i < n; ++i) {
        const float s = 1.0f / (1.0f + std::exp(-x[i]));
        gx[i] = gy[i] * s * (1.0f + x[i] * (1.0f - s));
    }
}

void linear_forward(const float* x, int in, const float* wt, const float* b, int out,
                    float* y) {
    for (int o = 0; o < out; ++o) {
        float acc = b ? b[o] : 0.0f;
        for (int i = 0; i < in; ++i) acc += wt[static_cast<size_t>(o) * in + i] * x[i];
        y[o] = acc;
    }
}

void linear_backward(const float* x, const float* gy, int in, int out, const float* wt,
                     float* gx, float* gw, float* gb) {
    if (gx) {
        for (int i = 0; i < in; ++i) {
            float acc = 0.0f;
            for (int o = 0; o < out; ++o) acc += gy[o] * wt[static_cast<size_t>(o) * in + i];
            gx[i] = acc;
        }
    }
    for (int o = 0; o < out; ++o) {
        for (int i = 0; i < in; ++i) gw[static_cast<size_t>(o) * in + i] += gy[o] * x[i];
        if (gb) gb[o] += gy[o];
    }
}

void nearest_upsample2x_forward(const float* x, int c, int h, int w, float* y) {
    const int oh = 2 * h, ow = 2 * w;
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < oh; ++yy)
            for (int xx = 0; xx < ow; ++xx)
                y[(static_cast<size_t>(ci) * oh + yy) * ow + xx] =
                    x[(static_cast<size_t>(ci) * h + yy / 2) * w + xx / 2];
}

void nearest_upsample2x_backward(const float* gy, int c, int h, int w, float* gx) {
    const int oh = 2 * h, ow = 2 * w;
    std::memset(gx, 0, static_cast<size_t>(c) * h * w * sizeof(float));
    for (int ci = 0; ci < c; ++ci)
        for (int yy = 0; yy < oh; ++yy)
            for (int xx = 0; xx < ow; ++xx)
                gx[(static_cast<size_t>(ci) * h + yy / 2) * w + xx / 2] +=
                    gy[(static_cast<size_t>(ci) * oh + yy) * ow + xx];
}

void softmax_rows(float* m, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        float* row = m + static_cast<size_t>(r) * cols;
        float mx = row[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        float sum = 0.0f;
        for (int j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < cols; ++j) row[j] /= sum;
    }
}

void matmul_nt(const float* a, const float* b, int m, int k, int n, float alpha,
               float* out) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int kk = 0; kk < k; ++kk)
                acc += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(j) * k + kk];
            out[static_cast<size_t>(i) * n + j] = alpha * acc;
        }
    }
}

void matmul_nn(const float* a, const float* b, int m, int k, int n, float alpha,
               float* out) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            float acc = 0.0f;
            for (int kk = 0; kk < k; ++kk)
                acc += a[static_cast<size_t>(i) * k + kk] * b[static_cast<size_t>(kk) * n + j];
            out[static_cast<size_t>(i) * n + j] = alpha * acc;
        }
    }
}

}  // namespace lpdm::kernels::serial
