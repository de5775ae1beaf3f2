#ifndef LPDM_KERNELS_H
#define LPDM_KERNELS_H

#include <cstddef>

// Low-level numeric kernels. lpdm::kernels holds the OpenMP-parallel
// implementations used by the model; lpdm::kernels::serial holds plain
// single-loop reference implementations with identical signatures, kept for
// testing and for the kernel benchmark. Parallel loops only split independent
// output elements, so results are reproducible run to run.
//
// Layout conventions: feature maps are channel-first [c][h][w]; conv weights
// are [oc][ic][k][k]; linear weights are [out][in]. Backward-filter and
// linear/groupnorm parameter gradients accumulate (+=) so micro-batches can
// be summed in place; backward-data outputs overwrite.

namespace lpdm::kernels {

#define LPDM_DECLARE_KERNELS                                                              \
    void conv2d_forward(const float* x, int ic, int h, int w, const float* wt,            \
                        const float* bias, int oc, int k, int stride, int pad, float* y,  \
                        int oh, int ow);                                                  \
    void conv2d_backward_data(const float* gy, int oc, int oh, int ow, const float* wt,   \
                              int ic, int k, int stride, int pad, float* gx, int h,       \
                              int w);                                                     \
    void conv2d_backward_filter(const float* x, int ic, int h, int w, const float* gy,    \
                                int oc, int oh, int ow, int k, int stride, int pad,       \
                                float* gw, float* gb);                                    \
    void group_norm_forward(const float* x, int c, int hw, int groups, float eps,         \
                            const float* gamma, const float* beta, float* y, float* mean, \
                            float* invstd);                                               \
    void group_norm_backward(const float* x, const float* gy, int c, int hw, int groups,  \
                             const float* gamma, const float* mean, const float* invstd,  \
                             float* gx, float* ggamma, float* gbeta);                     \
    void silu_forward(const float* x, size_t n, float* y);                                \
    void silu_backward(const float* x, const float* gy, size_t n, float* gx);             \
    void linear_forward(const float* x, int in, const float* wt, const float* b, int out, \
                        float* y);                                                        \
    void linear_backward(const float* x, const float* gy, int in, int out,                \
                         const float* wt, float* gx, float* gw, float* gb);               \
    void nearest_upsample2x_forward(const float* x, int c, int h, int w, float* y);       \
    void nearest_upsample2x_backward(const float* gy, int c, int h, int w, float* gx);    \
    void softmax_rows(float* m, int rows, int cols);                                      \
    void matmul_nt(const float* a, const float* b, int m, int k, int n, float alpha,      \
                   float* out);                                                           \
    void matmul_nn(const float* a, const float* b, int m, int k, int n, float alpha,      \
                   float* out);

LPDM_DECLARE_KERNELS

namespace serial {
LPDM_DECLARE_KERNELS
}

#undef LPDM_DECLARE_KERNELS

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

}  // namespace lpdm::kernels

#endif
