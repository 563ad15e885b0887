// Minimal dense float tensor (NCHW) plus the im2col/sgemm kernels the
// convolution layers are built on.  Single-threaded apart from whatever
// the BLAS backend does internally.
#pragma once

#include <cblas.h>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace grain::nn {

struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw std::invalid_argument("Tensor: negative dimension");
    }

    size_t size() const { return v.size(); }
    float& at(int in, int ic, int ih, int iw) {
        return v[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    float at(int in, int ic, int ih, int iw) const {
        return v[((static_cast<size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    void zero() { std::fill(v.begin(), v.end(), 0.0f); }
};

// C = A(m×k) · B(k×n), row-major dense
inline void sgemm(const float* a, const float* b, float* c, int m, int k, int n,
                  bool trans_a = false, bool trans_b = false, float beta = 0.0f) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, 1.0f,
                a, trans_a ? m : k, b, trans_b ? k : n, beta, c, n);
}

// Unfold one image (c×h×w) into columns (c·kh·kw) × (oh·ow).
inline void im2col(const float* img, int ch, int h, int w, int kh, int kw,
                   int stride, int pad, float* cols) {
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    size_t idx = 0;
    for (int ic = 0; ic < ch; ++ic) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        cols[idx++] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                          ? img[(static_cast<size_t>(ic) * h + iy) * w + ix]
                                          : 0.0f;
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-add columns back into the image gradient.
inline void col2im(const float* cols, int ch, int h, int w, int kh, int kw,
                   int stride, int pad, float* img) {
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    size_t idx = 0;
    for (int ic = 0; ic < ch; ++ic) {
        for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            img[(static_cast<size_t>(ic) * h + iy) * w + ix] += cols[idx];
                        ++idx;
                    }
                }
            }
        }
    }
}

}  // namespace grain::nn
