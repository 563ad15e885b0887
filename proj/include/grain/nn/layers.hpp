// Layers with explicit forward/backward passes.  Each layer caches what its
// backward needs; call order must be forward-then-backward per step.
#pragma once

#include <cmath>
#include <string>

#include "grain/core.hpp"
#include "grain/nn/tensor.hpp"

namespace grain::nn {

// A named view onto one parameter vector and its gradient accumulator.
struct ParamBlock {
    std::string name;
    std::vector<float>* value = nullptr;
    std::vector<float>* grad = nullptr;
};

class Conv2d {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
           bool zero_init = false)
        : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
          weight_(static_cast<size_t>(out_ch) * in_ch * kernel * kernel),
          bias_(out_ch), dweight_(weight_.size()), dbias_(bias_.size()) {
        if (!zero_init) {
            // He-uniform over fan-in
            const double bound = std::sqrt(6.0 / (in_ch * kernel * kernel));
            for (float& v : weight_) v = static_cast<float>(rng.uniform(-bound, bound));
        }
    }

    Tensor forward(const Tensor& x) {
        if (x.c != in_ch_) throw std::invalid_argument("Conv2d: channel mismatch");
        x_ = x;
        oh_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
        ow_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
        const int kk = in_ch_ * k_ * k_;
        cols_.assign(static_cast<size_t>(x.n) * kk * oh_ * ow_, 0.0f);
        Tensor y(x.n, out_ch_, oh_, ow_);
        for (int b = 0; b < x.n; ++b) {
            float* cols = cols_.data() + static_cast<size_t>(b) * kk * oh_ * ow_;
            im2col(&x.v[static_cast<size_t>(b) * x.c * x.h * x.w], in_ch_, x.h, x.w,
                   k_, k_, stride_, pad_, cols);
            float* out = &y.v[static_cast<size_t>(b) * out_ch_ * oh_ * ow_];
            sgemm(weight_.data(), cols, out, out_ch_, kk, oh_ * ow_);
            for (int oc = 0; oc < out_ch_; ++oc)
                for (int i = 0; i < oh_ * ow_; ++i)
                    out[static_cast<size_t>(oc) * oh_ * ow_ + i] += bias_[oc];
        }
        return y;
    }

    Tensor backward(const Tensor& dy) {
        const int kk = in_ch_ * k_ * k_;
        Tensor dx(x_.n, in_ch_, x_.h, x_.w);
        std::vector<float> dcols(static_cast<size_t>(kk) * oh_ * ow_);
        for (int b = 0; b < x_.n; ++b) {
            const float* g = &dy.v[static_cast<size_t>(b) * out_ch_ * oh_ * ow_];
            const float* cols = cols_.data() + static_cast<size_t>(b) * kk * oh_ * ow_;
            // dW += g · colsᵀ ; dcols = Wᵀ · g
            sgemm(g, cols, dweight_.data(), out_ch_, oh_ * ow_, kk, false, true, 1.0f);
            sgemm(weight_.data(), g, dcols.data(), kk, out_ch_, oh_ * ow_, true, false);
            col2im(dcols.data(), in_ch_, x_.h, x_.w, k_, k_, stride_, pad_,
                   &dx.v[static_cast<size_t>(b) * in_ch_ * x_.h * x_.w]);
            for (int oc = 0; oc < out_ch_; ++oc)
                for (int i = 0; i < oh_ * ow_; ++i)
                    dbias_[oc] += g[static_cast<size_t>(oc) * oh_ * ow_ + i];
        }
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamBlock>& out) {
        out.push_back({prefix + ".weight", &weight_, &dweight_});
        out.push_back({prefix + ".bias", &bias_, &dbias_});
    }

private:
    int in_ch_, out_ch_, k_, stride_, pad_;
    int oh_ = 0, ow_ = 0;
    std::vector<float> weight_, bias_, dweight_, dbias_;
    std::vector<float> cols_;
    Tensor x_;
};

class Linear {
public:
    Linear(int in_f, int out_f, Rng& rng, bool zero_init = false)
        : in_(in_f), out_(out_f), weight_(static_cast<size_t>(out_f) * in_f),
          bias_(out_f), dweight_(weight_.size()), dbias_(bias_.size()) {
        if (!zero_init) {
            const double bound = std::sqrt(6.0 / in_f);
            for (float& v : weight_) v = static_cast<float>(rng.uniform(-bound, bound));
        }
    }

    // x: (n, in) flattened as Tensor{n, in, 1, 1}
    Tensor forward(const Tensor& x) {
        if (x.c != in_ || x.h != 1 || x.w != 1)
            throw std::invalid_argument("Linear: shape mismatch");
        x_ = x;
        Tensor y(x.n, out_, 1, 1);
        sgemm(x.v.data(), weight_.data(), y.v.data(), x.n, in_, out_, false, true);
        for (int b = 0; b < x.n; ++b)
            for (int o = 0; o < out_; ++o) y.v[static_cast<size_t>(b) * out_ + o] += bias_[o];
        return y;
    }

    Tensor backward(const Tensor& dy) {
        Tensor dx(x_.n, in_, 1, 1);
        sgemm(dy.v.data(), x_.v.data(), dweight_.data(), out_, x_.n, in_, true, false, 1.0f);
        sgemm(dy.v.data(), weight_.data(), dx.v.data(), x_.n, out_, in_);
        for (int b = 0; b < x_.n; ++b)
            for (int o = 0; o < out_; ++o) dbias_[o] += dy.v[static_cast<size_t>(b) * out_ + o];
        return dx;
    }

    void collect(const std::string& prefix, std::vector<ParamBlock>& out) {
        out.push_back({prefix + ".weight", &weight_, &dweight_});
        out.push_back({prefix + ".bias", &bias_, &dbias_});
    }

private:
    int in_, out_;
    std::vector<float> weight_, bias_, dweight_, dbias_;
    Tensor x_;
};

class ReLU {
public:
    Tensor forward(const Tensor& x) {
        mask_.assign(x.size(), 0);
        Tensor y = x;
        for (size_t i = 0; i < y.size(); ++i) {
            if (y.v[i] > 0.0f)
                mask_[i] = 1;
            else
                y.v[i] = 0.0f;
        }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        Tensor dx = dy;
        for (size_t i = 0; i < dx.size(); ++i)
            if (!mask_[i]) dx.v[i] = 0.0f;
        return dx;
    }

private:
    std::vector<char> mask_;
};

// Inverted dropout; identity when `train` is false.
class Dropout {
public:
    explicit Dropout(double p) : p_(p) {
        if (p < 0.0 || p >= 1.0) throw std::invalid_argument("Dropout: p outside [0,1)");
    }
    Tensor forward(const Tensor& x, bool train, Rng& rng) {
        if (!train || p_ == 0.0) {
            keep_.clear();
            return x;
        }
        keep_.assign(x.size(), 1);
        Tensor y = x;
        const float scale = static_cast<float>(1.0 / (1.0 - p_));
        for (size_t i = 0; i < y.size(); ++i) {
            if (rng.uniform() < p_) {
                keep_[i] = 0;
                y.v[i] = 0.0f;
            } else {
                y.v[i] *= scale;
            }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) {
        if (keep_.empty()) return dy;
        Tensor dx = dy;
        const float scale = static_cast<float>(1.0 / (1.0 - p_));
        for (size_t i = 0; i < dx.size(); ++i) dx.v[i] = keep_[i] ? dx.v[i] * scale : 0.0f;
        return dx;
    }

private:
    double p_;
    std::vector<char> keep_;
};

inline Tensor upsample_nearest2x(const Tensor& x) {
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int b = 0; b < x.n; ++b)
        for (int c = 0; c < x.c; ++c)
            for (int r = 0; r < y.h; ++r)
                for (int col = 0; col < y.w; ++col)
                    y.at(b, c, r, col) = x.at(b, c, r / 2, col / 2);
    return y;
}

inline Tensor upsample_nearest2x_backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
    for (int b = 0; b < dy.n; ++b)
        for (int c = 0; c < dy.c; ++c)
            for (int r = 0; r < dy.h; ++r)
                for (int col = 0; col < dy.w; ++col)
                    dx.at(b, c, r / 2, col / 2) += dy.at(b, c, r, col);
    return dx;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw std::invalid_argument("concat_channels: spatial mismatch");
    Tensor y(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int bn = 0; bn < a.n; ++bn) {
        std::copy_n(&a.v[static_cast<size_t>(bn) * a.c * plane], a.c * plane,
                    &y.v[static_cast<size_t>(bn) * y.c * plane]);
        std::copy_n(&b.v[static_cast<size_t>(bn) * b.c * plane], b.c * plane,
                    &y.v[static_cast<size_t>(bn) * y.c * plane + a.c * plane]);
    }
    return y;
}

inline std::pair<Tensor, Tensor> split_channels(const Tensor& y, int ca) {
    Tensor a(y.n, ca, y.h, y.w), b(y.n, y.c - ca, y.h, y.w);
    const size_t plane = static_cast<size_t>(y.h) * y.w;
    for (int bn = 0; bn < y.n; ++bn) {
        std::copy_n(&y.v[static_cast<size_t>(bn) * y.c * plane], ca * plane,
                    &a.v[static_cast<size_t>(bn) * ca * plane]);
        std::copy_n(&y.v[static_cast<size_t>(bn) * y.c * plane + ca * plane],
                    (y.c - ca) * plane, &b.v[static_cast<size_t>(bn) * b.c * plane]);
    }
    return {a, b};
}

// Decoupled weight decay: p -= lr·(adam_step + wd·p).
class AdamW {
public:
    AdamW(std::vector<ParamBlock> params, double lr, double weight_decay,
          double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), wd_(weight_decay), b1_(beta1), b2_(beta2),
          eps_(eps) {
        for (const auto& p : params_) {
            m_.emplace_back(p.value->size(), 0.0f);
            v_.emplace_back(p.value->size(), 0.0f);
        }
    }

    void zero_grad() {
        for (auto& p : params_) std::fill(p.grad->begin(), p.grad->end(), 0.0f);
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(b1_, t_);
        const double bc2 = 1.0 - std::pow(b2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& val = *params_[i].value;
            auto& grad = *params_[i].grad;
            for (size_t j = 0; j < val.size(); ++j) {
                const double g = grad[j];
                m_[i][j] = static_cast<float>(b1_ * m_[i][j] + (1.0 - b1_) * g);
                v_[i][j] = static_cast<float>(b2_ * v_[i][j] + (1.0 - b2_) * g * g);
                const double mh = m_[i][j] / bc1;
                const double vh = v_[i][j] / bc2;
                val[j] = static_cast<float>(
                    val[j] - lr_ * (mh / (std::sqrt(vh) + eps_) + wd_ * val[j]));
            }
        }
    }

private:
    std::vector<ParamBlock> params_;
    double lr_, wd_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<std::vector<float>> m_, v_;
};

}  // namespace grain::nn
