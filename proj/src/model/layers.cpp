#include "m2fn/model/layers.hpp"

#include <cmath>

namespace m2fn::model {

void init_weight(Eigen::MatrixXd& w, int fan_in, Rng& rng) {
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> uni(-bound, bound);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uni(rng);
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng, bool zero_init)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1) {
    if (!zero_init) init_weight(weight.value, in, rng);
}

Eigen::MatrixXd Linear::forward(const Eigen::MatrixXd& x) {
    x_ = x;
    return apply(x);
}

Eigen::MatrixXd Linear::apply(const Eigen::MatrixXd& x) const {
    return (weight.value * x).colwise() + Eigen::VectorXd(bias.value.col(0));
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& dy) {
    weight.grad.noalias() += dy * x_.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
    return weight.value.transpose() * dy;
}

void Linear::collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Conv2d::Conv2d(const std::string& name, int in_channels, int out_channels, Rng& rng)
    : weight(name + ".weight", out_channels, in_channels * 9),
      bias(name + ".bias", out_channels, 1),
      cin_(in_channels),
      cout_(out_channels) {
    init_weight(weight.value, in_channels * 9, rng);
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstRowMajorMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

// Fills `cols` (cin*9 x (y1-y0)*W, row-major) with im2col patches for output
// rows [y0, y1) of instance ni.
void im2col_strip(const FeatureTensor& x, int ni, int y0, int y1, RowMatrix& cols) {
    const int W = x.w, H = x.h, C = x.c;
    const Eigen::Index stride = cols.cols();
    for (int ci = 0; ci < C; ++ci) {
        const double* plane = x.plane(ni, ci);
        for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx) {
                const int row = ci * 9 + (ky + 1) * 3 + (kx + 1);
                double* row_ptr = cols.data() + static_cast<Eigen::Index>(row) * stride;
                for (int y = y0; y < y1; ++y) {
                    const int sy = y + ky;
                    double* dst = row_ptr + static_cast<Eigen::Index>(y - y0) * W;
                    if (sy < 0 || sy >= H) {
                        std::fill(dst, dst + W, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<Eigen::Index>(sy) * W;
                    for (int xx = 0; xx < W; ++xx) {
                        const int sx = xx + kx;
                        dst[xx] = (sx < 0 || sx >= W) ? 0.0 : src[sx];
                    }
                }
            }
    }
}

int strip_rows_for(int cin, int h, int w) {
    const Eigen::Index budget = 2'000'000;  // doubles of scratch
    Eigen::Index per_row = static_cast<Eigen::Index>(cin) * 9 * w;
    return std::min<int>(h, std::max<int>(1, static_cast<int>(budget / std::max<Eigen::Index>(per_row, 1))));
}

}  // namespace

FeatureTensor Conv2d::forward(const FeatureTensor& x) {
    if (x.c != cin_) throw UsageError("Conv2d: channel mismatch");
    x_ = x;
    FeatureTensor y(x.n, cout_, x.h, x.w);
    const int strip = strip_rows_for(cin_, x.h, x.w);
    for (int ni = 0; ni < x.n; ++ni) {
        for (int y0 = 0; y0 < x.h; y0 += strip) {
            const int y1 = std::min(x.h, y0 + strip);
            const Eigen::Index width = static_cast<Eigen::Index>(y1 - y0) * x.w;
            RowMatrix cols(cin_ * 9, width);
            im2col_strip(x, ni, y0, y1, cols);
            // y rows for channels, columns for strip locations
            RowMajorMap out(y.plane(ni, 0) + static_cast<Eigen::Index>(y0) * x.w, cout_, width,
                            Eigen::OuterStride<>(y.plane_size()));
            out.noalias() = weight.value * cols;
            out.colwise() += Eigen::VectorXd(bias.value.col(0));
        }
    }
    return y;
}

FeatureTensor Conv2d::backward(const FeatureTensor& dy) {
    FeatureTensor dx(x_.n, cin_, x_.h, x_.w);
    const int strip = strip_rows_for(cin_, x_.h, x_.w);
    for (int ni = 0; ni < x_.n; ++ni) {
        for (int y0 = 0; y0 < x_.h; y0 += strip) {
            const int y1 = std::min(x_.h, y0 + strip);
            const Eigen::Index width = static_cast<Eigen::Index>(y1 - y0) * x_.w;
            RowMatrix cols_block(cin_ * 9, width);
            im2col_strip(x_, ni, y0, y1, cols_block);
            ConstRowMajorMap dout(dy.plane(ni, 0) + static_cast<Eigen::Index>(y0) * x_.w, cout_, width,
                                  Eigen::OuterStride<>(dy.plane_size()));
            weight.grad.noalias() += dout * cols_block.transpose();
            bias.grad.col(0) += dout.rowwise().sum();

            RowMatrix dcols = weight.value.transpose() * dout;  // cin*9 x width
            // col2im accumulate
            for (int ci = 0; ci < cin_; ++ci) {
                double* dplane = dx.plane(ni, ci);
                for (int ky = -1; ky <= 1; ++ky)
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int row = ci * 9 + (ky + 1) * 3 + (kx + 1);
                        const double* row_ptr = dcols.data() + static_cast<Eigen::Index>(row) * dcols.cols();
                        for (int y = y0; y < y1; ++y) {
                            const int sy = y + ky;
                            if (sy < 0 || sy >= x_.h) continue;
                            const double* src = row_ptr + static_cast<Eigen::Index>(y - y0) * x_.w;
                            double* dst = dplane + static_cast<Eigen::Index>(sy) * x_.w;
                            for (int xx = 0; xx < x_.w; ++xx) {
                                const int sx = xx + kx;
                                if (sx >= 0 && sx < x_.w) dst[sx] += src[xx];
                            }
                        }
                    }
            }
        }
    }
    return dx;
}

void Conv2d::collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

FeatureTensor MaxPool2::forward(const FeatureTensor& x) {
    in_n_ = x.n;
    in_c_ = x.c;
    in_h_ = x.h;
    in_w_ = x.w;
    const int oh = x.h / 2, ow = x.w / 2;
    FeatureTensor y(x.n, x.c, oh, ow);
    argmax_.assign(static_cast<std::size_t>(y.data.size()), 0);
    Eigen::Index oi = 0;
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < x.c; ++ci) {
            const double* plane = x.plane(ni, ci);
            double* out = y.plane(ni, ci);
            for (int yy = 0; yy < oh; ++yy)
                for (int xx = 0; xx < ow; ++xx) {
                    Eigen::Index base = static_cast<Eigen::Index>(2 * yy) * x.w + 2 * xx;
                    Eigen::Index cand[4] = {base, base + 1, base + x.w, base + x.w + 1};
                    Eigen::Index best = cand[0];
                    for (int k = 1; k < 4; ++k)
                        if (plane[cand[k]] > plane[best]) best = cand[k];
                    out[yy * ow + xx] = plane[best];
                    argmax_[static_cast<std::size_t>(oi++)] =
                        (static_cast<Eigen::Index>(ni) * x.c + ci) * x.plane_size() + best;
                }
        }
    return y;
}

FeatureTensor MaxPool2::backward(const FeatureTensor& dy) const {
    FeatureTensor dx(in_n_, in_c_, in_h_, in_w_);
    for (Eigen::Index i = 0; i < dy.data.size(); ++i)
        dx.data[argmax_[static_cast<std::size_t>(i)]] += dy.data[i];
    return dx;
}

ConditionalBatchNorm::ConditionalBatchNorm(const std::string& name, int channels, int aux_dim, int hidden,
                                           Rng& rng)
    : base_gamma(name + ".base_gamma", channels, 1),
      base_beta(name + ".base_beta", channels, 1),
      running_mean(name + ".running_mean", channels, 1, false),
      running_var(name + ".running_var", channels, 1, false),
      channels_(channels),
      aux_dim_(aux_dim) {
    base_gamma.value.setOnes();
    running_var.value.setOnes();
    if (aux_dim > 0) {
        gamma_l1 = Linear(name + ".gamma_mlp.0", aux_dim, hidden, rng);
        gamma_l2 = Linear(name + ".gamma_mlp.1", hidden, channels, rng, /*zero_init=*/true);
        beta_l1 = Linear(name + ".beta_mlp.0", aux_dim, hidden, rng);
        beta_l2 = Linear(name + ".beta_mlp.1", hidden, channels, rng, /*zero_init=*/true);
    }
}

FeatureTensor ConditionalBatchNorm::forward(const FeatureTensor& x, const Eigen::MatrixXd* aux, bool training,
                                            bool update_running) {
    if (x.c != channels_) throw UsageError("ConditionalBatchNorm: channel mismatch");
    if (conditional()) {
        if (!aux) throw UsageError("ConditionalBatchNorm: aux batch required");
        if (aux->cols() != x.n) throw UsageError("ConditionalBatchNorm: aux batch size mismatch");
    }
    if (training && x.n < 2) throw NumericError("batch statistics undefined for batch size 1 in training");
    training_ = training;

    const Eigen::Index m = static_cast<Eigen::Index>(x.n) * x.plane_size();
    Eigen::VectorXd mean(channels_), var(channels_);
    if (training) {
        for (int ci = 0; ci < channels_; ++ci) {
            double s = 0, s2 = 0;
            for (int ni = 0; ni < x.n; ++ni) {
                const double* p = x.plane(ni, ci);
                for (Eigen::Index i = 0; i < x.plane_size(); ++i) {
                    s += p[i];
                    s2 += p[i] * p[i];
                }
            }
            mean[ci] = s / static_cast<double>(m);
            var[ci] = std::max(0.0, s2 / static_cast<double>(m) - mean[ci] * mean[ci]);
        }
        if (update_running) {
            running_mean.value.col(0) = (1 - momentum) * running_mean.value.col(0) + momentum * mean;
            running_var.value.col(0) = (1 - momentum) * running_var.value.col(0) + momentum * var;
        }
    } else {
        mean = running_mean.value.col(0);
        var = running_var.value.col(0);
    }
    inv_std_ = (var.array() + epsilon).rsqrt().matrix();

    // Per-instance effective scale/shift.
    gamma_eff_ = base_gamma.value.col(0).replicate(1, x.n);
    Eigen::MatrixXd beta_eff = base_beta.value.col(0).replicate(1, x.n);
    if (conditional()) {
        gamma_eff_ += gamma_l2.forward(gamma_relu_.forward(gamma_l1.forward(*aux)));
        beta_eff += beta_l2.forward(beta_relu_.forward(beta_l1.forward(*aux)));
    }

    xhat_ = FeatureTensor(x.n, x.c, x.h, x.w);
    FeatureTensor y(x.n, x.c, x.h, x.w);
    for (int ni = 0; ni < x.n; ++ni)
        for (int ci = 0; ci < channels_; ++ci) {
            const double* p = x.plane(ni, ci);
            double* ph = xhat_.plane(ni, ci);
            double* py = y.plane(ni, ci);
            const double g = gamma_eff_(ci, ni), b = beta_eff(ci, ni), inv = inv_std_[ci], mu = mean[ci];
            for (Eigen::Index i = 0; i < x.plane_size(); ++i) {
                ph[i] = (p[i] - mu) * inv;
                py[i] = g * ph[i] + b;
            }
        }
    return y;
}

FeatureTensor ConditionalBatchNorm::backward(const FeatureTensor& dy) {
    const int N = dy.n;
    const Eigen::Index L = dy.plane_size();
    const double m = static_cast<double>(N) * static_cast<double>(L);

    Eigen::MatrixXd dgamma_eff = Eigen::MatrixXd::Zero(channels_, N);
    Eigen::MatrixXd dbeta_eff = Eigen::MatrixXd::Zero(channels_, N);
    FeatureTensor dx(dy.n, dy.c, dy.h, dy.w);

    for (int ci = 0; ci < channels_; ++ci) {
        // reductions over (n, h, w)
        double sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (int ni = 0; ni < N; ++ni) {
            const double* pdy = dy.plane(ni, ci);
            const double* ph = xhat_.plane(ni, ci);
            const double g = gamma_eff_(ci, ni);
            double s = 0, sx = 0;
            for (Eigen::Index i = 0; i < L; ++i) {
                const double dxh = pdy[i] * g;
                s += dxh;
                sx += dxh * ph[i];
                dgamma_eff(ci, ni) += pdy[i] * ph[i];
                dbeta_eff(ci, ni) += pdy[i];
            }
            sum_dxhat += s;
            sum_dxhat_xhat += sx;
        }
        const double inv = inv_std_[ci];
        for (int ni = 0; ni < N; ++ni) {
            const double* pdy = dy.plane(ni, ci);
            const double* ph = xhat_.plane(ni, ci);
            double* pdx = dx.plane(ni, ci);
            const double g = gamma_eff_(ci, ni);
            if (training_) {
                for (Eigen::Index i = 0; i < L; ++i) {
                    const double dxh = pdy[i] * g;
                    pdx[i] = inv * (dxh - sum_dxhat / m - ph[i] * sum_dxhat_xhat / m);
                }
            } else {
                for (Eigen::Index i = 0; i < L; ++i) pdx[i] = pdy[i] * g * inv;
            }
        }
    }

    base_gamma.grad.col(0) += dgamma_eff.rowwise().sum();
    base_beta.grad.col(0) += dbeta_eff.rowwise().sum();
    if (conditional()) {
        gamma_l1.backward(gamma_relu_.backward(gamma_l2.backward(dgamma_eff)));
        beta_l1.backward(beta_relu_.backward(beta_l2.backward(dbeta_eff)));
    }
    return dx;
}

void ConditionalBatchNorm::collect(std::vector<Param*>& out) {
    out.push_back(&base_gamma);
    out.push_back(&base_beta);
    out.push_back(&running_mean);
    out.push_back(&running_var);
    if (conditional()) {
        gamma_l1.collect(out);
        gamma_l2.collect(out);
        beta_l1.collect(out);
        beta_l2.collect(out);
    }
}

SpatialAttention::SpatialAttention(const std::string& name, int channels, int aux_dim, int hidden, Rng& rng)
    : w_feat(name + ".w_feat", hidden, channels),
      w_aux(name + ".w_aux", hidden, aux_dim),
      b1(name + ".b1", hidden, 1),
      w_out(name + ".w_out", 1, hidden),
      b_out(name + ".b_out", 1, 1),
      hidden_(hidden) {
    init_weight(w_feat.value, channels + aux_dim, rng);
    init_weight(w_aux.value, channels + aux_dim, rng);
    init_weight(w_out.value, hidden, rng);
}

FeatureTensor SpatialAttention::forward(const FeatureTensor& x, const Eigen::MatrixXd& aux) {
    if (aux.cols() != x.n) throw UsageError("SpatialAttention: aux batch size mismatch");
    x_ = x;
    aux_ = aux;
    const Eigen::Index L = x.plane_size();
    alpha_.resize(L, x.n);
    hidden_acts_.assign(static_cast<std::size_t>(x.n), {});

    Eigen::MatrixXd aux_part = (w_aux.value * aux).colwise() + Eigen::VectorXd(b1.value.col(0));  // hidden x N
    FeatureTensor y(x.n, x.c, x.h, x.w);
    for (int ni = 0; ni < x.n; ++ni) {
        auto xi = x.instance(ni);  // C x L
        Eigen::MatrixXd h = ((w_feat.value * xi).colwise() + Eigen::VectorXd(aux_part.col(ni))).cwiseMax(0.0);
        Eigen::RowVectorXd logits = (w_out.value * h).row(0).array() + b_out.value(0, 0);
        // stable softmax over locations
        Eigen::RowVectorXd e = (logits.array() - logits.maxCoeff()).exp();
        Eigen::RowVectorXd a = e / e.sum();
        alpha_.col(ni) = a.transpose();
        y.instance(ni) = (xi.array().rowwise() * a.array()).matrix();
        hidden_acts_[static_cast<std::size_t>(ni)] = std::move(h);
    }
    return y;
}

FeatureTensor SpatialAttention::backward(const FeatureTensor& dy) {
    const Eigen::Index L = x_.plane_size();
    FeatureTensor dx(x_.n, x_.c, x_.h, x_.w);
    for (int ni = 0; ni < x_.n; ++ni) {
        auto xi = x_.instance(ni);
        auto dyi = dy.instance(ni);
        const Eigen::MatrixXd& h = hidden_acts_[static_cast<std::size_t>(ni)];
        Eigen::VectorXd a = alpha_.col(ni);

        // direct path
        dx.instance(ni) = (dyi.array().rowwise() * a.transpose().array()).matrix();

        // through attention weights
        Eigen::VectorXd da = (dyi.array() * xi.array()).colwise().sum().matrix().transpose();  // L
        const double dot = a.dot(da);
        Eigen::VectorXd dlogit = (a.array() * (da.array() - dot)).matrix();  // softmax backward

        // logit = w_out * h(:,l) + b_out
        w_out.grad.row(0) += (h * dlogit).transpose();
        b_out.grad(0, 0) += dlogit.sum();
        Eigen::MatrixXd dh = w_out.value.transpose() * dlogit.transpose();  // hidden x L
        dh.array() *= (h.array() > 0.0).cast<double>();

        w_feat.grad.noalias() += dh * xi.transpose();
        w_aux.grad.noalias() += dh.rowwise().sum() * aux_.col(ni).transpose();
        b1.grad.col(0) += dh.rowwise().sum();
        dx.instance(ni) += w_feat.value.transpose() * dh;
    }
    (void)L;
    return dx;
}

void SpatialAttention::collect(std::vector<Param*>& out) {
    out.push_back(&w_feat);
    out.push_back(&w_aux);
    out.push_back(&b1);
    out.push_back(&w_out);
    out.push_back(&b_out);
}

HighLevelFusion::HighLevelFusion(const std::string& name, int flat_dim, int aux_dim, int out_dim, Rng& rng)
    : img_proj(name + ".img", flat_dim, out_dim, rng), aux_proj(name + ".aux", aux_dim, out_dim, rng) {}

Eigen::MatrixXd HighLevelFusion::forward(const Eigen::MatrixXd& flat, const Eigen::MatrixXd& aux) {
    u_ = img_proj.forward(flat).array().tanh().matrix();
    v_ = aux_proj.forward(aux).array().tanh().matrix();
    return u_.cwiseProduct(v_);
}

Eigen::MatrixXd HighLevelFusion::backward(const Eigen::MatrixXd& dy) {
    Eigen::MatrixXd du = dy.cwiseProduct(v_).cwiseProduct((1.0 - u_.array().square()).matrix());
    Eigen::MatrixXd dv = dy.cwiseProduct(u_).cwiseProduct((1.0 - v_.array().square()).matrix());
    aux_proj.backward(dv);  // aux gradient discarded (constant input)
    return img_proj.backward(du);
}

void HighLevelFusion::collect(std::vector<Param*>& out) {
    img_proj.collect(out);
    aux_proj.collect(out);
}

}  // namespace m2fn::model
