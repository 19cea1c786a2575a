// Batched forward/backward passes of the attention regressor.
//
// A batch is cut into fixed chunks of kChunk samples. Each chunk is processed
// by ChunkKernel with its own gradient buffer; chunk results are then summed
// in chunk order. The serial and OpenMP paths share this decomposition, so they
// produce bit-identical results regardless of the thread count.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gtdl/model.hpp"
#include "model_layout.hpp"

namespace gtdl {

namespace {

constexpr std::size_t kChunk = 32;
constexpr double kNormEps = 1e-5;
constexpr double kMaskedLogit = -1e9;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

using Eigen::Index;
using ConstMatMap = Eigen::Map<const Matrix>;
using MatMap = Eigen::Map<Matrix>;
using ConstRowMap = Eigen::Map<const Eigen::RowVectorXd>;
using RowMap = Eigen::Map<Eigen::RowVectorXd>;

struct LayerCache {
    Matrix xhat1, n1;
    Vector rstd1;
    Matrix q, k, v, o;
    std::vector<double> attn;  // chunk x heads x t x t
    Matrix xhat2, n2;
    Vector rstd2;
    Matrix u, g;
    Matrix th;  // tanh term of GELU, reused by the backward pass
};

void layer_norm(const Matrix& x, const double* gain, const double* bias, Matrix& xhat, Vector& rstd, Matrix& out) {
    const Index rows = x.rows();
    const Index d = x.cols();
    xhat.resize(rows, d);
    out.resize(rows, d);
    rstd.resize(rows);
    const ConstRowMap g(gain, d);
    const ConstRowMap b(bias, d);
    for (Index r = 0; r < rows; ++r) {
        const double mean = x.row(r).mean();
        const double var = (x.row(r).array() - mean).square().mean();
        const double rs = 1.0 / std::sqrt(var + kNormEps);
        rstd(r) = rs;
        xhat.row(r) = (x.row(r).array() - mean) * rs;
        out.row(r) = xhat.row(r).cwiseProduct(g) + b;
    }
}

// Adds the input gradient to dx and accumulates gain/bias gradients.
void layer_norm_backward(const Matrix& dout, const Matrix& xhat, const Vector& rstd, const double* gain,
                         double* g_gain, double* g_bias, Matrix& dx) {
    const Index d = dout.cols();
    const ConstRowMap g(gain, d);
    RowMap gg(g_gain, d);
    RowMap gb(g_bias, d);
    gg += dout.cwiseProduct(xhat).colwise().sum();
    gb += dout.colwise().sum();
    for (Index r = 0; r < dout.rows(); ++r) {
        const Eigen::RowVectorXd dxhat = dout.row(r).cwiseProduct(g);
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat.row(r)).mean();
        dx.row(r).array() += rstd(r) * (dxhat.array() - m1 - xhat.row(r).array() * m2);
    }
}

// GELU, tanh approximation. th = tanh(c * (u + a * u^3)).
inline double gelu_tanh(double u) { return std::tanh(kGeluC * (u + kGeluA * u * u * u)); }

inline double gelu_grad(double u, double th) {
    return 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * kGeluA * u * u);
}

}  // namespace

struct ChunkKernel {
    const Model& model;
    detail::Offsets off;

    explicit ChunkKernel(const Model& m) : model(m), off(detail::compute_offsets(m.cfg_, m.n_inputs_)) {}

    ConstMatMap mat(std::size_t at, std::size_t rows, std::size_t cols) const {
        return ConstMatMap(model.params_.data() + at, static_cast<Index>(rows), static_cast<Index>(cols));
    }
    ConstRowMap row(std::size_t at, std::size_t n) const {
        return ConstRowMap(model.params_.data() + at, static_cast<Index>(n));
    }
    const double* ptr(std::size_t at) const { return model.params_.data() + at; }

    // Processes samples [0, batch) of x (batch x n_inputs) and writes
    // predictions to pred. With labels y it returns the summed squared error;
    // with grad it also adds grad_scale * d(SSE)/d(theta) into grad.
    double run(const double* x, std::size_t batch, const double* y, double grad_scale, double* grad, double* pred,
               double* attn_out) const {
        const auto& cfg = model.cfg_;
        const auto& mask = model.mask_;
        const std::size_t nin = model.n_inputs_;
        const std::size_t t = mask.tokens();
        const std::size_t d = cfg.dim;
        const std::size_t heads = cfg.heads;
        const std::size_t dk = cfg.head_dim();
        const std::size_t hid = cfg.ffn_dim();
        const bool node = cfg.readout == Readout::Node;
        const Index rows = static_cast<Index>(batch * t);
        const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

        // Tokenizer.
        Matrix xs(rows, static_cast<Index>(d));
        {
            const auto w = mat(off.tok_weight, nin, d);
            const auto b = mat(off.tok_bias, nin, d);
            for (std::size_t s = 0; s < batch; ++s) {
                for (std::size_t j = 0; j < nin; ++j)
                    xs.row(static_cast<Index>(s * t + j)) =
                        x[s * nin + j] * w.row(static_cast<Index>(j)) + b.row(static_cast<Index>(j));
                if (node) xs.row(static_cast<Index>(s * t + t - 1)) = row(off.target_token, d);
            }
        }

        std::vector<LayerCache> caches(cfg.layers);
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            const auto& lo = off.layers[l];
            auto& c = caches[l];
            layer_norm(xs, ptr(lo.ln1_gain), ptr(lo.ln1_bias), c.xhat1, c.rstd1, c.n1);
            c.q.noalias() = c.n1 * mat(lo.wq, d, d);
            c.q.rowwise() += row(lo.bq, d);
            c.k.noalias() = c.n1 * mat(lo.wk, d, d);
            c.k.rowwise() += row(lo.bk, d);
            c.v.noalias() = c.n1 * mat(lo.wv, d, d);
            c.v.rowwise() += row(lo.bv, d);

            c.attn.assign(batch * heads * t * t, 0.0);
            c.o.setZero(rows, static_cast<Index>(d));
            std::vector<double> logits(t);
            for (std::size_t s = 0; s < batch; ++s) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t base = s * t;
                    const std::size_t col = h * dk;
                    double* a = c.attn.data() + (s * heads + h) * t * t;
                    for (std::size_t j = 0; j < t; ++j) {
                        const double* qj = c.q.data() + (base + j) * d + col;
                        double peak = -std::numeric_limits<double>::infinity();
                        for (std::size_t k = 0; k < t; ++k) {
                            if (!mask.allowed(j, k)) {
                                logits[k] = kMaskedLogit;
                                continue;
                            }
                            const double* kk = c.k.data() + (base + k) * d + col;
                            double dot = 0.0;
                            for (std::size_t e = 0; e < dk; ++e) dot += qj[e] * kk[e];
                            logits[k] = scale * dot;
                            peak = std::max(peak, logits[k]);
                        }
                        double total = 0.0;
                        for (std::size_t k = 0; k < t; ++k) {
                            const double w = mask.allowed(j, k) ? std::exp(logits[k] - peak) : 0.0;
                            a[j * t + k] = w;
                            total += w;
                        }
                        double* oj = c.o.data() + (base + j) * d + col;
                        for (std::size_t k = 0; k < t; ++k) {
                            a[j * t + k] /= total;
                            const double w = a[j * t + k];
                            if (w == 0.0) continue;
                            const double* vk = c.v.data() + (base + k) * d + col;
                            for (std::size_t e = 0; e < dk; ++e) oj[e] += w * vk[e];
                        }
                    }
                }
            }
            if (attn_out) {
                const std::size_t layers = cfg.layers;
                for (std::size_t s = 0; s < batch; ++s)
                    std::copy_n(c.attn.data() + s * heads * t * t, heads * t * t,
                                attn_out + (s * layers + l) * heads * t * t);
            }
            xs.noalias() += c.o * mat(lo.wo, d, d);
            xs.rowwise() += row(lo.bo, d);

            layer_norm(xs, ptr(lo.ln2_gain), ptr(lo.ln2_bias), c.xhat2, c.rstd2, c.n2);
            c.u.noalias() = c.n2 * mat(lo.w1, d, hid);
            c.u.rowwise() += row(lo.b1, hid);
            c.th = c.u.unaryExpr([](double v) { return gelu_tanh(v); });
            c.g = 0.5 * c.u.array() * (1.0 + c.th.array());
            xs.noalias() += c.g * mat(lo.w2, hid, d);
            xs.rowwise() += row(lo.b2, d);
        }

        // Readout.
        Matrix z(static_cast<Index>(batch), static_cast<Index>(d));
        for (std::size_t s = 0; s < batch; ++s) {
            if (node)
                z.row(static_cast<Index>(s)) = xs.row(static_cast<Index>(s * t + t - 1));
            else
                z.row(static_cast<Index>(s)) =
                    xs.middleRows(static_cast<Index>(s * t), static_cast<Index>(t)).colwise().mean();
        }
        Matrix zhat, zn;
        Vector zrstd;
        layer_norm(z, ptr(off.lnf_gain), ptr(off.lnf_bias), zhat, zrstd, zn);
        const Vector head_w = row(off.head_weight, d).transpose();
        const double head_b = model.params_[off.head_bias];
        Vector out = zn * head_w;
        out.array() += head_b;
        for (std::size_t s = 0; s < batch; ++s) pred[s] = out(static_cast<Index>(s));

        if (!y) return 0.0;
        Vector resid(static_cast<Index>(batch));
        double sse = 0.0;
        for (std::size_t s = 0; s < batch; ++s) {
            resid(static_cast<Index>(s)) = out(static_cast<Index>(s)) - y[s];
            sse += resid(static_cast<Index>(s)) * resid(static_cast<Index>(s));
        }
        if (!grad) return sse;

        // Backward. dL/dpred = 2 * resid * grad_scale (grad_scale = 1/N).
        const Vector dy = 2.0 * grad_scale * resid;
        auto gmat = [&](std::size_t at, std::size_t r, std::size_t c) {
            return MatMap(grad + at, static_cast<Index>(r), static_cast<Index>(c));
        };
        auto grow = [&](std::size_t at, std::size_t n) { return RowMap(grad + at, static_cast<Index>(n)); };

        grow(off.head_weight, d) += (zn.transpose() * dy).transpose();
        grad[off.head_bias] += dy.sum();
        const Matrix dzn = dy * head_w.transpose();
        Matrix dz = Matrix::Zero(z.rows(), z.cols());
        layer_norm_backward(dzn, zhat, zrstd, ptr(off.lnf_gain), grad + off.lnf_gain, grad + off.lnf_bias, dz);

        Matrix dx = Matrix::Zero(rows, static_cast<Index>(d));
        for (std::size_t s = 0; s < batch; ++s) {
            if (node) {
                dx.row(static_cast<Index>(s * t + t - 1)) = dz.row(static_cast<Index>(s));
            } else {
                const Eigen::RowVectorXd share = dz.row(static_cast<Index>(s)) / static_cast<double>(t);
                for (std::size_t j = 0; j < t; ++j) dx.row(static_cast<Index>(s * t + j)) = share;
            }
        }

        Matrix dg, du, dn, dq, dk_, dv, dout;
        for (std::size_t li = cfg.layers; li-- > 0;) {
            const auto& lo = off.layers[li];
            const auto& c = caches[li];

            // Feed-forward block with residual.
            gmat(lo.w2, hid, d).noalias() += c.g.transpose() * dx;
            grow(lo.b2, d) += dx.colwise().sum();
            dg.noalias() = dx * mat(lo.w2, hid, d).transpose();
            du = dg.cwiseProduct(c.u.binaryExpr(c.th, [](double u, double th) { return gelu_grad(u, th); }));
            gmat(lo.w1, d, hid).noalias() += c.n2.transpose() * du;
            grow(lo.b1, hid) += du.colwise().sum();
            dn.noalias() = du * mat(lo.w1, d, hid).transpose();
            layer_norm_backward(dn, c.xhat2, c.rstd2, ptr(lo.ln2_gain), grad + lo.ln2_gain, grad + lo.ln2_bias, dx);

            // Attention block with residual.
            gmat(lo.wo, d, d).noalias() += c.o.transpose() * dx;
            grow(lo.bo, d) += dx.colwise().sum();
            dout.noalias() = dx * mat(lo.wo, d, d).transpose();

            dq.setZero(rows, static_cast<Index>(d));
            dk_.setZero(rows, static_cast<Index>(d));
            dv.setZero(rows, static_cast<Index>(d));
            std::vector<double> da(t);
            for (std::size_t s = 0; s < batch; ++s) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t base = s * t;
                    const std::size_t col = h * dk;
                    const double* a = c.attn.data() + (s * heads + h) * t * t;
                    for (std::size_t j = 0; j < t; ++j) {
                        const double* dout_j = dout.data() + (base + j) * d + col;
                        double weighted = 0.0;
                        for (std::size_t k = 0; k < t; ++k) {
                            const double ajk = a[j * t + k];
                            da[k] = 0.0;
                            if (ajk == 0.0) continue;
                            const double* vk = c.v.data() + (base + k) * d + col;
                            double* dvk = dv.data() + (base + k) * d + col;
                            double dot = 0.0;
                            for (std::size_t e = 0; e < dk; ++e) {
                                dot += dout_j[e] * vk[e];
                                dvk[e] += ajk * dout_j[e];
                            }
                            da[k] = dot;
                            weighted += ajk * dot;
                        }
                        const double* qj = c.q.data() + (base + j) * d + col;
                        double* dqj = dq.data() + (base + j) * d + col;
                        for (std::size_t k = 0; k < t; ++k) {
                            const double ajk = a[j * t + k];
                            if (ajk == 0.0) continue;
                            const double dsk = ajk * (da[k] - weighted) * scale;
                            if (dsk == 0.0) continue;
                            const double* kk = c.k.data() + (base + k) * d + col;
                            double* dkk = dk_.data() + (base + k) * d + col;
                            for (std::size_t e = 0; e < dk; ++e) {
                                dqj[e] += dsk * kk[e];
                                dkk[e] += dsk * qj[e];
                            }
                        }
                    }
                }
            }
            gmat(lo.wq, d, d).noalias() += c.n1.transpose() * dq;
            grow(lo.bq, d) += dq.colwise().sum();
            gmat(lo.wk, d, d).noalias() += c.n1.transpose() * dk_;
            grow(lo.bk, d) += dk_.colwise().sum();
            gmat(lo.wv, d, d).noalias() += c.n1.transpose() * dv;
            grow(lo.bv, d) += dv.colwise().sum();
            dn.noalias() = dq * mat(lo.wq, d, d).transpose();
            dn.noalias() += dk_ * mat(lo.wk, d, d).transpose();
            dn.noalias() += dv * mat(lo.wv, d, d).transpose();
            layer_norm_backward(dn, c.xhat1, c.rstd1, ptr(lo.ln1_gain), grad + lo.ln1_gain, grad + lo.ln1_bias, dx);
        }

        auto gw = gmat(off.tok_weight, nin, d);
        auto gb = gmat(off.tok_bias, nin, d);
        for (std::size_t s = 0; s < batch; ++s) {
            for (std::size_t j = 0; j < nin; ++j) {
                const auto g = dx.row(static_cast<Index>(s * t + j));
                gw.row(static_cast<Index>(j)) += x[s * nin + j] * g;
                gb.row(static_cast<Index>(j)) += g;
            }
            if (node) grow(off.target_token, d) += dx.row(static_cast<Index>(s * t + t - 1));
        }
        return sse;
    }
};

namespace {

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

struct ChunkRange {
    std::size_t begin, size;
};

ChunkRange chunk_range(std::size_t c, std::size_t n) {
    const std::size_t begin = c * kChunk;
    return {begin, std::min(kChunk, n - begin)};
}

void check_input(const Model& m, const Matrix& x) {
    if (static_cast<std::size_t>(x.cols()) != m.inputs()) throw DataError("input matrix has wrong column count");
}

}  // namespace

Vector Model::predict(const Matrix& x, Exec exec) const {
    check_input(*this, x);
    const std::size_t n = static_cast<std::size_t>(x.rows());
    Vector out(x.rows());
    const ChunkKernel kernel(*this);
    const auto chunks = static_cast<std::ptrdiff_t>(chunk_count(n));
    const auto body = [&](std::ptrdiff_t c) {
        const auto r = chunk_range(static_cast<std::size_t>(c), n);
        kernel.run(x.data() + r.begin * n_inputs_, r.size, nullptr, 0.0, nullptr, out.data() + r.begin, nullptr);
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < chunks; ++c) body(c);
    } else {
        for (std::ptrdiff_t c = 0; c < chunks; ++c) body(c);
    }
    return out;
}

double Model::loss(const Matrix& x, const Vector& y, Exec exec) const {
    check_input(*this, x);
    if (y.size() != x.rows() || x.rows() == 0) throw DataError("loss needs a nonempty batch with matching labels");
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const auto chunks = chunk_count(n);
    std::vector<double> sse(chunks, 0.0);
    std::vector<double> pred(n);
    const ChunkKernel kernel(*this);
    const auto body = [&](std::ptrdiff_t c) {
        const auto r = chunk_range(static_cast<std::size_t>(c), n);
        sse[static_cast<std::size_t>(c)] = kernel.run(x.data() + r.begin * n_inputs_, r.size, y.data() + r.begin,
                                                      0.0, nullptr, pred.data() + r.begin, nullptr);
    };
    const auto count = static_cast<std::ptrdiff_t>(chunks);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    } else {
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    }
    double total = 0.0;
    for (double v : sse) total += v;
    return total / static_cast<double>(n);
}

double Model::loss_and_gradient(const Matrix& x, const Vector& y, std::span<double> grad, Exec exec) const {
    check_input(*this, x);
    if (y.size() != x.rows() || x.rows() == 0) throw DataError("loss needs a nonempty batch with matching labels");
    if (grad.size() != params_.size()) throw DataError("gradient buffer has wrong size");
    const std::size_t n = static_cast<std::size_t>(x.rows());
    const auto chunks = chunk_count(n);
    const std::size_t np = params_.size();
    std::vector<double> sse(chunks, 0.0);
    std::vector<double> pred(n);
    AlignedBuffer buffers(chunks * np, 0.0);
    const double scale = 1.0 / static_cast<double>(n);
    const ChunkKernel kernel(*this);
    const auto body = [&](std::ptrdiff_t c) {
        const auto r = chunk_range(static_cast<std::size_t>(c), n);
        sse[static_cast<std::size_t>(c)] =
            kernel.run(x.data() + r.begin * n_inputs_, r.size, y.data() + r.begin, scale,
                       buffers.data() + static_cast<std::size_t>(c) * np, pred.data() + r.begin, nullptr);
    };
    const auto count = static_cast<std::ptrdiff_t>(chunks);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    } else {
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < chunks; ++c) {
        total += sse[c];
        const double* src = buffers.data() + c * np;
        for (std::size_t i = 0; i < np; ++i) grad[i] += src[i];
    }
    return total / static_cast<double>(n);
}

AttentionRecord Model::record_attention(const Matrix& x, Exec exec) const {
    check_input(*this, x);
    const std::size_t n = static_cast<std::size_t>(x.rows());
    AttentionRecord rec;
    rec.samples = n;
    rec.layers = cfg_.layers;
    rec.heads = cfg_.heads;
    rec.tokens = tokens();
    rec.data.assign(n * rec.layers * rec.heads * rec.tokens * rec.tokens, 0.0);
    const std::size_t per_sample = rec.layers * rec.heads * rec.tokens * rec.tokens;
    std::vector<double> pred(n);
    const ChunkKernel kernel(*this);
    const auto body = [&](std::ptrdiff_t c) {
        const auto r = chunk_range(static_cast<std::size_t>(c), n);
        kernel.run(x.data() + r.begin * n_inputs_, r.size, nullptr, 0.0, nullptr, pred.data() + r.begin,
                   rec.data.data() + r.begin * per_sample);
    };
    const auto count = static_cast<std::ptrdiff_t>(chunk_count(n));
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    } else {
        for (std::ptrdiff_t c = 0; c < count; ++c) body(c);
    }
    return rec;
}

}  // namespace gtdl
