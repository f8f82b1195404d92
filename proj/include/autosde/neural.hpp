#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autosde/common.hpp"
#include "autosde/rng.hpp"

namespace autosde {

/// Architecture of the sequence autoencoder: a 3-layer dense encoder
/// (D -> enc_w1 -> enc_w2 -> latent, tanh on hidden layers, linear output),
/// a single LSTM layer over the latent sequence whose hidden state is
/// linearly projected back to the latent width, and a 3-layer dense decoder
/// mirroring the encoder (latent -> enc_w2 -> enc_w1 -> D).
struct NetConfig {
    int data_dim = 2;
    int latent_dim = 2;
    int enc_w1 = 32;
    int enc_w2 = 16;
    int lstm_hidden = 32;
};

/// One named block of the flat parameter vector.
struct ParamSegment {
    std::string name;
    int rows = 0;
    int cols = 0;  // 1 for bias vectors
    long offset = 0;

    long size() const { return static_cast<long>(rows) * cols; }
};

/// Intermediate activations of one batched forward pass, laid out time-major
/// (every entry is batch x width). Sufficient for an exact reverse sweep.
struct ForwardTape {
    long batch = 0;
    long m = 0;
    std::vector<MatrixXd> x;                // input rows
    std::vector<MatrixXd> e1, e2;           // encoder hidden (post-tanh)
    std::vector<MatrixXd> lat;              // latent sequence
    std::vector<MatrixXd> gate_i, gate_f, gate_g, gate_o;
    std::vector<MatrixXd> cell, tanh_cell, hidden;
    std::vector<MatrixXd> proj;             // projected LSTM output
    std::vector<MatrixXd> d1, d2;           // decoder hidden (post-tanh)
    std::vector<MatrixXd> out;              // output rows
};

namespace detail {

inline MatrixXd sigmoid(const MatrixXd& x) {
    return ((-x.array()).exp() + 1.0).inverse().matrix();
}

}  // namespace detail

/// Encoder/LSTM/decoder model over a flat double-precision parameter vector
/// with a named layout manifest. Forward consumes an m-row window of
/// D-vectors and emits an m-row window; the LSTM starts from zero hidden and
/// cell state on every window.
class AutoSdeModel {
public:
    AutoSdeModel(NetConfig cfg, std::uint64_t init_seed) : cfg_(cfg), init_seed_(init_seed) {
        require(cfg.data_dim >= 1 && cfg.latent_dim >= 1 && cfg.enc_w1 >= 1 && cfg.enc_w2 >= 1 &&
                    cfg.lstm_hidden >= 1,
                "model: all widths must be >= 1");
        long offset = 0;
        auto add = [&](const std::string& name, int rows, int cols) {
            layout_.push_back({name, rows, cols, offset});
            offset += static_cast<long>(rows) * cols;
        };
        add("enc1.W", cfg.enc_w1, cfg.data_dim);
        add("enc1.b", cfg.enc_w1, 1);
        add("enc2.W", cfg.enc_w2, cfg.enc_w1);
        add("enc2.b", cfg.enc_w2, 1);
        add("enc3.W", cfg.latent_dim, cfg.enc_w2);
        add("enc3.b", cfg.latent_dim, 1);
        add("lstm.Wx", 4 * cfg.lstm_hidden, cfg.latent_dim);
        add("lstm.Wh", 4 * cfg.lstm_hidden, cfg.lstm_hidden);
        add("lstm.b", 4 * cfg.lstm_hidden, 1);
        add("proj.W", cfg.latent_dim, cfg.lstm_hidden);
        add("proj.b", cfg.latent_dim, 1);
        add("dec1.W", cfg.enc_w2, cfg.latent_dim);
        add("dec1.b", cfg.enc_w2, 1);
        add("dec2.W", cfg.enc_w1, cfg.enc_w2);
        add("dec2.b", cfg.enc_w1, 1);
        add("dec3.W", cfg.data_dim, cfg.enc_w1);
        add("dec3.b", cfg.data_dim, 1);
        params_ = VectorXd::Zero(offset);
        initialize(init_seed);
    }

    const NetConfig& config() const { return cfg_; }
    const std::vector<ParamSegment>& layout() const { return layout_; }
    std::uint64_t init_seed() const { return init_seed_; }
    long n_params() const { return params_.size(); }
    const VectorXd& params() const { return params_; }
    VectorXd& params() { return params_; }

    /// Glorot-uniform weights, zero biases, forget-gate bias +1.
    void initialize(std::uint64_t seed) {
        init_seed_ = seed;
        RngStream stream(detail::mix64(seed + 0x5eedULL));
        for (const ParamSegment& seg : layout_) {
            if (seg.cols == 1) {
                params_.segment(seg.offset, seg.size()).setZero();
                continue;
            }
            const double limit = std::sqrt(6.0 / (seg.rows + seg.cols));
            for (long i = 0; i < seg.size(); ++i)
                params_[seg.offset + i] = stream.next_uniform(-limit, limit);
        }
        // forget gate bias (+1) stabilises early BPTT
        auto b = vec("lstm.b");
        b.segment(cfg_.lstm_hidden, cfg_.lstm_hidden).array() += 1.0;
    }

    Eigen::Map<const MatrixXd> mat(const std::string& name) const {
        const ParamSegment& s = segment(name);
        return {params_.data() + s.offset, s.rows, s.cols};
    }

    Eigen::Map<Eigen::VectorXd> vec(const std::string& name) {
        const ParamSegment& s = segment(name);
        return {params_.data() + s.offset, s.size()};
    }

    /// Batched forward pass; windows are stacked time-major inside the tape.
    ForwardTape forward_batch(const std::vector<const MatrixXd*>& windows) const {
        require(!windows.empty(), "forward: empty batch");
        const long batch = static_cast<long>(windows.size());
        const long m = windows.front()->rows();
        for (const MatrixXd* w : windows) {
            require(w->rows() == m && w->cols() == cfg_.data_dim, "forward: inconsistent window shape");
        }

        ForwardTape t;
        t.batch = batch;
        t.m = m;
        const auto W1 = mat("enc1.W"), W2 = mat("enc2.W"), W3 = mat("enc3.W");
        const auto V1 = mat("dec1.W"), V2 = mat("dec2.W"), V3 = mat("dec3.W");
        const auto Wx = mat("lstm.Wx"), Wh = mat("lstm.Wh"), Wp = mat("proj.W");
        const auto b1 = mat("enc1.b"), b2 = mat("enc2.b"), b3 = mat("enc3.b");
        const auto c1 = mat("dec1.b"), c2 = mat("dec2.b"), c3 = mat("dec3.b");
        const auto bl = mat("lstm.b"), bp = mat("proj.b");
        const int h = cfg_.lstm_hidden;

        MatrixXd hidden = MatrixXd::Zero(batch, h);
        MatrixXd cell = MatrixXd::Zero(batch, h);
        for (long step = 0; step < m; ++step) {
            MatrixXd x(batch, cfg_.data_dim);
            for (long b = 0; b < batch; ++b) x.row(b) = windows[static_cast<std::size_t>(b)]->row(step);
            t.x.push_back(x);

            t.e1.push_back(((x * W1.transpose()).rowwise() + b1.col(0).transpose()).array().tanh().matrix());
            t.e2.push_back(((t.e1.back() * W2.transpose()).rowwise() + b2.col(0).transpose()).array().tanh().matrix());
            t.lat.push_back((t.e2.back() * W3.transpose()).rowwise() + b3.col(0).transpose());

            MatrixXd pre = (t.lat.back() * Wx.transpose() + hidden * Wh.transpose()).rowwise() + bl.col(0).transpose();
            t.gate_i.push_back(detail::sigmoid(pre.leftCols(h)));
            t.gate_f.push_back(detail::sigmoid(pre.middleCols(h, h)));
            t.gate_g.push_back(pre.middleCols(2 * h, h).array().tanh().matrix());
            t.gate_o.push_back(detail::sigmoid(pre.rightCols(h)));
            cell = t.gate_f.back().cwiseProduct(cell) + t.gate_i.back().cwiseProduct(t.gate_g.back());
            t.cell.push_back(cell);
            t.tanh_cell.push_back(cell.array().tanh().matrix());
            hidden = t.gate_o.back().cwiseProduct(t.tanh_cell.back());
            t.hidden.push_back(hidden);

            t.proj.push_back((hidden * Wp.transpose()).rowwise() + bp.col(0).transpose());
            t.d1.push_back(((t.proj.back() * V1.transpose()).rowwise() + c1.col(0).transpose()).array().tanh().matrix());
            t.d2.push_back(((t.d1.back() * V2.transpose()).rowwise() + c2.col(0).transpose()).array().tanh().matrix());
            t.out.push_back((t.d2.back() * V3.transpose()).rowwise() + c3.col(0).transpose());
            if (!all_finite(t.out.back()))
                throw std::runtime_error("forward: non-finite activations at step " + std::to_string(step));
        }
        return t;
    }

    /// Exact reverse sweep; d_out is time-major dLoss/dOutput.
    VectorXd backward_batch(const ForwardTape& t, const std::vector<MatrixXd>& d_out) const {
        const int h = cfg_.lstm_hidden;
        const auto W1 = mat("enc1.W"), W2 = mat("enc2.W"), W3 = mat("enc3.W");
        const auto V1 = mat("dec1.W"), V2 = mat("dec2.W"), V3 = mat("dec3.W");
        const auto Wx = mat("lstm.Wx"), Wh = mat("lstm.Wh"), Wp = mat("proj.W");

        VectorXd grad = VectorXd::Zero(n_params());
        auto gmat = [&](const std::string& name) {
            const ParamSegment& s = segment(name);
            return Eigen::Map<MatrixXd>(grad.data() + s.offset, s.rows, s.cols);
        };
        auto gvec = [&](const std::string& name) {
            const ParamSegment& s = segment(name);
            return Eigen::Map<VectorXd>(grad.data() + s.offset, s.size());
        };

        MatrixXd d_hidden = MatrixXd::Zero(t.batch, h);
        MatrixXd d_cell = MatrixXd::Zero(t.batch, h);
        std::vector<MatrixXd> d_lat(static_cast<std::size_t>(t.m));

        for (long step = t.m - 1; step >= 0; --step) {
            const auto s = static_cast<std::size_t>(step);
            // decoder
            MatrixXd dy = d_out[s];
            gmat("dec3.W") += dy.transpose() * t.d2[s];
            gvec("dec3.b") += dy.colwise().sum().transpose();
            MatrixXd dd2 = (dy * V3).cwiseProduct((1.0 - t.d2[s].array().square()).matrix());
            gmat("dec2.W") += dd2.transpose() * t.d1[s];
            gvec("dec2.b") += dd2.colwise().sum().transpose();
            MatrixXd dd1 = (dd2 * V2).cwiseProduct((1.0 - t.d1[s].array().square()).matrix());
            gmat("dec1.W") += dd1.transpose() * t.proj[s];
            gvec("dec1.b") += dd1.colwise().sum().transpose();
            MatrixXd dproj = dd1 * V1;

            // projection
            gmat("proj.W") += dproj.transpose() * t.hidden[s];
            gvec("proj.b") += dproj.colwise().sum().transpose();
            d_hidden += dproj * Wp;

            // LSTM cell
            const MatrixXd& i = t.gate_i[s];
            const MatrixXd& f = t.gate_f[s];
            const MatrixXd& g = t.gate_g[s];
            const MatrixXd& o = t.gate_o[s];
            const MatrixXd& tc = t.tanh_cell[s];
            d_cell += d_hidden.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
            const MatrixXd c_prev = step > 0 ? t.cell[s - 1] : MatrixXd::Zero(t.batch, h);

            MatrixXd d_pre(t.batch, 4 * h);
            d_pre.leftCols(h) = d_cell.cwiseProduct(g).cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
            d_pre.middleCols(h, h) =
                d_cell.cwiseProduct(c_prev).cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
            d_pre.middleCols(2 * h, h) = d_cell.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
            d_pre.rightCols(h) = d_hidden.cwiseProduct(tc).cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());

            const MatrixXd h_prev = step > 0 ? t.hidden[s - 1] : MatrixXd::Zero(t.batch, h);
            gmat("lstm.Wx") += d_pre.transpose() * t.lat[s];
            gmat("lstm.Wh") += d_pre.transpose() * h_prev;
            gvec("lstm.b") += d_pre.colwise().sum().transpose();
            d_lat[s] = d_pre * Wx;
            d_hidden = d_pre * Wh;
            d_cell = d_cell.cwiseProduct(f);
        }

        // encoder (steps independent once d_lat is known)
        for (long step = 0; step < t.m; ++step) {
            const auto s = static_cast<std::size_t>(step);
            gmat("enc3.W") += d_lat[s].transpose() * t.e2[s];
            gvec("enc3.b") += d_lat[s].colwise().sum().transpose();
            MatrixXd de2 = (d_lat[s] * W3).cwiseProduct((1.0 - t.e2[s].array().square()).matrix());
            gmat("enc2.W") += de2.transpose() * t.e1[s];
            gvec("enc2.b") += de2.colwise().sum().transpose();
            MatrixXd de1 = (de2 * W2).cwiseProduct((1.0 - t.e1[s].array().square()).matrix());
            gmat("enc1.W") += de1.transpose() * t.x[s];
            gvec("enc1.b") += de1.colwise().sum().transpose();
        }
        return grad;
    }

private:
    const ParamSegment& segment(const std::string& name) const {
        for (const ParamSegment& s : layout_)
            if (s.name == name) return s;
        throw std::invalid_argument("model: unknown parameter segment " + name);
    }

    NetConfig cfg_;
    std::uint64_t init_seed_;
    std::vector<ParamSegment> layout_;
    VectorXd params_;
};

/// Single-window forward pass (the batched path with batch size 1).
inline std::pair<MatrixXd, ForwardTape> forward(const AutoSdeModel& model, const MatrixXd& window) {
    ForwardTape tape = model.forward_batch({&window});
    MatrixXd out(tape.m, model.config().data_dim);
    for (long s = 0; s < tape.m; ++s) out.row(s) = tape.out[static_cast<std::size_t>(s)].row(0);
    return {out, std::move(tape)};
}

/// Windowed loss of the shifted-output scheme. For an m-row window and shift
/// l, output rows 0..m-l correspond to the observed rows l-1..m-1 (the
/// overlap) and output rows m-l+1..m-1 to the SDE-extended rows:
///   loss = 1/((m-l+1) D) sum |out - overlap|^2 + 1/((l-1) D) sum |out - sde|^2
struct BatchLossResult {
    double loss = 0.0;
    double loss_overlap = 0.0;
    double loss_sde = 0.0;
    VectorXd grad;
};

inline BatchLossResult loss_and_grad_batch(const AutoSdeModel& model, const std::vector<const MatrixXd*>& windows,
                                           const std::vector<const MatrixXd*>& overlap_targets,
                                           const std::vector<const MatrixXd*>& sde_targets, int l) {
    const long batch = static_cast<long>(windows.size());
    require(batch >= 1, "loss: empty batch");
    const long m = windows.front()->rows();
    const int D = model.config().data_dim;
    require(l > 1 && l <= m, "loss: require 1 < l <= m");
    require(overlap_targets.size() == windows.size() && sde_targets.size() == windows.size(),
            "loss: target count mismatch");
    for (long b = 0; b < batch; ++b) {
        require(overlap_targets[static_cast<std::size_t>(b)]->rows() == m - l + 1 &&
                    overlap_targets[static_cast<std::size_t>(b)]->cols() == D,
                "loss: overlap target shape mismatch");
        require(sde_targets[static_cast<std::size_t>(b)]->rows() == l - 1 &&
                    sde_targets[static_cast<std::size_t>(b)]->cols() == D,
                "loss: sde target shape mismatch");
    }

    ForwardTape tape = model.forward_batch(windows);
    const double w_overlap = 1.0 / ((m - l + 1) * D);
    const double w_sde = 1.0 / ((l - 1) * D);

    BatchLossResult r;
    std::vector<MatrixXd> d_out(static_cast<std::size_t>(m), MatrixXd::Zero(batch, D));
    for (long step = 0; step < m; ++step) {
        const auto s = static_cast<std::size_t>(step);
        for (long b = 0; b < batch; ++b) {
            const auto bi = static_cast<std::size_t>(b);
            Eigen::RowVectorXd diff;
            double weight;
            if (step <= m - l) {
                diff = tape.out[s].row(b) - overlap_targets[bi]->row(step);
                weight = w_overlap;
                r.loss_overlap += weight * diff.squaredNorm() / batch;
            } else {
                diff = tape.out[s].row(b) - sde_targets[bi]->row(step - (m - l + 1));
                weight = w_sde;
                r.loss_sde += weight * diff.squaredNorm() / batch;
            }
            d_out[s].row(b) = (2.0 * weight / batch) * diff;
        }
    }
    r.loss = r.loss_overlap + r.loss_sde;
    r.grad = model.backward_batch(tape, d_out);
    return r;
}

/// Single-window loss and exact gradient.
inline std::pair<double, VectorXd> loss_and_grad(const AutoSdeModel& model, const MatrixXd& window,
                                                 const MatrixXd& target_overlap, const MatrixXd& target_sde, int l) {
    BatchLossResult r = loss_and_grad_batch(model, {&window}, {&target_overlap}, {&target_sde}, l);
    return {r.loss, std::move(r.grad)};
}

/// ADAM optimizer state (first/second moments plus step counter).
struct AdamState {
    explicit AdamState(long n_params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8)
        : m(VectorXd::Zero(n_params)), v(VectorXd::Zero(n_params)), lr(lr), beta1(beta1), beta2(beta2), eps(eps) {}

    VectorXd m;
    VectorXd v;
    long step = 0;
    double lr;
    double beta1;
    double beta2;
    double eps;
};

/// Standard bias-corrected ADAM update, in place.
inline void adam_step(VectorXd& params, const VectorXd& grad, AdamState& state) {
    require(params.size() == grad.size() && params.size() == state.m.size(), "adam: size mismatch");
    state.step += 1;
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    params.array() -=
        state.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + state.eps);
}

/// Central-difference verification of loss_and_grad over a random subset of
/// at most 64 parameters; returns the max relative error. The denominator is
/// floored at 1e-4 so that roundoff noise of the difference quotient itself
/// (about machine_eps * loss / h in absolute terms) is not misread as
/// gradient error on near-zero components.
inline double gradient_check(AutoSdeModel& model, const MatrixXd& window, const MatrixXd& target_overlap,
                             const MatrixXd& target_sde, int l, double h, std::uint64_t seed = 1) {
    require(h > 0.0, "gradient_check: h must be positive");
    const auto [loss0, grad] = loss_and_grad(model, window, target_overlap, target_sde, l);
    (void)loss0;

    RngStream stream(seed);
    const long n = model.n_params();
    const long n_checked = std::min<long>(64, n);
    double max_rel = 0.0;
    for (long c = 0; c < n_checked; ++c) {
        const long idx = static_cast<long>(stream.next_u64() % static_cast<std::uint64_t>(n));
        const double saved = model.params()[idx];
        model.params()[idx] = saved + h;
        const double lp = loss_and_grad(model, window, target_overlap, target_sde, l).first;
        model.params()[idx] = saved - h;
        const double lm = loss_and_grad(model, window, target_overlap, target_sde, l).first;
        model.params()[idx] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double rel = std::abs(fd - grad[idx]) / std::max({std::abs(fd), std::abs(grad[idx]), 1e-4});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace autosde
