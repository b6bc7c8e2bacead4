#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gridstorm/error.hpp"
#include "gridstorm/numerics/rng.hpp"

namespace gridstorm {

enum class OutputActivation : std::uint32_t { identity = 0, tanh = 1 };

/// Fully connected network with ReLU hidden layers and analytic
/// backpropagation. Parameters live in one flat vector, layer by layer:
/// W (out x in, row-major) followed by b (out).
class Mlp {
public:
    Mlp() = default;

    Mlp(std::vector<std::size_t> sizes, OutputActivation out) : sizes_(std::move(sizes)), out_(out) {
        if (sizes_.size() < 2) throw InvalidArgument("Mlp: need at least input and output sizes");
        for (std::size_t s : sizes_)
            if (s == 0) throw InvalidArgument("Mlp: layer sizes must be >= 1");
        std::size_t total = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            offsets_.push_back(total);
            total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
        }
        params_.assign(total, 0.0);
    }

    /// Uniform +-1/sqrt(fan_in) for hidden layers, +-final_scale for the last.
    void init_uniform(RngStream& rng, double final_scale = 3e-3) {
        for (std::size_t l = 0; l < layers(); ++l) {
            const bool last = l + 1 == layers();
            const double bound = last ? final_scale : 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
            const std::size_t count = sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
            for (std::size_t p = 0; p < count; ++p) params_[offsets_[l] + p] = rng.uniform(-bound, bound);
        }
    }

    /// Adds `v` to every bias of the output layer.
    void shift_output_bias(double v) {
        const std::size_t l = layers() - 1;
        double* b = params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l];
        for (std::size_t o = 0; o < sizes_[l + 1]; ++o) b[o] += v;
    }

    [[nodiscard]] std::size_t layers() const noexcept { return sizes_.size() - 1; }
    [[nodiscard]] const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    [[nodiscard]] std::size_t input_size() const noexcept { return sizes_.front(); }
    [[nodiscard]] std::size_t output_size() const noexcept { return sizes_.back(); }
    [[nodiscard]] OutputActivation output_activation() const noexcept { return out_; }
    [[nodiscard]] std::vector<double>& params() noexcept { return params_; }
    [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }

    /// Activations of every layer from one forward pass.
    struct Tape {
        std::vector<std::vector<double>> act;  ///< act[0] = input, act[L] = output
        std::vector<std::vector<double>> pre;  ///< pre-activation of layers 1..L
    };

    std::vector<double> forward(std::span<const double> x) const {
        Tape t;
        forward(x, t);
        return t.act.back();
    }

    void forward(std::span<const double> x, Tape& t) const {
        if (x.size() != input_size()) throw InvalidArgument("Mlp::forward: input size mismatch");
        t.act.resize(layers() + 1);
        t.pre.resize(layers());
        t.act[0].assign(x.begin(), x.end());
        for (std::size_t l = 0; l < layers(); ++l) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            const double* w = params_.data() + offsets_[l];
            const double* b = w + out * in;
            auto& z = t.pre[l];
            auto& a = t.act[l + 1];
            z.assign(out, 0.0);
            a.assign(out, 0.0);
            const auto& prev = t.act[l];
            for (std::size_t o = 0; o < out; ++o) {
                double s = b[o];
                const double* row = w + o * in;
                for (std::size_t i = 0; i < in; ++i) s += row[i] * prev[i];
                z[o] = s;
                if (l + 1 < layers()) a[o] = s > 0 ? s : 0.0;
                else a[o] = out_ == OutputActivation::tanh ? std::tanh(s) : s;
            }
        }
    }

    /// Accumulates dLoss/dparams into `grad` (same layout as params) given
    /// dLoss/doutput, and returns dLoss/dinput.
    std::vector<double> backward(const Tape& t, std::span<const double> grad_out, std::span<double> grad) const {
        if (grad.size() != params_.size()) throw InvalidArgument("Mlp::backward: gradient size mismatch");
        std::vector<double> delta(grad_out.begin(), grad_out.end());
        for (std::size_t l = layers(); l-- > 0;) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            for (std::size_t o = 0; o < out; ++o) {
                if (l + 1 == layers()) {
                    if (out_ == OutputActivation::tanh) delta[o] *= 1.0 - t.act[l + 1][o] * t.act[l + 1][o];
                } else if (t.pre[l][o] <= 0) {
                    delta[o] = 0.0;
                }
            }
            const double* w = params_.data() + offsets_[l];
            double* gw = grad.data() + offsets_[l];
            double* gb = gw + out * in;
            const auto& prev = t.act[l];
            std::vector<double> next(in, 0.0);
            for (std::size_t o = 0; o < out; ++o) {
                const double d = delta[o];
                if (d == 0.0) continue;
                gb[o] += d;
                const double* row = w + o * in;
                double* grow = gw + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    grow[i] += d * prev[i];
                    next[i] += d * row[i];
                }
            }
            delta = std::move(next);
        }
        return delta;
    }

    /// target <- tau * this + (1 - tau) * target.
    void soft_update_into(Mlp& target, double tau) const {
        if (target.params_.size() != params_.size()) throw InvalidArgument("Mlp: soft update shape mismatch");
        if (tau == 1.0) {
            target.params_ = params_;
            return;
        }
        for (std::size_t p = 0; p < params_.size(); ++p)
            target.params_[p] = tau * params_[p] + (1.0 - tau) * target.params_[p];
    }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Mlp&, const Mlp&) = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<double> params_;
    OutputActivation out_ = OutputActivation::identity;
};

/// Adam over a flat parameter vector.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(n, 0.0), v_(n, 0.0), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    /// Descends along `grad`.
    void step(std::vector<double>& params, std::span<const double> grad) {
        if (grad.size() != m_.size() || params.size() != m_.size())
            throw InvalidArgument("Adam::step: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < m_.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1.0 - b1_) * grad[i];
            v_[i] = b2_ * v_[i] + (1.0 - b2_) * grad[i] * grad[i];
            params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
        }
    }

private:
    std::vector<double> m_, v_;
    double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
    std::uint64_t t_ = 0;
};

// Weights file: "GSRL", u32 version, u32 output activation, u32 layer-size
// count, u32 sizes..., then the flat parameters as little-endian f64.
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("weights: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
}  // namespace detail

inline void write_weights(std::ostream& out, const Mlp& net) {
    out.write("GSRL", 4);
    detail::put_u32(out, kWeightsVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(net.output_activation()));
    detail::put_u32(out, static_cast<std::uint32_t>(net.sizes().size()));
    for (std::size_t s : net.sizes()) detail::put_u32(out, static_cast<std::uint32_t>(s));
    for (double v : net.params()) {
        std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline Mlp read_weights(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "GSRL", 4) != 0) throw ConfigError("weights: bad magic");
    const std::uint32_t version = detail::get_u32(in);
    if (version != kWeightsVersion) throw ConfigError("weights: unsupported version " + std::to_string(version));
    const std::uint32_t act = detail::get_u32(in);
    if (act > 1) throw ConfigError("weights: unknown output activation");
    const std::uint32_t count = detail::get_u32(in);
    if (count < 2 || count > 64) throw ConfigError("weights: implausible layer count");
    std::vector<std::size_t> sizes(count);
    for (auto& s : sizes) s = detail::get_u32(in);
    Mlp net(sizes, static_cast<OutputActivation>(act));
    for (double& v : net.params()) {
        unsigned char b[8];
        if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("weights: truncated parameters");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        v = std::bit_cast<double>(bits);
    }
    if (!net.all_finite()) throw ConfigError("weights: non-finite parameter");
    return net;
}

}  // namespace gridstorm
