// SPDX-License-Identifier: Apache-2.0
//
// rfgs: Gaussian radiation-field modelling and RIS/fluid-antenna optimization
// ------------------------------------------------------------------------
//
// Scenario representation network: per-point transmittance amplitude mu(q)
// and phase offset delta(q, p_tx), trained end to end through the splatting
// renderer.

#pragma once

#include "rfgs/core.hpp"
#include "rfgs/field.hpp"
#include "rfgs/metrics.hpp"
#include "rfgs/primitive.hpp"
#include "rfgs/scene.hpp"
#include "rfgs/splatting.hpp"

#include <cstring>
#include <fstream>
#include <functional>
#include <vector>

namespace rfgs {

struct SrnArchitecture {
    int hidden_layers = 2;
    int width = 64;
    int feature_dim = 16;
    double slope = 0.01;           // LeakyReLU negative slope
    double position_scale = 0.2;   // inputs are multiplied by this before the first layer

    bool operator==(const SrnArchitecture&) const = default;
};

struct DenseLayer {
    int in = 0;
    int out = 0;
    std::size_t w_offset = 0;  // out x in, row-major
    std::size_t b_offset = 0;
};

/// Two-head perceptron. The geometry head maps q to (feature, mu logit); the
/// fusion head maps (feature, p_tx) to a 2-vector whose angle is delta.
/// All weights live in one flat vector.
class SrnModel {
public:
    SrnArchitecture arch;
    std::vector<DenseLayer> geometry;
    std::vector<DenseLayer> fusion;
    Eigen::VectorXd params;

    SrnModel() : SrnModel(SrnArchitecture{}) {}
    explicit SrnModel(const SrnArchitecture& a) : arch(a) {
        if (a.hidden_layers < 1 || a.width < 1 || a.feature_dim < 0)
            throw ArgumentError("SrnModel: invalid architecture");
        std::size_t off = 0;
        auto build = [&](std::vector<DenseLayer>& head, int in, int out) {
            int prev = in;
            for (int l = 0; l < a.hidden_layers; ++l) {
                head.push_back(make_layer(prev, a.width, off));
                prev = a.width;
            }
            head.push_back(make_layer(prev, out, off));
        };
        build(geometry, 3, a.feature_dim + 1);
        build(fusion, a.feature_dim + 3, 2);
        params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(off));
    }

    std::size_t parameter_count() const { return static_cast<std::size_t>(params.size()); }

    /// Uniform Glorot initialisation of weights; biases zero.
    void init_random(std::uint64_t seed) {
        Rng rng(seed);
        params.setZero();
        for (auto* head : {&geometry, &fusion})
            for (const auto& l : *head) {
                const double s = std::sqrt(6.0 / (l.in + l.out));
                for (int k = 0; k < l.in * l.out; ++k) params[static_cast<Eigen::Index>(l.w_offset) + k] = rng.uniform(-s, s);
            }
    }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weight(const DenseLayer& l) const {
        return {params.data() + l.w_offset, l.out, l.in};
    }
    Eigen::Map<const Eigen::VectorXd> bias(const DenseLayer& l) const { return {params.data() + l.b_offset, l.out}; }

private:
    static DenseLayer make_layer(int in, int out, std::size_t& off) {
        DenseLayer l{in, out, off, off + static_cast<std::size_t>(in) * out};
        off = l.b_offset + static_cast<std::size_t>(out);
        return l;
    }
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline cplx complex_coeff(double mu, double delta) {
    if (!(mu >= 0.0)) throw ArgumentError("complex_coeff: mu must be non-negative");
    return {mu * std::cos(delta), mu * std::sin(delta)};
}

namespace detail {

using Mat = Eigen::MatrixXd;

/// Inputs and pre-activations of every layer of one head, columns = points.
struct HeadCache {
    std::vector<Mat> inputs;
    std::vector<Mat> pre;
};

inline Mat run_head(const SrnModel& m, const std::vector<DenseLayer>& head, Mat x, HeadCache* cache) {
    for (std::size_t l = 0; l < head.size(); ++l) {
        Mat z = m.weight(head[l]) * x;
        z.colwise() += m.bias(head[l]);
        if (cache) {
            cache->inputs.push_back(std::move(x));
            cache->pre.push_back(z);
        }
        if (l + 1 < head.size()) z = z.unaryExpr([s = m.arch.slope](double v) { return v > 0.0 ? v : s * v; });
        x = std::move(z);
    }
    return x;
}

/// Accumulates parameter gradients into `grad` and returns dL/dinput.
inline Mat back_head(const SrnModel& m, const std::vector<DenseLayer>& head, const HeadCache& cache, Mat d_out,
                     Eigen::VectorXd& grad) {
    for (std::size_t li = head.size(); li-- > 0;) {
        const DenseLayer& l = head[li];
        if (li + 1 < head.size()) {
            const Mat& z = cache.pre[li];
            d_out = d_out.cwiseProduct(z.unaryExpr([s = m.arch.slope](double v) { return v > 0.0 ? 1.0 : s; }));
        }
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> gw(grad.data() + l.w_offset,
                                                                                              l.out, l.in);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.b_offset, l.out);
        gw.noalias() += d_out * cache.inputs[li].transpose();
        gb += d_out.rowwise().sum();
        d_out = m.weight(l).transpose() * d_out;
    }
    return d_out;
}

}  // namespace detail

/// mu, delta for a batch of points sharing one transmitter position.
struct SrnBatch {
    Eigen::VectorXd mu;
    Eigen::VectorXd delta;
    Eigen::VectorXd logit;
    Eigen::MatrixXd fusion_out;  // 2 x n
    detail::HeadCache geo_cache;
    detail::HeadCache fus_cache;
};

inline SrnBatch srn_forward_batch(const SrnModel& m, const std::vector<Vec3>& points, const Vec3& tx, bool keep_cache) {
    const auto n = static_cast<Eigen::Index>(points.size());
    const double sc = m.arch.position_scale;
    const int f = m.arch.feature_dim;
    detail::Mat x(3, n);
    for (Eigen::Index i = 0; i < n; ++i) x.col(i) = sc * points[static_cast<std::size_t>(i)];
    SrnBatch b;
    detail::Mat g = detail::run_head(m, m.geometry, std::move(x), keep_cache ? &b.geo_cache : nullptr);
    detail::Mat fin(f + 3, n);
    fin.topRows(f) = g.topRows(f);
    for (Eigen::Index i = 0; i < n; ++i) fin.col(i).tail<3>() = sc * tx;
    b.fusion_out = detail::run_head(m, m.fusion, std::move(fin), keep_cache ? &b.fus_cache : nullptr);
    b.logit = g.row(f).transpose();
    b.mu = b.logit.unaryExpr([](double z) { return sigmoid(z); });
    b.delta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) b.delta[i] = wrap_phase(std::atan2(b.fusion_out(1, i), b.fusion_out(0, i)));
    return b;
}

struct SrnOutput {
    double mu;
    double delta;
};

inline SrnOutput srn_forward(const SrnModel& m, const Vec3& q, const Vec3& tx) {
    const SrnBatch b = srn_forward_batch(m, {q}, tx, false);
    return {b.mu[0], b.delta[0]};
}

/// Back-propagates dL/dmu and dL/ddelta of a forward batch into `grad`.
inline void srn_backward_batch(const SrnModel& m, const SrnBatch& b, const Eigen::VectorXd& d_mu,
                               const Eigen::VectorXd& d_delta, Eigen::VectorXd& grad) {
    const Eigen::Index n = b.mu.size();
    const int f = m.arch.feature_dim;
    detail::Mat d_fus(2, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double y0 = b.fusion_out(0, i), y1 = b.fusion_out(1, i);
        const double r2 = y0 * y0 + y1 * y1;
        d_fus(0, i) = r2 > 0.0 ? -d_delta[i] * y1 / r2 : 0.0;
        d_fus(1, i) = r2 > 0.0 ? d_delta[i] * y0 / r2 : 0.0;
    }
    const detail::Mat d_fin = detail::back_head(m, m.fusion, b.fus_cache, std::move(d_fus), grad);
    detail::Mat d_geo(f + 1, n);
    d_geo.topRows(f) = d_fin.topRows(f);
    for (Eigen::Index i = 0; i < n; ++i) d_geo(f, i) = d_mu[i] * b.mu[i] * (1.0 - b.mu[i]);
    detail::back_head(m, m.geometry, b.geo_cache, std::move(d_geo), grad);
}

// ---- rendering through the network ------------------------------------------------

/// Geometry shared by every sample of a scene: primitive centres, their base
/// complex amplitudes, and the splat plan.
struct SrnProblem {
    std::vector<Vec3> points;
    std::vector<cplx> base;
    SplatPlan plan;
    Pose rx;
};

inline SrnProblem make_srn_problem(const std::vector<GaussianPrimitive>& prims, const Pose& rx, const AngularGrid& grid,
                                   int threads = 1) {
    SrnProblem p;
    p.rx = rx;
    for (const auto& g : prims) {
        p.points.push_back(g.center);
        p.base.push_back(std::polar(g.amplitude, g.phase));
    }
    p.plan = make_splat_plan(prims, rx, grid, threads);
    return p;
}

/// Each primitive's amplitude is scaled by C = mu e^{j delta} and the same C
/// acts as its transmittance for primitives behind it.
inline Eigen::MatrixXcd render_with_coeffs(const SrnProblem& p, const std::vector<cplx>& c) {
    std::vector<cplx> contrib(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) contrib[i] = p.base[i] * c[i];
    return apply_splat_plan(p.plan, contrib, c);
}

inline std::vector<cplx> batch_coeffs(const SrnBatch& b) {
    std::vector<cplx> c(static_cast<std::size_t>(b.mu.size()));
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = complex_coeff(b.mu[static_cast<Eigen::Index>(i)], b.delta[static_cast<Eigen::Index>(i)]);
    return c;
}

inline AngularSpectrum render_srn(const SrnModel& m, const SrnProblem& p, const Vec3& tx) {
    const SrnBatch b = srn_forward_batch(m, p.points, tx, false);
    return spectrum_from_field(p.plan.grid, render_with_coeffs(p, batch_coeffs(b)));
}

/// (1 - eta) sum (gt - pred)^2 + eta (1 - ssim(gt, pred)) over power grids.
/// `d_pred`, when given, receives dL/dpred.
inline double spectrum_loss(const Grid& gt, const Grid& pred, double eta, const SsimConfig& cfg, Grid* d_pred = nullptr) {
    if (gt.rows() != pred.rows() || gt.cols() != pred.cols()) throw ArgumentError("loss: grid mismatch");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ArgumentError("loss: eta must lie in [0, 1]");
    const Grid diff = gt - pred;
    Grid g_ssim;
    const double s = ssim(gt, pred, cfg, d_pred ? &g_ssim : nullptr);
    if (d_pred) *d_pred = -2.0 * (1.0 - eta) * diff - eta * g_ssim;
    return (1.0 - eta) * diff.squaredNorm() + eta * (1.0 - s);
}

inline double spectrum_loss(const Grid& gt, const Grid& pred, double eta) {
    return spectrum_loss(gt, pred, eta, ssim_config_for(gt));
}

/// Loss of one sample and, when `grad` is given, its exact gradient with
/// respect to every model parameter (accumulated into `grad`).
inline double srn_sample_loss(const SrnModel& m, const SrnProblem& p, const SpectrumSample& sample, double eta,
                              Eigen::VectorXd* grad, int ssim_window = 0) {
    const AngularGrid& grid = p.plan.grid;
    if (sample.power.rows() != grid.n_lat || sample.power.cols() != grid.n_lon)
        throw ArgumentError("sample grid does not match the model grid");
    const SrnBatch b = srn_forward_batch(m, p.points, sample.tx_position, grad != nullptr);
    const std::vector<cplx> c = batch_coeffs(b);
    const Eigen::MatrixXcd r = render_with_coeffs(p, c);
    const Grid pred = r.cwiseAbs2();
    const SsimConfig cfg = ssim_config_for(sample.power, ssim_window);
    if (!grad) return spectrum_loss(sample.power, pred, eta, cfg);

    Grid d_pred;
    const double loss = spectrum_loss(sample.power, pred, eta, cfg, &d_pred);
    // G_c accumulates dL/dRe(c) + j dL/dIm(c); for holomorphic R(c),
    // G_c += G_R conj(dR/dc) with G_R = 2 (dL/dP) R.
    std::vector<cplx> g_c(c.size(), cplx(0.0));
    std::vector<cplx> tpre, suffix;
    for (std::size_t bin = 0; bin < p.plan.bins.size(); ++bin) {
        const auto& list = p.plan.bins[bin];
        if (list.empty()) continue;
        const auto row = static_cast<Eigen::Index>(bin / grid.n_lon), col = static_cast<Eigen::Index>(bin % grid.n_lon);
        const cplx g_r = 2.0 * d_pred(row, col) * r(row, col);
        if (g_r == cplx(0.0)) continue;
        const std::size_t k = list.size();
        tpre.assign(k, cplx(1.0));
        for (std::size_t i = 1; i < k; ++i) tpre[i] = tpre[i - 1] * c[list[i - 1].index];
        // suffix[i] = s_i + c_{i+1} suffix[i+1], s_i = base_i w_i
        suffix.assign(k, cplx(0.0));
        for (std::size_t i = k; i-- > 0;) {
            const cplx s = p.base[list[i].index] * list[i].weight;
            suffix[i] = s + (i + 1 < k ? c[list[i + 1].index] * suffix[i + 1] : cplx(0.0));
        }
        for (std::size_t i = 0; i < k; ++i) g_c[list[i].index] += g_r * std::conj(tpre[i] * suffix[i]);
    }
    const Eigen::Index n = static_cast<Eigen::Index>(c.size());
    Eigen::VectorXd d_mu(n), d_delta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const cplx e = std::polar(1.0, b.delta[i]);
        const cplx g = g_c[static_cast<std::size_t>(i)];
        d_mu[i] = (std::conj(g) * e).real();
        d_delta[i] = b.mu[i] * (g * std::conj(e)).imag();
    }
    srn_backward_batch(m, b, d_mu, d_delta, *grad);
    return loss;
}

// ---- training -----------------------------------------------------------------------

struct TrainConfig {
    double learning_rate = 5e-4;
    double decay = 0.95;
    int decay_every = 20;
    int epochs = 300;
    int batch_size = 4;
    double eta = 0.2;
    std::uint64_t seed = 0;
    int threads = 1;
    int ssim_window = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline double learning_rate_at(const TrainConfig& cfg, int epoch) {
    return cfg.learning_rate * std::pow(cfg.decay, epoch / cfg.decay_every);
}

struct EpochRecord {
    int epoch;
    double mean_loss;
    double learning_rate;
};

/// Adam over shuffled mini-batches; the batch gradient is the mean of the
/// per-sample gradients, reduced in sample order. Returns per-epoch mean
/// training loss (losses measured before each batch's update).
inline std::vector<EpochRecord> train_srn(SrnModel& m, const SrnProblem& p, const SpectrumDataset& ds,
                                          const TrainConfig& cfg,
                                          const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (ds.train.empty()) throw ArgumentError("train: empty training split");
    if (!(cfg.learning_rate > 0.0) || cfg.batch_size < 1 || cfg.decay_every < 1 || cfg.epochs < 0)
        throw ArgumentError("train: invalid configuration");
    if (!(cfg.eta >= 0.0 && cfg.eta <= 1.0)) throw ArgumentError("train: eta must lie in [0, 1]");
    Rng rng(cfg.seed);
    const Eigen::Index np = m.params.size();
    Eigen::VectorXd mom = Eigen::VectorXd::Zero(np), vel = Eigen::VectorXd::Zero(np);
    std::vector<std::size_t> order = ds.train;
    std::vector<EpochRecord> history;
    long long step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        const double lr = learning_rate_at(cfg, epoch);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t nb = end - start;
            std::vector<Eigen::VectorXd> grads(nb, Eigen::VectorXd::Zero(np));
            std::vector<double> losses(nb);
            parallel_chunks(nb, cfg.threads, [&](std::size_t b0, std::size_t b1) {
                for (std::size_t i = b0; i < b1; ++i)
                    losses[i] = srn_sample_loss(m, p, ds.samples[order[start + i]], cfg.eta, &grads[i], cfg.ssim_window);
            });
            Eigen::VectorXd g = Eigen::VectorXd::Zero(np);
            for (std::size_t i = 0; i < nb; ++i) {
                g += grads[i];
                loss_sum += losses[i];
            }
            g /= static_cast<double>(nb);
            ++step;
            mom = cfg.beta1 * mom + (1.0 - cfg.beta1) * g;
            vel = cfg.beta2 * vel + (1.0 - cfg.beta2) * g.cwiseAbs2();
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            m.params.array() -= lr * (mom.array() / c1) / ((vel.array() / c2).sqrt() + cfg.epsilon);
        }
        history.push_back({epoch, loss_sum / static_cast<double>(order.size()), lr});
        if (on_epoch) on_epoch(history.back());
    }
    if (!m.params.allFinite()) throw NumericError("train: weights became non-finite");
    return history;
}

inline void write_loss_csv(const std::string& path, const std::vector<EpochRecord>& h) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,mean_loss,learning_rate\n";
    for (const auto& r : h) f << r.epoch << ',' << format_double(r.mean_loss) << ',' << format_double(r.learning_rate) << '\n';
}

// ---- checkpoints --------------------------------------------------------------------
//
// "RFGSSRN1", u32 version, u32 hidden layers, u32 width, u32 feature dim,
// f64 slope, f64 position scale, u32 n_lat, u32 n_lon, u32 layer count,
// (u32 in, u32 out) per layer, then every layer's row-major weights and
// bias as little-endian f64, geometry head first.

inline constexpr char srn_magic[8] = {'R', 'F', 'G', 'S', 'S', 'R', 'N', '1'};
inline constexpr std::uint32_t srn_version = 1;

namespace detail {

inline void put_u32(std::ostream& f, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& f, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
    f.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& f) {
    unsigned char b[4];
    if (!f.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline double get_f64(std::istream& f) {
    unsigned char b[8];
    if (!f.read(reinterpret_cast<char*>(b), 8)) throw FormatError("checkpoint truncated");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= std::uint64_t(b[k]) << (8 * k);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

struct SrnCheckpoint {
    SrnModel model;
    AngularGrid grid;
};

inline void save_srn_checkpoint(const std::string& path, const SrnModel& m, const AngularGrid& grid) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f.write(srn_magic, 8);
    detail::put_u32(f, srn_version);
    detail::put_u32(f, static_cast<std::uint32_t>(m.arch.hidden_layers));
    detail::put_u32(f, static_cast<std::uint32_t>(m.arch.width));
    detail::put_u32(f, static_cast<std::uint32_t>(m.arch.feature_dim));
    detail::put_f64(f, m.arch.slope);
    detail::put_f64(f, m.arch.position_scale);
    detail::put_u32(f, static_cast<std::uint32_t>(grid.n_lat));
    detail::put_u32(f, static_cast<std::uint32_t>(grid.n_lon));
    detail::put_u32(f, static_cast<std::uint32_t>(m.geometry.size() + m.fusion.size()));
    for (auto* head : {&m.geometry, &m.fusion})
        for (const auto& l : *head) {
            detail::put_u32(f, static_cast<std::uint32_t>(l.in));
            detail::put_u32(f, static_cast<std::uint32_t>(l.out));
        }
    for (Eigen::Index i = 0; i < m.params.size(); ++i) detail::put_f64(f, m.params[i]);
}

inline SrnCheckpoint load_srn_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    char magic[8];
    if (!f.read(magic, 8) || std::memcmp(magic, srn_magic, 8) != 0) throw FormatError(path + ": not an SRN checkpoint");
    if (detail::get_u32(f) != srn_version) throw FormatError(path + ": unsupported checkpoint version");
    SrnArchitecture a;
    a.hidden_layers = static_cast<int>(detail::get_u32(f));
    a.width = static_cast<int>(detail::get_u32(f));
    a.feature_dim = static_cast<int>(detail::get_u32(f));
    a.slope = detail::get_f64(f);
    a.position_scale = detail::get_f64(f);
    const int n_lat = static_cast<int>(detail::get_u32(f));
    const int n_lon = static_cast<int>(detail::get_u32(f));
    if (a.hidden_layers < 1 || a.hidden_layers > 64 || a.width < 1 || a.width > 65536 || a.feature_dim > 65536)
        throw FormatError(path + ": implausible architecture");
    SrnCheckpoint ck{SrnModel(a), AngularGrid(n_lat, n_lon)};
    const std::uint32_t layers = detail::get_u32(f);
    if (layers != ck.model.geometry.size() + ck.model.fusion.size()) throw FormatError(path + ": layer count mismatch");
    for (auto* head : {&ck.model.geometry, &ck.model.fusion})
        for (const auto& l : *head) {
            const auto in = detail::get_u32(f), out = detail::get_u32(f);
            if (in != static_cast<std::uint32_t>(l.in) || out != static_cast<std::uint32_t>(l.out))
                throw FormatError(path + ": layer size mismatch");
        }
    for (Eigen::Index i = 0; i < ck.model.params.size(); ++i) ck.model.params[i] = detail::get_f64(f);
    if (f.peek() != std::char_traits<char>::eof()) throw FormatError(path + ": trailing bytes");
    if (!ck.model.params.allFinite()) throw FormatError(path + ": non-finite weights");
    return ck;
}

// ---- synthetic spectra from virtual emitters ---------------------------------------

struct EmitterDatasetSpec {
    int samples = 32;
    int n_lat = 16;
    int n_lon = 16;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    double emitter_spread = 0.6;  // angular kernel: isotropic Gaussian of this std (m) around each emitter
    double tx_extent = 10.0;      // transmitters uniform in a cube of this edge centred on the receiver
};

/// Ground-truth spectrum for one transmitter. Emitter l re-radiates with
/// phase theta_l - (2pi/lambda)|p_tx - q_l|; its contribution at the
/// receiver is the discrete-path term evaluated there, spread over bins by
/// the footprint of an isotropic Gaussian of std `spread` (no cutoff).
inline Eigen::MatrixXcd emitter_spectrum(const std::vector<VirtualEmitter>& emitters, const Vec3& tx, const Pose& rx,
                                         double wavelength, const AngularGrid& grid, double spread) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(grid.n_lat, grid.n_lon);
    const Mat3 prec = Mat3::Identity() / (spread * spread);
    for (const auto& e : emitters) {
        VirtualEmitter shifted = e;
        shifted.phase = e.phase - two_pi / wavelength * (tx - e.position).norm();
        const cplx c = virtual_emitter_field({shifted}, rx.origin, wavelength);
        const Vec3 rel = e.position - rx.origin;
        for (int j = 0; j < grid.n_lat; ++j)
            for (int i = 0; i < grid.n_lon; ++i) {
                const Vec3 d = rx.axes.transpose() * grid.local_direction(j, i);
                out(j, i) += c * std::exp(-0.5 * ray_mahalanobis_sq(rel, prec, d));
            }
    }
    return out;
}

inline SpectrumDataset make_emitter_dataset(const SyntheticScene& syn, const EmitterDatasetSpec& spec) {
    if (spec.samples < 1) throw ArgumentError("make_emitter_dataset: need at least one sample");
    const AngularGrid grid(spec.n_lat, spec.n_lon);
    SpectrumDataset ds;
    ds.n_lat = spec.n_lat;
    ds.n_lon = spec.n_lon;
    ds.train_fraction = spec.train_fraction;
    ds.shuffle_seed = spec.seed;
    Rng rng(spec.seed ^ 0x5DEECE66DULL);
    const double h = 0.5 * spec.tx_extent;
    for (int k = 0; k < spec.samples; ++k) {
        SpectrumSample s;
        s.tx_position = Vec3(rng.uniform(-h, h), rng.uniform(-h, h), rng.uniform(-h, h));
        s.power = emitter_spectrum(syn.emitters, s.tx_position, syn.scene.rx_pose, syn.scene.wavelength, grid,
                                   spec.emitter_spread)
                      .cwiseAbs2();
        ds.samples.push_back(std::move(s));
    }
    compute_split(ds);
    return ds;
}

}  // namespace rfgs
