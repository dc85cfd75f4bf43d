#include "ndasim/svrg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include "ndasim/errors.hpp"
#include "ndasim/nda_fsm.hpp"
#include "ndasim/system.hpp"

namespace ndasim {

std::string_view to_string(SvrgVariant v) {
    switch (v) {
        case SvrgVariant::HostOnly: return "HOST_ONLY";
        case SvrgVariant::Serialized: return "SERIALIZED";
        case SvrgVariant::Delayed: return "DELAYED";
    }
    return "?";
}

SvrgVariant parse_svrg_variant(std::string_view s) {
    if (s == "HOST_ONLY" || s == "host_only") return SvrgVariant::HostOnly;
    if (s == "SERIALIZED" || s == "serialized") return SvrgVariant::Serialized;
    if (s == "DELAYED" || s == "delayed") return SvrgVariant::Delayed;
    throw ConfigError("svrg.variant", "expected HOST_ONLY, SERIALIZED or DELAYED");
}

void SvrgConfig::validate() const {
    if (samples == 0) throw ConfigError("svrg.samples", "must be positive");
    if (features == 0) throw ConfigError("svrg.features", "must be positive");
    if (classes < 2) throw ConfigError("svrg.classes", "need at least two classes");
    if (!(lambda > 0.0)) throw ConfigError("svrg.lambda", "must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("svrg.learning_rate", "must be positive");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("svrg.momentum", "must be in [0, 1)");
    if (epoch == 0) throw ConfigError("svrg.epoch", "must be at least 1");
    if (max_outer == 0) throw ConfigError("svrg.max_outer", "must be positive");
    if (!(target_gap > 0.0)) throw ConfigError("svrg.target_gap", "must be positive");
    if (!(stop_gap > 0.0)) throw ConfigError("svrg.stop_gap", "must be positive");
    if (!(divergence_bound > 0.0)) throw ConfigError("svrg.divergence_bound", "must be positive");
}

SvrgConfig SvrgConfig::from_config(const KeyValueConfig& kv) {
    SvrgConfig c;
    c.samples = static_cast<std::uint32_t>(kv.get_uint("svrg.samples", c.samples));
    c.features = static_cast<std::uint32_t>(kv.get_uint("svrg.features", c.features));
    c.classes = static_cast<std::uint32_t>(kv.get_uint("svrg.classes", c.classes));
    c.lambda = kv.get_double("svrg.lambda", c.lambda);
    c.learning_rate = kv.get_double("svrg.learning_rate", c.learning_rate);
    c.momentum = kv.get_double("svrg.momentum", c.momentum);
    c.epoch = kv.get_uint("svrg.epoch", std::max<std::uint64_t>(1, c.samples / 4));
    c.variant = parse_svrg_variant(kv.get_string("svrg.variant", std::string(to_string(c.variant))));
    c.seed = kv.get_uint("svrg.seed", c.seed);
    c.separation = kv.get_double("svrg.separation", c.separation);
    c.host_cycles_per_feature = static_cast<std::uint32_t>(kv.get_uint("svrg.host_cycles_per_feature", c.host_cycles_per_feature));
    c.max_outer = static_cast<std::uint32_t>(kv.get_uint("svrg.max_outer", c.max_outer));
    c.target_gap = kv.get_double("svrg.target_gap", c.target_gap);
    c.stop_gap = kv.get_double("svrg.stop_gap", c.stop_gap);
    c.divergence_bound = kv.get_double("svrg.divergence_bound", c.divergence_bound);
    c.validate();
    return c;
}

SvrgDataset SvrgDataset::generate(const SvrgConfig& cfg) {
    cfg.validate();
    SvrgDataset ds;
    ds.samples = cfg.samples;
    ds.features = cfg.features;
    ds.classes = cfg.classes;
    std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ull + 17);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> centers(std::size_t{cfg.classes} * cfg.features);
    for (auto& c : centers) c = normal(rng) * cfg.separation / std::sqrt(static_cast<double>(cfg.features));
    ds.a.resize(std::size_t{cfg.samples} * cfg.features);
    ds.labels.resize(cfg.samples);
    for (std::uint32_t i = 0; i < cfg.samples; ++i) {
        const auto y = static_cast<std::uint32_t>(rng() % cfg.classes);
        ds.labels[i] = y;
        for (std::uint32_t j = 0; j < cfg.features; ++j) {
            ds.a[std::size_t{i} * cfg.features + j] = centers[std::size_t{y} * cfg.features + j] + normal(rng);
        }
    }
    // Standardize each feature; scale rows to unit expected norm so one step
    // size fits every feature count.
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.features));
    for (std::uint32_t j = 0; j < cfg.features; ++j) {
        double mean = 0.0, sq = 0.0;
        for (std::uint32_t i = 0; i < cfg.samples; ++i) mean += ds.a[std::size_t{i} * cfg.features + j];
        mean /= cfg.samples;
        for (std::uint32_t i = 0; i < cfg.samples; ++i) {
            const double d = ds.a[std::size_t{i} * cfg.features + j] - mean;
            sq += d * d;
        }
        const double sd = std::sqrt(sq / cfg.samples);
        for (std::uint32_t i = 0; i < cfg.samples; ++i) {
            auto& v = ds.a[std::size_t{i} * cfg.features + j];
            v = sd > 0.0 ? (v - mean) / sd * scale : 0.0;
        }
    }
    return ds;
}

namespace {

// Margins of one sample and its softmax probabilities in place.
void softmax_row(const SvrgDataset& ds, std::uint32_t i, const SvrgWeights& w, double* p) {
    const double* a = ds.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::uint32_t k = 0; k < ds.classes; ++k) {
        double m = 0.0;
        const double* wk = w.data() + std::size_t{k} * ds.features;
        for (std::uint32_t j = 0; j < ds.features; ++j) m += wk[j] * a[j];
        p[k] = m;
        mx = std::max(mx, m);
    }
    double z = 0.0;
    for (std::uint32_t k = 0; k < ds.classes; ++k) z += (p[k] = std::exp(p[k] - mx));
    for (std::uint32_t k = 0; k < ds.classes; ++k) p[k] /= z;
}

double norm_sq(const SvrgWeights& w) {
    double s = 0.0;
    for (double v : w) s += v * v;
    return s;
}

}  // namespace

double svrg_loss(const SvrgDataset& ds, const SvrgWeights& w, double lambda) {
    double total = 0.0;
    std::vector<double> m(ds.classes);
    for (std::uint32_t i = 0; i < ds.samples; ++i) {
        const double* a = ds.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::uint32_t k = 0; k < ds.classes; ++k) {
            double s = 0.0;
            const double* wk = w.data() + std::size_t{k} * ds.features;
            for (std::uint32_t j = 0; j < ds.features; ++j) s += wk[j] * a[j];
            m[k] = s;
            mx = std::max(mx, s);
        }
        double z = 0.0;
        for (double v : m) z += std::exp(v - mx);
        total += mx + std::log(z) - m[ds.labels[i]];
    }
    return total / ds.samples + 0.5 * lambda * norm_sq(w);
}

void svrg_sample_gradient(const SvrgDataset& ds, std::uint32_t i, const SvrgWeights& w, double lambda, double* out) {
    std::vector<double> p(ds.classes);
    softmax_row(ds, i, w, p.data());
    p[ds.labels[i]] -= 1.0;
    const double* a = ds.row(i);
    for (std::uint32_t k = 0; k < ds.classes; ++k) {
        for (std::uint32_t j = 0; j < ds.features; ++j) {
            const std::size_t idx = std::size_t{k} * ds.features + j;
            out[idx] = p[k] * a[j] + lambda * w[idx];
        }
    }
}

SvrgWeights svrg_full_gradient(const SvrgDataset& ds, const SvrgWeights& w, double lambda) {
    SvrgWeights g(w.size(), 0.0);
    std::vector<double> p(ds.classes);
    for (std::uint32_t i = 0; i < ds.samples; ++i) {
        softmax_row(ds, i, w, p.data());
        p[ds.labels[i]] -= 1.0;
        const double* a = ds.row(i);
        for (std::uint32_t k = 0; k < ds.classes; ++k) {
            const double c = p[k] / ds.samples;
            for (std::uint32_t j = 0; j < ds.features; ++j) g[std::size_t{k} * ds.features + j] += c * a[j];
        }
    }
    for (std::size_t q = 0; q < g.size(); ++q) g[q] += lambda * w[q];
    return g;
}

SvrgOptimum svrg_solve_direct(const SvrgDataset& ds, double lambda, double tol) {
    const std::size_t d = ds.features;
    const std::size_t n = d * ds.classes;
    SvrgOptimum o;
    o.w.assign(n, 0.0);
    std::vector<double> p(ds.classes);
    for (std::uint32_t step = 0; step < 100; ++step) {
        const SvrgWeights g = svrg_full_gradient(ds, o.w, lambda);
        o.gradient_norm = std::sqrt(norm_sq(g));
        if (o.gradient_norm < tol) break;
        Eigen::MatrixXd H = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) * lambda;
        for (std::uint32_t i = 0; i < ds.samples; ++i) {
            softmax_row(ds, i, o.w, p.data());
            const Eigen::Map<const Eigen::VectorXd> a(ds.row(i), static_cast<Eigen::Index>(d));
            const Eigen::MatrixXd aa = a * a.transpose() / static_cast<double>(ds.samples);
            for (std::uint32_t k = 0; k < ds.classes; ++k) {
                for (std::uint32_t l = 0; l < ds.classes; ++l) {
                    const double c = p[k] * ((k == l ? 1.0 : 0.0) - p[l]);
                    H.block(static_cast<Eigen::Index>(k * d), static_cast<Eigen::Index>(l * d), static_cast<Eigen::Index>(d),
                            static_cast<Eigen::Index>(d)) += c * aa;
                }
            }
        }
        const Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(n));
        const Eigen::VectorXd dir = H.llt().solve(-gv);
        // Backtracking on the objective; Newton steps are full near the optimum.
        const double f0 = svrg_loss(ds, o.w, lambda);
        const double slope = gv.dot(dir);
        double t = 1.0;
        SvrgWeights trial(n);
        for (int ls = 0; ls < 50; ++ls) {
            for (std::size_t q = 0; q < n; ++q) trial[q] = o.w[q] + t * dir[static_cast<Eigen::Index>(q)];
            if (svrg_loss(ds, trial, lambda) <= f0 + 1e-4 * t * slope) break;
            t *= 0.5;
        }
        o.w = trial;
        ++o.newton_steps;
    }
    o.loss = svrg_loss(ds, o.w, lambda);
    return o;
}

std::vector<double> svrg_residuals(const SvrgDataset& ds, const std::vector<double>& margins) {
    std::vector<double> r(std::size_t{ds.samples} * ds.classes);
    for (std::uint32_t i = 0; i < ds.samples; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::uint32_t k = 0; k < ds.classes; ++k) mx = std::max(mx, margins[std::size_t{k} * ds.samples + i]);
        double z = 0.0;
        for (std::uint32_t k = 0; k < ds.classes; ++k) z += std::exp(margins[std::size_t{k} * ds.samples + i] - mx);
        for (std::uint32_t k = 0; k < ds.classes; ++k) {
            const double p = std::exp(margins[std::size_t{k} * ds.samples + i] - mx) / z;
            r[std::size_t{i} * ds.classes + k] = p - (ds.labels[i] == k ? 1.0 : 0.0);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Device-resident summarization

SvrgDevice::SvrgDevice(System& sys, const SvrgDataset& ds) : sys_(&sys), ds_(&ds) {
    const auto& geo = sys.config().geometry;
    units_ = geo.channels * geo.ranks;
    per_unit_ = (ds.samples + units_ - 1) / units_;
    const std::uint64_t per_block = kBlockBytes / sizeof(double);
    kb_ = (ds.features + per_block - 1) / per_block;
    if (kb_ > kBatchBlocks / kLanesPerChip) throw BoundsViolation("svrg rows do not fit the PE scratchpad");

    Region& region = sys.operand_region(0);
    const bool shared = region.is_shared();
    const auto& layout = sys.layout();
    const std::uint64_t per_row = layout.blocks_per_rank(shared);
    auto alloc = [&](std::uint64_t local_blocks) {
        const std::uint64_t rows = (std::max<std::uint64_t>(local_blocks, 1) + per_row - 1) / per_row;
        return DistVector::allocate(region, layout, rows * layout.system_row_bytes(shared));
    };
    a_ = alloc(per_unit_ * kb_);
    for (std::uint32_t k = 0; k < ds.classes; ++k) {
        w_.push_back(alloc(kb_));
        margin_.push_back(alloc(2ull * per_unit_));
        acc_.push_back(alloc(kb_));
        out_.push_back(alloc(kb_));
    }
    private_ = alloc(2ull * ds.classes * kb_);
    // Initial dataset placement is part of setup, not of the measured run.
    auto& mem = sys.memory();
    for (std::uint32_t i = 0; i < ds.samples; ++i) {
        const std::uint32_t u = unit_of(i);
        const std::uint64_t local = i - std::uint64_t{u} * per_unit_;
        for (std::uint32_t j = 0; j < ds.features; ++j) {
            const PhysicalAddress blk = a_->block_paddr(u / geo.ranks, u % geo.ranks, local * kb_ + j / per_block);
            mem.store<double>(blk + (j % per_block) * sizeof(double), ds.row(i)[j]);
        }
    }
}

Ticket SvrgDevice::exchange() {
    std::vector<PhysicalAddress> addrs;
    for (std::uint64_t b = 0; b < 2ull * ds_->classes * kb_; ++b) addrs.push_back(private_->block_paddr(0, 0, b));
    return sys_->host_access(addrs, TxnKind::Write);
}

std::vector<PhysicalAddress> SvrgDevice::row_addresses(std::uint32_t sample) const {
    const auto ranks = sys_->config().geometry.ranks;
    const std::uint32_t u = unit_of(sample);
    const std::uint64_t local = sample - std::uint64_t{u} * per_unit_;
    std::vector<PhysicalAddress> out;
    for (std::uint64_t b = 0; b < kb_; ++b) out.push_back(a_->block_paddr(u / ranks, u % ranks, local * kb_ + b));
    return out;
}

std::vector<PhysicalAddress> SvrgDevice::all_row_addresses() const {
    std::vector<PhysicalAddress> out;
    for (std::uint32_t i = 0; i < ds_->samples; ++i) {
        auto r = row_addresses(i);
        out.insert(out.end(), r.begin(), r.end());
    }
    return out;
}

Ticket SvrgDevice::write_weights(const SvrgWeights& w) {
    const auto ranks = sys_->config().geometry.ranks;
    const std::uint64_t per_block = kBlockBytes / sizeof(double);
    auto& mem = sys_->memory();
    std::vector<PhysicalAddress> addrs;
    for (std::uint32_t u = 0; u < units_; ++u) {
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            for (std::uint64_t b = 0; b < kb_; ++b) {
                const PhysicalAddress blk = w_[k]->block_paddr(u / ranks, u % ranks, b);
                for (std::uint64_t e = 0; e < per_block; ++e) {
                    const std::uint64_t j = b * per_block + e;
                    mem.store<double>(blk + e * sizeof(double), j < ds_->features ? w[k * ds_->features + j] : 0.0);
                }
                addrs.push_back(blk);
            }
        }
    }
    return sys_->host_access(addrs, TxnKind::Write);
}

Ticket SvrgDevice::launch_margins() {
    const auto ranks = sys_->config().geometry.ranks;
    std::vector<NdaInstruction> loop;
    for (std::uint32_t u = 0; u < units_; ++u) {
        const std::uint32_t rows = static_cast<std::uint32_t>(
            std::min<std::uint64_t>(per_unit_, ds_->samples - std::min<std::uint64_t>(ds_->samples, std::uint64_t{u} * per_unit_)));
        if (rows == 0) continue;
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            NdaInstruction in;
            in.op = Opcode::GEMV;
            in.type = ElemType::F64;
            in.channel = u / ranks;
            in.rank = u % ranks;
            in.n = kb_ * (kBlockBytes / sizeof(double));
            in.rows = rows;
            in.operands[0] = local_extent(a_, in.channel, in.rank, 0);
            in.operands[1] = local_extent(w_[k], in.channel, in.rank, 0);
            in.operands[2] = local_extent(margin_[k], in.channel, in.rank, 0);
            loop.push_back(in);
        }
    }
    return sys_->launch_macro(loop, true);
}

std::vector<double> SvrgDevice::collect_margins(Ticket t, Ticket* reads) {
    auto red = sys_->reduce_partials(t);
    if (reads) *reads = red.reads;
    // Instructions are unit-major then class; rows follow sample order.
    std::vector<double> m(std::size_t{ds_->samples} * ds_->classes);
    std::size_t pos = 0;
    for (std::uint32_t u = 0; u < units_; ++u) {
        const std::uint64_t first = std::uint64_t{u} * per_unit_;
        if (first >= ds_->samples) continue;
        const std::uint64_t rows = std::min<std::uint64_t>(per_unit_, ds_->samples - first);
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            for (std::uint64_t r = 0; r < rows; ++r) m[std::size_t{k} * ds_->samples + first + r] = red.values.at(pos++);
        }
    }
    return m;
}

Ticket SvrgDevice::launch_gradient(const std::vector<double>& residual) {
    const auto ranks = sys_->config().geometry.ranks;
    const std::uint64_t per_block = kBlockBytes / sizeof(double);
    // Reset of the scratchpad accumulators; no DRAM traffic.
    auto& mem = sys_->memory();
    for (std::uint32_t u = 0; u < units_; ++u) {
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            for (std::uint64_t b = 0; b < kb_; ++b) {
                const PhysicalAddress blk = acc_[k]->block_paddr(u / ranks, u % ranks, b);
                for (std::uint64_t e = 0; e < per_block; ++e) mem.store<double>(blk + e * sizeof(double), 0.0);
            }
        }
    }
    std::vector<NdaInstruction> loop;
    const double inv_n = 1.0 / ds_->samples;
    for (std::uint32_t u = 0; u < units_; ++u) {
        const std::uint32_t ch = u / ranks, r = u % ranks;
        const std::uint64_t first = std::uint64_t{u} * per_unit_;
        if (first >= ds_->samples) continue;
        const std::uint64_t rows = std::min<std::uint64_t>(per_unit_, ds_->samples - first);
        for (std::uint64_t s = 0; s < rows; ++s) {
            for (std::uint32_t k = 0; k < ds_->classes; ++k) {
                NdaInstruction in;
                // acc = alpha * a_i + 1 * acc, entirely in the scratchpad.
                in.op = Opcode::AXPBY;
                in.type = ElemType::F64;
                in.channel = ch;
                in.rank = r;
                in.n = ds_->features;
                in.alpha = residual[(first + s) * ds_->classes + k] * inv_n;
                in.beta = 1.0;
                // The row stays in the PE buffer after the first class.
                in.operands[0] = local_extent(a_, ch, r, s * kb_, k > 0);
                in.operands[1] = local_extent(acc_[k], ch, r, 0, true);
                in.operands[2] = local_extent(acc_[k], ch, r, 0, true);
                loop.push_back(in);
            }
        }
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            NdaInstruction flush;
            flush.op = Opcode::COPY;
            flush.type = ElemType::F64;
            flush.channel = ch;
            flush.rank = r;
            flush.n = ds_->features;
            flush.operands[0] = local_extent(acc_[k], ch, r, 0, true);
            flush.operands[1] = local_extent(out_[k], ch, r, 0);
            loop.push_back(flush);
        }
    }
    return sys_->launch_macro(loop, true);
}

Ticket SvrgDevice::read_gradient() {
    const auto ranks = sys_->config().geometry.ranks;
    std::vector<PhysicalAddress> addrs;
    for (std::uint32_t u = 0; u < units_; ++u) {
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            for (std::uint64_t b = 0; b < kb_; ++b) addrs.push_back(out_[k]->block_paddr(u / ranks, u % ranks, b));
        }
    }
    return sys_->host_access(addrs, TxnKind::Read);
}

SvrgWeights SvrgDevice::gradient_value(const SvrgWeights& w, double lambda) const {
    const auto ranks = sys_->config().geometry.ranks;
    const std::uint64_t per_block = kBlockBytes / sizeof(double);
    SvrgWeights g(w.size(), 0.0);
    for (std::uint32_t u = 0; u < units_; ++u) {
        if (std::uint64_t{u} * per_unit_ >= ds_->samples) continue;
        for (std::uint32_t k = 0; k < ds_->classes; ++k) {
            for (std::uint32_t j = 0; j < ds_->features; ++j) {
                const PhysicalAddress blk = out_[k]->block_paddr(u / ranks, u % ranks, j / per_block);
                g[std::size_t{k} * ds_->features + j] += sys_->memory().load<double>(blk + (j % per_block) * sizeof(double));
            }
        }
    }
    for (std::size_t q = 0; q < g.size(); ++q) g[q] += lambda * w[q];
    return g;
}

namespace {

// One summarization in flight. The runtime polls it every cycle; each stage
// starts as soon as the previous one has completed.
class SummaryJob {
public:
    SummaryJob(System& sys, SvrgDevice* dev, const SvrgDataset& ds, const SvrgConfig& cfg, SvrgWeights w, bool host_only)
        : sys_(&sys), dev_(dev), ds_(&ds), cfg_(&cfg), w_(std::move(w)), host_only_(host_only) {
        if (host_only_) {
            // Stream every row once; compute runs concurrently with the reads.
            ticket_ = sys.host_access(dev_->all_row_addresses(), TxnKind::Read);
            compute_until_ = sys.now() + static_cast<Cycle>(std::uint64_t{ds.samples} * ds.features * cfg.host_cycles_per_feature);
            stage_ = Stage::HostStream;
        } else {
            ticket_ = dev_->write_weights(w_);
            stage_ = Stage::Upload;
        }
    }

    bool finished() const { return stage_ == Stage::Done; }
    const SvrgWeights& gradient() const { return g_; }
    const SvrgWeights& snapshot() const { return w_; }

    void poll() {
        switch (stage_) {
            case Stage::HostStream:
                if (sys_->done(ticket_) && sys_->now() >= compute_until_) {
                    g_ = svrg_full_gradient(*ds_, w_, cfg_->lambda);
                    stage_ = Stage::Done;
                }
                break;
            case Stage::Upload:
                if (sys_->done(ticket_)) {
                    ticket_ = dev_->launch_margins();
                    stage_ = Stage::Margins;
                }
                break;
            case Stage::Margins:
                if (sys_->done(ticket_)) {
                    margins_ = dev_->collect_margins(ticket_, &ticket_);
                    stage_ = Stage::Readback;
                }
                break;
            case Stage::Readback:
                if (sys_->done(ticket_)) {
                    // Softmax on the host, one pass over samples x classes.
                    compute_until_ = sys_->now() + static_cast<Cycle>(std::uint64_t{ds_->samples} * ds_->classes);
                    stage_ = Stage::Residual;
                }
                break;
            case Stage::Residual:
                if (sys_->now() >= compute_until_) {
                    ticket_ = dev_->launch_gradient(svrg_residuals(*ds_, margins_));
                    stage_ = Stage::Gradient;
                }
                break;
            case Stage::Gradient:
                if (sys_->done(ticket_)) {
                    ticket_ = dev_->read_gradient();
                    stage_ = Stage::Fetch;
                }
                break;
            case Stage::Fetch:
                if (sys_->done(ticket_)) {
                    g_ = dev_->gradient_value(w_, cfg_->lambda);
                    stage_ = Stage::Done;
                }
                break;
            case Stage::Done:
                break;
        }
    }

private:
    enum class Stage { HostStream, Upload, Margins, Readback, Residual, Gradient, Fetch, Done };
    System* sys_;
    SvrgDevice* dev_;
    const SvrgDataset* ds_;
    const SvrgConfig* cfg_;
    SvrgWeights w_;
    SvrgWeights g_;
    std::vector<double> margins_;
    bool host_only_;
    Stage stage_ = Stage::Done;
    Ticket ticket_ = 0;
    Cycle compute_until_ = 0;
};

constexpr Cycle kWaitLimit = Cycle{1} << 40;

// Advances the system until `pred` holds, polling the job every cycle.
template <typename Pred>
void advance(System& sys, SummaryJob* job, Pred pred) {
    const Cycle start = sys.now();
    if (job) job->poll();
    while (!pred()) {
        if (sys.now() - start > kWaitLimit) throw Error("svrg: simulation made no progress");
        sys.step();
        if (job) job->poll();
    }
}

}  // namespace

SvrgWeights summarize_gradient(System& sys, SvrgDevice& dev, const SvrgWeights& w, double lambda) {
    SvrgConfig cfg;
    cfg.lambda = lambda;
    SummaryJob job(sys, &dev, dev.dataset(), cfg, w, false);
    advance(sys, &job, [&] { return job.finished(); });
    return job.gradient();
}

SvrgResult run_svrg(const SvrgConfig& cfg, System* sys, const SvrgDataset& ds, const SvrgOptimum& opt) {
    cfg.validate();
    if (ds.samples != cfg.samples || ds.features != cfg.features || ds.classes != cfg.classes) {
        throw ConfigError("svrg", "dataset shape does not match the configuration");
    }
    const std::size_t P = std::size_t{ds.classes} * ds.features;
    const bool host_only = cfg.variant == SvrgVariant::HostOnly;
    const bool delayed = cfg.variant == SvrgVariant::Delayed;

    std::unique_ptr<SvrgDevice> dev;
    if (sys) dev = std::make_unique<SvrgDevice>(*sys, ds);

    SvrgResult res;
    res.variant = cfg.variant;
    res.learning_rate = cfg.learning_rate;
    res.epoch = cfg.epoch;
    res.optimum_loss = opt.loss;

    SvrgWeights w(P, 0.0), vel(P, 0.0), s, g;
    std::vector<double> gi(P), gs(P);
    auto now = [&] { return sys ? sys->now() : Cycle{0}; };
    auto record = [&](std::uint32_t outer, double loss) {
        res.curve.push_back({outer, now(), loss});
        if (!res.cycles_to_target && loss <= opt.loss + cfg.target_gap) {
            res.cycles_to_target = now();
            res.outer_to_target = outer;
        }
    };
    auto summarize_blocking = [&](const SvrgWeights& snap) {
        if (!sys) return svrg_full_gradient(ds, snap, cfg.lambda);
        SummaryJob job(*sys, dev.get(), ds, cfg, snap, host_only);
        advance(*sys, &job, [&] { return job.finished(); });
        return job.gradient();
    };

    record(0, svrg_loss(ds, w, cfg.lambda));
    std::int64_t version = 0;
    if (delayed) {
        s = w;
        g = summarize_blocking(w);
    }

    std::uint64_t draw = 0;
    const Cycle compute = static_cast<Cycle>(std::uint64_t{ds.features} * cfg.host_cycles_per_feature);
    for (std::uint32_t outer = 1; outer <= cfg.max_outer; ++outer) {
        std::optional<SummaryJob> job;
        SvrgWeights snap;
        if (delayed) {
            snap = w;
            if (sys) job.emplace(*sys, dev.get(), ds, cfg, snap, false);
        } else {
            s = w;
            g = summarize_blocking(w);
            version = outer;
        }
        res.g_versions.push_back(version);
        SummaryJob* jp = job ? &*job : nullptr;

        for (std::uint64_t t = 0; t < cfg.epoch; ++t) {
            const auto i = static_cast<std::uint32_t>(splitmix64(cfg.seed ^ (0xa5a5a5a5ull + draw++)) % ds.samples);
            if (sys) {
                const Ticket tk = sys->host_access(dev->row_addresses(i), TxnKind::Read);
                advance(*sys, jp, [&] { return sys->done(tk); });
                const Cycle until = sys->now() + compute;
                advance(*sys, jp, [&] { return sys->now() >= until; });
            }
            svrg_sample_gradient(ds, i, w, cfg.lambda, gi.data());
            svrg_sample_gradient(ds, i, s, cfg.lambda, gs.data());
            for (std::size_t q = 0; q < P; ++q) {
                vel[q] = cfg.momentum * vel[q] - cfg.learning_rate * (gi[q] - gs[q] + g[q]);
                w[q] += vel[q];
            }
        }

        if (delayed) {
            if (sys) {
                advance(*sys, jp, [&] { return jp->finished(); });
                g = jp->gradient();
                // Fence: the private copies of s and g are refreshed with
                // uncached host writes before the next epoch starts.
                const Ticket fence = dev->exchange();
                advance(*sys, nullptr, [&] { return sys->done(fence); });
            } else {
                g = svrg_full_gradient(ds, snap, cfg.lambda);
            }
            s = std::move(snap);
            version = outer;
        }

        const double loss = svrg_loss(ds, w, cfg.lambda);
        if (!std::isfinite(loss) || loss > cfg.divergence_bound) {
            throw DivergenceDetected("svrg loss " + std::to_string(loss) + " exceeded the bound at outer iteration " +
                                     std::to_string(outer) + " (learning rate " + std::to_string(cfg.learning_rate) + ")");
        }
        record(outer, loss);
        if (loss - opt.loss <= cfg.stop_gap) break;
    }
    res.final_loss = res.curve.back().loss;
    res.w = std::move(w);
    return res;
}

double svrg_tune_learning_rate(const SvrgConfig& cfg, const SvrgDataset& ds, const SvrgOptimum& opt,
                               const std::vector<double>& grid) {
    if (grid.empty()) throw ConfigError("svrg.learning_rate", "empty grid");
    double best = grid.front();
    std::uint32_t best_outer = UINT32_MAX;
    double best_loss = std::numeric_limits<double>::infinity();
    for (double lr : grid) {
        SvrgConfig c = cfg;
        c.learning_rate = lr;
        try {
            const auto r = run_svrg(c, nullptr, ds, opt);
            const std::uint32_t outer = r.outer_to_target.value_or(UINT32_MAX);
            if (outer < best_outer || (outer == best_outer && r.final_loss < best_loss)) {
                best = lr;
                best_outer = outer;
                best_loss = r.final_loss;
            }
        } catch (const DivergenceDetected&) {
        }
    }
    return best;
}

void write_convergence_csv(std::ostream& os, const SvrgResult& r) {
    os << "outer_iter,simulated_cycle,loss\n";
    os.precision(17);
    for (const auto& p : r.curve) os << p.outer << ',' << p.cycle << ',' << p.loss << '\n';
}

}  // namespace ndasim
