#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "ndasim/kvconfig.hpp"
#include "ndasim/layout.hpp"
#include "ndasim/types.hpp"

namespace ndasim {

class System;
using Ticket = std::uint64_t;

enum class SvrgVariant : std::uint8_t { HostOnly, Serialized, Delayed };
std::string_view to_string(SvrgVariant v);
SvrgVariant parse_svrg_variant(std::string_view s);

/// Multinomial logistic regression trained with SVRG plus momentum.
/// Host timing: each inner iteration streams the sampled row from DRAM and
/// then spends `host_cycles_per_feature * features` cycles of compute.
struct SvrgConfig {
    std::uint32_t samples = 512;
    std::uint32_t features = 256;
    std::uint32_t classes = 4;
    double lambda = 1e-3;
    double learning_rate = 0.2;
    double momentum = 0.9;
    std::uint64_t epoch = 128;  // inner iterations per outer iteration (default samples / 4)
    SvrgVariant variant = SvrgVariant::Serialized;
    std::uint64_t seed = 1;
    double separation = 1.5;  // distance of class centers in units of the noise
    std::uint32_t host_cycles_per_feature = 1;
    std::uint32_t max_outer = 200;
    double target_gap = 1e-5;  // time-to-target threshold above the optimum
    double stop_gap = 1e-8;    // stop once this close to the optimum
    double divergence_bound = 1e3;  // DivergenceDetected when loss exceeds this

    void validate() const;
    /// Reads `svrg.*` keys and leaves everything else untouched.
    static SvrgConfig from_config(const KeyValueConfig& kv);
};

/// Synthetic Gaussian-cluster dataset; rows are standardized per feature.
struct SvrgDataset {
    std::uint32_t samples = 0;
    std::uint32_t features = 0;
    std::uint32_t classes = 0;
    std::vector<double> a;                // row-major samples x features
    std::vector<std::uint32_t> labels;

    static SvrgDataset generate(const SvrgConfig& cfg);
    const double* row(std::uint32_t i) const { return a.data() + std::size_t{i} * features; }
};

/// Weights are stored class-major: w[k * features + j].
using SvrgWeights = std::vector<double>;

double svrg_loss(const SvrgDataset& ds, const SvrgWeights& w, double lambda);
/// Average logistic gradient plus the regularization term, accumulated in
/// sample order. This is the scalar oracle for the NDA summarization.
SvrgWeights svrg_full_gradient(const SvrgDataset& ds, const SvrgWeights& w, double lambda);
/// Gradient of sample i's loss term (including regularization).
void svrg_sample_gradient(const SvrgDataset& ds, std::uint32_t i, const SvrgWeights& w, double lambda, double* out);

struct SvrgOptimum {
    SvrgWeights w;
    double loss = 0.0;
    std::uint32_t newton_steps = 0;
    double gradient_norm = 0.0;
};
/// Direct solver: damped Newton with dense Cholesky on the full Hessian.
SvrgOptimum svrg_solve_direct(const SvrgDataset& ds, double lambda, double tol = 1e-12);

/// The dataset, model copies and summarization buffers resident in simulated
/// memory. Samples are split into contiguous blocks, one per rank in
/// channel-major order; the weights of every class are replicated per rank.
class SvrgDevice {
public:
    SvrgDevice(System& sys, const SvrgDataset& ds);

    const SvrgDataset& dataset() const { return *ds_; }
    std::uint32_t units() const { return units_; }
    std::uint32_t unit_of(std::uint32_t sample) const { return sample / per_unit_; }
    std::uint64_t row_blocks() const { return kb_; }
    /// Physical addresses of sample i's row.
    std::vector<PhysicalAddress> row_addresses(std::uint32_t sample) const;
    /// Addresses of every row, for host-side streaming.
    std::vector<PhysicalAddress> all_row_addresses() const;

    /// Uncached host writes of w into every rank's copy.
    Ticket write_weights(const SvrgWeights& w);
    /// Launches one GEMV per rank and class computing the margins.
    Ticket launch_margins();
    /// Reduces the margin partials (host reads) after launch_margins completed.
    std::vector<double> collect_margins(Ticket t, Ticket* reads);
    /// Launches the per-sample AXPBYs into scratchpad accumulators and their flush.
    Ticket launch_gradient(const std::vector<double>& residual);
    /// Host reads of the flushed per-rank accumulators.
    Ticket read_gradient();
    /// Sums the flushed accumulators in rank order and adds lambda * w.
    SvrgWeights gradient_value(const SvrgWeights& w, double lambda) const;
    /// Uncached host writes refreshing the host's private copies of s and g.
    Ticket exchange();

private:
    System* sys_;
    const SvrgDataset* ds_;
    std::uint32_t units_ = 0;
    std::uint32_t per_unit_ = 0;
    std::uint64_t kb_ = 0;
    std::shared_ptr<DistVector> a_;
    std::vector<std::shared_ptr<DistVector>> w_;       // per class
    std::vector<std::shared_ptr<DistVector>> margin_;  // per class, 2 blocks per row
    std::vector<std::shared_ptr<DistVector>> acc_;     // per class scratchpad accumulator
    std::vector<std::shared_ptr<DistVector>> out_;     // per class flushed accumulator
    std::shared_ptr<DistVector> private_;              // host-private s and g
};

/// Softmax residuals p - onehot(label), sample-major, from margins laid out
/// class-major (margins[k * samples + i]).
std::vector<double> svrg_residuals(const SvrgDataset& ds, const std::vector<double>& margins);

/// Blocking NDA summarization: uploads w, runs both NDA passes and returns g.
SvrgWeights summarize_gradient(System& sys, SvrgDevice& dev, const SvrgWeights& w, double lambda);

struct SvrgPoint {
    std::uint32_t outer = 0;
    Cycle cycle = 0;
    double loss = 0.0;
};

struct SvrgResult {
    SvrgVariant variant = SvrgVariant::Serialized;
    double learning_rate = 0.0;
    std::uint64_t epoch = 0;
    std::vector<SvrgPoint> curve;  // point 0 is the initial model
    double optimum_loss = 0.0;
    double final_loss = 0.0;
    std::optional<Cycle> cycles_to_target;
    std::optional<std::uint32_t> outer_to_target;
    /// Version of g consumed by each outer iteration: version k was computed
    /// from the model at the start of outer iteration k (0 is w0).
    std::vector<std::int64_t> g_versions;
    SvrgWeights w;
};

/// Runs the case study. With `sys == nullptr` only the numerics run and all
/// cycle stamps are zero; the trajectory then differs from the simulated one
/// only by the summation order of g.
/// Throws DivergenceDetected when the loss exceeds the configured bound.
SvrgResult run_svrg(const SvrgConfig& cfg, System* sys, const SvrgDataset& ds, const SvrgOptimum& opt);

/// Picks, from `grid`, the learning rate reaching the target in the fewest
/// outer iterations of the numerics-only run; diverging rates are skipped.
double svrg_tune_learning_rate(const SvrgConfig& cfg, const SvrgDataset& ds, const SvrgOptimum& opt,
                               const std::vector<double>& grid);

/// CSV with columns outer_iter,simulated_cycle,loss.
void write_convergence_csv(std::ostream& os, const SvrgResult& r);

}  // namespace ndasim
