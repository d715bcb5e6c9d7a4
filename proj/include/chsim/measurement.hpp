#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chsim/properties.hpp"

namespace chsim {

struct PointerInfo {
    std::string label;
    std::optional<double> value_a;  // annotation carried by joint-measurement pointers
    std::optional<double> value_b;
};

/// A fully quantum apparatus model: system of dimension dim_s, apparatus of
/// dimension dim_m with a macroscopic ready property, a unitary transfer
/// operator on the combined space, and pointer projectors on the combined
/// space (one per measured outcome plus a catch-all for everything else,
/// e.g. an apparatus that was never set up properly).
class MeasurementModel {
public:
    MeasurementModel(Decomposition measured, Projector ready, ComplexMatrix unitary,
                     Decomposition pointers, std::vector<PointerInfo> pointer_info)
        : measured_(std::move(measured)),
          ready_(std::move(ready)),
          unitary_(std::move(unitary)),
          pointers_(std::move(pointers)),
          pointer_info_(std::move(pointer_info)) {
        const long long total = static_cast<long long>(measured_.dim()) * ready_.dim();
        if (unitary_.dim() != total || pointers_.dim() != total)
            throw ValidationError("model operators must live on the combined space");
        if (!unitary_.is_unitary(tol::unitarity))
            throw ValidationError("transfer operator is not unitary within tolerance");
        if (pointers_.size() != measured_.size() + 1)
            throw ValidationError("expected one pointer per outcome plus a catch-all");
        if (pointer_info_.size() != pointers_.size())
            throw ValidationError("pointer label count does not match pointer count");
        if (ready_.rank() < 1) throw ValidationError("ready property must have rank >= 1");
    }

    int dim_s() const noexcept { return measured_.dim(); }
    int dim_m() const noexcept { return ready_.dim(); }
    int dim_total() const noexcept { return unitary_.dim(); }

    const Decomposition& measured() const noexcept { return measured_; }
    const Projector& ready() const noexcept { return ready_; }
    const ComplexMatrix& unitary() const noexcept { return unitary_; }
    const Decomposition& pointers() const noexcept { return pointers_; }
    const std::vector<PointerInfo>& pointer_info() const noexcept { return pointer_info_; }

    /// Index of the catch-all pointer (always last).
    std::size_t catch_all_index() const noexcept { return pointers_.size() - 1; }

    std::size_t pointer_index(const std::string& label) const {
        for (std::size_t i = 0; i < pointer_info_.size(); ++i)
            if (pointer_info_[i].label == label) return i;
        throw ValidationError("unknown pointer label '" + label + "'");
    }

    /// Same model with the transfer operator replaced; used to study
    /// miscalibrated apparatus.
    MeasurementModel with_unitary(ComplexMatrix replacement) const {
        return MeasurementModel(measured_, ready_, std::move(replacement), pointers_, pointer_info_);
    }

private:
    Decomposition measured_;
    Projector ready_;
    ComplexMatrix unitary_;
    Decomposition pointers_;
    std::vector<PointerInfo> pointer_info_;
};

/// Build a calibrated apparatus for a measured decomposition.
///
/// The apparatus basis is carved into blocks of ready_rank kets: block 0 is
/// the ready property, block k the pointer position for outcome k. The
/// transfer operator acts as "swap block 0 with block k" on the range of the
/// k-th measured projector and is therefore a permutation-style unitary that
/// satisfies the pointer calibration identity exactly (up to rounding).
inline MeasurementModel build_pointer_model(const Decomposition& measured, int dim_m,
                                            int ready_rank = 1,
                                            const std::string& label_prefix = "pi",
                                            int max_total_dim = tol::max_total_dim) {
    const int n = static_cast<int>(measured.size());
    if (ready_rank < 1) throw ValidationError("ready_rank must be >= 1");
    if (dim_m < (n + 1) * ready_rank)
        throw CapacityError("apparatus dimension " + std::to_string(dim_m) +
                            " too small for " + std::to_string(n) + " outcomes at ready rank " +
                            std::to_string(ready_rank));

    auto block_projector = [&](int block) {
        ComplexMatrix b = ComplexMatrix::zero(dim_m);
        for (int j = 0; j < ready_rank; ++j) b(block * ready_rank + j, block * ready_rank + j) = 1.0;
        return Projector(std::move(b));
    };
    auto block_swap = [&](int block) {
        ComplexMatrix s = ComplexMatrix::identity(dim_m);
        for (int j = 0; j < ready_rank; ++j) {
            const int lo = j, hi = block * ready_rank + j;
            s(lo, lo) = 0.0;
            s(hi, hi) = 0.0;
            s(lo, hi) = 1.0;
            s(hi, lo) = 1.0;
        }
        return s;
    };

    const Projector ready = block_projector(0);
    ComplexMatrix transfer = ComplexMatrix::zero(measured.dim() * dim_m);
    // Guard the combined dimension before building on it.
    (void)tensor_product(ComplexMatrix::identity(measured.dim()), ComplexMatrix::identity(dim_m),
                         max_total_dim);
    for (int k = 0; k < n; ++k)
        transfer += tensor_product(measured[static_cast<std::size_t>(k)].matrix(), block_swap(k + 1),
                                   max_total_dim);

    std::vector<Projector> pointers;
    std::vector<std::string> labels;
    std::vector<PointerInfo> info;
    ComplexMatrix covered = ComplexMatrix::zero(measured.dim() * dim_m);
    const ComplexMatrix system_identity = ComplexMatrix::identity(measured.dim());
    for (int k = 1; k <= n; ++k) {
        ComplexMatrix pk = tensor_product(system_identity, block_projector(k).matrix(), max_total_dim);
        covered += pk;
        pointers.emplace_back(std::move(pk));
        labels.push_back(label_prefix + std::to_string(k));
        info.push_back({labels.back(), std::nullopt, std::nullopt});
    }
    pointers.emplace_back(ComplexMatrix::identity(measured.dim() * dim_m) - covered);
    labels.push_back(label_prefix + "0");
    info.push_back({labels.back(), std::nullopt, std::nullopt});

    return MeasurementModel(measured, ready, std::move(transfer),
                            Decomposition(std::move(pointers), std::move(labels)), std::move(info));
}

/// The time-evolved image of a system property joined with the ready state:
/// a calculational tool for probabilities, not a pointer property itself.
class EvolvedProperty {
public:
    EvolvedProperty(ComplexMatrix matrix, Projector source)
        : matrix_(std::move(matrix)), source_(std::move(source)) {
        if (!matrix_.is_hermitian(tol::calibration) ||
            frobenius_distance(matrix_ * matrix_, matrix_) > tol::calibration)
            throw NumericError("evolved property failed to stay a projector");
    }

    const ComplexMatrix& matrix() const noexcept { return matrix_; }
    const Projector& source() const noexcept { return source_; }

    Projector as_projector() const { return Projector(matrix_); }

private:
    ComplexMatrix matrix_;
    Projector source_;
};

inline EvolvedProperty evolve_property(const MeasurementModel& model, const Projector& p_hat) {
    if (p_hat.dim() != model.dim_s())
        throw ValidationError("property dimension does not match the system");
    if (p_hat.rank() < 1)
        throw ValidationError("rank-0 property is never true and cannot be evolved");
    const ComplexMatrix joined = tensor_product(p_hat.matrix(), model.ready().matrix());
    ComplexMatrix evolved = model.unitary() * joined * model.unitary().adjoint();
    return EvolvedProperty(std::move(evolved), p_hat);
}

/// Probabilities over pointer labels (catch-all included); sums to one.
class OutcomeDistribution {
public:
    explicit OutcomeDistribution(std::vector<std::pair<std::string, double>> probabilities)
        : probabilities_(std::move(probabilities)) {
        double sum = 0.0;
        for (auto& [label, p] : probabilities_) {
            if (p < 0.0 && p > -1e-12) p = 0.0;  // rounding clamp
            if (p > 1.0 && p < 1.0 + 1e-12) p = 1.0;
            if (p < 0.0 || p > 1.0)
                throw NumericError("probability for '" + label + "' out of range: " + std::to_string(p));
            sum += p;
        }
        if (std::abs(sum - 1.0) > tol::probability)
            throw NumericError("outcome probabilities sum to " + std::to_string(sum));
    }

    const std::vector<std::pair<std::string, double>>& entries() const noexcept { return probabilities_; }

    double at(const std::string& label) const {
        for (const auto& [l, p] : probabilities_)
            if (l == label) return p;
        throw ValidationError("unknown pointer label '" + label + "'");
    }

    double sum_over(const std::set<std::string>& labels) const {
        double s = 0.0;
        for (const std::string& l : labels) s += at(l);
        return s;
    }

private:
    std::vector<std::pair<std::string, double>> probabilities_;
};

/// Pr(pointer | property) = Tr(pointer * evolved) / Tr(evolved) over every
/// pointer label, the catch-all included.
inline OutcomeDistribution born_probabilities(const MeasurementModel& model, const Projector& p_hat) {
    const EvolvedProperty evolved = evolve_property(model, p_hat);
    const double total = evolved.matrix().trace().real();
    if (total <= 1e-12)
        throw DegenerateInputError("evolved property has (near-)zero trace; nothing to normalize");
    std::vector<std::pair<std::string, double>> probs;
    probs.reserve(model.pointers().size());
    for (std::size_t k = 0; k < model.pointers().size(); ++k) {
        const double raw = product_trace(model.pointers()[k].matrix(), evolved.matrix()).real();
        probs.emplace_back(model.pointer_info()[k].label, raw / total);
    }
    return OutcomeDistribution(std::move(probs));
}

struct CalibrationReport {
    double max_violation;
    bool pass;
    std::size_t worst_measured_index;
    std::string worst_pointer_label;
};

/// Maximum defect of the pointer correlation identity over all pairs of
/// prepared outcome and pointer position. A freshly built model reports
/// (numerically) zero; swapping in the identity transfer reports order one.
inline CalibrationReport verify_calibration(const MeasurementModel& model) {
    CalibrationReport report{0.0, true, 0, model.pointer_info().front().label};
    for (std::size_t alpha = 0; alpha < model.measured().size(); ++alpha) {
        const EvolvedProperty v = evolve_property(model, model.measured()[alpha]);
        for (std::size_t k = 0; k < model.pointers().size(); ++k) {
            ComplexMatrix lhs = model.pointers()[k].matrix() * v.matrix();
            if (k == alpha) lhs -= v.matrix();  // outcome pointers are aligned with measured order
            const double violation = lhs.frobenius_norm();
            if (violation > report.max_violation) {
                report.max_violation = violation;
                report.worst_measured_index = alpha;
                report.worst_pointer_label = model.pointer_info()[k].label;
            }
        }
    }
    report.pass = report.max_violation <= tol::calibration;
    return report;
}

/// Apparatus for the joint measurement of two compatible observables: one
/// pointer per cell of their common refinement, each annotated with the pair
/// of parent eigenvalues it reveals.
inline MeasurementModel build_joint_model(const Observable& a, const Observable& b, int dim_m,
                                          int ready_rank = 1, int max_total_dim = tol::max_total_dim) {
    const Refinement refinement = common_refinement(a, b);  // throws on incompatibility
    MeasurementModel model = build_pointer_model(refinement.decomposition, dim_m, ready_rank, "xi",
                                                 max_total_dim);
    std::vector<PointerInfo> info = model.pointer_info();
    for (std::size_t j = 0; j < refinement.size(); ++j) {
        info[j].value_a = refinement.values_a[j];
        info[j].value_b = refinement.values_b[j];
    }
    return MeasurementModel(model.measured(), model.ready(), model.unitary(), model.pointers(),
                            std::move(info));
}

/// Indices of the measured projectors whose sum reproduces `coarse`;
/// validation fails unless the reproduction is exact within tolerance.
inline std::vector<std::size_t> measured_support(const MeasurementModel& model,
                                                 const Projector& coarse) {
    if (coarse.dim() != model.dim_s())
        throw ValidationError("property dimension does not match the system");
    std::vector<std::size_t> support;
    ComplexMatrix sum = ComplexMatrix::zero(model.dim_s());
    for (std::size_t i = 0; i < model.measured().size(); ++i) {
        const Projector& cell = model.measured()[i];
        const double overlap = product_trace(coarse.matrix(), cell.matrix()).real();
        if (overlap > 0.5) {
            support.push_back(i);
            sum += cell.matrix();
        }
    }
    if (frobenius_distance(coarse.matrix(), sum) > tol::reconstruction)
        throw ValidationError("property is not a sum of measured projectors");
    return support;
}

/// Sum of Born probabilities over a pointer set, for a prepared property that
/// must itself be a sum of measured cells. When the pointer set matches the
/// cells composing the property the result is one by linearity.
inline double coarse_outcome_probability(const MeasurementModel& model, const Projector& p,
                                         const std::set<std::string>& pointer_labels) {
    (void)measured_support(model, p);
    const OutcomeDistribution dist = born_probabilities(model, p);
    return dist.sum_over(pointer_labels);
}

/// Distribution over the annotated first-observable values, summed from an
/// outcome distribution of a joint model. Values are grouped exactly: they
/// are copied from the parent observable, never recomputed.
inline std::map<double, double> value_marginal(const MeasurementModel& model,
                                               const OutcomeDistribution& dist) {
    std::map<double, double> marginal;
    for (std::size_t k = 0; k < model.pointer_info().size(); ++k) {
        const PointerInfo& info = model.pointer_info()[k];
        if (!info.value_a) continue;  // catch-all carries no value
        marginal[*info.value_a] += dist.at(info.label);
    }
    return marginal;
}

struct NoncontextualityReport {
    std::map<double, double> marginal_with_b;  // keyed by eigenvalue of the shared observable
    std::map<double, double> marginal_with_c;
    double max_difference;
    bool pass;
};

/// Measure A jointly with B, then A jointly with C, and compare the A-value
/// distributions for the same prepared property. The two apparatuses differ,
/// the marginals must not.
inline NoncontextualityReport noncontextuality_check(const Observable& a, const Observable& b,
                                                     const Observable& c, const Projector& p_hat,
                                                     int dim_m, int ready_rank = 1) {
    if (!are_compatible(a, b))
        throw IncompatibilityError("first and second observables do not commute");
    if (!are_compatible(a, c))
        throw IncompatibilityError("first and third observables do not commute");
    const MeasurementModel with_b = build_joint_model(a, b, dim_m, ready_rank);
    const MeasurementModel with_c = build_joint_model(a, c, dim_m, ready_rank);
    NoncontextualityReport report;
    report.marginal_with_b = value_marginal(with_b, born_probabilities(with_b, p_hat));
    report.marginal_with_c = value_marginal(with_c, born_probabilities(with_c, p_hat));
    double max_diff = 0.0;
    for (const double value : a.eigenvalues()) {
        const auto pb = report.marginal_with_b.find(value);
        const auto pc = report.marginal_with_c.find(value);
        const double vb = pb == report.marginal_with_b.end() ? 0.0 : pb->second;
        const double vc = pc == report.marginal_with_c.end() ? 0.0 : pc->second;
        max_diff = std::max(max_diff, std::abs(vb - vc));
    }
    report.max_difference = max_diff;
    report.pass = max_diff <= tol::calibration;
    return report;
}

/// Counterfactual reasoning anchored on a pivot property shared by the
/// actual and counterfactual apparatus: trace the actual outcome back to the
/// pivot, then evolve the pivot forward under the other apparatus and sum the
/// probabilities of the pointer positions that reveal the same value.
inline double counterfactual_pivot(const MeasurementModel& actual,
                                   const MeasurementModel& counterfactual, const Projector& pivot) {
    (void)measured_support(actual, pivot);  // pivot must be expressible in both worlds
    const std::vector<std::size_t> support = measured_support(counterfactual, pivot);
    std::set<std::string> labels;
    for (std::size_t j : support) labels.insert(counterfactual.pointer_info()[j].label);
    const OutcomeDistribution dist = born_probabilities(counterfactual, pivot);
    return dist.sum_over(labels);
}

}  // namespace chsim
