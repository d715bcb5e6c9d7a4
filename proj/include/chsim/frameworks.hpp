#pragma once

#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "chsim/properties.hpp"

namespace chsim {

/// A sample space (projective decomposition of the identity) together with
/// its event algebra. The algebra is virtual: an event is a subset of
/// sample-space indices, and its projector is built on demand, so the 2^n
/// compound events are never materialized.
class Framework {
public:
    explicit Framework(Decomposition sample_space, std::string name = "framework")
        : sample_space_(std::move(sample_space)), name_(std::move(name)) {}

    const Decomposition& sample_space() const noexcept { return sample_space_; }
    const std::string& name() const noexcept { return name_; }
    int dim() const noexcept { return sample_space_.dim(); }
    std::size_t size() const noexcept { return sample_space_.size(); }

private:
    Decomposition sample_space_;
    std::string name_;
};

/// A compound event: a nonempty set of sample-space indices of one framework.
class Event {
public:
    Event(const Framework& framework, std::set<std::size_t> indices)
        : framework_ref_(framework.name()), indices_(std::move(indices)) {
        if (indices_.empty()) throw ValidationError("event needs at least one index");
        for (std::size_t i : indices_)
            if (i >= framework.size())
                throw ValidationError("event index " + std::to_string(i) + " out of range");
    }

    const std::string& framework_ref() const noexcept { return framework_ref_; }
    const std::set<std::size_t>& indices() const noexcept { return indices_; }

    /// Sum of the selected sample-space projectors (orthogonal, so again a projector).
    Projector projector(const Framework& framework) const {
        require_member_of(framework);
        ComplexMatrix sum = ComplexMatrix::zero(framework.dim());
        for (std::size_t i : indices_) sum += framework.sample_space()[i].matrix();
        return Projector(std::move(sum));
    }

    void require_member_of(const Framework& framework) const {
        if (framework.name() != framework_ref_)
            throw ValidationError("event belongs to framework '" + framework_ref_ +
                                  "', not '" + framework.name() + "'");
        for (std::size_t i : indices_)
            if (i >= framework.size())
                throw ValidationError("event index " + std::to_string(i) + " out of range");
    }

private:
    std::string framework_ref_;
    std::set<std::size_t> indices_;
};

/// First-class refusal to merge incompatible frameworks. Carries one
/// noncommuting witness pair; no merged structure is ever produced.
struct SingleFrameworkViolation {
    std::size_t index_f1;
    std::size_t index_f2;
    std::string label_f1;
    std::string label_f2;
    double commutator_norm;
};

inline bool frameworks_compatible(const Framework& f1, const Framework& f2) {
    if (f1.dim() != f2.dim()) throw ValidationError("framework dimensions differ");
    return !first_noncommuting_pair(f1.sample_space(), f2.sample_space()).has_value();
}

/// Common refinement of two compatible sample spaces: all nonzero products in
/// lexicographic order, labels joined from the parents.
inline Decomposition refine_sample_spaces(const Decomposition& a, const Decomposition& b) {
    std::vector<Projector> cells;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) {
            ComplexMatrix prod = a[i].matrix() * b[j].matrix();
            if (std::llround(prod.trace().real()) < 1) continue;
            cells.emplace_back(std::move(prod));
            labels.push_back(a.labels()[i] + "*" + b.labels()[j]);
        }
    return Decomposition(std::move(cells), std::move(labels));
}

using CombineResult = std::variant<Framework, SingleFrameworkViolation>;

/// Merge two frameworks through their common refinement when every projector
/// of one commutes with every projector of the other; otherwise report the
/// violation as a value, since a refused combination is an ordinary outcome
/// for a scenario run, not an exceptional one.
inline CombineResult combine_frameworks(const Framework& f1, const Framework& f2) {
    if (f1.dim() != f2.dim()) throw ValidationError("framework dimensions differ");
    if (const auto pair = first_noncommuting_pair(f1.sample_space(), f2.sample_space())) {
        const double norm = commutator_norm(f1.sample_space()[pair->first].matrix(),
                                            f2.sample_space()[pair->second].matrix());
        return SingleFrameworkViolation{pair->first, pair->second,
                                        f1.sample_space().labels()[pair->first],
                                        f2.sample_space().labels()[pair->second], norm};
    }
    return Framework(refine_sample_spaces(f1.sample_space(), f2.sample_space()),
                     f1.name() + "+" + f2.name());
}

inline double event_probability(const Framework& f, const StateVector& state, const Event& e) {
    e.require_member_of(f);
    if (state.dim() != f.dim()) throw ValidationError("state dimension does not match framework");
    const double n2 = state.norm() * state.norm();
    if (n2 == 0.0) throw ValidationError("zero state has no event probabilities");
    const StateVector projected = e.projector(f).matrix() * state;
    return state.inner(projected).real() / n2;
}

inline double event_probability(const Framework& f, const DensityOperator& state, const Event& e) {
    e.require_member_of(f);
    if (state.dim() != f.dim()) throw ValidationError("state dimension does not match framework");
    return product_trace(state.matrix(), e.projector(f).matrix()).real();
}

}  // namespace chsim
