#pragma once

#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chsim/measurement.hpp"
#include "chsim/properties.hpp"

namespace chsim {

/// A family of histories: an initial projector at t0, then one decomposition
/// of the identity per later time, with a unitary for each interval (the
/// identity when nothing happens in between). All operators live on one
/// total space.
class HistoryFamily {
public:
    HistoryFamily(Projector initial, std::vector<ComplexMatrix> steps,
                  std::vector<Decomposition> event_sets, std::vector<std::string> times = {},
                  std::string name = "family")
        : initial_(std::move(initial)),
          steps_(std::move(steps)),
          event_sets_(std::move(event_sets)),
          times_(std::move(times)),
          name_(std::move(name)) {
        if (event_sets_.empty()) throw ValidationError("family needs at least one event time");
        if (steps_.size() != event_sets_.size())
            throw ValidationError("need exactly one step unitary per event time");
        if (initial_.rank() < 1)
            throw ValidationError("initial projector must have rank >= 1");
        for (const ComplexMatrix& u : steps_) {
            if (u.dim() != initial_.dim()) throw ValidationError("step dimension mismatch");
            if (!u.is_unitary(tol::unitarity))
                throw ValidationError("step operator is not unitary within tolerance");
        }
        for (const Decomposition& d : event_sets_)
            if (d.dim() != initial_.dim()) throw ValidationError("event-set dimension mismatch");
        if (times_.empty()) {
            for (std::size_t k = 0; k <= event_sets_.size(); ++k)
                times_.push_back("t" + std::to_string(k));
        } else if (times_.size() != event_sets_.size() + 1) {
            throw ValidationError("time label count must be event times + 1");
        }
    }

    const Projector& initial() const noexcept { return initial_; }
    const std::vector<ComplexMatrix>& steps() const noexcept { return steps_; }
    const std::vector<Decomposition>& event_sets() const noexcept { return event_sets_; }
    const std::vector<std::string>& times() const noexcept { return times_; }
    const std::string& name() const noexcept { return name_; }
    int dim() const noexcept { return initial_.dim(); }

    long long history_count() const noexcept {
        long long n = 1;
        for (const Decomposition& d : event_sets_) n *= static_cast<long long>(d.size());
        return n;
    }

private:
    Projector initial_;
    std::vector<ComplexMatrix> steps_;
    std::vector<Decomposition> event_sets_;
    std::vector<std::string> times_;
    std::string name_;
};

/// One projector choice per time after t0.
struct History {
    std::string family_ref;
    std::vector<std::size_t> choice;
};

inline void require_member_of(const HistoryFamily& family, const History& h) {
    if (h.family_ref != family.name())
        throw ValidationError("history belongs to family '" + h.family_ref + "', not '" +
                              family.name() + "'");
    if (h.choice.size() != family.event_sets().size())
        throw ValidationError("history must choose one projector per time");
    for (std::size_t k = 0; k < h.choice.size(); ++k)
        if (h.choice[k] >= family.event_sets()[k].size())
            throw ValidationError("history index " + std::to_string(h.choice[k]) +
                                  " out of range at time " + std::to_string(k + 1));
}

/// K(h) = C_n U_n ... C_1 U_1 Psi0, applied right to left.
inline ComplexMatrix chain_operator(const HistoryFamily& family, const History& h) {
    require_member_of(family, h);
    ComplexMatrix k = family.initial().matrix();
    for (std::size_t step = 0; step < h.choice.size(); ++step) {
        k = family.steps()[step] * k;
        k = family.event_sets()[step][h.choice[step]].matrix() * k;
    }
    return k;
}

/// The decoherence functional D(h, h') = Tr(K(h')' K(h)) / Tr(Psi0) over the
/// full lexicographic enumeration of histories. Hermitian, real nonnegative
/// diagonal, unit trace.
class DecoherenceMatrix {
public:
    DecoherenceMatrix(std::vector<History> histories, ComplexMatrix entries)
        : histories_(std::move(histories)), entries_(std::move(entries)) {
        if (static_cast<std::size_t>(entries_.dim()) != histories_.size())
            throw ValidationError("decoherence matrix size does not match history count");
        if (!entries_.is_hermitian(1e-10))
            throw NumericError("decoherence matrix is not Hermitian");
        double trace = 0.0;
        for (int i = 0; i < entries_.dim(); ++i) {
            if (entries_(i, i).real() < -1e-12)
                throw NumericError("negative diagonal weight in decoherence matrix");
            trace += entries_(i, i).real();
        }
        if (std::abs(trace - 1.0) > tol::probability)
            throw NumericError("decoherence diagonal sums to " + std::to_string(trace));
    }

    const std::vector<History>& histories() const noexcept { return histories_; }
    const ComplexMatrix& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return histories_.size(); }

    double max_off_diagonal() const {
        double m = 0.0;
        for (int i = 0; i < entries_.dim(); ++i)
            for (int j = 0; j < entries_.dim(); ++j)
                if (i != j) m = std::max(m, std::abs(entries_(i, j)));
        return m;
    }

private:
    std::vector<History> histories_;
    ComplexMatrix entries_;
};

/// Lexicographic enumeration: the first time is the most significant index.
inline std::vector<History> enumerate_histories(const HistoryFamily& family,
                                                long long max_count = tol::max_history_count) {
    const long long count = family.history_count();
    if (count > max_count)
        throw CapacityError("family enumerates " + std::to_string(count) +
                            " histories, above the bound " + std::to_string(max_count));
    std::vector<History> out;
    out.reserve(static_cast<std::size_t>(count));
    std::vector<std::size_t> choice(family.event_sets().size(), 0);
    for (long long h = 0; h < count; ++h) {
        out.push_back(History{family.name(), choice});
        for (std::size_t k = choice.size(); k-- > 0;) {
            if (++choice[k] < family.event_sets()[k].size()) break;
            choice[k] = 0;
        }
    }
    return out;
}

inline DecoherenceMatrix decoherence_matrix(const HistoryFamily& family,
                                            long long max_count = tol::max_history_count) {
    std::vector<History> histories = enumerate_histories(family, max_count);
    const std::size_t n = histories.size();
    std::vector<ComplexMatrix> chains;
    chains.reserve(n);
    for (const History& h : histories) chains.push_back(chain_operator(family, h));

    const double trace0 = family.initial().matrix().trace().real();
    ComplexMatrix d(static_cast<int>(n));
    for (std::size_t r = 0; r < n; ++r) {
        double diag = 0.0;
        for (const Complex& z : chains[r].entries()) diag += std::norm(z);
        d(static_cast<int>(r), static_cast<int>(r)) = diag / trace0;
        for (std::size_t c = r + 1; c < n; ++c) {
            // Frobenius inner product <K(h_c), K(h_r)> = Tr(K(h_c)' K(h_r))
            Complex inner = 0.0;
            const auto& kc = chains[c].entries();
            const auto& kr = chains[r].entries();
            for (std::size_t e = 0; e < kr.size(); ++e) inner += std::conj(kc[e]) * kr[e];
            inner /= trace0;
            d(static_cast<int>(r), static_cast<int>(c)) = inner;
            d(static_cast<int>(c), static_cast<int>(r)) = std::conj(inner);
        }
    }
    return DecoherenceMatrix(std::move(histories), std::move(d));
}

struct ConsistencyReport {
    bool consistent;
    double max_off_diagonal;
};

/// Medium decoherence: every off-diagonal entry of the functional must vanish
/// (modulus, not just real part, below tolerance).
inline ConsistencyReport is_consistent(const HistoryFamily& family) {
    const DecoherenceMatrix d = decoherence_matrix(family);
    const double off = d.max_off_diagonal();
    return ConsistencyReport{off <= tol::consistency, off};
}

/// The extended Born rule: diagonal weights become probabilities, offered
/// only when the family is consistent.
inline std::vector<std::pair<History, double>> history_probabilities(const HistoryFamily& family) {
    const DecoherenceMatrix d = decoherence_matrix(family);
    const double off = d.max_off_diagonal();
    if (off > tol::consistency)
        throw ConsistencyError("family is inconsistent (max off-diagonal " + std::to_string(off) +
                               "); probabilities refused");
    std::vector<std::pair<History, double>> out;
    out.reserve(d.size());
    for (std::size_t h = 0; h < d.size(); ++h)
        out.emplace_back(d.histories()[h], d.entries()(static_cast<int>(h), static_cast<int>(h)).real());
    return out;
}

/// An event inside a history family: a set of projector indices at one time
/// (step 0 is the first time after the initial one).
struct TimeEvent {
    std::size_t step;
    std::set<std::size_t> indices;
};

inline void require_valid(const HistoryFamily& family, const TimeEvent& e) {
    if (e.step >= family.event_sets().size())
        throw ValidationError("event time index " + std::to_string(e.step) + " out of range");
    if (e.indices.empty()) throw ValidationError("event needs at least one index");
    for (std::size_t i : e.indices)
        if (i >= family.event_sets()[e.step].size())
            throw ValidationError("event index " + std::to_string(i) + " out of range");
}

inline double conditional_probability(const HistoryFamily& family, const TimeEvent& given,
                                      const TimeEvent& target) {
    require_valid(family, given);
    require_valid(family, target);
    double p_given = 0.0;
    double p_both = 0.0;
    for (const auto& [history, p] : history_probabilities(family)) {
        if (!given.indices.count(history.choice[given.step])) continue;
        p_given += p;
        if (target.indices.count(history.choice[target.step])) p_both += p;
    }
    if (p_given <= 1e-12)
        throw DegenerateInputError("conditioning event has probability " + std::to_string(p_given));
    return p_both / p_given;
}

/// The canonical measurement family: initial [psi] joined with the ready
/// state, nothing happening up to the measured time, the transfer operator
/// across the measurement interval, system properties at the middle time and
/// pointer positions at the final one.
inline HistoryFamily measurement_history_family(const MeasurementModel& model,
                                                const StateVector& psi,
                                                std::string name = "measurement-family") {
    if (psi.dim() != model.dim_s())
        throw ValidationError("state dimension does not match the system");
    const Projector initial =
        Projector(tensor_product(Projector::onto(psi).matrix(), model.ready().matrix()));

    const ComplexMatrix apparatus_identity = ComplexMatrix::identity(model.dim_m());
    std::vector<Projector> lifted;
    for (const Projector& p : model.measured().projectors())
        lifted.emplace_back(tensor_product(p.matrix(), apparatus_identity));
    Decomposition middle(std::move(lifted), model.measured().labels());

    std::vector<ComplexMatrix> steps{ComplexMatrix::identity(model.dim_total()), model.unitary()};
    std::vector<Decomposition> events{std::move(middle), model.pointers()};
    return HistoryFamily(initial, std::move(steps), std::move(events), {}, std::move(name));
}

}  // namespace chsim
