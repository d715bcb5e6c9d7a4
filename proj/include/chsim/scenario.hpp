#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "chsim/chsim.hpp"

namespace chsim {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Canonical JSON: keys sorted (the default object ordering), floats rendered
// with 12 significant digits. Parsing the emitted text and re-serializing it
// reproduces the bytes exactly, which is what golden-file diffs rely on.
// ---------------------------------------------------------------------------

inline void canonical_write(const Json& value, std::string& out, int depth) {
    auto pad = [&out](int d) { out.append(static_cast<std::size_t>(d) * 2, ' '); };
    switch (value.type()) {
        case Json::value_t::object: {
            if (value.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = value.begin(); it != value.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                pad(depth + 1);
                out += Json(it.key()).dump();
                out += ": ";
                canonical_write(it.value(), out, depth + 1);
            }
            out += "\n";
            pad(depth);
            out += "}";
            return;
        }
        case Json::value_t::array: {
            if (value.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const Json& item : value) {
                if (!first) out += ",\n";
                first = false;
                pad(depth + 1);
                canonical_write(item, out, depth + 1);
            }
            out += "\n";
            pad(depth);
            out += "]";
            return;
        }
        case Json::value_t::string:
            out += value.dump();
            return;
        case Json::value_t::boolean:
            out += value.get<bool>() ? "true" : "false";
            return;
        case Json::value_t::number_integer:
            out += std::to_string(value.get<std::int64_t>());
            return;
        case Json::value_t::number_unsigned:
            out += std::to_string(value.get<std::uint64_t>());
            return;
        case Json::value_t::number_float: {
            const double d = value.get<double>();
            if (!std::isfinite(d)) throw NumericError("non-finite number in report");
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.12g", d);
            out += buf;
            return;
        }
        default:
            out += "null";
            return;
    }
}

inline std::string canonical_dump(const Json& value) {
    std::string out;
    canonical_write(value, out, 0);
    out += "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class Status { pass, fail, violation, error };

inline const char* status_name(Status s) {
    switch (s) {
        case Status::pass: return "pass";
        case Status::fail: return "fail";
        case Status::violation: return "violation";
        default: return "error";
    }
}

/// Exit-code contract: 0 pass; 2 physics-level violation or failed check;
/// 3 validation/schema error; 4 numeric or capacity error.
struct Report {
    std::string scenario_id;
    Status status = Status::pass;
    std::map<std::string, double> metrics;
    std::vector<std::string> narratives;
    int exit_code = 0;

    Json to_json() const {
        Json j;
        j["scenario_id"] = scenario_id;
        j["status"] = status_name(status);
        Json m = Json::object();
        for (const auto& [key, v] : metrics) m[key] = v;
        j["metrics"] = m;
        j["narratives"] = narratives;
        return j;
    }

    std::string to_text() const {
        std::size_t width = 0;
        for (const auto& [key, v] : metrics) width = std::max(width, key.size());
        std::string out;
        out += "scenario  " + scenario_id + "\n";
        out += "status    " + std::string(status_name(status)) + "\n";
        for (const auto& [key, v] : metrics) {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.12g", v);
            out += "  " + key + std::string(width - key.size() + 2, ' ') + buf + "\n";
        }
        for (const std::string& n : narratives) out += "  - " + n + "\n";
        return out;
    }
};

struct RunOptions {
    double tolerance = tol::calibration;  // report-level pass threshold only
    std::uint64_t seed = 0;
    int max_dim = tol::max_total_dim;
};

// ---------------------------------------------------------------------------
// Payload parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline Complex parse_complex(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ValidationError(where + ": complex entries are [re, im] number pairs");
    return {j[0].get<double>(), j[1].get<double>()};
}

inline ComplexMatrix parse_matrix(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": matrix must be a nonempty array of rows");
    const std::size_t dim = j.size();
    std::vector<Complex> entries;
    entries.reserve(dim * dim);
    for (std::size_t r = 0; r < dim; ++r) {
        if (!j[r].is_array() || j[r].size() != dim)
            throw ValidationError(where + ": row " + std::to_string(r) + " must have " +
                                  std::to_string(dim) + " entries");
        for (std::size_t c = 0; c < dim; ++c)
            entries.push_back(parse_complex(j[r][c], where + "[" + std::to_string(r) + "][" +
                                                         std::to_string(c) + "]"));
    }
    return ComplexMatrix(static_cast<int>(dim), std::move(entries));
}

inline StateVector parse_state_vector(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": state must be a nonempty array of [re, im] pairs");
    std::vector<Complex> amps;
    amps.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        amps.push_back(parse_complex(j[i], where + "[" + std::to_string(i) + "]"));
    return StateVector(std::move(amps));
}

inline ComplexMatrix named_operator(const std::string& name, const std::string& where) {
    if (name == "spin_half_sx") {
        ComplexMatrix m(2);
        m(0, 1) = 0.5;
        m(1, 0) = 0.5;
        return m;
    }
    if (name == "spin_half_sz") return ComplexMatrix::diagonal({0.5, -0.5});
    if (name.rfind("diag:", 0) == 0) {
        Json values = Json::parse(name.substr(5), nullptr, false);
        if (values.is_discarded() || !values.is_array() || values.empty())
            throw ValidationError(where + ": 'diag:' needs a JSON array of numbers");
        std::vector<double> d;
        for (const Json& v : values) {
            if (!v.is_number()) throw ValidationError(where + ": 'diag:' entries must be numbers");
            d.push_back(v.get<double>());
        }
        return ComplexMatrix::diagonal(d);
    }
    throw ValidationError(where + ": unknown named constructor '" + name + "'");
}

inline Observable parse_observable(const Json& j, const std::string& where) {
    if (j.is_string()) return spectral_decompose(named_operator(j.get<std::string>(), where));
    if (j.is_object()) {
        if (j.contains("matrix")) return spectral_decompose(parse_matrix(j["matrix"], where + ".matrix"));
        if (j.contains("eigenvalues") && j.contains("projectors")) {
            if (!j["eigenvalues"].is_array())
                throw ValidationError(where + ".eigenvalues: expected an array of numbers");
            std::vector<double> values;
            for (const Json& v : j["eigenvalues"]) {
                if (!v.is_number()) throw ValidationError(where + ".eigenvalues: entries must be numbers");
                values.push_back(v.get<double>());
            }
            std::vector<Projector> projectors;
            if (!j["projectors"].is_array())
                throw ValidationError(where + ".projectors: expected an array of matrices");
            for (std::size_t k = 0; k < j["projectors"].size(); ++k)
                projectors.emplace_back(
                    parse_matrix(j["projectors"][k], where + ".projectors[" + std::to_string(k) + "]"));
            return Observable(std::move(values), Decomposition(std::move(projectors)));
        }
    }
    throw ValidationError(where + ": expected a named constructor, {matrix}, or {eigenvalues, projectors}");
}

/// A ray is an array of amplitudes, each either a plain real number or an
/// [re, im] pair.
inline StateVector parse_ray(const Json& j, const std::string& where) {
    if (!j.is_array() || j.empty())
        throw ValidationError(where + ": ray must be a nonempty array of amplitudes");
    std::vector<Complex> amps;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Json& entry = j[i];
        if (entry.is_number())
            amps.emplace_back(entry.get<double>(), 0.0);
        else
            amps.push_back(parse_complex(entry, where + "[" + std::to_string(i) + "]"));
    }
    return StateVector(std::move(amps));
}

inline Decomposition parse_decomposition(const Json& j, const std::string& where) {
    if (j.is_string())
        return spectral_decompose(named_operator(j.get<std::string>(), where)).decomposition();
    if (j.is_object()) {
        if (j.contains("rays")) {
            if (!j["rays"].is_array() || j["rays"].empty())
                throw ValidationError(where + ".rays: expected a nonempty array of vectors");
            std::vector<Projector> projectors;
            for (std::size_t k = 0; k < j["rays"].size(); ++k)
                projectors.push_back(Projector::onto(
                    parse_ray(j["rays"][k], where + ".rays[" + std::to_string(k) + "]")));
            return Decomposition(std::move(projectors));
        }
        if (j.contains("projectors")) {
            if (!j["projectors"].is_array() || j["projectors"].empty())
                throw ValidationError(where + ".projectors: expected a nonempty array of matrices");
            std::vector<Projector> projectors;
            for (std::size_t k = 0; k < j["projectors"].size(); ++k)
                projectors.emplace_back(
                    parse_matrix(j["projectors"][k], where + ".projectors[" + std::to_string(k) + "]"));
            std::vector<std::string> labels;
            if (j.contains("labels")) {
                if (!j["labels"].is_array())
                    throw ValidationError(where + ".labels: expected an array of strings");
                for (const Json& l : j["labels"]) {
                    if (!l.is_string()) throw ValidationError(where + ".labels: entries must be strings");
                    labels.push_back(l.get<std::string>());
                }
            }
            return Decomposition(std::move(projectors), std::move(labels));
        }
        if (j.contains("matrix"))
            return spectral_decompose(parse_matrix(j["matrix"], where + ".matrix")).decomposition();
    }
    throw ValidationError(where + ": expected a named constructor, {projectors}, or {matrix}");
}

/// A prepared property: an explicit state (its ray), an explicit projector,
/// or "random" for a seeded Haar-like state of the expected dimension.
inline Projector parse_preparation(const Json& j, int expected_dim, const std::string& where,
                                   const RunOptions& options) {
    if (j.is_string() && j.get<std::string>() == "random") {
        Rng rng(options.seed);
        return Projector::onto(random_state(expected_dim, rng));
    }
    if (j.is_array()) {  // bare amplitude list
        return Projector::onto(parse_state_vector(j, where));
    }
    if (j.is_object()) {
        if (j.contains("state")) return Projector::onto(parse_state_vector(j["state"], where + ".state"));
        if (j.contains("projector")) return Projector(parse_matrix(j["projector"], where + ".projector"));
    }
    throw ValidationError(where + ": expected {state}, {projector}, an amplitude array, or \"random\"");
}

enum class FieldKind { integer, number, boolean, array, string, object, operand, any };

struct FieldRule {
    const char* name;
    FieldKind kind;
    bool required;
};

inline void check_fields(const Json& payload, const std::vector<FieldRule>& rules,
                         std::vector<std::string>& issues) {
    for (const FieldRule& rule : rules) {
        if (!payload.contains(rule.name)) {
            if (rule.required) issues.push_back(std::string("payload.") + rule.name + ": missing");
            continue;
        }
        const Json& v = payload[rule.name];
        bool ok = true;
        switch (rule.kind) {
            case FieldKind::integer: ok = v.is_number_integer() || v.is_number_unsigned(); break;
            case FieldKind::number: ok = v.is_number(); break;
            case FieldKind::boolean: ok = v.is_boolean(); break;
            case FieldKind::array: ok = v.is_array(); break;
            case FieldKind::string: ok = v.is_string(); break;
            case FieldKind::object: ok = v.is_object(); break;
            case FieldKind::operand: ok = v.is_object() || v.is_string() || v.is_array(); break;
            case FieldKind::any: break;
        }
        if (!ok)
            issues.push_back(std::string("payload.") + rule.name + ": wrong type");
    }
}

inline void raise_schema_errors(const std::vector<std::string>& issues) {
    if (issues.empty()) return;
    std::string msg = "schema mismatch:";
    for (const std::string& i : issues) msg += " [" + i + "]";
    throw ValidationError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario handlers, one per kind
// ---------------------------------------------------------------------------

namespace detail {

inline Report handle_measurement(const Json& payload, Report report, const RunOptions& options) {
    std::vector<std::string> issues;
    check_fields(payload,
                 {{"measured", FieldKind::operand, true},
                  {"dim_m", FieldKind::integer, true},
                  {"ready_rank", FieldKind::integer, false},
                  {"prepare", FieldKind::operand, true},
                  {"outcome_set", FieldKind::array, false}},
                 issues);
    raise_schema_errors(issues);

    const Decomposition measured = parse_decomposition(payload["measured"], "payload.measured");
    const int dim_m = payload["dim_m"].get<int>();
    const int ready_rank = payload.value("ready_rank", 1);
    const MeasurementModel model =
        build_pointer_model(measured, dim_m, ready_rank, "pi", options.max_dim);
    const Projector prepared =
        parse_preparation(payload["prepare"], model.dim_s(), "payload.prepare", options);

    const CalibrationReport cal = verify_calibration(model);
    report.metrics["calibration_max_violation"] = cal.max_violation;

    const OutcomeDistribution dist = born_probabilities(model, prepared);
    double sum = 0.0;
    for (const auto& [label, p] : dist.entries()) {
        report.metrics["prob_" + label] = p;
        sum += p;
    }
    report.metrics["probability_sum"] = sum;

    if (payload.contains("outcome_set")) {
        std::set<std::string> labels;
        for (const Json& l : payload["outcome_set"]) {
            if (!l.is_string())
                throw ValidationError("payload.outcome_set: entries must be pointer labels");
            labels.insert(l.get<std::string>());
        }
        report.metrics["outcome_set_probability"] = dist.sum_over(labels);
    }

    report.narratives.push_back("pointer model: " + std::to_string(measured.size()) +
                                " outcomes, system dim " + std::to_string(model.dim_s()) +
                                ", apparatus dim " + std::to_string(model.dim_m()));
    const bool ok = cal.max_violation <= options.tolerance && std::abs(sum - 1.0) <= options.tolerance;
    report.status = ok ? Status::pass : Status::fail;
    report.exit_code = ok ? 0 : 2;
    return report;
}

inline Report handle_joint_measurement(const Json& payload, Report report, const RunOptions& options) {
    std::vector<std::string> issues;
    check_fields(payload,
                 {{"a", FieldKind::operand, true},
                  {"b", FieldKind::operand, true},
                  {"dim_m", FieldKind::integer, true},
                  {"ready_rank", FieldKind::integer, false},
                  {"prepare", FieldKind::operand, false},
                  {"coarse", FieldKind::object, false}},
                 issues);
    raise_schema_errors(issues);

    const Observable a = parse_observable(payload["a"], "payload.a");
    const Observable b = parse_observable(payload["b"], "payload.b");
    const int dim_m = payload["dim_m"].get<int>();
    const int ready_rank = payload.value("ready_rank", 1);

    const Refinement refinement = common_refinement(a, b);
    report.metrics["refinement_size"] = static_cast<double>(refinement.size());
    ComplexMatrix rebuild_a = ComplexMatrix::zero(a.dim());
    ComplexMatrix rebuild_b = ComplexMatrix::zero(a.dim());
    for (std::size_t j = 0; j < refinement.size(); ++j) {
        rebuild_a += Complex{refinement.values_a[j], 0.0} * refinement.decomposition[j].matrix();
        rebuild_b += Complex{refinement.values_b[j], 0.0} * refinement.decomposition[j].matrix();
    }
    const double err_a = frobenius_distance(rebuild_a, a.matrix());
    const double err_b = frobenius_distance(rebuild_b, b.matrix());
    report.metrics["reconstruct_a_error"] = err_a;
    report.metrics["reconstruct_b_error"] = err_b;

    const MeasurementModel model = build_joint_model(a, b, dim_m, ready_rank, options.max_dim);
    const CalibrationReport cal = verify_calibration(model);
    report.metrics["calibration_max_violation"] = cal.max_violation;

    bool ok = cal.max_violation <= options.tolerance && err_a <= options.tolerance &&
              err_b <= options.tolerance;

    if (payload.contains("prepare")) {
        const Projector prepared =
            parse_preparation(payload["prepare"], model.dim_s(), "payload.prepare", options);
        const OutcomeDistribution dist = born_probabilities(model, prepared);
        for (const auto& [label, p] : dist.entries()) report.metrics["prob_" + label] = p;
        for (const auto& [value, p] : value_marginal(model, dist))
            report.metrics["marginal_a_" + format_value(value)] = p;
    }

    if (payload.contains("coarse")) {
        const Json& coarse = payload["coarse"];
        if (!coarse.contains("a_index") || !coarse["a_index"].is_number_integer())
            throw ValidationError("payload.coarse.a_index: missing or wrong type");
        const std::size_t a_index = coarse["a_index"].get<std::size_t>();
        if (a_index >= a.size()) throw ValidationError("payload.coarse.a_index: out of range");
        ComplexMatrix sum = ComplexMatrix::zero(a.dim());
        std::set<std::string> labels;
        for (std::size_t j = 0; j < refinement.size(); ++j)
            if (refinement.parent_a_index[j] == a_index) {
                sum += refinement.decomposition[j].matrix();
                labels.insert(model.pointer_info()[j].label);
            }
        const double p = coarse_outcome_probability(model, Projector(std::move(sum)), labels);
        report.metrics["coarse_probability"] = p;
        ok = ok && std::abs(p - 1.0) <= options.tolerance;
    }

    report.narratives.push_back("joint apparatus over " + std::to_string(refinement.size()) +
                                " refinement cells");
    report.status = ok ? Status::pass : Status::fail;
    report.exit_code = ok ? 0 : 2;
    return report;
}

inline Report handle_noncontextuality(const Json& payload, Report report, const RunOptions& options) {
    std::vector<std::string> issues;
    check_fields(payload,
                 {{"a", FieldKind::operand, true},
                  {"b", FieldKind::operand, true},
                  {"c", FieldKind::operand, true},
                  {"dim_m", FieldKind::integer, true},
                  {"ready_rank", FieldKind::integer, false},
                  {"prepare", FieldKind::operand, true},
                  {"pivot_index", FieldKind::integer, false}},
                 issues);
    raise_schema_errors(issues);

    const Observable a = parse_observable(payload["a"], "payload.a");
    const Observable b = parse_observable(payload["b"], "payload.b");
    const Observable c = parse_observable(payload["c"], "payload.c");
    const int dim_m = payload["dim_m"].get<int>();
    const int ready_rank = payload.value("ready_rank", 1);
    const Projector prepared = parse_preparation(payload["prepare"], a.dim(), "payload.prepare", options);

    const NoncontextualityReport check =
        noncontextuality_check(a, b, c, prepared, dim_m, ready_rank);
    report.metrics["marginal_difference_max"] = check.max_difference;
    for (const auto& [value, p] : check.marginal_with_b)
        report.metrics["marginal_with_b_" + format_value(value)] = p;
    for (const auto& [value, p] : check.marginal_with_c)
        report.metrics["marginal_with_c_" + format_value(value)] = p;

    bool ok = check.max_difference <= options.tolerance;

    if (payload.contains("pivot_index")) {
        const std::size_t pivot_index = payload["pivot_index"].get<std::size_t>();
        if (pivot_index >= a.size()) throw ValidationError("payload.pivot_index: out of range");
        const MeasurementModel actual = build_joint_model(a, b, dim_m, ready_rank);
        const MeasurementModel counterfactual = build_joint_model(a, c, dim_m, ready_rank);
        const double p =
            counterfactual_pivot(actual, counterfactual, a.decomposition()[pivot_index]);
        report.metrics["pivot_probability"] = p;
        ok = ok && std::abs(p - 1.0) <= options.tolerance;
    }

    report.narratives.push_back("same-value marginals compared across the two joint apparatuses");
    report.status = ok ? Status::pass : Status::fail;
    report.exit_code = ok ? 0 : 2;
    return report;
}

inline HistoryFamily parse_history_family(const Json& payload, const RunOptions& options) {
    if (payload.contains("measurement")) {
        const Json& m = payload["measurement"];
        std::vector<std::string> issues;
        check_fields(m,
                     {{"measured", FieldKind::operand, true},
                      {"dim_m", FieldKind::integer, true},
                      {"ready_rank", FieldKind::integer, false}},
                     issues);
        if (!payload.contains("state") || !payload["state"].is_array())
            issues.push_back("payload.state: missing or wrong type");
        raise_schema_errors(issues);
        const Decomposition measured = parse_decomposition(m["measured"], "payload.measurement.measured");
        const MeasurementModel model = build_pointer_model(
            measured, m["dim_m"].get<int>(), m.value("ready_rank", 1), "pi", options.max_dim);
        return measurement_history_family(
            model, parse_state_vector(payload["state"], "payload.state"));
    }

    std::vector<std::string> issues;
    check_fields(payload,
                 {{"initial", FieldKind::operand, true},
                  {"steps", FieldKind::array, true},
                  {"events", FieldKind::array, true}},
                 issues);
    raise_schema_errors(issues);

    std::vector<Decomposition> events;
    for (std::size_t k = 0; k < payload["events"].size(); ++k)
        events.push_back(
            parse_decomposition(payload["events"][k], "payload.events[" + std::to_string(k) + "]"));
    if (events.empty()) throw ValidationError("payload.events: needs at least one event time");
    const int dim = events.front().dim();

    const Projector initial = parse_preparation(payload["initial"], dim, "payload.initial", options);

    std::vector<ComplexMatrix> steps;
    for (std::size_t k = 0; k < payload["steps"].size(); ++k) {
        const Json& s = payload["steps"][k];
        if (s.is_string() && s.get<std::string>() == "identity")
            steps.push_back(ComplexMatrix::identity(dim));
        else
            steps.push_back(parse_matrix(s, "payload.steps[" + std::to_string(k) + "]"));
    }
    return HistoryFamily(initial, std::move(steps), std::move(events));
}

inline TimeEvent parse_time_event(const Json& j, const HistoryFamily& family, const std::string& where) {
    if (!j.is_object() || !j.contains("time") || !j["time"].is_number_integer() ||
        !j.contains("indices") || !j["indices"].is_array())
        throw ValidationError(where + ": expected {time, indices}");
    const long long time = j["time"].get<long long>();
    if (time < 1 || static_cast<std::size_t>(time) > family.event_sets().size())
        throw ValidationError(where + ".time: out of range (1-based event time)");
    std::set<std::size_t> indices;
    for (const Json& i : j["indices"]) {
        if (!i.is_number_integer()) throw ValidationError(where + ".indices: entries must be integers");
        indices.insert(i.get<std::size_t>());
    }
    TimeEvent event{static_cast<std::size_t>(time - 1), std::move(indices)};
    require_valid(family, event);
    return event;
}

inline std::string history_key(const History& h) {
    std::string key;
    for (std::size_t k = 0; k < h.choice.size(); ++k) {
        if (k) key += "_";
        key += std::to_string(h.choice[k]);
    }
    return key;
}

inline Report handle_histories(const Json& payload, Report report, const RunOptions& options) {
    const HistoryFamily family = parse_history_family(payload, options);
    report.metrics["history_count"] = static_cast<double>(family.history_count());

    const ConsistencyReport consistency = is_consistent(family);
    report.metrics["max_off_diagonal"] = consistency.max_off_diagonal;
    if (!consistency.consistent) {
        report.status = Status::violation;
        report.exit_code = 2;
        report.narratives.push_back("family is inconsistent; the extended rule assigns no probabilities");
        return report;
    }

    for (const auto& [history, p] : history_probabilities(family))
        report.metrics["prob_h" + history_key(history)] = p;

    if (payload.contains("conditionals")) {
        if (!payload["conditionals"].is_array())
            throw ValidationError("payload.conditionals: expected an array");
        for (std::size_t k = 0; k < payload["conditionals"].size(); ++k) {
            const Json& c = payload["conditionals"][k];
            const std::string where = "payload.conditionals[" + std::to_string(k) + "]";
            if (!c.is_object() || !c.contains("name") || !c["name"].is_string() ||
                !c.contains("given") || !c.contains("target"))
                throw ValidationError(where + ": expected {name, given, target}");
            const TimeEvent given = parse_time_event(c["given"], family, where + ".given");
            const TimeEvent target = parse_time_event(c["target"], family, where + ".target");
            report.metrics["cond_" + c["name"].get<std::string>()] =
                conditional_probability(family, given, target);
        }
    }

    report.narratives.push_back("family is consistent; probabilities from the extended rule");
    report.status = Status::pass;
    report.exit_code = 0;
    return report;
}

inline Report handle_valuation(const Json& payload, Report report, const RunOptions&) {
    std::vector<std::string> issues;
    check_fields(payload,
                 {{"contexts", FieldKind::array, true}, {"expect_colorable", FieldKind::boolean, false}},
                 issues);
    raise_schema_errors(issues);

    std::vector<Decomposition> contexts;
    for (std::size_t k = 0; k < payload["contexts"].size(); ++k)
        contexts.push_back(
            parse_decomposition(payload["contexts"][k], "payload.contexts[" + std::to_string(k) + "]"));

    const DetectionResult detection = detect_shared_projectors(contexts);
    report.metrics["identifier_count"] = static_cast<double>(detection.problem.identifier_count());
    report.metrics["context_count"] = static_cast<double>(detection.problem.context_count());
    report.metrics["bridge_count"] = static_cast<double>(detection.bridges.size());
    report.metrics["noncommuting_context_pairs"] = static_cast<double>(detection.noncommuting.size());

    const SearchResult result = search_valuation(detection.problem);
    report.metrics["found"] = result.valuation ? 1.0 : 0.0;
    report.metrics["nodes_examined"] = static_cast<double>(result.nodes_examined);
    report.metrics["branches_pruned"] = static_cast<double>(result.branches_pruned);

    if (result.valuation) {
        std::string witness = "witness:";
        for (const auto& [id, v] : result.valuation->assignment)
            witness += " " + id + "=" + std::to_string(v);
        report.narratives.push_back(witness);
    } else {
        report.narratives.push_back("no noncontextual valuation exists; search exhausted after " +
                                    std::to_string(result.nodes_examined) + " assignments");
    }

    bool ok = true;
    if (payload.contains("expect_colorable"))
        ok = payload["expect_colorable"].get<bool>() == result.valuation.has_value();
    report.status = ok ? Status::pass : Status::fail;
    report.exit_code = ok ? 0 : 2;
    return report;
}

inline Report handle_framework_combine(const Json& payload, Report report, const RunOptions&) {
    std::vector<std::string> issues;
    check_fields(payload,
                 {{"f1", FieldKind::operand, true},
                  {"f2", FieldKind::operand, true},
                  {"state", FieldKind::array, false},
                  {"event", FieldKind::object, false}},
                 issues);
    raise_schema_errors(issues);

    const Framework f1(parse_decomposition(payload["f1"], "payload.f1"), "f1");
    const Framework f2(parse_decomposition(payload["f2"], "payload.f2"), "f2");

    const CombineResult combined = combine_frameworks(f1, f2);
    if (const auto* violation = std::get_if<SingleFrameworkViolation>(&combined)) {
        report.metrics["compatible"] = 0.0;
        report.metrics["commutator_norm"] = violation->commutator_norm;
        report.narratives.push_back("single framework rule: projector '" + violation->label_f1 +
                                    "' of f1 does not commute with '" + violation->label_f2 +
                                    "' of f2; no merged description exists");
        report.status = Status::violation;
        report.exit_code = 2;
        return report;
    }

    const Framework& merged = std::get<Framework>(combined);
    report.metrics["compatible"] = 1.0;
    report.metrics["refined_size"] = static_cast<double>(merged.size());

    if (payload.contains("state") && payload.contains("event")) {
        const Json& e = payload["event"];
        if (!e.contains("of") || !e["of"].is_string() || !e.contains("indices") ||
            !e["indices"].is_array())
            throw ValidationError("payload.event: expected {of, indices}");
        const std::string of = e["of"].get<std::string>();
        const Framework* target = of == "f1" ? &f1 : of == "f2" ? &f2 : of == "combined" ? &merged : nullptr;
        if (!target) throw ValidationError("payload.event.of: expected f1, f2, or combined");
        std::set<std::size_t> indices;
        for (const Json& i : e["indices"]) {
            if (!i.is_number_integer())
                throw ValidationError("payload.event.indices: entries must be integers");
            indices.insert(i.get<std::size_t>());
        }
        const StateVector state = parse_state_vector(payload["state"], "payload.state");
        report.metrics["event_probability"] =
            event_probability(*target, state, Event(*target, std::move(indices)));
    }

    report.narratives.push_back("frameworks combined through their common refinement");
    report.status = Status::pass;
    report.exit_code = 0;
    return report;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

inline Report run_scenario_json(const Json& doc, const std::string& scenario_id,
                                const RunOptions& options = {}) {
    Report report;
    report.scenario_id = scenario_id;
    try {
        std::vector<std::string> issues;
        if (!doc.is_object()) issues.push_back("document: expected a JSON object");
        if (doc.is_object()) {
            if (!doc.contains("version") || !doc["version"].is_number_integer())
                issues.push_back("version: missing or wrong type");
            else if (doc["version"].get<int>() != 1)
                issues.push_back("version: expected 1");
            if (!doc.contains("kind") || !doc["kind"].is_string())
                issues.push_back("kind: missing or wrong type");
            if (!doc.contains("payload") || !doc["payload"].is_object())
                issues.push_back("payload: missing or wrong type");
        }
        detail::raise_schema_errors(issues);

        const std::string kind = doc["kind"].get<std::string>();
        const Json& payload = doc["payload"];
        if (doc.contains("id") && doc["id"].is_string())
            report.scenario_id = doc["id"].get<std::string>();
        else if (payload.contains("id") && payload["id"].is_string())
            report.scenario_id = payload["id"].get<std::string>();

        if (kind == "measurement") return detail::handle_measurement(payload, report, options);
        if (kind == "joint-measurement")
            return detail::handle_joint_measurement(payload, report, options);
        if (kind == "noncontextuality")
            return detail::handle_noncontextuality(payload, report, options);
        if (kind == "histories") return detail::handle_histories(payload, report, options);
        if (kind == "valuation") return detail::handle_valuation(payload, report, options);
        if (kind == "framework-combine")
            return detail::handle_framework_combine(payload, report, options);
        throw ValidationError("kind: unknown scenario kind '" + kind + "'");
    } catch (const Error& e) {
        report.narratives.push_back(e.what());
        switch (e.kind()) {
            case ErrorKind::incompatibility:
            case ErrorKind::consistency:
                report.status = Status::violation;
                report.exit_code = 2;
                break;
            case ErrorKind::validation:
                report.status = Status::error;
                report.exit_code = 3;
                break;
            default:
                report.status = Status::error;
                report.exit_code = 4;
                break;
        }
    } catch (const Json::exception& e) {
        report.narratives.push_back(std::string("json error: ") + e.what());
        report.status = Status::error;
        report.exit_code = 3;
    } catch (const std::exception& e) {
        report.narratives.push_back(std::string("internal error: ") + e.what());
        report.status = Status::error;
        report.exit_code = 4;
    }
    return report;
}

inline Report run_scenario(const std::filesystem::path& path, const RunOptions& options = {}) {
    Report report;
    report.scenario_id = path.stem().string();
    std::ifstream in(path);
    if (!in) {
        report.status = Status::error;
        report.exit_code = 3;
        report.narratives.push_back("cannot read scenario file: " + path.string());
        return report;
    }
    Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded()) {
        report.status = Status::error;
        report.exit_code = 3;
        report.narratives.push_back("scenario file is not valid JSON: " + path.string());
        return report;
    }
    return run_scenario_json(doc, report.scenario_id, options);
}

struct BatchResult {
    std::vector<Report> reports;  // input order
    int exit_code = 0;

    Json to_json() const {
        int pass = 0, fail = 0, violation = 0, errors = 0;
        Json list = Json::array();
        for (const Report& r : reports) {
            list.push_back(r.to_json());
            switch (r.status) {
                case Status::pass: ++pass; break;
                case Status::fail: ++fail; break;
                case Status::violation: ++violation; break;
                case Status::error: ++errors; break;
            }
        }
        Json j;
        j["aggregate"] = Json{{"pass", pass},
                              {"fail", fail},
                              {"violation", violation},
                              {"error", errors},
                              {"total", static_cast<int>(reports.size())}};
        j["reports"] = list;
        return j;
    }
};

/// Run scenarios independently; results are keyed by input order, so the
/// output is byte-identical at any parallelism.
inline BatchResult run_batch(const std::vector<std::filesystem::path>& paths, int parallelism,
                             const RunOptions& options = {}) {
    if (paths.empty()) throw ValidationError("batch needs at least one scenario path");
    if (parallelism < 1) parallelism = 1;
    BatchResult result;
    result.reports.resize(paths.size());
    if (parallelism == 1) {
        for (std::size_t i = 0; i < paths.size(); ++i)
            result.reports[i] = run_scenario(paths[i], options);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            for (std::size_t i = next.fetch_add(1); i < paths.size(); i = next.fetch_add(1))
                result.reports[i] = run_scenario(paths[i], options);
        };
        std::vector<std::thread> threads;
        const int count = std::min<int>(parallelism, static_cast<int>(paths.size()));
        threads.reserve(static_cast<std::size_t>(count));
        for (int t = 0; t < count; ++t) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    for (const Report& r : result.reports) result.exit_code = std::max(result.exit_code, r.exit_code);
    return result;
}

/// The shipped scenario files of a fixture directory, sorted by filename.
inline std::vector<std::filesystem::path> suite_paths(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> paths;
    if (!std::filesystem::is_directory(dir)) return paths;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    return paths;
}

}  // namespace chsim
