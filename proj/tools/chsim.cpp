#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chsim/scenario.hpp"

namespace fs = std::filesystem;
using chsim::Json;

namespace {

struct CommonOptions {
    bool json = false;
    double tolerance = chsim::tol::calibration;
    std::uint64_t seed = 0;
    int max_dim = chsim::tol::max_total_dim;

    chsim::RunOptions run_options() const { return {tolerance, seed, max_dim}; }
};

void add_common(CLI::App* cmd, CommonOptions& common) {
    cmd->add_flag("--json", common.json, "emit canonical JSON instead of aligned text");
    cmd->add_option("--tolerance", common.tolerance,
                    "pass/fail threshold for report-level checks (never loosens type invariants)");
    cmd->add_option("--seed", common.seed, "seed for generated-corpus scenarios");
    cmd->add_option("--max-dim", common.max_dim, "maximum combined Hilbert-space dimension");
}

int code_for(chsim::ErrorKind kind) {
    switch (kind) {
        case chsim::ErrorKind::incompatibility:
        case chsim::ErrorKind::consistency:
            return 2;
        case chsim::ErrorKind::validation:
            return 3;
        default:
            return 4;
    }
}

void print_doc(const Json& doc, bool json) {
    if (json) {
        std::cout << chsim::canonical_dump(doc);
        return;
    }
    // Aligned text rendering of a flat-ish document.
    std::function<void(const Json&, int)> render = [&](const Json& v, int depth) {
        const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
        if (v.is_object()) {
            std::size_t width = 0;
            for (auto it = v.begin(); it != v.end(); ++it) width = std::max(width, it.key().size());
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (it.value().is_object() || it.value().is_array()) {
                    std::cout << pad << it.key() << ":\n";
                    render(it.value(), depth + 1);
                } else {
                    std::string scalar;
                    chsim::canonical_write(it.value(), scalar, 0);
                    std::cout << pad << it.key() << std::string(width - it.key().size() + 2, ' ')
                              << scalar << "\n";
                }
            }
        } else if (v.is_array()) {
            for (const Json& item : v) {
                if (item.is_object() || item.is_array()) {
                    std::cout << pad << "-\n";
                    render(item, depth + 1);
                } else {
                    std::string scalar;
                    chsim::canonical_write(item, scalar, 0);
                    std::cout << pad << "- " << scalar << "\n";
                }
            }
        }
    };
    render(doc, 0);
}

/// Run a dump-style command body with the library's error-to-exit-code map.
template <typename Fn>
int guarded(const CommonOptions& common, const std::string& id, Fn&& body) {
    try {
        return body();
    } catch (const chsim::Error& e) {
        Json doc{{"scenario_id", id}, {"status", "error"}, {"narratives", Json::array({e.what()})}};
        const int code = code_for(e.kind());
        if (code == 2) doc["status"] = "violation";
        print_doc(doc, common.json);
        return code;
    } catch (const Json::exception& e) {
        Json doc{{"scenario_id", id},
                 {"status", "error"},
                 {"narratives", Json::array({std::string("json error: ") + e.what()})}};
        print_doc(doc, common.json);
        return 3;
    } catch (const std::exception& e) {
        Json doc{{"scenario_id", id},
                 {"status", "error"},
                 {"narratives", Json::array({std::string("internal error: ") + e.what()})}};
        print_doc(doc, common.json);
        return 4;
    }
}

Json load_scenario(const fs::path& path, const std::string& expected_kind) {
    std::ifstream in(path);
    if (!in) throw chsim::ValidationError("cannot read scenario file: " + path.string());
    Json doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded())
        throw chsim::ValidationError("scenario file is not valid JSON: " + path.string());
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string() ||
        !doc.contains("payload") || !doc["payload"].is_object())
        throw chsim::ValidationError("schema mismatch: [kind: missing or wrong type] "
                                     "[payload: missing or wrong type]");
    if (doc.value("version", 0) != 1) throw chsim::ValidationError("schema mismatch: [version: expected 1]");
    const std::string kind = doc["kind"].get<std::string>();
    if (!expected_kind.empty() && kind != expected_kind)
        throw chsim::ValidationError("expected a '" + expected_kind + "' scenario, got '" + kind + "'");
    return doc;
}

int cmd_run(const fs::path& path, const CommonOptions& common) {
    const chsim::Report report = chsim::run_scenario(path, common.run_options());
    if (common.json)
        std::cout << chsim::canonical_dump(report.to_json());
    else
        std::cout << report.to_text();
    return report.exit_code;
}

int cmd_batch(std::vector<fs::path> paths, int parallelism, const CommonOptions& common) {
    if (paths.empty()) {
        const char* fixtures = std::getenv("CHSIM_FIXTURES");
        if (fixtures != nullptr) paths = chsim::suite_paths(fixtures);
        if (paths.empty()) {
            std::cerr << "batch: no scenario paths given and CHSIM_FIXTURES provided none\n";
            return 3;
        }
    }
    const chsim::BatchResult result = chsim::run_batch(paths, parallelism, common.run_options());
    if (common.json) {
        std::cout << chsim::canonical_dump(result.to_json());
    } else {
        for (const chsim::Report& r : result.reports) std::cout << r.to_text() << "\n";
        int pass = 0;
        for (const chsim::Report& r : result.reports) pass += r.status == chsim::Status::pass;
        std::cout << "total " << result.reports.size() << ", pass " << pass << ", exit "
                  << result.exit_code << "\n";
    }
    return result.exit_code;
}

int cmd_calibrate(const fs::path& path, const CommonOptions& common) {
    const std::string id = path.stem().string();
    return guarded(common, id, [&]() {
        const Json doc = load_scenario(path, "");
        const std::string kind = doc["kind"].get<std::string>();
        const Json& payload = doc["payload"];
        std::optional<chsim::MeasurementModel> model;
        if (kind == "measurement") {
            const chsim::Decomposition measured =
                chsim::detail::parse_decomposition(payload.at("measured"), "payload.measured");
            model = chsim::build_pointer_model(measured, payload.at("dim_m").get<int>(),
                                               payload.value("ready_rank", 1), "pi", common.max_dim);
        } else if (kind == "joint-measurement") {
            model = chsim::build_joint_model(
                chsim::detail::parse_observable(payload.at("a"), "payload.a"),
                chsim::detail::parse_observable(payload.at("b"), "payload.b"),
                payload.at("dim_m").get<int>(), payload.value("ready_rank", 1), common.max_dim);
        } else {
            throw chsim::ValidationError("calibrate expects a measurement or joint-measurement scenario");
        }
        const chsim::CalibrationReport cal = chsim::verify_calibration(*model);
        const bool pass = cal.max_violation <= common.tolerance;
        Json out{{"scenario_id", id},
                 {"status", pass ? "pass" : "fail"},
                 {"max_violation", cal.max_violation},
                 {"worst_measured_index", cal.worst_measured_index},
                 {"worst_pointer_label", cal.worst_pointer_label},
                 {"outcomes", model->measured().size()},
                 {"pointer_labels", [&] {
                      Json labels = Json::array();
                      for (const auto& info : model->pointer_info()) labels.push_back(info.label);
                      return labels;
                  }()}};
        print_doc(out, common.json);
        return pass ? 0 : 2;
    });
}

int cmd_refine(const fs::path& path, const CommonOptions& common) {
    const std::string id = path.stem().string();
    return guarded(common, id, [&]() {
        const Json doc = load_scenario(path, "joint-measurement");
        const Json& payload = doc["payload"];
        const chsim::Observable a = chsim::detail::parse_observable(payload.at("a"), "payload.a");
        const chsim::Observable b = chsim::detail::parse_observable(payload.at("b"), "payload.b");
        const chsim::Refinement refinement = chsim::common_refinement(a, b);
        Json cells = Json::array();
        for (std::size_t j = 0; j < refinement.size(); ++j) {
            cells.push_back(Json{{"label", refinement.decomposition.labels()[j]},
                                 {"rank", refinement.decomposition[j].rank()},
                                 {"value_a", refinement.values_a[j]},
                                 {"value_b", refinement.values_b[j]},
                                 {"parent_a", refinement.parent_a_index[j]},
                                 {"parent_b", refinement.parent_b_index[j]}});
        }
        Json out{{"scenario_id", id},
                 {"status", "pass"},
                 {"refinement_size", refinement.size()},
                 {"cells", cells}};
        print_doc(out, common.json);
        return 0;
    });
}

int cmd_consistency(const fs::path& path, const CommonOptions& common) {
    const std::string id = path.stem().string();
    return guarded(common, id, [&]() {
        const Json doc = load_scenario(path, "histories");
        const chsim::HistoryFamily family =
            chsim::detail::parse_history_family(doc["payload"], common.run_options());
        const chsim::DecoherenceMatrix d = chsim::decoherence_matrix(family);
        Json keys = Json::array();
        for (const chsim::History& h : d.histories()) keys.push_back(chsim::detail::history_key(h));
        Json real_rows = Json::array();
        Json imag_rows = Json::array();
        for (int r = 0; r < d.entries().dim(); ++r) {
            Json re = Json::array();
            Json im = Json::array();
            for (int c = 0; c < d.entries().dim(); ++c) {
                re.push_back(d.entries()(r, c).real());
                im.push_back(d.entries()(r, c).imag());
            }
            real_rows.push_back(re);
            imag_rows.push_back(im);
        }
        const double off = d.max_off_diagonal();
        const bool consistent = off <= common.tolerance;
        Json out{{"scenario_id", id},
                 {"status", consistent ? "pass" : "violation"},
                 {"consistent", consistent},
                 {"max_off_diagonal", off},
                 {"histories", keys},
                 {"matrix_real", real_rows},
                 {"matrix_imag", imag_rows}};
        print_doc(out, common.json);
        return consistent ? 0 : 2;
    });
}

int cmd_valuation(const fs::path& path, const CommonOptions& common) {
    const std::string id = path.stem().string();
    return guarded(common, id, [&]() {
        const Json doc = load_scenario(path, "valuation");
        const Json& payload = doc["payload"];
        if (!payload.contains("contexts") || !payload["contexts"].is_array())
            throw chsim::ValidationError("schema mismatch: [payload.contexts: missing or wrong type]");
        std::vector<chsim::Decomposition> contexts;
        for (std::size_t k = 0; k < payload["contexts"].size(); ++k)
            contexts.push_back(chsim::detail::parse_decomposition(
                payload["contexts"][k], "payload.contexts[" + std::to_string(k) + "]"));
        const chsim::DetectionResult detection = chsim::detect_shared_projectors(contexts);
        const chsim::SearchResult result = chsim::search_valuation(detection.problem);

        Json bridges = Json::array();
        for (const chsim::Bridge& b : detection.bridges)
            bridges.push_back(Json{{"identifier", b.identifier}, {"contexts", b.contexts}});
        Json out{{"scenario_id", id},
                 {"status", "pass"},
                 {"identifier_count", detection.problem.identifier_count()},
                 {"context_count", detection.problem.context_count()},
                 {"bridges", bridges},
                 {"noncommuting_context_pairs", detection.noncommuting.size()},
                 {"found", result.valuation.has_value()},
                 {"nodes_examined", result.nodes_examined},
                 {"branches_pruned", result.branches_pruned}};
        if (result.valuation) {
            Json witness = Json::object();
            for (const auto& [key, v] : result.valuation->assignment) witness[key] = v;
            out["witness"] = witness;
        }
        int code = 0;
        if (payload.contains("expect_colorable") && payload["expect_colorable"].is_boolean() &&
            payload["expect_colorable"].get<bool>() != result.valuation.has_value()) {
            out["status"] = "fail";
            code = 2;
        }
        print_doc(out, common.json);
        return code;
    });
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chsim: projective measurement models, history families, and "
                 "noncontextual valuations at desk scale"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string path;
    std::vector<std::string> batch_paths;
    int parallelism = 1;

    CLI::App* run = app.add_subcommand("run", "run one scenario file and report");
    run->add_option("path", path, "scenario file")->required();
    add_common(run, common);

    CLI::App* batch = app.add_subcommand("batch", "run many scenarios (defaults to $CHSIM_FIXTURES)");
    batch->add_option("paths", batch_paths, "scenario files");
    batch->add_option("--parallelism", parallelism, "worker threads");
    add_common(batch, common);

    CLI::App* calibrate = app.add_subcommand("calibrate", "check the pointer correlation identity");
    calibrate->add_option("path", path, "measurement or joint-measurement scenario")->required();
    add_common(calibrate, common);

    CLI::App* refine = app.add_subcommand("refine", "dump the common refinement of two observables");
    refine->add_option("path", path, "joint-measurement scenario")->required();
    add_common(refine, common);

    CLI::App* consistency = app.add_subcommand("consistency", "dump the decoherence matrix of a family");
    consistency->add_option("path", path, "histories scenario")->required();
    add_common(consistency, common);

    CLI::App* valuation = app.add_subcommand("valuation", "search for a noncontextual valuation");
    valuation->add_option("path", path, "valuation scenario")->required();
    add_common(valuation, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << e.what() << "\n";
        return 3;  // bad usage is a validation error
    }

    if (run->parsed()) return cmd_run(path, common);
    if (batch->parsed()) {
        std::vector<fs::path> paths(batch_paths.begin(), batch_paths.end());
        return cmd_batch(std::move(paths), parallelism, common);
    }
    if (calibrate->parsed()) return cmd_calibrate(path, common);
    if (refine->parsed()) return cmd_refine(path, common);
    if (consistency->parsed()) return cmd_consistency(path, common);
    if (valuation->parsed()) return cmd_valuation(path, common);
    return 3;
}
