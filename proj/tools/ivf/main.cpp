/**
 * @file main.cpp
 * @brief ivf command line: ingest, replay, synth, serve, store export/import, rules
 */

#include "ivf/core/dataset.hpp"
#include "ivf/core/error.hpp"
#include "ivf/ingest/normalize.hpp"
#include "ivf/replay/replay.hpp"
#include "ivf/replay/synth.hpp"
#include "ivf/rules/config.hpp"
#include "ivf/rules/engine.hpp"
#include "ivf/service/service.hpp"
#include "ivf/store/cycle_store.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace ivf;

rules::engine make_engine(const std::string& rules_path) {
    return rules::engine(rules_path.empty() ? rules::rules_config{}
                                            : rules::load_rules_config(rules_path));
}

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ivf_error(errc::io_failure, "cannot write " + path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
    if (!out) throw ivf_error(errc::io_failure, "write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ivf_error(errc::io_failure, "cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::pair<std::string, int> split_listen(const std::string& listen) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw ivf_error(errc::invalid_argument, "listen must be host:port");
    try {
        const int port = std::stoi(listen.substr(colon + 1));
        if (port <= 0 || port > 65535) throw std::out_of_range("port");
        return {listen.substr(0, colon), port};
    } catch (const std::logic_error&) {
        throw ivf_error(errc::invalid_argument, "bad port in " + listen);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IVF decision-support engine"};
    app.require_subcommand(1);

    std::string rules_path;
    app.add_option("--rules", rules_path, "rules configuration document")
        ->envname("IVF_RULES")
        ->check(CLI::ExistingFile);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "normalize EMR exports into a dataset or store");
    std::string ingest_input, ingest_mapping, ingest_out, ingest_report;
    ingest_cmd->add_option("--input", ingest_input, "CSV/TSV or JSON-lines export")->required();
    ingest_cmd->add_option("--mapping", ingest_mapping, "column mapping document");
    ingest_cmd->add_option("--out", ingest_out, "dataset .json file or store path")->required();
    ingest_cmd->add_option("--report", ingest_report, "where to write the ingest report");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "replay recorded cycles against the engine");
    std::string replay_store, replay_dataset, replay_synth, replay_report, replay_format = "json";
    unsigned replay_threads = 0;
    auto* store_opt = replay_cmd->add_option("--store", replay_store, "store path")
                          ->check(CLI::ExistingFile);
    auto* dataset_opt = replay_cmd->add_option("--dataset", replay_dataset, "dataset .json file")
                            ->check(CLI::ExistingFile);
    store_opt->excludes(dataset_opt);
    replay_cmd->add_option("--synthetic", replay_synth,
                           "synthetic cohort, e.g. seed=1,patients=500,leniency=0.1");
    replay_cmd->add_option("--report", replay_report, "output path (stdout when omitted)");
    replay_cmd->add_option("--format", replay_format, "json, csv or table")
        ->check(CLI::IsMember({"json", "csv", "table"}));
    replay_cmd->add_option("--threads", replay_threads, "worker threads (0 = hardware)");

    // synth
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic cohort dataset");
    std::string synth_spec, synth_out;
    synth_cmd->add_option("--synthetic", synth_spec, "cohort parameters");
    synth_cmd->add_option("--out", synth_out, "dataset .json file (stdout when omitted)");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "run the advisory HTTP service");
    std::string listen = "127.0.0.1:8080", serve_store = "ivf.db", token;
    serve_cmd->add_option("--listen", listen, "host:port")->envname("IVF_LISTEN");
    serve_cmd->add_option("--store", serve_store, "store path")->envname("IVF_STORE");
    serve_cmd->add_option("--token", token, "bearer token (empty disables auth)")->envname("IVF_TOKEN");

    // store
    auto* store_cmd = app.add_subcommand("store", "whole-store export and import");
    store_cmd->require_subcommand(1);
    std::string store_path, store_file;
    auto* export_cmd = store_cmd->add_subcommand("export", "write the store as JSON");
    export_cmd->add_option("--store", store_path, "store path")->required()->envname("IVF_STORE");
    export_cmd->add_option("--out", store_file, "output file (stdout when omitted)");
    auto* import_cmd = store_cmd->add_subcommand("import", "load a JSON export into the store");
    import_cmd->add_option("--store", store_path, "store path")->required()->envname("IVF_STORE");
    import_cmd->add_option("--input", store_file, "export file")->required()->check(CLI::ExistingFile);

    // rules
    auto* rules_cmd = app.add_subcommand("rules", "print the effective rules configuration");
    bool hash_only = false;
    rules_cmd->add_flag("--hash", hash_only, "print only the configuration hash");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest_cmd) {
            ingest::normalized_batch batch;
            try {
                const auto mapping = ingest_mapping.empty() ? ingest::column_mapping{}
                                                            : ingest::load_mapping(ingest_mapping);
                batch = ingest::normalize_batch(ingest::read_records(ingest_input, mapping), mapping);
                if (ends_with(ingest_out, ".json")) {
                    save_dataset(batch.data, ingest_out);
                } else {
                    store::cycle_store db(ingest_out);
                    db.import_dataset(batch.data);
                }
                write_text(ingest_report, json(batch.report).dump(2));
            } catch (const ivf_error& e) {
                std::cerr << "ivf ingest: " << e.what() << '\n';
                return 1;
            }
            std::cerr << "ivf ingest: accepted " << batch.report.accepted << ", rejected "
                      << batch.report.rejected << '\n';
            return batch.report.rejected == 0 ? 0 : 2;
        }

        const auto eng = make_engine(rules_path);

        if (*replay_cmd) {
            dataset data;
            if (!replay_store.empty()) {
                data = store::cycle_store(replay_store).to_dataset();
            } else if (!replay_dataset.empty()) {
                data = load_dataset(replay_dataset);
            } else if (replay_synth.empty()) {
                throw ivf_error(errc::invalid_argument, "one of --store, --dataset, --synthetic is required");
            }
            if (!replay_synth.empty()) {
                auto extra = replay::synth_cohort(replay::synth_config_from_string(replay_synth), eng);
                for (auto& p : extra.patients) data.patients.push_back(std::move(p));
                for (auto& v : extra.visits) data.visits.push_back(std::move(v));
                for (auto& r : extra.retrievals) data.retrievals.push_back(std::move(r));
            }
            const auto report = replay::replay_dataset(data, eng, replay_threads);
            write_text(replay_report,
                       replay::render(report, *replay::report_format_from_string(replay_format)));
            return 0;
        }

        if (*synth_cmd) {
            const auto cfg = synth_spec.empty() ? replay::synth_config{}
                                                : replay::synth_config_from_string(synth_spec);
            const auto data = replay::synth_cohort(cfg, eng);
            if (synth_out.empty()) {
                write_text("", json(data).dump(2));
            } else {
                save_dataset(data, synth_out);
            }
            return 0;
        }

        if (*serve_cmd) {
            const auto [host, port] = split_listen(listen);
            store::cycle_store db(serve_store);
            service::advisory_service svc(db, eng, token);
            service::serve(svc, host, port);
            return 0;
        }

        if (*export_cmd) {
            write_text(store_file, store::cycle_store(store_path).export_json().dump(2));
            return 0;
        }
        if (*import_cmd) {
            store::cycle_store db(store_path);
            json doc;
            try {
                doc = json::parse(read_text(store_file));
            } catch (const json::exception& e) {
                throw ivf_error(errc::unparseable, store_file + ": " + e.what());
            }
            db.import_json(doc);
            return 0;
        }

        if (*rules_cmd) {
            write_text("", hash_only ? eng.config_hash() : json(eng.config()).dump(2));
            return 0;
        }
    } catch (const ivf_error& e) {
        std::cerr << "ivf: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "ivf: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
