#include "wordgaze/error.hpp"
#include "wordgaze/server.hpp"
#include "wordgaze/validation.hpp"
#include "wordgaze/workspace.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

using namespace wordgaze;

namespace {

std::set<std::string> to_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

QueryFilter make_filter(const std::vector<std::string>& participants, const std::vector<std::string>& stimuli,
                        const std::vector<std::string>& aoi, const std::string& aoi_mode, bool merged)
{
    QueryFilter f;
    f.all_participants = participants.empty();
    f.participants = to_set(participants);
    f.all_stimuli = stimuli.empty();
    f.stimuli = to_set(stimuli);
    f.aoi_labels = to_set(aoi);
    f.aoi_mode = aoi_mode_from_string(aoi_mode);
    f.merged = merged;
    return f;
}

void print_summary(const ImportSummary& s)
{
    if (!s.changed) {
        std::cout << "no changes\n";
        return;
    }
    std::cout << "inputs added: " << s.new_inputs << "\nsnapshots added: " << s.new_snapshots
              << "\nsessions: " << s.sessions << " (" << s.processed_sessions << " processed)\nsamples: " << s.samples
              << "\nskipped rows: " << s.skipped_rows << "\n";
    for (const auto& w : s.warnings)
        std::cerr << "warning: " << w << "\n";
}

void write_output(const std::string& path, const std::string& content)
{
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path);
    out << content;
}

QueryServer* running_server = nullptr;

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Word-level gaze analytics over web page snapshots"};
    app.require_subcommand(1);
    std::string workspace = ".";
    app.add_option("-w,--workspace", workspace, "Workspace directory");

    ImportRequest req;
    std::string config, annotations, scroll_log, variants;
    auto* import_cmd = app.add_subcommand("import", "Import gaze recordings, snapshots and annotations");
    import_cmd->add_option("--gaze", req.gaze_files, "Gaze CSV files")->check(CLI::ExistingFile);
    import_cmd->add_option("--snapshots", req.snapshot_files, "Snapshot JSON files or directories")
        ->check(CLI::ExistingPath);
    import_cmd->add_option("--annotations", annotations, "Annotations JSON")->check(CLI::ExistingFile);
    import_cmd->add_option("--config", config, "Ingest sidecar config JSON")->check(CLI::ExistingFile);
    import_cmd->add_option("--scroll-log", scroll_log, "Scroll log CSV")->check(CLI::ExistingFile);
    import_cmd->add_option("--variants", variants, "Layout variant mapping JSON")->check(CLI::ExistingFile);

    ProcessParams params;
    std::string dwell_mode = "per_sample";
    auto* process_cmd = app.add_subcommand("process", "Recompute derived data with new parameters");
    process_cmd->add_option("--idt-dispersion-px", params.idt.dispersion_threshold_px, "I-DT dispersion threshold");
    process_cmd->add_option("--idt-min-duration-ms", params.idt.min_duration_ms, "I-DT minimum duration");
    process_cmd->add_option("--slop-px", params.slop_px, "Word box expansion");
    process_cmd->add_option("--dwell-mode", dwell_mode, "per_sample or centroid");
    process_cmd->add_option("--merge-radius", params.merge_radius, "Character radius for merge alignment");

    std::vector<std::string> participants, stimuli, aoi;
    std::string aoi_mode = "any", out;
    bool merged = false;
    auto add_filter = [&](CLI::App* cmd) {
        cmd->add_option("--participant", participants, "Participant ids");
        cmd->add_option("--stimulus", stimuli, "Stimulus ids");
        cmd->add_option("--aoi", aoi, "AOI labels");
        cmd->add_option("--aoi-mode", aoi_mode, "any or all");
    };
    auto* export_cmd = app.add_subcommand("export", "Export word dwell as CSV");
    add_filter(export_cmd);
    export_cmd->add_flag("--merged", merged, "Export merged entries per stimulus");
    export_cmd->add_option("--out", out, "Output file (default stdout)");

    std::optional<std::size_t> hide;
    std::string granularity = "stimulus";
    auto* query_cmd = app.add_subcommand("query", "Print the dataset of a query as JSON");
    add_filter(query_cmd);
    query_cmd->add_flag("--merged", merged, "Include merged views");
    query_cmd->add_option("--hide", hide, "Collapse runs of at least this many unfixated words");
    query_cmd->add_option("--granularity", granularity, "stimulus or word");
    query_cmd->add_option("--out", out, "Output file (default stdout)");

    std::string reference;
    bool by_participant = false;
    auto* validate_cmd = app.add_subcommand("validate", "Compare AOI dwell with a reference export");
    validate_cmd->add_option("--reference", reference, "Reference CSV")->required()->check(CLI::ExistingFile);
    validate_cmd->add_option("--aoi", aoi, "AOI labels");
    validate_cmd->add_option("--aoi-mode", aoi_mode, "any or all");
    validate_cmd->add_option("--participant", participants, "Participant ids");
    validate_cmd->add_option("--out", out, "Write the report JSON here");

    std::string host = "127.0.0.1";
    int port = 8080;
    auto* serve_cmd = app.add_subcommand("serve", "Serve the read-only HTTP query API");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port (0 picks a free one)");

    StudySpec spec;
    std::string synth_out;
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic study for testing");
    synth_cmd->add_option("--out", synth_out, "Output directory")->required();
    synth_cmd->add_option("--participants", spec.participants);
    synth_cmd->add_option("--stimuli", spec.stimuli);
    synth_cmd->add_option("--stimuli-per-participant", spec.stimuli_per_participant);
    synth_cmd->add_option("--samples-per-session", spec.samples_per_session);
    synth_cmd->add_option("--words-per-page", spec.words_per_page);
    synth_cmd->add_option("--seed", spec.seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*import_cmd) {
            if (!config.empty())
                req.config = config;
            if (!annotations.empty())
                req.annotations = annotations;
            if (!scroll_log.empty())
                req.scroll_log = scroll_log;
            if (!variants.empty())
                req.variants = variants;
            print_summary(Workspace(workspace).import(req));
        } else if (*process_cmd) {
            params.dwell_mode = dwell_mode_from_string(dwell_mode);
            print_summary(Workspace(workspace).process(params));
        } else if (*export_cmd) {
            const auto view = WorkspaceView::load(workspace);
            const auto filter = make_filter(participants, stimuli, aoi, aoi_mode, merged);
            write_output(out, export_query_csv(view, filter));
        } else if (*query_cmd) {
            const auto view = WorkspaceView::load(workspace);
            ViewOptions options;
            options.hide_threshold = hide;
            if (granularity == "word")
                options.granularity = TableGranularity::Word;
            else if (granularity != "stimulus")
                throw ConfigError("granularity must be stimulus or word");
            const Dataset d = query(view, make_filter(participants, stimuli, aoi, aoi_mode, merged), options);
            write_output(out, d.to_json(view).dump(1) + "\n");
        } else if (*validate_cmd) {
            std::ifstream in(reference);
            const auto points = parse_reference_csv(in);
            const bool keyed = std::any_of(points.begin(), points.end(), [](const auto& p) { return p.participant; });
            const auto view = WorkspaceView::load(workspace);
            const auto engine = engine_aoi_series(view, make_filter(participants, {}, aoi, aoi_mode, false), keyed);
            const ComparisonReport report = compare_aoi_series(points, engine);
            std::string name;
            for (const auto& a : aoi)
                name += (name.empty() ? "" : "+") + a;
            std::cout << format_comparison_table(report, name.empty() ? "page" : name);
            if (!out.empty())
                write_output(out, report.to_json().dump(1) + "\n");
        } else if (*serve_cmd) {
            auto view = std::make_shared<const WorkspaceView>(WorkspaceView::load(workspace));
            QueryServer server(view);
            const int bound = server.bind(host, port);
            std::cout << "listening on http://" << host << ":" << bound << std::endl;
            running_server = &server;
            std::signal(SIGINT, [](int) { running_server->stop(); });
            std::signal(SIGTERM, [](int) { running_server->stop(); });
            server.listen();
        } else if (*synth_cmd) {
            const StudyFiles files = write_synthetic_study(synth_out, spec);
            std::cout << "gaze: " << files.gaze_csv.string() << "\nsnapshots: " << files.snapshot_dir.string()
                      << "\nconfig: " << files.config.string() << "\nannotations: " << files.annotations.string()
                      << "\nsessions: " << files.sessions << "\nsamples: " << files.samples << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        for (const auto& d : e.diagnostics())
            std::cerr << "  " << d << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
