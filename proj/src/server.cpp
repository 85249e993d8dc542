#include "wordgaze/server.hpp"
#include "wordgaze/csv.hpp"
#include "wordgaze/error.hpp"

#include <httplib.h>

#include <sys/socket.h>

#include <mutex>

#include <charconv>

namespace wordgaze {

using nlohmann::json;

namespace {

struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::set<std::string> split_list(const std::string& s)
{
    std::set<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        if (comma > pos)
            out.insert(s.substr(pos, comma - pos));
        pos = comma + 1;
    }
    return out;
}

const std::set<std::string> known_params{"participant", "stimulus", "aoi",      "aoi_mode", "hide",    "granularity",
                                         "heat_min",    "heat_max", "scan_max", "merged",   "sort_by", "descending"};

double number_param(const httplib::Request& req, const std::string& name)
{
    double v = 0.0;
    if (!csv::parse_double(req.get_param_value(name), v))
        throw BadRequest("parameter " + name + " must be a number");
    return v;
}

bool flag_param(const httplib::Request& req, const std::string& name)
{
    if (!req.has_param(name))
        return false;
    const std::string v = req.get_param_value(name);
    if (v == "1" || v == "true" || v.empty())
        return true;
    if (v == "0" || v == "false")
        return false;
    throw BadRequest("parameter " + name + " must be true or false");
}

struct Parsed {
    QueryFilter filter;
    ViewOptions options;
    std::string sort_by;
    bool descending = false;
};

Parsed parse_request(const httplib::Request& req)
{
    for (const auto& [k, v] : req.params)
        if (!known_params.count(k))
            throw BadRequest("unknown parameter " + k);
    Parsed p;
    if (req.has_param("participant")) {
        p.filter.all_participants = false;
        p.filter.participants = split_list(req.get_param_value("participant"));
    }
    if (req.has_param("stimulus")) {
        p.filter.all_stimuli = false;
        p.filter.stimuli = split_list(req.get_param_value("stimulus"));
    }
    if (req.has_param("aoi"))
        p.filter.aoi_labels = split_list(req.get_param_value("aoi"));
    if (req.has_param("aoi_mode")) {
        try {
            p.filter.aoi_mode = aoi_mode_from_string(req.get_param_value("aoi_mode"));
        } catch (const std::exception&) {
            throw BadRequest("aoi_mode must be any or all");
        }
    }
    p.filter.merged = flag_param(req, "merged");
    if (req.has_param("hide")) {
        const std::string v = req.get_param_value("hide");
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
        if (ec != std::errc{} || ptr != v.data() + v.size() || n == 0)
            throw BadRequest("hide must be a positive integer");
        p.options.hide_threshold = n;
    }
    if (req.has_param("granularity")) {
        const std::string g = req.get_param_value("granularity");
        if (g == "stimulus")
            p.options.granularity = TableGranularity::Stimulus;
        else if (g == "word")
            p.options.granularity = TableGranularity::Word;
        else
            throw BadRequest("granularity must be stimulus or word");
    }
    if (req.has_param("heat_min"))
        p.options.colors.heat_min_ms = number_param(req, "heat_min");
    if (req.has_param("heat_max"))
        p.options.colors.heat_max_ms = number_param(req, "heat_max");
    if (req.has_param("scan_max"))
        p.options.colors.scan_max_ms = number_param(req, "scan_max");
    try {
        p.options.colors.validate();
    } catch (const std::exception& e) {
        throw BadRequest(e.what());
    }
    if (req.has_param("sort_by"))
        p.sort_by = req.get_param_value("sort_by");
    p.descending = flag_param(req, "descending");
    return p;
}

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message)
{
    send_json(res, status, {{"error", message}});
}

} // namespace

struct QueryServer::Impl {
    std::shared_ptr<const WorkspaceView> view;
    httplib::Server server;
    std::mutex lifecycle;
    bool listening = false;
    bool stopped = false;

    template <typename Fn>
    void route(const std::string& path, Fn fn)
    {
        server.Get(path, [this, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const BadRequest& e) {
                send_error(res, 400, e.what());
            } catch (const ValidationError& e) {
                json j{{"error", e.what()}, {"diagnostics", e.diagnostics()}};
                send_json(res, 400, j);
            } catch (const std::exception& e) {
                send_error(res, 500, e.what());
            }
        });
    }

    void install()
    {
        route("/api/config", [this](const httplib::Request& req, httplib::Response& res) {
            parse_request(req);
            send_json(res, 200, {{"colors", ColorScaleConfig{}.to_json()}, {"params", view->params().to_json()}});
        });
        route("/api/participants", [this](const httplib::Request& req, httplib::Response& res) {
            parse_request(req);
            send_json(res, 200, {{"participants", view->participants()}});
        });
        route("/api/stimuli", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            json out = json::array();
            json not_found = json::array();
            if (!p.filter.all_participants) {
                for (const auto& id : p.filter.participants)
                    if (!std::binary_search(view->participants().begin(), view->participants().end(), id))
                        not_found.push_back("participant:" + id);
                for (const auto& r : view->sessions())
                    if (p.filter.participants.count(r.key.participant_id))
                        out.push_back({{"participant", r.key.participant_id},
                                       {"stimulus", r.key.stimulus_id},
                                       {"chronological_index", r.chronological_index},
                                       {"processed", r.processed}});
            } else {
                for (const auto& s : view->stimuli())
                    out.push_back({{"stimulus", s.stimulus_id},
                                   {"visitors", s.visitors},
                                   {"layout_hashes", s.layout_hashes}});
            }
            send_json(res, 200, {{"stimuli", out}, {"not_found", not_found}});
        });
        route("/api/session", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            if (p.filter.all_participants || p.filter.all_stimuli || p.filter.participants.size() != 1 ||
                p.filter.stimuli.size() != 1)
                throw BadRequest("session needs exactly one participant and one stimulus");
            const SessionKey key{*p.filter.participants.begin(), *p.filter.stimuli.begin()};
            if (!view->find_session(key))
                return send_error(res, 404, "no session " + key.participant_id + "/" + key.stimulus_id);
            const Dataset d = query(*view, p.filter, p.options);
            json j = d.to_json(*view);
            send_json(res, 200, j["sessions"][0]);
        });
        route("/api/merged", [this](const httplib::Request& req, httplib::Response& res) {
            Parsed p = parse_request(req);
            if (p.filter.all_stimuli || p.filter.stimuli.size() != 1)
                throw BadRequest("merged needs exactly one stimulus");
            if (!view->find_stimulus(*p.filter.stimuli.begin()))
                return send_error(res, 404, "no stimulus " + *p.filter.stimuli.begin());
            p.filter.merged = true;
            const Dataset d = query(*view, p.filter, p.options);
            json j = d.to_json(*view);
            json out = j["merged"].empty() ? json::object() : j["merged"][0];
            out["not_found"] = j["not_found"];
            send_json(res, 200, out);
        });
        route("/api/table", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            Dataset d = query(*view, p.filter, p.options);
            if (!p.sort_by.empty()) {
                if (std::find(d.table.columns.begin(), d.table.columns.end(), p.sort_by) == d.table.columns.end())
                    throw BadRequest("unknown sort column " + p.sort_by);
                sort_table(d.table, p.sort_by, p.descending);
            }
            send_json(res, 200, {{"table", d.table.to_json()}, {"not_found", d.not_found}});
        });
        route("/api/query", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            send_json(res, 200, query(*view, p.filter, p.options).to_json(*view));
        });
        route("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            if (p.filter.all_stimuli || p.filter.stimuli.size() != 1)
                throw BadRequest("labels needs exactly one stimulus");
            const StimulusInfo* s = view->find_stimulus(*p.filter.stimuli.begin());
            if (!s || s->layout_hashes.empty())
                return send_error(res, 404, "no snapshot for stimulus " + *p.filter.stimuli.begin());
            json out = json::array();
            for (const auto& lc : css_vocabulary(*view->snapshot(s->layout_hashes.front())))
                out.push_back({{"label", lc.label}, {"words", lc.words}});
            send_json(res, 200, {{"labels", out}});
        });
        route("/api/export.csv", [this](const httplib::Request& req, httplib::Response& res) {
            const Parsed p = parse_request(req);
            res.set_content(export_query_csv(*view, p.filter), "text/csv");
        });
    }
};

QueryServer::QueryServer(std::shared_ptr<const WorkspaceView> view) : impl_(std::make_unique<Impl>())
{
    if (!view)
        throw ContractViolation("QueryServer needs a workspace view");
    impl_->view = std::move(view);
    impl_->server.new_task_queue = [] { return new httplib::ThreadPool(16); };
    impl_->server.set_socket_options([](int sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    impl_->install();
}

QueryServer::~QueryServer() { stop(); }

int QueryServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0)
            throw Error("cannot bind " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port))
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void QueryServer::listen()
{
    {
        std::lock_guard lock(impl_->lifecycle);
        if (impl_->stopped)
            return;
        impl_->listening = true;
    }
    impl_->server.listen_after_bind();
}

void QueryServer::stop()
{
    {
        std::lock_guard lock(impl_->lifecycle);
        impl_->stopped = true;
        if (!impl_->listening)
            return;
    }
    impl_->server.wait_until_ready();
    impl_->server.stop();
}

} // namespace wordgaze
