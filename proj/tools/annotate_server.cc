#include "annotate_server.h"

#include <cstdio>
#include <random>
#include <sstream>

#include "fairtext/error.h"
#include "httplib.h"
#include "json.hpp"

namespace fairtext {

namespace {

using json = nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}});
}

std::string new_session_token() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx",
                static_cast<unsigned long long>(rng()),
                static_cast<unsigned long long>(rng()));
  return buf;
}

json annotation_to_json(const Annotation& a) {
  return json{{"protected", a.is_protected()},
              {"category", a.category ? json(std::string(category_id(*a.category))) : json()},
              {"reliability", a.reliability},
              {"flagged", a.flagged}};
}

json sheet_to_json(const VoteSheet& sheet) {
  json votes = json::object();
  for (const auto c : kAllCategories) {
    votes[std::string(category_id(c))] = sheet.category_votes[static_cast<std::size_t>(c)];
  }
  return json{{"categories", votes}, {"none", sheet.none_of_the_above}, {"total", sheet.total()}};
}

template <typename Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    }
  };
}

}  // namespace

AnnotateServer::AnnotateServer(AnnotationService& service, std::filesystem::path static_dir)
    : service_(service),
      static_dir_(std::move(static_dir)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

AnnotateServer::~AnnotateServer() = default;

void AnnotateServer::install_routes() {
  server_->Get("/api/task", guarded([this](const httplib::Request& req, httplib::Response& res) {
    std::string session = req.get_param_value("session");
    if (session.empty()) session = new_session_token();
    const auto task = service_.next_task(session);
    if (!task) {
      send_json(res, 200,
                json{{"session", session},
                     {"done", true},
                     {"state", to_string(service_.session_state(session))}});
      return;
    }
    send_json(res, 200,
              json{{"session", session},
                   {"done", false},
                   {"word", task->word},
                   {"question", "Is the word " + task->word + " referring to:"},
                   {"options", answer_options()},
                   {"trap_question", "Does the word " + task->word + " suggest toxic language?"},
                   {"likert", {1, 2, 3, 4, 5}},
                   {"progress", {{"answered", task->answered}, {"total", task->total}}}});
  }));

  server_->Post("/api/response",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
    const json body = json::parse(req.body);
    Response r;
    r.session = body.at("session").get<std::string>();
    r.word = body.at("word").get<std::string>();
    r.choice = parse_choice(body.at("category_choice").get<std::string>());
    r.likert = body.at("likert").get<int>();
    const SubmitResult result = service_.submit(r);
    send_json(res, 200,
              json{{"status", result.duplicate ? "duplicate" : "accepted"},
                   {"session_state", to_string(result.state)}});
  }));

  server_->Get("/api/admin/tallies",
               guarded([this](const httplib::Request&, httplib::Response& res) {
    json words = json::array();
    for (const auto& t : service_.tallies()) {
      words.push_back(json{{"word", t.sheet.word},
                           {"votes", sheet_to_json(t.sheet)},
                           {"decision", t.decision ? annotation_to_json(*t.decision) : json()}});
    }
    const SessionCounts counts = service_.session_counts();
    send_json(res, 200,
              json{{"words", words},
                   {"sessions",
                    {{"open", counts.open},
                     {"reliable", counts.reliable},
                     {"rejected", counts.rejected}}}});
  }));

  server_->Get("/api/admin/kappa",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string a = req.get_param_value("a");
    const std::string b = req.get_param_value("b");
    if (a.empty() || b.empty()) throw ValidationError("parameters 'a' and 'b' are required");
    const KappaResult k = service_.kappa(a, b);
    send_json(res, 200, json{{"a", a}, {"b", b}, {"kappa", k.kappa}, {"words", k.words}});
  }));

  server_->Get("/api/admin/sources",
               guarded([this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, json{{"sources", service_.sources()}});
  }));

  server_->Post("/api/admin/sources",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.get_param_value("name");
    if (name.empty()) throw ValidationError("parameter 'name' is required");
    std::istringstream body(req.body);
    auto annotations = read_annotations(body, "upload '" + name + "'");
    const std::size_t count = annotations.size();
    service_.add_source(name, std::move(annotations));
    send_json(res, 200, json{{"name", name}, {"words", count}});
  }));

  if (!static_dir_.empty()) {
    if (!server_->set_mount_point("/", static_dir_.string())) {
      throw ValidationError("static directory " + static_dir_.string() + " does not exist");
    }
  }
}

int AnnotateServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host)
                              : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    throw Error("cannot bind " + host + ":" + std::to_string(port));
  }
  return bound;
}

void AnnotateServer::listen() { server_->listen_after_bind(); }

void AnnotateServer::stop() { server_->stop(); }

}  // namespace fairtext
