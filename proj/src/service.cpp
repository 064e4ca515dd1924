#include "llt/service.hpp"

#include <charconv>
#include <cstdlib>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "llt/error.hpp"
#include "llt/family_log.hpp"
#include "llt/pipeline.hpp"

namespace llt {

using nlohmann::json;

ServiceConfig ServiceConfig::from_env(ServiceConfig defaults) {
  if (const char* dir = std::getenv("LLT_SESSION_DIR"); dir && *dir) defaults.session_dir = dir;
  if (const char* bind = std::getenv("LLT_BIND"); bind && *bind) defaults.bind = Endpoint::parse(bind);
  return defaults;
}

namespace {

/// Client-side mistake with an HTTP status.
struct HttpError : Error {
  HttpError(int status, const std::string& what) : Error(what), status(status) {}
  int status;
};

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw HttpError(400, std::string("malformed JSON body: ") + e.what());
  }
}

std::uint64_t required_revision(const json& body) {
  if (!body.contains("revision") || !body["revision"].is_number_unsigned()) {
    throw HttpError(400, "mutations must carry the revision they were based on");
  }
  return body["revision"].get<std::uint64_t>();
}

template <typename T>
T field(const json& body, const char* name) {
  if (!body.contains(name)) throw HttpError(400, std::string("missing field '") + name + "'");
  try {
    return body[name].get<T>();
  } catch (const json::exception&) {
    throw HttpError(400, std::string("field '") + name + "' has the wrong type");
  }
}

LineageChange parse_change(const json& c) {
  if (c.is_object()) {
    return {change_kind_from_string(c.at("kind").get<std::string>()), c.at("label").get<std::string>()};
  }
  // "+ label", "- label" or "± label".
  auto text = c.get<std::string>();
  for (auto kind : {ChangeKind::Added, ChangeKind::Removed, ChangeKind::Modified}) {
    auto sym = change_symbol(kind);
    if (text.starts_with(sym)) {
      std::string label = text.substr(sym.size());
      while (!label.empty() && label.front() == ' ') label.erase(0, 1);
      return {kind, label};
    }
  }
  throw HttpError(400, "lineage change must start with +, - or ±: " + text);
}

NodeId parse_node(const std::string& text, const Dendrogram& tree) {
  NodeId node = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), node);
  if (ec != std::errc{} || p != text.data() + text.size()) throw HttpError(400, "bad node id: " + text);
  if (!tree.contains(node)) throw NotFound("no node " + text);
  return node;
}

json log_summary(std::size_t index, const RequestLog& log) {
  return {{"index", index},
          {"id", log.id},
          {"source_host", log.source_host},
          {"captured_at", format_rfc3339(log.captured_at)},
          {"size", log.raw.size()}};
}

}  // namespace

json dendrogram_page(const Dendrogram& tree, std::size_t page) {
  json j = tree.to_json();
  j["leaf_count"] = tree.leaf_count();
  j["height"] = tree.merges().empty() ? 0.0 : tree.merges().back().height;
  if (tree.node_count() <= Service::kPaginateAbove) {
    if (page != 0) throw std::invalid_argument("page out of range");
    return j;
  }
  const std::size_t total = tree.merges().size();
  const std::size_t pages = (total + Service::kMergesPerPage - 1) / Service::kMergesPerPage;
  if (page >= pages) throw std::invalid_argument("page out of range");
  const std::size_t begin = page * Service::kMergesPerPage;
  const std::size_t end = std::min(total, begin + Service::kMergesPerPage);
  const auto& merges = j["merges"];
  j["merges"] = json(std::vector<json>(merges.begin() + static_cast<std::ptrdiff_t>(begin),
                                       merges.begin() + static_cast<std::ptrdiff_t>(end)));
  j["page"] = page;
  j["pages"] = pages;
  j["merge_offset"] = begin;
  return j;
}

struct Service::Impl {
  AnalysisSession session;
  std::string dir;
  mutable std::shared_mutex mu;
  FamilyLog log;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const std::string& d) : session(load_session_dir(d)), dir(d), log(d, session.tree) { routes(); }

  std::string stamp() const {
    return format_rfc3339(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()));
  }

  json families_json() const {
    json j = log.initialized() ? log.state().to_json() : json{{"format", "llt-families"}, {"families", json::array()}};
    j["revision"] = log.revision();
    j["initialized"] = log.initialized();
    if (log.initialized()) {
      json names = json::array();
      for (const auto& f : log.state().families()) {
        names.push_back(suggest_family_name(f, session.templates, session.tokens));
      }
      j["suggested_names"] = std::move(names);
    }
    return j;
  }

  using Handler = std::function<json(const httplib::Request&)>;

  // Wraps a handler with locking and error-to-status mapping.
  httplib::Server::Handler read(Handler h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      std::shared_lock lock(mu);
      respond(res, [&] { return h(req); });
    };
  }

  httplib::Server::Handler write(std::function<void(const httplib::Request&, const json&, std::uint64_t)> h) {
    return [this, h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      std::unique_lock lock(mu);
      respond(res, [&] {
        json body = parse_body(req);
        std::uint64_t rev = required_revision(body);
        h(req, body, rev);
        return families_json();
      });
    };
  }

  template <typename F>
  void respond(httplib::Response& res, F&& f) {
    int status = 200;
    json out;
    try {
      out = f();
    } catch (const HttpError& e) {
      status = e.status;
      out = {{"error", e.what()}};
    } catch (const Conflict& e) {
      status = 409;
      out = {{"error", e.what()}, {"revision", e.current()}};
    } catch (const NotFound& e) {
      status = 404;
      out = {{"error", e.what()}};
    } catch (const CannotSplit& e) {
      status = 422;
      out = {{"error", e.what()}};
    } catch (const Inconsistent& e) {
      status = 409;
      out = {{"error", e.what()}, {"revision", log.revision()}};
    } catch (const Unsupported& e) {
      status = 400;
      out = {{"error", e.what()}};
    } catch (const std::invalid_argument& e) {
      status = 400;
      out = {{"error", e.what()}};
    } catch (const ParseError& e) {
      status = 400;
      out = {{"error", e.what()}};
    } catch (const std::exception& e) {
      status = 500;
      out = {{"error", e.what()}};
    }
    res.status = status;
    if (out.is_string()) {
      res.set_content(out.get<std::string>(), "text/plain; charset=utf-8");
    } else {
      res.set_content(out.dump() + "\n", "application/json");
    }
  }

  Action action(ActionKind kind, const json& body) const {
    Action a;
    a.kind = kind;
    a.actor = body.value("actor", std::string("analyst"));
    a.at = parse_rfc3339(stamp());
    return a;
  }

  void routes() {
    const auto& s = session;
    server.Get("/api/corpus", read([&](const httplib::Request& req) {
      std::size_t offset = req.has_param("offset") ? std::stoul(req.get_param_value("offset")) : 0;
      std::size_t limit = req.has_param("limit") ? std::stoul(req.get_param_value("limit")) : s.corpus.logs.size();
      json logs = json::array();
      for (std::size_t i = offset; i < s.corpus.logs.size() && i - offset < limit; ++i) {
        logs.push_back(log_summary(i, s.corpus.logs[i]));
      }
      return json{{"count", s.corpus.logs.size()}, {"offset", offset}, {"logs", std::move(logs)}};
    }));
    server.Get(R"(/api/corpus/([0-9A-Za-z]+))", read([&](const httplib::Request& req) {
      const std::string id = req.matches[1];
      for (std::size_t i = 0; i < s.corpus.logs.size(); ++i) {
        const auto& log = s.corpus.logs[i];
        if (log.id != id) continue;
        json j = log_summary(i, log);
        j["raw_b64"] = base64_encode(log.raw);
        j["raw_escaped"] = escape_bytes(log.raw);
        json toks = json::array();
        for (const auto& t : s.tokens[i]) toks.push_back({{"class", to_string(t.cls)}, {"bytes", escape_bytes(t.bytes)}});
        j["tokens"] = std::move(toks);
        return j;
      }
      throw NotFound("no request log " + id);
    }));
    server.Get("/api/dendrogram", read([&](const httplib::Request& req) {
      std::size_t page = 0;
      if (req.has_param("page")) {
        const auto text = req.get_param_value("page");
        auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), page);
        if (ec != std::errc{} || p != text.data() + text.size()) throw HttpError(400, "bad page: " + text);
      }
      json j = dendrogram_page(*s.tree, page);
      j["threshold"] = s.partition.threshold;
      return j;
    }));
    server.Get(R"(/api/cluster/([^/]+)/template)", read([&](const httplib::Request& req) {
      NodeId node = parse_node(req.matches[1], *s.tree);
      const auto& t = s.templates.at(node);
      return json{{"node", node},
                  {"size", s.tree->size(node)},
                  {"height", s.tree->height(node)},
                  {"slots", slots_to_json(t)},
                  {"rendered", render(t)}};
    }));
    server.Get(R"(/api/cluster/([^/]+)/members)", read([&](const httplib::Request& req) {
      NodeId node = parse_node(req.matches[1], *s.tree);
      json members = json::array();
      for (auto leaf : s.tree->members(node)) members.push_back(log_summary(leaf, s.corpus.logs[leaf]));
      return json{{"node", node}, {"members", std::move(members)}};
    }));
    server.Get("/api/partition", read([&](const httplib::Request& req) {
      if (!req.has_param("threshold")) {
        json j = s.partition.to_json(*s.tree);
        j["suggested"] = s.threshold_suggested;
        return j;
      }
      double t = 0.0;
      try {
        t = std::stod(req.get_param_value("threshold"));
      } catch (const std::exception&) {
        throw HttpError(400, "threshold must be a number");
      }
      return cut(*s.tree, t).to_json(*s.tree);
    }));
    server.Get("/api/families", read([&](const httplib::Request&) { return families_json(); }));
    server.Get("/api/criteria", read([&](const httplib::Request&) { return json{{"criteria", refinement_criteria()}}; }));
    server.Get("/api/export", read([&](const httplib::Request& req) {
      auto format = lineage_format_from_string(req.has_param("format") ? req.get_param_value("format") : "json");
      std::vector<std::string> names;
      for (const auto& f : log.state().families()) {
        names.push_back(f.name.empty() ? suggest_family_name(f, s.templates, s.tokens) : f.name);
      }
      return json(export_lineage(log.state(), s.templates, format, &names));
    }));

    server.Post("/api/families/init", write([&](const httplib::Request&, const json& body, std::uint64_t rev) {
      double t = body.contains("threshold") ? field<double>(body, "threshold") : s.partition.threshold;
      log.init(t, rev);
    }));
    server.Post("/api/families/merge", write([&](const httplib::Request&, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Merge, body);
      a.operands = {field<FamilyId>(body, "a"), field<FamilyId>(body, "b")};
      log.apply(a, rev);
    }));
    server.Post("/api/families/split", write([&](const httplib::Request&, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Split, body);
      a.operands = {field<FamilyId>(body, body.contains("family") ? "family" : "a")};
      log.apply(a, rev);
    }));
    server.Post(R"(/api/families/(\d+)/rename)", write([&](const httplib::Request& req, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Rename, body);
      a.operands = {std::stoull(req.matches[1])};
      a.text = field<std::string>(body, "name");
      log.apply(a, rev);
    }));
    server.Post(R"(/api/families/(\d+)/keep)", write([&](const httplib::Request& req, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Keep, body);
      a.operands = {std::stoull(req.matches[1])};
      log.apply(a, rev);
    }));
    server.Post(R"(/api/families/(\d+)/note)", write([&](const httplib::Request& req, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Note, body);
      a.operands = {std::stoull(req.matches[1])};
      a.text = field<std::string>(body, "text");
      log.apply(a, rev);
    }));
    server.Post("/api/lineage/edge", write([&](const httplib::Request&, const json& body, std::uint64_t rev) {
      Action a = action(ActionKind::Lineage, body);
      LineageEdge e;
      e.from = field<FamilyId>(body, "from");
      e.to = field<FamilyId>(body, "to");
      if (body.contains("changes")) {
        for (const auto& c : body["changes"]) e.changes.push_back(parse_change(c));
      }
      a.operands = {e.from, e.to};
      a.edge = std::move(e);
      log.apply(a, rev);
    }));
  }
};

Service::Service(const std::string& session_dir) : impl_(std::make_unique<Impl>(session_dir)) {}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Service::run() { impl_->server.listen_after_bind(); }

void Service::start() {
  impl_->thread = std::thread([this] { run(); });
  impl_->server.wait_until_ready();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::uint64_t Service::revision() const {
  std::shared_lock lock(impl_->mu);
  return impl_->log.revision();
}

}  // namespace llt
