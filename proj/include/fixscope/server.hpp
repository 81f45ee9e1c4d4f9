#pragma once

// HTTP API over one loaded model.

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fixscope/classify.hpp"
#include "fixscope/error.hpp"
#include "fixscope/minilang.hpp"
#include "fixscope/model_io.hpp"
#include "fixscope/tree_io.hpp"

namespace fixscope {

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;

  nlohmann::json to_json() const { return {{"status", status}, {"code", code}, {"message", message}}; }
};

struct ServerOptions {
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::string> cors_origin;  // enables CORS headers for this origin
};

/// "host:port"; a bare port binds to 127.0.0.1.
inline std::pair<std::string, int> parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : s.substr(0, colon);
  const std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (host.empty()) host = "127.0.0.1";
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    return {host, p};
  } catch (const std::exception&) {
    throw ConfigError("invalid bind address '" + s + "'");
  }
}

/// Shared model state. Readers take a snapshot; label writes are
/// serialized, persisted, then swapped in.
class ModelService {
 public:
  explicit ModelService(std::filesystem::path path) : path_(std::move(path)) {
    auto m = std::make_shared<ClusterModel>(load_model(path_));
    digest_ = model_digest(*m);
    model_ = std::move(m);
  }

  std::pair<std::shared_ptr<const ClusterModel>, std::string> snapshot() const {
    std::shared_lock lock(mu_);
    return {model_, digest_};
  }

  void set_label(int cluster_id, const std::string& label) {
    std::lock_guard write(write_mu_);
    auto next = std::make_shared<ClusterModel>(*snapshot().first);
    assign_label(*next, cluster_id, label);
    save_model(*next, path_);
    std::string d = model_digest(*next);
    std::unique_lock lock(mu_);
    model_ = std::move(next);
    digest_ = std::move(d);
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::mutex write_mu_;
  std::shared_ptr<const ClusterModel> model_;
  std::string digest_;
};

namespace server_detail {

inline void send(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void fail(httplib::Response& res, const ApiError& e) { send(res, e.status, e.to_json()); }

inline std::string default_code(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 409: return "conflict";
    default: return status >= 500 ? "internal" : "error";
  }
}

inline int cluster_param(const httplib::Request& req, const ClusterModel& m) {
  const std::string& raw = req.path_params.at("id");
  int id = -1;
  try {
    std::size_t used = 0;
    id = std::stoi(raw, &used);
    if (used != raw.size()) id = -1;
  } catch (const std::exception&) {
    id = -1;
  }
  if (id < 0 || static_cast<std::size_t>(id) >= m.clusters.size())
    throw ApiError{404, "unknown_cluster", "no cluster with id " + raw};
  return id;
}

inline nlohmann::json parse_body(const httplib::Request& req) {
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw ApiError{400, "bad_request", "request body must be a JSON object"};
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ApiError{400, "bad_request", std::string("request body is not valid JSON: ") + e.what()};
  }
}

inline nlohmann::json preview(const ClusterModel& m, const Cluster& c) {
  nlohmann::json out = nlohmann::json::array();
  const auto& actions = m.items[static_cast<std::size_t>(c.medoid)].script.actions;
  for (std::size_t i = 0; i < actions.size() && i < 3; ++i) out.push_back(describe(actions[i]));
  return out;
}

inline nlohmann::json label_json(const std::optional<std::string>& l) {
  return l ? nlohmann::json(*l) : nlohmann::json(nullptr);
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ApiError& e) {
      fail(res, e);
    } catch (const SyntaxError& e) {
      fail(res, {400, "syntax_error", e.what()});
    } catch (const FormatError& e) {
      fail(res, {400, "bad_tree", e.what()});
    } catch (const ConfigError& e) {
      fail(res, {400, "bad_config", e.what()});
    } catch (const UnlabeledModel& e) {
      fail(res, {409, "unlabeled_model", e.what()});
    } catch (const KTooLarge& e) {
      fail(res, {409, "k_too_large", e.what()});
    } catch (const UnknownCluster& e) {
      fail(res, {404, "unknown_cluster", e.what()});
    } catch (const IoError& e) {
      fail(res, {500, "io_error", e.what()});
    } catch (const std::exception& e) {
      fail(res, {500, "internal", e.what()});
    }
  };
}

}  // namespace server_detail

/// Registers the /api routes, error shaping, CORS and static assets.
inline void install_routes(httplib::Server& svr, std::shared_ptr<ModelService> svc, const ServerOptions& opt = {}) {
  using namespace server_detail;
  using nlohmann::json;

  svr.Get("/api/health", guarded([svc](const httplib::Request&, httplib::Response& res) {
            send(res, 200, {{"status", "ok"}, {"model_digest", svc->snapshot().second}});
          }));

  svr.Get("/api/clusters", guarded([svc](const httplib::Request&, httplib::Response& res) {
            const auto m = svc->snapshot().first;
            json out = json::array();
            for (const auto& c : m->clusters)
              out.push_back({{"cluster_id", c.cluster_id},
                             {"size", c.members.size()},
                             {"label", label_json(c.label)},
                             {"medoid_preview", preview(*m, c)}});
            send(res, 200, out);
          }));

  svr.Get("/api/clusters/:id", guarded([svc](const httplib::Request& req, httplib::Response& res) {
            const auto m = svc->snapshot().first;
            const Cluster& c = m->clusters[static_cast<std::size_t>(cluster_param(req, *m))];
            json members = json::array();
            for (int x : c.members) {
              const auto& it = m->items[static_cast<std::size_t>(x)];
              members.push_back({{"script_id", it.script_id},
                                 {"actions", to_json(it.script)},
                                 {"incorrect_src", it.incorrect_src},
                                 {"correct_src", it.correct_src}});
            }
            send(res, 200,
                 {{"cluster_id", c.cluster_id},
                  {"label", label_json(c.label)},
                  {"members", members},
                  {"medoid_id", m->items[static_cast<std::size_t>(c.medoid)].script_id}});
          }));

  svr.Put("/api/clusters/:id/label", guarded([svc](const httplib::Request& req, httplib::Response& res) {
            const int id = cluster_param(req, *svc->snapshot().first);
            const json body = parse_body(req);
            if (!body.contains("label") || !body.at("label").is_string())
              throw ApiError{400, "bad_request", "body must be {\"label\": string}"};
            svc->set_label(id, body.at("label").get<std::string>());
            res.status = 204;
          }));

  svr.Post("/api/classify", guarded([svc](const httplib::Request& req, httplib::Response& res) {
             const json body = parse_body(req);
             AstTree tree;
             if (body.contains("source") && body.at("source").is_string())
               tree = parse_minilang(body.at("source").get<std::string>());
             else if (body.contains("tree"))
               tree = read_tree(body.at("tree"));
             else
               throw ApiError{400, "bad_request", "body must carry \"source\" or \"tree\""};
             const auto m = svc->snapshot().first;
             ClassifierConfig c = m->classifier;
             if (body.contains("classifier")) {
               json merged = to_json(c);
               merged.update(body.at("classifier"));
               c = classifier_config_from_json(merged);
             }
             send(res, 200, to_json(classify(tree, *m, c)));
           }));

  svr.Get("/api/config", guarded([svc](const httplib::Request&, httplib::Response& res) {
            const auto m = svc->snapshot().first;
            send(res, 200,
                 {{"matcher", to_json(m->config.matcher)},
                  {"distance", to_json(m->config.distance)},
                  {"clustering",
                   {{"linkage", to_string(m->config.linkage)}, {"cut", m->config.cut},
                    {"min_size", m->config.min_size}}},
                  {"classifier", to_json(m->classifier)}});
          }));

  if (opt.static_dir) {
    if (!std::filesystem::is_directory(*opt.static_dir))
      throw ConfigError("static dir " + opt.static_dir->string() + " is not a directory");
    svr.set_mount_point("/", opt.static_dir->string());
  }

  if (opt.cors_origin) {
    const std::string origin = *opt.cors_origin;
    svr.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    });
    svr.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }

  // Any non-2xx without a body becomes an ApiError.
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    fail(res, {res.status, default_code(res.status),
               req.method + " " + req.path + ": " + httplib::status_message(res.status)});
  });
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "unhandled error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    fail(res, {500, "internal", what});
  });
}

/// Binds or throws BindError; returns the bound port.
inline int bind_server(httplib::Server& svr, const std::string& bind) {
  const auto [host, port] = parse_bind(bind);
  // httplib defaults to SO_REUSEPORT, which would let a second server share
  // the port silently.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  });
  const int bound = port == 0 ? svr.bind_to_any_port(host) : (svr.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw BindError("cannot bind " + bind);
  return bound;
}

}  // namespace fixscope
