#include "dieclust/service.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>

#include "httplib.h"

namespace dieclust {

using nlohmann::json;

namespace {

const char* status_name(ClusterStatus s) { return s == ClusterStatus::validated ? "validated" : "unreviewed"; }

void reply(httplib::Response& res, int code, const json& body) {
  res.status = code;
  res.set_content(body.dump(), "application/json");
}

json cluster_json(const ReviewSession& s, const ClusterSummary& c, bool with_members) {
  json j = {{"id", c.id},
            {"size", c.members.size()},
            {"representative", s.ids()[static_cast<std::size_t>(c.representative)]},
            {"status", status_name(c.status)},
            {"mean_within_distance", c.mean_within_distance}};
  if (with_members) {
    json members = json::array();
    for (int i : c.members) {
      json m = {{"image_id", s.ids()[static_cast<std::size_t>(i)]}};
      if (!s.grades().empty()) m["grade"] = s.grades()[static_cast<std::size_t>(i)];
      members.push_back(m);
    }
    j["members"] = members;
  }
  return j;
}

std::string content_type(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  return "application/octet-stream";
}

}  // namespace

ReviewService::ReviewService(ReviewSession session, std::map<std::string, std::string> image_paths,
                             std::string log_path)
    : session_(std::move(session)),
      image_paths_(std::move(image_paths)),
      log_path_(std::move(log_path)),
      server_(std::make_unique<httplib::Server>()) {
  if (!log_path_.empty() && std::filesystem::exists(log_path_)) {
    std::ifstream in(log_path_);
    std::vector<ReviewOp> ops;
    for (std::string line; std::getline(in, line);)
      if (!line.empty()) ops.push_back(review_op_from_json(json::parse(line), session_.index_of_id()));
    session_.submit(ops, 0);
  }
  routes();
}

ReviewService::~ReviewService() = default;

bool ReviewService::listen(const std::string& host, int port) { return server_->listen(host, port); }
int ReviewService::bind_any_port(const std::string& host) { return server_->bind_to_any_port(host); }
bool ReviewService::listen_after_bind() { return server_->listen_after_bind(); }
void ReviewService::stop() { server_->stop(); }
void ReviewService::wait_until_ready() const { server_->wait_until_ready(); }

ReviewSession ReviewService::snapshot() const {
  std::shared_lock lock(mutex_);
  return session_;
}

void ReviewService::routes() {
  auto& srv = *server_;
  const std::string base = "/api/v1";

  srv.Get(base + "/clusters", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string sort = req.has_param("sort") ? req.get_param_value("sort") : "size";
    std::shared_lock lock(mutex_);
    try {
      json list = json::array();
      for (const auto& c : session_.summaries(sort)) list.push_back(cluster_json(session_, c, false));
      reply(res, 200, {{"version", session_.version()}, {"clusters", list}});
    } catch (const std::invalid_argument& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  });

  srv.Get(base + R"(/clusters/(-?\d+))", [this](const httplib::Request& req, httplib::Response& res) {
    const int id = std::stoi(req.matches[1]);
    std::shared_lock lock(mutex_);
    if (!session_.state().clusters.count(id)) return reply(res, 404, {{"error", "unknown cluster"}});
    json j = cluster_json(session_, session_.summary(id), true);
    j["version"] = session_.version();
    reply(res, 200, j);
  });

  srv.Get(base + R"(/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto it = image_paths_.find(id);
    if (it == image_paths_.end()) return reply(res, 404, {{"error", "unknown image"}});
    std::ifstream in(it->second, std::ios::binary);
    if (!in) return reply(res, 404, {{"error", "image file missing"}});
    std::ostringstream buf;
    buf << in.rdbuf();
    res.set_content(buf.str(), content_type(it->second));
  });

  srv.Get(base + "/next-comparison", [this](const httplib::Request& req, httplib::Response& res) {
    ComparisonOrder order = ComparisonOrder::ascending_distance;
    if (req.has_param("order")) {
      const auto o = req.get_param_value("order");
      if (o == "badly_preserved_first") order = ComparisonOrder::badly_preserved_first;
      else if (o != "distance") return reply(res, 400, {{"error", "order must be distance or badly_preserved_first"}});
    }
    std::shared_lock lock(mutex_);
    const auto next = session_.next_comparison(order);
    if (!next) return reply(res, 200, {{"done", true}, {"version", session_.version()}});
    reply(res, 200,
          {{"done", false},
           {"version", session_.version()},
           {"clusters", {next->a, next->b}},
           {"representatives",
            {session_.ids()[static_cast<std::size_t>(next->rep_a)], session_.ids()[static_cast<std::size_t>(next->rep_b)]}},
           {"distance", next->distance}});
  });

  srv.Post(base + "/ops", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return reply(res, 400, {{"error", std::string("invalid JSON: ") + e.what()}});
    }
    if (!body.is_object() || !body.contains("version") || !body.contains("ops") || !body["ops"].is_array())
      return reply(res, 400, {{"error", "body must be {\"version\": v, \"ops\": [...]}"}});
    std::unique_lock lock(mutex_);
    try {
      std::vector<ReviewOp> ops;
      for (const auto& o : body["ops"]) ops.push_back(review_op_from_json(o, session_.index_of_id()));
      const auto version = session_.submit(ops, body["version"].get<std::uint64_t>());
      if (!log_path_.empty()) {
        std::ofstream log(log_path_, std::ios::app);
        for (const auto& op : ops) log << review_op_to_json(op, session_.ids()).dump() << '\n';
      }
      reply(res, 200, {{"version", version}, {"clusters", session_.state().clusters.size()}});
    } catch (const VersionConflict& e) {
      reply(res, 409, {{"error", e.what()}, {"version", e.actual()}});
    } catch (const ReviewOpError& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const json::exception& e) {
      reply(res, 400, {{"error", e.what()}});
    }
  });

  srv.Get(base + "/export/labels.csv", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex_);
    std::ostringstream out;
    session_.write_labels_csv(out);
    res.set_content(out.str(), "text/csv");
  });

  srv.Get(base + "/stats", [this](const httplib::Request&, httplib::Response& res) {
    std::shared_lock lock(mutex_);
    const auto& st = session_.state();
    const auto b = session_.bound();
    int validated = 0;
    for (const auto& [id, s] : st.status) validated += s == ClusterStatus::validated;
    reply(res, 200,
          {{"version", session_.version()},
           {"items", session_.ids().size()},
           {"clusters", st.clusters.size()},
           {"max_clusters", st.max_clusters},
           {"validated", validated},
           {"comparisons", st.comparisons},
           {"verification_bound", b.verification},
           {"oracle_bound", b.oracle},
           {"brute_force", b.brute_force},
           {"reduction", b.reduction}});
  });
}

}  // namespace dieclust
