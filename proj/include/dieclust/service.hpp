#ifndef DIECLUST_SERVICE_HPP
#define DIECLUST_SERVICE_HPP

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "dieclust/review.hpp"

namespace httplib {
class Server;
}

namespace dieclust {

/// JSON-over-HTTP review API under /api/v1. Readers share a lock; writes
/// are serialized and guarded by the session version token.
class ReviewService {
 public:
  /// `image_paths` maps image ids to files served by GET /images/{id}.
  /// With a non-empty `log_path`, existing operations there are replayed
  /// on start and accepted operations are appended as JSON lines.
  ReviewService(ReviewSession session, std::map<std::string, std::string> image_paths = {},
                std::string log_path = {});
  ~ReviewService();
  ReviewService(const ReviewService&) = delete;
  ReviewService& operator=(const ReviewService&) = delete;

  /// Blocks until stop().
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  /// Copy of the session state for inspection.
  ReviewSession snapshot() const;

 private:
  void routes();

  mutable std::shared_mutex mutex_;
  ReviewSession session_;
  std::map<std::string, std::string> image_paths_;
  std::string log_path_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace dieclust

#endif
