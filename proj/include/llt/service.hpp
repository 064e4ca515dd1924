#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "json.hpp"

#include "llt/capture.hpp"
#include "llt/clustering.hpp"

namespace llt {

struct ServiceConfig {
  std::string session_dir;
  Endpoint bind{"127.0.0.1", 8080};

  /// LLT_SESSION_DIR and LLT_BIND ("host:port") override the defaults.
  static ServiceConfig from_env(ServiceConfig defaults);
};

/// JSON-over-HTTP view of one analysis session directory. Reads run
/// concurrently; mutations are serialized through the family log and must
/// carry the revision they were based on (409 otherwise).
class Service {
 public:
  /// Loads and verifies the session directory. Throws Error on a corrupt one.
  explicit Service(const std::string& session_dir);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Port 0 picks a free port. Returns the bound port; throws Error on failure.
  int bind(const std::string& host, int port);
  /// Serves on the bound socket until stop().
  void run();
  /// run() on a background thread.
  void start();
  void stop();

  std::uint64_t revision() const;

  /// Dendrograms with more nodes than this are served in merge pages.
  static constexpr std::size_t kPaginateAbove = 10000;
  static constexpr std::size_t kMergesPerPage = 5000;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// GET /api/dendrogram body. Trees with more than Service::kPaginateAbove
/// nodes carry only merge rows [page * kMergesPerPage, +kMergesPerPage)
/// plus page, pages and merge_offset; leaves are always complete. Throws
/// std::invalid_argument for a page past the end.
nlohmann::json dendrogram_page(const Dendrogram& tree, std::size_t page = 0);

}  // namespace llt
