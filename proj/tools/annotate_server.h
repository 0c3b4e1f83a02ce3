#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "annotation_service.h"

namespace httplib {
class Server;
}

namespace fairtext {

// HTTP front end of AnnotationService:
//   GET  /api/task?session=S        next item (a new session when S is absent)
//   POST /api/response              {session, word, category_choice, likert}
//   GET  /api/admin/tallies         vote sheets, decisions, session counts
//   GET  /api/admin/kappa?a=X&b=Y   agreement between two sources
//   GET  /api/admin/sources         source names
//   POST /api/admin/sources?name=X  annotation TSV body
// plus static files from `static_dir` when given.
class AnnotateServer {
 public:
  AnnotateServer(AnnotationService& service, std::filesystem::path static_dir = {});
  ~AnnotateServer();

  // Binds `host:port` (port 0 picks a free one) and returns the bound port.
  // Throws Error when the address cannot be bound.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  void listen();
  void stop();

 private:
  void install_routes();

  AnnotationService& service_;
  std::filesystem::path static_dir_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fairtext
