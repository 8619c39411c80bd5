#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <mutex>
#include <string>

#include "score/png.hpp"
#include "score/volume.hpp"
#include "score/weaklabels.hpp"

namespace httplib {
class Server;
}

namespace score {

// Overlay colours for regions 1, 2, ... (cycled).
inline constexpr std::array<std::array<std::uint8_t, 3>, 8> kRegionColors{{
    {230, 25, 75},
    {60, 180, 75},
    {0, 130, 200},
    {255, 225, 25},
    {245, 130, 48},
    {145, 30, 180},
    {70, 240, 240},
    {240, 50, 230},
}};
inline constexpr double kOverlayOpacity = 0.4;

// Slice through an image, windowed to its [p1, p99] intensity range, with an
// optional mask overlay. Axis z yields an nx-by-ny picture, x yields ny-by-nz,
// y yields nx-by-nz. Throws ShapeError for a bad axis or index.
RgbImage render_slice(const Volume3& image, const RegionMaskSet* masks, char axis,
                      std::uint32_t index);

struct ServerOptions {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> static_dir;
};

// Annotation service: JSON case API plus optional static assets.
// Reads run concurrently; label submissions are serialized and rewrite the
// manifest atomically.
class AnnotationServer {
 public:
  explicit AnnotationServer(ServerOptions opts);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Returns the bound port (port 0 picks a free one).
  int bind(const std::string& host, int port);
  void listen_after_bind();  // blocks
  void stop();
  void wait_until_ready() const;

 private:
  void install_routes();
  std::optional<CaseRecord> find_case(const std::string& id) const;

  ServerOptions opts_;
  std::unique_ptr<httplib::Server> http_;
  mutable std::shared_mutex manifest_mutex_;
  std::mutex writer_mutex_;
};

}  // namespace score
