#include "score/server.hpp"

#include <algorithm>
#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "score/errors.hpp"
#include "score/io.hpp"
#include "score/prior.hpp"

namespace score {

using nlohmann::json;

RgbImage render_slice(const Volume3& image, const RegionMaskSet* masks, char axis,
                      std::uint32_t index) {
  const Grid& g = image.grid();
  if (masks) require_same_grid(g, masks->grid(), "slice");
  int ax;
  switch (axis) {
    case 'x': ax = 0; break;
    case 'y': ax = 1; break;
    case 'z': ax = 2; break;
    default: throw ShapeError(std::string("unknown axis '") + axis + "'");
  }
  if (index >= g.dims[std::size_t(ax)])
    throw ShapeError("slice index " + std::to_string(index) + " out of range");
  const int u = ax == 0 ? 1 : 0;
  const int v = ax == 2 ? 1 : 2;

  const double lo = percentile(image, 1.0);
  const double hi = percentile(image, 99.0);
  const double span = hi - lo;

  RgbImage out;
  out.width = g.dims[std::size_t(u)];
  out.height = g.dims[std::size_t(v)];
  out.pixels.resize(std::size_t(out.width) * out.height * 3);
  for (std::uint32_t b = 0; b < out.height; ++b)
    for (std::uint32_t a = 0; a < out.width; ++a) {
      std::array<std::uint32_t, 3> p{};
      p[std::size_t(ax)] = index;
      p[std::size_t(u)] = a;
      p[std::size_t(v)] = b;
      const std::size_t off = g.offset(p[0], p[1], p[2]);
      double gray = span > 0 ? (image[off] - lo) / span : 0.0;
      gray = std::clamp(gray, 0.0, 1.0) * 255.0;
      std::array<double, 3> rgb{gray, gray, gray};
      if (masks)
        for (std::size_t k = 0; k < masks->regions(); ++k) {
          if (!(*masks)[k][off]) continue;
          const auto& c = kRegionColors[k % kRegionColors.size()];
          for (int ch = 0; ch < 3; ++ch)
            rgb[std::size_t(ch)] = (1.0 - kOverlayOpacity) * rgb[std::size_t(ch)] +
                                   kOverlayOpacity * c[std::size_t(ch)];
        }
      auto* px = out.pixels.data() + (std::size_t(b) * out.width + a) * 3;
      for (int ch = 0; ch < 3; ++ch) px[ch] = std::uint8_t(std::lround(rgb[std::size_t(ch)]));
    }
  return out;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& msg) {
  send_json(res, status, json{{"error", msg}});
}

}  // namespace

AnnotationServer::AnnotationServer(ServerOptions opts)
    : opts_(std::move(opts)), http_(std::make_unique<httplib::Server>()) {
  read_manifest(opts_.manifest);  // fail early on an unreadable manifest
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) return http_->bind_to_any_port(host);
  if (!http_->bind_to_port(host, port))
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::listen_after_bind() { http_->listen_after_bind(); }
void AnnotationServer::stop() {
  if (http_) http_->stop();
}
void AnnotationServer::wait_until_ready() const { http_->wait_until_ready(); }

std::optional<CaseRecord> AnnotationServer::find_case(const std::string& id) const {
  std::shared_lock lock(manifest_mutex_);
  const auto records = read_manifest(opts_.manifest);
  for (auto it = records.rbegin(); it != records.rend(); ++it)
    if (it->case_id == id) return *it;
  return std::nullopt;
}

void AnnotationServer::install_routes() {
  auto& s = *http_;

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "unknown error");
    }
  });

  s.Get("/api/cases", [this](const httplib::Request&, httplib::Response& res) {
    std::vector<CaseRecord> records;
    {
      std::shared_lock lock(manifest_mutex_);
      records = read_manifest(opts_.manifest);
    }
    json arr = json::array();
    for (const auto& r : records) {
      const auto h = read_svol_header(resolve_case_path(opts_.manifest, r.init_masks));
      arr.push_back({{"case_id", r.case_id}, {"K", h.regions}, {"labeled", !r.labels.empty()}});
    }
    send_json(res, 200, arr);
  });

  s.Get(R"(/api/cases/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rec = find_case(req.matches[1]);
    if (!rec) return send_error(res, 404, "unknown case");
    const auto h = read_svol_header(resolve_case_path(opts_.manifest, rec->image));
    const auto hm = read_svol_header(resolve_case_path(opts_.manifest, rec->init_masks));
    json labels = json::array();
    for (const auto& l : rec->labels) labels.push_back({{"k", l.k}, {"q", l.q}, {"l", l.l}});
    send_json(res, 200,
              {{"case_id", rec->case_id},
               {"K", hm.regions},
               {"dims", {h.grid.dims[0], h.grid.dims[1], h.grid.dims[2]}},
               {"spacing", {h.grid.spacing[0], h.grid.spacing[1], h.grid.spacing[2]}},
               {"labeled", !rec->labels.empty()},
               {"labels", labels},
               {"annotator", rec->annotator},
               {"timestamp", rec->timestamp}});
  });

  s.Get(R"(/api/cases/([^/]+)/slice)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rec = find_case(req.matches[1]);
    if (!rec) return send_error(res, 404, "unknown case");
    const std::string axis = req.has_param("axis") ? req.get_param_value("axis") : "z";
    const std::string overlay = req.has_param("overlay") ? req.get_param_value("overlay") : "1";
    if (axis.size() != 1 || std::string("xyz").find(axis[0]) == std::string::npos)
      return send_error(res, 422, "axis must be x, y or z");
    if (overlay != "0" && overlay != "1") return send_error(res, 422, "overlay must be 0 or 1");
    long long index = 0;
    try {
      std::size_t used = 0;
      const std::string raw = req.has_param("index") ? req.get_param_value("index") : "0";
      index = std::stoll(raw, &used);
      if (used != raw.size()) throw std::invalid_argument(raw);
    } catch (const std::exception&) {
      return send_error(res, 422, "index must be an integer");
    }
    const auto image = read_volume(resolve_case_path(opts_.manifest, rec->image));
    const int ax = axis[0] - 'x';
    if (index < 0 || index >= (long long)image.grid().dims[std::size_t(ax)])
      return send_error(res, 422, "index out of range");
    std::optional<RegionMaskSet> masks;
    if (overlay == "1") masks = read_masks(resolve_case_path(opts_.manifest, rec->init_masks));
    const auto png = encode_png(
        render_slice(image, masks ? &*masks : nullptr, axis[0], std::uint32_t(index)));
    res.status = 200;
    res.set_content(png, "image/png");
  });

  s.Post(R"(/api/cases/([^/]+)/labels)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    json body;
    try {
      body = json::parse(req.body);
    } catch (const std::exception& e) {
      return send_json(res, 422, {{"violations", {std::string("malformed JSON: ") + e.what()}}});
    }
    WeakLabelSet labels;
    std::string annotator;
    try {
      if (!body.is_object() || !body.contains("labels") || !body["labels"].is_array())
        throw std::invalid_argument("body must be an object with a 'labels' array");
      for (const auto& e : body["labels"]) {
        if (!e.is_object()) throw std::invalid_argument("label entries must be objects");
        labels.push_back({e.at("k").get<int>(), e.at("q").get<int>(), e.at("l").get<int>()});
      }
      if (body.contains("annotator")) annotator = body["annotator"].get<std::string>();
    } catch (const std::exception& e) {
      return send_json(res, 422, {{"violations", {std::string(e.what())}}});
    }

    std::lock_guard writer(writer_mutex_);
    auto records = [&] {
      std::shared_lock lock(manifest_mutex_);
      return read_manifest(opts_.manifest);
    }();
    auto it = std::find_if(records.rbegin(), records.rend(),
                           [&](const CaseRecord& r) { return r.case_id == id; });
    if (it == records.rend()) return send_error(res, 404, "unknown case");
    const auto h = read_svol_header(resolve_case_path(opts_.manifest, it->init_masks));
    if (auto v = validate(labels, h.regions); !v.empty())
      return send_json(res, 422, {{"violations", v}});
    std::sort(labels.begin(), labels.end(),
              [](const RegionLabel& a, const RegionLabel& b) { return a.k < b.k; });
    it->labels = labels;
    it->annotator = annotator;
    it->timestamp = now_iso8601();
    {
      std::unique_lock lock(manifest_mutex_);
      write_manifest(opts_.manifest, records);
    }
    send_json(res, 200, {{"case_id", id}, {"status", "ok"}});
  });

  if (opts_.static_dir && !s.set_mount_point("/", opts_.static_dir->string()))
    throw IoError("static directory not found: " + opts_.static_dir->string());
}

}  // namespace score
