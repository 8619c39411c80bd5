#include "score/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "score/errors.hpp"

namespace score {
namespace {

constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double d) { u64(std::bit_cast<std::uint64_t>(d)); }
  void bytes(const std::string& s) { buf.insert(buf.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> buf;

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf.push_back(std::uint8_t((v >> (8 * i)) & 0xff));
  }
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> b) : buf(std::move(b)) {}
  std::uint64_t le(int n) {
    need(std::size_t(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(buf[pos + std::size_t(i)]) << (8 * i);
    pos += std::size_t(n);
    return v;
  }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf.begin() + std::ptrdiff_t(pos), buf.begin() + std::ptrdiff_t(pos + n));
    pos += n;
    return s;
  }
  bool done() const { return pos == buf.size(); }

 private:
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
  }
  std::vector<std::uint8_t> buf;
  std::size_t pos = 0;
};

std::string hexf(double d) {
  char b[64];
  std::snprintf(b, sizeof b, "%a", d);
  return b;
}

std::map<std::string, std::string> parse_echo(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

RefinerConfig config_from_echo(std::map<std::string, std::string>& kv) {
  auto take = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw CheckpointError("checkpoint config missing " + k);
    auto v = it->second;
    kv.erase(it);
    return v;
  };
  try {
    RefinerConfig c;
    c.regions = std::stoul(take("refiner.regions"));
    c.widths.clear();
    std::istringstream ws(take("refiner.widths"));
    std::string item;
    while (std::getline(ws, item, ','))
      if (!item.empty()) c.widths.push_back(std::stoi(item));
    c.kernel = std::stoi(take("refiner.kernel"));
    c.skip = take("refiner.skip") == "1";
    c.skip_eps = std::strtod(take("refiner.skip_eps").c_str(), nullptr);
    c.out_init_scale = std::strtod(take("refiner.out_init_scale").c_str(), nullptr);
    c.validate();
    return c;
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint config: ") + e.what());
  }
}

}  // namespace

std::string refiner_config_echo(const RefinerConfig& cfg) {
  std::ostringstream o;
  o << "refiner.regions=" << cfg.regions << '\n';
  o << "refiner.widths=";
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) o << (i ? "," : "") << cfg.widths[i];
  o << '\n';
  o << "refiner.kernel=" << cfg.kernel << '\n';
  o << "refiner.skip=" << (cfg.skip ? 1 : 0) << '\n';
  o << "refiner.skip_eps=" << hexf(cfg.skip_eps) << '\n';
  o << "refiner.out_init_scale=" << hexf(cfg.out_init_scale) << '\n';
  return o.str();
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto& net = ckpt.net;
  std::string echo = refiner_config_echo(net.config);
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos ||
        v.find('\n') != std::string::npos || k.rfind("refiner.", 0) == 0)
      throw CheckpointError("invalid checkpoint metadata key " + k);
    echo += k + "=" + v + "\n";
  }
  Writer w;
  w.bytes("SCKP");
  w.u16(kVersion);
  w.u32(std::uint32_t(echo.size()));
  w.bytes(echo);
  w.u32(std::uint32_t(net.params.size()));
  for (const auto& p : net.params) {
    w.u16(std::uint16_t(p.name.size()));
    w.bytes(p.name);
    w.u64(p.rows);
    w.u64(p.cols);
    for (double d : p.value) w.f64(d);
  }
  w.u64(net.adam.step);
  for (std::size_t t = 0; t < net.params.size(); ++t) {
    for (double d : net.adam.m[t]) w.f64(d);
    for (double d : net.adam.v[t]) w.f64(d);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.buf.data()), std::streamsize(w.buf.size()));
  if (!out) throw IoError("checkpoint write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  if (r.bytes(4) != "SCKP") throw CheckpointError("bad checkpoint magic");
  if (r.le(2) != kVersion) throw CheckpointError("unsupported checkpoint version");
  auto kv = parse_echo(r.bytes(std::size_t(r.le(4))));
  Checkpoint ck;
  const auto cfg = config_from_echo(kv);
  ck.meta = std::move(kv);

  // Shapes must match what the config would build.
  const Refiner ref = make_refiner(cfg, 0);
  Refiner& net = ck.net;
  net.config = cfg;
  const auto count = r.le(4);
  if (count != ref.params.size()) throw CheckpointError("checkpoint tensor count mismatch");
  for (std::size_t t = 0; t < count; ++t) {
    ParamTensor p;
    p.name = r.bytes(std::size_t(r.le(2)));
    p.rows = std::size_t(r.le(8));
    p.cols = std::size_t(r.le(8));
    const auto& e = ref.params[t];
    if (p.name != e.name || p.rows != e.rows || p.cols != e.cols)
      throw CheckpointError("checkpoint tensor " + p.name + " does not match config");
    p.value.resize(p.rows * p.cols);
    for (auto& d : p.value) d = r.f64();
    net.params.push_back(std::move(p));
  }
  net.adam.step = r.le(8);
  for (const auto& p : net.params) {
    std::vector<double> m(p.value.size()), v(p.value.size());
    for (auto& d : m) d = r.f64();
    for (auto& d : v) d = r.f64();
    net.adam.m.push_back(std::move(m));
    net.adam.v.push_back(std::move(v));
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

}  // namespace score
