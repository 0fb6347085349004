#include "sprite/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "sprite/errors.hpp"

namespace sprite {

namespace {

constexpr std::int64_t kRawMagic = 0x4C525053;  // "SPRL"

std::uint64_t bswap64(std::uint64_t v) {
  v = ((v & 0x00000000ffffffffull) << 32) | (v >> 32);
  v = ((v & 0x0000ffff0000ffffull) << 16) | ((v >> 16) & 0x0000ffff0000ffffull);
  v = ((v & 0x00ff00ff00ff00ffull) << 8) | ((v >> 8) & 0x00ff00ff00ff00ffull);
  return v;
}

std::uint32_t bswap32(std::uint32_t v) {
  v = ((v & 0x0000ffffu) << 16) | (v >> 16);
  v = ((v & 0x00ff00ffu) << 8) | ((v >> 8) & 0x00ff00ffu);
  return v;
}

double be_to_double(const unsigned char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  if constexpr (std::endian::native == std::endian::little) v = bswap64(v);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

float be_to_float(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  if constexpr (std::endian::native == std::endian::little) v = bswap32(v);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

void double_to_be(double d, unsigned char* p) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  if constexpr (std::endian::native == std::endian::little) v = bswap64(v);
  std::memcpy(p, &v, 8);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fits_card(const std::string& key, const std::string& value,
                      bool quoted = false) {
  std::string card = key;
  card.resize(8, ' ');
  card += "= ";
  std::string v = quoted ? "'" + value + "'" : value;
  if (!quoted && v.size() < 20) v.insert(0, 20 - v.size(), ' ');
  card += v;
  card.resize(80, ' ');
  return card;
}

std::string fits_value_str(double v) {
  std::ostringstream ss;
  ss.precision(16);
  ss << v;
  return ss.str();
}

struct FitsHeader {
  int bitpix = 0;
  std::vector<long> naxes;
  double bscale = 1.0, bzero = 0.0;
  std::vector<double> sigmas, fluxes;
};

FitsHeader parse_fits_header(const std::string& bytes, std::size_t& data_offset) {
  FitsHeader h;
  std::size_t pos = 0;
  bool ended = false;
  int naxis = -1;
  std::vector<std::pair<int, double>> sig_kw, flux_kw;
  while (!ended) {
    if (pos + 2880 > bytes.size()) throw input_error("FITS: truncated header");
    for (int c = 0; c < 36; ++c) {
      const std::string card = bytes.substr(pos + c * 80, 80);
      const std::string key = card.substr(0, 8);
      if (key == "END     ") {
        ended = true;
        break;
      }
      if (card[8] != '=') continue;
      std::string value = card.substr(10);
      if (auto slash = value.find('/'); slash != std::string::npos)
        value = value.substr(0, slash);
      auto trimmed = [&value]() {
        std::string s = value;
        s.erase(0, s.find_first_not_of(" '"));
        s.erase(s.find_last_not_of(" '") + 1);
        return s;
      }();
      const std::string k = key.substr(0, key.find_first_of(' '));
      if (k == "BITPIX") h.bitpix = std::stoi(trimmed);
      else if (k == "NAXIS") naxis = std::stoi(trimmed);
      else if (k.rfind("NAXIS", 0) == 0 && k.size() > 5)
        h.naxes.resize(std::max<std::size_t>(h.naxes.size(), std::stoul(k.substr(5)))),
            h.naxes[std::stoul(k.substr(5)) - 1] = std::stol(trimmed);
      else if (k == "BSCALE") h.bscale = std::stod(trimmed);
      else if (k == "BZERO") h.bzero = std::stod(trimmed);
      else if (k.rfind("SIGMA", 0) == 0 && k.size() > 5)
        sig_kw.emplace_back(std::stoi(k.substr(5)), std::stod(trimmed));
      else if (k.rfind("FLUX", 0) == 0 && k.size() > 4)
        flux_kw.emplace_back(std::stoi(k.substr(4)), std::stod(trimmed));
    }
    pos += 2880;
  }
  if (naxis >= 0 && h.naxes.size() > std::size_t(naxis)) h.naxes.resize(naxis);
  auto collect = [](std::vector<std::pair<int, double>>& kw) {
    std::sort(kw.begin(), kw.end());
    std::vector<double> out;
    for (auto& [idx, v] : kw) out.push_back(v);
    return out;
  };
  h.sigmas = collect(sig_kw);
  h.fluxes = collect(flux_kw);
  data_offset = pos;
  return h;
}

}  // namespace

CubeFile read_fits(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 2880 || bytes.compare(0, 6, "SIMPLE") != 0)
    throw input_error(path + ": not a FITS file");
  std::size_t offset = 0;
  const FitsHeader h = parse_fits_header(bytes, offset);
  if (h.naxes.size() != 2 && h.naxes.size() != 3)
    throw input_error(path + ": expected NAXIS 2 or 3");
  if (h.bitpix != -32 && h.bitpix != -64)
    throw input_error(path + ": only float FITS data supported (BITPIX -32/-64)");
  const long w = h.naxes[0], ht = h.naxes[1];
  const long n = h.naxes.size() == 3 ? h.naxes[2] : 1;
  if (w <= 0 || ht <= 0 || n <= 0) throw input_error(path + ": bad FITS axes");
  const std::size_t bpp = h.bitpix == -32 ? 4 : 8;
  const std::size_t need = std::size_t(w) * ht * n * bpp;
  if (offset + need > bytes.size()) throw input_error(path + ": truncated FITS data");

  CubeFile cube;
  cube.sigmas = h.sigmas;
  cube.fluxes = h.fluxes;
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (long k = 0; k < n; ++k) {
    Image img{int(ht), int(w)};
    for (long i = 0; i < ht; ++i)
      for (long j = 0; j < w; ++j) {
        const std::size_t idx = (std::size_t(k) * ht + i) * w + j;
        const double raw = bpp == 4 ? double(be_to_float(p + idx * 4))
                                    : be_to_double(p + idx * 8);
        img(int(i), int(j)) = h.bzero + h.bscale * raw;
      }
    img.validate();
    cube.planes.push_back(std::move(img));
  }
  return cube;
}

namespace {

std::string build_fits(const std::vector<Image>& planes,
                       const std::vector<double>& sigmas,
                       const std::vector<double>& fluxes) {
  if (planes.empty()) throw input_error("write_fits: no planes");
  const int h = planes.front().height(), w = planes.front().width();
  for (const auto& p : planes)
    if (p.height() != h || p.width() != w)
      throw input_error("write_fits: planes differ in size");

  std::string header;
  header += fits_card("SIMPLE", "T");
  header += fits_card("BITPIX", "-64");
  header += fits_card("NAXIS", planes.size() == 1 ? "2" : "3");
  header += fits_card("NAXIS1", std::to_string(w));
  header += fits_card("NAXIS2", std::to_string(h));
  if (planes.size() > 1) header += fits_card("NAXIS3", std::to_string(planes.size()));
  for (std::size_t k = 0; k < sigmas.size(); ++k)
    header += fits_card("SIGMA" + std::to_string(k + 1), fits_value_str(sigmas[k]));
  for (std::size_t k = 0; k < fluxes.size(); ++k)
    header += fits_card("FLUX" + std::to_string(k + 1), fits_value_str(fluxes[k]));
  {
    std::string end = "END";
    end.resize(80, ' ');
    header += end;
  }
  header.resize(((header.size() + 2879) / 2880) * 2880, ' ');

  std::string data(planes.size() * std::size_t(h) * w * 8, '\0');
  auto* out = reinterpret_cast<unsigned char*>(data.data());
  std::size_t idx = 0;
  for (const auto& plane : planes)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) double_to_be(plane(i, j), out + 8 * idx++);
  data.resize(((data.size() + 2879) / 2880) * 2880, '\0');
  return header + data;
}

}  // namespace

void write_fits_image(const std::string& path, const Image& image) {
  atomic_write_bytes(path, build_fits({image}, {}, {}));
}

void write_fits_cube(const std::string& path, const std::vector<Image>& planes,
                     const std::vector<double>& sigmas,
                     const std::vector<double>& fluxes) {
  atomic_write_bytes(path, build_fits(planes, sigmas, fluxes));
}

CubeFile read_raw(const std::string& path) {
  const std::string bytes = read_file_bytes(path);
  if (bytes.size() < 64) throw input_error(path + ": raw file too small");
  std::int64_t head[8];
  std::memcpy(head, bytes.data(), 64);
  if (head[0] != kRawMagic) throw input_error(path + ": bad raw magic");
  if (head[1] != 1) throw input_error(path + ": unsupported raw version");
  const std::int64_t n = head[2], h = head[3], w = head[4];
  if (n <= 0 || h <= 0 || w <= 0) throw input_error(path + ": bad raw dims");
  const std::size_t need = 64 + std::size_t(n) * h * w * 8;
  if (bytes.size() < need) throw input_error(path + ": truncated raw data");
  CubeFile cube;
  const char* p = bytes.data() + 64;
  for (std::int64_t k = 0; k < n; ++k) {
    Image img{int(h), int(w)};
    std::memcpy(img.data(), p + std::size_t(k) * h * w * 8,
                std::size_t(h) * w * 8);
    img.validate();
    cube.planes.push_back(std::move(img));
  }
  return cube;
}

void write_raw(const std::string& path, const std::vector<Image>& planes) {
  if (planes.empty()) throw input_error("write_raw: no planes");
  const int h = planes.front().height(), w = planes.front().width();
  std::int64_t head[8] = {kRawMagic, 1, std::int64_t(planes.size()), h, w, 0, 0, 0};
  std::string bytes(64 + planes.size() * std::size_t(h) * w * 8, '\0');
  std::memcpy(bytes.data(), head, 64);
  char* p = bytes.data() + 64;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    if (planes[k].height() != h || planes[k].width() != w)
      throw input_error("write_raw: planes differ in size");
    std::memcpy(p + k * std::size_t(h) * w * 8, planes[k].data(),
                std::size_t(h) * w * 8);
  }
  atomic_write_bytes(path, bytes);
}

CubeFile read_stack_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open " + path);
  char magic[8] = {};
  in.read(magic, 8);
  in.close();
  if (std::memcmp(magic, "SIMPLE", 6) == 0) return read_fits(path);
  std::int64_t m;
  std::memcpy(&m, magic, 8);
  if (m == kRawMagic) return read_raw(path);
  throw input_error(path + ": unrecognized stack format");
}

void write_report(const std::string& path, const EstimationReport& report,
                  const SolveDiagnostics& diag) {
  std::ostringstream ss;
  ss.precision(12);
  ss << "# reconstruction report\n";
  ss << "exposures = " << report.sigmas.size() << "\n";
  ss << "aperture_radius = " << report.aperture_radius << "\n";
  ss << "sigma_degenerate = " << (report.sigma_degenerate ? 1 : 0) << "\n";
  for (std::size_t k = 0; k < report.sigmas.size(); ++k) {
    ss << "sigma_" << k << " = " << report.sigmas[k] << "\n";
    ss << "flux_" << k << " = " << report.fluxes[k] << "\n";
    ss << "shift_" << k << " = " << report.shifts[k][0] << " "
       << report.shifts[k][1] << "\n";
  }
  ss << "rho_normal = " << diag.rho_normal << "\n";
  ss << "mu = " << diag.mu << "\n";
  ss << "iterations = " << diag.iterations << "\n";
  ss << "hit_iteration_cap = " << (diag.hit_iteration_cap ? 1 : 0) << "\n";
  for (std::size_t b = 0; b < diag.lambda_per_scale.size(); ++b)
    ss << "lambda_scale_" << b << " = " << diag.lambda_per_scale[b] << "\n";
  ss << "# iter j1 penalty objective step_rel_change\n";
  for (std::size_t i = 0; i < diag.history.size(); ++i) {
    const auto& r = diag.history[i];
    ss << i << " " << r.j1 << " " << r.penalty << " " << r.objective << " "
       << r.step_rel_change << "\n";
  }
  atomic_write_bytes(path, ss.str());
}

void write_sidecar(const std::string& path,
                   const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ostringstream ss;
  for (const auto& [k, v] : entries) ss << k << " = " << v << "\n";
  atomic_write_bytes(path, ss.str());
}

std::vector<std::pair<std::string, std::string>> read_key_values(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error("cannot open " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void atomic_write_bytes(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write " + tmp.string());
    out.write(bytes.data(), std::streamsize(bytes.size()));
    if (!out) throw input_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace sprite
