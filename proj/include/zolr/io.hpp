#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "zolr/common.hpp"
#include "zolr/vae.hpp"

namespace zolr {

// Little-endian primitives shared by the binary file formats.
namespace le {

template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw IoError("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace le

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return is;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

// ---------------------------------------------------------------------------
// VAE checkpoint
//
//   zolr-vae-checkpoint\n
//   version 1\n
//   input_dim <D>\n
//   latent_dim <L>\n
//   encoder <D> <h1> ... <2L>\n      layer widths, input first
//   decoder <L> ... <D>\n
//   parameters <count>\n
//   end\n
//   <count> x float64 little-endian, in flatten() order: encoder layers
//   (weights row-major out x in, then biases), decoder layers likewise,
//   then decoder_logvar.

inline constexpr int kCheckpointVersion = 1;

inline void write_checkpoint(std::ostream& os, const VaeParams& p) {
  p.validate();
  os << "zolr-vae-checkpoint\n";
  os << "version " << kCheckpointVersion << '\n';
  os << "input_dim " << p.input_dim << '\n';
  os << "latent_dim " << p.latent_dim << '\n';
  os << "encoder " << p.encoder.front().in;
  for (const auto& l : p.encoder) os << ' ' << l.out;
  os << "\ndecoder " << p.decoder.front().in;
  for (const auto& l : p.decoder) os << ' ' << l.out;
  os << "\nparameters " << p.size() << "\nend\n";
  for (double v : flatten(p)) le::put<double>(os, v);
  if (!os) throw IoError("checkpoint: write failed");
}

namespace detail {

inline std::vector<std::size_t> read_widths(const std::string& line, const std::string& key) {
  std::istringstream ls(line);
  std::string k;
  ls >> k;
  if (k != key) throw IoError("checkpoint: expected '" + key + "' line");
  std::vector<std::size_t> w;
  std::size_t v;
  while (ls >> v) w.push_back(v);
  if (w.size() < 2) throw IoError("checkpoint: '" + key + "' needs at least two widths");
  return w;
}

inline std::size_t read_keyed(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("checkpoint: truncated header");
  std::istringstream ls(line);
  std::string k;
  std::size_t v = 0;
  if (!(ls >> k >> v) || k != key) throw IoError("checkpoint: expected '" + key + "' line");
  return v;
}

}  // namespace detail

inline VaeParams read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "zolr-vae-checkpoint")
    throw IoError("checkpoint: bad magic line");
  const auto version = detail::read_keyed(is, "version");
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  VaeParams p;
  p.input_dim = detail::read_keyed(is, "input_dim");
  p.latent_dim = detail::read_keyed(is, "latent_dim");
  std::getline(is, line);
  const auto enc = detail::read_widths(line, "encoder");
  std::getline(is, line);
  const auto dec = detail::read_widths(line, "decoder");
  const auto count = detail::read_keyed(is, "parameters");
  if (!std::getline(is, line) || line != "end") throw IoError("checkpoint: missing 'end'");
  for (std::size_t i = 0; i + 1 < enc.size(); ++i) p.encoder.emplace_back(enc[i], enc[i + 1]);
  for (std::size_t i = 0; i + 1 < dec.size(); ++i) p.decoder.emplace_back(dec[i], dec[i + 1]);
  p.decoder_logvar.assign(p.input_dim, 0.0);
  if (count != p.size()) throw IoError("checkpoint: parameter count does not match layer sizes");
  Vec flat(count);
  for (auto& v : flat) v = le::get<double>(is);
  unflatten(p, flat);
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  return p;
}

inline void save_checkpoint(const std::string& path, const VaeParams& p) {
  auto os = open_out(path);
  write_checkpoint(os, p);
}

inline VaeParams load_checkpoint(const std::string& path) {
  auto is = open_in(path);
  return read_checkpoint(is);
}

}  // namespace zolr
