#include "lyanet/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "lyanet/error.hpp"

namespace lyanet::nn {
namespace {

constexpr std::array<char, 8> kMagic = {'L', 'Y', 'A', 'N', 'E', 'T', 'C', 'K'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.put(static_cast<char>(v)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.put(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  void bytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw ParseError("checkpoint: unexpected end of file", 0);
  }

 private:
  std::uint64_t le(int n) {
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) throw ParseError("checkpoint: unexpected end of file", 0);
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
    }
    return v;
  }
  std::istream& in_;
};

void write_network(Writer& w, const ParamVector& p) {
  const MlpSpec& spec = p.spec();
  w.u32(static_cast<std::uint32_t>(spec.widths.size()));
  for (std::size_t width : spec.widths) w.u32(static_cast<std::uint32_t>(width));
  for (Activation a : spec.activations) w.u8(static_cast<std::uint8_t>(a));
  w.u64(spec.seed);
  w.u64(p.size());
  for (double v : p.flat()) w.f64(v);
}

ParamVector read_network(Reader& r) {
  MlpSpec spec;
  const std::uint32_t count = r.u32();
  if (count < 2 || count > 1024) throw ParseError("checkpoint: bad layer count", 0);
  for (std::uint32_t i = 0; i < count; ++i) spec.widths.push_back(r.u32());
  for (std::uint32_t i = 0; i + 2 < count; ++i) {
    const std::uint8_t a = r.u8();
    if (a > 1) throw ParseError("checkpoint: unknown activation tag", 0);
    spec.activations.push_back(static_cast<Activation>(a));
  }
  spec.seed = r.u64();
  const std::uint64_t values = r.u64();
  try {
    spec.validate();
  } catch (const ContractViolation& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  if (values != spec.parameter_count()) throw ParseError("checkpoint: parameter count does not match widths", 0);
  ParamVector p(spec);
  for (double& v : p.flat()) v = r.f64();
  return p;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  Writer w(out);
  w.bytes(kMagic.data(), kMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.input_dim));
  w.u32(static_cast<std::uint32_t>(c.state_dim));
  w.u32(static_cast<std::uint32_t>(c.classes));
  w.f64(c.kappa);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.trainer.size()));
  w.bytes(c.trainer.data(), c.trainer.size());
  write_network(w, c.dynamics);
  w.u8(c.phi ? 1 : 0);
  if (c.phi) write_network(w, *c.phi);
  if (c.psi.is_identity()) {
    w.u8(0);
  } else {
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(c.psi.output_dim()));
    w.u32(static_cast<std::uint32_t>(c.psi.input_dim()));
    for (double v : c.psi.weights()) w.f64(v);
    for (double v : c.psi.bias()) w.f64(v);
  }
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  std::array<char, 8> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw ParseError("checkpoint: bad magic (not a lyanet checkpoint)", 0);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 0);
  }
  const std::size_t input_dim = r.u32();
  const std::size_t state_dim = r.u32();
  const std::size_t classes = r.u32();
  const double kappa = r.f64();
  const std::uint64_t seed = r.u64();
  const std::uint32_t name_len = r.u32();
  if (name_len > 4096) throw ParseError("checkpoint: trainer name too long", 0);
  std::string trainer(name_len, '\0');
  r.bytes(trainer.data(), name_len);
  ParamVector dynamics = read_network(r);
  std::optional<ParamVector> phi;
  if (r.u8() == 1) phi = read_network(r);
  OutputMap psi = OutputMap::identity(state_dim);
  const std::uint8_t psi_kind = r.u8();
  if (psi_kind == 1) {
    const std::size_t rows = r.u32();
    const std::size_t cols = r.u32();
    std::vector<double> w(rows * cols), b(rows);
    for (double& v : w) v = r.f64();
    for (double& v : b) v = r.f64();
    psi = OutputMap::affine(rows, cols, std::move(w), std::move(b));
  } else if (psi_kind != 0) {
    throw ParseError("checkpoint: unknown output map kind", 0);
  }
  return Checkpoint{input_dim, state_dim, classes, kappa, seed, std::move(trainer),
                    std::move(dynamics), std::move(phi), std::move(psi)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open " + path.string(), 0);
  return read_checkpoint(in);
}

}  // namespace lyanet::nn
