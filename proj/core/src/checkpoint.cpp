#include "lscnn/checkpoint.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <fstream>

namespace lscnn {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'C', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;
const std::string kMetaIteration = "__meta__.iteration";
const std::string kOptPrefix = "__opt__.";

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::uint8_t b[4] = {
      static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
      static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const char* field) {
  std::uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("checkpoint truncated while reading ") +
                      field);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_tensor(std::ostream& out, const std::string& name, const TensorF& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.shape())
    put_u32(out, static_cast<std::uint32_t>(d));
  out.put(static_cast<char>(kDtypeF32));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(float)));
}

}  // namespace

Digest spec_digest(const ArchitectureSpec& spec) {
  const std::string s = canonical_string(spec);
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(s.data(), s.size(), d.data(), &len, EVP_sha256(), nullptr) !=
          1 ||
      len != d.size())
    throw Error("SHA-256 digest failed");
  return d;
}

std::string sha256_hex(std::string_view data) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != d.size())
    throw Error("SHA-256 digest failed");
  return digest_hex(d);
}

std::string digest_hex(const Digest& d) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(64);
  for (std::uint8_t b : d) {
    out.push_back(hex[b >> 4]);
    out.push_back(hex[b & 0xF]);
  }
  return out;
}

Checkpoint make_checkpoint(const ArchitectureSpec& spec,
                           ModelParams<float> params, std::int64_t iteration) {
  Checkpoint c;
  c.digest = spec_digest(spec);
  c.iteration = iteration;
  c.tensors = std::move(params);
  return c;
}

void save_checkpoint(const Checkpoint& ckpt,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  out.write(reinterpret_cast<const char*>(ckpt.digest.data()),
            static_cast<std::streamsize>(ckpt.digest.size()));

  const std::uint32_t count = static_cast<std::uint32_t>(
      ckpt.tensors.size() + ckpt.opt_state.size() + 1);
  put_u32(out, count);
  put_tensor(out, kMetaIteration,
             TensorF({1}, {static_cast<float>(ckpt.iteration)}));
  for (const auto& [name, t] : ckpt.tensors) put_tensor(out, name, t);
  for (const auto& [name, t] : ckpt.opt_state)
    put_tensor(out, kOptPrefix + name, t);
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("checkpoint " + path.string() + ": bad magic");
  const std::uint32_t version = get_u32(in, "format-version");
  if (version != kVersion)
    throw FormatError("checkpoint " + path.string() +
                      ": unsupported format-version " +
                      std::to_string(version));
  Checkpoint ckpt;
  if (!in.read(reinterpret_cast<char*>(ckpt.digest.data()),
               static_cast<std::streamsize>(ckpt.digest.size())))
    throw FormatError("checkpoint truncated while reading spec-digest");

  const std::uint32_t count = get_u32(in, "tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len))
      throw FormatError("checkpoint truncated while reading tensor name");
    const std::uint32_t rank = get_u32(in, "rank");
    if (rank == 0 || rank > 8)
      throw FormatError("checkpoint tensor '" + name + "': bad rank " +
                        std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = get_u32(in, "dims");
      if (shape[d] == 0)
        throw FormatError("checkpoint tensor '" + name + "': zero dimension");
      n *= shape[d];
    }
    const int dtype = in.get();
    if (dtype == EOF)
      throw FormatError("checkpoint truncated while reading dtype tag");
    if (dtype != kDtypeF32)
      throw FormatError("checkpoint tensor '" + name + "': unknown dtype " +
                        std::to_string(dtype));
    std::vector<float> data(n);
    if (!in.read(reinterpret_cast<char*>(data.data()),
                 static_cast<std::streamsize>(n * sizeof(float))))
      throw FormatError("checkpoint truncated while reading data of '" + name +
                        "'");
    TensorF t(shape, std::move(data));
    if (name == kMetaIteration) {
      ckpt.iteration = static_cast<std::int64_t>(t[0]);
    } else if (name.rfind(kOptPrefix, 0) == 0) {
      ckpt.opt_state.emplace(name.substr(kOptPrefix.size()), std::move(t));
    } else {
      ckpt.tensors.emplace(std::move(name), std::move(t));
    }
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ArchitectureSpec& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  const Digest want = spec_digest(expected);
  if (ckpt.digest != want)
    throw FormatError("checkpoint " + path.string() +
                      ": spec-digest mismatch (file " +
                      digest_hex(ckpt.digest) + ", expected " +
                      digest_hex(want) + " for architecture '" +
                      expected.name + "')");
  return ckpt;
}

}  // namespace lscnn
