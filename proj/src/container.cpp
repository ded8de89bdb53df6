#include "chirplink/container.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "chirplink/errors.hpp"

namespace chirplink {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'I', 'R', 'P', 'L', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// All fields are written little-endian; on the (universally little-endian)
// targets we build for this is a plain memcpy.
template <typename T>
void put(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1)
    throw Error("container: short write");
}

template <typename T>
T get(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1)
    throw Error("container: short read");
  return v;
}

}  // namespace

void write_container(const std::string& path, const Container& c) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw Error("container: cannot open for write: " + path);
  if (std::fwrite(kMagic, 1, 8, f.get()) != 8)
    throw Error("container: short write");
  put<std::uint32_t>(f.get(), kVersion);
  put<std::uint32_t>(f.get(), c.channels);
  put<double>(f.get(), c.sample_period);
  put<std::uint64_t>(f.get(), c.length());
  if (!c.payload.empty() &&
      std::fwrite(c.payload.data(), sizeof(double), c.payload.size(),
                  f.get()) != c.payload.size())
    throw Error("container: short write");
}

Container read_container(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw MissingArtifact("container: cannot open: " + path);
  char magic[8];
  if (std::fread(magic, 1, 8, f.get()) != 8 ||
      std::memcmp(magic, kMagic, 8) != 0)
    throw Error("container: bad magic in " + path);
  const auto version = get<std::uint32_t>(f.get());
  if (version != kVersion)
    throw Error("container: unsupported version " + std::to_string(version));
  Container c;
  c.channels = get<std::uint32_t>(f.get());
  c.sample_period = get<double>(f.get());
  const auto length = get<std::uint64_t>(f.get());
  c.payload.resize(static_cast<std::size_t>(c.channels) * length);
  if (!c.payload.empty() &&
      std::fread(c.payload.data(), sizeof(double), c.payload.size(),
                 f.get()) != c.payload.size())
    throw Error("container: truncated payload in " + path);
  return c;
}

}  // namespace chirplink
