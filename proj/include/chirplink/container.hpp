#ifndef CHIRPLINK_CONTAINER_HPP
#define CHIRPLINK_CONTAINER_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace chirplink {

// Flat little-endian binary container used for every persisted sequence:
// trajectories, fields, datasets and parameter checkpoints. Layout:
//
//   bytes 0..7   magic "CHIRPLNK"
//   u32          version (currently 1)
//   u32          channels
//   f64          sample_period [s] (0 for non-waveform payloads)
//   u64          length (samples per channel)
//   f64[channels * length]  payload, channel-major
//
// A JSON sidecar next to the file carries whatever structured metadata the
// producer needs (laser parameters, normalization constants, shapes).
struct Container {
  std::uint32_t channels = 1;
  double sample_period = 0.0;
  std::vector<double> payload;  // channels * length, channel-major

  std::uint64_t length() const {
    return channels == 0 ? 0 : payload.size() / channels;
  }
  const double* channel(std::uint32_t c) const {
    return payload.data() + static_cast<std::size_t>(c) * length();
  }
};

void write_container(const std::string& path, const Container& c);
Container read_container(const std::string& path);

}  // namespace chirplink

#endif  // CHIRPLINK_CONTAINER_HPP
