#ifndef CHIRPLINK_SRC_MANIFEST_HPP
#define CHIRPLINK_SRC_MANIFEST_HPP

#include <fstream>
#include <string>

#include "chirplink/config.hpp"
#include "chirplink/errors.hpp"
#include "json.hpp"

// JSON sidecars shared by every persisted artifact: a "kind" discriminator
// plus the config hash, so stale or mismatched files fail loudly.
namespace chirplink::manifest {

inline nlohmann::json read(const std::string& path, const char* kind,
                           const LinkConfig& link, bool enforce_hash = true) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("missing manifest: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("unreadable manifest " + path + ": " + e.what());
  }
  if (j.value("kind", "") != kind)
    throw MissingArtifact("manifest " + path + " holds a " +
                          j.value("kind", "(unknown)") + " artifact where a " +
                          std::string(kind) + " is required");
  const std::string want = config_hash_hex(link);
  const std::string got = j.value("config_hash", "");
  if (enforce_hash && got != want)
    throw ConfigHashMismatch("manifest " + path + " was built for config " +
                             got + ", current config is " + want);
  return j;
}

inline void write(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace chirplink::manifest

#endif  // CHIRPLINK_SRC_MANIFEST_HPP
