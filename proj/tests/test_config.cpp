#include "chirplink/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "chirplink/container.hpp"
#include "chirplink/errors.hpp"
#include "chirplink/rng.hpp"
#include "oracles.hpp"

using namespace chirplink;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "chirplink-test-config";
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const std::string& name, const std::string& body) {
  const fs::path p = scratch_dir() / name;
  std::ofstream out(p);
  out << body;
  return p;
}

const std::string kLaserJson = R"({
  "active_volume_m3": 1e-17,
  "confinement_factor": 0.3,
  "gain_coefficient_m3_per_s": 4e-12,
  "transparency_density_per_m3": 1e24,
  "carrier_lifetime_s": 5e-10,
  "photon_lifetime_s": 1.2e-12,
  "gain_compression_m3": 1.5e-23,
  "spontaneous_emission_factor": 1e-4,
  "linewidth_enhancement_alpha": 3.0,
  "power_per_photon_density_w_m3": 6.7e-25
})";

std::string link_json(const std::string& extra) {
  return R"({"symbol_rate_gbd": 70, "laser_params": "laser.json")" +
         (extra.empty() ? "" : ", " + extra) + "}";
}

}  // namespace

TEST_CASE("containers round-trip byte for byte") {
  RngStream rng(11, "container-test");
  Container c;
  c.channels = 3;
  c.sample_period = 1.0 / 280e9;
  c.payload = rng.normal_vec(3 * 17);

  const fs::path p = scratch_dir() / "roundtrip.bin";
  write_container(p.string(), c);
  const Container r = read_container(p.string());
  CHECK(r.channels == c.channels);
  CHECK(r.sample_period == c.sample_period);
  CHECK(r.length() == 17);
  CHECK(r.payload == c.payload);
  CHECK(r.channel(2)[0] == c.payload[34]);
}

TEST_CASE("container rejects missing and mangled files") {
  CHECK_THROWS_AS(read_container((scratch_dir() / "nope.bin").string()),
                  MissingArtifact);

  Container c;
  c.payload = {1.0, 2.0};
  const fs::path p = scratch_dir() / "mangled.bin";
  write_container(p.string(), c);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("WRONGMAG", 8);
  }
  CHECK_THROWS_AS(read_container(p.string()), Error);
}

TEST_CASE("shipped configs load with coherent defaults") {
  const LinkConfig link =
      load_link_config(std::string(CHIRPLINK_SOURCE_DIR) + "/configs/link_70g.json");
  CHECK(link.symbol_rate_gbd == 70.0);
  CHECK(link.samples_per_symbol == 4);
  CHECK(link.seed == 1234);
  CHECK(link.symbol_rate_hz() == doctest::Approx(70e9));
  CHECK(link.sample_rate_hz() == doctest::Approx(280e9));
  CHECK(link.taps.fir == link.taps.dpd + link.taps.eq);
  CHECK(link.fiber.fir_length % 2 == 1);

  const LaserParams ref = oracles::default_laser();
  CHECK(link.laser.active_volume == ref.active_volume);
  CHECK(link.laser.gain_coefficient == ref.gain_coefficient);
  CHECK(link.laser.linewidth_enhancement_alpha == ref.linewidth_enhancement_alpha);
  CHECK(link.laser.power_per_photon_density == ref.power_per_photon_density);

  const LinkConfig smoke =
      load_link_config(std::string(CHIRPLINK_SOURCE_DIR) + "/configs/link_smoke.json");
  CHECK(smoke.dataset.train_sequences == 12);
  CHECK(smoke.evaluation.n_symbols == 2000);
}

TEST_CASE("config parsing rejects malformed inputs") {
  write_text("laser.json", kLaserJson);

  const fs::path ok = write_text("ok.json", link_json(""));
  CHECK(load_link_config(ok.string()).symbol_rate_gbd == 70.0);

  const fs::path no_rate =
      write_text("no_rate.json", R"({"laser_params": "laser.json"})");
  CHECK_THROWS_WITH_AS(load_link_config(no_rate.string()),
                       doctest::Contains("symbol_rate_gbd"), ConfigError);

  const fs::path unknown =
      write_text("unknown.json", link_json(R"("symbol_rate": 70)"));
  CHECK_THROWS_WITH_AS(load_link_config(unknown.string()),
                       doctest::Contains("symbol_rate"), ConfigError);

  const fs::path bad_budget =
      write_text("bad_budget.json", link_json(R"("taps": {"dpd": 16})"));
  CHECK_THROWS_AS(load_link_config(bad_budget.string()), ConfigError);

  const fs::path bad_schema =
      write_text("bad_schema.json", link_json(R"("schema_version": 2)"));
  CHECK_THROWS_AS(load_link_config(bad_schema.string()), ConfigError);

  const fs::path no_laser = write_text(
      "no_laser.json", R"({"symbol_rate_gbd": 70, "laser_params": "gone.json"})");
  CHECK_THROWS_AS(load_link_config(no_laser.string()), ConfigError);

  const fs::path underscore =
      write_text("underscore.json", link_json(R"("_comment": "ignored")"));
  CHECK(load_link_config(underscore.string()).symbol_rate_gbd == 70.0);
}

TEST_CASE("config hash tracks content, not the seed") {
  write_text("laser.json", kLaserJson);
  const fs::path base = write_text("hash_base.json", link_json(R"("seed": 1)"));
  const fs::path seed2 = write_text("hash_seed.json", link_json(R"("seed": 2)"));
  const fs::path snr = write_text(
      "hash_snr.json", link_json(R"("seed": 1, "noise": {"snr_db": 21})"));

  const std::uint64_t h1 = config_hash(load_link_config(base.string()));
  const std::uint64_t h1b = config_hash(load_link_config(base.string()));
  const std::uint64_t h2 = config_hash(load_link_config(seed2.string()));
  const std::uint64_t h3 = config_hash(load_link_config(snr.string()));
  CHECK(h1 == h1b);
  CHECK(h1 == h2);  // reruns with a new seed reuse cached artifacts
  CHECK(h1 != h3);
  CHECK(config_hash_hex(load_link_config(base.string())).size() == 16);
}
