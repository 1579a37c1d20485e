/*
 * Copyright 2026 The gpufp Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Container layout (all integers little-endian):
//
//   0   8 bytes  magic "GPUFPBIN"
//   8   u16      container version (1)
//   10  u16      reserved, 0
//   12  u32      manifest length M
//   16  M bytes  JSON manifest: {"format", "version", "sections": [{name, length, crc32}], ...}
//   ..           section payloads, in manifest order
//   end u32      CRC-32 of every preceding byte

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <json.hpp>

#include "gpufp/bytes.hpp"
#include "gpufp/registry.hpp"

namespace gpufp {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'G', 'P', 'U', 'F', 'P', 'B', 'I', 'N'};
constexpr std::uint16_t kContainerVersion = 1;
constexpr int kRegistryVersion = 1;
constexpr int kFleetVersion = 1;
constexpr std::size_t kHeaderSize = 16;

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
    crc = crc32(crc, bytes.data() + off, n);
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

[[noreturn]] void corrupt(const std::string& section, const std::string& what) {
  fail(ErrorKind::kIntegrity, "section '" + section + "': " + what);
}

struct Section {
  std::string name;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> write_container(const std::string& format, int version,
                                          const std::vector<Section>& sections, json extra) {
  json manifest = std::move(extra);
  manifest["format"] = format;
  manifest["version"] = version;
  manifest["sections"] = json::array();
  for (const auto& s : sections) {
    manifest["sections"].push_back(
        {{"name", s.name}, {"length", s.payload.size()}, {"crc32", crc32_of(s.payload)}});
  }
  const std::string text = manifest.dump();

  ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 8));
  w.u16(kContainerVersion);
  w.u16(0);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  for (const auto& s : sections) w.bytes(s.payload);
  const std::uint32_t crc = crc32_of(w.data());
  w.u32(crc);
  return std::move(w).take();
}

struct ParsedContainer {
  json manifest;
  std::vector<std::pair<std::string, std::span<const std::uint8_t>>> sections;

  std::span<const std::uint8_t> section(const std::string& name) const {
    for (const auto& [n, bytes] : sections) {
      if (n == name) return bytes;
    }
    corrupt(name, "missing from manifest");
  }
};

ParsedContainer read_container(std::span<const std::uint8_t> bytes, const std::string& format,
                               int version) {
  if (bytes.size() < kHeaderSize) corrupt("header", "file shorter than the fixed header");
  if (!std::equal(kMagic, kMagic + 8, bytes.begin())) corrupt("header", "bad magic");
  ByteReader r(bytes.subspan(8));
  std::uint16_t container_version = 0, reserved = 0;
  std::uint32_t manifest_len = 0;
  r.u16(container_version);
  r.u16(reserved);
  r.u32(manifest_len);
  if (container_version != kContainerVersion) {
    corrupt("header", "unsupported container version " + std::to_string(container_version));
  }
  if (reserved != 0) corrupt("header", "reserved field is non-zero");
  if (bytes.size() - kHeaderSize < manifest_len) corrupt("manifest", "truncated");

  ParsedContainer out;
  const auto manifest_bytes = bytes.subspan(kHeaderSize, manifest_len);
  try {
    out.manifest = json::parse(manifest_bytes.begin(), manifest_bytes.end());
    if (out.manifest.at("format").get<std::string>() != format) {
      corrupt("manifest", "format is '" + out.manifest.at("format").get<std::string>() + "', expected '" + format + "'");
    }
    if (out.manifest.at("version").get<int>() != version) {
      corrupt("manifest", "unsupported version " + std::to_string(out.manifest.at("version").get<int>()));
    }
    std::size_t offset = kHeaderSize + manifest_len;
    for (const auto& s : out.manifest.at("sections")) {
      const auto name = s.at("name").get<std::string>();
      const auto length = s.at("length").get<std::uint64_t>();
      const auto crc = s.at("crc32").get<std::uint32_t>();
      if (bytes.size() < offset || bytes.size() - offset < length) corrupt(name, "truncated");
      const auto payload = bytes.subspan(offset, static_cast<std::size_t>(length));
      offset += static_cast<std::size_t>(length);
      if (crc32_of(payload) != crc) corrupt(name, "checksum mismatch");
      out.sections.emplace_back(name, payload);
    }
    if (bytes.size() - offset != 4) {
      corrupt("trailer", bytes.size() - offset < 4 ? "truncated" : "unexpected trailing bytes");
    }
    ByteReader tr(bytes.subspan(offset));
    std::uint32_t file_crc = 0;
    tr.u32(file_crc);
    if (file_crc != crc32_of(bytes.first(offset))) corrupt("trailer", "file checksum mismatch");
  } catch (const json::exception& e) {
    corrupt("manifest", std::string("malformed: ") + e.what());
  }
  return out;
}

// Guard against absurd counts before allocating.
void require_room(const ByteReader& r, std::uint64_t count, std::uint64_t bytes_each,
                  const std::string& section) {
  if (bytes_each != 0 && count > r.remaining() / bytes_each) corrupt(section, "count exceeds payload");
}

std::vector<std::uint8_t> encode_pool(const SeedPool& pool) {
  ByteWriter w;
  w.str(pool.rng_source());
  const auto entries = pool.entries();
  w.u64(entries.size());
  for (const auto& e : entries) {
    w.u64(e.seed.hi);
    w.u64(e.seed.lo);
    w.u8(static_cast<std::uint8_t>(e.state));
  }
  return std::move(w).take();
}

SeedPool decode_pool(std::span<const std::uint8_t> bytes) {
  const std::string sec = "seed_pool";
  ByteReader r(bytes);
  std::string source;
  std::uint64_t count = 0;
  if (!r.str(source) || !r.u64(count)) corrupt(sec, "truncated header");
  require_room(r, count, 17, sec);
  std::vector<SeedPool::Entry> entries(static_cast<std::size_t>(count));
  for (auto& e : entries) {
    std::uint8_t state = 0;
    if (!r.u64(e.seed.hi) || !r.u64(e.seed.lo) || !r.u8(state)) corrupt(sec, "truncated entry");
    if (state > 2) corrupt(sec, "invalid seed state " + std::to_string(state));
    e.state = static_cast<SeedState>(state);
  }
  if (r.remaining() != 0) corrupt(sec, "trailing bytes");
  try {
    return SeedPool(std::move(entries), std::move(source));
  } catch (const Error& e) {
    corrupt(sec, e.what());
  }
}

std::vector<std::uint8_t> encode_dossiers(const std::vector<DeviceDossier>& dossiers) {
  ByteWriter w;
  w.u64(dossiers.size());
  for (const auto& d : dossiers) {
    w.u64(d.device_id.value);
    w.f64(d.claimed_location.x);
    w.f64(d.claimed_location.y);
    w.u8(d.identity_threshold.has_value() ? 1 : 0);
    w.u64(d.identity_threshold.value_or(0));
    w.u64(d.records.size());
    for (const auto& [seed, rec] : d.records) {
      w.u64(seed.hi);
      w.u64(seed.lo);
      w.i64(rec.enrolled_at_ns);
      const Layout layout = rec.fingerprints.empty() ? Layout{} : rec.fingerprints.front().layout;
      w.u32(layout.n_sms);
      w.u32(layout.n_rounds);
      w.u64(rec.fingerprints.size());
      for (const auto& fp : rec.fingerprints) {
        for (std::uint32_t v : fp.elements) w.u32(v);
      }
    }
  }
  return std::move(w).take();
}

std::vector<DeviceDossier> decode_dossiers(std::span<const std::uint8_t> bytes) {
  const std::string sec = "dossiers";
  ByteReader r(bytes);
  std::uint64_t count = 0;
  if (!r.u64(count)) corrupt(sec, "truncated header");
  require_room(r, count, 41, sec);
  std::vector<DeviceDossier> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::uint64_t i = 0; i < count; ++i) {
    DeviceDossier d;
    std::uint8_t has_threshold = 0;
    std::uint64_t threshold = 0, n_records = 0;
    if (!r.u64(d.device_id.value) || !r.f64(d.claimed_location.x) || !r.f64(d.claimed_location.y) ||
        !r.u8(has_threshold) || !r.u64(threshold) || !r.u64(n_records)) {
      corrupt(sec, "truncated dossier");
    }
    if (has_threshold > 1) corrupt(sec, "invalid threshold flag");
    if (has_threshold) d.identity_threshold = threshold;
    require_room(r, n_records, 40, sec);
    for (std::uint64_t k = 0; k < n_records; ++k) {
      RegistrationRecord rec;
      rec.device_id = d.device_id;
      Layout layout;
      std::uint64_t n_fps = 0;
      if (!r.u64(rec.seed.hi) || !r.u64(rec.seed.lo) || !r.i64(rec.enrolled_at_ns) ||
          !r.u32(layout.n_sms) || !r.u32(layout.n_rounds) || !r.u64(n_fps)) {
        corrupt(sec, "truncated record");
      }
      if (n_fps == 0) corrupt(sec, "record without fingerprints");
      require_room(r, n_fps, 4 * static_cast<std::uint64_t>(layout.size()), sec);
      if (layout.size() == 0) corrupt(sec, "record with empty layout");
      for (std::uint64_t f = 0; f < n_fps; ++f) {
        Fingerprint fp;
        fp.seed = rec.seed;
        fp.layout = layout;
        fp.elements.resize(layout.size());
        for (auto& v : fp.elements) {
          if (!r.u32(v)) corrupt(sec, "truncated fingerprint");
        }
        rec.fingerprints.push_back(std::move(fp));
      }
      if (!d.records.emplace(rec.seed, std::move(rec)).second) corrupt(sec, "duplicate seed record");
    }
    out.push_back(std::move(d));
  }
  if (r.remaining() != 0) corrupt(sec, "trailing bytes");
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> serialize_registry(const std::vector<DeviceDossier>& dossiers,
                                             const SeedPool& pool) {
  std::vector<Section> sections;
  sections.push_back({"seed_pool", encode_pool(pool)});
  sections.push_back({"dossiers", encode_dossiers(dossiers)});
  json extra;
  extra["devices"] = dossiers.size();
  extra["seeds"] = pool.size();
  return write_container("gpufp-registry", kRegistryVersion, sections, std::move(extra));
}

RegistryData deserialize_registry(std::span<const std::uint8_t> bytes) {
  const auto c = read_container(bytes, "gpufp-registry", kRegistryVersion);
  RegistryData out;
  out.pool = decode_pool(c.section("seed_pool"));
  out.dossiers = decode_dossiers(c.section("dossiers"));
  return out;
}

void save_registry(const std::vector<DeviceDossier>& dossiers, const SeedPool& pool,
                   const std::filesystem::path& path) {
  write_file(path, serialize_registry(dossiers, pool));
}

RegistryData load_registry(const std::filesystem::path& path) {
  return deserialize_registry(read_file(path));
}

std::vector<std::uint8_t> serialize_fleet(const FleetData& fleet) {
  ByteWriter p;
  const auto& sp = fleet.params;
  p.u32(sp.n_sms);
  p.u32(sp.n_rounds);
  p.u32(sp.sync_interval);
  p.f64(sp.sigma_profile);
  p.f64(sp.sigma_jitter);
  p.f64(sp.sigma_seed_delay);
  p.f64(sp.sigma_drift);
  p.f64(sp.compute_time_mean);
  p.f64(sp.compute_time_jitter);

  ByteWriter d;
  d.u64(fleet.profiles.size());
  for (const auto& prof : fleet.profiles) {
    d.u64(prof.device_id().value);
    d.u32(static_cast<std::uint32_t>(prof.sm_offsets().size()));
    for (double o : prof.sm_offsets()) d.f64(o);
  }

  std::vector<Section> sections;
  sections.push_back({"sim_params", std::move(p).take()});
  sections.push_back({"profiles", std::move(d).take()});
  json extra;
  extra["devices"] = fleet.profiles.size();
  return write_container("gpufp-fleet", kFleetVersion, sections, std::move(extra));
}

FleetData deserialize_fleet(std::span<const std::uint8_t> bytes) {
  const auto c = read_container(bytes, "gpufp-fleet", kFleetVersion);
  FleetData out;
  {
    ByteReader r(c.section("sim_params"));
    auto& sp = out.params;
    if (!r.u32(sp.n_sms) || !r.u32(sp.n_rounds) || !r.u32(sp.sync_interval) || !r.f64(sp.sigma_profile) ||
        !r.f64(sp.sigma_jitter) || !r.f64(sp.sigma_seed_delay) || !r.f64(sp.sigma_drift) ||
        !r.f64(sp.compute_time_mean) || !r.f64(sp.compute_time_jitter) || r.remaining() != 0) {
      corrupt("sim_params", "wrong length");
    }
    try {
      sp.validate();
    } catch (const Error& e) {
      corrupt("sim_params", e.what());
    }
  }
  ByteReader r(c.section("profiles"));
  std::uint64_t count = 0;
  if (!r.u64(count)) corrupt("profiles", "truncated header");
  require_room(r, count, 12, "profiles");
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t id = 0;
    std::uint32_t n = 0;
    if (!r.u64(id) || !r.u32(n)) corrupt("profiles", "truncated profile");
    require_room(r, n, 8, "profiles");
    std::vector<double> offsets(n);
    for (double& o : offsets) r.f64(o);
    out.profiles.emplace_back(DeviceId{id}, std::move(offsets));
  }
  if (r.remaining() != 0) corrupt("profiles", "trailing bytes");
  return out;
}

void save_fleet(const FleetData& fleet, const std::filesystem::path& path) {
  write_file(path, serialize_fleet(fleet));
}

FleetData load_fleet(const std::filesystem::path& path) { return deserialize_fleet(read_file(path)); }

}  // namespace gpufp
