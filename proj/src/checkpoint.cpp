#include "vmf/checkpoint.hpp"

#include "vmf/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vmf {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "vmf-checkpoint";

std::uint64_t toLittleEndian(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    std::uint64_t y = 0;
    for (int i = 0; i < 8; ++i) y = (y << 8) | ((x >> (8 * i)) & 0xff);
    return y;
  }
}

}  // namespace

std::filesystem::path checkpointBlobPath(const std::filesystem::path& manifest) {
  auto p = manifest;
  p += ".bin";
  return p;
}

void saveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& manifest) {
  nlohmann::json names = nlohmann::json::array();
  nlohmann::json shapes = nlohmann::json::array();
  nlohmann::json offsets = nlohmann::json::array();
  std::string blob;
  for (const auto& [name, tensor] : ckpt.params.slots()) {
    names.push_back(name);
    shapes.push_back(tensor.shape());
    offsets.push_back(blob.size());
    for (double v : tensor.values()) {
      const std::uint64_t bits = toLittleEndian(std::bit_cast<std::uint64_t>(v));
      char buf[8];
      std::memcpy(buf, &bits, 8);
      blob.append(buf, 8);
    }
  }
  const auto blob_path = checkpointBlobPath(manifest);
  nlohmann::json doc = {
      {"format", kFormatName},
      {"format_version", kFormatVersion},
      {"version", ckpt.params.version()},
      {"names", names},
      {"shapes", shapes},
      {"offsets", offsets},
      {"total_bytes", blob.size()},
      {"meta", ckpt.meta},
  };
  {
    std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + blob_path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + manifest.string());
  out << doc.dump(2) << '\n';
}

Checkpoint loadCheckpoint(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open checkpoint " + manifest.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName)
      throw ParseError(manifest.string() + ": not a checkpoint manifest");
    if (doc.at("format_version").get<int>() != kFormatVersion)
      throw ParseError(manifest.string() + ": unsupported format_version");

    const auto blob_path = checkpointBlobPath(manifest);
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open checkpoint blob " + blob_path.string());
    std::ostringstream ss;
    ss << bin.rdbuf();
    const std::string blob = ss.str();
    if (blob.size() != doc.at("total_bytes").get<std::size_t>())
      throw ParseError(blob_path.string() + ": size " + std::to_string(blob.size()) +
                       " does not match manifest");

    const auto& names = doc.at("names");
    const auto& shapes = doc.at("shapes");
    const auto& offsets = doc.at("offsets");
    if (names.size() != shapes.size() || names.size() != offsets.size())
      throw ParseError(manifest.string() + ": names/shapes/offsets lengths differ");

    Checkpoint ckpt;
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const auto name = names[i].get<std::string>();
      auto shape = shapes[i].get<std::vector<std::size_t>>();
      const auto offset = offsets[i].get<std::size_t>();
      std::size_t count = 1;
      for (auto e : shape) count *= e;
      if (offset != expected_offset || offset + 8 * count > blob.size())
        throw ParseError(manifest.string() + ": bad offset for '" + name + "'");
      std::vector<double> values(count);
      for (std::size_t j = 0; j < count; ++j) {
        std::uint64_t bits;
        std::memcpy(&bits, blob.data() + offset + 8 * j, 8);
        values[j] = std::bit_cast<double>(toLittleEndian(bits));
      }
      ckpt.params.set(name, Tensor(std::move(shape), std::move(values)));
      expected_offset = offset + 8 * count;
    }
    if (expected_offset != blob.size())
      throw ParseError(manifest.string() + ": trailing bytes in blob");
    ckpt.params.setVersion(doc.at("version").get<long>());
    ckpt.meta = doc.value("meta", nlohmann::json::object());
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
}

}  // namespace vmf
