#include "ntssl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>

#include "ntssl/config.hpp"
#include "ntssl/error.hpp"

namespace ntssl {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "ntssl-checkpoint/1";

void put_le(std::ostream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(bytes, 8);
}

double get_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& [name, e] : ckpt.params.entries()) {
    tensors.push_back({{"name", name}, {"shape", e.value.shape()}, {"offset", offset}, {"count", e.value.size()}});
    offset += e.value.size() * 8;
  }
  json manifest = {{"format", kFormat},
                   {"encoder", to_json(ckpt.encoder)},
                   {"config", ckpt.config_echo},
                   {"tensors", tensors},
                   {"blob_bytes", offset}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write checkpoint '" + path.string() + "'");
  out << manifest.dump() << '\n';
  for (const auto& [name, e] : ckpt.params.entries())
    for (double v : e.value.values()) put_le(out, v);
  out.flush();
  if (!out) throw UsageError("I/O failure writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw MismatchError("checkpoint '" + path.string() + "' is empty");
  Checkpoint ckpt;
  try {
    const json manifest = json::parse(header);
    if (manifest.at("format").get<std::string>() != kFormat) throw MismatchError("checkpoint: unsupported format");
    ckpt.encoder = encoder_config_from_json(manifest.at("encoder"));
    ckpt.config_echo = manifest.at("config");
    const std::size_t blob_bytes = manifest.at("blob_bytes").get<std::size_t>();
    std::vector<unsigned char> blob(blob_bytes);
    in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(blob_bytes));
    if (static_cast<std::size_t>(in.gcount()) != blob_bytes) throw MismatchError("checkpoint: truncated blob");
    for (const json& t : manifest.at("tensors")) {
      const auto shape = t.at("shape").get<std::vector<std::size_t>>();
      const auto offset = t.at("offset").get<std::size_t>();
      const auto count = t.at("count").get<std::size_t>();
      if (offset + count * 8 > blob_bytes) throw MismatchError("checkpoint: tensor outside blob");
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = get_le(blob.data() + offset + 8 * i);
      ckpt.params.add(t.at("name").get<std::string>(), Tensor(shape, std::move(data)));
    }
  } catch (const json::exception& e) {
    throw MismatchError(std::string("checkpoint: malformed manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw MismatchError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

}  // namespace ntssl
