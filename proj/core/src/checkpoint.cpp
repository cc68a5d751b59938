#include <cstring>
#include <fstream>

#include "vhd/trainer.hpp"

namespace vhd {

namespace {

constexpr char kMagic[8] = {'R', 'A', 'S', 'L', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  write_u32(out, static_cast<std::uint32_t>(v));
  write_u32(out, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError(path + ": truncated checkpoint");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  const std::uint64_t lo = read_u32(in, path);
  const std::uint64_t hi = read_u32(in, path);
  return lo | (hi << 32);
}

void write_record(std::ostream& out, const std::string& name, const Shape& shape,
                  std::span<const float> payload) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) write_u32(out, static_cast<std::uint32_t>(e));
  for (float v : payload) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(out, bits);
  }
}

struct Record {
  std::string name;
  Shape shape;
  std::vector<float> payload;
};

Record read_record(std::istream& in, const std::string& path) {
  Record rec;
  const std::uint32_t name_len = read_u32(in, path);
  rec.name.resize(name_len);
  if (!in.read(rec.name.data(), name_len)) throw DataError(path + ": truncated record name");
  const std::uint32_t rank = read_u32(in, path);
  rec.shape.resize(rank);
  std::int64_t numel = 1;
  for (auto& e : rec.shape) {
    e = read_u32(in, path);
    numel *= e;
  }
  rec.payload.resize(static_cast<std::size_t>(numel));
  for (auto& v : rec.payload) {
    const std::uint32_t bits = read_u32(in, path);
    std::memcpy(&v, &bits, 4);
  }
  return rec;
}

}  // namespace

void checkpoint_save(const ModelState<float>& model, const RmsPropState<float>& optimizer,
                     std::int64_t step, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(kMagic, 8);
  write_u32(out, kVersion);
  write_u64(out, static_cast<std::uint64_t>(step));
  const std::string echo = serialize_config(model.cfg);
  write_u32(out, static_cast<std::uint32_t>(echo.size()));
  out.write(echo.data(), static_cast<std::streamsize>(echo.size()));

  const auto registry = model.registry();
  if (registry.size() != optimizer.accum.size())
    throw std::runtime_error("checkpoint_save: optimizer state does not match registry");
  write_u32(out, static_cast<std::uint32_t>(registry.size()));
  for (const auto& [name, tensor] : registry) write_record(out, name, tensor.shape(), tensor.data());
  for (std::size_t i = 0; i < registry.size(); ++i)
    write_record(out, "opt." + registry[i].first, registry[i].second.shape(), optimizer.accum[i]);
  if (!out) throw DataError("short write to " + path);
}

Checkpoint checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError(path + ": bad magic, not a checkpoint of this format version");
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw DataError(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::int64_t step = static_cast<std::int64_t>(read_u64(in, path));
  const std::uint32_t echo_len = read_u32(in, path);
  std::string echo(echo_len, '\0');
  if (!in.read(echo.data(), echo_len)) throw DataError(path + ": truncated config echo");
  TrainConfig cfg;
  try {
    cfg = parse_config(echo);
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": bad config echo: " + e.what());
  }

  Checkpoint ckpt;
  ckpt.step = step;
  ckpt.model = ModelState<float>::init(cfg);
  ckpt.optimizer = RmsPropState<float>::init(ckpt.model.registry(), cfg);

  const std::uint32_t count = read_u32(in, path);
  const auto registry = ckpt.model.registry();
  if (count != registry.size())
    throw DataError(path + ": registry mismatch, file has " + std::to_string(count) +
                    " parameters, config implies " + std::to_string(registry.size()));
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Record rec = read_record(in, path);
    if (rec.name != registry[i].first)
      throw DataError(path + ": registry mismatch at record " + std::to_string(i) + ": '" +
                      rec.name + "' vs expected '" + registry[i].first + "'");
    Tensor<float> tensor = registry[i].second;
    if (rec.shape != tensor.shape())
      throw DataError(path + ": shape mismatch for " + rec.name);
    std::copy(rec.payload.begin(), rec.payload.end(), tensor.data().begin());
  }
  for (std::size_t i = 0; i < registry.size(); ++i) {
    Record rec = read_record(in, path);
    if (rec.name != "opt." + registry[i].first)
      throw DataError(path + ": optimizer record mismatch at " + std::to_string(i));
    if (rec.payload.size() != ckpt.optimizer.accum[i].size())
      throw DataError(path + ": optimizer shape mismatch for " + rec.name);
    ckpt.optimizer.accum[i] = std::move(rec.payload);
  }
  return ckpt;
}

}  // namespace vhd
