#include "fermi/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "fermi/errors.hpp"

namespace fermi {

namespace {

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(U) > in.size()) throw IoError("truncated checkpoint");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

std::string encode_checkpoint(const DrqnNet& net) {
  const auto& s = net.shape();
  std::string out = "DRQN";
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.obs_dim));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.hidden));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.heads[1]));
  const auto p = net.params();
  put_le<std::uint64_t>(out, p.size());
  for (double d : p) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(d));
  return out;
}

DrqnNet decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 || bytes.compare(0, 4, "DRQN") != 0) throw IoError("not a model checkpoint");
  std::size_t pos = 4;
  const auto version = get_le<std::uint32_t>(bytes, pos);
  if (version != kCheckpointVersion) throw IoError(fmt::format("unsupported checkpoint version {}", version));
  NetShape s;
  s.obs_dim = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  s.hidden = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  s.heads[1] = static_cast<int>(get_le<std::uint32_t>(bytes, pos));
  const auto count = get_le<std::uint64_t>(bytes, pos);
  DrqnNet net(s);
  if (count != net.layout().total)
    throw IoError(fmt::format("checkpoint holds {} parameters, header implies {}", count, net.layout().total));
  if (bytes.size() - pos != count * 8) throw IoError("checkpoint size does not match its header");
  std::vector<double> p(count);
  for (auto& d : p) d = std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
  net.set_params(p);
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const DrqnNet& net) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(fmt::format("cannot write {}", path.string()));
  const auto bytes = encode_checkpoint(net);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(fmt::format("write failed for {}", path.string()));
}

DrqnNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(fmt::format("cannot open {}", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace fermi
