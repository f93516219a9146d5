#include "ec4srec/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ec4srec/common.hpp"

namespace ec4srec::ckpt {

namespace {
constexpr char kMagic[8] = {'E', 'C', '4', 'S', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
}  // namespace

const Eigen::MatrixXd& Container::array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw ParseError("checkpoint is missing array: " + name);
}

bool Container::has_array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return true;
  return false;
}

void save(const Container& c, const std::string& path) {
  nlohmann::json meta = c.meta;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [name, m] : c.arrays)
    arr.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  meta["arrays"] = std::move(arr);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  uint32_t version = kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::string header = meta.dump();
  uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, m] : c.arrays)
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
  if (!out) throw Error("short write while saving checkpoint: " + path);
}

Container load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw ParseError("not a checkpoint file: " + path);
  uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
  uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint header: " + path);

  Container c;
  c.meta = nlohmann::json::parse(header, nullptr, false);
  if (c.meta.is_discarded()) throw ParseError("corrupt checkpoint header: " + path);
  for (const auto& a : c.meta.at("arrays")) {
    Eigen::MatrixXd m(a.at("rows").get<Eigen::Index>(), a.at("cols").get<Eigen::Index>());
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(m.size())));
    if (!in) throw ParseError("truncated checkpoint arrays: " + path);
    c.arrays.emplace_back(a.at("name").get<std::string>(), std::move(m));
  }
  c.meta.erase("arrays");
  return c;
}

}  // namespace ec4srec::ckpt
