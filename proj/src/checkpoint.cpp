#include "dynamoe/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

namespace dynamoe {

namespace {

constexpr char kMagic[8] = {'D', 'M', 'O', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// this codebase targets little-endian hosts; the writers below just copy
template <typename T>
void write_raw(std::ofstream& f, T value) {
  f.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& f, const std::string& path) {
  T value;
  if (!f.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }
  return value;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path,
                     const std::string& manifest_json) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint: " + path);

  f.write(kMagic, sizeof(kMagic));
  write_raw<std::uint32_t>(f, kVersion);
  write_raw<std::uint64_t>(f, manifest_json.size());
  f.write(manifest_json.data(), static_cast<std::streamsize>(manifest_json.size()));

  std::uint32_t count = 0;
  model.visit_params([&](const std::string&, Model::ConstParamRef) { ++count; });
  write_raw<std::uint32_t>(f, count);

  model.visit_params([&](const std::string& name, Model::ConstParamRef v) {
    write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw<std::uint8_t>(f, 8);
    write_raw<std::uint64_t>(f, static_cast<std::uint64_t>(v.rows()));
    write_raw<std::uint64_t>(f, static_cast<std::uint64_t>(v.cols()));
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * v.size()));
  });
  if (!f) throw std::runtime_error("write failed for checkpoint: " + path);
}

std::string load_checkpoint(Model& model, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[8];
  if (!f.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("bad checkpoint magic: " + path);
  }
  const auto version = read_raw<std::uint32_t>(f, path);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version in " + path);
  }
  const auto manifest_len = read_raw<std::uint64_t>(f, path);
  std::string manifest(manifest_len, '\0');
  if (!f.read(manifest.data(), static_cast<std::streamsize>(manifest_len))) {
    throw std::runtime_error("truncated checkpoint: " + path);
  }

  const auto count = read_raw<std::uint32_t>(f, path);
  std::map<std::string, Eigen::MatrixXd> blobs;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(f, path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) {
      throw std::runtime_error("truncated checkpoint: " + path);
    }
    const auto width = read_raw<std::uint8_t>(f, path);
    if (width != 8) {
      throw std::runtime_error("unsupported scalar width in " + path);
    }
    const auto rows = read_raw<std::uint64_t>(f, path);
    const auto cols = read_raw<std::uint64_t>(f, path);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (!f.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()))) {
      throw std::runtime_error("truncated checkpoint: " + path);
    }
    blobs.emplace(std::move(name), std::move(m));
  }

  model.visit_params([&](const std::string& name, Model::ParamRef v, Model::ParamRef) {
    auto it = blobs.find(name);
    if (it == blobs.end()) {
      throw std::runtime_error("checkpoint missing parameter '" + name + "'");
    }
    if (it->second.rows() != v.rows() || it->second.cols() != v.cols()) {
      throw std::runtime_error("checkpoint shape mismatch for '" + name + "'");
    }
    v = it->second;
  });
  return manifest;
}

}  // namespace dynamoe
