#pragma once

#include <cstring>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "socialfusion/common.hpp"
#include "socialfusion/model.hpp"

namespace socialfusion {

// Checkpoint layout: 8-byte magic, u32 format version, u64 header length,
// JSON header (fingerprint + tensor index), then row-major doubles for each
// tensor in index order. Only the trainable groups are stored. Readers skip
// unknown tensors and unknown header fields, so newer writers stay readable.
inline constexpr char kCheckpointMagic[8] = {'S', 'F', 'C', 'K', 'P', 'T', '0', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline nlohmann::json checkpoint_fingerprint(Model& model) {
  return nlohmann::json{{"encoder", model.encoder.handle.name},
                        {"backbone", model.config.backbone.name},
                        {"d_h", model.config.d_h},
                        {"lora_rank", model.config.lora.rank},
                        {"h_out", model.config.h_out}};
}

inline void save_checkpoint(Model& model, const std::string& path) {
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["fingerprint"] = checkpoint_fingerprint(model);
  nlohmann::json index = nlohmann::json::array();
  for (auto* p : model.trainable_params())
    index.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  header["tensors"] = index;
  std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(kCheckpointMagic, 8);
  std::uint32_t ver = kCheckpointVersion;
  f.write(reinterpret_cast<const char*>(&ver), 4);
  std::uint64_t hlen = hs.size();
  f.write(reinterpret_cast<const char*>(&hlen), 8);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (auto* p : model.trainable_params())
    for (Eigen::Index r = 0; r < p->value.rows(); ++r)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) {
        double v = p->value(r, c);
        f.write(reinterpret_cast<const char*>(&v), 8);
      }
  if (!f) throw IoError("short write: " + path);
}

inline void load_checkpoint(Model& model, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw InvalidInputError("not a checkpoint file: " + path);
  std::uint32_t ver = 0;
  f.read(reinterpret_cast<char*>(&ver), 4);
  if (ver == 0 || ver > kCheckpointVersion)
    throw InvalidInputError("checkpoint version " + std::to_string(ver) + " unsupported");
  std::uint64_t hlen = 0;
  f.read(reinterpret_cast<char*>(&hlen), 8);
  std::string hs(hlen, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(hlen));
  nlohmann::json header = nlohmann::json::parse(hs);

  nlohmann::json want = checkpoint_fingerprint(model);
  nlohmann::json have = header.at("fingerprint");
  for (auto& [key, value] : want.items())
    if (!have.contains(key) || have.at(key) != value)
      throw InvalidInputError("checkpoint fingerprint mismatch on '" + key + "': model has " +
                              value.dump() + ", file has " +
                              (have.contains(key) ? have.at(key).dump() : "nothing"));

  std::map<std::string, ad::Parameter*> by_name;
  for (auto* p : model.trainable_params()) by_name[p->name] = p;
  std::set<std::string> loaded;
  for (const auto& entry : header.at("tensors")) {
    std::string name = entry.at("name");
    Eigen::Index rows = entry.at("rows"), cols = entry.at("cols");
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      f.seekg(static_cast<std::streamoff>(rows * cols * 8), std::ios::cur);
      continue;
    }
    ad::Parameter* p = it->second;
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw InvalidInputError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) +
                              "x" + std::to_string(cols) + ", model expects " +
                              std::to_string(p->value.rows()) + "x" +
                              std::to_string(p->value.cols()));
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        double v;
        f.read(reinterpret_cast<char*>(&v), 8);
        p->value(r, c) = v;
      }
    loaded.insert(name);
  }
  if (!f) throw IoError("truncated checkpoint: " + path);
  for (auto& [name, p] : by_name)
    if (!loaded.count(name))
      throw InvalidInputError("checkpoint is missing tensor '" + name + "'");
}

}  // namespace socialfusion
