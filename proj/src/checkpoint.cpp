#include "nctj/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace nctj::harness {

namespace {

using nlohmann::json;

void store_le32(uint32_t v, unsigned char* p) {
  p[0] = static_cast<unsigned char>(v);
  p[1] = static_cast<unsigned char>(v >> 8);
  p[2] = static_cast<unsigned char>(v >> 16);
  p[3] = static_cast<unsigned char>(v >> 24);
}

uint32_t load_le32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void store_le64(uint64_t v, unsigned char* p) {
  store_le32(static_cast<uint32_t>(v), p);
  store_le32(static_cast<uint32_t>(v >> 32), p + 4);
}

uint64_t load_le64(const unsigned char* p) {
  return static_cast<uint64_t>(load_le32(p)) | (static_cast<uint64_t>(load_le32(p + 4)) << 32);
}

std::string layer_kind_to_string(train::LayerKind k) {
  switch (k) {
    case train::LayerKind::Flatten: return "flatten";
    case train::LayerKind::Linear: return "linear";
    case train::LayerKind::Conv3x3: return "conv3x3";
    case train::LayerKind::Relu: return "relu";
    case train::LayerKind::AvgPool2: return "avgpool2";
  }
  return "flatten";
}

train::LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "flatten") return train::LayerKind::Flatten;
  if (s == "linear") return train::LayerKind::Linear;
  if (s == "conv3x3") return train::LayerKind::Conv3x3;
  if (s == "relu") return train::LayerKind::Relu;
  if (s == "avgpool2") return train::LayerKind::AvgPool2;
  throw FormatError("checkpoint: unknown layer kind '" + s + "'");
}

}  // namespace

void save_checkpoint(const train::Model& model, const CheckpointMeta& meta,
                     const std::string& path) {
  json header;
  header["arch"] = model.arch;
  header["input_shape"] = model.input_shape;
  header["num_classes"] = model.num_classes;
  header["feature_dim"] = model.feature_dim;
  json layers = json::array();
  for (const auto& l : model.feature_layers) {
    layers.push_back({{"kind", layer_kind_to_string(l.kind)},
                      {"out_dim", l.out_dim},
                      {"param", l.param_name}});
  }
  header["feature_layers"] = layers;
  header["epoch"] = meta.epoch;
  if (!meta.seeds_json.empty()) header["seeds"] = json::parse(meta.seeds_json);
  if (meta.etf_seed) header["etf_seed"] = *meta.etf_seed;
  if (meta.etf_stream_label) header["etf_stream_label"] = *meta.etf_stream_label;
  json params = json::array();
  for (const auto& [name, p] : model.params) {
    params.push_back({{"name", name},
                      {"shape", p.tensor.shape},
                      {"frozen", p.frozen},
                      {"byte_count", p.tensor.numel() * 4}});
  }
  header["params"] = params;

  const std::string header_text = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint '" + path + "'");
  unsigned char fixed[16];
  std::memcpy(fixed, "NCTJ", 4);
  store_le32(kCheckpointVersion, fixed + 4);
  store_le64(header_text.size(), fixed + 8);
  f.write(reinterpret_cast<const char*>(fixed), 16);
  f.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  std::vector<unsigned char> blob;
  for (const auto& [name, p] : model.params) {
    blob.resize(p.tensor.numel() * 4);
    for (size_t i = 0; i < p.tensor.numel(); ++i) {
      store_le32(std::bit_cast<uint32_t>(p.tensor.values[i]), blob.data() + i * 4);
    }
    f.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  if (!f) throw IoError("write failed for checkpoint '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::error_code ec;
  const auto fsize = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat checkpoint '" + path + "': " + ec.message());
  if (fsize < 16) {
    throw FormatError(path + ": checkpoint needs a 16-byte prelude (error at byte offset 0)");
  }
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint '" + path + "'");
  unsigned char fixed[16];
  f.read(reinterpret_cast<char*>(fixed), 16);
  if (std::memcmp(fixed, "NCTJ", 4) != 0) {
    throw FormatError(path + ": bad magic at byte offset 0 (expected \"NCTJ\")");
  }
  uint32_t version = load_le32(fixed + 4);
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported format version " + std::to_string(version) +
                      " at byte offset 4 (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  uint64_t header_len = load_le64(fixed + 8);
  if (16 + header_len > fsize) {
    throw FormatError(path + ": header length " + std::to_string(header_len) +
                      " exceeds file size (error at byte offset 8)");
  }
  std::string header_text(header_len, '\0');
  f.read(header_text.data(), static_cast<std::streamsize>(header_len));
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw FormatError(path + ": header JSON invalid at byte offset 16: " + e.what());
  }

  // account for every parameter byte before loading anything
  uint64_t payload = 0;
  for (const auto& p : header.at("params")) {
    payload += p.at("byte_count").get<uint64_t>();
  }
  if (16 + header_len + payload != fsize) {
    throw FormatError(path + ": payload accounting mismatch: header declares " +
                      std::to_string(payload) + " bytes, file has " +
                      std::to_string(fsize - 16 - header_len) + " (error at byte offset " +
                      std::to_string(16 + header_len) + ")");
  }

  LoadedCheckpoint out;
  train::Model& model = out.model;
  model.arch = header.at("arch").get<std::string>();
  auto shape = header.at("input_shape").get<std::vector<int>>();
  if (shape.size() != 3) throw FormatError(path + ": input_shape must have 3 entries");
  model.input_shape = {shape[0], shape[1], shape[2]};
  model.num_classes = header.at("num_classes").get<int>();
  model.feature_dim = header.at("feature_dim").get<int>();
  for (const auto& l : header.at("feature_layers")) {
    model.feature_layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()),
                                    l.at("out_dim").get<int>(),
                                    l.at("param").get<std::string>()});
  }
  out.meta.epoch = header.at("epoch").get<int>();
  if (header.contains("seeds")) out.meta.seeds_json = header["seeds"].dump();
  if (header.contains("etf_seed")) out.meta.etf_seed = header["etf_seed"].get<uint64_t>();
  if (header.contains("etf_stream_label")) {
    out.meta.etf_stream_label = header["etf_stream_label"].get<std::string>();
  }

  uint64_t offset = 16 + header_len;
  std::vector<unsigned char> blob;
  for (const auto& p : header.at("params")) {
    auto name = p.at("name").get<std::string>();
    auto pshape = p.at("shape").get<std::vector<int>>();
    auto bytes = p.at("byte_count").get<uint64_t>();
    num::Tensor t(pshape);
    if (t.numel() * 4 != bytes) {
      throw FormatError(path + ": parameter '" + name + "' shape/byte_count mismatch at byte offset " +
                        std::to_string(offset));
    }
    blob.resize(bytes);
    f.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<uint64_t>(f.gcount()) != bytes) {
      throw FormatError(path + ": truncated parameter '" + name + "' at byte offset " +
                        std::to_string(offset));
    }
    for (size_t i = 0; i < t.numel(); ++i) {
      t.values[i] = std::bit_cast<float>(load_le32(blob.data() + i * 4));
    }
    model.params.add(name, std::move(t), p.at("frozen").get<bool>());
    offset += bytes;
  }
  return out;
}

}  // namespace nctj::harness
