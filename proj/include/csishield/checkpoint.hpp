#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "csishield/ragan.hpp"

namespace csishield {

constexpr char kCheckpointMagic[9] = "CSISHLD1";  // 8 bytes on disk

namespace detail {

inline std::uint64_t fnv1a64_bytes(const std::vector<unsigned char>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline void append_f64_le(std::vector<unsigned char>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

inline double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

/// Checkpoint layout: 8-byte magic, a text header (one `key value...` per
/// line, ending with the payload byte count), then every parameter tensor as
/// little-endian 64-bit floats in shape-table order (generator tensors first,
/// then discriminator).
inline void save_checkpoint(const Generator& gen, const Discriminator& disc,
                            const TrainConfig& cfg, const std::filesystem::path& path) {
  std::vector<unsigned char> payload;
  std::ostringstream shapes;
  auto dump = [&](const std::vector<const ParamTensor*>& params) {
    for (const ParamTensor* p : params) {
      shapes << "shape " << p->name << " " << p->v.rows() << " " << p->v.cols() << "\n";
      for (double v : p->v.storage()) detail::append_f64_le(payload, v);
    }
  };
  dump(gen.parameters());
  dump(disc.parameters());

  std::ostringstream header;
  header << "format 1\n";
  header << "seed " << cfg.seed << "\n";
  header << "batch_size " << cfg.batch_size << "\n";
  header << std::setprecision(17);
  header << "lr_g " << cfg.lr_g << "\n";
  header << "lr_d " << cfg.lr_d << "\n";
  header << "lambda " << cfg.lambda << "\n";
  header << "dropout " << cfg.dropout << "\n";
  header << "weight_decay " << cfg.weight_decay << "\n";
  header << "seq_len " << cfg.seq_len << "\n";
  header << "input_dim " << gen.config().input_dim << "\n";
  header << "latent_dim " << gen.config().latent_dim << "\n";
  header << "hidden " << gen.config().hidden << "\n";
  header << "disc_fc_dim " << disc.config().fc_dim << "\n";
  header << shapes.str();
  header << "checksum " << std::hex << detail::fnv1a64_bytes(payload) << std::dec << "\n";
  header << "payload " << payload.size() << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot open for writing: " + path.string());
  out.write(kCheckpointMagic, 8);
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoFailure("write failed: " + path.string());
}

struct Checkpoint {
  Generator generator;
  Discriminator discriminator;
  TrainConfig config;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open: " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw CorruptPayload("bad checkpoint magic");

  TrainConfig cfg;
  int input_dim = kDataSubcarriers;
  std::vector<std::pair<std::string, std::pair<int, int>>> shapes;
  std::uint64_t checksum = 0;
  std::size_t payload_bytes = 0;
  std::string line;
  bool saw_format = false;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "format") {
      std::string v;
      fields >> v;
      if (v != "1") throw VersionMismatch("checkpoint format " + v + " not supported");
      saw_format = true;
    } else if (key == "seed") {
      fields >> cfg.seed;
    } else if (key == "batch_size") {
      fields >> cfg.batch_size;
    } else if (key == "lr_g") {
      fields >> cfg.lr_g;
    } else if (key == "lr_d") {
      fields >> cfg.lr_d;
    } else if (key == "lambda") {
      fields >> cfg.lambda;
    } else if (key == "dropout") {
      fields >> cfg.dropout;
    } else if (key == "weight_decay") {
      fields >> cfg.weight_decay;
    } else if (key == "seq_len") {
      fields >> cfg.seq_len;
    } else if (key == "input_dim") {
      fields >> input_dim;
    } else if (key == "latent_dim") {
      fields >> cfg.latent_dim;
    } else if (key == "hidden") {
      fields >> cfg.hidden;
    } else if (key == "disc_fc_dim") {
      fields >> cfg.disc_fc_dim;
    } else if (key == "shape") {
      std::string name;
      int r, c;
      fields >> name >> r >> c;
      shapes.emplace_back(name, std::make_pair(r, c));
    } else if (key == "checksum") {
      fields >> std::hex >> checksum >> std::dec;
    } else if (key == "payload") {
      fields >> payload_bytes;
      break;  // raw bytes follow
    } else {
      throw CorruptPayload("unknown checkpoint header key: " + key);
    }
  }
  if (!saw_format) throw VersionMismatch("checkpoint missing format line");

  std::vector<unsigned char> payload(payload_bytes);
  in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes)
    throw CorruptPayload("checkpoint payload truncated");
  if (detail::fnv1a64_bytes(payload) != checksum)
    throw CorruptPayload("checkpoint payload checksum mismatch");

  GeneratorConfig gcfg{input_dim, cfg.latent_dim, cfg.hidden, cfg.dropout, kLeakyReluSlope};
  DiscriminatorConfig dcfg{input_dim, cfg.hidden, cfg.disc_fc_dim, cfg.dropout, kLeakyReluSlope};
  Rng dummy(0);
  Checkpoint ckpt{Generator(gcfg, dummy), Discriminator(dcfg, dummy), cfg};

  std::vector<ParamTensor*> params = ckpt.generator.parameters();
  for (ParamTensor* p : ckpt.discriminator.parameters()) params.push_back(p);
  if (params.size() != shapes.size()) throw CorruptPayload("checkpoint shape table size mismatch");

  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    if (shape.first != params[i]->v.rows() || shape.second != params[i]->v.cols())
      throw CorruptPayload("checkpoint shape mismatch for " + name);
    for (double& v : params[i]->v.storage()) {
      if (offset + 8 > payload.size()) throw CorruptPayload("checkpoint payload too short");
      v = detail::read_f64_le(payload.data() + offset);
      offset += 8;
    }
  }
  if (offset != payload.size()) throw CorruptPayload("checkpoint payload has trailing bytes");
  return ckpt;
}

}  // namespace csishield
