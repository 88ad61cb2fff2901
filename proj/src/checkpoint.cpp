#include "entrosim/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "entrosim/errors.hpp"

namespace entrosim {

namespace {

std::uint64_t to_le_bits(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  return bits;
}

double from_le_bits(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap64(bits);
  }
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

void save_checkpoint(const PolicyParameters& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);

  const bool tabular = params.variant == PolicyVariant::Tabular;
  std::ostringstream header;
  header << "entrosim-ckpt v1 variant=" << (tabular ? "tabular" : "mlp")
         << " vocab=" << params.vocab.size
         << " dim=" << (tabular ? params.context_window : params.hidden_dim) << "\n";
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  for (double v : params.values) {
    const std::uint64_t bits = to_le_bits(v);
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

PolicyParameters load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);

  std::string header;
  if (!std::getline(in, header)) throw ConfigError("checkpoint has no header line: " + path);

  std::istringstream hs(header);
  std::string magic, version, variant_kv, vocab_kv, dim_kv;
  hs >> magic >> version >> variant_kv >> vocab_kv >> dim_kv;
  if (magic != "entrosim-ckpt" || version != "v1") {
    throw ConfigError("bad checkpoint header '" + header + "' in " + path);
  }
  auto field = [&](const std::string& kv, const char* key) {
    const std::string prefix = std::string(key) + "=";
    if (kv.rfind(prefix, 0) != 0) {
      throw ConfigError("checkpoint header missing " + std::string(key) + ": " + path);
    }
    return kv.substr(prefix.size());
  };
  const std::string variant = field(variant_kv, "variant");
  const int vocab_size = std::stoi(field(vocab_kv, "vocab"));
  const int dim = std::stoi(field(dim_kv, "dim"));

  PolicyParameters params;
  if (variant == "tabular") {
    params = make_tabular_policy(Vocabulary{vocab_size, vocab_size - 1}, dim);
  } else if (variant == "mlp") {
    params = make_mlp_policy(Vocabulary{vocab_size, vocab_size - 1}, dim);
  } else {
    throw ConfigError("unknown checkpoint variant '" + variant + "' in " + path);
  }

  const std::size_t header_bytes = header.size() + 1;
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    std::uint64_t bits;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    if (!in) {
      const std::size_t offset = header_bytes + i * sizeof(bits) +
                                 static_cast<std::size_t>(in.gcount());
      std::ostringstream msg;
      msg << "truncated checkpoint " << path << ": expected "
          << header_bytes + params.values.size() * sizeof(bits) << " bytes, stream ended at byte "
          << offset;
      throw ConfigError(msg.str());
    }
    params.values[i] = from_le_bits(bits);
  }
  // Trailing bytes mean the header and payload disagree.
  char extra;
  if (in.read(&extra, 1)) {
    throw ConfigError("checkpoint longer than header implies: " + path);
  }
  return params;
}

}  // namespace entrosim
