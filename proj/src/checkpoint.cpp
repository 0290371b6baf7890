#include "scdiff/checkpoint.hpp"

#include <fstream>
#include <vector>

#include "scdiff/binio.hpp"
#include "scdiff/errors.hpp"

namespace scdiff {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'R', 'D'};
constexpr uint32_t kVersion = kCheckpointFormatVersion;

}  // namespace

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for hashing");
  uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<uint8_t>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string hash_hex(uint64_t h) {
  static const char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return s;
}

void save_checkpoint(const std::string& path, const DenoiserModel& model,
                     int T, double beta_start, double beta_end,
                     const PreprocessSpec& preprocess) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  BinaryWriter w(out);
  w.bytes(kMagic, 4);
  w.u32(kVersion);

  const DenoiserConfig& cfg = model.cfg;
  w.u64(static_cast<uint64_t>(cfg.n_genes));
  w.u64(static_cast<uint64_t>(cfg.patch_size));
  w.u64(static_cast<uint64_t>(cfg.hidden_size));
  w.u64(static_cast<uint64_t>(cfg.n_blocks));
  w.u64(static_cast<uint64_t>(cfg.n_heads));
  w.f64(cfg.mlp_ratio);

  w.u64(static_cast<uint64_t>(T));
  w.f64(beta_start);
  w.f64(beta_end);

  w.u64(static_cast<uint64_t>(preprocess.top_k));
  w.f64(preprocess.negation);
  w.u32(static_cast<uint32_t>(preprocess.selected_genes.size()));
  for (const auto& g : preprocess.selected_genes) w.str(g);

  auto named = model.named_parameters();
  w.u32(static_cast<uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.str(name);
    w.u32(2);  // every parameter here is a matrix
    w.u64(static_cast<uint64_t>(t.rows()));
    w.u64(static_cast<uint64_t>(t.cols()));
    w.matrix(t.value());
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

CheckpointBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  BinaryReader r(in);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4))
    throw ParseError("'" + path + "' is not a model checkpoint (bad magic)");
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));

  DenoiserConfig cfg;
  cfg.n_genes = static_cast<Index>(r.u64());
  cfg.patch_size = static_cast<Index>(r.u64());
  cfg.hidden_size = static_cast<Index>(r.u64());
  cfg.n_blocks = static_cast<Index>(r.u64());
  cfg.n_heads = static_cast<Index>(r.u64());
  cfg.mlp_ratio = r.f64();
  cfg.validate();

  CheckpointBundle b;
  const int T = static_cast<int>(r.u64());
  b.beta_start = r.f64();
  b.beta_end = r.f64();
  b.schedule = linear_schedule(T, b.beta_start, b.beta_end);

  b.preprocess.top_k = static_cast<int>(r.u64());
  b.preprocess.negation = r.f64();
  const uint32_t n_sel = r.u32();
  for (uint32_t i = 0; i < n_sel; ++i)
    b.preprocess.selected_genes.push_back(r.str());
  if (static_cast<Index>(n_sel) != cfg.n_genes)
    throw ParseError("checkpoint lists " + std::to_string(n_sel) +
                     " genes but the model takes " +
                     std::to_string(cfg.n_genes));

  Rng scratch(0);  // values are overwritten below
  b.model = init_denoiser(cfg, scratch);
  auto named = b.model.named_parameters();
  const uint32_t count = r.u32();
  if (count != named.size())
    throw ParseError("checkpoint holds " + std::to_string(count) +
                     " tensors, model expects " + std::to_string(named.size()));
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    if (name != named[i].first)
      throw ParseError("tensor " + std::to_string(i) + " is '" + name +
                       "', expected '" + named[i].first + "'");
    const uint32_t ndims = r.u32();
    if (ndims != 2)
      throw ParseError("tensor '" + name + "' has " + std::to_string(ndims) +
                       " dims, expected 2");
    const auto rows = static_cast<Index>(r.u64());
    const auto cols = static_cast<Index>(r.u64());
    Matrix& dst = named[i].second.value_mut();
    if (rows != dst.rows() || cols != dst.cols())
      throw ParseError("tensor '" + name + "' is " + std::to_string(rows) +
                       "x" + std::to_string(cols) + ", expected " +
                       std::to_string(dst.rows()) + "x" +
                       std::to_string(dst.cols()));
    r.matrix_into(dst);
    if (!dst.allFinite())
      throw ParseError("tensor '" + name + "' holds non-finite values");
  }
  return b;
}

}  // namespace scdiff
