#include "vbitn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace vbitn {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  void need(std::size_t n, const char* what) {
    if (pos_ + n > in_.size()) {
      throw FormatError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                        std::to_string(pos_));
    }
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(const char* what) {
    std::uint32_t n = u32(what);
    need(n, what);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  in_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointData& data) {
  Writer w;
  w.bytes(kCheckpointMagic, 4);
  w.u16(kCheckpointVersion);
  w.str(data.config_text);
  w.u32(static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& [name, t] : data.tensors) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : t.data()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

CheckpointData decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw FormatError("not a checkpoint: bad magic (expected \"VBIT\")");
  }
  Reader r(bytes);
  r.skip(4, "magic");
  const std::uint16_t version = r.u16("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) +
                      " (this build reads " + std::to_string(kCheckpointVersion) + ")");
  }
  CheckpointData out;
  out.config_text = r.str("config");
  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name = r.str("tensor name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("tensor '" + name + "' has implausible rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint32_t e = r.u32("extent");
      if (e == 0) throw FormatError("tensor '" + name + "' has a zero extent");
      shape.push_back(e);
    }
    const std::size_t n = numel_of(shape);
    r.need(4 * n, "payload");
    std::vector<float> values(n);
    for (auto& v : values) v = std::bit_cast<float>(r.u32("payload"));
    if (!out.tensors.emplace(name, Tensor<float>(shape, std::move(values))).second) {
      throw FormatError("duplicate tensor '" + name + "'");
    }
  }
  if (!r.done()) throw FormatError("trailing bytes after tensor " + std::to_string(count));
  return out;
}

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointData& data) {
  auto bytes = encode_checkpoint(data);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling temp file first so a crash never leaves a torn checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

void export_parameters(const ModelBundle<float>& bundle, CheckpointData& data) {
  for (const auto& p : bundle.parameters()) data.tensors.insert_or_assign(p.name, p.value.detach());
}

void import_parameters(const CheckpointData& data, ModelBundle<float>& bundle) {
  for (auto& p : bundle.parameters()) {
    auto it = data.tensors.find(p.name);
    if (it == data.tensors.end()) throw FormatError("checkpoint is missing parameter '" + p.name + "'");
    if (it->second.shape() != p.value.shape()) {
      throw FormatError("parameter '" + p.name + "' has shape " + to_string(it->second.shape()) +
                        ", model expects " + to_string(p.value.shape()));
    }
    auto dst = p.value.mutable_data();
    std::copy(it->second.data().begin(), it->second.data().end(), dst.begin());
  }
}

std::string content_hash(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint8_t c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vbitn
