#include "mixctc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mixctc::harness {

namespace {

class Writer {
 public:
  explicit Writer(std::ostream& os) : os_(os) {}
  void bytes(const void* p, size_t n) { os_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u64(uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    bytes(buf, 8);
  }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& os_;
};

class Reader {
 public:
  explicit Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}
  void bytes(void* p, size_t n) {
    is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is_) {
      throw std::runtime_error("checkpoint " + path_ + ": truncated at byte offset " +
                               std::to_string(offset_));
    }
    offset_ += n;
  }
  uint64_t u64() {
    unsigned char buf[8];
    bytes(buf, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  double f64() {
    const uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    const uint64_t n = u64();
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }
  size_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::string path_;
  size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  Writer w(os);
  w.bytes(kCheckpointMagic, 8);
  w.str(ckpt.vocab_text);
  w.u64(ckpt.tensors.size());
  for (const auto& [name, tensor] : ckpt.tensors) {
    w.str(name);
    w.u64(static_cast<uint64_t>(tensor.rank()));
    for (int64_t e : tensor.shape()) w.u64(static_cast<uint64_t>(e));
    for (double v : tensor.data()) w.f64(v);
  }
  w.str(ckpt.aux_vocab_text);
  w.str(ckpt.config_text);
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  Reader r(is, path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw std::runtime_error("checkpoint " + path + ": bad magic at byte offset 0");
  }
  Checkpoint ckpt;
  ckpt.vocab_text = r.str();
  const uint64_t count = r.u64();
  ckpt.tensors.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const uint64_t rank = r.u64();
    std::vector<int64_t> shape(rank);
    int64_t numel = 1;
    for (uint64_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int64_t>(r.u64());
      numel *= shape[d];
    }
    std::vector<double> data(static_cast<size_t>(numel));
    for (auto& v : data) v = r.f64();
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  ckpt.aux_vocab_text = r.str();
  ckpt.config_text = r.str();
  return ckpt;
}

}  // namespace mixctc::harness
