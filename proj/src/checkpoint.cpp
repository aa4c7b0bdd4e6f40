#include "nca/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace nca {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'A', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::string& s, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  s.append(b, sizeof(T));  // little-endian host
}

template <typename T>
T get(const std::string& s, size_t& at) {
  require(at + sizeof(T) <= s.size(), "checkpoint: truncated file");
  T v;
  std::memcpy(&v, s.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}

void put_name(std::string& s, const std::string& name) {
  require(name.size() < 65536, "checkpoint: name too long");
  put<uint16_t>(s, (uint16_t)name.size());
  s.append(name);
}

}  // namespace

void BlobWriter::add_tensor(const std::string& name, const Tensor<Real>& t) {
  put_name(buf_, name);
  put<uint8_t>(buf_, 0);
  put<uint8_t>(buf_, (uint8_t)t.rank());
  for (int i = 0; i < t.rank(); ++i) put<uint32_t>(buf_, (uint32_t)t.dim(i));
  buf_.append((const char*)t.value().data(), t.size() * sizeof(Real));
  ++count_;
}

void BlobWriter::add_array(const std::string& name, const ArrayX<Real>& a) {
  put_name(buf_, name);
  put<uint8_t>(buf_, 0);
  put<uint8_t>(buf_, 1);
  put<uint32_t>(buf_, (uint32_t)a.size());
  buf_.append((const char*)a.data(), a.size() * sizeof(Real));
  ++count_;
}

void BlobWriter::add_int(const std::string& name, int64_t v) {
  put_name(buf_, name);
  put<uint8_t>(buf_, 1);
  put<int64_t>(buf_, v);
  ++count_;
}

void BlobWriter::add_bytes(const std::string& name, const std::string& data) {
  put_name(buf_, name);
  put<uint8_t>(buf_, 2);
  put<uint64_t>(buf_, data.size());
  buf_.append(data);
  ++count_;
}

void BlobWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "checkpoint: cannot open " + path + " for writing");
  f.write(kMagic, 4);
  uint32_t v = kVersion, n = count_;
  f.write((const char*)&v, 4);
  f.write((const char*)&n, 4);
  f.write(buf_.data(), buf_.size());
  require(f.good(), "checkpoint: write failed for " + path);
}

BlobReader::BlobReader(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), "checkpoint: cannot open " + path);
  data_.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require(data_.size() >= 12 && std::memcmp(data_.data(), kMagic, 4) == 0,
          "checkpoint: bad magic in " + path);
  size_t at = 4;
  const uint32_t version = get<uint32_t>(data_, at);
  require(version == kVersion, "checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = get<uint32_t>(data_, at);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = get<uint16_t>(data_, at);
    require(at + len <= data_.size(), "checkpoint: truncated name");
    std::string name = data_.substr(at, len);
    at += len;
    Entry e{};
    e.kind = get<uint8_t>(data_, at);
    if (e.kind == 0) {
      const uint8_t rank = get<uint8_t>(data_, at);
      long n = 1;
      for (int d = 0; d < rank; ++d) {
        e.shape.push_back((int)get<uint32_t>(data_, at));
        n *= e.shape.back();
      }
      e.offset = at;
      e.length = (size_t)n * sizeof(Real);
      require(at + e.length <= data_.size(), "checkpoint: truncated tensor " + name);
      at += e.length;
    } else if (e.kind == 1) {
      e.value = get<int64_t>(data_, at);
    } else if (e.kind == 2) {
      e.length = (size_t)get<uint64_t>(data_, at);
      e.offset = at;
      require(at + e.length <= data_.size(), "checkpoint: truncated bytes " + name);
      at += e.length;
    } else {
      fail("checkpoint: unknown entry kind");
    }
    entries_[name] = e;
  }
}

bool BlobReader::has(const std::string& name) const { return entries_.count(name) > 0; }

const BlobReader::Entry& BlobReader::find(const std::string& name, uint8_t kind) const {
  auto it = entries_.find(name);
  require(it != entries_.end(), "checkpoint: missing entry '" + name + "'");
  require(it->second.kind == kind, "checkpoint: entry '" + name + "' has wrong kind");
  return it->second;
}

Tensor<Real> BlobReader::tensor(const std::string& name) const {
  const Entry& e = find(name, 0);
  ArrayX<Real> a(e.length / sizeof(Real));
  std::memcpy(a.data(), data_.data() + e.offset, e.length);
  return Tensor<Real>::from_array(e.shape, std::move(a));
}

ArrayX<Real> BlobReader::array(const std::string& name) const {
  const Entry& e = find(name, 0);
  ArrayX<Real> a(e.length / sizeof(Real));
  std::memcpy(a.data(), data_.data() + e.offset, e.length);
  return a;
}

int64_t BlobReader::integer(const std::string& name) const { return find(name, 1).value; }

std::string BlobReader::bytes(const std::string& name) const {
  const Entry& e = find(name, 2);
  return data_.substr(e.offset, e.length);
}

void save_params(BlobWriter& w, const std::string& prefix,
                 const std::vector<Tensor<Real>>& params) {
  w.add_int(prefix + ".count", (int64_t)params.size());
  for (size_t i = 0; i < params.size(); ++i)
    w.add_tensor(prefix + ".p" + std::to_string(i), params[i]);
}

void load_params(const BlobReader& r, const std::string& prefix,
                 const std::vector<Tensor<Real>>& params) {
  require((int64_t)params.size() == r.integer(prefix + ".count"),
          "checkpoint: parameter count mismatch for " + prefix);
  for (size_t i = 0; i < params.size(); ++i) {
    auto t = r.tensor(prefix + ".p" + std::to_string(i));
    require(t.shape() == params[i].shape(), "checkpoint: shape mismatch at " + prefix + ".p" +
                                                std::to_string(i));
    params[i].value() = t.value();
  }
}

}  // namespace nca
