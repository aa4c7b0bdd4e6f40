#pragma once

// Versioned little-endian checkpoint container of named entries:
//   kind 0: f32 array with shape  |  kind 1: i64 scalar  |  kind 2: raw bytes
// Entries appear in write order; readers address them by name. Layout
// (magic "NCA1", version, entry count, then entries) is fixed so checkpoints
// are portable across builds.

#include <cstdint>
#include <map>
#include <string>

#include "nca/tensor.hpp"

namespace nca {

class BlobWriter {
 public:
  void add_tensor(const std::string& name, const Tensor<Real>& t);
  void add_array(const std::string& name, const ArrayX<Real>& a);
  void add_int(const std::string& name, int64_t v);
  void add_bytes(const std::string& name, const std::string& data);
  void write(const std::string& path) const;

 private:
  std::string buf_;
  uint32_t count_ = 0;
};

class BlobReader {
 public:
  explicit BlobReader(const std::string& path);
  bool has(const std::string& name) const;
  Tensor<Real> tensor(const std::string& name) const;
  ArrayX<Real> array(const std::string& name) const;
  int64_t integer(const std::string& name) const;
  std::string bytes(const std::string& name) const;

 private:
  struct Entry {
    uint8_t kind;
    Shape shape;
    size_t offset, length;  // payload position in data_
    int64_t value;
  };
  const Entry& find(const std::string& name, uint8_t kind) const;
  std::string data_;
  std::map<std::string, Entry> entries_;
};

// copies checkpointed values into an already-built parameter list (shapes
// must match; parameter order is the module's documented order)
void load_params(const BlobReader& r, const std::string& prefix,
                 const std::vector<Tensor<Real>>& params);
void save_params(BlobWriter& w, const std::string& prefix,
                 const std::vector<Tensor<Real>>& params);

}  // namespace nca
