// Copyright 2026 The dagmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dagmix/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dagmix/config.hpp"
#include "dagmix/errors.hpp"

namespace dagmix {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'G', 'M', 'I', 'X', 'C', 'K'};
constexpr std::uint64_t kMaxRank = 8;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little endian");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::uint64_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t offset() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw CheckpointError("corrupted checkpoint at byte offset " + std::to_string(at) + ": " + msg);
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (n > bytes_.size() - pos_) {
      fail(std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
               " bytes, " + std::to_string(bytes_.size() - pos_) + " left)",
           pos_);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::string encode_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(k.size()));
    out += k;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v.size()));
    out += v;
  }
  return out;
}

}  // namespace

const numerics::Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw CheckpointError("checkpoint has no tensor named '" + name + "'");
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw CheckpointError("checkpoint has no metadata key '" + key + "'");
  return it->second;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, ckpt.version);
  put<std::uint64_t>(out, ckpt.config_hash);
  const std::string meta = encode_meta(ckpt.meta);
  put<std::uint64_t>(out, meta.size());
  out += meta;
  put<std::uint64_t>(out, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put<std::int64_t>(out, d);
    const auto data = t.data();
    out.append(reinterpret_cast<const char*>(data.data()), data.size_bytes());
  }
  put<std::uint64_t>(out, fnv1a(out));
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.get_bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    r.fail("bad magic, not a dagmix checkpoint", 0);
  }
  Checkpoint ckpt;
  const std::size_t version_at = r.offset();
  ckpt.version = r.get<std::uint32_t>("version");
  if (ckpt.version != kCheckpointVersion) {
    r.fail("unsupported version " + std::to_string(ckpt.version) + " (expected " +
               std::to_string(kCheckpointVersion) + ")",
           version_at);
  }
  ckpt.config_hash = r.get<std::uint64_t>("config hash");
  const std::uint64_t meta_len = r.get<std::uint64_t>("metadata length");
  const std::size_t meta_at = r.offset();
  const std::string meta = r.get_bytes(meta_len, "metadata");
  {
    Reader m(meta);
    while (m.offset() < meta.size()) {
      const std::size_t at = meta_at + m.offset();
      try {
        std::string key = m.get_bytes(m.get<std::uint32_t>("key length"), "key");
        std::string value = m.get_bytes(m.get<std::uint32_t>("value length"), "value");
        ckpt.meta.emplace(std::move(key), std::move(value));
      } catch (const CheckpointError&) {
        r.fail("malformed metadata entry", at);
      }
    }
  }
  const std::uint64_t count = r.get<std::uint64_t>("tensor count");
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::size_t at = r.offset();
    std::string name = r.get_bytes(r.get<std::uint32_t>("tensor name length"), "tensor name");
    const std::uint32_t rank = r.get<std::uint32_t>("tensor rank");
    if (rank > kMaxRank) r.fail("tensor '" + name + "' has implausible rank " + std::to_string(rank), at);
    numerics::Shape shape;
    std::uint64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::int64_t v = r.get<std::int64_t>("tensor dims");
      if (v < 0 || (v > 0 && total > (bytes.size() / 8) / static_cast<std::uint64_t>(v))) {
        r.fail("tensor '" + name + "' has invalid dimension " + std::to_string(v), at);
      }
      total *= static_cast<std::uint64_t>(v);
      shape.push_back(v);
    }
    const std::string raw = r.get_bytes(total * sizeof(double), "tensor data");
    std::vector<double> values(total);
    std::memcpy(values.data(), raw.data(), raw.size());
    ckpt.tensors.push_back({std::move(name), numerics::Tensor(shape, std::move(values))});
  }
  const std::size_t sum_at = r.offset();
  const std::uint64_t stored = r.get<std::uint64_t>("checksum");
  const std::uint64_t actual = fnv1a(std::string_view(bytes).substr(0, sum_at));
  if (stored != actual) r.fail("checksum mismatch", sum_at);
  if (r.offset() != bytes.size()) {
    r.fail(std::to_string(bytes.size() - r.offset()) + " trailing bytes", r.offset());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
    const std::string bytes = encode_checkpoint(ckpt);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const CheckpointError& e) {
    throw CheckpointError(path + ": " + e.what());
  }
}

void restore_params(const Checkpoint& ckpt, const std::string& prefix,
                    const numerics::ParamList& params) {
  for (const auto& p : params) {
    const numerics::Tensor& src = ckpt.tensor(prefix + p.name);
    if (src.shape() != p.tensor.shape()) {
      throw CheckpointError("tensor '" + prefix + p.name + "' has shape " +
                            numerics::to_string(src.shape()) + ", model expects " +
                            numerics::to_string(p.tensor.shape()));
    }
    numerics::Tensor dst = p.tensor;
    dst.copy_from(src);
  }
}

void store_params(Checkpoint& ckpt, const std::string& prefix, const numerics::ParamList& params) {
  for (const auto& p : params) ckpt.tensors.push_back({prefix + p.name, p.tensor.clone()});
}

}  // namespace dagmix
