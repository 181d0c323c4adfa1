#include "embryoforge/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "embryoforge/pgm.hpp"
#include "json.hpp"

namespace embryoforge {

const Tensor* Checkpoint::find_tensor(std::string_view name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const std::string* Checkpoint::find_block(std::string_view name) const {
  for (const auto& [n, b] : blocks)
    if (n == name) return &b;
  return nullptr;
}

void Checkpoint::put_block(std::string name, std::string payload) {
  for (auto& [n, b] : blocks) {
    if (n == name) {
      b = std::move(payload);
      return;
    }
  }
  blocks.emplace_back(std::move(name), std::move(payload));
}

namespace {

class Writer {
 public:
  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void bytes(std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }
  void name(std::string_view s) {
    if (s.size() > 0xffff) throw CheckpointError("record name too long: " + std::string(s.substr(0, 64)));
    uint<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    bytes(s);
  }

  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b) : buf(b) {}

  void need(std::size_t n, const std::string& record) {
    if (buf.size() - pos < n) {
      throw CheckpointError("truncated checkpoint in " + record + " at byte " + std::to_string(pos));
    }
  }
  template <class U>
  U uint(const std::string& record) {
    need(sizeof(U), record);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[pos + i]) << (8 * i);
    pos += sizeof(U);
    return v;
  }
  std::string bytes(std::size_t n, const std::string& record) {
    need(n, record);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }

  std::span<const std::uint8_t> buf;
  std::size_t pos = 0;
};

void write_tensor_data(Writer& w, const Tensor& t) {
  if (t.dtype() == DType::f32) {
    for (float f : t.data<float>()) w.uint(std::bit_cast<std::uint32_t>(f));
  } else {
    for (double d : t.data<double>()) w.uint(std::bit_cast<std::uint64_t>(d));
  }
}

std::string u64_payload(std::uint64_t v) {
  Writer w;
  w.uint(v);
  return {w.out.begin(), w.out.end()};
}

std::uint64_t u64_from(const std::string& payload, std::string_view what) {
  if (payload.size() != 8) throw CheckpointError("block " + std::string(what) + " has wrong size");
  Reader r(std::span(reinterpret_cast<const std::uint8_t*>(payload.data()), payload.size()));
  return r.uint<std::uint64_t>(std::string(what));
}

std::string key(std::string_view role, std::string_view kind, std::string_view name = {}) {
  std::string k(role);
  k += '.';
  k += kind;
  if (!name.empty()) {
    k += '.';
    k += name;
  }
  return k;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes("NNCK");
  w.uint(kCheckpointVersion);
  w.uint(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    w.name(name);
    w.uint(static_cast<std::uint8_t>(t.dtype()));
    w.uint(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) w.uint(static_cast<std::uint32_t>(d));
    write_tensor_data(w, t);
  }
  w.uint(static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, payload] : ckpt.blocks) {
    w.name(name);
    w.uint(static_cast<std::uint32_t>(payload.size()));
    w.bytes(payload);
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.bytes(4, "header") != "NNCK") throw CheckpointError("bad checkpoint magic");
  const auto version = r.uint<std::uint32_t>("header");
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto n_tensors = r.uint<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string record = "tensor " + std::to_string(i);
    const auto len = r.uint<std::uint16_t>(record);
    std::string name = r.bytes(len, record);
    record += " '" + name + "'";
    const auto tag = r.uint<std::uint8_t>(record);
    if (tag > 1) throw CheckpointError(record + ": unknown dtype tag " + std::to_string(tag));
    const auto rank = r.uint<std::uint8_t>(record);
    Shape shape(rank);
    for (auto& d : shape) d = r.uint<std::uint32_t>(record);
    const auto n = static_cast<std::size_t>(shape_numel(shape));
    Tensor t;
    if (tag == 0) {
      r.need(n * 4, record);
      std::vector<float> v(n);
      for (auto& f : v) f = std::bit_cast<float>(r.uint<std::uint32_t>(record));
      t = Tensor::from_floats(shape, std::move(v));
    } else {
      r.need(n * 8, record);
      std::vector<double> v(n);
      for (auto& d : v) d = std::bit_cast<double>(r.uint<std::uint64_t>(record));
      t = Tensor::from_vector(shape, std::move(v));
    }
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  const auto n_blocks = r.uint<std::uint32_t>("block count");
  for (std::uint32_t i = 0; i < n_blocks; ++i) {
    std::string record = "block " + std::to_string(i);
    const auto len = r.uint<std::uint16_t>(record);
    std::string name = r.bytes(len, record);
    record += " '" + name + "'";
    const auto size = r.uint<std::uint32_t>(record);
    ckpt.blocks.emplace_back(std::move(name), r.bytes(size, record));
  }
  if (r.pos != bytes.size()) {
    throw CheckpointError("trailing bytes after checkpoint at byte " + std::to_string(r.pos));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

void pack_network(Checkpoint& ckpt, std::string_view role, const Network& net,
                  const AdamState* adam) {
  for (const auto& [name, t] : net.params()) ckpt.tensors.emplace_back(key(role, "param", name), t.clone());
  for (const auto& [name, t] : net.buffers()) ckpt.tensors.emplace_back(key(role, "buffer", name), t.clone());
  ckpt.put_block(key(role, "topology"), net.topology());
  if (adam) {
    const auto& entries = net.params().entries();
    if (adam->m.size() != entries.size() || adam->v.size() != entries.size()) {
      throw std::invalid_argument("optimizer state does not match network parameters");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      ckpt.tensors.emplace_back(key(role, "adam.m", entries[i].first), adam->m[i].clone());
      ckpt.tensors.emplace_back(key(role, "adam.v", entries[i].first), adam->v[i].clone());
    }
    Writer w;
    w.uint(static_cast<std::uint64_t>(adam->step));
    for (double h : {adam->config.lr, adam->config.beta1, adam->config.beta2, adam->config.eps}) {
      w.uint(std::bit_cast<std::uint64_t>(h));
    }
    ckpt.put_block(key(role, "adam"), std::string(w.out.begin(), w.out.end()));
  }
}

Network unpack_network(const Checkpoint& ckpt, std::string_view role) {
  const auto* topo = ckpt.find_block(key(role, "topology"));
  if (!topo) throw CheckpointError("checkpoint has no '" + key(role, "topology") + "' block");
  Network net = Network::from_topology(*topo);
  for (const auto& [name, t] : net.params().entries()) {
    const auto* stored = ckpt.find_tensor(key(role, "param", name));
    if (!stored) throw CheckpointError("checkpoint lacks tensor '" + key(role, "param", name) + "'");
    if (stored->shape() != t.shape() || stored->dtype() != t.dtype()) {
      throw CheckpointError("tensor '" + key(role, "param", name) + "' has shape " +
                            shape_str(stored->shape()) + ", topology expects " + shape_str(t.shape()));
    }
  }
  for (const auto& [name, t] : net.params().entries()) {
    net.params().set(name, ckpt.find_tensor(key(role, "param", name))->clone());
  }
  NamedTensors buffers;
  for (const auto& [name, t] : net.buffers()) {
    const auto* stored = ckpt.find_tensor(key(role, "buffer", name));
    if (!stored) throw CheckpointError("checkpoint lacks tensor '" + key(role, "buffer", name) + "'");
    buffers.add(name, stored->clone());
  }
  net.set_buffers(buffers);
  return net;
}

std::optional<AdamState> unpack_adam(const Checkpoint& ckpt, std::string_view role,
                                     const Network& net) {
  const auto* block = ckpt.find_block(key(role, "adam"));
  if (!block) return std::nullopt;
  if (block->size() != 40) throw CheckpointError("block '" + key(role, "adam") + "' has wrong size");
  Reader r(std::span(reinterpret_cast<const std::uint8_t*>(block->data()), block->size()));
  const std::string rec = key(role, "adam");
  AdamState s;
  s.step = static_cast<std::int64_t>(r.uint<std::uint64_t>(rec));
  s.config.lr = std::bit_cast<double>(r.uint<std::uint64_t>(rec));
  s.config.beta1 = std::bit_cast<double>(r.uint<std::uint64_t>(rec));
  s.config.beta2 = std::bit_cast<double>(r.uint<std::uint64_t>(rec));
  s.config.eps = std::bit_cast<double>(r.uint<std::uint64_t>(rec));
  for (const auto& [name, t] : net.params().entries()) {
    const auto* m = ckpt.find_tensor(key(role, "adam.m", name));
    const auto* v = ckpt.find_tensor(key(role, "adam.v", name));
    if (!m || !v) throw CheckpointError("checkpoint lacks optimizer moments for '" + name + "'");
    if (m->shape() != t.shape() || v->shape() != t.shape()) {
      throw CheckpointError("optimizer moments for '" + name + "' have the wrong shape");
    }
    s.m.push_back(m->clone());
    s.v.push_back(v->clone());
  }
  return s;
}

void pack_rng(Checkpoint& ckpt, const RngStreams& streams) {
  ckpt.put_block("rng.master", u64_payload(streams.master()));
  for (const auto& [name, rng] : streams.all()) ckpt.put_block("rng." + name, rng.state());
}

RngStreams unpack_rng(const Checkpoint& ckpt) {
  const auto* master = ckpt.find_block("rng.master");
  if (!master) throw CheckpointError("checkpoint has no 'rng.master' block");
  RngStreams streams(u64_from(*master, "rng.master"));
  for (const auto& [name, payload] : ckpt.blocks) {
    if (name.starts_with("rng.") && name != "rng.master") {
      try {
        streams.restore(std::string_view(name).substr(4), payload);
      } catch (const std::exception& e) {
        throw CheckpointError("block '" + name + "': " + e.what());
      }
    }
  }
  return streams;
}

void pack_iteration(Checkpoint& ckpt, std::int64_t iteration) {
  ckpt.put_block("meta.iteration", u64_payload(static_cast<std::uint64_t>(iteration)));
}

std::int64_t unpack_iteration(const Checkpoint& ckpt) {
  const auto* b = ckpt.find_block("meta.iteration");
  if (!b) return 0;
  return static_cast<std::int64_t>(u64_from(*b, "meta.iteration"));
}

}  // namespace embryoforge
