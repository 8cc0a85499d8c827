#include "mesh/checkpoint.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <type_traits>

namespace mesh {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'M', 'E', 'S', 'H', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kFloat32 = 1;
constexpr std::uint8_t kFloat64 = 2;

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const fs::path& file) : out_(file, std::ios::binary), file_(file) {
    if (!out_) throw DataError("cannot write checkpoint " + file.string());
  }
  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw DataError("short write on checkpoint " + file_.string());
  }

 private:
  std::ofstream out_;
  fs::path file_;
};

class Reader {
 public:
  explicit Reader(const fs::path& file) : in_(file, std::ios::binary), file_(file) {
    if (!in_) throw DataError("cannot open checkpoint " + file.string());
  }
  template <class T>
  T get() {
    T v{};
    read(&v, sizeof v);
    return to_little(v);
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 30)) fail("implausible string length");
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  void read(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& why) const { throw DataError(file_.string() + ": " + why); }

 private:
  std::ifstream in_;
  fs::path file_;
};

}  // namespace

std::vector<std::string> Checkpoint::frozen_names() const {
  std::vector<std::string> out;
  for (const Entry& e : tensors)
    if (e.frozen) out.push_back(e.name);
  return out;
}

Checkpoint capture_checkpoint(MeshModel& model, const std::string& config_echo, std::uint64_t seed) {
  Checkpoint c;
  c.config_echo = config_echo;
  c.num_entities = model.config().num_entities;
  c.num_relations = model.config().num_relations;
  c.seed = seed;
  for (Parameter* p : model.parameters()) c.tensors.push_back({p->name, p->value, p->frozen});
  return c;
}

void write_checkpoint(const Checkpoint& checkpoint, const fs::path& file) {
  Writer w(file);
  w.raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(checkpoint.version);
  w.put_string(checkpoint.config_echo);
  w.put<std::uint64_t>(checkpoint.num_entities);
  w.put<std::uint64_t>(checkpoint.num_relations);
  w.put<std::uint64_t>(checkpoint.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const Checkpoint::Entry& e : checkpoint.tensors) {
    w.put_string(e.name);
    w.put<std::uint8_t>(std::is_same_v<Real, float> ? kFloat32 : kFloat64);
    w.put<std::uint8_t>(e.frozen ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t d : e.value.shape()) w.put<std::uint64_t>(d);
    for (Real v : e.value.values()) w.put<Real>(v);
  }
  w.finish();
}

Checkpoint read_checkpoint(const fs::path& file) {
  Reader r(file);
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint (bad magic)");
  Checkpoint c;
  c.version = r.get<std::uint32_t>();
  if (c.version != 1) r.fail("unsupported checkpoint version " + std::to_string(c.version));
  c.config_echo = r.get_string();
  c.num_entities = r.get<std::uint64_t>();
  c.num_relations = r.get<std::uint64_t>();
  c.seed = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Checkpoint::Entry e;
    e.name = r.get_string();
    const auto dtype = r.get<std::uint8_t>();
    if (dtype != kFloat32 && dtype != kFloat64) r.fail("tensor " + e.name + " has unknown element type");
    e.frozen = r.get<std::uint8_t>() != 0;
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("tensor " + e.name + " has implausible rank");
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      n *= d;
    }
    if (n > (std::size_t{1} << 34)) r.fail("tensor " + e.name + " is implausibly large");
    std::vector<Real> values(n);
    for (Real& v : values)
      v = dtype == kFloat32 ? static_cast<Real>(r.get<float>()) : static_cast<Real>(r.get<double>());
    e.value = Tensor(std::move(shape), std::move(values));
    c.tensors.push_back(std::move(e));
  }
  return c;
}

void restore_parameters(MeshModel& model, const Checkpoint& checkpoint) {
  if (checkpoint.num_entities != model.config().num_entities ||
      checkpoint.num_relations != model.config().num_relations)
    throw DataError("checkpoint vocabulary " + std::to_string(checkpoint.num_entities) + "x" +
                    std::to_string(checkpoint.num_relations) + " does not match the dataset");
  std::map<std::string, const Checkpoint::Entry*> by_name;
  for (const auto& e : checkpoint.tensors) by_name[e.name] = &e;
  const auto params = model.parameters();
  if (by_name.size() != params.size())
    throw DataError("checkpoint holds " + std::to_string(by_name.size()) + " tensors, model has " +
                    std::to_string(params.size()));
  for (Parameter* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw DataError("checkpoint lacks tensor " + p->name);
    if (it->second->value.shape() != p->value.shape())
      throw DataError("checkpoint tensor " + p->name + " has shape " + shape_string(it->second->value.shape()) +
                      ", model expects " + shape_string(p->value.shape()));
  }
  for (Parameter* p : params) {
    const auto* e = by_name[p->name];
    p->value = e->value;
    p->frozen = e->frozen;
    p->zero_grad();
  }
}

}  // namespace mesh
