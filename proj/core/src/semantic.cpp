#include "mesh/semantic.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mesh/structural.hpp"

namespace mesh {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDomain = "<DATA DOMAIN>";
constexpr const char* kType = "<DATA TYPE>";
constexpr const char* kEntity = "<ENTITY>";
constexpr const char* kRelation = "<RELATION>";

std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
  return text;
}

std::string render(const std::string& tmpl, const PromptTemplate& p, const char* slot, const std::string& name) {
  std::string out = replace_all(tmpl, kDomain, p.domain);
  out = replace_all(out, kType, p.datatype);
  return replace_all(out, slot, name);
}

}  // namespace

void PromptTemplate::validate() const {
  for (const char* slot : {kDomain, kType, kEntity})
    if (entity_template.find(slot) == std::string::npos)
      throw ConfigError(std::string("entity template lacks placeholder ") + slot);
  for (const char* slot : {kDomain, kType, kRelation})
    if (relation_template.find(slot) == std::string::npos)
      throw ConfigError(std::string("relation template lacks placeholder ") + slot);
}

std::string PromptTemplate::entity_prompt(const std::string& name) const {
  return render(entity_template, *this, kEntity, name);
}

std::string PromptTemplate::relation_prompt(const std::string& name) const {
  return render(relation_template, *this, kRelation, name);
}

std::string render_prompts(const Vocabulary& vocab, const PromptTemplate& prompt) {
  prompt.validate();
  std::ostringstream out;
  for (std::size_t i = 0; i < vocab.entity_names.size(); ++i)
    out << "E\t" << i << '\t' << prompt.entity_prompt(vocab.entity_names[i]) << '\n';
  for (std::size_t i = 0; i < vocab.relation_names.size(); ++i)
    out << "R\t" << i << '\t' << prompt.relation_prompt(vocab.relation_names[i]) << '\n';
  return out.str();
}

void emit_prompts(const Vocabulary& vocab, const PromptTemplate& prompt, const fs::path& file) {
  const std::string text = render_prompts(vocab, prompt);
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  out << text;
}

// ---- embedding files ---------------------------------------------------------

namespace {

std::string format_value(Real v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string list_missing(const std::vector<bool>& seen, char kind) {
  std::string out;
  std::size_t listed = 0, missing = 0;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) continue;
    ++missing;
    if (listed < 20) {
      out += (listed ? "," : "") + std::string(1, kind) + std::to_string(i);
      ++listed;
    }
  }
  if (missing > listed) out += ",... (" + std::to_string(missing) + " total)";
  return out;
}

}  // namespace

SemanticEmbeddingTable load_semantic_embeddings(const fs::path& file, const Vocabulary& vocab) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file " + file.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  std::size_t rows = 0, dim = 0;
  if (!(hs >> magic >> version >> rows >> dim) || magic != "tkg-emb" || version != 1 || dim == 0)
    throw DataError(file.string() + ": bad header, expected 'tkg-emb 1 <row_count> <dim>'");

  const std::size_t ne = vocab.num_entities(), nr = vocab.num_relations();
  SemanticEmbeddingTable table;
  table.entities = Tensor({ne, dim});
  table.relations = Tensor({nr, dim});
  table.source = file.string();

  // Text bodies start with a kind tag and a tab and end with a newline; a
  // float32 body has exactly rows * dim * 4 bytes. The byte pattern decides
  // first since a short text body can have the binary size by coincidence.
  const std::streampos body = in.tellg();
  char lead[2] = {0, 0};
  in.read(lead, 2);
  in.clear();
  in.seekg(0, std::ios::end);
  const auto remaining = static_cast<std::size_t>(in.tellg() - body);
  char last = 0;
  if (remaining > 0) {
    in.seekg(-1, std::ios::end);
    in.get(last);
  }
  in.clear();
  in.seekg(body);
  const bool looks_text = (lead[0] == 'E' || lead[0] == 'R') && lead[1] == '\t' && last == '\n';

  if (!looks_text && remaining == rows * dim * sizeof(float)) {
    if (rows != ne + nr)
      throw DataError(file.string() + ": binary table has " + std::to_string(rows) + " rows, vocabulary needs " +
                      std::to_string(ne + nr));
    std::vector<float> buf(dim);
    for (std::size_t r = 0; r < rows; ++r) {
      in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
      if constexpr (std::endian::native == std::endian::big) {
        for (float& f : buf) {
          std::uint32_t u;
          std::memcpy(&u, &f, 4);
          u = __builtin_bswap32(u);
          std::memcpy(&f, &u, 4);
        }
      }
      Real* dst = r < ne ? table.entities.row(r).data() : table.relations.row(r - ne).data();
      for (std::size_t c = 0; c < dim; ++c) {
        if (!std::isfinite(buf[c])) throw DataError(file.string() + ": non-finite value in row " + std::to_string(r));
        dst[c] = static_cast<Real>(buf[c]);
      }
    }
    return table;
  }

  std::vector<bool> seen_e(ne, false), seen_r(nr, false);
  std::string line;
  std::size_t number = 1, count = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = file.string() + ":" + std::to_string(number);
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || t1 != 1 || (line[0] != 'E' && line[0] != 'R'))
      throw DataError(where + ": expected E|R<TAB>id<TAB>values");
    std::size_t id = 0;
    {
      const auto [p, ec] = std::from_chars(line.data() + 2, line.data() + t2, id);
      if (ec != std::errc{} || p != line.data() + t2) throw DataError(where + ": bad id");
    }
    const bool is_entity = line[0] == 'E';
    if (id >= (is_entity ? ne : nr)) throw DataError(where + ": id " + std::to_string(id) + " outside vocabulary");
    Real* dst = is_entity ? table.entities.row(id).data() : table.relations.row(id).data();
    const char* p = line.data() + t2 + 1;
    const char* end = line.data() + line.size();
    std::size_t c = 0;
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      Real v{};
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw DataError(where + ": bad value");
      if (c >= dim) throw DataError(where + ": more than " + std::to_string(dim) + " values (format error)");
      if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
      dst[c++] = v;
      p = next;
    }
    if (c != dim)
      throw DataError(where + ": " + std::to_string(c) + " values, header declares " + std::to_string(dim) +
                      " (format error)");
    (is_entity ? seen_e : seen_r)[id] = true;
    ++count;
  }
  if (count != rows)
    throw DataError(file.string() + ": header declares " + std::to_string(rows) + " rows, found " +
                    std::to_string(count));
  const std::string missing_e = list_missing(seen_e, 'E');
  const std::string missing_r = list_missing(seen_r, 'R');
  if (!missing_e.empty() || !missing_r.empty())
    throw DataError(file.string() + ": coverage error, missing ids " + missing_e +
                    (missing_e.empty() || missing_r.empty() ? "" : ",") + missing_r);
  return table;
}

void save_semantic_embeddings(const SemanticEmbeddingTable& table, const fs::path& file, EmbeddingEncoding encoding) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw DataError("cannot write " + file.string());
  const std::size_t ne = table.entities.rows(), nr = table.relations.rows(), dim = table.dim();
  out << "tkg-emb 1 " << (ne + nr) << ' ' << dim << '\n';
  if (encoding == EmbeddingEncoding::binary) {
    std::vector<float> buf(dim);
    auto write_rows = [&](const Tensor& t) {
      for (std::size_t r = 0; r < t.rows(); ++r) {
        for (std::size_t c = 0; c < dim; ++c) buf[c] = static_cast<float>(t.at(r, c));
        if constexpr (std::endian::native == std::endian::big) {
          for (float& f : buf) {
            std::uint32_t u;
            std::memcpy(&u, &f, 4);
            u = __builtin_bswap32(u);
            std::memcpy(&f, &u, 4);
          }
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(dim * sizeof(float)));
      }
    };
    write_rows(table.entities);
    write_rows(table.relations);
    return;
  }
  auto write_rows = [&](const Tensor& t, char kind) {
    for (std::size_t r = 0; r < t.rows(); ++r) {
      out << kind << '\t' << r << '\t';
      for (std::size_t c = 0; c < dim; ++c) out << (c ? " " : "") << format_value(t.at(r, c));
      out << '\n';
    }
  };
  write_rows(table.entities, 'E');
  write_rows(table.relations, 'R');
}

SemanticEmbeddingTable synthetic_embeddings(const Vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
  require(dim >= 1, "synthetic_embeddings: dim must be >= 1");
  SemanticEmbeddingTable table;
  table.entities = Tensor({vocab.num_entities(), dim});
  table.relations = Tensor({vocab.num_relations(), dim});
  table.source = "synthetic:" + std::to_string(seed);
  const Rng root(seed);
  auto fill = [&](Tensor& t, std::uint64_t kind) {
    const Rng stream = root.split(kind);
    for (std::size_t r = 0; r < t.rows(); ++r) {
      Rng row = stream.split(r);
      for (Real& v : t.row(r)) v = static_cast<Real>(row.normal());
    }
  };
  fill(table.entities, 'E');
  fill(table.relations, 'R');
  return table;
}

// ---- adapters ----------------------------------------------------------------

Adapter::Adapter(const std::string& name, std::size_t in_dim, std::size_t hidden, std::size_t out_dim, Rng& rng)
    : w1(name + ".w1", xavier_uniform({in_dim, hidden}, in_dim, hidden, rng)),
      b1(name + ".b1", Tensor({hidden})),
      w2(name + ".w2", xavier_uniform({hidden, out_dim}, hidden, out_dim, rng)),
      b2(name + ".b2", Tensor({out_dim})) {}

Var Adapter::forward(Tape& tape, Var x) {
  require(x.cols() == in_dim(), "adapter: input has " + std::to_string(x.cols()) + " columns, expected " +
                                    std::to_string(in_dim()));
  Var hidden = relu(add_bias(matmul(x, tape.param(w1)), tape.param(b1)));
  return add_bias(matmul(hidden, tape.param(w2)), tape.param(b2));
}

AdaptedTables adapt(Tape& tape, const SemanticEmbeddingTable& table, Adapter& entity_adapter,
                    Adapter& relation_adapter) {
  return {entity_adapter.forward(tape, tape.constant(table.entities)),
          relation_adapter.forward(tape, tape.constant(table.relations))};
}

}  // namespace mesh
