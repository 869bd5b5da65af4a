#include "agentrec/corpus.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "agentrec/text.hpp"

namespace agentrec {

AgentCorpus::AgentCorpus(std::string agent, RowMatrixXf embeddings, std::vector<std::string> prompt_ids)
    : agent_(std::move(agent)), embeddings_(std::move(embeddings)), prompt_ids_(std::move(prompt_ids)) {
  if (embeddings_.rows() < 1 || embeddings_.cols() < 1) {
    throw Error(ErrorCode::invalid_input, "corpus for '" + agent_ + "' is empty");
  }
  if (static_cast<std::size_t>(embeddings_.rows()) != prompt_ids_.size()) {
    throw Error(ErrorCode::invalid_input, "corpus for '" + agent_ + "' has " + std::to_string(embeddings_.rows()) +
                                              " rows but " + std::to_string(prompt_ids_.size()) + " prompt ids");
  }
  inverse_norms_.resize(embeddings_.rows());
  for (Eigen::Index i = 0; i < embeddings_.rows(); ++i) {
    const double norm = embeddings_.row(i).cast<double>().norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw Error(ErrorCode::norm_violation, "corpus '" + agent_ + "' row " + std::to_string(i) +
                                                 " has norm " + std::to_string(norm));
    }
    inverse_norms_[i] = 1.0 / norm;
  }
}

AgentCorpus make_corpus(std::string agent, std::span<const Embedding> rows, std::vector<std::string> prompt_ids) {
  if (rows.empty()) throw Error(ErrorCode::invalid_input, "corpus for '" + agent + "' is empty");
  const Eigen::Index dim = rows.front().dim();
  RowMatrixXf m(static_cast<Eigen::Index>(rows.size()), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].dim() != dim) throw Error(ErrorCode::contract_violation, "corpus rows differ in dimension");
    m.row(static_cast<Eigen::Index>(i)) = rows[i].values().cast<float>().transpose();
  }
  return AgentCorpus(std::move(agent), std::move(m), std::move(prompt_ids));
}

// ---------------------------------------------------------------------------

namespace {

// Unbiased draw in [0, bound) by rejection.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

// Fisher-Yates with a portable draw; std::shuffle's sequence is
// implementation-defined.
template <typename T>
void portable_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

std::size_t integral_share(std::size_t count, double fraction, const std::string& agent, const char* what) {
  const double exact = static_cast<double>(count) * fraction;
  const double rounded = std::round(exact);
  if (std::abs(exact - rounded) > 1e-9 * std::max(1.0, exact)) {
    std::ostringstream msg;
    msg << "agent '" << agent << "': " << what << " size " << count << " x " << fraction << " = " << exact
        << " is not an integer";
    throw Error(ErrorCode::invalid_configuration, msg.str());
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

DatasetSplits split_dataset(std::span<const PromptRecord> prompts, const SplitRatios& ratios, std::uint64_t seed) {
  if (!(ratios.train > 0.0 && ratios.train < 1.0) ||
      !(ratios.finetune_of_train > 0.0 && ratios.finetune_of_train < 1.0)) {
    throw Error(ErrorCode::invalid_configuration, "split ratios must lie in (0, 1)");
  }
  if (prompts.empty()) throw Error(ErrorCode::invalid_input, "cannot split an empty dataset");

  std::map<std::string, std::vector<PromptRecord>> by_agent;
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    if (!ids.insert(p.id).second) throw Error(ErrorCode::invalid_input, "duplicate prompt id '" + p.id + "'");
    by_agent[p.agent].push_back(p);
  }
  const std::size_t per_agent = by_agent.begin()->second.size();
  for (const auto& [agent, list] : by_agent) {
    if (list.size() != per_agent) {
      throw Error(ErrorCode::invalid_configuration,
                  "agent '" + agent + "' has " + std::to_string(list.size()) + " prompts, agent '" +
                      by_agent.begin()->first + "' has " + std::to_string(per_agent) +
                      "; equal per-agent splits need equal counts");
    }
  }

  DatasetSplits out;
  out.seed = seed;
  for (auto& [agent, list] : by_agent) {
    const std::size_t n_train = integral_share(list.size(), ratios.train, agent, "train");
    const std::size_t n_finetune = integral_share(n_train, ratios.finetune_of_train, agent, "finetune");

    std::mt19937_64 rng(mix64(seed ^ fnv1a64(agent)));
    portable_shuffle(list, rng);
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i < n_train) {
        out.train.push_back(list[i]);
        (i < n_finetune ? out.finetune : out.reward).push_back(list[i]);
      } else {
        out.test.push_back(list[i]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

CorpusMap build_agent_corpora(std::span<const PromptRecord> prompts, const TextEmbedder& embedder,
                              std::optional<std::size_t> per_agent_limit) {
  std::map<std::string, std::vector<const PromptRecord*>> by_agent;
  for (const auto& p : prompts) {
    if (p.agent.empty()) throw Error(ErrorCode::invalid_input, "prompt '" + p.id + "' has no agent label");
    auto& list = by_agent[p.agent];
    if (!per_agent_limit || list.size() < *per_agent_limit) list.push_back(&p);
  }

  CorpusMap corpora;
  for (const auto& [agent, list] : by_agent) {
    if (list.empty()) {
      std::cerr << "[corpus] agent '" << agent << "' has no prompts within the limit; skipped\n";
      continue;
    }
    std::vector<std::string> texts;
    std::vector<std::string> ids;
    texts.reserve(list.size());
    ids.reserve(list.size());
    for (const auto* p : list) {
      texts.push_back(p->text);
      ids.push_back(p->id);
    }
    std::vector<Embedding> rows;
    try {
      rows = embed_texts(embedder, texts);
    } catch (const Error& e) {
      throw Error(ErrorCode::build_error, "embedding batch for agent '" + agent + "' (" +
                                              std::to_string(texts.size()) + " prompts) failed: " + e.what());
    }
    corpora.emplace(agent, make_corpus(agent, rows, std::move(ids)));
  }
  return corpora;
}

CorpusMap build_agent_corpora(std::span<const PromptRecord> prompts, const EmbeddingProviderSpec& provider,
                              std::optional<std::size_t> per_agent_limit) {
  return build_agent_corpora(prompts, *make_embedder(provider), per_agent_limit);
}

// ---------------------------------------------------------------------------

namespace {

class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  template <typename T>
  void le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void string16(const std::string& s, const char* what) {
    if (s.size() > 0xffff) throw Error(ErrorCode::invalid_input, std::string(what) + " longer than 65535 bytes");
    le<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n) const {
    if (n > data_.size() - pos_) {
      throw Error(ErrorCode::truncated, "cache truncated: expected at least " + std::to_string(pos_ + n) +
                                            " bytes, file has " + std::to_string(data_.size()));
    }
  }
  template <typename T>
  T le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }
  std::string string16() {
    const auto len = le<std::uint16_t>();
    need(len);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), len);
    pos_ += len;
    return s;
  }
  std::size_t pos() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1U << 30));
    crc = crc32(crc, bytes.data() + off, chunk);
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize_corpus_cache(const CorpusMap& corpora) {
  if (corpora.empty()) throw Error(ErrorCode::invalid_input, "no corpora to cache");
  const Eigen::Index dim = corpora.begin()->second.dim();
  for (const auto& [id, c] : corpora) {
    if (c.dim() != dim) throw Error(ErrorCode::invalid_input, "corpora differ in embedding dimension");
  }

  ByteWriter w;
  w.bytes(kCacheMagic, sizeof(kCacheMagic));
  w.le<std::uint32_t>(kCacheVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(dim));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(corpora.size()));
  for (const auto& [id, c] : corpora) {
    w.string16(id, "agent id");
    w.le<std::uint64_t>(static_cast<std::uint64_t>(c.size()));
    for (const auto& pid : c.prompt_ids()) w.string16(pid, "prompt id");
    const float* p = c.embeddings().data();
    const auto count = static_cast<std::size_t>(c.embeddings().size());
    for (std::size_t i = 0; i < count; ++i) w.le<std::uint32_t>(std::bit_cast<std::uint32_t>(p[i]));
  }
  const std::uint32_t crc = crc32_of(w.buffer());
  w.le<std::uint32_t>(crc);
  return std::move(w.buffer());
}

CorpusMap parse_corpus_cache(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.need(sizeof(kCacheMagic));
  if (std::memcmp(bytes.data(), kCacheMagic, sizeof(kCacheMagic)) != 0) {
    throw Error(ErrorCode::bad_magic, "not an agent corpus cache (bad magic bytes)");
  }
  for (std::size_t i = 0; i < sizeof(kCacheMagic); ++i) r.le<std::uint8_t>();
  const auto version = r.le<std::uint32_t>();
  if (version != kCacheVersion) {
    throw Error(ErrorCode::unsupported_version, "unsupported cache version " + std::to_string(version));
  }
  const auto dim = r.le<std::uint32_t>();
  const auto agent_count = r.le<std::uint32_t>();
  if (dim == 0) throw Error(ErrorCode::invalid_input, "cache declares dim 0");

  struct Pending {
    std::string agent;
    RowMatrixXf rows;
    std::vector<std::string> ids;
  };
  std::vector<Pending> pending;
  for (std::uint32_t a = 0; a < agent_count; ++a) {
    Pending p;
    p.agent = r.string16();
    const auto rows = r.le<std::uint64_t>();
    // Every row needs at least a 2-byte id length and dim floats.
    if (rows > 0) r.need(static_cast<std::size_t>(std::min<std::uint64_t>(rows, bytes.size())) * 2);
    p.ids.reserve(static_cast<std::size_t>(rows));
    for (std::uint64_t i = 0; i < rows; ++i) p.ids.push_back(r.string16());
    const std::size_t count = static_cast<std::size_t>(rows) * dim;
    if (rows != 0 && count / dim != rows) throw Error(ErrorCode::truncated, "cache row count overflows");
    r.need(count * 4);
    p.rows.resize(static_cast<Eigen::Index>(rows), dim);
    float* out = p.rows.data();
    for (std::size_t i = 0; i < count; ++i) out[i] = std::bit_cast<float>(r.le<std::uint32_t>());
    pending.push_back(std::move(p));
  }
  const std::size_t body = r.pos();
  r.need(4);
  const auto stored_crc = r.le<std::uint32_t>();
  if (r.pos() != bytes.size()) {
    throw Error(ErrorCode::io_error, "cache has " + std::to_string(bytes.size() - r.pos()) + " trailing bytes");
  }
  const auto actual_crc = crc32_of(bytes.first(body));
  if (stored_crc != actual_crc) throw Error(ErrorCode::checksum_mismatch, "cache CRC32 mismatch");

  CorpusMap corpora;
  for (auto& p : pending) {
    std::string agent = p.agent;
    if (corpora.count(agent)) throw Error(ErrorCode::invalid_input, "cache lists agent '" + agent + "' twice");
    corpora.emplace(agent, AgentCorpus(std::move(p.agent), std::move(p.rows), std::move(p.ids)));
  }
  return corpora;
}

std::size_t save_corpus_cache(const CorpusMap& corpora, const std::filesystem::path& path) {
  const auto bytes = serialize_corpus_cache(corpora);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::io_error, "failed writing '" + path.string() + "'");
  return bytes.size();
}

CorpusMap load_corpus_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io_error, "failed reading '" + path.string() + "'");
  return parse_corpus_cache(bytes);
}

// ---------------------------------------------------------------------------

std::vector<PromptRecord> parse_prompts_jsonl(std::istream& in, const std::string& source_name) {
  std::vector<PromptRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (normalize_whitespace(line).empty()) continue;
    const std::string where = source_name + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::invalid_input, where + ": malformed JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("agent") ||
        !j["agent"].is_string()) {
      throw Error(ErrorCode::invalid_input, where + ": expected string fields \"agent\" and \"text\"");
    }
    PromptRecord r;
    r.agent = j["agent"].get<std::string>();
    r.text = j["text"].get<std::string>();
    if (j.contains("id")) {
      if (!j["id"].is_string()) throw Error(ErrorCode::invalid_input, where + ": \"id\" must be a string");
      r.id = j["id"].get<std::string>();
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PromptRecord> read_prompts_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  return parse_prompts_jsonl(in, path.string());
}

void write_prompts_jsonl(std::span<const PromptRecord> prompts, std::ostream& out) {
  for (const auto& p : prompts) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["agent"] = p.agent;
    j["text"] = p.text;
    out << j.dump() << '\n';
  }
}

void write_prompts_jsonl(std::span<const PromptRecord> prompts, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "' for writing");
  write_prompts_jsonl(prompts, out);
  if (!out) throw Error(ErrorCode::io_error, "failed writing '" + path.string() + "'");
}

std::vector<PromptRecord> ingest_prompts(std::span<const PromptRecord> raw, const std::set<std::string>& registry) {
  std::vector<PromptRecord> out;
  out.reserve(raw.size());
  std::set<std::string> ids;
  std::map<std::string, std::size_t> counters;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    PromptRecord r{normalize_whitespace(raw[i].id), normalize_whitespace(raw[i].agent),
                   normalize_whitespace(raw[i].text)};
    const std::string where = "record " + std::to_string(i + 1);
    if (r.agent.empty()) throw Error(ErrorCode::invalid_input, where + ": empty agent");
    if (r.text.empty()) throw Error(ErrorCode::invalid_input, where + ": empty text");
    if (!registry.empty() && !registry.count(r.agent)) {
      throw Error(ErrorCode::invalid_input, where + ": unregistered agent '" + r.agent + "'");
    }
    if (r.id.empty()) {
      do {
        std::ostringstream id;
        id << r.agent << '-' << std::setw(5) << std::setfill('0') << counters[r.agent]++;
        r.id = id.str();
      } while (ids.count(r.id));
    }
    if (!ids.insert(r.id).second) throw Error(ErrorCode::invalid_input, where + ": duplicate id '" + r.id + "'");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace agentrec
