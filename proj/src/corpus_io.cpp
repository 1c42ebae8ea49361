#include "bitext/corpus_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "bitext/errors.hpp"

namespace bitext {

namespace fs = std::filesystem;

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t count)
    : dim_(dim), count_(count), data_(dim * count, 0.0f) {
  if (dim == 0) throw ValidationError("embedding matrix: dim must be positive");
}

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> data)
    : dim_(dim), count_(count), data_(std::move(data)) {
  if (dim == 0) throw ValidationError("embedding matrix: dim must be positive");
  if (data_.size() != dim * count) {
    throw ValidationError("embedding matrix: data length " + std::to_string(data_.size()) +
                          " != count*dim (" + std::to_string(count) + "*" + std::to_string(dim) +
                          ")");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw ValidationError("embedding matrix: non-finite value at row " +
                            std::to_string(i / dim));
    }
  }
}

EmbeddingMatrix EmbeddingMatrix::gather(std::span<const std::size_t> indices) const {
  EmbeddingMatrix out(dim_, indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= count_) {
      throw ValidationError("gather: row " + std::to_string(indices[r]) + " out of range (count " +
                            std::to_string(count_) + ")");
    }
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

bool EmbeddingMatrix::bit_equal(const EmbeddingMatrix& other) const noexcept {
  return dim_ == other.dim_ && count_ == other.count_ &&
         std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

GoldAlignment GoldAlignment::identity(std::size_t n) {
  GoldAlignment gold;
  gold.target_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) gold.target_of[i] = i;
  return gold;
}

bool GoldAlignment::is_identity() const noexcept {
  for (std::size_t i = 0; i < target_of.size(); ++i) {
    if (target_of[i] != i) return false;
  }
  return true;
}

std::optional<std::size_t> find_invalid_utf8(std::string_view text) {
  const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  std::size_t i = 0;
  while (i < n) {
    const unsigned char c = bytes[i];
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return i;
    }
    if (i + len > n) return i;
    for (std::size_t k = 1; k < len; ++k) {
      if ((bytes[i + k] & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (bytes[i + k] & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    static constexpr std::uint32_t kMinForLen[5] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMinForLen[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return i;
    i += len;
  }
  return std::nullopt;
}

SentenceCorpus load_sentences(const fs::path& path, std::string language_tag) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open sentence file " + path.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on " + path.string());

  if (auto bad = find_invalid_utf8(content)) {
    throw ValidationError(path.string() + ": invalid UTF-8 at byte offset " +
                          std::to_string(*bad));
  }

  SentenceCorpus corpus;
  corpus.language_tag = std::move(language_tag);
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    const bool last = end == std::string::npos;
    if (last) end = content.size();
    std::string_view line(content.data() + start, end - start);
    // Trailing whitespace, which includes the CR of CRLF endings.
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t' ||
                             line.back() == '\v' || line.back() == '\f')) {
      line.remove_suffix(1);
    }
    if (line.find('\r') != std::string_view::npos) {
      throw ValidationError(path.string() + ": bare carriage return inside line " +
                            std::to_string(corpus.sentences.size()));
    }
    if (line.empty()) ++corpus.empty_lines;
    corpus.sentences.emplace_back(line);
    start = end + 1;
  }
  return corpus;
}

EmbeddingMatrix load_embeddings(const fs::path& path, const EmbeddingLoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open embedding file " + path.string());
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  std::size_t dim = 0;
  std::uint64_t count = 0;

  if (options.format == EmbeddingFormat::emb1) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kEmb1Magic, 4) != 0) {
      throw ValidationError(path.string() + ": bad magic (expected EMB1)");
    }
    std::uint32_t header_dim = 0;
    if (!detail::read_le(in, header_dim) || !detail::read_le(in, count)) {
      throw ValidationError(path.string() + ": truncated EMB1 header");
    }
    if (header_dim == 0) throw ValidationError(path.string() + ": EMB1 header has dim 0");
    if (options.dim && *options.dim != header_dim) {
      throw DimensionMismatch(*options.dim, header_dim, path.string());
    }
    dim = header_dim;
    const std::uint64_t payload = file_size - kEmb1HeaderBytes;
    if (count > payload / (4 * static_cast<std::uint64_t>(dim))) {
      throw ValidationError(path.string() + ": truncated payload (header declares " +
                            std::to_string(count) + " rows of dim " + std::to_string(dim) + ", " +
                            std::to_string(payload) + " payload bytes)");
    }
    if (payload != count * dim * 4) {
      throw ValidationError(path.string() + ": " +
                            std::to_string(payload - count * dim * 4) +
                            " trailing bytes after EMB1 payload");
    }
  } else {
    if (!options.dim || *options.dim == 0) {
      throw ValidationError("raw_f32 import requires a positive dim");
    }
    dim = *options.dim;
    const std::uint64_t row_bytes = 4 * static_cast<std::uint64_t>(dim);
    if (file_size % row_bytes != 0) {
      throw ValidationError(path.string() + ": size " + std::to_string(file_size) +
                            " is not a multiple of 4*dim (" + std::to_string(row_bytes) + ")");
    }
    count = file_size / row_bytes;
  }

  std::vector<float> data(static_cast<std::size_t>(count) * dim);
  if (detail::read_floats_le(in, data) != data.size()) {
    throw ValidationError(path.string() + ": truncated payload");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(path.string() + ": non-finite value at row " + std::to_string(i / dim));
    }
  }
  return EmbeddingMatrix(dim, static_cast<std::size_t>(count), std::move(data));
}

void save_embeddings(const EmbeddingMatrix& matrix, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kEmb1Magic, 4);
  detail::write_le(out, static_cast<std::uint32_t>(matrix.dim()));
  detail::write_le(out, static_cast<std::uint64_t>(matrix.count()));
  detail::write_floats_le(out, matrix.data());
  out.flush();
  if (!out) throw IoError("write failure on " + path.string());
}

GoldAlignment load_gold_tsv(const fs::path& path, std::size_t n_sources, std::size_t n_targets) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open gold file " + path.string());
  constexpr std::size_t kUnset = static_cast<std::size_t>(-1);
  GoldAlignment gold;
  gold.target_of.assign(n_sources, kUnset);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    long long src = -1;
    long long tgt = -1;
    std::string extra;
    if (!(fields >> src >> tgt) || (fields >> extra) || src < 0 || tgt < 0) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected two non-negative integers");
    }
    if (static_cast<std::size_t>(src) >= n_sources || static_cast<std::size_t>(tgt) >= n_targets) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": index out of range");
    }
    auto& slot = gold.target_of[static_cast<std::size_t>(src)];
    if (slot != kUnset) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate source index " + std::to_string(src));
    }
    slot = static_cast<std::size_t>(tgt);
  }
  for (std::size_t i = 0; i < n_sources; ++i) {
    if (gold.target_of[i] == kUnset) {
      throw ValidationError(path.string() + ": no gold target for source index " +
                            std::to_string(i));
    }
  }
  return gold;
}

void check_counts(std::size_t lhs, std::size_t rhs, const std::string& what) {
  if (lhs != rhs) {
    throw ValidationError(what + ": row counts differ (" + std::to_string(lhs) + " vs " +
                          std::to_string(rhs) + ")");
  }
}

}  // namespace bitext
