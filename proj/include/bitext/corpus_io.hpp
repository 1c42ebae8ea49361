#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bitext {

/// Line-per-sentence text. A sentence's position is its identity.
struct SentenceCorpus {
  std::vector<std::string> sentences;
  std::string language_tag;
  /// Number of empty lines kept as empty sentences.
  std::size_t empty_lines = 0;

  std::size_t size() const noexcept { return sentences.size(); }
};

/// count x dim row-major float32 matrix. Values are finite once constructed
/// through the checked constructor or a loader.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t dim, std::size_t count);
  /// Takes ownership of `data`; throws ValidationError if the size is not
  /// count*dim or a value is not finite.
  EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> data);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  bool empty() const noexcept { return count_ == 0; }

  std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<float> row(std::size_t i) { return {data_.data() + i * dim_, dim_}; }

  const std::vector<float>& data() const noexcept { return data_; }
  std::vector<float>& data() noexcept { return data_; }

  /// Rows at `indices`, in that order.
  EmbeddingMatrix gather(std::span<const std::size_t> indices) const;

  /// Bitwise equality (distinguishes -0.0 from 0.0).
  bool bit_equal(const EmbeddingMatrix& other) const noexcept;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

/// Maps each query index i to its correct target index.
struct GoldAlignment {
  std::vector<std::size_t> target_of;

  std::size_t size() const noexcept { return target_of.size(); }
  static GoldAlignment identity(std::size_t n);
  bool is_identity() const noexcept;
};

enum class EmbeddingFormat { emb1, raw_f32 };

struct EmbeddingLoadOptions {
  EmbeddingFormat format = EmbeddingFormat::emb1;
  /// Required for raw_f32; for emb1 a mismatch with the header is an error.
  std::optional<std::size_t> dim;
};

inline constexpr char kEmb1Magic[4] = {'E', 'M', 'B', '1'};
inline constexpr std::size_t kEmb1HeaderBytes = 16;

SentenceCorpus load_sentences(const std::filesystem::path& path, std::string language_tag = {});

EmbeddingMatrix load_embeddings(const std::filesystem::path& path,
                                const EmbeddingLoadOptions& options = {});

void save_embeddings(const EmbeddingMatrix& matrix, const std::filesystem::path& path);

/// Header-less two-column TSV of base-10 (source_index, target_index).
/// Every source index in [0, n_sources) must appear exactly once and every
/// target index must be < n_targets.
GoldAlignment load_gold_tsv(const std::filesystem::path& path, std::size_t n_sources,
                            std::size_t n_targets);

/// Throws ValidationError unless both sides have the same number of rows.
void check_counts(std::size_t lhs, std::size_t rhs, const std::string& what);

/// Byte offset of the first invalid UTF-8 sequence, if any.
std::optional<std::size_t> find_invalid_utf8(std::string_view text);

}  // namespace bitext
