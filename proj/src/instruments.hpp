#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "embedding.hpp"
#include "stats.hpp"

namespace tbench {

enum class InstrumentGroup { kChinese, kWestern };

std::string_view group_name(InstrumentGroup group);
InstrumentGroup parse_group(std::string_view text);

struct Instrument {
  std::string id;
  std::string name;
  InstrumentGroup group = InstrumentGroup::kChinese;
};

// Mean human ratings h[i][d] on the nine-point scale.
struct RatingsTable {
  std::vector<Instrument> instruments;
  std::vector<std::string> descriptors;
  std::vector<std::vector<double>> ratings;  // [instrument][descriptor]

  void validate() const;
};

// Header: instrument_id,instrument_name,group,descriptor,rating. Axis order is
// first appearance. Every (instrument, descriptor) cell must be present once.
RatingsTable parse_ratings_csv(std::string_view text, std::string_view source = "<memory>");
RatingsTable load_ratings_csv(const std::filesystem::path& path);

// s[i][d] = cos(a_i, t_d), on the same axes as the ratings.
struct SimilarityMatrix {
  std::vector<std::string> instrument_ids;
  std::vector<std::string> descriptors;
  std::vector<std::vector<double>> values;
};

using EmbeddingIndex = std::map<std::string, Embedding, std::less<>>;

SimilarityMatrix compute_similarity_matrix(std::span<const std::string> instrument_ids,
                                           std::span<const std::string> descriptors,
                                           const EmbeddingIndex& audio_by_instrument,
                                           const EmbeddingIndex& text_by_descriptor);

// Element-wise mean of several clip embeddings of one instrument. The mean
// is not renormalized; cosine similarity ignores scale.
Embedding average_embeddings(std::span<const Embedding> clips, std::string id);

// r_d over instruments for every descriptor, in descriptor order.
std::vector<LabeledCorrelation> descriptor_level_correlation(const SimilarityMatrix& s,
                                                             const RatingsTable& h);

struct InstrumentCorrelation {
  Instrument instrument;
  std::optional<double> r;
};

// r_i across descriptors for every instrument, in instrument order.
std::vector<InstrumentCorrelation> instrument_level_correlation(const SimilarityMatrix& s,
                                                                const RatingsTable& h);

CorrelationSummary summarize_group(std::span<const InstrumentCorrelation> rs, InstrumentGroup group);

}  // namespace tbench
