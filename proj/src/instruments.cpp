#include "instruments.hpp"

#include <cctype>
#include <fmt/format.h>
#include <optional>
#include <set>
#include <unordered_map>

#include "csv.hpp"
#include "error.hpp"
#include "fileutil.hpp"

namespace tbench {

namespace {

void check_axes(const SimilarityMatrix& s, const RatingsTable& h) {
  if (s.descriptors != h.descriptors) {
    fail(ErrorKind::kInvalidInput, "similarity matrix and ratings have different descriptor axes");
  }
  if (s.instrument_ids.size() != h.instruments.size()) {
    fail(ErrorKind::kInvalidInput, "similarity matrix and ratings have different instrument counts");
  }
  for (std::size_t i = 0; i < h.instruments.size(); ++i) {
    if (s.instrument_ids[i] != h.instruments[i].id) {
      fail(ErrorKind::kInvalidInput,
           fmt::format("instrument axis mismatch at row {}: {} vs {}", i, s.instrument_ids[i],
                       h.instruments[i].id));
    }
  }
}

}  // namespace

std::string_view group_name(InstrumentGroup group) {
  return group == InstrumentGroup::kChinese ? "chinese" : "western";
}

InstrumentGroup parse_group(std::string_view text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "chinese") return InstrumentGroup::kChinese;
  if (lower == "western") return InstrumentGroup::kWestern;
  fail(ErrorKind::kInvalidInput, fmt::format("unknown instrument group '{}'", text));
}

void RatingsTable::validate() const {
  if (instruments.empty()) fail(ErrorKind::kInvalidInput, "ratings table has no instruments");
  if (descriptors.empty()) fail(ErrorKind::kInvalidInput, "ratings table has no descriptors");
  std::set<std::string_view> ids;
  for (const auto& inst : instruments) {
    if (!ids.insert(inst.id).second) fail(ErrorKind::kInvalidInput, "duplicate instrument id " + inst.id);
  }
  std::set<std::string_view> labels;
  for (const auto& d : descriptors) {
    if (!labels.insert(d).second) fail(ErrorKind::kInvalidInput, "duplicate descriptor " + d);
  }
  if (ratings.size() != instruments.size()) fail(ErrorKind::kInvalidInput, "ratings matrix row count mismatch");
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i].size() != descriptors.size()) {
      fail(ErrorKind::kInvalidInput, "ratings matrix column count mismatch for " + instruments[i].id);
    }
    for (std::size_t d = 0; d < descriptors.size(); ++d) {
      const double v = ratings[i][d];
      if (!(v >= 1.0 && v <= 9.0)) {
        fail(ErrorKind::kInvalidInput, fmt::format("rating {} for instrument {}, descriptor {} outside [1, 9]",
                                                   v, instruments[i].id, descriptors[d]));
      }
    }
  }
}

RatingsTable parse_ratings_csv(std::string_view text, std::string_view source) {
  const auto csv = parse_csv(text, source);
  const auto c_id = csv.column("instrument_id");
  const auto c_name = csv.column("instrument_name");
  const auto c_group = csv.column("group");
  const auto c_desc = csv.column("descriptor");
  const auto c_rating = csv.column("rating");

  RatingsTable table;
  std::unordered_map<std::string, std::size_t> inst_index;
  std::unordered_map<std::string, std::size_t> desc_index;
  std::vector<std::vector<std::optional<double>>> cells;

  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const auto where = fmt::format("{}:{}", source, csv.line_numbers[r]);
    const auto& id = row[c_id];
    if (id.empty()) fail(ErrorKind::kInvalidInput, where + ": empty instrument_id");
    const auto& desc = row[c_desc];
    if (desc.empty()) fail(ErrorKind::kInvalidInput, where + ": empty descriptor");
    InstrumentGroup group;
    try {
      group = parse_group(row[c_group]);
    } catch (const Error& e) {
      fail(ErrorKind::kInvalidInput, where + ": " + e.what());
    }
    const double rating = parse_real(row[c_rating], where);

    auto [it, new_inst] = inst_index.emplace(id, table.instruments.size());
    if (new_inst) {
      table.instruments.push_back({id, row[c_name], group});
      cells.emplace_back(table.descriptors.size());
    } else {
      const auto& known = table.instruments[it->second];
      if (known.name != row[c_name] || known.group != group) {
        fail(ErrorKind::kInvalidInput,
             fmt::format("{}: instrument {} has inconsistent name or group", where, id));
      }
    }
    auto [dit, new_desc] = desc_index.emplace(desc, table.descriptors.size());
    if (new_desc) {
      table.descriptors.push_back(desc);
      for (auto& row_cells : cells) row_cells.emplace_back();
    }
    auto& cell = cells[it->second][dit->second];
    if (cell) {
      fail(ErrorKind::kInvalidInput,
           fmt::format("{}: duplicate rating for instrument {}, descriptor {}", where, id, desc));
    }
    if (!(rating >= 1.0 && rating <= 9.0)) {
      fail(ErrorKind::kInvalidInput, fmt::format("{}: rating {} outside [1, 9]", where, rating));
    }
    cell = rating;
  }

  table.ratings.resize(table.instruments.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t d = 0; d < table.descriptors.size(); ++d) {
      if (!cells[i][d]) {
        fail(ErrorKind::kInvalidInput, fmt::format("{}: missing rating for instrument {}, descriptor {}",
                                                   source, table.instruments[i].id, table.descriptors[d]));
      }
      table.ratings[i].push_back(*cells[i][d]);
    }
  }
  table.validate();
  return table;
}

RatingsTable load_ratings_csv(const std::filesystem::path& path) {
  return parse_ratings_csv(read_file(path), path.string());
}

SimilarityMatrix compute_similarity_matrix(std::span<const std::string> instrument_ids,
                                           std::span<const std::string> descriptors,
                                           const EmbeddingIndex& audio_by_instrument,
                                           const EmbeddingIndex& text_by_descriptor) {
  SimilarityMatrix s;
  s.instrument_ids.assign(instrument_ids.begin(), instrument_ids.end());
  s.descriptors.assign(descriptors.begin(), descriptors.end());
  std::vector<const Embedding*> text;
  for (const auto& d : descriptors) {
    auto it = text_by_descriptor.find(d);
    if (it == text_by_descriptor.end()) fail(ErrorKind::kInvalidInput, "missing text embedding for descriptor " + d);
    text.push_back(&it->second);
  }
  for (const auto& id : instrument_ids) {
    auto it = audio_by_instrument.find(id);
    if (it == audio_by_instrument.end()) fail(ErrorKind::kInvalidInput, "missing audio embedding for instrument " + id);
    auto& row = s.values.emplace_back();
    row.reserve(text.size());
    for (const auto* t : text) row.push_back(cosine_similarity(it->second, *t));
  }
  return s;
}

Embedding average_embeddings(std::span<const Embedding> clips, std::string id) {
  if (clips.empty()) fail(ErrorKind::kInvalidInput, "no clip embeddings for " + id);
  Embedding out;
  out.id = std::move(id);
  out.kind = clips.front().kind;
  out.model = clips.front().model;
  out.vector.assign(clips.front().dim(), 0.0);
  for (const auto& c : clips) {
    if (c.dim() != out.dim() || c.model != out.model) {
      fail(ErrorKind::kInvalidInput, "clip embeddings of " + out.id + " disagree on model or dim");
    }
    for (std::size_t k = 0; k < c.dim(); ++k) out.vector[k] += c.vector[k];
  }
  const double scale = 1.0 / static_cast<double>(clips.size());
  for (double& v : out.vector) v *= scale;
  return out;
}

std::vector<LabeledCorrelation> descriptor_level_correlation(const SimilarityMatrix& s, const RatingsTable& h) {
  check_axes(s, h);
  if (h.instruments.size() < 3) {
    fail(ErrorKind::kInvalidInput, "descriptor-level correlation needs at least 3 instruments");
  }
  std::vector<LabeledCorrelation> out;
  std::vector<double> hs(h.instruments.size()), ss(h.instruments.size());
  for (std::size_t d = 0; d < h.descriptors.size(); ++d) {
    for (std::size_t i = 0; i < h.instruments.size(); ++i) {
      hs[i] = h.ratings[i][d];
      ss[i] = s.values[i][d];
    }
    out.push_back({h.descriptors[d], pearson(hs, ss)});
  }
  return out;
}

std::vector<InstrumentCorrelation> instrument_level_correlation(const SimilarityMatrix& s, const RatingsTable& h) {
  check_axes(s, h);
  if (h.descriptors.size() < 3) {
    fail(ErrorKind::kInvalidInput, "instrument-level correlation needs at least 3 descriptors");
  }
  std::vector<InstrumentCorrelation> out;
  for (std::size_t i = 0; i < h.instruments.size(); ++i) {
    out.push_back({h.instruments[i], pearson(h.ratings[i], s.values[i])});
  }
  return out;
}

CorrelationSummary summarize_group(std::span<const InstrumentCorrelation> rs, InstrumentGroup group) {
  std::vector<LabeledCorrelation> selected;
  for (const auto& r : rs) {
    if (r.instrument.group == group) selected.push_back({r.instrument.id, r.r});
  }
  return summarize_correlations(selected);
}

}  // namespace tbench
