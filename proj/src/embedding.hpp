#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tbench {

enum class Modality { kAudio, kText };

std::string_view modality_name(Modality kind);
Modality parse_modality(std::string_view text);

struct Embedding {
  std::string id;
  Modality kind = Modality::kAudio;
  std::string model;
  std::vector<double> vector;

  std::size_t dim() const noexcept { return vector.size(); }
};

// dot(x, y) / (|x| |y|) in double precision. Throws on dimension mismatch or
// a zero vector.
double cosine_similarity(std::span<const double> x, std::span<const double> y);
double cosine_similarity(const Embedding& x, const Embedding& y);

// Line-delimited embedding records:
//   {"id": ..., "kind": "audio"|"text", "model": ..., "dim": N, "vector": [...]}
// Blank lines and lines starting with '#' (provenance comments) are ignored.
// Malformed records are reported with their 1-based line number.
std::vector<Embedding> parse_embeddings(std::string_view text, std::string_view source = "<memory>");
std::string format_embeddings(std::span<const Embedding> embeddings);
std::vector<Embedding> load_embeddings(const std::filesystem::path& path);
void save_embeddings(std::span<const Embedding> embeddings, const std::filesystem::path& path);

struct EmbedRequest {
  std::string id;
  Modality kind = Modality::kText;
  std::string payload;  // audio file path or descriptor text
};

std::string format_requests(std::span<const EmbedRequest> requests);
std::vector<EmbedRequest> parse_requests(std::string_view text, std::string_view source = "<memory>");

struct AdapterSpec {
  std::string name;
  // Shell command. "{requests}" and "{response}" are substituted when present,
  // otherwise both paths are appended as trailing arguments.
  std::string command;
  std::string model_name;
  std::optional<std::size_t> expected_dim;
};

struct AdapterOptions {
  // Content-addressed per-item cache keyed by (model, kind, payload hash).
  // Disabled when empty.
  std::filesystem::path cache_dir;
  // Where request/response files are written; a temporary directory if empty.
  std::filesystem::path work_dir;
};

struct AdapterRunStats {
  std::size_t requested = 0;
  std::size_t cache_hits = 0;
  std::size_t invocations = 0;
};

// Runs one batch through an external embedder. Returns one embedding per
// request, in request order, each tagged with the request's id and kind and
// the adapter's model_name.
std::vector<Embedding> run_adapter(const AdapterSpec& spec, std::span<const EmbedRequest> requests,
                                   const AdapterOptions& options = {},
                                   AdapterRunStats* stats = nullptr);

// Hash identifying a request payload's content: the text itself, or the bytes
// of the audio file.
std::string payload_content_hash(const EmbedRequest& request);

}  // namespace tbench
