#include "embedding.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <fmt/format.h>
#include <map>
#include <mutex>
#include <set>
#include <spawn.h>
#include <sys/wait.h>
#include <unordered_map>

#include <json.hpp>

#include "error.hpp"
#include "fileutil.hpp"
#include "hashing.hpp"

extern char** environ;

namespace tbench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_record(std::string_view source, std::size_t line, const std::string& what) {
  fail(ErrorKind::kInvalidInput, fmt::format("{}:{}: {}", source, line, what));
}

template <typename Fn>
void for_each_record(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first != std::string_view::npos && line[first] != '#') fn(line, line_no);
    if (end == text.size()) break;
    start = end + 1;
  }
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

std::string expand_command(const std::string& command, const fs::path& requests, const fs::path& response) {
  std::string cmd = command;
  bool substituted = false;
  auto replace = [&](const std::string& key, const std::string& value) {
    for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size())) {
      cmd.replace(pos, key.size(), value);
      substituted = true;
    }
  };
  replace("{requests}", shell_quote(requests.string()));
  replace("{response}", shell_quote(response.string()));
  if (!substituted) cmd += " " + shell_quote(requests.string()) + " " + shell_quote(response.string());
  return cmd;
}

struct ProcessResult {
  int exit_code = 0;
  std::string stderr_text;
};

ProcessResult run_shell(const std::string& command, const fs::path& stderr_path) {
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 1, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_addopen(&actions, 2, stderr_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  std::string sh = "/bin/sh", flag = "-c", cmd = command;
  char* argv[] = {sh.data(), flag.data(), cmd.data(), nullptr};
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) fail(ErrorKind::kAdapter, "failed to launch adapter: " + std::string(std::strerror(rc)));
  int status = 0;
  while (waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) fail(ErrorKind::kAdapter, "failed waiting for adapter process");
  }
  ProcessResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  std::error_code ec;
  if (fs::exists(stderr_path, ec)) res.stderr_text = read_file(stderr_path);
  return res;
}

// One adapter process at a time per adapter identity.
std::mutex& adapter_mutex(const AdapterSpec& spec) {
  static std::mutex registry_mutex;
  static std::map<std::string, std::mutex> registry;
  std::lock_guard lock(registry_mutex);
  return registry[spec.name + '\n' + spec.command];
}

std::string sanitize(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

fs::path cache_entry(const fs::path& dir, const std::string& model, Modality kind, const std::string& hash) {
  return dir / sanitize(model) / std::string(modality_name(kind)) / (hash + ".json");
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "tbench-adapter-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) fail(ErrorKind::kIo, "cannot create temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

}  // namespace

std::string_view modality_name(Modality kind) { return kind == Modality::kAudio ? "audio" : "text"; }

Modality parse_modality(std::string_view text) {
  if (text == "audio") return Modality::kAudio;
  if (text == "text") return Modality::kText;
  fail(ErrorKind::kInvalidInput, fmt::format("unknown embedding kind '{}'", text));
}

double cosine_similarity(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorKind::kInvalidInput,
         fmt::format("cosine similarity: dimension mismatch ({} vs {})", x.size(), y.size()));
  }
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  if (xx == 0.0 || yy == 0.0) fail(ErrorKind::kInvalidInput, "cosine similarity: zero vector");
  return std::clamp(dot / (std::sqrt(xx) * std::sqrt(yy)), -1.0, 1.0);
}

double cosine_similarity(const Embedding& x, const Embedding& y) {
  if (x.model != y.model) {
    fail(ErrorKind::kInvalidInput, fmt::format("cannot compare embeddings from models '{}' and '{}'",
                                               x.model, y.model));
  }
  try {
    return cosine_similarity(std::span<const double>(x.vector), std::span<const double>(y.vector));
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("{} ({} vs {})", e.what(), x.id, y.id));
  }
}

std::vector<Embedding> parse_embeddings(std::string_view text, std::string_view source) {
  std::vector<Embedding> out;
  std::set<std::string> seen;
  std::map<std::string, std::size_t> model_dim;
  for_each_record(text, [&](std::string_view line, std::size_t line_no) {
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      bad_record(source, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object()) bad_record(source, line_no, "record is not an object");
    Embedding emb;
    try {
      emb.id = rec.at("id").get<std::string>();
      emb.kind = parse_modality(rec.at("kind").get<std::string>());
      emb.model = rec.at("model").get<std::string>();
      const auto dim = rec.at("dim").get<std::int64_t>();
      const auto& vec = rec.at("vector");
      if (!vec.is_array()) bad_record(source, line_no, "vector is not an array");
      if (dim < 1) bad_record(source, line_no, fmt::format("id {}: dim must be >= 1", emb.id));
      if (vec.size() != static_cast<std::size_t>(dim)) {
        bad_record(source, line_no,
                   fmt::format("id {}: vector has {} entries but dim is {}", emb.id, vec.size(), dim));
      }
      emb.vector.reserve(vec.size());
      for (const auto& v : vec) {
        if (!v.is_number()) bad_record(source, line_no, fmt::format("id {}: non-numeric vector entry", emb.id));
        emb.vector.push_back(v.get<double>());
      }
    } catch (const json::exception& e) {
      bad_record(source, line_no, std::string("malformed record: ") + e.what());
    } catch (const Error& e) {
      if (std::string_view(e.what()).starts_with(source)) throw;
      bad_record(source, line_no, e.what());
    }
    double norm = 0.0;
    for (double v : emb.vector) {
      if (!std::isfinite(v)) bad_record(source, line_no, fmt::format("id {}: non-finite value", emb.id));
      norm += v * v;
    }
    if (norm == 0.0) bad_record(source, line_no, fmt::format("id {}: zero vector", emb.id));
    if (!seen.insert(emb.id).second) bad_record(source, line_no, fmt::format("duplicate id {}", emb.id));
    auto [it, inserted] = model_dim.emplace(emb.model, emb.dim());
    if (!inserted && it->second != emb.dim()) {
      bad_record(source, line_no,
                 fmt::format("id {}: dim {} differs from dim {} of earlier '{}' records", emb.id,
                             emb.dim(), it->second, emb.model));
    }
    out.push_back(std::move(emb));
  });
  return out;
}

std::string format_embeddings(std::span<const Embedding> embeddings) {
  std::string out;
  for (const auto& e : embeddings) {
    json rec = json::object();
    rec["id"] = e.id;
    rec["kind"] = modality_name(e.kind);
    rec["model"] = e.model;
    rec["dim"] = e.dim();
    rec["vector"] = e.vector;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<Embedding> load_embeddings(const fs::path& path) {
  return parse_embeddings(read_file(path), path.string());
}

void save_embeddings(std::span<const Embedding> embeddings, const fs::path& path) {
  std::set<std::string> seen;
  for (const auto& e : embeddings) {
    if (!seen.insert(e.id).second) fail(ErrorKind::kInvalidInput, "duplicate embedding id " + e.id);
  }
  write_file_atomic(path, format_embeddings(embeddings));
}

std::string format_requests(std::span<const EmbedRequest> requests) {
  std::string out;
  for (const auto& r : requests) {
    json rec = json::object();
    rec["id"] = r.id;
    rec["kind"] = modality_name(r.kind);
    rec["payload"] = r.payload;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<EmbedRequest> parse_requests(std::string_view text, std::string_view source) {
  std::vector<EmbedRequest> out;
  std::set<std::string> seen;
  for_each_record(text, [&](std::string_view line, std::size_t line_no) {
    EmbedRequest req;
    try {
      const auto rec = json::parse(line);
      req.id = rec.at("id").get<std::string>();
      req.kind = parse_modality(rec.at("kind").get<std::string>());
      req.payload = rec.at("payload").get<std::string>();
    } catch (const json::exception& e) {
      bad_record(source, line_no, std::string("malformed request: ") + e.what());
    } catch (const Error& e) {
      bad_record(source, line_no, e.what());
    }
    if (!seen.insert(req.id).second) bad_record(source, line_no, "duplicate request id " + req.id);
    out.push_back(std::move(req));
  });
  return out;
}

std::string payload_content_hash(const EmbedRequest& request) {
  if (request.kind == Modality::kText) return sha256_hex(request.payload);
  return sha256_file(request.payload);
}

std::vector<Embedding> run_adapter(const AdapterSpec& spec, std::span<const EmbedRequest> requests,
                                   const AdapterOptions& options, AdapterRunStats* stats) {
  AdapterRunStats local;
  local.requested = requests.size();
  if (spec.command.empty()) fail(ErrorKind::kInvalidInput, "adapter '" + spec.name + "': empty command");
  if (requests.empty()) {
    if (stats) *stats = local;
    return {};
  }

  {
    std::set<std::string> ids;
    for (const auto& r : requests) {
      if (!ids.insert(r.id).second) fail(ErrorKind::kInvalidInput, "duplicate request id " + r.id);
    }
  }

  std::vector<Embedding> result(requests.size());
  std::vector<std::string> hashes(requests.size());
  std::vector<std::size_t> pending;
  const bool caching = !options.cache_dir.empty();
  for (std::size_t i = 0; i < requests.size(); ++i) {
    const auto& req = requests[i];
    result[i].id = req.id;
    result[i].kind = req.kind;
    result[i].model = spec.model_name;
    if (caching) {
      hashes[i] = payload_content_hash(req);
      const auto entry = cache_entry(options.cache_dir, spec.model_name, req.kind, hashes[i]);
      std::error_code ec;
      if (fs::exists(entry, ec)) {
        try {
          result[i].vector = json::parse(read_file(entry)).get<std::vector<double>>();
          ++local.cache_hits;
          continue;
        } catch (const json::exception&) {
          // Unreadable entry; recompute it.
        }
      }
    }
    pending.push_back(i);
  }

  if (!pending.empty()) {
    std::optional<TempDir> temp;
    fs::path work = options.work_dir;
    if (work.empty()) {
      temp.emplace();
      work = temp->path();
    } else {
      fs::create_directories(work);
    }
    const auto req_path = work / "requests.jsonl";
    const auto resp_path = work / "response.jsonl";
    const auto err_path = work / "adapter.stderr";

    std::vector<EmbedRequest> batch;
    batch.reserve(pending.size());
    for (auto i : pending) batch.push_back(requests[i]);

    std::vector<Embedding> response;
    {
      std::lock_guard lock(adapter_mutex(spec));
      write_file_atomic(req_path, format_requests(batch));
      std::error_code ec;
      fs::remove(resp_path, ec);
      const auto proc = run_shell(expand_command(spec.command, req_path, resp_path), err_path);
      ++local.invocations;
      if (proc.exit_code != 0) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}' exited with code {}{}{}", spec.name,
                                              proc.exit_code, proc.stderr_text.empty() ? "" : ":\n",
                                              proc.stderr_text));
      }
      if (!fs::exists(resp_path, ec)) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}' wrote no response file", spec.name));
      }
      try {
        response = load_embeddings(resp_path);
      } catch (const Error& e) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}': {}", spec.name, e.what()));
      }
    }

    std::unordered_map<std::string, std::size_t> slot;
    for (auto i : pending) slot.emplace(requests[i].id, i);
    std::vector<bool> answered(requests.size(), false);
    for (auto& emb : response) {
      auto it = slot.find(emb.id);
      if (it == slot.end()) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}' answered unknown id {}", spec.name, emb.id));
      }
      const auto i = it->second;
      if (emb.kind != requests[i].kind) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}': id {} returned as {} but requested as {}",
                                              spec.name, emb.id, modality_name(emb.kind),
                                              modality_name(requests[i].kind)));
      }
      answered[i] = true;
      result[i].vector = std::move(emb.vector);
    }
    for (auto i : pending) {
      if (!answered[i]) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}' did not answer id {}", spec.name, requests[i].id));
      }
    }
  }

  const std::size_t dim = spec.expected_dim.value_or(result.front().dim());
  for (const auto& e : result) {
    if (e.dim() != dim) {
      fail(ErrorKind::kAdapter, fmt::format("adapter '{}': id {} has dim {}, expected {}", spec.name,
                                            e.id, e.dim(), dim));
    }
    for (double v : e.vector) {
      if (!std::isfinite(v)) {
        fail(ErrorKind::kAdapter, fmt::format("adapter '{}': id {} has non-finite values", spec.name, e.id));
      }
    }
  }

  if (caching) {
    for (auto i : pending) {
      const auto entry = cache_entry(options.cache_dir, spec.model_name, requests[i].kind, hashes[i]);
      write_file_atomic(entry, json(result[i].vector).dump());
    }
  }
  if (stats) *stats = local;
  return result;
}

}  // namespace tbench
