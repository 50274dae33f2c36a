#pragma once

// End-to-end fixture: a complete input tree (ratings, instrument clips,
// reference audio, effect settings), oracle embedders and a run config.

#include <string>
#include <vector>

#include "test_support.hpp"

namespace tbench::testing {

struct ScenarioOptions {
  std::size_t chinese = 37;
  std::size_t western = 24;
  std::size_t rating_descriptors = 16;
  std::size_t eq_descriptors = 20;
  std::size_t reverb_descriptors = 20;
  // Reverb descriptors start at this index of the shared effect vocabulary,
  // so descriptors [offset, eq_descriptors) carry both effects.
  std::size_t reverb_offset = 10;
  std::vector<double> levels = {0.3, 0.6, 1.0};
  // One adapter per entry: (model name, +1 for the monotone embedder, -1 for
  // its sign flip).
  std::vector<std::pair<std::string, int>> models = {{"oracle-up", 1}, {"oracle-down", -1}};
};

struct Scenario {
  fs::path root;
  fs::path config;
  fs::path output;
  RatingsTable ratings;
  std::vector<std::string> eq_descriptors;
  std::vector<std::string> reverb_descriptors;
  // Descriptors that have both EQ and reverb settings.
  std::vector<std::string> shared_descriptors;
};

inline std::string effect_descriptor(std::size_t k) {
  return (k < 10 ? "fx0" : "fx") + std::to_string(k);
}

inline std::string level_text(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", level);
  return buf;
}

// Vector layout shared by every request of one model so batches have a
// single dimension:
//   [0, D)          rating descriptors (text e_d; clip = rating vector)
//   D               norm padding for clip vectors
//   [D+1, D+1+E)    effect descriptors (text +-e_k)
//   D+1+E           reference axis
//   D+2+E           reverb axis
// An EQ variant at level l is l*e_k + e_ref, so cos(text_k, variant) =
// +-l / sqrt(l^2 + 1) rises (or falls) strictly with l; the reference scores
// 0. Reverb variants add 0.5*e_rev (cos = +-l / sqrt(l^2 + 1.25)) so the two
// effects never share an embedding.
inline Scenario build_scenario(const fs::path& root, const ScenarioOptions& opt = {}) {
  Scenario sc;
  sc.root = root;
  sc.output = root / "out";
  sc.ratings = synthetic_ratings(opt.chinese, opt.western, opt.rating_descriptors, 42);
  write_text(root / "ratings.csv", ratings_csv(sc.ratings));

  const std::size_t D = opt.rating_descriptors;
  const std::size_t E = std::max(opt.eq_descriptors, opt.reverb_offset + opt.reverb_descriptors);
  const std::size_t dim = D + 3 + E;
  const std::size_t pad = D, ref_axis = D + 1 + E, reverb_axis = D + 2 + E;

  const auto oracle = oracle_vectors(sc.ratings);
  nlohmann::json by_id = nlohmann::json::object();
  for (std::size_t i = 0; i < sc.ratings.instruments.size(); ++i) {
    const auto& id = sc.ratings.instruments[i].id;
    // Distinct content per instrument keeps the content-addressed cache honest.
    const auto clip = AudioBuffer::mono(sine(110.0 + 7.0 * static_cast<double>(i), 8000, 400, 0.3), 8000);
    write_wav(clip, root / "clips" / (id + ".wav"), WavFormat::kPcm16);
    std::vector<double> v(dim, 0.0);
    for (std::size_t d = 0; d < D; ++d) v[d] = oracle.audio[i][d];
    v[pad] = oracle.audio[i][D];
    by_id["clip:" + id + ":" + id + ".wav"] = v;
  }
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<double> v(dim, 0.0);
    v[d] = 1.0;
    by_id["text:" + sc.ratings.descriptors[d]] = v;
  }

  write_wav(AudioBuffer::mono(sine(261.63, 16000, 4000, 0.4), 16000), root / "reference.wav", WavFormat::kPcm16);
  std::vector<nlohmann::json> eq_records, reverb_records;
  for (std::size_t k = 0; k < opt.eq_descriptors; ++k) {
    sc.eq_descriptors.push_back(effect_descriptor(k));
    eq_records.push_back(eq_record(varied_eq(effect_descriptor(k), static_cast<unsigned>(k))));
  }
  for (std::size_t k = opt.reverb_offset; k < opt.reverb_offset + opt.reverb_descriptors; ++k) {
    sc.reverb_descriptors.push_back(effect_descriptor(k));
    reverb_records.push_back(reverb_record(varied_reverb(effect_descriptor(k), static_cast<unsigned>(k))));
    if (k < opt.eq_descriptors) sc.shared_descriptors.push_back(effect_descriptor(k));
  }
  write_text(root / "eq.jsonl", jsonl(eq_records));
  write_text(root / "reverb.jsonl", jsonl(reverb_records));

  {
    std::vector<double> v(dim, 0.0);
    v[ref_axis] = 1.0;
    by_id["reference"] = v;
  }
  auto add_variants = [&](const char* effect, const std::vector<std::string>& names) {
    for (const auto& name : names) {
      const std::size_t k = static_cast<std::size_t>(std::stoi(name.substr(2)));
      for (double level : opt.levels) {
        std::vector<double> v(dim, 0.0);
        v[D + 1 + k] = level;
        v[ref_axis] = 1.0;
        if (std::string_view(effect) == "reverb") v[reverb_axis] = 0.5;
        by_id[std::string(effect) + "/" + name + "/" + level_text(level)] = v;
      }
    }
  };
  add_variants("eq", sc.eq_descriptors);
  add_variants("reverb", sc.reverb_descriptors);

  nlohmann::json adapters = nlohmann::json::array();
  for (const auto& [model, sign] : opt.models) {
    nlohmann::json ids = by_id;
    for (std::size_t k = 0; k < E; ++k) {
      std::vector<double> v(dim, 0.0);
      v[D + 1 + k] = static_cast<double>(sign);
      ids["text:" + effect_descriptor(k)] = v;
    }
    const auto fixture = root / ("fixture-" + model + ".json");
    write_text(fixture, nlohmann::json{{"model", model}, {"by_id", ids}}.dump());
    adapters.push_back({{"name", model}, {"command", fixture_command(fixture)}, {"model_name", model}});
  }

  nlohmann::json config = {{"adapters", adapters},
                           {"reference_audio", "reference.wav"},
                           {"ratings_csv", "ratings.csv"},
                           {"instrument_audio_dir", "clips"},
                           {"eq_settings", "eq.jsonl"},
                           {"reverb_settings", "reverb.jsonl"},
                           {"levels", opt.levels},
                           {"output_dir", "out"}};
  sc.config = root / "config.json";
  write_text(sc.config, config.dump(2));
  return sc;
}

}  // namespace tbench::testing
