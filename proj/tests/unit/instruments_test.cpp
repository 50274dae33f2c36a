#include "instruments.hpp"

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "error.hpp"
#include "test_support.hpp"

using namespace tbench;
using Catch::Matchers::ContainsSubstring;
using tbench::testing::oracle_vectors;
using tbench::testing::ratings_csv;
using tbench::testing::synthetic_ratings;

namespace {

struct Indexed {
  EmbeddingIndex audio, text;
  std::vector<std::string> ids;
};

Indexed index_vectors(const RatingsTable& t, const std::vector<std::vector<double>>& audio,
                      const std::vector<std::vector<double>>& text) {
  Indexed x;
  for (std::size_t i = 0; i < t.instruments.size(); ++i) {
    x.ids.push_back(t.instruments[i].id);
    x.audio[t.instruments[i].id] = {t.instruments[i].id, Modality::kAudio, "m", audio[i]};
  }
  for (std::size_t d = 0; d < t.descriptors.size(); ++d) {
    x.text[t.descriptors[d]] = {t.descriptors[d], Modality::kText, "m", text[d]};
  }
  return x;
}

SimilarityMatrix with_values(const RatingsTable& t, std::vector<std::vector<double>> values) {
  SimilarityMatrix s;
  for (const auto& inst : t.instruments) s.instrument_ids.push_back(inst.id);
  s.descriptors = t.descriptors;
  s.values = std::move(values);
  return s;
}

}  // namespace

TEST_CASE("ratings CSV parsing") {
  const std::string text =
      "instrument_id,instrument_name,group,descriptor,rating\n"
      "erhu,Erhu,Chinese,bright,6.5\n"
      "erhu,Erhu,Chinese,dark,3\n"
      "cello,Cello,western,bright,4.25\n"
      "cello,Cello,western,dark,7\n";
  const auto t = parse_ratings_csv(text);
  REQUIRE(t.instruments.size() == 2);
  CHECK(t.instruments[0].id == "erhu");
  CHECK(t.instruments[0].group == InstrumentGroup::kChinese);
  CHECK(t.instruments[1].group == InstrumentGroup::kWestern);
  CHECK(t.descriptors == std::vector<std::string>{"bright", "dark"});
  CHECK(t.ratings[1][0] == 4.25);

  CHECK_THROWS_WITH(parse_ratings_csv(text.substr(0, text.rfind("cello,Cello,western,dark"))),
                    ContainsSubstring("missing rating for instrument cello, descriptor dark"));
  CHECK_THROWS_WITH(parse_ratings_csv(text + "erhu,Erhu,Chinese,dark,3\n"), ContainsSubstring("duplicate"));
  CHECK_THROWS_WITH(parse_ratings_csv(text + "pipa,Pipa,Chinese,bright,9.5\n"), ContainsSubstring("outside [1, 9]"));
  CHECK_THROWS_AS(parse_ratings_csv(text + "pipa,Pipa,nordic,bright,5\npipa,Pipa,nordic,dark,5\n"), Error);
  CHECK_THROWS_AS(parse_ratings_csv("id,name\nerhu,Erhu\n"), Error);
  CHECK_THROWS_AS(parse_ratings_csv(text + "pipa,Pipa,Chinese,bright,abc\n"), Error);
}

TEST_CASE("ratings CSV round trip at full dataset scale") {
  const auto t = synthetic_ratings(37, 24, 16, 1);
  const auto back = parse_ratings_csv(ratings_csv(t));
  REQUIRE(back.instruments.size() == 61);
  REQUIRE(back.descriptors.size() == 16);
  for (std::size_t i = 0; i < 61; ++i) {
    CHECK(back.instruments[i].id == t.instruments[i].id);
    for (std::size_t d = 0; d < 16; ++d) REQUIRE(back.ratings[i][d] == Catch::Approx(t.ratings[i][d]).margin(1e-12));
  }
}

TEST_CASE("similarity matrix construction") {
  SECTION("single identical pair") {
    EmbeddingIndex a{{"x", {"x", Modality::kAudio, "m", {0.3, -0.2}}}};
    EmbeddingIndex t{{"d", {"d", Modality::kText, "m", {0.3, -0.2}}}};
    const std::vector<std::string> ids{"x"}, ds{"d"};
    const auto s = compute_similarity_matrix(ids, ds, a, t);
    REQUIRE(s.values.size() == 1);
    CHECK(s.values[0][0] == Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("basis construction") {
    EmbeddingIndex a, t;
    std::vector<std::string> ids{"x"}, ds;
    for (int d = 0; d < 5; ++d) {
      std::vector<double> e(5, 0.0);
      e[d] = 1.0;
      ds.push_back("d" + std::to_string(d));
      t[ds.back()] = {ds.back(), Modality::kText, "m", e};
    }
    a["x"] = {"x", Modality::kAudio, "m", {0, 0, 1, 0, 0}};
    const auto s = compute_similarity_matrix(ids, ds, a, t);
    CHECK(s.values[0] == std::vector<double>{0, 0, 1, 0, 0});
  }
  SECTION("dataset shape") {
    const auto t = synthetic_ratings(37, 24, 16, 2);
    const auto o = oracle_vectors(t);
    const auto x = index_vectors(t, o.audio, o.text);
    const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
    CHECK(s.values.size() == 61);
    for (const auto& row : s.values) CHECK(row.size() == 16);
  }
  SECTION("missing embeddings are named") {
    const auto t = synthetic_ratings(3, 0, 2, 3);
    const auto o = oracle_vectors(t);
    auto x = index_vectors(t, o.audio, o.text);
    x.audio.erase("cn1");
    CHECK_THROWS_WITH(compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text), ContainsSubstring("cn1"));
    x = index_vectors(t, o.audio, o.text);
    x.text.erase("desc1");
    CHECK_THROWS_WITH(compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text), ContainsSubstring("desc1"));
  }
}

TEST_CASE("descriptor-level correlation under affine maps") {
  const auto t = synthetic_ratings(10, 5, 6, 4);
  std::vector<std::vector<double>> up, down;
  for (const auto& row : t.ratings) {
    std::vector<double> a, b;
    for (double v : row) {
      a.push_back(0.07 * v - 0.2);
      b.push_back(-(v - 5.0) * 0.1);
    }
    up.push_back(a);
    down.push_back(b);
  }
  for (const auto& r : descriptor_level_correlation(with_values(t, up), t)) CHECK(*r.r == Catch::Approx(1.0).margin(1e-12));
  for (const auto& r : descriptor_level_correlation(with_values(t, down), t)) CHECK(*r.r == Catch::Approx(-1.0).margin(1e-12));
}

TEST_CASE("oracle embedder gives perfect correlations at both levels") {
  const auto t = synthetic_ratings(37, 24, 16, 5);
  const auto o = oracle_vectors(t);
  const auto x = index_vectors(t, o.audio, o.text);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  const auto rd = descriptor_level_correlation(s, t);
  REQUIRE(rd.size() == 16);
  for (const auto& r : rd) CHECK(*r.r == Catch::Approx(1.0).margin(1e-9));
  const auto ri = instrument_level_correlation(s, t);
  REQUIRE(ri.size() == 61);
  for (const auto& r : ri) CHECK(*r.r == Catch::Approx(1.0).margin(1e-9));
  CHECK(summarize_group(ri, InstrumentGroup::kChinese).total == 37);
  CHECK(summarize_group(ri, InstrumentGroup::kWestern).total == 24);
}

TEST_CASE("unpadded rating vectors only preserve the instrument-level profile") {
  // With audio = h_i and text = e_d, s[i][d] = h[i][d] / |h_i|: each row is a
  // positive multiple of h_i, but columns are rescaled per instrument.
  const auto t = synthetic_ratings(20, 0, 8, 6);
  std::vector<std::vector<double>> basis;
  for (std::size_t d = 0; d < 8; ++d) {
    std::vector<double> e(8, 0.0);
    e[d] = 1.0;
    basis.push_back(e);
  }
  const auto x = index_vectors(t, t.ratings, basis);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  for (const auto& r : instrument_level_correlation(s, t)) CHECK(*r.r == Catch::Approx(1.0).margin(1e-9));
  bool any_below = false;
  for (const auto& r : descriptor_level_correlation(s, t)) any_below = any_below || *r.r < 1.0 - 1e-6;
  CHECK(any_below);
}

TEST_CASE("correlations ignore embedding scale") {
  const auto t = synthetic_ratings(8, 4, 16, 7);
  std::mt19937 rng(8);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> scale(0.01, 50.0);
  std::vector<std::vector<double>> audio(t.instruments.size(), std::vector<double>(12)), text(16, std::vector<double>(12));
  for (auto& v : audio)
    for (auto& c : v) c = g(rng);
  for (auto& v : text)
    for (auto& c : v) c = g(rng);
  const auto x = index_vectors(t, audio, text);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  auto scaled_audio = audio;
  auto scaled_text = text;
  for (auto& v : scaled_audio) {
    const double a = scale(rng);
    for (auto& c : v) c *= a;
  }
  for (auto& v : scaled_text) {
    const double a = scale(rng);
    for (auto& c : v) c *= a;
  }
  const auto y = index_vectors(t, scaled_audio, scaled_text);
  const auto s2 = compute_similarity_matrix(y.ids, t.descriptors, y.audio, y.text);
  const auto a1 = descriptor_level_correlation(s, t), a2 = descriptor_level_correlation(s2, t);
  for (std::size_t d = 0; d < a1.size(); ++d) CHECK(*a2[d].r == Catch::Approx(*a1[d].r).margin(1e-9));
  const auto b1 = instrument_level_correlation(s, t), b2 = instrument_level_correlation(s2, t);
  for (std::size_t i = 0; i < b1.size(); ++i) CHECK(*b2[i].r == Catch::Approx(*b1[i].r).margin(1e-9));
}

TEST_CASE("instrument order does not matter") {
  const auto t = synthetic_ratings(6, 6, 5, 9);
  std::mt19937 rng(10);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> audio(12, std::vector<double>(7)), text(5, std::vector<double>(7));
  for (auto& v : audio)
    for (auto& c : v) c = g(rng);
  for (auto& v : text)
    for (auto& c : v) c = g(rng);
  const auto x = index_vectors(t, audio, text);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  const auto rd = descriptor_level_correlation(s, t);
  const auto ri = instrument_level_correlation(s, t);

  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  RatingsTable p = t;
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < 12; ++k) {
    p.instruments[k] = t.instruments[perm[k]];
    p.ratings[k] = t.ratings[perm[k]];
    ids.push_back(t.instruments[perm[k]].id);
  }
  const auto sp = compute_similarity_matrix(ids, p.descriptors, x.audio, x.text);
  const auto rdp = descriptor_level_correlation(sp, p);
  const auto rip = instrument_level_correlation(sp, p);
  for (std::size_t d = 0; d < rd.size(); ++d) CHECK(*rdp[d].r == Catch::Approx(*rd[d].r).margin(1e-12));
  for (std::size_t k = 0; k < 12; ++k) {
    CHECK(rip[k].instrument.id == ri[perm[k]].instrument.id);
    CHECK(*rip[k].r == Catch::Approx(*ri[perm[k]].r).margin(1e-12));
  }
}

TEST_CASE("constant rating rows are undefined and counted separately") {
  auto t = synthetic_ratings(4, 0, 6, 11);
  t.ratings[2] = std::vector<double>(6, 5.0);
  const auto o = oracle_vectors(t);
  const auto x = index_vectors(t, o.audio, o.text);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  const auto ri = instrument_level_correlation(s, t);
  CHECK_FALSE(ri[2].r.has_value());
  const auto sum = summarize_group(ri, InstrumentGroup::kChinese);
  CHECK(sum.total == 4);
  CHECK(sum.undefined_count == 1);
  CHECK(sum.positive_count == 3);
  CHECK(*sum.mean_r == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("correlation preconditions") {
  const auto t = synthetic_ratings(2, 0, 4, 12);
  const auto o = oracle_vectors(t);
  const auto x = index_vectors(t, o.audio, o.text);
  const auto s = compute_similarity_matrix(x.ids, t.descriptors, x.audio, x.text);
  CHECK_THROWS_WITH(descriptor_level_correlation(s, t), ContainsSubstring("at least 3 instruments"));
}

TEST_CASE("clip averaging") {
  std::vector<Embedding> clips = {{"a", Modality::kAudio, "m", {1, 0}}, {"b", Modality::kAudio, "m", {0, 3}}};
  const auto avg = average_embeddings(clips, "inst");
  CHECK(avg.id == "inst");
  CHECK(avg.vector == std::vector<double>{0.5, 1.5});
  clips[1].vector = {1, 2, 3};
  CHECK_THROWS_AS(average_embeddings(clips, "inst"), Error);
  CHECK_THROWS_AS(average_embeddings({}, "inst"), Error);
}
