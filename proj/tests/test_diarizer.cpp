#include <map>
#include <random>
#include <set>

#include "diafactor/diarizer.hpp"
#include "diafactor/errors.hpp"
#include "diafactor/splicer.hpp"
#include "doctest.h"

using namespace diafactor;

namespace {

AudioBuffer noise(double seconds, unsigned seed, int sr = 8000) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> gauss(0.0f, 0.2f);
  AudioBuffer a;
  a.sample_rate = sr;
  a.samples.resize(std::llround(seconds * sr));
  for (Eigen::Index i = 0; i < a.samples.size(); ++i) a.samples[i] = gauss(rng);
  return a;
}

Subsegment sub_of(Ticks onset, Ticks duration, std::initializer_list<double> v) {
  Subsegment s;
  s.onset_ms = onset;
  s.duration_ms = duration;
  s.embedding = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s.embedding[i++] = x;
  s.embedding.normalize();
  return s;
}

// Fraction of subsegments that straddle a turn transition of the reference.
double boundary_fraction(const std::vector<Subsegment>& subs, const Timeline& ref) {
  std::set<Ticks> boundaries;
  const auto& segs = ref.segments();
  for (std::size_t i = 0; i + 1 < segs.size(); ++i)
    if (segs[i].offset_ms() == segs[i + 1].onset_ms && segs[i].label != segs[i + 1].label)
      boundaries.insert(segs[i].offset_ms());
  if (subs.empty()) return 0.0;
  int spanning = 0;
  for (const auto& s : subs)
    for (Ticks b : boundaries)
      if (s.onset_ms < b && b < s.offset_ms()) {
        ++spanning;
        break;
      }
  return static_cast<double>(spanning) / subs.size();
}

}  // namespace

TEST_SUITE("diarizer") {

TEST_CASE("window placement follows the hop-plus-flush rule") {
  auto a = noise(10.0, 1);

  // 3.0 s region: onsets 0.0, 0.75, 1.5; the flush window coincides with 1.5
  auto subs = extract_subsegments(a, Timeline("r", {{0, 3000, "speech"}}), {});
  REQUIRE(subs.size() == 3);
  CHECK(subs[0].onset_ms == 0);
  CHECK(subs[1].onset_ms == 750);
  CHECK(subs[2].onset_ms == 1500);
  for (const auto& s : subs) CHECK(s.duration_ms == 1500);

  // 2.6 s region: grid onsets 0.0, 0.75 then a flush window at 1.1
  subs = extract_subsegments(a, Timeline("r", {{0, 2600, "speech"}}), {});
  REQUIRE(subs.size() == 3);
  CHECK(subs[2].onset_ms == 1100);
  CHECK(subs[2].offset_ms() == 2600);

  // shorter than the window but at least half: one region-length window
  subs = extract_subsegments(a, Timeline("r", {{500, 900, "speech"}}), {});
  REQUIRE(subs.size() == 1);
  CHECK(subs[0].onset_ms == 500);
  CHECK(subs[0].duration_ms == 900);

  // shorter than half the window: nothing
  CHECK(extract_subsegments(a, Timeline("r", {{0, 700, "speech"}}), {}).empty());

  CHECK(extract_subsegments(a, Timeline{}, {}).empty());
  CHECK_THROWS_AS(extract_subsegments(a, Timeline("r", {{9500, 1000, "speech"}}), {}),
                  ValidationError);
}

TEST_CASE("embeddings are unit-norm and deterministic") {
  auto a = noise(5.0, 2);
  auto s1 = extract_subsegments(a, Timeline("r", {{0, 5000, "speech"}}), {});
  auto s2 = extract_subsegments(a, Timeline("r", {{0, 5000, "speech"}}), {});
  REQUIRE(!s1.empty());
  REQUIRE(s1.size() == s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i].embedding.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((s1[i].embedding - s2[i].embedding).norm() == 0.0);
    CHECK(s1[i].embedding.size() == 40);
  }
}

TEST_CASE("clustering splits duplicated orthogonal vectors perfectly") {
  std::vector<Subsegment> subs;
  for (int i = 0; i < 4; ++i) subs.push_back(sub_of(i * 100, 100, {1.0, 0.0, 0.0}));
  for (int i = 0; i < 4; ++i) subs.push_back(sub_of(400 + i * 100, 100, {0.0, 1.0, 0.0}));

  DiarizerConfig cfg;
  cfg.n_clusters = 2;
  auto labels = ahc_cluster(subs, cfg);
  CHECK(labels == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});

  cfg.n_clusters = kAutoClusters;  // threshold mode finds the same split
  cfg.stop_threshold = 0.5;
  CHECK(ahc_cluster(subs, cfg) == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1});

  cfg.n_clusters = static_cast<int>(subs.size());  // degenerate: no merges
  auto singletons = ahc_cluster(subs, cfg);
  CHECK(std::set<int>(singletons.begin(), singletons.end()).size() == subs.size());

  cfg.n_clusters = 9;
  CHECK_THROWS_AS(ahc_cluster(subs, cfg), ValidationError);
  CHECK_THROWS_AS(ahc_cluster({}, DiarizerConfig{}), ValidationError);
}

TEST_CASE("clustering separates two synthetic voices with high purity") {
  VoiceSpec low, high;
  low.f0 = 110.0;
  low.resonance_centers = {600.0, 1700.0};
  low.seed = 5;
  high.f0 = 220.0;
  high.resonance_centers = {1200.0, 3000.0};
  high.seed = 6;
  auto x = synth_speaker(low, 30.0, 8000, "x");
  auto y = synth_speaker(high, 30.0, 8000, "y");

  ConversationStructure st{"alt", {}, {}};
  for (int i = 0; i < 10; ++i) st.slots.push_back({i % 2 ? "B" : "A", 2000});
  ConversationVersion v;
  v.version_id = "alt__p__v1";
  v.structure = st;
  v.pair = {"p", {"x", "y"}, {}};
  v.assignment = {{{"A", "x"}, {"B", "y"}}, 1};
  auto r = render(v, {{"x", x}, {"y", y}}, 0.01);

  auto subs = extract_subsegments(r.audio, r.reference, {});
  REQUIRE(subs.size() >= 20);
  DiarizerConfig cfg;
  cfg.n_clusters = 2;
  auto labels = ahc_cluster(subs, cfg);

  // true owner of each window = speaker with the strict majority of its time;
  // windows split exactly in half have no owner and are skipped
  int agree = 0;
  int decided = 0;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    const auto& s = subs[i];
    const Ticks x_time =
        r.reference.label_intervals("x").intersect_total(s.onset_ms, s.offset_ms());
    if (2 * x_time == s.duration_ms) continue;
    ++decided;
    const int truth = 2 * x_time > s.duration_ms ? 0 : 1;
    if (labels[i] == truth) ++agree;
  }
  REQUIRE(decided >= 20);
  const double purity = std::max(agree, decided - agree) / static_cast<double>(decided);
  CHECK(purity >= 0.9);
}

TEST_CASE("majority vote paints labels back onto speech") {
  Timeline speech("r", {{0, 3000, "speech"}});
  std::vector<Subsegment> subs{sub_of(0, 1500, {1, 0}), sub_of(750, 1500, {0, 1}),
                               sub_of(1500, 1500, {0, 1})};
  std::vector<int> labels{0, 1, 1};
  auto hyp = labels_to_timeline(subs, labels, speech);

  // [0,750): only sub0 -> 0; [750,1500): tie, centers 750 vs 1500 equidistant
  // from 1125, earliest wins -> 0; [1500,3000): majority 1
  REQUIRE(hyp.size() == 2);
  CHECK(hyp.segments()[0] == Segment{0, 1500, "0"});
  CHECK(hyp.segments()[1] == Segment{1500, 1500, "1"});
  CHECK(hyp.covered_intervals() == speech.covered_intervals());
}

TEST_CASE("single cluster paints speech verbatim; pure regions keep boundaries") {
  Timeline speech("r", {{0, 2000, "speech"}, {3000, 1800, "speech"}});
  std::vector<Subsegment> subs{sub_of(0, 1500, {1, 0}), sub_of(500, 1500, {1, 0}),
                               sub_of(3000, 1500, {0, 1}), sub_of(3300, 1500, {0, 1})};

  auto one = labels_to_timeline(subs, {0, 0, 0, 0}, speech);
  REQUIRE(one.size() == 2);
  CHECK(one.labels() == std::vector<std::string>{"0"});
  CHECK(one.covered_intervals() == speech.covered_intervals());

  auto two = labels_to_timeline(subs, {0, 0, 1, 1}, speech);
  REQUIRE(two.size() == 2);
  CHECK(two.segments()[0] == Segment{0, 2000, "0"});
  CHECK(two.segments()[1] == Segment{3000, 1800, "1"});
}

TEST_CASE("uncovered speech takes the nearest subsegment's label") {
  // second region is 0.5 s: too short for a window, inherits from the nearest
  Timeline speech("r", {{0, 1500, "speech"}, {5000, 500, "speech"}});
  std::vector<Subsegment> subs{sub_of(0, 1500, {1, 0})};
  auto hyp = labels_to_timeline(subs, {0}, speech);
  REQUIRE(hyp.size() == 2);
  CHECK(hyp.segments()[1] == Segment{5000, 500, "0"});
  CHECK(hyp.total_speech_ms() == 2000);
}

TEST_CASE("diarize end to end is deterministic and conserves speech time") {
  VoiceSpec low, high;
  low.f0 = 120.0;
  low.seed = 7;
  high.f0 = 230.0;
  high.seed = 8;
  auto x = synth_speaker(low, 20.0, 8000, "x");
  auto y = synth_speaker(high, 20.0, 8000, "y");
  ConversationStructure st{"s", {}, {{"A", 2100}, {"B", 1400}, {"SIL", 600}, {"A", 2000},
                                     {"B", 900}}};
  ConversationVersion v;
  v.version_id = "s__p__v1";
  v.structure = st;
  v.pair = {"p", {"x", "y"}, {}};
  v.assignment = {{{"A", "x"}, {"B", "y"}}, 1};
  auto r = render(v, {{"x", x}, {"y", y}}, 0.01);

  auto h1 = diarize(r.audio, r.reference, {});
  auto h2 = diarize(r.audio, r.reference, {});
  CHECK(h1 == h2);
  CHECK(h1.covered_intervals() == r.reference.covered_intervals());
  CHECK_FALSE(h1.has_overlap());
  CHECK(h1.labels().size() <= 2);

  CHECK(diarize(r.audio, Timeline{}, {}).empty());
}

TEST_CASE("halving the window does not raise the boundary-spanning fraction") {
  std::mt19937 rng(71);
  std::uniform_int_distribution<int> dur(800, 3000);
  auto a = noise(60.0, 3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Segment> segs;
    Ticks at = 0;
    for (int i = 0; i < 12; ++i) {
      Ticks d = dur(rng);
      segs.push_back({at, d, i % 2 ? "b" : "a"});
      at += d;
    }
    Timeline ref("r", segs);
    DiarizerConfig wide, narrow;
    narrow.window = 0.75;
    narrow.hop = 0.375;
    auto wide_subs = extract_subsegments(a, ref, wide);
    auto narrow_subs = extract_subsegments(a, ref, narrow);
    CHECK(boundary_fraction(narrow_subs, ref) <= boundary_fraction(wide_subs, ref) + 1e-12);
  }
}

}  // TEST_SUITE
